//! Flat key=value run configuration.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::optics::{CrystalPumpConfig, GainCalibration, MismatchModel};
use crate::recon::{CenterPolicy, Estimator, ReconConfig};
use crate::spdc::{QuadratureSettings, WavevectorGrid};
use crate::thermal::NoiseModel;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisOptions {
    pub n_frames: usize,
    pub seed: u64,
    pub noise: NoiseModel,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            n_frames: 2000,
            seed: 1,
            noise: NoiseModel::default(),
        }
    }
}

/// Everything a command needs, with defaults for every key.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub crystal: CrystalPumpConfig,
    pub grid: WavevectorGrid,
    pub quad: QuadratureSettings,
    pub recon: ReconConfig,
    pub synthesis: SynthesisOptions,
    /// Pump amplitudes visited by `sweep`.
    pub gains: Vec<f64>,
    /// Number of 2D mode grids written into result bundles.
    pub modes_2d: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            crystal: CrystalPumpConfig::default(),
            grid: WavevectorGrid::camera_default(),
            quad: QuadratureSettings::default(),
            recon: ReconConfig::default(),
            synthesis: SynthesisOptions::default(),
            gains: vec![1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8],
            modes_2d: 4,
        }
    }
}

/// Keys in echo order.
pub const KEYS: &[&str] = &[
    "lambda_p",
    "lambda_s",
    "crystal_length",
    "pump_waist",
    "gain",
    "theta_p",
    "c1",
    "c2",
    "calibration",
    "mismatch",
    "n_points",
    "pitch_mrad",
    "quad_initial_nodes",
    "quad_tolerance",
    "quad_max_nodes",
    "quad_cutoff_waists",
    "n_angles",
    "slice_length",
    "center",
    "estimator",
    "n_keep",
    "n_frames",
    "seed",
    "read_noise",
    "offset",
    "quantize",
    "gains",
    "modes_2d",
];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse '{v}': {e}")))
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let c = &mut self.crystal;
        match key {
            "lambda_p" => c.lambda_p = num(key, v)?,
            "lambda_s" => c.lambda_s = num(key, v)?,
            "crystal_length" => c.crystal_length = num(key, v)?,
            "pump_waist" => c.pump_waist = num(key, v)?,
            "gain" => c.gain = num(key, v)?,
            "theta_p" => c.theta_p = num(key, v)?,
            "c1" => c.c1 = num(key, v)?,
            "c2" => c.c2 = if v == "auto" { None } else { Some(num(key, v)?) },
            "calibration" => {
                c.calibration = match v {
                    "threshold" => GainCalibration::Threshold,
                    "collinear" => GainCalibration::Collinear,
                    _ => return Err(Error::Config(format!("calibration: unknown '{v}'"))),
                }
            }
            "mismatch" => {
                c.mismatch = match v {
                    "energy-conserving" => MismatchModel::EnergyConserving,
                    "degenerate" => MismatchModel::Degenerate,
                    _ => return Err(Error::Config(format!("mismatch: unknown '{v}'"))),
                }
            }
            "n_points" => {
                self.grid = WavevectorGrid::new(num(key, v)?, self.grid.pitch_mrad)
                    .map_err(|e| Error::Config(format!("{key}: {e}")))?
            }
            "pitch_mrad" => {
                self.grid = WavevectorGrid::new(self.grid.n_points, num(key, v)?)
                    .map_err(|e| Error::Config(format!("{key}: {e}")))?
            }
            "quad_initial_nodes" => self.quad.initial_nodes = num(key, v)?,
            "quad_tolerance" => self.quad.tolerance = num(key, v)?,
            "quad_max_nodes" => self.quad.max_nodes = num(key, v)?,
            "quad_cutoff_waists" => self.quad.cutoff_waists = num(key, v)?,
            "n_angles" => self.recon.n_angles = num(key, v)?,
            "slice_length" => {
                self.recon.length = if v == "auto" { None } else { Some(num(key, v)?) }
            }
            "center" => {
                self.recon.center = if v == "centroid" {
                    CenterPolicy::Centroid
                } else {
                    let (r, c) = v
                        .split_once(',')
                        .ok_or_else(|| Error::Config(format!("center: expected 'centroid' or 'row,col', got '{v}'")))?;
                    CenterPolicy::Explicit {
                        row: num(key, r.trim())?,
                        col: num(key, c.trim())?,
                    }
                }
            }
            "estimator" => {
                self.recon.estimator =
                    Estimator::parse(v).map_err(|e| Error::Config(format!("{key}: {e}")))?
            }
            "n_keep" => self.recon.n_keep = num(key, v)?,
            "n_frames" => self.synthesis.n_frames = num(key, v)?,
            "seed" => self.synthesis.seed = num(key, v)?,
            "read_noise" => self.synthesis.noise.read_noise = num(key, v)?,
            "offset" => self.synthesis.noise.offset = num(key, v)?,
            "quantize" => self.synthesis.noise.quantize = num(key, v)?,
            "gains" => {
                self.gains = v
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| num(key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "modes_2d" => self.modes_2d = num(key, v)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let c = &self.crystal;
        Some(match key {
            "lambda_p" => c.lambda_p.to_string(),
            "lambda_s" => c.lambda_s.to_string(),
            "crystal_length" => c.crystal_length.to_string(),
            "pump_waist" => c.pump_waist.to_string(),
            "gain" => c.gain.to_string(),
            "theta_p" => c.theta_p.to_string(),
            "c1" => c.c1.to_string(),
            "c2" => c.c2.map_or("auto".into(), |x| x.to_string()),
            "calibration" => match c.calibration {
                GainCalibration::Threshold => "threshold".into(),
                GainCalibration::Collinear => "collinear".into(),
            },
            "mismatch" => match c.mismatch {
                MismatchModel::EnergyConserving => "energy-conserving".into(),
                MismatchModel::Degenerate => "degenerate".into(),
            },
            "n_points" => self.grid.n_points.to_string(),
            "pitch_mrad" => self.grid.pitch_mrad.to_string(),
            "quad_initial_nodes" => self.quad.initial_nodes.to_string(),
            "quad_tolerance" => self.quad.tolerance.to_string(),
            "quad_max_nodes" => self.quad.max_nodes.to_string(),
            "quad_cutoff_waists" => self.quad.cutoff_waists.to_string(),
            "n_angles" => self.recon.n_angles.to_string(),
            "slice_length" => self.recon.length.map_or("auto".into(), |l| l.to_string()),
            "center" => match self.recon.center {
                CenterPolicy::Centroid => "centroid".into(),
                CenterPolicy::Explicit { row, col } => format!("{row},{col}"),
            },
            "estimator" => self.recon.estimator.as_str().into(),
            "n_keep" => self.recon.n_keep.to_string(),
            "n_frames" => self.synthesis.n_frames.to_string(),
            "seed" => self.synthesis.seed.to_string(),
            "read_noise" => self.synthesis.noise.read_noise.to_string(),
            "offset" => self.synthesis.noise.offset.to_string(),
            "quantize" => self.synthesis.noise.quantize.to_string(),
            "gains" => self
                .gains
                .iter()
                .map(|g| g.to_string())
                .collect::<Vec<_>>()
                .join(","),
            "modes_2d" => self.modes_2d.to_string(),
            _ => return None,
        })
    }

    /// Defaults overridden by the lines of `text`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got '{line}'", lineno + 1))
            })?;
            cfg.set(k.trim(), v)
                .map_err(|e| Error::Config(format!("line {}: {}", lineno + 1, strip(&e))))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Every key, one per line, in a form `parse` reproduces exactly.
    pub fn to_text(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{k}={}\n", self.get(k).expect("known key")))
            .collect()
    }
}

fn strip(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.set("c2", "0.125").unwrap();
        cfg.set("center", "31, 30").unwrap();
        cfg.set("slice_length", "41").unwrap();
        cfg.set("estimator", "subtract-then-sqrt").unwrap();
        cfg.set("gains", "1.18,1.38").unwrap();
        cfg.set("pitch_mrad", "0.1").unwrap();
        cfg.set("mismatch", "degenerate").unwrap();
        let text = cfg.to_text();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
        assert_eq!(RunConfig::parse(&RunConfig::default().to_text()).unwrap(), RunConfig::default());
    }

    #[test]
    fn comments_and_errors() {
        let cfg = RunConfig::parse("# header\n\ngain = 1.2\n").unwrap();
        assert_eq!(cfg.crystal.gain, 1.2);
        for bad in ["gain=abc", "nonsense=1", "no equals", "center=1", "n_points=1"] {
            assert!(matches!(RunConfig::parse(bad), Err(Error::Config(_))), "{bad}");
        }
    }
}
