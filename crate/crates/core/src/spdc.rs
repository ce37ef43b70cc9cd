//! Signal correlation function on one transverse axis.
//!
//! For a radially symmetric pump the angular part of the transverse
//! integral is a zeroth-order Bessel function, so every entry of the
//! correlation matrix becomes a one-dimensional radial quadrature.

use std::f64::consts::PI;

use faer::Mat;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::optics::{gain_kernel_from_radicand, CrystalPumpConfig, PhaseMatching};
use crate::special::{bessel_j0, gauss_legendre_on};

/// Uniform angular sampling of the signal far field along one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavevectorGrid {
    pub n_points: usize,
    /// Angular step, mrad per sample.
    pub pitch_mrad: f64,
    /// Index of q = 0; always `n_points / 2`.
    pub center_index: usize,
}

impl WavevectorGrid {
    pub fn new(n_points: usize, pitch_mrad: f64) -> Result<Self> {
        if n_points < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 points, got {n_points}"
            )));
        }
        if !(pitch_mrad.is_finite() && pitch_mrad > 0.0) {
            return Err(Error::Domain {
                quantity: "pitch_mrad",
                value: pitch_mrad,
                min: 0.0,
                max: f64::INFINITY,
            });
        }
        Ok(Self {
            n_points,
            pitch_mrad,
            center_index: n_points / 2,
        })
    }

    /// 256 samples spanning ±80 mrad.
    pub fn camera_default() -> Self {
        Self::new(256, 160.0 / 256.0).expect("valid default grid")
    }

    pub fn angle_mrad(&self, i: usize) -> f64 {
        (i as f64 - self.center_index as f64) * self.pitch_mrad
    }

    pub fn angles_mrad(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.angle_mrad(i)).collect()
    }

    /// Transverse wavevector (rad/um) of sample `i` for a signal of
    /// magnitude `k_s`.
    pub fn q(&self, i: usize, k_s: f64) -> f64 {
        self.angle_mrad(i) * 1e-3 * k_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Theory,
    Reconstructed,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Theory => "theory",
            Provenance::Reconstructed => "reconstructed",
        }
    }
}

/// Radial quadrature controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    pub initial_nodes: usize,
    /// Largest entry change between successive doublings, relative to the
    /// largest entry.
    pub tolerance: f64,
    pub max_nodes: usize,
    /// Upper radial limit in pump waists.
    pub cutoff_waists: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            initial_nodes: 256,
            tolerance: 1e-6,
            max_nodes: 16_384,
            cutoff_waists: 5.0,
        }
    }
}

/// How a theory matrix was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureReport {
    pub nodes: usize,
    /// Relative change at the final doubling.
    pub achieved: f64,
    /// Largest dropped imaginary part relative to the largest real entry.
    pub imaginary_residual: f64,
}

/// Real symmetric G⁽¹⁾(q, q′) on a grid.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub values: Mat<f64>,
    pub grid: WavevectorGrid,
    pub provenance: Provenance,
    pub quadrature: Option<QuadratureReport>,
}

impl CorrelationMatrix {
    pub fn new(values: Mat<f64>, grid: WavevectorGrid, provenance: Provenance) -> Result<Self> {
        if values.nrows() != grid.n_points || values.ncols() != grid.n_points {
            return Err(Error::InvalidArgument(format!(
                "matrix is {}x{} but grid has {} points",
                values.nrows(),
                values.ncols(),
                grid.n_points
            )));
        }
        Ok(Self {
            values,
            grid,
            provenance,
            quadrature: None,
        })
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.grid.n_points).map(|i| self.values[(i, i)]).collect()
    }
}

/// Far-field intensity I(q) = G⁽¹⁾(q, q).
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityProfile {
    pub values: Vec<f64>,
    pub grid: WavevectorGrid,
}

impl IntensityProfile {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn fwhm_mrad(&self) -> Result<f64> {
        crate::schmidt::profile_fwhm(&self.values, self.grid.pitch_mrad)
    }
}

/// Per-grid-point quantities that do not depend on the radial node.
struct SliceModel {
    pm: PhaseMatching,
    dk: Vec<f64>,
    k_sz: Vec<f64>,
    k_iz: Vec<f64>,
    dq: f64,
    c1: f64,
    gain: f64,
    waist: f64,
}

impl SliceModel {
    fn new(config: &CrystalPumpConfig, grid: &WavevectorGrid) -> Result<Self> {
        let pm = PhaseMatching::new(config)?;
        let wv = pm.wavevectors;
        let n = grid.n_points;
        let mut dk = Vec::with_capacity(n);
        let mut k_sz = Vec::with_capacity(n);
        let mut k_iz = Vec::with_capacity(n);
        for i in 0..n {
            let q = grid.q(i, wv.k_s);
            dk.push(pm.mismatch(q)?);
            k_sz.push(wv.k_sz(q)?);
            k_iz.push(wv.k_iz_bar(q)?);
        }
        Ok(Self {
            pm,
            dk,
            k_sz,
            k_iz,
            dq: grid.pitch_mrad * 1e-3 * wv.k_s,
            c1: config.c1,
            gain: config.gain,
            waist: config.pump_waist,
        })
    }

    fn len(&self) -> usize {
        self.dk.len()
    }

    /// Radial nodes and B(i, n) = K(q_i, ρ_n)·√(w_n·2πρ_n·|V_p(ρ_n)|²),
    /// stored row-major by grid index.
    fn weighted_kernels(&self, nodes: usize, cutoff: f64) -> (Vec<f64>, Vec<f64>) {
        let (rho, w) = gauss_legendre_on(nodes, 0.0, cutoff * self.waist);
        let l = self.pm.length;
        let n = self.len();
        let mut b = vec![0.0; n * nodes];
        for (k, (&r, &wk)) in rho.iter().zip(&w).enumerate() {
            let p = self.gain * self.gain * (-2.0 * r * r / (self.waist * self.waist)).exp();
            let sw = (wk * 2.0 * PI * r * p).sqrt();
            for i in 0..n {
                let radicand =
                    self.pm.c2 * p / (self.k_sz[i] * self.k_iz[i]) - 0.25 * self.dk[i] * self.dk[i];
                b[i * nodes + k] = gain_kernel_from_radicand(radicand, l) * sw;
            }
        }
        (rho, b)
    }

    /// Real and imaginary parts of the matrix at a fixed node count.
    fn matrix(&self, nodes: usize, cutoff: f64) -> (Mat<f64>, f64) {
        let n = self.len();
        let (rho, b) = self.weighted_kernels(nodes, cutoff);
        // J0 depends only on |i - j| on a uniform grid
        let j0: Vec<f64> = (0..n)
            .flat_map(|d| {
                let dq = d as f64 * self.dq;
                rho.iter().map(move |&r| bessel_j0(dq * r)).collect::<Vec<_>>()
            })
            .collect();
        let l = self.pm.length;
        let rows: Vec<Vec<(f64, f64)>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let bi = &b[i * nodes..(i + 1) * nodes];
                (i..n)
                    .map(|j| {
                        let bj = &b[j * nodes..(j + 1) * nodes];
                        let t = &j0[(j - i) * nodes..(j - i + 1) * nodes];
                        let s: f64 = bi.iter().zip(bj).zip(t).map(|((x, y), z)| x * y * z).sum();
                        let scale = self.c1 / (self.k_sz[i] * self.k_sz[j]) * s;
                        let phase = 0.5 * (self.dk[i] - self.dk[j]) * l;
                        (scale * phase.cos(), scale * phase.sin())
                    })
                    .collect()
            })
            .collect();
        let mut m = Mat::zeros(n, n);
        let mut imag = 0.0_f64;
        for (i, row) in rows.iter().enumerate() {
            for (off, &(re, im)) in row.iter().enumerate() {
                let j = i + off;
                m[(i, j)] = re;
                m[(j, i)] = re;
                imag = imag.max(im.abs());
            }
        }
        (m, imag)
    }

    fn diagonal(&self, nodes: usize, cutoff: f64) -> Vec<f64> {
        let (_, b) = self.weighted_kernels(nodes, cutoff);
        (0..self.len())
            .map(|i| {
                let bi = &b[i * nodes..(i + 1) * nodes];
                self.c1 / (self.k_sz[i] * self.k_sz[i]) * bi.iter().map(|x| x * x).sum::<f64>()
            })
            .collect()
    }
}

fn check_quadrature(quad: &QuadratureSettings) -> Result<()> {
    if quad.initial_nodes == 0 || quad.max_nodes < quad.initial_nodes {
        return Err(Error::InvalidArgument(format!(
            "quadrature nodes must satisfy 0 < initial ({}) <= max ({})",
            quad.initial_nodes, quad.max_nodes
        )));
    }
    if !(quad.tolerance > 0.0 && quad.cutoff_waists > 0.0) {
        return Err(Error::InvalidArgument(
            "quadrature tolerance and cutoff must be positive".into(),
        ));
    }
    Ok(())
}

/// Largest absolute change relative to the largest absolute entry.
fn relative_change(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn mat_entries(m: &Mat<f64>) -> Vec<f64> {
    (0..m.ncols()).flat_map(|j| (0..m.nrows()).map(move |i| m[(i, j)])).collect()
}

/// Theory G⁽¹⁾(q_x, q′_x) on the x-axis slice.
pub fn g1_slice(
    config: &CrystalPumpConfig,
    grid: &WavevectorGrid,
    quad: &QuadratureSettings,
) -> Result<CorrelationMatrix> {
    check_quadrature(quad)?;
    let model = SliceModel::new(config, grid)?;
    let mut nodes = quad.initial_nodes;
    let mut prev = mat_entries(&model.matrix(nodes, quad.cutoff_waists).0);
    let mut change = f64::NAN;
    while nodes * 2 <= quad.max_nodes {
        nodes *= 2;
        let (next, imag) = model.matrix(nodes, quad.cutoff_waists);
        let flat = mat_entries(&next);
        change = relative_change(&prev, &flat);
        if change <= quad.tolerance {
            let scale = flat.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            let mut out = CorrelationMatrix::new(next, *grid, Provenance::Theory)?;
            out.quadrature = Some(QuadratureReport {
                nodes,
                achieved: change,
                imaginary_residual: if scale > 0.0 { imag / scale } else { 0.0 },
            });
            return Ok(out);
        }
        prev = flat;
    }
    Err(Error::Accuracy {
        achieved: change,
        tolerance: quad.tolerance,
        nodes,
    })
}

/// Diagonal of [`g1_slice`] without the off-diagonal work.
pub fn far_field_intensity(
    config: &CrystalPumpConfig,
    grid: &WavevectorGrid,
    quad: &QuadratureSettings,
) -> Result<IntensityProfile> {
    check_quadrature(quad)?;
    let model = SliceModel::new(config, grid)?;
    let mut nodes = quad.initial_nodes;
    let mut prev = model.diagonal(nodes, quad.cutoff_waists);
    let mut change = f64::NAN;
    while nodes * 2 <= quad.max_nodes {
        nodes *= 2;
        let next = model.diagonal(nodes, quad.cutoff_waists);
        change = relative_change(&prev, &next);
        if change <= quad.tolerance {
            return Ok(IntensityProfile {
                values: next,
                grid: *grid,
            });
        }
        prev = next;
    }
    Err(Error::Accuracy {
        achieved: change,
        tolerance: quad.tolerance,
        nodes,
    })
}

/// Normalized degree of coherence as a function of sample separation.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceDegree {
    /// Separations (in samples) with at least one pair on the support.
    pub delta: Vec<usize>,
    pub g1: Vec<f64>,
    /// Largest |G/√(II′) − mean| at each separation.
    pub spread: Vec<f64>,
}

impl CoherenceDegree {
    /// Worst spread over all separations.
    pub fn max_spread(&self) -> f64 {
        self.spread.iter().fold(0.0, |m: f64, &s| m.max(s))
    }
}

/// Support threshold used by [`coherence_degree`], relative to max I.
pub const COHERENCE_SUPPORT: f64 = 1e-6;

pub fn coherence_degree(corr: &CorrelationMatrix) -> Result<CoherenceDegree> {
    coherence_degree_on(corr, COHERENCE_SUPPORT)
}

/// [`coherence_degree`] restricted to samples with I(q) > `threshold`·max I.
pub fn coherence_degree_on(corr: &CorrelationMatrix, threshold: f64) -> Result<CoherenceDegree> {
    let diag = corr.diagonal();
    let peak = diag.iter().fold(0.0_f64, |m, &x| m.max(x));
    if !(peak > 0.0) {
        return Err(Error::DegenerateInput("intensity is zero everywhere".into()));
    }
    let support: Vec<bool> = diag.iter().map(|&x| x > threshold * peak).collect();
    let n = diag.len();
    let mut out = CoherenceDegree {
        delta: Vec::new(),
        g1: Vec::new(),
        spread: Vec::new(),
    };
    for d in 0..n {
        let ratios: Vec<f64> = (0..n - d)
            .filter(|&i| support[i] && support[i + d])
            .map(|i| corr.values[(i, i + d)] / (diag[i] * diag[i + d]).sqrt())
            .collect();
        if ratios.is_empty() {
            continue;
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let spread = ratios.iter().fold(0.0_f64, |m, r| m.max((r - mean).abs()));
        out.delta.push(d);
        out.g1.push(mean);
        out.spread.push(spread);
    }
    if out.delta.is_empty() {
        return Err(Error::DegenerateInput("empty support".into()));
    }
    Ok(out)
}
