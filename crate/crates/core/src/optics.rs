//! Dispersion, phase matching and the parametric gain kernel.
//!
//! Units at every public boundary: lengths and wavelengths in micrometres,
//! wavevectors in rad/um, angles in degrees.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Validity window of the dispersion formula, in micrometres (exclusive).
pub const SELLMEIER_RANGE_UM: (f64, f64) = (0.2, 3.0);

/// Below this |Γ L| the sinhc series replaces the direct quotient.
const SINHC_SERIES_LIMIT: f64 = 1e-4;

/// How the gain-scaling constant C₂ is derived when not given explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainCalibration {
    /// C₂ = k_sz(0)·k̄_iz(0)/L², so Γ·L = g at the beam centre when the
    /// mismatch is zero.
    Collinear,
    /// The collinear constant scaled by 1 + (δL/2)², δ = max(Δk̄_z(0), 0).
    /// On axis this gives (ΓL)² = g²(1 + (δL/2)²) − (δL/2)², so ΓL = 1 at
    /// g = 1 and Γ turns real at g = (δL/2)/√(1 + (δL/2)²), just below 1.
    /// g = 1 thus stays the low/high-gain boundary when the pump angle
    /// leaves a residual on-axis mismatch. Reduces to `Collinear` at perfect
    /// phase matching.
    #[default]
    Threshold,
}

/// Longitudinal mismatch under q_s + q_i = 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MismatchModel {
    /// |k_p| − 2√(|k_s|² − q²): the signal stands in for the idler.
    Degenerate,
    /// |k_p| − √(|k_s|² − q²) − √(|k_i|² − q²) with the idler wavelength from
    /// energy conservation. Identical to `Degenerate` when λ_s = 2λ_p.
    #[default]
    EnergyConserving,
}

/// Physical parameters of the crystal and the pump.
#[derive(Debug, Clone, PartialEq)]
pub struct CrystalPumpConfig {
    /// Pump wavelength (um).
    pub lambda_p: f64,
    /// Signal wavelength (um).
    pub lambda_s: f64,
    /// Crystal length (um).
    pub crystal_length: f64,
    /// Pump 1/e² intensity waist (um).
    pub pump_waist: f64,
    /// Dimensionless pump amplitude g.
    pub gain: f64,
    /// Pump angle to the optic axis (degrees).
    pub theta_p: f64,
    /// Overall scale of the correlation function.
    pub c1: f64,
    /// Gain scaling constant; `None` derives it through `calibration`.
    pub c2: Option<f64>,
    pub calibration: GainCalibration,
    pub mismatch: MismatchModel,
}

impl Default for CrystalPumpConfig {
    /// 355 nm pump, 700 nm signal, 3 mm crystal, 185 um waist, 32.7°.
    fn default() -> Self {
        Self {
            lambda_p: 0.355,
            lambda_s: 0.700,
            crystal_length: 3000.0,
            pump_waist: 185.0,
            gain: 1.49,
            theta_p: 32.7,
            c1: 1.0,
            c2: None,
            calibration: GainCalibration::default(),
            mismatch: MismatchModel::default(),
        }
    }
}

impl CrystalPumpConfig {
    pub fn with_gain(&self, gain: f64) -> Self {
        Self {
            gain,
            ..self.clone()
        }
    }

    /// Idler wavelength from energy conservation.
    pub fn lambda_i(&self) -> f64 {
        1.0 / (1.0 / self.lambda_p - 1.0 / self.lambda_s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_p", self.lambda_p),
            ("lambda_s", self.lambda_s),
            ("crystal_length", self.crystal_length),
            ("pump_waist", self.pump_waist),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Domain {
                    quantity: name,
                    value: v,
                    min: 0.0,
                    max: f64::INFINITY,
                });
            }
        }
        if !(self.theta_p > 0.0 && self.theta_p < 90.0) {
            return Err(Error::Domain {
                quantity: "theta_p",
                value: self.theta_p,
                min: 0.0,
                max: 90.0,
            });
        }
        if !(self.gain.is_finite() && self.gain >= 0.0) {
            return Err(Error::Domain {
                quantity: "gain",
                value: self.gain,
                min: 0.0,
                max: f64::INFINITY,
            });
        }
        if self.lambda_s <= self.lambda_p {
            return Err(Error::Domain {
                quantity: "lambda_s",
                value: self.lambda_s,
                min: self.lambda_p,
                max: f64::INFINITY,
            });
        }
        if let Some(c2) = self.c2 {
            if !(c2.is_finite() && c2 >= 0.0) {
                return Err(Error::Domain {
                    quantity: "c2",
                    value: c2,
                    min: 0.0,
                    max: f64::INFINITY,
                });
            }
        }
        Ok(())
    }
}

/// Ordinary and extraordinary refractive indices of BBO.
///
/// The ordinary index carries the larger constant term (2.7405); this is the
/// assignment under which the collinear type-I condition at 355 → 700 nm has
/// a solution near 32.8°.
pub fn sellmeier_indices(lambda_um: f64) -> Result<(f64, f64)> {
    let (lo, hi) = SELLMEIER_RANGE_UM;
    if !(lambda_um > lo && lambda_um < hi) {
        return Err(Error::Domain {
            quantity: "wavelength (um)",
            value: lambda_um,
            min: lo,
            max: hi,
        });
    }
    let l2 = lambda_um * lambda_um;
    let n_ord = (2.7405 + 0.0184 / (l2 - 0.0179) - 0.0155 * l2).sqrt();
    let n_ext = (2.3730 + 0.0128 / (l2 - 0.0156) - 0.0044 * l2).sqrt();
    Ok((n_ord, n_ext))
}

/// Index seen by the extraordinary-polarized pump at `theta_deg` from the
/// optic axis.
pub fn effective_pump_index(theta_deg: f64, lambda_um: f64) -> Result<f64> {
    if !(0.0..=90.0).contains(&theta_deg) {
        return Err(Error::Domain {
            quantity: "theta (deg)",
            value: theta_deg,
            min: 0.0,
            max: 90.0,
        });
    }
    let (n_o, n_e) = sellmeier_indices(lambda_um)?;
    let t = theta_deg.to_radians();
    let (s, c) = t.sin_cos();
    Ok(n_e * n_o / (n_o * n_o * s * s + n_e * n_e * c * c).sqrt())
}

/// Pump angle at which pump, signal and idler all propagate along z.
pub fn collinear_angle(config: &CrystalPumpConfig) -> Result<f64> {
    if config.lambda_s <= config.lambda_p {
        return Err(Error::PhaseMatchingImpossible(format!(
            "signal wavelength {} um does not exceed pump wavelength {} um",
            config.lambda_s, config.lambda_p
        )));
    }
    let lambda_i = config.lambda_i();
    let (n_s, _) = sellmeier_indices(config.lambda_s)?;
    let (n_i, _) = sellmeier_indices(lambda_i).map_err(|_| {
        Error::PhaseMatchingImpossible(format!(
            "idler wavelength {lambda_i:.4} um is outside the dispersion window"
        ))
    })?;
    let target = n_s / config.lambda_s + n_i / lambda_i;
    let residual = |theta: f64| -> Result<f64> {
        Ok(effective_pump_index(theta, config.lambda_p)? / config.lambda_p - target)
    };

    let (mut lo, mut hi) = (0.0_f64, 90.0_f64);
    let (mut f_lo, f_hi) = (residual(lo)?, residual(hi)?);
    if f_lo * f_hi > 0.0 {
        return Err(Error::PhaseMatchingImpossible(format!(
            "no collinear solution in [0, 90] deg for {} -> {} um",
            config.lambda_p, config.lambda_s
        )));
    }
    while hi - lo > 1e-7 {
        let mid = 0.5 * (lo + hi);
        let f_mid = residual(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Wavevector magnitudes (rad/um) for a configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wavevectors {
    pub k_p: f64,
    pub k_s: f64,
    /// Idler magnitude at the energy-conserving wavelength.
    pub k_i: f64,
}

impl Wavevectors {
    pub fn new(config: &CrystalPumpConfig) -> Result<Self> {
        config.validate()?;
        let (n_s, _) = sellmeier_indices(config.lambda_s)?;
        let lambda_i = config.lambda_i();
        let (n_i, _) = sellmeier_indices(lambda_i)?;
        let eta = effective_pump_index(config.theta_p, config.lambda_p)?;
        Ok(Self {
            k_p: 2.0 * PI * eta / config.lambda_p,
            k_s: 2.0 * PI * n_s / config.lambda_s,
            k_i: 2.0 * PI * n_i / lambda_i,
        })
    }

    fn check(&self, q: f64) -> Result<f64> {
        let q = q.abs();
        if q >= self.k_s || q >= self.k_i {
            return Err(Error::EvanescentSignal { q, k_s: self.k_s });
        }
        Ok(q)
    }

    /// Longitudinal signal component.
    pub fn k_sz(&self, q: f64) -> Result<f64> {
        let q = self.check(q)?;
        Ok((self.k_s * self.k_s - q * q).sqrt())
    }

    /// Longitudinal idler component under q_i = −q_s.
    pub fn k_iz_bar(&self, q: f64) -> Result<f64> {
        let q = self.check(q)?;
        Ok((self.k_i * self.k_i - q * q).sqrt())
    }

    pub fn mismatch(&self, q: f64, model: MismatchModel) -> Result<f64> {
        let k_sz = self.k_sz(q)?;
        Ok(match model {
            MismatchModel::Degenerate => self.k_p - 2.0 * k_sz,
            MismatchModel::EnergyConserving => self.k_p - k_sz - self.k_iz_bar(q)?,
        })
    }
}

/// Δk̄_z at transverse wavevector magnitude `q_mag`.
pub fn longitudinal_mismatch(q_mag: f64, config: &CrystalPumpConfig) -> Result<f64> {
    Wavevectors::new(config)?.mismatch(q_mag, config.mismatch)
}

/// Precomputed phase-matching state: everything the gain kernel needs that
/// does not depend on ρ.
#[derive(Debug, Clone, Copy)]
pub struct PhaseMatching {
    pub wavevectors: Wavevectors,
    /// Resolved gain-scaling constant C₂ (um⁻²·rad²/um²).
    pub c2: f64,
    pub length: f64,
    pub model: MismatchModel,
}

impl PhaseMatching {
    pub fn new(config: &CrystalPumpConfig) -> Result<Self> {
        let wavevectors = Wavevectors::new(config)?;
        let length = config.crystal_length;
        let c2 = match config.c2 {
            Some(c2) => c2,
            None => {
                let base = wavevectors.k_sz(0.0)? * wavevectors.k_iz_bar(0.0)? / (length * length);
                match config.calibration {
                    GainCalibration::Collinear => base,
                    GainCalibration::Threshold => {
                        let dk0 = wavevectors.mismatch(0.0, config.mismatch)?.max(0.0);
                        let half = 0.5 * dk0 * length;
                        base * (1.0 + half * half)
                    }
                }
            }
        };
        Ok(Self {
            wavevectors,
            c2,
            length,
            model: config.mismatch,
        })
    }

    pub fn mismatch(&self, q: f64) -> Result<f64> {
        self.wavevectors.mismatch(q, self.model)
    }

    /// Γ² for a given mismatch and local pump intensity |V_p|².
    pub fn rate_squared(&self, q: f64, delta_kz: f64, pump_intensity: f64) -> Result<f64> {
        let denom = self.wavevectors.k_sz(q)? * self.wavevectors.k_iz_bar(q)?;
        Ok(self.c2 * pump_intensity / denom - 0.25 * delta_kz * delta_kz)
    }
}

/// Γ(Δk̄_z, ρ); real for a non-negative radicand, purely imaginary otherwise.
pub fn parametric_rate(
    delta_kz: f64,
    pump_intensity: f64,
    q_mag: f64,
    config: &CrystalPumpConfig,
) -> Result<Complex64> {
    let pm = PhaseMatching::new(config)?;
    Ok(sqrt_radicand(pm.rate_squared(q_mag, delta_kz, pump_intensity)?))
}

fn sqrt_radicand(r: f64) -> Complex64 {
    if r >= 0.0 {
        Complex64::new(r.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-r).sqrt())
    }
}

/// sinh(ΓL)/Γ, always real for real or purely imaginary Γ.
pub fn gain_kernel(gamma: Complex64, length: f64) -> f64 {
    if gamma.im == 0.0 {
        gain_kernel_from_radicand(gamma.re * gamma.re, length)
    } else if gamma.re == 0.0 {
        gain_kernel_from_radicand(-gamma.im * gamma.im, length)
    } else {
        let z = gamma * length;
        if z.norm() < SINHC_SERIES_LIMIT {
            let z2 = z * z;
            (length * (1.0 + z2 / 6.0 + z2 * z2 / 120.0)).re
        } else {
            (z.sinh() / gamma).re
        }
    }
}

/// sinh(ΓL)/Γ expressed through the radicand Γ².
pub fn gain_kernel_from_radicand(radicand: f64, length: f64) -> f64 {
    let b = radicand.abs().sqrt();
    let z = b * length;
    let z2 = if radicand >= 0.0 { z * z } else { -z * z };
    if z < SINHC_SERIES_LIMIT {
        length * (1.0 + z2 / 6.0 + z2 * z2 / 120.0)
    } else if radicand >= 0.0 {
        z.sinh() / b
    } else {
        z.sin() / b
    }
}
