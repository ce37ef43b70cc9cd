//! Synthetic fixtures shared by the acceptance gate and the benchmarks.

use spdc_schmidt::schmidt::diagonalize_1d;
use spdc_schmidt::spdc::{g1_slice, QuadratureSettings};
use spdc_schmidt::{
    synthesize_stack, CorrelationMatrix, CrystalPumpConfig, ImageStack, Mat, OneDDecomposition,
    Provenance, Result, SynthesisSpec, WavevectorGrid,
};

/// Gaussian Schell-model slice: G(x, x′) = √(I(x) I(x′)) exp(−(x − x′)²/2σ_c²)
/// with I(x) = exp(−x²/2σ_I²), widths in samples.
pub fn gsm_correlation(n: usize, sigma_i: f64, sigma_c: f64, pitch_mrad: f64) -> Result<CorrelationMatrix> {
    let grid = WavevectorGrid::new(n, pitch_mrad)?;
    let x = |i: usize| i as f64 - grid.center_index as f64;
    let amp = |i: usize| (-x(i) * x(i) / (4.0 * sigma_i * sigma_i)).exp();
    let g = Mat::from_fn(n, n, |a, b| {
        let d = x(a) - x(b);
        amp(a) * amp(b) * (-d * d / (2.0 * sigma_c * sigma_c)).exp()
    });
    CorrelationMatrix::new(g, grid, Provenance::Theory)
}

/// Widths used for every isotropic fixture, scaled with the grid size.
pub fn gsm_widths(n: usize) -> (f64, f64) {
    (n as f64 * 5.0 / 32.0, n as f64 * 6.0 / 32.0)
}

pub fn gsm_decomposition(n: usize) -> Result<OneDDecomposition> {
    let (si, sc) = gsm_widths(n);
    diagonalize_1d(&gsm_correlation(n, si, sc, 1.0)?)
}

pub fn gsm_stack(n: usize, n_frames: usize, seed: u64) -> Result<ImageStack> {
    synthesize_stack(&SynthesisSpec::new(gsm_decomposition(n)?, n_frames, seed))
}

/// Theory decomposition at the default crystal with gain `g`.
pub fn theory_decomposition(g: f64, grid: &WavevectorGrid) -> Result<OneDDecomposition> {
    let cfg = CrystalPumpConfig::default().with_gain(g);
    diagonalize_1d(&g1_slice(&cfg, grid, &QuadratureSettings::default())?)
}

pub fn theory_stack(g: f64, grid: &WavevectorGrid, n_frames: usize, seed: u64) -> Result<ImageStack> {
    let mut spec = SynthesisSpec::new(theory_decomposition(g, grid)?, n_frames, seed);
    spec.gain = Some(g);
    synthesize_stack(&spec)
}

/// Camera grid scaled down to `n` samples over the same ±20 mrad window
/// the closed-loop checks use.
pub fn small_grid(n: usize) -> Result<WavevectorGrid> {
    WavevectorGrid::new(n, 40.0 / n as f64)
}
