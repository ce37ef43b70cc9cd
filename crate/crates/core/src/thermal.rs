//! Synthetic thermal far-field frames from a known mode decomposition.
//!
//! Each frame is the intensity of E = A·C·Aᵀ, A = [√μ₁v₁ … √μᵣvᵣ], with C a
//! matrix of independent unit-variance circular complex Gaussians. The
//! ensemble is the separable tensor square of the one-dimensional process.
//!
//! Randomness: frame j draws from ChaCha8 seeded with `seed` through
//! `seed_from_u64` and switched to stream j. C is filled row-major, each
//! entry taking its real and then its imaginary normal draw; read-noise draws
//! follow, one per pixel in row-major order. Normals use the ziggurat
//! sampler of `rand_distr::StandardNormal`.

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::schmidt::OneDDecomposition;

/// Additive camera model. Values are in counts.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseModel {
    /// Standard deviation of Gaussian read noise.
    pub read_noise: f64,
    /// Constant offset added to every pixel.
    pub offset: f64,
    /// Round to integer counts.
    pub quantize: bool,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        for (quantity, value) in [("read_noise", self.read_noise), ("offset", self.offset)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::Domain {
                    quantity,
                    value,
                    min: 0.0,
                    max: f64::INFINITY,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisSpec {
    pub one_d: OneDDecomposition,
    pub n_frames: usize,
    pub noise: NoiseModel,
    pub seed: u64,
    /// Gain label carried into the stack metadata.
    pub gain: Option<f64>,
}

impl SynthesisSpec {
    pub fn new(one_d: OneDDecomposition, n_frames: usize, seed: u64) -> Self {
        Self {
            one_d,
            n_frames,
            noise: NoiseModel::default(),
            seed,
            gain: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_frames < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 frames, got {}",
                self.n_frames
            )));
        }
        self.noise.validate()
    }

    /// A = V·diag(√μ) over the non-zero eigenvalues.
    fn amplitude_basis(&self) -> Mat<f64> {
        let d = &self.one_d;
        let cols: Vec<usize> = (0..d.mu.len()).filter(|&k| d.mu[k] > 0.0).collect();
        let n = d.modes.nrows();
        Mat::from_fn(n, cols.len(), |r, c| d.modes[(r, cols[c])] * d.mu[cols[c]].sqrt())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackMetadata {
    pub pitch_mrad: f64,
    pub center_row: usize,
    pub center_col: usize,
    pub gain: Option<f64>,
    pub seed: Option<u64>,
    pub noise: NoiseModel,
}

/// Frames stored contiguously, frame-major then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageStack {
    pub n_rows: usize,
    pub n_cols: usize,
    pub n_frames: usize,
    pub data: Vec<f32>,
    pub metadata: StackMetadata,
}

impl ImageStack {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        n_frames: usize,
        data: Vec<f32>,
        metadata: StackMetadata,
    ) -> Result<Self> {
        if data.len() != n_rows * n_cols * n_frames {
            return Err(Error::InvalidArgument(format!(
                "stack data has {} values, expected {}x{}x{}",
                data.len(),
                n_frames,
                n_rows,
                n_cols
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite pixel at flat index {k}")));
        }
        Ok(Self {
            n_rows,
            n_cols,
            n_frames,
            data,
            metadata,
        })
    }

    pub fn frame(&self, j: usize) -> &[f32] {
        let sz = self.n_rows * self.n_cols;
        &self.data[j * sz..(j + 1) * sz]
    }

    /// Pixel-wise average over frames.
    pub fn mean_frame(&self) -> Vec<f64> {
        let sz = self.n_rows * self.n_cols;
        let mut acc = vec![0.0; sz];
        for j in 0..self.n_frames {
            for (a, &v) in acc.iter_mut().zip(self.frame(j)) {
                *a += v as f64;
            }
        }
        acc.iter_mut().for_each(|a| *a /= self.n_frames as f64);
        acc
    }
}

fn frame_rng(seed: u64, j: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(j as u64);
    rng
}

/// One complex field realization as (real, imaginary) N×N parts.
pub fn sample_field_frame<R: Rng + ?Sized>(spec: &SynthesisSpec, rng: &mut R) -> (Mat<f64>, Mat<f64>) {
    field_from_basis(&spec.amplitude_basis(), rng)
}

fn field_from_basis<R: Rng + ?Sized>(a: &Mat<f64>, rng: &mut R) -> (Mat<f64>, Mat<f64>) {
    let r = a.ncols();
    let n = a.nrows();
    if r == 0 {
        return (Mat::zeros(n, n), Mat::zeros(n, n));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut cre = Mat::<f64>::zeros(r, r);
    let mut cim = Mat::<f64>::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            cre[(i, j)] = s * x;
            cim[(i, j)] = s * y;
        }
    }
    let re = a * &cre * a.transpose();
    let im = a * &cim * a.transpose();
    (re, im)
}

/// Independent thermal frames; bit-identical for a fixed seed regardless of
/// thread count.
pub fn synthesize_stack(spec: &SynthesisSpec) -> Result<ImageStack> {
    spec.validate()?;
    let a = spec.amplitude_basis();
    let n = a.nrows();
    let noise = spec.noise;
    let frames: Vec<Vec<f32>> = (0..spec.n_frames)
        .into_par_iter()
        .map(|j| {
            let mut rng = frame_rng(spec.seed, j);
            let (re, im) = field_from_basis(&a, &mut rng);
            let mut out = Vec::with_capacity(n * n);
            for r in 0..n {
                for c in 0..n {
                    let mut v = re[(r, c)] * re[(r, c)] + im[(r, c)] * im[(r, c)] + noise.offset;
                    if noise.read_noise > 0.0 {
                        let z: f64 = rng.sample(StandardNormal);
                        v += noise.read_noise * z;
                    }
                    if noise.quantize {
                        v = v.round();
                    }
                    out.push(v.max(0.0) as f32);
                }
            }
            out
        })
        .collect();
    let grid = spec.one_d.grid;
    ImageStack::new(
        n,
        n,
        spec.n_frames,
        frames.concat(),
        StackMetadata {
            pitch_mrad: grid.pitch_mrad,
            center_row: grid.center_index,
            center_col: grid.center_index,
            gain: spec.gain,
            seed: Some(spec.seed),
            noise,
        },
    )
}
