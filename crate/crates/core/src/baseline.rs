//! Full four-dimensional reference method and the timing comparison against
//! the slice-based reconstruction.
//!
//! The reference flattens every frame to a length-N² vector and diagonalizes
//! the N²×N² correlation directly, which costs O(M·N⁴) to build and O(N⁶)
//! to diagonalize.

use std::time::{Duration, Instant};

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{subspace_overlap, symmetric_eigen, symmetrize};
use crate::recon::{
    accumulate_covariances, centroid, estimate_g1_slice, even_angles, extract_slices,
    max_slice_length, CenterPolicy, ReconConfig,
};
use crate::schmidt::{diagonalize_1d, tensor_mode, tensor_spectrum, EIGEN_CLAMP};
use crate::thermal::ImageStack;

/// Default largest frame side accepted by the dense reference method.
pub const FULL4D_CAP: usize = 64;

/// Dense 4D correlation estimate, subtract-then-sqrt form.
pub fn full4d_estimate(stack: &ImageStack, cap: usize) -> Result<Mat<f64>> {
    let side = stack.n_rows.max(stack.n_cols);
    if side > cap {
        return Err(Error::Resource { n: side, cap });
    }
    let (m, p) = (stack.n_frames, stack.n_rows * stack.n_cols);
    if m < 2 {
        return Err(Error::Data(format!("need at least 2 frames, got {m}")));
    }
    let mf = m as f64;
    let mut mean = vec![0.0; p];
    for j in 0..m {
        for (a, &v) in mean.iter_mut().zip(stack.frame(j)) {
            *a += v as f64;
        }
    }
    mean.iter_mut().for_each(|a| *a /= mf);
    // corrective second pass; exact when all frames agree
    let mut fix = vec![0.0; p];
    for j in 0..m {
        for ((f, &v), mu) in fix.iter_mut().zip(stack.frame(j)).zip(&mean) {
            *f += v as f64 - mu;
        }
    }
    mean.iter_mut().zip(&fix).for_each(|(a, f)| *a += f / mf);
    let d = Mat::from_fn(m, p, |j, a| stack.frame(j)[a] as f64 - mean[a]);
    // C_true − sym(C_acc) = sym(Dᵀ(D − D₊₁)) / M, wrapping δI_{M+1} ≡ δI_1
    let diff = Mat::from_fn(m, p, |j, a| d[(j, a)] - d[((j + 1) % m, a)]);
    let c = d.transpose() * &diff;
    let c = symmetrize(c.as_ref());
    Ok(Mat::from_fn(p, p, |a, b| (c[(a, b)] / mf).max(0.0).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Full4DTiming {
    pub covariance: Duration,
    pub diagonalization: Duration,
}

#[derive(Debug, Clone)]
pub struct Full4DResult {
    /// Full normalized spectrum, non-increasing, clamped at zero.
    pub spectrum: Vec<f64>,
    /// Leading eigenvectors reshaped to n_rows × n_cols, unit norm.
    pub modes: Vec<Mat<f64>>,
    pub n_rows: usize,
    pub n_cols: usize,
    pub timing: Full4DTiming,
}

/// Eigendecomposition of a dense 4D correlation; `shape` is the frame shape
/// used to fold eigenvectors back into images.
pub fn full4d_decompose(
    matrix: &Mat<f64>,
    shape: (usize, usize),
    m_top: usize,
) -> Result<Full4DResult> {
    let p = shape.0 * shape.1;
    if matrix.nrows() != p || matrix.ncols() != p {
        return Err(Error::InvalidArgument(format!(
            "matrix is {}x{} but frames have {} pixels",
            matrix.nrows(),
            matrix.ncols(),
            p
        )));
    }
    let start = Instant::now();
    let eig = symmetric_eigen(matrix.as_ref())?;
    let diagonalization = start.elapsed();
    let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let clamped: Vec<f64> = eig
        .values
        .iter()
        .map(|&v| if v < EIGEN_CLAMP * top || v <= 0.0 { 0.0 } else { v })
        .collect();
    let total: f64 = clamped.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateInput("all-zero 4D spectrum".into()));
    }
    let spectrum = clamped.iter().map(|v| v / total).collect();
    let modes = (0..m_top.min(p))
        .map(|k| {
            let col = eig.vectors.col(k);
            let big = (0..p).fold(0.0_f64, |m, a| m.max(col[a].abs()));
            let first = (0..p).find(|&a| col[a].abs() >= big * (1.0 - 1e-12)).unwrap_or(0);
            let sign = if col[first] < 0.0 { -1.0 } else { 1.0 };
            Mat::from_fn(shape.0, shape.1, |r, c| sign * col[r * shape.1 + c])
        })
        .collect();
    Ok(Full4DResult {
        spectrum,
        modes,
        n_rows: shape.0,
        n_cols: shape.1,
        timing: Full4DTiming {
            covariance: Duration::ZERO,
            diagonalization,
        },
    })
}

/// Estimate and decompose, timing both phases.
pub fn full4d(stack: &ImageStack, m_top: usize, cap: usize) -> Result<Full4DResult> {
    let start = Instant::now();
    let g = full4d_estimate(stack, cap)?;
    let covariance = start.elapsed();
    let mut out = full4d_decompose(&g, (stack.n_rows, stack.n_cols), m_top)?;
    out.timing.covariance = covariance;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    pub recon: ReconConfig,
    /// Leading spectrum entries compared.
    pub m_top: usize,
    /// Timed repetitions; medians are reported.
    pub runs: usize,
    pub cap: usize,
    /// Relative gap below which neighbouring eigenvalues count as one
    /// degenerate cluster.
    pub cluster_tolerance: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            recon: ReconConfig::default(),
            m_top: 8,
            runs: 3,
            cap: FULL4D_CAP,
            cluster_tolerance: 0.1,
        }
    }
}

/// Timing and agreement of the two methods on one stack.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub n_rows: usize,
    pub n_cols: usize,
    pub n_frames: usize,
    pub runs: usize,
    pub m_top: usize,
    /// Median seconds per phase of the slice method.
    pub symmetric_phases: Vec<(String, f64)>,
    /// Median seconds per phase of the 4D method.
    pub full4d_phases: Vec<(String, f64)>,
    pub symmetric_seconds: f64,
    pub full4d_seconds: f64,
    pub speedup: f64,
    /// Seconds spent reading the stack, when it came from disk.
    pub io_seconds: Option<f64>,
    pub symmetric_bytes: usize,
    pub full4d_bytes: usize,
    pub lambda_symmetric: Vec<f64>,
    pub lambda_full4d: Vec<f64>,
    /// Σ|λ_sym − λ_4D| / Σλ_4D over the leading m_top entries.
    pub spectrum_l1: f64,
    /// Mean squared cosine of the principal angles between the leading
    /// subspaces, cut at a cluster boundary.
    pub subspace_overlap: f64,
    pub aligned_dim: usize,
}

impl BenchReport {
    /// Speedup including image I/O, when known.
    pub fn end_to_end_speedup(&self) -> Option<f64> {
        self.io_seconds
            .map(|io| (self.full4d_seconds + io) / (self.symmetric_seconds + io))
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Slice method output retained for the comparison.
struct SymmetricRun {
    phases: [f64; 4],
    length: usize,
    lambda: Vec<f64>,
    modes: Vec<Mat<f64>>,
}

const SYMMETRIC_PHASES: [&str; 4] = ["slicing", "covariance", "decomposition", "tensor"];

fn symmetric_run(stack: &ImageStack, cfg: &ReconConfig, m_top: usize) -> Result<SymmetricRun> {
    let t0 = Instant::now();
    let center = match cfg.center {
        CenterPolicy::Centroid => centroid(stack)?,
        CenterPolicy::Explicit { row, col } => (row, col),
    };
    let length = match cfg.length {
        Some(l) => l,
        None => max_slice_length(stack.n_rows, stack.n_cols, center)?,
    };
    let slices = extract_slices(stack, &even_angles(cfg.n_angles), center, length)?;
    let t1 = Instant::now();
    let pair = accumulate_covariances(&slices)?;
    let t2 = Instant::now();
    let g = estimate_g1_slice(&pair, cfg.estimator)?;
    let one_d = diagonalize_1d(&g)?;
    let t3 = Instant::now();
    let res = tensor_spectrum(&one_d, m_top.min(length * length))?;
    let h = length / 2;
    let modes = res
        .index_pairs
        .iter()
        .map(|&(i, j)| {
            let u = tensor_mode(&one_d, i, j)?;
            // embed slice coordinates into the pixel grid around the center
            let mut img = Mat::zeros(stack.n_rows, stack.n_cols);
            for r in 0..length {
                for c in 0..length {
                    img[(center.0 + r - h, center.1 + c - h)] = u[(r, c)];
                }
            }
            Ok(img)
        })
        .collect::<Result<Vec<_>>>()?;
    let t4 = Instant::now();
    Ok(SymmetricRun {
        phases: [
            (t1 - t0).as_secs_f64(),
            (t2 - t1).as_secs_f64(),
            (t3 - t2).as_secs_f64(),
            (t4 - t3).as_secs_f64(),
        ],
        length,
        lambda: res.lambda,
        modes,
    })
}

/// Largest d ≤ m whose cut separates clusters in both spectra.
fn cluster_aligned_dim(a: &[f64], b: &[f64], m: usize, tol: f64) -> usize {
    let splits = |s: &[f64], d: usize| -> bool {
        d < s.len() && s[d - 1] > 0.0 && (s[d - 1] - s[d]).abs() <= tol * s[d - 1]
    };
    (1..=m.min(a.len()).min(b.len()))
        .rev()
        .find(|&d| !splits(a, d) && !splits(b, d))
        .unwrap_or(m.min(a.len()).min(b.len()))
}

fn flatten(modes: &[Mat<f64>], d: usize) -> Mat<f64> {
    let (r, c) = (modes[0].nrows(), modes[0].ncols());
    Mat::from_fn(r * c, d, |a, k| modes[k][(a / c, a % c)])
}

pub fn compare_methods(stack: &ImageStack, cfg: &CompareConfig) -> Result<BenchReport> {
    if cfg.runs == 0 || cfg.m_top == 0 {
        return Err(Error::InvalidArgument("runs and m_top must be positive".into()));
    }
    let side = stack.n_rows.max(stack.n_cols);
    if side > cfg.cap {
        return Err(Error::Resource { n: side, cap: cfg.cap });
    }
    let mut sym_phases = vec![Vec::new(); SYMMETRIC_PHASES.len()];
    let mut sym_totals = Vec::new();
    let mut f4_phases = vec![Vec::new(); 2];
    let mut f4_totals = Vec::new();
    let mut sym_last = None;
    let mut f4_last = None;
    for _ in 0..cfg.runs {
        let s = symmetric_run(stack, &cfg.recon, cfg.m_top)?;
        for (acc, v) in sym_phases.iter_mut().zip(s.phases) {
            acc.push(v);
        }
        sym_totals.push(s.phases.iter().sum());
        sym_last = Some(s);

        let f = full4d(stack, cfg.m_top, cfg.cap)?;
        let (c, d) = (f.timing.covariance.as_secs_f64(), f.timing.diagonalization.as_secs_f64());
        f4_phases[0].push(c);
        f4_phases[1].push(d);
        f4_totals.push(c + d);
        f4_last = Some(f);
    }
    let sym = sym_last.expect("at least one run");
    let f4 = f4_last.expect("at least one run");

    let m = cfg.m_top.min(sym.lambda.len()).min(f4.spectrum.len());
    let lambda_symmetric = sym.lambda[..m].to_vec();
    let lambda_full4d = f4.spectrum[..m].to_vec();
    let denom: f64 = lambda_full4d.iter().sum();
    let spectrum_l1 = lambda_symmetric
        .iter()
        .zip(&lambda_full4d)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / denom;
    let aligned_dim = cluster_aligned_dim(&lambda_symmetric, &f4.spectrum, m, cfg.cluster_tolerance);
    let overlap = subspace_overlap(
        flatten(&sym.modes, aligned_dim).as_ref(),
        flatten(&f4.modes, aligned_dim).as_ref(),
    );

    let symmetric_seconds = median(sym_totals);
    let full4d_seconds = median(f4_totals);
    let p = stack.n_rows * stack.n_cols;
    let length = sym.length;
    let f64s = std::mem::size_of::<f64>();
    Ok(BenchReport {
        n_rows: stack.n_rows,
        n_cols: stack.n_cols,
        n_frames: stack.n_frames,
        runs: cfg.runs,
        m_top: m,
        symmetric_phases: SYMMETRIC_PHASES
            .iter()
            .zip(sym_phases)
            .map(|(n, v)| (n.to_string(), median(v)))
            .collect(),
        full4d_phases: ["covariance", "diagonalization"]
            .iter()
            .zip(f4_phases)
            .map(|(n, v)| (n.to_string(), median(v)))
            .collect(),
        symmetric_seconds,
        full4d_seconds,
        speedup: full4d_seconds / symmetric_seconds,
        io_seconds: None,
        // per-orientation slices and fluctuations, plus the covariance pair
        symmetric_bytes: f64s
            * (2 * stack.n_frames * length * cfg.recon.n_angles + 4 * length * length),
        // fluctuations and differences, covariance, eigenvectors
        full4d_bytes: f64s * (2 * stack.n_frames * p + 3 * p * p),
        lambda_symmetric,
        lambda_full4d,
        spectrum_l1,
        subspace_overlap: overlap,
        aligned_dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermal::{NoiseModel, StackMetadata};

    fn stack(frames: Vec<Vec<f32>>, rows: usize, cols: usize) -> ImageStack {
        let m = frames.len();
        ImageStack::new(
            rows,
            cols,
            m,
            frames.concat(),
            StackMetadata {
                pitch_mrad: 1.0,
                center_row: rows / 2,
                center_col: cols / 2,
                gain: None,
                seed: None,
                noise: NoiseModel::default(),
            },
        )
        .unwrap()
    }

    #[test]
    fn four_pixel_toy_by_hand() {
        let frames = vec![
            vec![1.0, 4.0, 2.0, 0.0],
            vec![3.0, 0.0, 2.0, 1.0],
            vec![2.0, 2.0, 5.0, 3.0],
        ];
        let rows: Vec<Vec<f64>> = frames.iter().map(|f| f.iter().map(|&v| v as f64).collect()).collect();
        let s = stack(frames, 2, 2);
        let g = full4d_estimate(&s, 64).unwrap();
        let mean: Vec<f64> = (0..4).map(|a| rows.iter().map(|r| r[a]).sum::<f64>() / 3.0).collect();
        let d = |j: usize, a: usize| rows[j % 3][a] - mean[a];
        for a in 0..4 {
            for b in 0..4 {
                let t: f64 = (0..3).map(|j| d(j, a) * d(j, b)).sum::<f64>() / 3.0;
                let acc = |a: usize, b: usize| (0..3).map(|j| d(j, a) * d(j + 1, b)).sum::<f64>() / 3.0;
                let want = (t - 0.5 * (acc(a, b) + acc(b, a))).max(0.0).sqrt();
                assert!((g[(a, b)] - want).abs() < 1e-12, "({a},{b}) {} {want}", g[(a, b)]);
            }
        }
    }

    #[test]
    fn identical_frames_give_zero_and_cap_is_enforced() {
        let s = stack(vec![vec![1.0, 2.0, 3.0, 4.0]; 4], 2, 2);
        assert_eq!(full4d_estimate(&s, 64).unwrap().norm_l2(), 0.0);
        assert!(matches!(full4d_estimate(&s, 1), Err(Error::Resource { n: 2, cap: 1 })));
    }

    #[test]
    fn diagonal_is_variance_minus_lag_covariance() {
        let frames: Vec<Vec<f32>> = (0..6).map(|j| vec![(j * j % 5) as f32, j as f32, 1.0, 0.5]).collect();
        let s = stack(frames.clone(), 2, 2);
        let g = full4d_estimate(&s, 64).unwrap();
        let x: Vec<f64> = frames.iter().map(|f| f[1] as f64).collect();
        let mean = x.iter().sum::<f64>() / 6.0;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 6.0;
        let lag = (0..6).map(|j| (x[j] - mean) * (x[(j + 1) % 6] - mean)).sum::<f64>() / 6.0;
        assert!((g[(1, 1)] - (var - lag).max(0.0).sqrt()).abs() < 1e-12);
        assert_eq!(g[(2, 2)], 0.0);
    }

    #[test]
    fn rank_one_and_planted_spectrum() {
        let w = [1.0, -2.0, 0.5, 3.0];
        let m = Mat::from_fn(4, 4, |a, b| w[a] * w[b]);
        let r = full4d_decompose(&m, (2, 2), 2).unwrap();
        assert!((r.spectrum[0] - 1.0).abs() < 1e-14);
        assert!(r.spectrum[1..].iter().all(|&v| v == 0.0));
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        for a in 0..4 {
            assert!((r.modes[0][(a / 2, a % 2)] - w[a] / norm).abs() < 1e-13);
        }

        // Σλₖ uₖuₖᵀ from known orthonormal modes
        let q = crate::linalg::orthonormal_columns(
            Mat::from_fn(9, 3, |a, k| ((a + 1) as f64).powi(k as i32)).as_ref(),
        );
        let lam = [0.6, 0.3, 0.1];
        let m = Mat::from_fn(9, 9, |a, b| (0..3).map(|k| lam[k] * q[(a, k)] * q[(b, k)]).sum());
        let r = full4d_decompose(&m, (3, 3), 3).unwrap();
        for k in 0..3 {
            assert!((r.spectrum[k] - lam[k]).abs() < 1e-8);
        }
        let modes = flatten(&r.modes, 3);
        assert!((subspace_overlap(modes.as_ref(), q.as_ref()) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn cluster_alignment_avoids_splitting_pairs() {
        let a = [0.4, 0.2, 0.2, 0.1, 0.05];
        let b = [0.41, 0.19, 0.185, 0.1, 0.04];
        assert_eq!(cluster_aligned_dim(&a, &b, 2, 0.1), 1);
        assert_eq!(cluster_aligned_dim(&a, &b, 3, 0.1), 3);
        assert_eq!(cluster_aligned_dim(&a, &b, 4, 0.1), 4);
    }

    #[test]
    fn median_of_runs() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0]), 2.5);
    }
}
