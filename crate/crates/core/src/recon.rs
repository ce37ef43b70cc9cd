//! Slice-averaged intensity-covariance reconstruction of G⁽¹⁾.
//!
//! Diametric slices are cut from every frame at several orientations, the
//! same-frame and adjacent-frame fluctuation covariances are averaged over
//! frames and orientations, and the thermal-light relation between intensity
//! covariance and |G⁽¹⁾|² turns them into a correlation slice for the Schmidt
//! analysis.

use std::f64::consts::PI;

use faer::Mat;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{frobenius, symmetrize};
use crate::schmidt::{diagonalize_1d, tensor_spectrum, SchmidtResult};
use crate::spdc::{CorrelationMatrix, Provenance, WavevectorGrid};
use crate::thermal::ImageStack;

/// Sample coordinates closer than this to an integer are snapped onto it.
const SNAP: f64 = 1e-9;

/// Borrowed single frame, row-major.
#[derive(Debug, Clone, Copy)]
pub struct FrameRef<'a> {
    pub data: &'a [f32],
    pub n_rows: usize,
    pub n_cols: usize,
}

/// Interpolation stencil for one sample: up to four (flat index, weight).
type Stencil = Vec<(usize, f64)>;

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < SNAP {
        r
    } else {
        x
    }
}

fn slice_stencils(
    n_rows: usize,
    n_cols: usize,
    angle: f64,
    center: (usize, usize),
    length: usize,
) -> Result<Vec<Stencil>> {
    if length % 2 == 0 || length == 0 {
        return Err(Error::InvalidArgument(format!("slice length {length} must be odd")));
    }
    let h = (length / 2) as f64;
    let (s, c) = angle.sin_cos();
    let (cr, cc) = (center.0 as f64, center.1 as f64);
    let max_r = n_rows as f64 - 1.0;
    let max_c = n_cols as f64 - 1.0;
    let mut out = Vec::with_capacity(length);
    for k in 0..length {
        let t = k as f64 - h;
        let row = snap(cr + t * s);
        let col = snap(cc + t * c);
        if !(row >= 0.0 && row <= max_r && col >= 0.0 && col <= max_c) {
            return Err(Error::Geometry(format!(
                "slice of length {length} at {angle:.4} rad through ({}, {}) leaves the {n_rows}x{n_cols} frame",
                center.0, center.1
            )));
        }
        let (r0, c0) = (row.floor(), col.floor());
        let (fr, fc) = (row - r0, col - c0);
        let (r0, c0) = (r0 as usize, c0 as usize);
        let mut st = Vec::with_capacity(4);
        for (dr, wr) in [(0, 1.0 - fr), (1, fr)] {
            for (dc, wc) in [(0, 1.0 - fc), (1, fc)] {
                let w = wr * wc;
                if w != 0.0 {
                    st.push(((r0 + dr) * n_cols + c0 + dc, w));
                }
            }
        }
        out.push(st);
    }
    Ok(out)
}

fn apply<'a>(stencils: &'a [Stencil], data: &'a [f32]) -> impl Iterator<Item = f64> + 'a {
    stencils
        .iter()
        .map(move |st| st.iter().map(|&(i, w)| w * data[i] as f64).sum())
}

/// `length` samples, one pixel apart, along the line through `center` at
/// `angle` (radians from the row direction, towards increasing row index).
/// Bilinear interpolation; 0 and π/2 read pixels exactly.
pub fn extract_diametric_slice(
    frame: FrameRef<'_>,
    angle: f64,
    center: (usize, usize),
    length: usize,
) -> Result<Vec<f64>> {
    if frame.data.len() != frame.n_rows * frame.n_cols {
        return Err(Error::InvalidArgument("frame size does not match its shape".into()));
    }
    let st = slice_stencils(frame.n_rows, frame.n_cols, angle, center, length)?;
    Ok(apply(&st, frame.data).collect())
}

/// Slices of every frame at every orientation.
#[derive(Debug, Clone)]
pub struct SliceSet {
    /// One M×length matrix per orientation (rows are frames).
    pub slices: Vec<Mat<f64>>,
    pub angles: Vec<f64>,
    pub center: (usize, usize),
    pub length: usize,
    pub pitch_mrad: f64,
}

impl SliceSet {
    pub fn n_frames(&self) -> usize {
        self.slices.first().map_or(0, |m| m.nrows())
    }
}

/// `n` orientations evenly spaced over [0, π).
pub fn even_angles(n: usize) -> Vec<f64> {
    (0..n).map(|k| PI * k as f64 / n as f64).collect()
}

pub fn extract_slices(
    stack: &ImageStack,
    angles: &[f64],
    center: (usize, usize),
    length: usize,
) -> Result<SliceSet> {
    if angles.is_empty() {
        return Err(Error::InvalidArgument("at least one orientation is required".into()));
    }
    let slices = angles
        .iter()
        .map(|&a| {
            let st = slice_stencils(stack.n_rows, stack.n_cols, a, center, length)?;
            let mut m = Mat::zeros(stack.n_frames, length);
            for j in 0..stack.n_frames {
                for (k, v) in apply(&st, stack.frame(j)).enumerate() {
                    m[(j, k)] = v;
                }
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SliceSet {
        slices,
        angles: angles.to_vec(),
        center,
        length,
        pitch_mrad: stack.metadata.pitch_mrad,
    })
}

/// Same-frame and adjacent-frame fluctuation covariances.
#[derive(Debug, Clone)]
pub struct CovariancePair {
    pub c_true: Mat<f64>,
    pub c_acc: Mat<f64>,
    pub n_frames: usize,
    pub n_angles: usize,
    pub pitch_mrad: f64,
}

fn covariances_one(data: &Mat<f64>) -> (Mat<f64>, Mat<f64>) {
    let (m, n) = (data.nrows(), data.ncols());
    let mf = m as f64;
    let mean: Vec<f64> = (0..n)
        .map(|k| {
            let m0 = (0..m).map(|j| data[(j, k)]).sum::<f64>() / mf;
            // corrective second pass; exact when all frames agree
            m0 + (0..m).map(|j| data[(j, k)] - m0).sum::<f64>() / mf
        })
        .collect();
    let d = Mat::from_fn(m, n, |j, k| data[(j, k)] - mean[k]);
    // δI_{j+1}, with δI_{M+1} ≡ δI_1
    let shifted = Mat::from_fn(m, n, |j, k| d[((j + 1) % m, k)]);
    let c_true = d.transpose() * &d;
    let c_acc = d.transpose() * &shifted;
    let scale = 1.0 / mf;
    (
        Mat::from_fn(n, n, |a, b| c_true[(a, b)] * scale),
        Mat::from_fn(n, n, |a, b| c_acc[(a, b)] * scale),
    )
}

pub fn accumulate_covariances(slices: &SliceSet) -> Result<CovariancePair> {
    let m = slices.n_frames();
    if m < 2 {
        return Err(Error::Data(format!("need at least 2 frames, got {m}")));
    }
    let parts: Vec<(Mat<f64>, Mat<f64>)> = slices.slices.par_iter().map(covariances_one).collect();
    let n = slices.length;
    let mut c_true = Mat::<f64>::zeros(n, n);
    let mut c_acc = Mat::<f64>::zeros(n, n);
    for (t, a) in &parts {
        c_true += t;
        c_acc += a;
    }
    let k = parts.len() as f64;
    let c_true = symmetrize((c_true * (1.0 / k)).as_ref());
    let c_acc = symmetrize((c_acc * (1.0 / k)).as_ref());
    Ok(CovariancePair {
        c_true,
        c_acc,
        n_frames: m,
        n_angles: parts.len(),
        pitch_mrad: slices.pitch_mrad,
    })
}

/// Two readings of the accidental-subtracted estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Estimator {
    /// √C_true − √C_acc entrywise: square roots of each averaged term, as
    /// the estimator is printed.
    #[default]
    SqrtThenSubtract,
    /// √(C_true − C_acc).
    SubtractThenSqrt,
}

impl Estimator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Estimator::SqrtThenSubtract => "sqrt-then-subtract",
            Estimator::SubtractThenSqrt => "subtract-then-sqrt",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sqrt-then-subtract" => Ok(Estimator::SqrtThenSubtract),
            "subtract-then-sqrt" => Ok(Estimator::SubtractThenSqrt),
            other => Err(Error::InvalidArgument(format!(
                "unknown estimator '{other}' (expected sqrt-then-subtract or subtract-then-sqrt)"
            ))),
        }
    }
}

fn sqrt0(x: f64) -> f64 {
    x.max(0.0).sqrt()
}

/// G⁽¹⁾ slice from the covariance pair; negative arguments of the square
/// roots are clamped to zero.
pub fn estimate_g1_slice(pair: &CovariancePair, variant: Estimator) -> Result<CorrelationMatrix> {
    let n = pair.c_true.nrows();
    let raw = match variant {
        Estimator::SqrtThenSubtract => Mat::from_fn(n, n, |a, b| {
            sqrt0(pair.c_true[(a, b)]) - sqrt0(pair.c_acc[(a, b)])
        }),
        Estimator::SubtractThenSqrt => {
            Mat::from_fn(n, n, |a, b| sqrt0(pair.c_true[(a, b)] - pair.c_acc[(a, b)]))
        }
    };
    let grid = WavevectorGrid::new(n, pair.pitch_mrad)?;
    CorrelationMatrix::new(symmetrize(raw.as_ref()), grid, Provenance::Reconstructed)
}

/// Number of entries whose square-root argument was negative.
fn clamped_entries(pair: &CovariancePair, variant: Estimator) -> usize {
    let n = pair.c_true.nrows();
    let mut count = 0;
    for b in 0..n {
        for a in 0..n {
            let (t, acc) = (pair.c_true[(a, b)], pair.c_acc[(a, b)]);
            count += match variant {
                Estimator::SqrtThenSubtract => (t < 0.0) as usize + (acc < 0.0) as usize,
                Estimator::SubtractThenSqrt => (t - acc < 0.0) as usize,
            };
        }
    }
    count
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CenterPolicy {
    /// Intensity centroid of the mean frame, rounded to the nearest pixel.
    #[default]
    Centroid,
    Explicit { row: usize, col: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconConfig {
    pub n_angles: usize,
    /// Samples per slice; `None` takes the longest odd slice that fits at
    /// every orientation.
    pub length: Option<usize>,
    pub center: CenterPolicy,
    pub estimator: Estimator,
    /// Spectrum entries kept (clipped to length²).
    pub n_keep: usize,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            n_angles: 16,
            length: None,
            center: CenterPolicy::Centroid,
            estimator: Estimator::default(),
            n_keep: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconDiagnostics {
    pub center: (usize, usize),
    pub length: usize,
    pub n_angles: usize,
    pub n_frames: usize,
    /// Covariance entries clamped before a square root.
    pub clamped_entries: usize,
    /// Summed magnitude of negative eigenvalues clamped to zero.
    pub clamped_eigen_mass: f64,
    /// ‖C_acc‖_F / ‖C_true‖_F.
    pub accidental_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub result: SchmidtResult,
    pub correlation: CorrelationMatrix,
    pub diagnostics: ReconDiagnostics,
}

/// Centroid of the mean frame, rounded to the nearest pixel.
pub fn centroid(stack: &ImageStack) -> Result<(usize, usize)> {
    let mean = stack.mean_frame();
    let (mut s, mut sr, mut sc) = (0.0, 0.0, 0.0);
    for r in 0..stack.n_rows {
        for c in 0..stack.n_cols {
            let v = mean[r * stack.n_cols + c];
            s += v;
            sr += v * r as f64;
            sc += v * c as f64;
        }
    }
    if !(s > 0.0) {
        return Err(Error::DegenerateInput("mean frame has no intensity".into()));
    }
    Ok(((sr / s).round() as usize, (sc / s).round() as usize))
}

/// Longest odd slice through `center` that stays inside the frame at every
/// orientation.
pub fn max_slice_length(n_rows: usize, n_cols: usize, center: (usize, usize)) -> Result<usize> {
    let (r, c) = center;
    if r >= n_rows || c >= n_cols {
        return Err(Error::Geometry(format!(
            "center ({r}, {c}) outside the {n_rows}x{n_cols} frame"
        )));
    }
    let h = r.min(c).min(n_rows - 1 - r).min(n_cols - 1 - c);
    if h == 0 {
        return Err(Error::Geometry(format!("center ({r}, {c}) lies on the frame edge")));
    }
    Ok(2 * h + 1)
}

pub fn reconstruct_pipeline(stack: &ImageStack, cfg: &ReconConfig) -> Result<Reconstruction> {
    if cfg.n_angles == 0 {
        return Err(Error::InvalidArgument("n_angles must be positive".into()));
    }
    let center = match cfg.center {
        CenterPolicy::Centroid => centroid(stack)?,
        CenterPolicy::Explicit { row, col } => (row, col),
    };
    let length = match cfg.length {
        Some(l) => l,
        None => max_slice_length(stack.n_rows, stack.n_cols, center)?,
    };
    let slices = extract_slices(stack, &even_angles(cfg.n_angles), center, length)?;
    let pair = accumulate_covariances(&slices)?;
    let correlation = estimate_g1_slice(&pair, cfg.estimator)?;
    let one_d = diagonalize_1d(&correlation)?;
    let result = tensor_spectrum(&one_d, cfg.n_keep.min(length * length))?;
    let t = frobenius(pair.c_true.as_ref());
    let diagnostics = ReconDiagnostics {
        center,
        length,
        n_angles: pair.n_angles,
        n_frames: pair.n_frames,
        clamped_entries: clamped_entries(&pair, cfg.estimator),
        clamped_eigen_mass: one_d.clamped_negative,
        accidental_ratio: if t > 0.0 { frobenius(pair.c_acc.as_ref()) / t } else { 0.0 },
    };
    Ok(Reconstruction {
        result,
        correlation,
        diagnostics,
    })
}
