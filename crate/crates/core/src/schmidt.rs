//! One-dimensional diagonalization, the tensor-product Schmidt spectrum and
//! the derived entanglement metrics.

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::linalg::{asymmetry, ensure_finite, symmetric_eigen, symmetrize};
use crate::spdc::{CorrelationMatrix, WavevectorGrid};

/// Eigenvalues below this fraction of the largest are set to zero.
pub const EIGEN_CLAMP: f64 = 1e-12;
/// Largest tolerated relative asymmetry of an input matrix.
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;
/// Tolerance on Σλ = 1 accepted by [`schmidt_number`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;
/// Number of leading 2D modes whose FWHM is recorded in the metrics.
pub const FWHM_MODES: usize = 4;

#[derive(Debug, Clone)]
pub struct OneDDecomposition {
    /// μᵢ ≥ 0, non-increasing.
    pub mu: Vec<f64>,
    /// Orthonormal eigenvectors as columns.
    pub modes: Mat<f64>,
    pub grid: WavevectorGrid,
    /// Sum of |μ| over eigenvalues clamped from negative values.
    pub clamped_negative: f64,
    /// Number of eigenvalues set to zero by the clamp.
    pub clamped_count: usize,
}

impl OneDDecomposition {
    /// μ scaled to unit sum.
    pub fn normalized_mu(&self) -> Vec<f64> {
        let s: f64 = self.mu.iter().sum();
        if s > 0.0 {
            self.mu.iter().map(|m| m / s).collect()
        } else {
            self.mu.clone()
        }
    }

    /// Σ μᵢ vᵢ vᵢᵀ.
    pub fn reconstruct(&self) -> Mat<f64> {
        let n = self.modes.nrows();
        let mut out = Mat::zeros(n, n);
        for (k, &mu) in self.mu.iter().enumerate() {
            if mu == 0.0 {
                continue;
            }
            let v = self.modes.col(k);
            for j in 0..n {
                let vj = mu * v[j];
                for i in 0..n {
                    out[(i, j)] += v[i] * vj;
                }
            }
        }
        out
    }

    pub fn mode(&self, i: usize) -> Result<Vec<f64>> {
        let n = self.mu.len();
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
        Ok((0..self.modes.nrows()).map(|r| self.modes[(r, i)]).collect())
    }
}

/// Scalar summaries of a Schmidt decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtMetrics {
    /// K over the full (untruncated) 2D spectrum.
    pub schmidt_number: f64,
    /// K of the normalized 1D spectrum; its square equals `schmidt_number`.
    pub schmidt_number_1d: f64,
    /// FWHM (mrad) of the leading 2D modes in spectrum order; `None` where
    /// the profile has no measurable half-maximum width.
    pub fwhm_mrad: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct SchmidtResult {
    /// λₖ, non-increasing, normalized over the full set of pairs.
    pub lambda: Vec<f64>,
    /// Source pair (i, j) of each λₖ.
    pub index_pairs: Vec<(usize, usize)>,
    pub one_d: OneDDecomposition,
    pub metrics: SchmidtMetrics,
}

impl SchmidtResult {
    pub fn mode(&self, k: usize) -> Result<Mat<f64>> {
        let &(i, j) = self
            .index_pairs
            .get(k)
            .ok_or(Error::IndexOutOfRange {
                index: k,
                len: self.index_pairs.len(),
            })?;
        tensor_mode(&self.one_d, i, j)
    }
}

/// Real symmetric eigendecomposition of a correlation slice.
pub fn diagonalize_1d(corr: &CorrelationMatrix) -> Result<OneDDecomposition> {
    let a = corr.values.as_ref();
    ensure_finite(a)?;
    let skew = asymmetry(a);
    if skew > SYMMETRY_TOLERANCE {
        return Err(Error::Contract(format!(
            "matrix asymmetry {skew:.3e} exceeds {SYMMETRY_TOLERANCE:.0e}"
        )));
    }
    let eig = symmetric_eigen(symmetrize(a).as_ref())?;
    let n = eig.values.len();
    let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let mut mu = eig.values;
    let mut clamped_negative = 0.0;
    let mut clamped_count = 0;
    for m in mu.iter_mut() {
        if *m < 0.0 {
            clamped_negative += -*m;
        }
        if *m < EIGEN_CLAMP * top || *m <= 0.0 {
            if *m != 0.0 {
                clamped_count += 1;
            }
            *m = 0.0;
        }
    }
    let mut modes = eig.vectors;
    for k in 0..n {
        // first entry within rounding of the largest magnitude decides
        let big = (0..n).fold(0.0_f64, |m, r| m.max(modes[(r, k)].abs()));
        let best = (0..n)
            .find(|&r| modes[(r, k)].abs() >= big * (1.0 - 1e-12))
            .unwrap_or(0);
        if modes[(best, k)] < 0.0 {
            for r in 0..n {
                modes[(r, k)] = -modes[(r, k)];
            }
        }
    }
    Ok(OneDDecomposition {
        mu,
        modes,
        grid: corr.grid,
        clamped_negative,
        clamped_count,
    })
}

/// 2D spectrum {μᵢμⱼ}, normalized over all n² pairs and truncated to
/// `n_keep` entries.
///
/// Ordering: λ descending, then i + j ascending, then i ascending.
pub fn tensor_spectrum(one_d: &OneDDecomposition, n_keep: usize) -> Result<SchmidtResult> {
    let n = one_d.mu.len();
    if n_keep == 0 || n_keep > n * n {
        return Err(Error::InvalidArgument(format!(
            "n_keep = {n_keep} must lie in 1..={}",
            n * n
        )));
    }
    let total: f64 = one_d.mu.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateInput("all-zero spectrum".into()));
    }
    let norm: Vec<f64> = one_d.mu.iter().map(|m| m / total).collect();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            pairs.push((norm[i] * norm[j], i, j));
        }
    }
    pairs.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then((a.1 + a.2).cmp(&(b.1 + b.2)))
            .then(a.1.cmp(&b.1))
    });

    let k1: f64 = 1.0 / norm.iter().map(|x| x * x).sum::<f64>();
    let k2: f64 = 1.0 / pairs.iter().map(|p| p.0 * p.0).sum::<f64>();
    pairs.truncate(n_keep);
    let lambda: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let index_pairs: Vec<(usize, usize)> = pairs.iter().map(|p| (p.1, p.2)).collect();

    let fwhm_mrad = index_pairs
        .iter()
        .take(FWHM_MODES)
        .map(|&(i, j)| {
            tensor_mode(one_d, i, j)
                .and_then(|m| mode_fwhm(ModeProfile::TwoD(m.as_ref()), &one_d.grid))
                .ok()
        })
        .collect();

    Ok(SchmidtResult {
        lambda,
        index_pairs,
        one_d: one_d.clone(),
        metrics: SchmidtMetrics {
            schmidt_number: k2,
            schmidt_number_1d: k1,
            fwhm_mrad,
        },
    })
}

/// uᵢⱼ(x, y) = vᵢ(x)·vⱼ(y) with rows indexing x; unit Frobenius norm.
pub fn tensor_mode(one_d: &OneDDecomposition, i: usize, j: usize) -> Result<Mat<f64>> {
    let vi = one_d.mode(i)?;
    let vj = one_d.mode(j)?;
    let n = vi.len();
    // ‖vᵢvⱼᵀ‖_F = ‖vᵢ‖‖vⱼ‖; the symmetric product keeps u_ji = u_ijᵀ exact
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let f = norm(&vi) * norm(&vj);
    let s = if f > 0.0 { 1.0 / f } else { 1.0 };
    Ok(Mat::from_fn(n, n, |r, c| vi[r] * vj[c] * s))
}

/// K = 1/Σλ² for a spectrum summing to one.
pub fn schmidt_number(lambda: &[f64]) -> Result<f64> {
    let s: f64 = lambda.iter().sum();
    if (s - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::Contract(format!(
            "spectrum sums to {s}, expected 1 within {NORMALIZATION_TOLERANCE:.0e}"
        )));
    }
    Ok(1.0 / lambda.iter().map(|x| x * x).sum::<f64>())
}

#[derive(Debug, Clone, Copy)]
pub enum ModeProfile<'a> {
    OneD(&'a [f64]),
    TwoD(MatRef<'a, f64>),
}

/// Full width at half maximum of a mode magnitude, in mrad.
///
/// 2D modes are measured along the row through the global maximum.
pub fn mode_fwhm(mode: ModeProfile<'_>, grid: &WavevectorGrid) -> Result<f64> {
    match mode {
        ModeProfile::OneD(v) => {
            let mag: Vec<f64> = v.iter().map(|x| x.abs()).collect();
            profile_fwhm(&mag, grid.pitch_mrad)
        }
        ModeProfile::TwoD(m) => {
            let (mut br, mut bc) = (0, 0);
            for c in 0..m.ncols() {
                for r in 0..m.nrows() {
                    if m[(r, c)].abs() > m[(br, bc)].abs() {
                        br = r;
                        bc = c;
                    }
                }
            }
            let row: Vec<f64> = (0..m.ncols()).map(|c| m[(br, c)].abs()).collect();
            profile_fwhm(&row, grid.pitch_mrad)
        }
    }
}

/// FWHM of a non-negative profile sampled at `pitch`, by linear
/// interpolation of the half-maximum crossings on each side of the peak.
pub fn profile_fwhm(values: &[f64], pitch: f64) -> Result<f64> {
    let n = values.len();
    if n < 3 {
        return Err(Error::NotMeasurable("profile shorter than 3 samples".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite profile sample".into()));
    }
    let (peak_idx, peak) = values
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    if !(peak > 0.0) {
        return Err(Error::NotMeasurable("profile has no positive maximum".into()));
    }
    let ties = values.iter().filter(|&&v| v >= peak * (1.0 - 1e-12)).count();
    if ties > 1 {
        return Err(Error::NotMeasurable("maximum is not unique".into()));
    }
    if peak_idx == 0 || peak_idx == n - 1 {
        return Err(Error::NotMeasurable("maximum lies on the grid edge".into()));
    }
    let half = 0.5 * peak;
    let mut left = None;
    for i in (0..peak_idx).rev() {
        if values[i] < half {
            let (a, b) = (values[i], values[i + 1]);
            left = Some(i as f64 + (half - a) / (b - a));
            break;
        }
    }
    let mut right = None;
    for i in peak_idx + 1..n {
        if values[i] < half {
            let (a, b) = (values[i - 1], values[i]);
            right = Some((i - 1) as f64 + (a - half) / (a - b));
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) => Ok((r - l) * pitch),
        _ => Err(Error::NotMeasurable("no half-maximum crossing on one side".into())),
    }
}


#[cfg(test)]
mod proptests {
    use super::*;
    use crate::spdc::Provenance;
    use proptest::prelude::*;

    fn random_psd(n: usize, seed: &[f64]) -> Mat<f64> {
        let a = Mat::from_fn(n, n, |i, j| seed[(i * n + j) % seed.len()] + 0.01 * (i * j) as f64);
        &a * a.transpose()
    }

    proptest! {
        #[test]
        fn round_trip_and_orthonormality(
            n in 2usize..9,
            seed in proptest::collection::vec(-1.0f64..1.0, 81),
        ) {
            let g = random_psd(n, &seed);
            let c = CorrelationMatrix::new(g.clone(), WavevectorGrid::new(n, 1.0).unwrap(), Provenance::Theory).unwrap();
            let d = diagonalize_1d(&c).unwrap();
            let scale = g.norm_l2().max(1e-300);
            // clamped eigenvalues are at most 1e-12 of the top one
            prop_assert!((&d.reconstruct() - &g).norm_l2() / scale < 1e-8);
            let gram = d.modes.transpose() * &d.modes;
            prop_assert!((&gram - Mat::<f64>::identity(n, n)).norm_l2() < 1e-10);
            prop_assert!(d.mu.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn squared_schmidt_number_and_pairing(mu in proptest::collection::vec(0.0f64..1.0, 1..7)) {
            prop_assume!(mu.iter().sum::<f64>() > 1e-3);
            let mut mu = mu;
            mu.sort_by(|a, b| b.total_cmp(a));
            let n = mu.len();
            let e = OneDDecomposition {
                mu: mu.clone(),
                modes: Mat::identity(n, n),
                grid: WavevectorGrid::new(n.max(2), 1.0).unwrap(),
                clamped_negative: 0.0,
                clamped_count: 0,
            };
            let r = tensor_spectrum(&e, n * n).unwrap();
            let k = schmidt_number(&r.lambda).unwrap();
            prop_assert!((k - r.metrics.schmidt_number_1d.powi(2)).abs() <= 1e-9 * k);
            prop_assert!(r.lambda.windows(2).all(|w| w[0] >= w[1]));
            for (k, &(i, j)) in r.index_pairs.iter().enumerate() {
                let t = r.index_pairs.iter().position(|&p| p == (j, i)).unwrap();
                prop_assert_eq!(r.lambda[k], r.lambda[t]);
            }
        }
    }
}
