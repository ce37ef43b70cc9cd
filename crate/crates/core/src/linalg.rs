//! Thin helpers over `faer` shared by the symmetric and the four-dimensional
//! methods, so both go through the same eigensolver.

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

/// Eigenpairs of a real symmetric matrix, eigenvalues non-increasing.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the order of `values`.
    pub vectors: Mat<f64>,
}

/// Full eigendecomposition of a symmetric matrix (lower triangle is read).
pub fn symmetric_eigen(a: MatRef<'_, f64>) -> Result<SymmetricEigen> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidArgument(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    ensure_finite(a)?;
    if n == 0 {
        return Ok(SymmetricEigen {
            values: Vec::new(),
            vectors: Mat::zeros(0, 0),
        });
    }
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Data(format!("eigensolver failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    // faer returns ascending order; reverse, keeping the sort stable on ties
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| s[i]).collect();
    let vectors = Mat::from_fn(n, n, |r, c| u[(r, order[c])]);
    Ok(SymmetricEigen { values, vectors })
}

pub fn ensure_finite(a: MatRef<'_, f64>) -> Result<()> {
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            if !a[(i, j)].is_finite() {
                return Err(Error::Data(format!("non-finite entry at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// (A + Aᵀ) / 2.
pub fn symmetrize(a: MatRef<'_, f64>) -> Mat<f64> {
    let n = a.nrows();
    Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)]))
}

pub fn max_abs(a: MatRef<'_, f64>) -> f64 {
    let mut m = 0.0_f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].abs());
        }
    }
    m
}

/// Largest |A - Aᵀ| entry relative to the largest |A| entry.
pub fn asymmetry(a: MatRef<'_, f64>) -> f64 {
    let scale = max_abs(a);
    if scale == 0.0 {
        return 0.0;
    }
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in 0..j {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst / scale
}

pub fn frobenius(a: MatRef<'_, f64>) -> f64 {
    a.norm_l2()
}

/// Mean squared cosine of the principal angles between the column spans of
/// `a` and `b`. Columns are orthonormalized first, so the inputs need only
/// be linearly independent. Returns a value in [0, 1].
pub fn subspace_overlap(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    let qa = orthonormal_columns(a);
    let qb = orthonormal_columns(b);
    let m = qa.ncols().min(qb.ncols());
    if m == 0 {
        return 0.0;
    }
    let cross = qa.transpose() * &qb;
    let f = cross.norm_l2();
    (f * f / m as f64).min(1.0)
}

/// Modified Gram–Schmidt; drops columns that are numerically dependent.
pub fn orthonormal_columns(a: MatRef<'_, f64>) -> Mat<f64> {
    let n = a.nrows();
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for j in 0..a.ncols() {
        let mut v: Vec<f64> = (0..n).map(|i| a[(i, j)]).collect();
        let norm0 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for _ in 0..2 {
            for q in &kept {
                let d: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(x, q)| *x -= d * q);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-10 * norm0.max(f64::MIN_POSITIVE) {
            v.iter_mut().for_each(|x| *x /= norm);
            kept.push(v);
        }
    }
    Mat::from_fn(n, kept.len(), |i, j| kept[j][i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_sorted_descending() {
        let a = Mat::from_fn(3, 3, |i, j| if i == j { [1.0, 3.0, 2.0][i] } else { 0.0 });
        let e = symmetric_eigen(a.as_ref()).unwrap();
        assert_eq!(e.values.len(), 3);
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[2] - 1.0).abs() < 1e-14);
        assert!((e.vectors[(1, 0)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eigen_rejects_nan() {
        let mut a = Mat::<f64>::identity(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(symmetric_eigen(a.as_ref()), Err(Error::Data(_))));
    }

    #[test]
    fn overlap_of_rotated_basis_is_one() {
        let a = Mat::from_fn(4, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        // same span, mixed basis
        let b = Mat::from_fn(4, 2, |i, j| match (i, j) {
            (0, 0) | (1, 0) | (0, 1) => 1.0,
            (1, 1) => -1.0,
            _ => 0.0,
        });
        assert!((subspace_overlap(a.as_ref(), b.as_ref()) - 1.0).abs() < 1e-12);
        let c = Mat::from_fn(4, 2, |i, j| if i == j + 2 { 1.0 } else { 0.0 });
        assert!(subspace_overlap(a.as_ref(), c.as_ref()) < 1e-12);
    }
}
