//! Small dense linear-algebra helpers shared by the other modules.

use nalgebra::linalg::Cholesky;
use nalgebra::Dyn;

use crate::{DemixError, Mat, Result, Vector};

/// Thin SVD with singular values sorted in decreasing order.
///
/// `u` is `n × p`, `v_t` is `p × m` with `p = min(n, m)`.
pub struct ThinSvd {
    pub u: Mat,
    pub singular_values: Vector,
    pub v_t: Mat,
}

fn to_faer(m: &Mat) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn require_finite(m: &Mat, what: &str) -> Result<()> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(DemixError::Numerical(format!("{what} of a matrix with non-finite entries")));
    }
    Ok(())
}

pub fn thin_svd(m: &Mat) -> Result<ThinSvd> {
    let (n, c) = m.shape();
    let p = n.min(c);
    if p == 0 {
        return Ok(ThinSvd { u: Mat::zeros(n, 0), singular_values: Vector::zeros(0), v_t: Mat::zeros(0, c) });
    }
    require_finite(m, "SVD")?;
    let svd = to_faer(m).thin_svd().map_err(|e| DemixError::Numerical(format!("SVD did not converge: {e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    Ok(ThinSvd {
        u: Mat::from_fn(n, p, |i, j| u[(i, j)]),
        singular_values: Vector::from_fn(p, |i, _| s[i]),
        v_t: Mat::from_fn(p, c, |i, j| v[(j, i)]),
    })
}

/// Singular values in decreasing order.
pub fn singular_values(m: &Mat) -> Result<Vector> {
    if m.nrows().min(m.ncols()) == 0 {
        return Ok(Vector::zeros(0));
    }
    require_finite(m, "SVD")?;
    let mut values =
        to_faer(m).singular_values().map_err(|e| DemixError::Numerical(format!("SVD did not converge: {e:?}")))?;
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(Vector::from_vec(values))
}

/// Largest singular value; zero for an empty matrix.
pub fn spectral_norm(m: &Mat) -> Result<f64> {
    Ok(singular_values(m)?.iter().copied().next().unwrap_or(0.0))
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
pub fn symmetric_eigen(m: &Mat) -> Result<(Vector, Mat)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(DemixError::dims("symmetric_eigen", "square matrix", format!("{}x{}", n, m.ncols())));
    }
    if n == 0 {
        return Ok((Vector::zeros(0), Mat::zeros(0, 0)));
    }
    require_finite(m, "eigendecomposition")?;
    let sym = (m + m.transpose()) * 0.5;
    let eig = to_faer(&sym)
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| DemixError::Numerical(format!("symmetric eigensolver did not converge: {e:?}")))?;
    let (values, vectors) = (eig.S().column_vector(), eig.U());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    Ok((Vector::from_fn(n, |i, _| values[order[i]]), Mat::from_fn(n, n, |i, j| vectors[(i, order[j])])))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &Mat) -> Result<Vector> {
    Ok(symmetric_eigen(m)?.0)
}

/// Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(m: &Mat) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or_else(|| DemixError::Numerical("matrix is not positive definite".into()))
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn frobenius_inner(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `max |QᵀQ − I|` over entries; zero for a matrix with no columns.
pub fn orthonormality_defect(q: &Mat) -> f64 {
    let g = q.transpose() * q;
    let k = g.nrows();
    let mut worst = 0.0_f64;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// `n × n` projector `I − QQᵀ` onto the orthogonal complement of `range(Q)`.
pub fn complement_projector(q: &Mat) -> Mat {
    let n = q.nrows();
    Mat::identity(n, n) - q * q.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_sorted_and_reconstructs() {
        let m = Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 3.0, 0.0, 0.0]);
        let svd = thin_svd(&m).unwrap();
        assert_eq!(svd.singular_values.len(), 2);
        assert!((svd.singular_values[0] - 3.0).abs() < 1e-14);
        assert!((svd.singular_values[1] - 1.0).abs() < 1e-14);
        let back = &svd.u * Mat::from_diagonal(&svd.singular_values) * &svd.v_t;
        assert!((back - m).norm() < 1e-13);
    }

    #[test]
    fn empty_matrices() {
        assert_eq!(spectral_norm(&Mat::zeros(3, 0)).unwrap(), 0.0);
        assert_eq!(thin_svd(&Mat::zeros(0, 4)).unwrap().v_t.shape(), (0, 4));
        assert_eq!(orthonormality_defect(&Mat::zeros(5, 0)), 0.0);
    }

    #[test]
    fn non_finite_rejected() {
        let mut m = Mat::zeros(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(thin_svd(&m), Err(DemixError::Numerical(_))));
    }

    #[test]
    fn eigenvalues_ascending() {
        let m = Mat::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let values = symmetric_eigenvalues(&m).unwrap();
        assert!((values[0] - 1.0).abs() < 1e-14 && (values[1] - 3.0).abs() < 1e-14);
    }
}
