//! Proximal maps of `τ‖·‖₁` and `τ‖·‖*`.

use crate::linalg::thin_svd;
use crate::{DemixError, Mat, Result};

/// Shrunk singular values at or below this are dropped.
pub const RANK_ZERO_TOL: f64 = 1e-12;

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(DemixError::invalid(format!("threshold must be finite and non-negative, got {tau}")));
    }
    Ok(())
}

#[inline]
pub fn shrink(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// Entrywise `sign(x) · max(|x| − τ, 0)`.
pub fn soft_threshold(m: &Mat, tau: f64) -> Result<Mat> {
    check_tau(tau)?;
    Ok(m.map(|x| shrink(x, tau)))
}

/// Result of one singular value thresholding step.
#[derive(Clone, Debug)]
pub struct SvtOutput {
    pub matrix: Mat,
    /// Number of singular values left above `RANK_ZERO_TOL` after shrinkage.
    pub rank: usize,
    /// Nuclear norm of `matrix`.
    pub nuclear_norm: f64,
}

/// `U · max(Σ − τ, 0) · Vᵀ` together with the rank and nuclear norm of the result.
pub fn svt(m: &Mat, tau: f64) -> Result<SvtOutput> {
    check_tau(tau)?;
    let (n, c) = m.shape();
    let svd = thin_svd(m)?;
    let kept: Vec<(usize, f64)> = svd
        .singular_values
        .iter()
        .enumerate()
        .map(|(k, &s)| (k, s - tau))
        .filter(|&(_, s)| s > RANK_ZERO_TOL)
        .collect();
    let rank = kept.len();
    let mut scaled_u = Mat::zeros(n, rank);
    let mut vt = Mat::zeros(rank, c);
    let mut nuclear_norm = 0.0;
    for (col, &(k, s)) in kept.iter().enumerate() {
        scaled_u.set_column(col, &(svd.u.column(k) * s));
        vt.set_row(col, &svd.v_t.row(k));
        nuclear_norm += s;
    }
    Ok(SvtOutput { matrix: scaled_u * vt, rank, nuclear_norm })
}

/// Proximal map of `τ‖·‖*`; returns the thresholded matrix and its rank.
pub fn singular_value_threshold(m: &Mat, tau: f64) -> Result<(Mat, usize)> {
    let out = svt(m, tau)?;
    Ok((out.matrix, out.rank))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_shrinkage() {
        let m = Mat::from_row_slice(1, 3, &[3.0, -1.0, -5.0]);
        let out = soft_threshold(&m, 2.0).unwrap();
        assert_eq!(out, Mat::from_row_slice(1, 3, &[1.0, 0.0, -3.0]));
        assert_eq!(soft_threshold(&m, 0.0).unwrap(), m);
        assert!(soft_threshold(&m, -1.0).is_err());
        assert!(soft_threshold(&m, f64::NAN).is_err());
    }

    #[test]
    fn diagonal_svt() {
        let m = Mat::from_row_slice(2, 2, &[5.0, 0.0, 0.0, 1.0]);
        let (out, rank) = singular_value_threshold(&m, 2.0).unwrap();
        assert_eq!(rank, 1);
        assert!((out - Mat::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 0.0])).amax() < 1e-14);
    }

    #[test]
    fn zero_matrix() {
        let (out, rank) = singular_value_threshold(&Mat::zeros(3, 4), 0.5).unwrap();
        assert_eq!(rank, 0);
        assert_eq!(out, Mat::zeros(3, 4));
        assert!(singular_value_threshold(&Mat::zeros(2, 2), -0.1).is_err());
    }

    #[test]
    fn nuclear_norm_reported() {
        let m = Mat::from_row_slice(2, 3, &[4.0, 0.0, 0.0, 0.0, -2.0, 0.0]);
        let out = svt(&m, 1.0).unwrap();
        assert!((out.nuclear_norm - 4.0).abs() < 1e-13);
        assert_eq!(out.rank, 2);
    }
}
