use super::SupportSet;
use crate::{DemixError, Mat, Result};

fn check_factors(m: &Mat, u: &Mat, v: &Mat) -> Result<()> {
    if u.ncols() != v.ncols() {
        return Err(DemixError::dims("projector factors", format!("{} columns in V", u.ncols()), v.ncols()));
    }
    if u.nrows() != m.nrows() || v.nrows() != m.ncols() {
        return Err(DemixError::dims(
            "projector",
            format!("{}x{} matrix", u.nrows(), v.nrows()),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

/// `P_Φ(M) = P_U M + M P_V − P_U M P_V` with `P_U = UUᵀ`, `P_V = VVᵀ`.
///
/// `U` and `V` must have orthonormal columns; they are not re-orthonormalized.
pub fn project_phi(m: &Mat, u: &Mat, v: &Mat) -> Result<Mat> {
    check_factors(m, u, v)?;
    if u.ncols() == 0 {
        return Ok(Mat::zeros(m.nrows(), m.ncols()));
    }
    let ut_m = u.transpose() * m;
    let m_v = m * v;
    let ut_m_v = &ut_m * v;
    // P_U M + (M V − U Uᵀ M V) Vᵀ
    Ok(u * ut_m + (m_v - u * ut_m_v) * v.transpose())
}

/// `P_Φ⊥(M) = (I − P_U) M (I − P_V)`.
pub fn project_phi_perp(m: &Mat, u: &Mat, v: &Mat) -> Result<Mat> {
    check_factors(m, u, v)?;
    if u.ncols() == 0 {
        return Ok(m.clone());
    }
    let left = m - u * (u.transpose() * m);
    Ok(&left - (&left * v) * v.transpose())
}

fn check_support(h: &Mat, support: &SupportSet) -> Result<()> {
    if let Some((i, j)) = support.iter().find(|&(i, j)| i >= h.nrows() || j >= h.ncols()) {
        return Err(DemixError::invalid(format!(
            "support entry ({i}, {j}) outside {}x{} matrix",
            h.nrows(),
            h.ncols()
        )));
    }
    Ok(())
}

/// Keeps the entries of `H` on the support and zeroes the rest.
pub fn project_omega(h: &Mat, support: &SupportSet) -> Result<Mat> {
    check_support(h, support)?;
    let mut out = Mat::zeros(h.nrows(), h.ncols());
    for (i, j) in support.iter() {
        out[(i, j)] = h[(i, j)];
    }
    Ok(out)
}

/// Zeroes the entries of `H` on the support.
pub fn project_omega_perp(h: &Mat, support: &SupportSet) -> Result<Mat> {
    check_support(h, support)?;
    let mut out = h.clone();
    for (i, j) in support.iter() {
        out[(i, j)] = 0.0;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius_inner;

    fn orthonormal(n: usize, r: usize, seed: u64) -> Mat {
        let mut state = seed;
        let g = Mat::from_fn(n, r, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        });
        g.qr().q().columns(0, r).into_owned()
    }

    fn pseudo_random(n: usize, m: usize, seed: u64) -> Mat {
        let mut state = seed.wrapping_add(99);
        Mat::from_fn(n, m, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn empty_factors() {
        let m = pseudo_random(4, 3, 1);
        let (u, v) = (Mat::zeros(4, 0), Mat::zeros(3, 0));
        assert_eq!(project_phi(&m, &u, &v).unwrap(), Mat::zeros(4, 3));
        assert_eq!(project_phi_perp(&m, &u, &v).unwrap(), m);
    }

    #[test]
    fn uvt_is_in_phi() {
        let u = orthonormal(5, 2, 3);
        let v = orthonormal(4, 2, 4);
        let uvt = &u * v.transpose();
        assert!((project_phi(&uvt, &u, &v).unwrap() - &uvt).amax() < 1e-14);
        assert!(project_phi_perp(&uvt, &u, &v).unwrap().amax() < 1e-14);
    }

    #[test]
    fn decomposition_sums_to_identity() {
        for (n, m, r) in [(5, 4, 2), (6, 6, 1)] {
            let u = orthonormal(n, r, 10 + n as u64);
            let v = orthonormal(m, r, 20 + m as u64);
            let x = pseudo_random(n, m, 7);
            let sum = project_phi(&x, &u, &v).unwrap() + project_phi_perp(&x, &u, &v).unwrap();
            assert!((sum - &x).amax() < 1e-12);
        }
    }

    #[test]
    fn ranges_orthogonal() {
        let u = orthonormal(6, 2, 5);
        let v = orthonormal(5, 2, 6);
        let a = project_phi(&pseudo_random(6, 5, 1), &u, &v).unwrap();
        let b = project_phi_perp(&pseudo_random(6, 5, 2), &u, &v).unwrap();
        assert!(frobenius_inner(&a, &b).abs() < 1e-10);
    }

    #[test]
    fn mismatched_factors_rejected() {
        let m = Mat::zeros(4, 3);
        assert!(project_phi(&m, &Mat::zeros(4, 1), &Mat::zeros(3, 2)).is_err());
        assert!(project_phi_perp(&m, &Mat::zeros(5, 1), &Mat::zeros(3, 1)).is_err());
    }

    #[test]
    fn omega_examples() {
        let h = Mat::from_element(3, 3, 1.0);
        assert_eq!(project_omega(&h, &SupportSet::empty()).unwrap(), Mat::zeros(3, 3));
        assert_eq!(project_omega(&h, &SupportSet::full(3, 3)).unwrap(), h);
        let s = SupportSet::new(vec![(0, 0), (2, 1)], 3, 3).unwrap();
        let p = project_omega(&h, &s).unwrap();
        let mut expected = Mat::zeros(3, 3);
        expected[(0, 0)] = 1.0;
        expected[(2, 1)] = 1.0;
        assert_eq!(p, expected);
        assert_eq!(project_omega_perp(&h, &s).unwrap() + p, h);
        let big = SupportSet::new(vec![(4, 0)], 5, 3).unwrap();
        assert!(project_omega(&h, &big).is_err());
    }
}
