//! Instance types, the projectors onto the low-rank tangent space and the
//! sparse support, and the matrix text format.

mod matio;
mod projection;

pub use matio::{format_matrix, parse_matrix, read_matrix, write_matrix};
pub use projection::{project_omega, project_omega_perp, project_phi, project_phi_perp};

use crate::linalg::{orthonormality_defect, thin_svd};
use crate::{DemixError, Mat, Result, Vector};

/// Tolerance on unit column norms of a dictionary.
pub const COLUMN_NORM_TOL: f64 = 1e-9;
/// Tolerance on `UᵀU = I` and `VᵀV = I` for planted factors.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// An observation `Y` together with its dictionary `R`.
#[derive(Clone, Debug)]
pub struct DemixInstance {
    y: Mat,
    dictionary: Mat,
}

impl DemixInstance {
    /// Builds an instance, requiring every dictionary column to have unit norm.
    pub fn new(y: Mat, dictionary: Mat) -> Result<Self> {
        Self::check_shapes(&y, &dictionary)?;
        for (j, col) in dictionary.column_iter().enumerate() {
            let norm = col.norm();
            if (norm - 1.0).abs() > COLUMN_NORM_TOL {
                return Err(DemixError::invalid(format!(
                    "dictionary column {j} has norm {norm}, expected 1 (use new_unnormalized to bypass)"
                )));
            }
        }
        Ok(DemixInstance { y, dictionary })
    }

    /// Builds an instance without the unit-column check.
    pub fn new_unnormalized(y: Mat, dictionary: Mat) -> Result<Self> {
        Self::check_shapes(&y, &dictionary)?;
        Ok(DemixInstance { y, dictionary })
    }

    fn check_shapes(y: &Mat, dictionary: &Mat) -> Result<()> {
        if y.nrows() == 0 || y.ncols() == 0 || dictionary.ncols() == 0 {
            return Err(DemixError::invalid("observation and dictionary must be non-empty"));
        }
        if y.nrows() != dictionary.nrows() {
            return Err(DemixError::dims(
                "DemixInstance",
                format!("dictionary with {} rows", y.nrows()),
                dictionary.nrows(),
            ));
        }
        if y.iter().chain(dictionary.iter()).any(|v| !v.is_finite()) {
            return Err(DemixError::invalid("instance contains non-finite values"));
        }
        Ok(())
    }

    pub fn y(&self) -> &Mat {
        &self.y
    }

    pub fn dictionary(&self) -> &Mat {
        &self.dictionary
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn m(&self) -> usize {
        self.y.ncols()
    }

    pub fn d(&self) -> usize {
        self.dictionary.ncols()
    }

    /// Same instance with the columns of `Y` reordered: column `j` of the
    /// result is column `perm[j]` of `Y`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        let y = permute_columns(&self.y, perm)?;
        Ok(DemixInstance { y, dictionary: self.dictionary.clone() })
    }
}

/// Reorders columns: column `j` of the result is column `perm[j]` of `m`.
pub fn permute_columns(m: &Mat, perm: &[usize]) -> Result<Mat> {
    let c = m.ncols();
    let mut seen = vec![false; c];
    if perm.len() != c || perm.iter().any(|&p| p >= c || std::mem::replace(&mut seen[p], true)) {
        return Err(DemixError::invalid("not a permutation of the column indices"));
    }
    Ok(Mat::from_fn(m.nrows(), c, |i, j| m[(i, perm[j])]))
}

/// Sorted, duplicate-free list of `(row, column)` positions in a `d × m`
/// coefficient matrix.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SupportSet {
    entries: Vec<(usize, usize)>,
}

impl SupportSet {
    /// Sorts the entries; duplicates or out-of-range indices are rejected.
    pub fn new(mut entries: Vec<(usize, usize)>, d: usize, m: usize) -> Result<Self> {
        if let Some(&(i, j)) = entries.iter().find(|&&(i, j)| i >= d || j >= m) {
            return Err(DemixError::invalid(format!("support entry ({i}, {j}) outside {d}x{m}")));
        }
        entries.sort_unstable();
        if let Some(w) = entries.windows(2).find(|w| w[0] == w[1]) {
            return Err(DemixError::invalid(format!("duplicate support entry {:?}", w[0])));
        }
        Ok(SupportSet { entries })
    }

    pub fn empty() -> Self {
        SupportSet::default()
    }

    /// Every position of a `d × m` matrix.
    pub fn full(d: usize, m: usize) -> Self {
        let entries = (0..d).flat_map(|i| (0..m).map(move |j| (i, j))).collect();
        SupportSet { entries }
    }

    /// Positions of the nonzero entries of `a`.
    pub fn from_nonzeros(a: &Mat) -> Self {
        let mut entries = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if a[(i, j)] != 0.0 {
                    entries.push((i, j));
                }
            }
        }
        SupportSet { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries.iter().copied()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.entries.binary_search(&(i, j)).is_ok()
    }

    /// Checks the sortedness and uniqueness invariant.
    pub fn is_canonical(&self) -> bool {
        self.entries.windows(2).all(|w| w[0] < w[1])
    }

    /// Positions of a `d × m` matrix not in the support, in lexicographic order.
    pub fn complement(&self, d: usize, m: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity((d * m).saturating_sub(self.len()));
        let mut it = self.entries.iter().peekable();
        for i in 0..d {
            for j in 0..m {
                if it.peek() == Some(&&(i, j)) {
                    it.next();
                } else {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Largest number of support entries in any single column.
    pub fn max_column_count(&self) -> usize {
        let mut counts = std::collections::HashMap::new();
        for &(_, j) in &self.entries {
            *counts.entry(j).or_insert(0usize) += 1;
        }
        counts.values().copied().max().unwrap_or(0)
    }
}

/// Planted components: `X₀ = U diag(S) Vᵀ` and the sparse `A₀`.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    u: Mat,
    sigma: Vector,
    v: Mat,
    x0: Mat,
    a0: Mat,
    support: SupportSet,
}

impl GroundTruth {
    /// Builds the planted pair from SVD factors; `X₀` is formed as `U diag(S) Vᵀ`.
    pub fn from_factors(u: Mat, sigma: Vector, v: Mat, a0: Mat) -> Result<Self> {
        let x0 = &u * Mat::from_diagonal(&sigma) * v.transpose();
        Self::with_low_rank(u, sigma, v, x0, a0)
    }

    /// Builds the planted pair when `X₀` itself is known exactly (for example
    /// as a product of generating factors) and `U, S, V` are its SVD.
    pub fn with_low_rank(u: Mat, sigma: Vector, v: Mat, x0: Mat, a0: Mat) -> Result<Self> {
        let r = sigma.len();
        if u.ncols() != r || v.ncols() != r {
            return Err(DemixError::dims(
                "GroundTruth",
                format!("{r} factor columns"),
                format!("U: {}, V: {}", u.ncols(), v.ncols()),
            ));
        }
        if x0.shape() != (u.nrows(), v.nrows()) {
            return Err(DemixError::dims(
                "GroundTruth",
                format!("{}x{} low-rank part", u.nrows(), v.nrows()),
                format!("{}x{}", x0.nrows(), x0.ncols()),
            ));
        }
        if a0.ncols() != v.nrows() {
            return Err(DemixError::dims("GroundTruth", format!("A0 with {} columns", v.nrows()), a0.ncols()));
        }
        if r > u.nrows().min(v.nrows()) {
            return Err(DemixError::invalid(format!("rank {r} exceeds min(n, m)")));
        }
        if sigma.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(DemixError::invalid("singular values must be positive and finite"));
        }
        let du = orthonormality_defect(&u);
        let dv = orthonormality_defect(&v);
        if du > ORTHONORMAL_TOL || dv > ORTHONORMAL_TOL {
            return Err(DemixError::invalid(format!("factors not orthonormal (U defect {du:e}, V defect {dv:e})")));
        }
        let support = SupportSet::from_nonzeros(&a0);
        Ok(GroundTruth { u, sigma, v, x0, a0, support })
    }

    /// Recovers factors from a known `X₀` by SVD. With `rank = None` the rank
    /// is the number of singular values above `1e-10 · σ_max`.
    pub fn from_matrices(x0: Mat, a0: Mat, rank: Option<usize>) -> Result<Self> {
        let svd = thin_svd(&x0)?;
        let top = svd.singular_values.iter().copied().next().unwrap_or(0.0);
        let r = match rank {
            Some(r) => r,
            None => svd.singular_values.iter().filter(|&&s| s > 1e-10 * top).count(),
        };
        if r > svd.singular_values.len() {
            return Err(DemixError::invalid(format!("rank {r} exceeds min(n, m)")));
        }
        let u = svd.u.columns(0, r).into_owned();
        let v = svd.v_t.rows(0, r).transpose();
        let sigma = svd.singular_values.rows(0, r).into_owned();
        Self::with_low_rank(u, sigma, v, x0, a0)
    }

    pub fn u(&self) -> &Mat {
        &self.u
    }

    pub fn sigma(&self) -> &Vector {
        &self.sigma
    }

    pub fn v(&self) -> &Mat {
        &self.v
    }

    /// The planted low-rank matrix `X₀`.
    pub fn low_rank(&self) -> &Mat {
        &self.x0
    }

    pub fn a0(&self) -> &Mat {
        &self.a0
    }

    pub fn support(&self) -> &SupportSet {
        &self.support
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    /// `sign(A₀)` entrywise (zero off the support).
    pub fn sign_a0(&self) -> Mat {
        self.a0.map(|x| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
    }

    /// Same truth with the nonzero values of `A₀` scaled by `factor != 0`.
    pub fn with_scaled_sparse(&self, factor: f64) -> Result<Self> {
        if factor == 0.0 || !factor.is_finite() {
            return Err(DemixError::invalid("scale factor must be finite and nonzero"));
        }
        Self::with_low_rank(self.u.clone(), self.sigma.clone(), self.v.clone(), self.x0.clone(), &self.a0 * factor)
    }
}
