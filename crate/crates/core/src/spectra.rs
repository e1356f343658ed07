//! Dense singular-value machinery.
//!
//! Decompositions are delegated to nalgebra's Golub–Kahan SVD; this module
//! fixes ordering (nonincreasing), validates inputs and adds the derived
//! quantities the experiments need.

use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result};

/// Largest min-dimension accepted by the full decompositions.
pub const MAX_DECOMPOSITION_DIM: usize = 512;

/// `s_n < SINGULAR_RTOL * max(1, s_1)` is treated as singular in boolean contexts.
pub const SINGULAR_RTOL: f64 = 1e-12;

const INTERLACE_TOL: f64 = 1e-8;

/// Singular values sorted nonincreasingly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularSpectrum(Vec<f64>);

impl SingularSpectrum {
    /// Sorts and validates arbitrary nonnegative values.
    pub fn from_values(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::param("values", "singular values must be finite and >= 0"));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn largest(&self) -> f64 {
        self.0.first().copied().unwrap_or(0.0)
    }

    pub fn smallest(&self) -> f64 {
        self.0.last().copied().unwrap_or(0.0)
    }

    pub fn is_numerically_singular(&self) -> bool {
        self.smallest() < SINGULAR_RTOL * self.largest().max(1.0)
    }
}

fn check_input(a: &Matrix) -> Result<()> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let d = a.nrows().min(a.ncols());
    if d > MAX_DECOMPOSITION_DIM {
        return Err(Error::BudgetExceeded {
            what: "decomposition dimension",
            needed: d as f64,
            limit: MAX_DECOMPOSITION_DIM as f64,
        });
    }
    Ok(())
}

pub fn singular_values(a: &Matrix) -> Result<SingularSpectrum> {
    check_input(a)?;
    if a.is_empty() {
        return Ok(SingularSpectrum(Vec::new()));
    }
    let sv = a.singular_values();
    // nalgebra occasionally returns -0.0 for exact zeros.
    SingularSpectrum::from_values(sv.iter().map(|v| v.abs()).collect())
}

/// `s_n(A)`, the last entry of [`singular_values`].
pub fn smallest_singular_value(a: &Matrix) -> Result<f64> {
    Ok(singular_values(a)?.smallest())
}

/// Spectral norm `s_1(A)`.
pub fn operator_norm(a: &Matrix) -> Result<f64> {
    Ok(singular_values(a)?.largest())
}

/// Number of singular values at least `k * sqrt(n)`, `n` the column count.
pub fn k_rank(a: &Matrix, k: f64) -> Result<usize> {
    if !(k > 0.0) {
        return Err(Error::param("K", "must be > 0"));
    }
    let threshold = k * (a.ncols() as f64).sqrt();
    Ok(singular_values(a)?.values().iter().filter(|&&s| s >= threshold).count())
}

/// First `n - 1` rows of `a`.
pub fn row_minor(a: &Matrix) -> Result<Matrix> {
    if a.nrows() < 2 {
        return Err(Error::param("A", "row minor needs at least two rows"));
    }
    Ok(a.rows(0, a.nrows() - 1).clone_owned())
}

/// SVD with singular triplets sorted by nonincreasing singular value.
#[derive(Debug, Clone)]
pub struct SortedSvd {
    /// Left singular vectors as columns, `rows × min(rows, cols)`.
    pub u: Matrix,
    pub sigma: SingularSpectrum,
    /// Right singular vectors as rows, `min(rows, cols) × cols`.
    pub v_t: Matrix,
}

pub fn sorted_svd(a: &Matrix) -> Result<SortedSvd> {
    check_input(a)?;
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let u = Matrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v_t = Matrix::from_fn(order.len(), v_t.ncols(), |r, c| v_t[(order[r], c)]);
    let sigma = SingularSpectrum(order.iter().map(|&i| svd.singular_values[i].abs()).collect());
    Ok(SortedSvd { u, sigma, v_t })
}

/// Orthogonal projection onto a subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionOperator {
    pub matrix: Matrix,
    pub rank: usize,
}

impl ProjectionOperator {
    /// Projection onto the span of the orthonormal columns of `basis`.
    pub fn from_orthonormal_columns(basis: &Matrix) -> Self {
        Self { matrix: basis * basis.transpose(), rank: basis.ncols() }
    }

    /// `‖P² − P‖` (Frobenius), `‖P − Pᵀ‖` and `|tr P − rank|`.
    pub fn defects(&self) -> (f64, f64, f64) {
        let p = &self.matrix;
        let idem = (p * p - p).norm();
        let sym = (p - p.transpose()).norm();
        let tr = (p.trace() - self.rank as f64).abs();
        (idem, sym, tr)
    }
}

/// Projection onto the bottom-`m` left singular directions of `B`.
#[derive(Debug, Clone)]
pub struct BottomProjection {
    pub projection: ProjectionOperator,
    pub spectrum: SingularSpectrum,
    /// The boundary singular values coincide, so the subspace is not unique.
    /// Any orthonormal basis of the invariant subspace was returned.
    pub degenerate_gap: bool,
}

pub fn bottom_singular_projection(b: &Matrix, m: usize) -> Result<BottomProjection> {
    let rows = b.nrows();
    if m == 0 || m > rows {
        return Err(Error::param("m", format!("need 1 <= m <= {rows}, got {m}")));
    }
    if b.ncols() < rows {
        return Err(Error::DimensionMismatch {
            expected: "rows <= cols".into(),
            got: format!("{}x{}", rows, b.ncols()),
        });
    }
    let svd = sorted_svd(b)?;
    let basis = svd.u.columns(rows - m, m).clone_owned();
    let sv = svd.sigma.values();
    let degenerate_gap = m < rows && {
        let scale = sv[0].max(1.0);
        (sv[rows - m - 1] - sv[rows - m]).abs() <= 1e-10 * scale
    };
    Ok(BottomProjection {
        projection: ProjectionOperator::from_orthonormal_columns(&basis),
        spectrum: svd.sigma,
        degenerate_gap,
    })
}

/// Cauchy interlacing between `A` (n×n) and its row minor `B`:
/// `s_i(A) ≥ σ_i(B) ≥ s_{i+1}(A)` for `i < n`.
pub fn interlacing_check(a: &Matrix) -> Result<bool> {
    if a.nrows() != a.ncols() || a.nrows() < 2 {
        return Err(Error::param("A", "interlacing needs a square matrix with n >= 2"));
    }
    let s = singular_values(a)?;
    let sigma = singular_values(&row_minor(a)?)?;
    let (s, sigma) = (s.values(), sigma.values());
    let tol = INTERLACE_TOL * s[0].max(1.0);
    Ok((0..sigma.len()).all(|i| s[i] + tol >= sigma[i] && sigma[i] + tol >= s[i + 1]))
}

/// Outcome of the count consequence of interlacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallMinorCount {
    pub k_rank: usize,
    /// `k_rank(A) <= (1 - eta) n`, so the implication applies.
    pub applicable: bool,
    /// `#{i : σ_i(B) < K√n}`.
    pub below: usize,
    /// `eta n / 2` when `eta n >= 2`, else `eta n - 1`.
    pub required: f64,
    pub holds: bool,
}

/// If `A` has K-rank at most `(1−η)n`, its row minor has at least `ηn/2`
/// singular values below `K√n`.
pub fn small_minor_count_check(a: &Matrix, k: f64, eta: f64) -> Result<SmallMinorCount> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::param("eta", "must lie in (0, 1)"));
    }
    let n = a.ncols() as f64;
    let kr = k_rank(a, k)?;
    let threshold = k * n.sqrt();
    let sigma = singular_values(&row_minor(a)?)?;
    let below = sigma.values().iter().filter(|&&s| s < threshold).count();
    let applicable = kr as f64 <= (1.0 - eta) * n;
    let required = if eta * n >= 2.0 { eta * n / 2.0 } else { eta * n - 1.0 };
    Ok(SmallMinorCount {
        k_rank: kr,
        applicable,
        below,
        required,
        holds: !applicable || below as f64 >= required,
    })
}
