//! Arithmetic structure of unit vectors.
//!
//! Compressibility measures how close a vector is to being sparse. The least
//! common denominator `LCD_{α,γ}(v)` is the smallest dilation `θ > 0` that
//! brings `θv` within `min(γ‖θv‖, α)` of the integer lattice. The Lévy
//! concentration function is the largest mass a law puts on any interval of
//! radius `r`.
//!
//! LCD values are certified by a grid scan followed by bisection. The
//! function `θ ↦ dist(θv, Z^N)` is 1-Lipschitz for a unit vector, so any
//! satisfying interval longer than twice the grid step is detected. The
//! returned value always satisfies the defining inequality, which makes it an
//! upper bound on the true infimum; shorter satisfying intervals below it can
//! be missed.

use nalgebra::DVectorView;

use crate::ensembles::Atom;
use crate::{Error, Matrix, Result, Vector};

const UNIT_TOL: f64 = 1e-10;

fn check_unit(x: &Vector) -> Result<()> {
    let norm = x.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NonUnitVector { norm });
    }
    Ok(())
}

fn sparsity_budget(len: usize, delta: f64) -> usize {
    // Guards floor() against products like 0.29 * 100 = 28.999999999999996.
    ((delta * len as f64) + 1e-9).floor() as usize
}

/// Distance from `x` to the nearest `floor(delta·N)`-sparse vector.
///
/// That distance is the norm of the `N − floor(delta·N)` smallest-magnitude
/// coordinates.
pub fn sparsity_distance(x: &Vector, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", "must lie in (0, 1)"));
    }
    check_unit(x)?;
    let keep = sparsity_budget(x.len(), delta).min(x.len());
    let mut sq: Vec<f64> = x.iter().map(|v| v * v).collect();
    sq.sort_by(f64::total_cmp);
    let tail: f64 = sq[..x.len() - keep].iter().sum();
    Ok(tail.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressibilityParams {
    pub delta: f64,
    pub rho: f64,
}

impl CompressibilityParams {
    pub fn new(delta: f64, rho: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::param("delta", "must lie in (0, 1)"));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::param("rho", "must lie in (0, 1)"));
        }
        Ok(Self { delta, rho })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compressibility {
    Compressible,
    Incompressible,
}

/// Compressible iff `sparsity_distance(x, δ) <= ρ`.
pub fn classify_vector(x: &Vector, params: CompressibilityParams) -> Result<Compressibility> {
    let d = sparsity_distance(x, params.delta)?;
    Ok(if d <= params.rho {
        Compressibility::Compressible
    } else {
        Compressibility::Incompressible
    })
}

/// Parameters of an LCD computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcdParams {
    pub alpha: f64,
    pub gamma: f64,
    /// Largest dilation scanned.
    pub theta_max: f64,
    pub grid_step: f64,
    pub refine_tol: f64,
}

impl LcdParams {
    /// Grid step `1e-3`, refinement `1e-9`, ceiling `8√dim`.
    pub fn with_defaults(dim: usize, alpha: f64, gamma: f64) -> Self {
        Self {
            alpha,
            gamma,
            theta_max: 8.0 * (dim as f64).sqrt(),
            grid_step: 1e-3,
            refine_tol: 1e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::param("alpha", "must be > 0"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::param("gamma", "must lie in (0, 1)"));
        }
        if !(self.theta_max > 0.0 && self.theta_max.is_finite()) {
            return Err(Error::param("theta_max", "must be finite and > 0"));
        }
        if !(self.grid_step > 0.0 && self.grid_step < 0.5) {
            return Err(Error::param("grid_step", "must lie in (0, 1/2)"));
        }
        if !(self.refine_tol > 0.0) {
            return Err(Error::param("refine_tol", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcdStatus {
    Found,
    ExceedsCeiling,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcdResult {
    pub status: LcdStatus,
    /// Certified LCD; meaningful only when `status == Found`.
    pub value: f64,
    pub witness_theta: f64,
    /// `dist(witness_theta · v, Z^N)`.
    pub witness_dist: f64,
}

impl LcdResult {
    pub fn found(&self) -> Option<f64> {
        (self.status == LcdStatus::Found).then_some(self.value)
    }
}

/// Euclidean distance from `v` to the nearest point of `Z^N`.
pub fn lattice_distance(v: DVectorView<'_, f64>) -> f64 {
    v.iter().map(|x| (x - x.round()).powi(2)).sum::<f64>().sqrt()
}

fn scaled_lattice_distance(v: &Vector, theta: f64) -> f64 {
    v.iter().map(|x| {
        let y = theta * x;
        (y - y.round()).powi(2)
    }).sum::<f64>().sqrt()
}

pub fn lcd(v: &Vector, params: &LcdParams) -> Result<LcdResult> {
    params.validate()?;
    check_unit(v)?;
    let norm = v.norm();
    let slack = |theta: f64| {
        let d = scaled_lattice_distance(v, theta);
        (d, d - (params.gamma * theta * norm).min(params.alpha))
    };
    let steps = (params.theta_max / params.grid_step).ceil() as u64;
    let mut prev = 0.0;
    for k in 1..=steps {
        let theta = (k as f64 * params.grid_step).min(params.theta_max);
        let (_, s) = slack(theta);
        if s < 0.0 {
            let (mut lo, mut hi) = (prev, theta);
            while hi - lo > params.refine_tol {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if slack(mid).1 < 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let (d, _) = slack(hi);
            return Ok(LcdResult {
                status: LcdStatus::Found,
                value: hi,
                witness_theta: hi,
                witness_dist: d,
            });
        }
        prev = theta;
    }
    let (d, _) = slack(params.theta_max);
    Ok(LcdResult {
        status: LcdStatus::ExceedsCeiling,
        value: f64::INFINITY,
        witness_theta: params.theta_max,
        witness_dist: d,
    })
}

/// `sup_y P[|X − y| <= r]` for a discrete law, by sweeping windows
/// `[a, a + 2r]` anchored at atoms.
pub fn levy_concentration_exact(atoms: &[Atom], r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::param("r", "must be >= 0"));
    }
    if atoms.is_empty() {
        return Err(Error::InvalidDistribution("no atoms".into()));
    }
    let total: f64 = atoms.iter().map(|a| a.prob).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
    }
    let mut sorted = atoms.to_vec();
    sorted.sort_by(|a, b| a.value.total_cmp(&b.value));
    let width = 2.0 * r;
    let (mut best, mut mass, mut j) = (0.0_f64, 0.0_f64, 0usize);
    for i in 0..sorted.len() {
        while j < sorted.len() && sorted[j].value - sorted[i].value <= width {
            mass += sorted[j].prob;
            j += 1;
        }
        best = best.max(mass);
        mass -= sorted[i].prob;
    }
    Ok(best.min(1.0))
}

/// Plug-in estimate of `L(X, r)`: the largest fraction of samples in a
/// closed window of width `2r`.
pub fn levy_concentration_empirical(samples: &[f64], r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::param("r", "must be >= 0"));
    }
    if samples.is_empty() {
        return Err(Error::param("samples", "empty sample"));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let width = 2.0 * r;
    let (mut best, mut j) = (0usize, 0usize);
    for i in 0..sorted.len() {
        if j < i {
            j = i;
        }
        while j + 1 < sorted.len() && sorted[j + 1] - sorted[i] <= width {
            j += 1;
        }
        best = best.max(j - i + 1);
    }
    Ok(best as f64 / sorted.len() as f64)
}

/// LCD parameters used for level-set membership: `α = μ√n`, and the scan
/// ceiling raised to at least `2D`.
pub fn level_set_params(dim: usize, d: f64, mu: f64, gamma: f64, base: &LcdParams) -> LcdParams {
    LcdParams {
        alpha: mu * (dim as f64).sqrt(),
        gamma,
        theta_max: base.theta_max.max(2.0 * d),
        ..*base
    }
}

fn check_level(d: f64, mu: f64) -> Result<()> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::param("D", "must be finite and > 0"));
    }
    if !(mu > 0.0) {
        return Err(Error::param("mu", "must be > 0"));
    }
    Ok(())
}

/// `D <= LCD_{μ√n,γ}(x) <= 2D`, both ends inclusive.
pub fn level_set_membership(
    x: &Vector,
    d: f64,
    mu: f64,
    gamma: f64,
    base: &LcdParams,
) -> Result<bool> {
    check_level(d, mu)?;
    let params = level_set_params(x.len(), d, mu, gamma, base);
    Ok(lcd(x, &params)?.found().is_some_and(|v| d <= v && v <= 2.0 * d))
}

/// Level-set membership restricted to `‖Bx‖ <= 2K'√n`.
#[allow(clippy::too_many_arguments)]
pub fn restricted_level_set_membership(
    x: &Vector,
    b: &Matrix,
    d: f64,
    k_prime: f64,
    mu: f64,
    gamma: f64,
    base: &LcdParams,
) -> Result<bool> {
    check_level(d, mu)?;
    if b.ncols() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} columns", x.len()),
            got: format!("{} columns", b.ncols()),
        });
    }
    if !(k_prime > 0.0) {
        return Err(Error::param("K'", "must be > 0"));
    }
    let bound = 2.0 * k_prime * (x.len() as f64).sqrt();
    if (b * x).norm() > bound {
        return Ok(false);
    }
    level_set_membership(x, d, mu, gamma, base)
}
