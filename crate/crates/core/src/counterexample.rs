//! Diagonal shifts of K-rank `n − 1` whose smoothed smallest singular value
//! is small with polynomially small probability.
//!
//! With `A = diag(L, …, L, 0)` and `R_n` split as
//!
//! ```text
//! R_n = [ R  u  ]
//!       [ wᵀ r  ]
//! ```
//!
//! the vector `v = ((LI − R)⁻¹u, 1)` certifies
//! `s_n(A − R_n) <= |wᵀ(LI − R)⁻¹u + r|`, and the quadratic form expands as a
//! Neumann series in `R/L`.

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::Zero;
use serde::Serialize;

use crate::ensembles::{derive_substream, sample_matrix, EnsembleSpec, ScalarDistribution, ShiftMatrix};
use crate::spectra::{operator_norm, singular_values};
use crate::tail::{Frequency, McSettings};
use crate::{Error, Matrix, Result, Vector};

/// Enumeration budget for [`exact_event_probability`].
pub const ENUMERATION_BUDGET: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CounterexampleConfig {
    pub n: usize,
    pub t: u32,
    pub l: f64,
    pub k: f64,
    pub c: f64,
    pub trials: u64,
    pub seed: u64,
}

impl CounterexampleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::param("n", "needs n >= 2"));
        }
        if self.t < 1 {
            return Err(Error::param("t", "needs t >= 1"));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::param("K", "must be finite and > 0"));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::param("C", "must be finite and > 0"));
        }
        if self.trials == 0 {
            return Err(Error::param("trials", "must be at least 1"));
        }
        check_l(self.n, self.k, self.l)
    }

    /// `C (K√n / L)^t`.
    pub fn threshold(&self) -> f64 {
        self.c * (self.k * (self.n as f64).sqrt() / self.l).powi(self.t as i32)
    }

    /// `(4C)^{−t} K^{−(t−1)(t−2)/2} (ln 2t)^{1−t} n^{−t(t−1)/4}`.
    pub fn predicted_floor(&self) -> f64 {
        let t = f64::from(self.t);
        let log = -t * (4.0 * self.c).ln()
            - (t - 1.0) * (t - 2.0) / 2.0 * self.k.ln()
            + (1.0 - t) * (2.0 * t).ln().ln()
            - t * (t - 1.0) / 4.0 * (self.n as f64).ln();
        log.exp()
    }

    pub fn noise(&self) -> Result<EnsembleSpec> {
        EnsembleSpec::new(self.n, ScalarDistribution::LazyRademacher, self.seed)
    }
}

fn check_l(n: usize, k: f64, l: f64) -> Result<()> {
    let need = 2.0 * k * (n as f64).sqrt();
    if !(l >= need) {
        return Err(Error::param("L", format!("precondition L ≥ 2K√n violated: L = {l}, 2K√n = {need}")));
    }
    Ok(())
}

/// `diag(L, …, L, 0)`.
pub fn build_shift_thm13(n: usize, l: f64) -> Result<ShiftMatrix> {
    build_shift_example11(n, 1, l)
}

/// `diag(L × (n − k), 0 × k)`.
pub fn build_shift_example11(n: usize, k: usize, l: f64) -> Result<ShiftMatrix> {
    if n == 0 || k > n {
        return Err(Error::param("k", format!("needs 0 <= k <= n with n >= 1, got n={n}, k={k}")));
    }
    if !l.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut d = vec![l; n - k];
    d.resize(n, 0.0);
    Ok(ShiftMatrix::Diagonal(d))
}

fn check_form_dims(r: &Matrix, u: &Vector, w: &Vector) -> Result<()> {
    let m = r.nrows();
    if r.ncols() != m || u.len() != m || w.len() != m {
        return Err(Error::DimensionMismatch {
            expected: format!("square R with u, w of length {m}"),
            got: format!("R {}x{}, u {}, w {}", r.nrows(), r.ncols(), u.len(), w.len()),
        });
    }
    Ok(())
}

/// `Σ_{i=0}^{m} wᵀ(R/L)^i u` by repeated matrix–vector products.
pub fn neumann_quadratic_form(r: &Matrix, l: f64, u: &Vector, w: &Vector, m: usize) -> Result<f64> {
    check_form_dims(r, u, w)?;
    let norm = operator_norm(r)?;
    if !(norm < l) {
        return Err(Error::Divergent { norm, l });
    }
    let scaled = r / l;
    let mut x = u.clone();
    let mut sum = w.dot(&x);
    for _ in 0..m {
        x = &scaled * x;
        sum += w.dot(&x);
    }
    Ok(sum)
}

/// `L · wᵀx` with `(LI − R)x = u`, solved by LU with partial pivoting.
pub fn direct_quadratic_form(r: &Matrix, l: f64, u: &Vector, w: &Vector) -> Result<f64> {
    check_form_dims(r, u, w)?;
    let x = shifted_solve(r, l, u)?;
    Ok(l * w.dot(&x))
}

/// Solves `(LI − R)x = u`.
fn shifted_solve(r: &Matrix, l: f64, u: &Vector) -> Result<Vector> {
    let m = r.nrows();
    let a = Matrix::identity(m, m) * l - r;
    let x = a.lu().solve(u).ok_or(Error::Singular)?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Singular)
    }
}

/// Blocks `(R_{n−1}, u, w, r_nn)` of an `n × n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocks {
    pub r: Matrix,
    pub u: Vector,
    pub w: Vector,
    pub r_nn: f64,
}

pub fn split_blocks(rn: &Matrix) -> Result<Blocks> {
    let n = rn.nrows();
    if n < 2 || rn.ncols() != n {
        return Err(Error::param("R_n", "needs a square matrix of size >= 2"));
    }
    let m = n - 1;
    Ok(Blocks {
        r: rn.view((0, 0), (m, m)).into_owned(),
        u: rn.view((0, m), (m, 1)).column(0).into_owned(),
        w: rn.view((m, 0), (1, m)).row(0).transpose(),
        r_nn: rn[(m, m)],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReductionWitness {
    /// `s_n(A − R_n)` for `A = diag(L, …, L, 0)`.
    pub s_n: f64,
    /// `|wᵀ(LI − R)⁻¹u + r_nn|`.
    pub s_n_bound: f64,
    /// `wᵀ(LI − R)⁻¹u`.
    pub quad_value: f64,
    pub r_nn: f64,
    pub holds: bool,
}

pub const WITNESS_SLACK: f64 = 1e-8;

pub fn reduction_witness_check(rn: &Matrix, l: f64) -> Result<ReductionWitness> {
    let b = split_blocks(rn)?;
    let n = rn.nrows();
    let mut a = build_shift_thm13(n, l)?.to_dense();
    a -= rn;
    let s_n = singular_values(&a)?.smallest();
    let quad_value = direct_quadratic_form(&b.r, l, &b.u, &b.w)? / l;
    let s_n_bound = (quad_value + b.r_nn).abs();
    Ok(ReductionWitness {
        s_n,
        s_n_bound,
        quad_value,
        r_nn: b.r_nn,
        holds: s_n <= s_n_bound + WITNESS_SLACK,
    })
}

fn to_integers(v: impl Iterator<Item = f64>) -> Result<Vec<i64>> {
    v.map(|x| {
        if x.fract() == 0.0 && x.abs() < 9.0e15 {
            Ok(x as i64)
        } else {
            Err(Error::param("entries", format!("{x} is not an integer")))
        }
    })
    .collect()
}

/// Integer matrix in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    pub n: usize,
    pub data: Vec<i64>,
}

impl IntMatrix {
    pub fn from_matrix(m: &Matrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::param("R", "must be square"));
        }
        let n = m.nrows();
        let data = to_integers((0..n * n).map(|k| m[(k / n, k % n)]))?;
        Ok(Self { n, data })
    }

    fn checked_apply(&self, x: &[i64]) -> Option<Vec<i64>> {
        (0..self.n)
            .map(|i| {
                let row = &self.data[i * self.n..(i + 1) * self.n];
                row.iter().zip(x).try_fold(0i64, |acc, (&a, &b)| acc.checked_add(a.checked_mul(b)?))
            })
            .collect()
    }

    fn big_apply(&self, x: &[BigInt]) -> Vec<BigInt> {
        (0..self.n)
            .map(|i| {
                let row = &self.data[i * self.n..(i + 1) * self.n];
                row.iter().zip(x).filter(|(&a, _)| a != 0).map(|(&a, b)| b * a).sum()
            })
            .collect()
    }
}

fn checked_dot(a: &[i64], b: &[i64]) -> Option<i64> {
    a.iter().zip(b).try_fold(0i64, |acc, (&x, &y)| acc.checked_add(x.checked_mul(y)?))
}

/// `wᵀ R^i u` for `i = 0..count`, exactly. Uses `i64` and falls back to big
/// integers on overflow.
pub fn integer_power_forms(r: &IntMatrix, u: &[i64], w: &[i64], count: usize) -> Result<Vec<BigInt>> {
    if u.len() != r.n || w.len() != r.n {
        return Err(Error::DimensionMismatch {
            expected: format!("vectors of length {}", r.n),
            got: format!("u {}, w {}", u.len(), w.len()),
        });
    }
    let fast = (|| {
        let mut x = u.to_vec();
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            if i > 0 {
                x = r.checked_apply(&x)?;
            }
            out.push(BigInt::from(checked_dot(w, &x)?));
        }
        Some(out)
    })();
    if let Some(out) = fast {
        return Ok(out);
    }
    let wb: Vec<BigInt> = w.iter().map(|&v| BigInt::from(v)).collect();
    let mut x: Vec<BigInt> = u.iter().map(|&v| BigInt::from(v)).collect();
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        if i > 0 {
            x = r.big_apply(&x);
        }
        out.push(wb.iter().zip(&x).map(|(a, b)| a * b).sum());
    }
    Ok(out)
}

/// Parameters of the event `E ∩ {‖R_{n−1}‖ <= K√n}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventParams {
    pub n: usize,
    pub t: u32,
    pub k_gate: f64,
    pub l: f64,
    pub c: f64,
}

impl EventParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::param("n", "needs n >= 2"));
        }
        if self.t < 1 {
            return Err(Error::param("t", "needs t >= 1"));
        }
        if !(self.k_gate > 0.0) {
            return Err(Error::param("K", "must be > 0"));
        }
        if !(self.c > 0.0) {
            return Err(Error::param("C", "must be > 0"));
        }
        check_l(self.n, self.k_gate, self.l)
    }

    /// `C K^t n^{t/2} / L^{t−1}`.
    pub fn tail_bound(&self) -> f64 {
        let t = self.t as i32;
        self.c * self.k_gate.powi(t) * (self.n as f64).powf(f64::from(self.t) / 2.0)
            / self.l.powi(t - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventOutcome {
    /// All of `wᵀ R^i u = 0` for `i <= t − 2`.
    pub equalities: bool,
    /// Equalities, norm gate and tail term.
    pub event: bool,
}

/// `wᵀ (R/L)^{t−1} (I − R/L)⁻¹ u`.
pub fn tail_term(b: &Blocks, l: f64, t: u32) -> Result<f64> {
    let mut y = shifted_solve(&b.r, l, &(&b.u * l))?;
    for _ in 1..t {
        y = &b.r * y / l;
    }
    Ok(b.w.dot(&y))
}

pub fn event_outcome(rn: &Matrix, p: &EventParams) -> Result<EventOutcome> {
    let b = split_blocks(rn)?;
    let equalities = if p.t >= 2 {
        let r = IntMatrix::from_matrix(&b.r)?;
        let u = to_integers(b.u.iter().copied())?;
        let w = to_integers(b.w.iter().copied())?;
        integer_power_forms(&r, &u, &w, p.t as usize - 1)?.iter().all(Zero::is_zero)
    } else {
        true
    };
    if !equalities {
        return Ok(EventOutcome { equalities, event: false });
    }
    if operator_norm(&b.r)? > p.k_gate * (p.n as f64).sqrt() {
        return Ok(EventOutcome { equalities, event: false });
    }
    let event = tail_term(&b, p.l, p.t)?.abs() <= p.tail_bound();
    Ok(EventOutcome { equalities, event })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EventReport {
    pub params: EventParams,
    pub frequency: Frequency,
    /// Frequency of the equalities alone.
    pub equalities: Frequency,
    pub truncated: bool,
}

/// Monte Carlo frequency of `E ∩ {‖R_{n−1}‖ <= K√n}` under lazy Rademacher `R_n`.
pub fn event_e_frequency(p: &EventParams, trials: u64, seed: u64, mc: &McSettings) -> Result<EventReport> {
    p.validate()?;
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let spec = EnsembleSpec::new(p.n, ScalarDistribution::LazyRademacher, seed)?;
    let batch = mc.executor.map_trials(trials, |i| event_outcome(&sample_matrix(&spec, i)?, p))?;
    Ok(EventReport {
        params: *p,
        frequency: Frequency::from_flags(batch.results.iter().map(|o| o.event), mc.confidence)?,
        equalities: Frequency::from_flags(batch.results.iter().map(|o| o.equalities), mc.confidence)?,
        truncated: batch.truncated,
    })
}

/// Exact `P[wᵀ R^i u = 0 for all i <= t − 2]` with `R`, `u`, `w` of size
/// `n − 1` and lazy Rademacher entries.
pub fn exact_event_probability(n_small: usize, t: u32) -> Result<Ratio<u128>> {
    if n_small < 2 {
        return Err(Error::param("n", "needs n >= 2"));
    }
    if t < 1 {
        return Err(Error::param("t", "needs t >= 1"));
    }
    if t == 1 {
        return Ok(Ratio::from_integer(1));
    }
    let m = n_small - 1;
    let free = if t == 2 { 2 * m } else { m * m + 2 * m };
    let cost = 3f64.powi(free as i32);
    if cost > ENUMERATION_BUDGET || 4f64.powi(free as i32) > u128::MAX as f64 {
        return Err(Error::BudgetExceeded { what: "enumeration", needed: cost, limit: ENUMERATION_BUDGET });
    }
    // Each coordinate is 0 with weight 2 and ±1 with weight 1, out of 4.
    let vectors = all_vectors(m);
    let hits: u128 = if t == 2 {
        let mut total = 0u128;
        for (u, wu) in &vectors {
            for (w, ww) in &vectors {
                if checked_dot(u, w) == Some(0) {
                    total += u128::from(*wu) * u128::from(*ww);
                }
            }
        }
        total
    } else {
        let mats = all_vectors(m * m);
        let mut total = 0u128;
        for (rd, wr) in &mats {
            let r = IntMatrix { n: m, data: rd.clone() };
            // Powers R^i u for each u, i <= t − 2.
            let orbits: Vec<Vec<Vec<i64>>> = vectors
                .iter()
                .map(|(u, _)| {
                    let mut x = u.clone();
                    let mut orbit = vec![x.clone()];
                    for _ in 1..t - 1 {
                        x = r.checked_apply(&x).expect("small integer matrix power");
                        orbit.push(x.clone());
                    }
                    orbit
                })
                .collect();
            for ((_, wu), orbit) in vectors.iter().zip(&orbits) {
                for (w, ww) in &vectors {
                    if orbit.iter().all(|x| checked_dot(w, x) == Some(0)) {
                        total += u128::from(*wr) * u128::from(*wu) * u128::from(*ww);
                    }
                }
            }
        }
        total
    };
    Ok(Ratio::new(hits, 4u128.pow(free as u32)))
}

/// All `{−1, 0, 1}^len` vectors with weight `2^{#zeros}`.
fn all_vectors(len: usize) -> Vec<(Vec<i64>, u64)> {
    let count = 3usize.pow(len as u32);
    (0..count)
        .map(|mut code| {
            let mut v = Vec::with_capacity(len);
            let mut weight = 1u64;
            for _ in 0..len {
                let digit = (code % 3) as i64 - 1;
                code /= 3;
                if digit == 0 {
                    weight *= 2;
                }
                v.push(digit);
            }
            (v, weight)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CounterexampleReport {
    pub config: CounterexampleConfig,
    pub threshold: f64,
    pub frequency: Frequency,
    pub predicted_floor: f64,
    /// `p_hat >= floor`.
    pub meets_floor: bool,
    /// `ci_low >= floor`.
    pub clears_floor: bool,
    pub truncated: bool,
}

/// `s_n(A + R_n)` per trial with `A = diag(L, …, L, 0)`.
pub fn counterexample_samples(config: &CounterexampleConfig, sign: f64, mc: &McSettings) -> Result<(Vec<f64>, bool)> {
    config.validate()?;
    let spec = config.noise()?;
    let shift = build_shift_thm13(config.n, config.l)?;
    let batch = mc.executor.map_trials(config.trials, |i| {
        let mut m = sample_matrix(&spec, i)? * sign;
        shift.add_to(&mut m);
        let s = singular_values(&m)?;
        Ok(if s.is_numerically_singular() { 0.0 } else { s.smallest() })
    })?;
    Ok((batch.results, batch.truncated))
}

fn report(config: CounterexampleConfig, samples: &[f64], truncated: bool, confidence: f64) -> Result<CounterexampleReport> {
    let threshold = config.threshold();
    let predicted_floor = config.predicted_floor();
    let frequency = Frequency::from_flags(samples.iter().map(|&s| s <= threshold), confidence)?;
    Ok(CounterexampleReport {
        config,
        threshold,
        frequency,
        predicted_floor,
        meets_floor: frequency.p_hat >= predicted_floor,
        clears_floor: frequency.ci_low >= predicted_floor,
        truncated,
    })
}

pub fn counterexample_tail_experiment(config: &CounterexampleConfig, mc: &McSettings) -> Result<CounterexampleReport> {
    let (samples, truncated) = counterexample_samples(config, 1.0, mc)?;
    report(*config, &samples, truncated, mc.confidence)
}

/// One report per value of `C`, all on the same samples.
pub fn counterexample_sweep(config: &CounterexampleConfig, cs: &[f64], mc: &McSettings) -> Result<Vec<CounterexampleReport>> {
    let (samples, truncated) = counterexample_samples(config, 1.0, mc)?;
    cs.iter()
        .map(|&c| {
            let cfg = CounterexampleConfig { c, ..*config };
            cfg.validate()?;
            report(cfg, &samples, truncated, mc.confidence)
        })
        .collect()
}

/// `s_n(A + R_n)` and `s_n(A − R_n)` on independent streams.
pub fn symmetry_samples(config: &CounterexampleConfig, mc: &McSettings) -> Result<(Vec<f64>, Vec<f64>)> {
    let (plus, _) = counterexample_samples(config, 1.0, mc)?;
    let other = CounterexampleConfig { seed: derive_substream(config.seed, u64::MAX), ..*config };
    let (minus, _) = counterexample_samples(&other, -1.0, mc)?;
    Ok((plus, minus))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HsTailCheck {
    pub gated: bool,
    pub hs_norm: f64,
    pub bound: f64,
    pub holds: bool,
}

/// On `‖R‖ <= K√n`, compares `‖Σ_{i≥t−1}(R/L)^i‖_HS` with `2K^{t−1}n^{t/2}/L^{t−1}`,
/// where `R` is `(n−1) × (n−1)`.
pub fn hs_tail_check(r: &Matrix, k: f64, l: f64, t: u32) -> Result<HsTailCheck> {
    let m = r.nrows();
    if r.ncols() != m || m == 0 {
        return Err(Error::param("R", "must be square and non-empty"));
    }
    if t < 1 {
        return Err(Error::param("t", "needs t >= 1"));
    }
    let n = (m + 1) as f64;
    check_l(m + 1, k, l)?;
    let bound = 2.0 * k.powi(t as i32 - 1) * n.powf(f64::from(t) / 2.0) / l.powi(t as i32 - 1);
    if operator_norm(r)? > k * n.sqrt() {
        return Ok(HsTailCheck { gated: false, hs_norm: f64::NAN, bound, holds: true });
    }
    let id = Matrix::identity(m, m);
    let inv = (&id - r / l).try_inverse().ok_or(Error::Singular)?;
    let mut q = inv;
    for _ in 1..t {
        q = r * q / l;
    }
    let hs_norm = q.norm();
    Ok(HsTailCheck { gated: true, hs_norm, bound, holds: hs_norm <= bound })
}

/// Survival frequencies `P̂[|wᵀQu| >= x‖Q‖_HS]` with lazy Rademacher `u`, `w`.
pub fn quadratic_form_survival(q: &Matrix, xs: &[f64], trials: u64, seed: u64, mc: &McSettings) -> Result<Vec<f64>> {
    let m = q.nrows();
    if q.ncols() != m || m == 0 {
        return Err(Error::param("Q", "must be square and non-empty"));
    }
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let hs = q.norm();
    if hs == 0.0 {
        return Err(Error::param("Q", "must be nonzero"));
    }
    let spec = EnsembleSpec::new(m, ScalarDistribution::LazyRademacher, seed)?;
    let values = mc
        .executor
        .map_trials(trials, |i| {
            let mut s = spec.sampler(i)?;
            let u = s.vector(m);
            let w = s.vector(m);
            Ok(w.dot(&(q * u)).abs() / hs)
        })?
        .results;
    let total = values.len() as f64;
    Ok(xs.iter().map(|&x| values.iter().filter(|&&v| v >= x).count() as f64 / total).collect())
}
