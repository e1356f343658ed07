//! Monte Carlo tail probabilities `P[s_n(A + M) <= ε]` and the event
//! frequencies behind the invertibility lemmas.
//!
//! All frequencies carry exact Clopper–Pearson intervals. Sweeps over several
//! thresholds reuse one decomposition per trial, so counts are monotone in the
//! threshold by construction.

use serde::Serialize;

use crate::arithmetic::{
    classify_vector, lcd, levy_concentration_empirical, Compressibility, CompressibilityParams,
    LcdParams, LcdResult,
};
use crate::ensembles::{sample_matrix, EnsembleSpec, ShiftMatrix};
use crate::runner::Executor;
use crate::spectra::{
    bottom_singular_projection, operator_norm, row_minor, singular_values, sorted_svd,
    SINGULAR_RTOL,
};
use crate::stats::{clopper_pearson, empirical_quantile, linear_fit};
use crate::{Error, Matrix, Result, Vector};

pub const DEFAULT_CONFIDENCE: f64 = 0.99;

/// Confidence level and executor shared by every Monte Carlo routine.
#[derive(Debug, Clone)]
pub struct McSettings {
    pub confidence: f64,
    pub executor: Executor,
}

impl McSettings {
    pub fn new(confidence: f64, executor: Executor) -> Result<Self> {
        if !(confidence > 0.0 && confidence < 1.0) {
            return Err(Error::param("confidence", "must lie in (0, 1)"));
        }
        Ok(Self { confidence, executor })
    }

    pub fn serial() -> Self {
        Self { confidence: DEFAULT_CONFIDENCE, executor: Executor::serial() }
    }
}

impl Default for McSettings {
    fn default() -> Self {
        Self { confidence: DEFAULT_CONFIDENCE, executor: Executor::default() }
    }
}

/// A binomial frequency with its exact interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Frequency {
    pub trials: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Frequency {
    pub fn from_counts(successes: u64, trials: u64, confidence: f64) -> Result<Self> {
        let (ci_low, ci_high) = clopper_pearson(successes, trials, confidence)?;
        let p_hat = successes as f64 / trials as f64;
        Ok(Self { trials, successes, p_hat, ci_low: ci_low.min(p_hat), ci_high: ci_high.max(p_hat) })
    }

    pub fn from_flags(flags: impl IntoIterator<Item = bool>, confidence: f64) -> Result<Self> {
        let (mut s, mut t) = (0u64, 0u64);
        for f in flags {
            t += 1;
            s += u64::from(f);
        }
        Self::from_counts(s, t, confidence)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRow {
    pub epsilon: f64,
    pub trials: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl TailRow {
    pub fn new(epsilon: f64, f: Frequency) -> Self {
        Self {
            epsilon,
            trials: f.trials,
            successes: f.successes,
            p_hat: f.p_hat,
            ci_low: f.ci_low,
            ci_high: f.ci_high,
        }
    }

    pub fn frequency(&self) -> Frequency {
        Frequency {
            trials: self.trials,
            successes: self.successes,
            p_hat: self.p_hat,
            ci_low: self.ci_low,
            ci_high: self.ci_high,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailMeta {
    pub n: usize,
    pub ensemble: String,
    pub shift: String,
    pub master_seed: u64,
    pub confidence: f64,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailCurve {
    pub rows: Vec<TailRow>,
    pub meta: TailMeta,
}

fn check_shift(shift: &ShiftMatrix, ensemble: &EnsembleSpec) -> Result<()> {
    if shift.n() != ensemble.n {
        return Err(Error::DimensionMismatch {
            expected: format!("shift of size {}", ensemble.n),
            got: format!("shift of size {}", shift.n()),
        });
    }
    Ok(())
}

fn check_trials(trials: u64) -> Result<()> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    Ok(())
}

/// `s_n(A + M_t)` for each trial, with numerically singular draws reported as 0.
pub fn smallest_singular_samples(
    shift: &ShiftMatrix,
    ensemble: &EnsembleSpec,
    trials: u64,
    executor: &Executor,
) -> Result<(Vec<f64>, bool)> {
    check_shift(shift, ensemble)?;
    check_trials(trials)?;
    let batch = executor.map_trials(trials, |t| {
        let mut m = sample_matrix(ensemble, t)?;
        shift.add_to(&mut m);
        let s = singular_values(&m)?;
        Ok(if s.is_numerically_singular() { 0.0 } else { s.smallest() })
    })?;
    Ok((batch.results, batch.truncated))
}

/// Tail curve from precomputed `s_n` samples; rows sorted by epsilon.
pub fn tail_curve_from_samples(
    samples: &[f64],
    epsilons: &[f64],
    confidence: f64,
    meta: TailMeta,
) -> Result<TailCurve> {
    if samples.is_empty() {
        return Err(Error::param("trials", "no completed trials"));
    }
    for &e in epsilons {
        if !(e >= 0.0 && e.is_finite()) {
            return Err(Error::param("epsilon", format!("must be finite and >= 0, got {e}")));
        }
    }
    let mut eps = epsilons.to_vec();
    eps.sort_by(f64::total_cmp);
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rows = eps
        .iter()
        .map(|&e| {
            let successes = sorted.partition_point(|&s| s <= e) as u64;
            Frequency::from_counts(successes, sorted.len() as u64, confidence)
                .map(|f| TailRow::new(e, f))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TailCurve { rows, meta })
}

/// Tail curve over several thresholds with common random numbers.
pub fn sweep_tail_curve(
    shift: &ShiftMatrix,
    ensemble: &EnsembleSpec,
    epsilons: &[f64],
    trials: u64,
    mc: &McSettings,
) -> Result<TailCurve> {
    let (samples, truncated) = smallest_singular_samples(shift, ensemble, trials, &mc.executor)?;
    let meta = TailMeta {
        n: ensemble.n,
        ensemble: ensemble.distribution.to_string(),
        shift: shift.describe(),
        master_seed: ensemble.master_seed,
        confidence: mc.confidence,
        truncated,
    };
    tail_curve_from_samples(&samples, epsilons, mc.confidence, meta)
}

/// Single-threshold estimate of `P[s_n(A + M) <= ε]`.
pub fn estimate_tail_probability(
    shift: &ShiftMatrix,
    ensemble: &EnsembleSpec,
    epsilon: f64,
    trials: u64,
    mc: &McSettings,
) -> Result<TailRow> {
    let curve = sweep_tail_curve(shift, ensemble, &[epsilon], trials, mc)?;
    Ok(curve.rows[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub epsilon_min: f64,
    pub epsilon_max: f64,
    pub points: usize,
}

pub const MIN_FIT_SUCCESSES: u64 = 10;

/// Least squares on `(log ε, log p_hat)` over rows with at least ten successes.
pub fn fit_power_law(curve: &TailCurve) -> Result<PowerLawFit> {
    let rows: Vec<&TailRow> = curve
        .rows
        .iter()
        .filter(|r| r.successes >= MIN_FIT_SUCCESSES && r.p_hat > 0.0 && r.epsilon > 0.0)
        .collect();
    if rows.len() < 2 {
        return Err(Error::NoFittableRows { min_successes: MIN_FIT_SUCCESSES });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.epsilon.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.p_hat.ln()).collect();
    let fit = linear_fit(&x, &y)?;
    Ok(PowerLawFit {
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        epsilon_min: rows.iter().map(|r| r.epsilon).fold(f64::INFINITY, f64::min),
        epsilon_max: rows.iter().map(|r| r.epsilon).fold(0.0, f64::max),
        points: rows.len(),
    })
}

/// Samples of `‖M‖ / √n`.
pub fn opnorm_samples(ensemble: &EnsembleSpec, trials: u64, executor: &Executor) -> Result<Vec<f64>> {
    check_trials(trials)?;
    let scale = (ensemble.n as f64).sqrt();
    Ok(executor
        .map_trials(trials, |t| Ok(operator_norm(&sample_matrix(ensemble, t)?)? / scale))?
        .results)
}

/// Empirical `q`-quantile of `‖M‖ / √n`.
pub fn opnorm_quantile(ensemble: &EnsembleSpec, trials: u64, q: f64, mc: &McSettings) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::param("q", "must lie in (0, 1)"));
    }
    empirical_quantile(&opnorm_samples(ensemble, trials, &mc.executor)?, q)
}

fn check_unit(v: &Vector) -> Result<()> {
    let norm = v.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NonUnitVector { norm });
    }
    Ok(())
}

/// `‖P_V (B + N) v‖ / √n` per trial, `P_V` the bottom-`m` left singular
/// projection of the fixed shift rows `B`.
pub fn single_vector_image_norms(
    b_shift: &Matrix,
    ensemble: &EnsembleSpec,
    v: &Vector,
    m: usize,
    trials: u64,
    executor: &Executor,
) -> Result<Vec<f64>> {
    let n = ensemble.n;
    if n < 2 || b_shift.nrows() != n - 1 || b_shift.ncols() != n || v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("B {}x{n} and v of length {n}", n.saturating_sub(1)),
            got: format!("B {}x{}, v of length {}", b_shift.nrows(), b_shift.ncols(), v.len()),
        });
    }
    check_unit(v)?;
    check_trials(trials)?;
    let p = bottom_singular_projection(b_shift, m)?.projection.matrix;
    let pbv = &p * (b_shift * v);
    let scale = (n as f64).sqrt();
    Ok(executor
        .map_trials(trials, |t| {
            let noise = row_minor(&sample_matrix(ensemble, t)?)?;
            Ok((&pbv + &p * (noise * v)).norm() / scale)
        })?
        .results)
}

/// Frequency of `‖P_V (B + N) v‖ <= c√n`.
#[allow(clippy::too_many_arguments)]
pub fn single_vector_image_experiment(
    b_shift: &Matrix,
    ensemble: &EnsembleSpec,
    v: &Vector,
    m: usize,
    c: f64,
    trials: u64,
    mc: &McSettings,
) -> Result<Frequency> {
    if !(c >= 0.0) {
        return Err(Error::param("c", "must be >= 0"));
    }
    let norms = single_vector_image_norms(b_shift, ensemble, v, m, trials, &mc.executor)?;
    Frequency::from_flags(norms.iter().map(|&x| x <= c), mc.confidence)
}

/// Both sides of the invertibility-via-distance inequality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceCheck {
    /// Frequency of `s_n <= ερ/√n` with an incompressible minimizing right singular vector.
    pub lhs: Frequency,
    /// `(1/δn) Σ_k P̂[dist(X_k, H_k) <= ε]`.
    pub rhs: f64,
    /// Same sum with each `P̂` replaced by its upper confidence limit.
    pub rhs_high: f64,
    /// Per-column frequencies of `dist(X_k, H_k) <= ε`.
    pub columns: Vec<Frequency>,
    /// `lhs.ci_low <= rhs_high`.
    pub holds: bool,
}

/// Distance from column `k` of `a` to the span of the other columns.
/// Rank-deficient spans count as distance 0.
pub fn column_distance(a: &Matrix, k: usize) -> Result<f64> {
    let n = a.nrows();
    if a.ncols() != n || k >= n {
        return Err(Error::param("k", "column index out of range for a square matrix"));
    }
    if n == 1 {
        return Ok(a[(0, 0)].abs());
    }
    let mut others = a.clone();
    others.column_mut(k).fill(0.0);
    let svd = sorted_svd(&others)?;
    let sv = svd.sigma.values();
    if sv[n - 2] < SINGULAR_RTOL * sv[0].max(1.0) {
        return Ok(0.0);
    }
    let normal = svd.u.column(n - 1);
    Ok(normal.dot(&a.column(k)).abs())
}

pub fn invertibility_distance_check(
    ensemble: &EnsembleSpec,
    shift: &ShiftMatrix,
    params: CompressibilityParams,
    epsilon: f64,
    trials: u64,
    mc: &McSettings,
) -> Result<DistanceCheck> {
    check_shift(shift, ensemble)?;
    check_trials(trials)?;
    if !(epsilon >= 0.0) {
        return Err(Error::param("epsilon", "must be >= 0"));
    }
    let n = ensemble.n;
    if n < 2 {
        return Err(Error::param("n", "needs n >= 2"));
    }
    let threshold = epsilon * params.rho / (n as f64).sqrt();
    let batch = mc.executor.map_trials(trials, |t| {
        let mut a = sample_matrix(ensemble, t)?;
        shift.add_to(&mut a);
        let svd = sorted_svd(&a)?;
        let s = if svd.sigma.is_numerically_singular() { 0.0 } else { svd.sigma.smallest() };
        let minimizer: Vector = svd.v_t.row(n - 1).transpose();
        let minimizer = &minimizer / minimizer.norm();
        let lhs = s <= threshold
            && classify_vector(&minimizer, params)? == Compressibility::Incompressible;
        let cols = (0..n)
            .map(|k| column_distance(&a, k).map(|d| d <= epsilon))
            .collect::<Result<Vec<bool>>>()?;
        Ok((lhs, cols))
    })?;
    let lhs = Frequency::from_flags(batch.results.iter().map(|r| r.0), mc.confidence)?;
    let columns = (0..n)
        .map(|k| Frequency::from_flags(batch.results.iter().map(|r| r.1[k]), mc.confidence))
        .collect::<Result<Vec<_>>>()?;
    let scale = 1.0 / (params.delta * n as f64);
    let rhs = scale * columns.iter().map(|f| f.p_hat).sum::<f64>();
    let rhs_high = scale * columns.iter().map(|f| f.ci_high).sum::<f64>();
    Ok(DistanceCheck { holds: lhs.ci_low <= rhs_high, lhs, rhs, rhs_high, columns })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnticoncentrationReport {
    pub levy_hat: f64,
    pub samples: u64,
    #[serde(skip)]
    pub lcd: LcdResult,
}

/// Samples of `Σ v_i ξ_i` with `ξ` from the ensemble's law.
pub fn weighted_sum_samples(
    v: &Vector,
    ensemble: &EnsembleSpec,
    trials: u64,
    executor: &Executor,
) -> Result<Vec<f64>> {
    check_trials(trials)?;
    Ok(executor
        .map_trials(trials, |t| {
            let mut s = ensemble.sampler(t)?;
            Ok(v.iter().map(|vi| vi * s.sample()).sum::<f64>())
        })?
        .results)
}

/// Empirical `L(Σ v_i ξ_i, ε)` paired with `LCD(v)`.
pub fn anticoncentration_vs_lcd(
    v: &Vector,
    ensemble: &EnsembleSpec,
    epsilon: f64,
    trials: u64,
    lcd_params: &LcdParams,
    mc: &McSettings,
) -> Result<AnticoncentrationReport> {
    let lcd_result = lcd(v, lcd_params)?;
    let sums = weighted_sum_samples(v, ensemble, trials, &mc.executor)?;
    Ok(AnticoncentrationReport {
        levy_hat: levy_concentration_empirical(&sums, epsilon)?,
        samples: sums.len() as u64,
        lcd: lcd_result,
    })
}
