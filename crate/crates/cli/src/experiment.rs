//! Typed experiment configs and their execution.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde_json::{json, Value};
use svsmooth_core::arithmetic::{
    classify_vector, lcd, sparsity_distance, Compressibility, CompressibilityParams, LcdParams, LcdStatus,
};
use svsmooth_core::counterexample::{counterexample_sweep, event_e_frequency, CounterexampleConfig, EventParams};
use svsmooth_core::ensembles::{derive_substream, EnsembleSpec, ScalarDistribution, ShiftMatrix};
use svsmooth_core::lattice::{
    build_sd_net, count_lattice_points, cover_audit, cover_ellipsoid, net_size_bound, Ellipsoid, Parallelepiped,
};
use svsmooth_core::stats::{empirical_quantile, linear_fit};
use svsmooth_core::tail::{
    fit_power_law, invertibility_distance_check, opnorm_quantile, opnorm_samples, sweep_tail_curve, McSettings,
};
use svsmooth_core::{Matrix, Vector};

use crate::config::{parse_reals, Diagnostic, RawConfig, Reader};
use crate::output::{Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    TailSweep,
    Lcd,
    Classify,
    Counterexample,
    EventE,
    Lattice,
    Cover,
    Net,
    OpnormQuantile,
    DistanceCheck,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::TailSweep,
        Command::Lcd,
        Command::Classify,
        Command::Counterexample,
        Command::EventE,
        Command::Lattice,
        Command::Cover,
        Command::Net,
        Command::OpnormQuantile,
        Command::DistanceCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::TailSweep => "tail-sweep",
            Command::Lcd => "lcd",
            Command::Classify => "classify",
            Command::Counterexample => "counterexample",
            Command::EventE => "event-e",
            Command::Lattice => "lattice",
            Command::Cover => "cover",
            Command::Net => "net",
            Command::OpnormQuantile => "opnorm-quantile",
            Command::DistanceCheck => "distance-check",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Command::ALL.iter().map(|c| c.name()).collect();
            format!("unknown command `{s}` (expected one of {})", names.join(", "))
        })
    }
}

/// A real parameter that may be derived at run time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Auto {
    Auto,
    Value(f64),
}

impl FromStr for Auto {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Auto::Auto);
        }
        s.parse::<f64>().map(Auto::Value).map_err(|_| format!("expected a real or `auto`, got `{s}`"))
    }
}

/// Orientation of a box or ellipsoid.
#[derive(Debug, Clone, PartialEq)]
pub enum Axes {
    Identity,
    Random,
    Explicit(Vec<f64>),
}

impl FromStr for Axes {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "identity" => Ok(Axes::Identity),
            "random" => Ok(Axes::Random),
            _ => parse_reals(s).map(Axes::Explicit),
        }
    }
}

impl Axes {
    fn matrix(&self, n: usize, seed: u64) -> svsmooth_core::Result<Matrix> {
        Ok(match self {
            Axes::Identity => Matrix::identity(n, n),
            Axes::Explicit(v) => Matrix::from_row_slice(n, n, v),
            Axes::Random => {
                let spec = EnsembleSpec::new(1, ScalarDistribution::Gaussian, seed)?;
                spec.sampler(0)?.matrix(n, n).qr().q()
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    TailSweep { n: usize, distribution: ScalarDistribution, shift: ShiftMatrix, epsilons: Vec<f64> },
    Lcd { vector: Vector, alpha: f64, gamma: f64, theta_max: Option<f64> },
    Classify { vector: Vector, delta: f64, rho: f64 },
    Counterexample { n: usize, t: u32, k: Auto, l: Auto, cs: Vec<f64>, k_quantile: f64, k_trials: u64 },
    EventE { ns: Vec<usize>, t: u32, k: f64, l: Auto, c: f64 },
    Lattice { center: Vec<f64>, widths: Vec<f64>, axes: Axes },
    Cover { center: Vec<f64>, semiaxes: Vec<f64>, axes: Axes, samples: u64 },
    Net { n: usize, d: f64, mu: f64, gamma: f64, samples: u64, eta: f64, c_lemma: f64 },
    OpnormQuantile { n: usize, distribution: ScalarDistribution, qs: Vec<f64> },
    DistanceCheck { n: usize, distribution: ScalarDistribution, shift: ShiftMatrix, delta: f64, rho: f64, epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub master_seed: u64,
    pub trials: u64,
    pub confidence: f64,
    pub output_path: Option<PathBuf>,
    pub params: Params,
    /// The raw keys, echoed into the run metadata.
    pub raw: RawConfig,
}

pub const DEFAULT_TRIALS: u64 = 10_000;

fn uses_trials(c: Command) -> bool {
    matches!(
        c,
        Command::TailSweep | Command::Counterexample | Command::EventE | Command::OpnormQuantile | Command::DistanceCheck
    )
}

/// All diagnostics for `raw`; empty when it describes a runnable experiment.
pub fn validate(raw: &RawConfig) -> Vec<Diagnostic> {
    ExperimentConfig::from_raw(raw).err().unwrap_or_default()
}

fn positive(r: &Reader, key: &str, v: Option<f64>) -> Option<f64> {
    match v {
        Some(x) if x > 0.0 && x.is_finite() => Some(x),
        Some(_) => {
            r.error(key, "must be finite and > 0");
            None
        }
        None => None,
    }
}

fn unit_interval(r: &Reader, key: &str, v: Option<f64>) -> Option<f64> {
    match v {
        Some(x) if x > 0.0 && x < 1.0 => Some(x),
        Some(_) => {
            r.error(key, "must lie in (0, 1)");
            None
        }
        None => None,
    }
}

fn at_least(r: &Reader, key: &str, v: Option<usize>, min: usize) -> Option<usize> {
    match v {
        Some(x) if x >= min => Some(x),
        Some(_) => {
            r.error(key, format!("must be at least {min}"));
            None
        }
        None => None,
    }
}

fn unit_vector(r: &Reader, key: &str) -> Option<Vector> {
    let v = r.reals(key)?;
    let v = Vector::from_vec(v);
    let norm = v.norm();
    if norm == 0.0 {
        r.error(key, "must be nonzero");
        return None;
    }
    Some(v / norm)
}

fn check_len(r: &Reader, key: &str, got: usize, want: usize, what: &str) -> bool {
    if got != want {
        r.error(key, format!("has {got} entries, but {what} is {want}"));
        return false;
    }
    true
}

fn axes(r: &Reader, n: usize) -> Option<Axes> {
    let a: Axes = r.or("axes", Axes::Identity)?;
    if let Axes::Explicit(v) = &a {
        if !check_len(r, "axes", v.len(), n * n, "the squared dimension") {
            return None;
        }
    }
    Some(a)
}

fn precondition(r: &Reader, n: usize, k: f64, l: f64) {
    let need = 2.0 * k * (n as f64).sqrt();
    if !(l >= need) {
        r.error("L", format!("precondition L ≥ 2K√n violated: L = {l}, 2K√n = {need} (n = {n}, K = {k})"));
    }
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, Vec<Diagnostic>> {
        let r = Reader::new(raw);
        let command: Option<Command> = r.required("command");
        let master_seed: Option<u64> = r.or("seed", 0);
        let confidence = unit_interval(&r, "confidence", r.or("confidence", svsmooth_core::tail::DEFAULT_CONFIDENCE));
        let output_path: Option<PathBuf> = r.optional("out");
        let trials = match command {
            Some(c) if uses_trials(c) => match r.or::<u64>("trials", DEFAULT_TRIALS) {
                Some(0) => {
                    r.error("trials", "must be at least 1");
                    None
                }
                t => t,
            },
            _ => Some(0),
        };
        let params = command.and_then(|c| Self::params(c, &r));
        let mut diags = r.finish();
        if command.is_none() {
            // Keys cannot be checked against an unknown command.
            diags.retain(|d| d.key == "command");
        }
        match (command, master_seed, confidence, trials, params) {
            (Some(command), Some(master_seed), Some(confidence), Some(trials), Some(params)) if diags.is_empty() => {
                Ok(Self { command, master_seed, trials, confidence, output_path, params, raw: raw.clone() })
            }
            _ => {
                if diags.is_empty() {
                    diags.push(Diagnostic::new("config", "invalid configuration"));
                }
                Err(diags)
            }
        }
    }

    fn params(command: Command, r: &Reader) -> Option<Params> {
        match command {
            Command::TailSweep => {
                let n = at_least(r, "n", r.required("n"), 1);
                let distribution = r.distribution("distribution", ScalarDistribution::Gaussian);
                let epsilons = r.reals("epsilons");
                if let Some(e) = &epsilons {
                    if e.iter().any(|&x| x < 0.0) {
                        r.error("epsilons", "must be >= 0");
                    }
                }
                let shift = n.and_then(|n| r.shift("shift", n));
                Some(Params::TailSweep { n: n?, distribution: distribution?, shift: shift?, epsilons: epsilons? })
            }
            Command::Lcd => {
                let vector = unit_vector(r, "vector");
                let alpha = positive(r, "alpha", r.required("alpha"));
                let gamma = unit_interval(r, "gamma", r.required("gamma"));
                let theta_max = match r.optional::<f64>("theta_max") {
                    Some(t) => Some(positive(r, "theta_max", Some(t))?),
                    None => None,
                };
                Some(Params::Lcd { vector: vector?, alpha: alpha?, gamma: gamma?, theta_max })
            }
            Command::Classify => {
                let vector = unit_vector(r, "vector");
                let delta = unit_interval(r, "delta", r.required("delta"));
                let rho = unit_interval(r, "rho", r.required("rho"));
                Some(Params::Classify { vector: vector?, delta: delta?, rho: rho? })
            }
            Command::Counterexample => {
                let n = at_least(r, "n", r.required("n"), 2);
                let t: Option<u32> = r.or("t", 1);
                if t == Some(0) {
                    r.error("t", "must be at least 1");
                }
                let k: Option<Auto> = r.required("K");
                let l: Option<Auto> = r.required("L");
                let cs = r.reals("C");
                if let Some(cs) = &cs {
                    if cs.iter().any(|&c| !(c > 0.0)) {
                        r.error("C", "every value must be > 0");
                    }
                }
                let k_quantile = unit_interval(r, "k_quantile", r.or("k_quantile", 0.9999));
                let k_trials: Option<u64> = r.or("k_trials", DEFAULT_TRIALS);
                if k_trials == Some(0) {
                    r.error("k_trials", "must be at least 1");
                }
                if let Some(Auto::Value(k)) = k {
                    if !(k > 0.0) {
                        r.error("K", "must be > 0");
                    } else if let (Some(n), Some(Auto::Value(l))) = (n, l) {
                        precondition(r, n, k, l);
                    }
                }
                Some(Params::Counterexample {
                    n: n?,
                    t: t.filter(|&t| t > 0)?,
                    k: k?,
                    l: l?,
                    cs: cs?,
                    k_quantile: k_quantile?,
                    k_trials: k_trials?,
                })
            }
            Command::EventE => {
                let ns = r.reals("n").and_then(|v| {
                    if v.iter().all(|&x| x >= 2.0 && x.fract() == 0.0) {
                        Some(v.iter().map(|&x| x as usize).collect::<Vec<_>>())
                    } else {
                        r.error("n", "every value must be an integer >= 2");
                        None
                    }
                });
                let t: Option<u32> = r.or("t", 2);
                if t == Some(0) {
                    r.error("t", "must be at least 1");
                }
                let k = positive(r, "K", r.required("K"));
                let l: Option<Auto> = r.or("L", Auto::Auto);
                let c = positive(r, "C", r.required("C"));
                if let (Some(ns), Some(k), Some(Auto::Value(l))) = (&ns, k, l) {
                    for &n in ns {
                        precondition(r, n, k, l);
                    }
                }
                Some(Params::EventE { ns: ns?, t: t.filter(|&t| t > 0)?, k: k?, l: l?, c: c? })
            }
            Command::Lattice => {
                let widths = r.reals("widths");
                let n = widths.as_ref().map_or(0, Vec::len);
                let center = r.reals_or("center", vec![0.0; n]);
                if let Some(c) = &center {
                    check_len(r, "center", c.len(), n, "the number of widths");
                }
                if let Some(w) = &widths {
                    if w.iter().any(|&x| !(x > 0.0)) {
                        r.error("widths", "must be > 0");
                    }
                }
                let axes = axes(r, n);
                Some(Params::Lattice { center: center?, widths: widths?, axes: axes? })
            }
            Command::Cover => {
                let semiaxes = r.reals("semiaxes");
                let n = semiaxes.as_ref().map_or(0, Vec::len);
                let center = r.reals_or("center", vec![0.0; n]);
                if let Some(c) = &center {
                    check_len(r, "center", c.len(), n, "the number of semiaxes");
                }
                if let Some(s) = &semiaxes {
                    if s.iter().any(|&x| !(x > 0.0)) {
                        r.error("semiaxes", "must be > 0");
                    }
                }
                let axes = axes(r, n);
                let samples: Option<u64> = r.or("samples", 100_000);
                Some(Params::Cover { center: center?, semiaxes: semiaxes?, axes: axes?, samples: samples? })
            }
            Command::Net => {
                let n = at_least(r, "n", r.required("n"), 1);
                let d = positive(r, "D", r.required("D"));
                let mu = positive(r, "mu", r.required("mu"));
                let gamma = unit_interval(r, "gamma", r.required("gamma"));
                let samples: Option<u64> = r.or("samples", 10_000);
                let eta = r.or("eta", 1.0);
                let c_lemma = positive(r, "c_lemma", r.or("c_lemma", 10.0));
                Some(Params::Net { n: n?, d: d?, mu: mu?, gamma: gamma?, samples: samples?, eta: eta?, c_lemma: c_lemma? })
            }
            Command::OpnormQuantile => {
                let n = at_least(r, "n", r.required("n"), 1);
                let distribution = r.distribution("distribution", ScalarDistribution::Gaussian);
                let qs = r.reals("q");
                if let Some(qs) = &qs {
                    if qs.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
                        r.error("q", "every value must lie in (0, 1)");
                    }
                }
                Some(Params::OpnormQuantile { n: n?, distribution: distribution?, qs: qs? })
            }
            Command::DistanceCheck => {
                let n = at_least(r, "n", r.required("n"), 2);
                let distribution = r.distribution("distribution", ScalarDistribution::Gaussian);
                let shift = n.and_then(|n| r.shift("shift", n));
                let delta = unit_interval(r, "delta", r.required("delta"));
                let rho = unit_interval(r, "rho", r.required("rho"));
                let epsilon: Option<f64> = r.required("epsilon");
                if epsilon.is_some_and(|e| !(e >= 0.0)) {
                    r.error("epsilon", "must be >= 0");
                }
                Some(Params::DistanceCheck {
                    n: n?,
                    distribution: distribution?,
                    shift: shift?,
                    delta: delta?,
                    rho: rho?,
                    epsilon: epsilon?,
                })
            }
        }
    }
}

/// Pass/fail verdict of a command with a built-in check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub table: Table,
    pub summary: Value,
    pub truncated: bool,
    pub check: Option<Check>,
}

fn freq_cells(f: &svsmooth_core::tail::Frequency) -> [Cell; 4] {
    [f.successes.into(), f.p_hat.into(), f.ci_low.into(), f.ci_high.into()]
}

/// Slope of `log p_hat` against `log x` over points with at least ten successes.
fn log_log_slope(points: &[(f64, f64, u64)]) -> Value {
    let pts: Vec<&(f64, f64, u64)> = points.iter().filter(|p| p.2 >= 10 && p.1 > 0.0).collect();
    if pts.len() < 2 {
        return Value::Null;
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    match linear_fit(&x, &y) {
        Ok(f) => json!({ "slope": f.slope, "intercept": f.intercept, "r_squared": f.r_squared, "points": pts.len() }),
        Err(_) => Value::Null,
    }
}

impl ExperimentConfig {
    pub fn run(&self, mc: &McSettings) -> svsmooth_core::Result<Outcome> {
        let seed = self.master_seed;
        let trials = self.trials;
        match &self.params {
            Params::TailSweep { n, distribution, shift, epsilons } => {
                let spec = EnsembleSpec::new(*n, distribution.clone(), seed)?;
                let curve = sweep_tail_curve(shift, &spec, epsilons, trials, mc)?;
                let mut table = Table::new(vec!["epsilon", "trials", "successes", "p_hat", "ci_low", "ci_high"]);
                for row in &curve.rows {
                    table.push(vec![
                        row.epsilon.into(),
                        row.trials.into(),
                        row.successes.into(),
                        row.p_hat.into(),
                        row.ci_low.into(),
                        row.ci_high.into(),
                    ]);
                }
                let fit = fit_power_law(&curve).map_or(Value::Null, |f| json!(f));
                let summary = json!({ "tail": curve.meta, "power_law_fit": fit });
                Ok(Outcome { table, summary, truncated: curve.meta.truncated, check: None })
            }
            Params::Lcd { vector, alpha, gamma, theta_max } => {
                let mut params = LcdParams::with_defaults(vector.len(), *alpha, *gamma);
                if let Some(t) = theta_max {
                    params.theta_max = *t;
                }
                let res = lcd(vector, &params)?;
                let status = match res.status {
                    LcdStatus::Found => "found",
                    LcdStatus::ExceedsCeiling => "exceeds_ceiling",
                };
                let mut table = Table::new(vec!["dim", "status", "value", "witness_theta", "witness_dist"]);
                table.push(vec![
                    vector.len().into(),
                    status.into(),
                    res.value.into(),
                    res.witness_theta.into(),
                    res.witness_dist.into(),
                ]);
                let summary = json!({ "theta_max": params.theta_max, "grid_step": params.grid_step });
                Ok(Outcome { table, summary, truncated: false, check: None })
            }
            Params::Classify { vector, delta, rho } => {
                let p = CompressibilityParams::new(*delta, *rho)?;
                let dist = sparsity_distance(vector, *delta)?;
                let class = match classify_vector(vector, p)? {
                    Compressibility::Compressible => "compressible",
                    Compressibility::Incompressible => "incompressible",
                };
                let mut table = Table::new(vec!["dim", "sparsity_distance", "class"]);
                table.push(vec![vector.len().into(), dist.into(), class.into()]);
                Ok(Outcome { table, summary: json!({}), truncated: false, check: None })
            }
            Params::Counterexample { n, t, k, l, cs, k_quantile, k_trials } => {
                let k = match k {
                    Auto::Value(k) => *k,
                    Auto::Auto => {
                        let spec = EnsembleSpec::new(*n, ScalarDistribution::LazyRademacher, derive_substream(seed, u64::MAX - 1))?;
                        opnorm_quantile(&spec, *k_trials, *k_quantile, mc)?
                    }
                };
                let l = match l {
                    Auto::Value(l) => *l,
                    Auto::Auto => 2.0 * k * (*n as f64).sqrt(),
                };
                let cfg = CounterexampleConfig { n: *n, t: *t, l, k, c: cs[0], trials, seed };
                let reports = counterexample_sweep(&cfg, cs, mc)?;
                let mut table = Table::new(vec![
                    "C", "threshold", "trials", "successes", "p_hat", "ci_low", "ci_high", "predicted_floor", "meets_floor",
                    "clears_floor",
                ]);
                for rep in &reports {
                    let f = &rep.frequency;
                    let mut row: Vec<Cell> = vec![rep.config.c.into(), rep.threshold.into(), f.trials.into()];
                    row.extend(freq_cells(f));
                    row.extend([rep.predicted_floor.into(), rep.meets_floor.into(), rep.clears_floor.into()]);
                    table.push(row);
                }
                let passed = reports.iter().any(|r| r.meets_floor);
                let best = reports.iter().map(|r| r.frequency.p_hat / r.predicted_floor).fold(0.0f64, f64::max);
                let check = Check {
                    passed,
                    detail: format!("largest frequency / floor ratio {best:.4}; needs >= 1 for some C"),
                };
                let truncated = reports.iter().any(|r| r.truncated);
                Ok(Outcome { table, summary: json!({ "K": k, "L": l, "t": t }), truncated, check: Some(check) })
            }
            Params::EventE { ns, t, k, l, c } => {
                let mut table = Table::new(vec![
                    "n", "t", "K", "L", "C", "trials", "successes", "p_hat", "ci_low", "ci_high", "eq_successes", "eq_p_hat",
                    "eq_ci_low", "eq_ci_high",
                ]);
                let mut truncated = false;
                let mut points = Vec::new();
                for &n in ns {
                    let l = match l {
                        Auto::Value(l) => *l,
                        Auto::Auto => 2.0 * k * (n as f64).sqrt(),
                    };
                    let p = EventParams { n, t: *t, k_gate: *k, l, c: *c };
                    let rep = event_e_frequency(&p, trials, derive_substream(seed, n as u64), mc)?;
                    truncated |= rep.truncated;
                    let mut row: Vec<Cell> =
                        vec![n.into(), (*t).into(), (*k).into(), l.into(), (*c).into(), rep.frequency.trials.into()];
                    row.extend(freq_cells(&rep.frequency));
                    row.extend(freq_cells(&rep.equalities));
                    table.push(row);
                    points.push((n as f64, rep.frequency.p_hat, rep.frequency.successes));
                }
                let summary = json!({ "exponent_fit": log_log_slope(&points) });
                Ok(Outcome { table, summary, truncated, check: None })
            }
            Params::Lattice { center, widths, axes } => {
                let n = widths.len();
                let b = Parallelepiped::new(Vector::from_vec(center.clone()), axes.matrix(n, seed)?, widths.clone())?;
                let count = count_lattice_points(&b)?;
                let mut table = Table::new(vec!["dim", "count", "volume", "count_per_volume"]);
                table.push(vec![n.into(), count.into(), b.volume().into(), (count as f64 / b.volume()).into()]);
                Ok(Outcome { table, summary: json!({}), truncated: false, check: None })
            }
            Params::Cover { center, semiaxes, axes, samples } => {
                let n = semiaxes.len();
                let e = Ellipsoid::new(Vector::from_vec(center.clone()), axes.matrix(n, seed)?, semiaxes.clone())?;
                let boxes = cover_ellipsoid(&e)?;
                let audit = cover_audit(&e, &boxes, *samples, seed)?;
                let mut table = Table::new(vec!["dim", "boxes", "samples", "misses"]);
                table.push(vec![n.into(), audit.boxes.into(), audit.samples.into(), audit.misses.into()]);
                let check = Check { passed: audit.misses == 0, detail: format!("{} of {} samples uncovered", audit.misses, audit.samples) };
                Ok(Outcome { table, summary: json!({}), truncated: false, check: Some(check) })
            }
            Params::Net { n, d, mu, gamma, samples, eta, c_lemma } => {
                let net = build_sd_net(*n, *d, *mu, *gamma, *samples, seed)?;
                let bound = net_size_bound(*n, *d, *mu, *eta, *c_lemma)?;
                let mut table = Table::new(vec![
                    "n", "D", "mu", "gamma", "size", "size_bound", "audited", "draws", "max_gap", "gap_bound", "holds",
                ]);
                table.push(vec![
                    (*n).into(),
                    (*d).into(),
                    (*mu).into(),
                    (*gamma).into(),
                    net.size.into(),
                    bound.into(),
                    net.audited.into(),
                    net.draws.into(),
                    net.max_gap.into(),
                    net.gap_bound.into(),
                    net.holds.into(),
                ]);
                let check = Check {
                    passed: net.holds,
                    detail: format!("max gap {:.6} against bound {:.6} over {} members", net.max_gap, net.gap_bound, net.audited),
                };
                Ok(Outcome { table, summary: json!(net), truncated: false, check: Some(check) })
            }
            Params::OpnormQuantile { n, distribution, qs } => {
                let spec = EnsembleSpec::new(*n, distribution.clone(), seed)?;
                let samples = opnorm_samples(&spec, trials, &mc.executor)?;
                let mut table = Table::new(vec!["q", "trials", "value"]);
                for &q in qs {
                    table.push(vec![q.into(), samples.len().into(), empirical_quantile(&samples, q)?.into()]);
                }
                let truncated = (samples.len() as u64) < trials;
                Ok(Outcome { table, summary: json!({ "scale": "operator norm / sqrt(n)" }), truncated, check: None })
            }
            Params::DistanceCheck { n, distribution, shift, delta, rho, epsilon } => {
                let spec = EnsembleSpec::new(*n, distribution.clone(), seed)?;
                let params = CompressibilityParams::new(*delta, *rho)?;
                let r = invertibility_distance_check(&spec, shift, params, *epsilon, trials, mc)?;
                let mut table = Table::new(vec![
                    "epsilon", "trials", "lhs_successes", "lhs_p_hat", "lhs_ci_low", "lhs_ci_high", "rhs", "rhs_high", "holds",
                ]);
                let mut row: Vec<Cell> = vec![(*epsilon).into(), r.lhs.trials.into()];
                row.extend(freq_cells(&r.lhs));
                row.extend([r.rhs.into(), r.rhs_high.into(), r.holds.into()]);
                table.push(row);
                let check = Check {
                    passed: r.holds,
                    detail: format!("lhs lower limit {:.6} against rhs upper limit {:.6}", r.lhs.ci_low, r.rhs_high),
                };
                let truncated = r.lhs.trials < trials;
                Ok(Outcome { table, summary: json!({ "columns": r.columns }), truncated, check: Some(check) })
            }
        }
    }
}
