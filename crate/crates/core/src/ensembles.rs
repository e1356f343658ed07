//! Seeded scalar laws, random matrices and random vectors.
//!
//! Every trial draws from its own stream, derived from `(master_seed,
//! trial_index)` by a bijective 64-bit mixer. Results therefore depend only on
//! the trial index, never on which worker ran it or in what order.
//!
//! Gaussian entries use the Marsaglia polar method. The uniforms come from
//! ChaCha8, which is platform independent, but `ln`/`sqrt` are not guaranteed
//! to round identically on every libm, so Gaussian streams are only promised
//! to be reproducible on one build. Discrete laws only compare uniforms against
//! cumulative probabilities and are bit-reproducible everywhere.

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result, Vector};

const PROB_TOL: f64 = 1e-12;

/// A single atom `(value, probability)` of a discrete law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

/// A validated, mean-zero discrete law.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw {
    atoms: Vec<Atom>,
    cumulative: Vec<f64>,
}

impl DiscreteLaw {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        for a in &atoms {
            if !a.value.is_finite() || !a.prob.is_finite() || a.prob < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "bad atom ({}, {})",
                    a.value, a.prob
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.prob).sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let scale = atoms.iter().fold(1.0_f64, |m, a| m.max(a.value.abs()));
        let mean: f64 = atoms.iter().map(|a| a.prob * a.value).sum();
        if mean.abs() > PROB_TOL * scale {
            return Err(Error::InvalidDistribution(format!("mean is {mean}, not 0")));
        }
        let mut acc = 0.0;
        let cumulative = atoms
            .iter()
            .map(|a| {
                acc += a.prob;
                acc
            })
            .collect();
        Ok(Self { atoms, cumulative })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn variance(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob * a.value * a.value).sum()
    }

    fn sample_with(&self, u: f64) -> f64 {
        for (a, &c) in self.atoms.iter().zip(&self.cumulative) {
            if u < c {
                return a.value;
            }
        }
        // u landed in the rounding gap above the last cumulative sum.
        self.atoms.iter().rev().find(|a| a.prob > 0.0).map_or(0.0, |a| a.value)
    }
}

/// Mean-zero scalar entry law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ScalarDistribution {
    /// Standard normal.
    Gaussian,
    /// ±1 with probability 1/2 each.
    Rademacher,
    /// 0 with probability 1/2, ±1 with probability 1/4 each (variance 1/2).
    LazyRademacher,
    /// Uniform on `[-√3, √3]` (unit variance).
    UniformPm,
    Discrete(DiscreteLaw),
}

impl ScalarDistribution {
    pub fn discrete(atoms: &[(f64, f64)]) -> Result<Self> {
        let atoms = atoms.iter().map(|&(value, prob)| Atom { value, prob }).collect();
        Ok(ScalarDistribution::Discrete(DiscreteLaw::new(atoms)?))
    }

    /// Point mass at zero.
    pub fn zero() -> Self {
        ScalarDistribution::Discrete(
            DiscreteLaw::new(vec![Atom { value: 0.0, prob: 1.0 }]).expect("valid point mass"),
        )
    }

    /// Unit-variance lazy law: 0 w.p. 1/2, ±√2 w.p. 1/4 each.
    pub fn lazy_rademacher_unit() -> Self {
        let s = std::f64::consts::SQRT_2;
        Self::discrete(&[(-s, 0.25), (0.0, 0.5), (s, 0.25)]).expect("valid lazy law")
    }

    pub fn variance(&self) -> f64 {
        match self {
            ScalarDistribution::Gaussian
            | ScalarDistribution::Rademacher
            | ScalarDistribution::UniformPm => 1.0,
            ScalarDistribution::LazyRademacher => 0.5,
            ScalarDistribution::Discrete(law) => law.variance(),
        }
    }

    /// Atom list for the discrete kinds, `None` for continuous ones.
    pub fn atoms(&self) -> Option<Vec<Atom>> {
        match self {
            ScalarDistribution::Gaussian | ScalarDistribution::UniformPm => None,
            ScalarDistribution::Rademacher => Some(vec![
                Atom { value: -1.0, prob: 0.5 },
                Atom { value: 1.0, prob: 0.5 },
            ]),
            ScalarDistribution::LazyRademacher => Some(vec![
                Atom { value: -1.0, prob: 0.25 },
                Atom { value: 0.0, prob: 0.5 },
                Atom { value: 1.0, prob: 0.25 },
            ]),
            ScalarDistribution::Discrete(law) => Some(law.atoms().to_vec()),
        }
    }

    pub fn is_discrete(&self) -> bool {
        self.atoms().is_some()
    }

    /// True when every atom is an integer, so integer arithmetic is exact.
    pub fn is_integer_valued(&self) -> bool {
        self.atoms()
            .is_some_and(|atoms| atoms.iter().all(|a| a.value.fract() == 0.0))
    }

    fn validate(&self) -> Result<()> {
        if let ScalarDistribution::Discrete(law) = self {
            // Fields are private, but a deserialized or cloned law is re-checked anyway.
            DiscreteLaw::new(law.atoms.clone())?;
        }
        Ok(())
    }
}

impl fmt::Display for ScalarDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarDistribution::Gaussian => f.write_str("gaussian"),
            ScalarDistribution::Rademacher => f.write_str("rademacher"),
            ScalarDistribution::LazyRademacher => f.write_str("lazy_rademacher"),
            ScalarDistribution::UniformPm => f.write_str("uniform_pm"),
            ScalarDistribution::Discrete(law) => {
                f.write_str("discrete:[")?;
                for (i, a) in law.atoms().iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "({:?},{:?})", a.value, a.prob)?;
                }
                f.write_str("]")
            }
        }
    }
}

impl FromStr for ScalarDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "gaussian" => return Ok(ScalarDistribution::Gaussian),
            "rademacher" => return Ok(ScalarDistribution::Rademacher),
            "lazy_rademacher" => return Ok(ScalarDistribution::LazyRademacher),
            "uniform_pm" => return Ok(ScalarDistribution::UniformPm),
            _ => {}
        }
        let body = s
            .strip_prefix("discrete:")
            .ok_or_else(|| Error::InvalidDistribution(format!("unknown distribution `{s}`")))?;
        let inner = body
            .trim()
            .strip_prefix('[')
            .and_then(|b| b.strip_suffix(']'))
            .ok_or_else(|| Error::InvalidDistribution("expected `[(v,p),...]`".into()))?;
        let mut atoms = Vec::new();
        let mut rest = inner.trim();
        while !rest.is_empty() {
            let open = rest
                .strip_prefix('(')
                .ok_or_else(|| Error::InvalidDistribution(format!("expected `(` at `{rest}`")))?;
            let close = open
                .find(')')
                .ok_or_else(|| Error::InvalidDistribution("unclosed `(`".into()))?;
            let (pair, tail) = open.split_at(close);
            let (v, p) = pair
                .split_once(',')
                .ok_or_else(|| Error::InvalidDistribution(format!("bad atom `({pair})`")))?;
            let parse = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidDistribution(format!("bad number `{}`", x.trim())))
            };
            atoms.push((parse(v)?, parse(p)?));
            rest = tail[1..].trim_start();
            rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
        }
        ScalarDistribution::discrete(&atoms)
    }
}

impl TryFrom<String> for ScalarDistribution {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ScalarDistribution> for String {
    fn from(d: ScalarDistribution) -> String {
        d.to_string()
    }
}

/// Dimension, entry law and master seed of a square random matrix ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n: usize,
    pub distribution: ScalarDistribution,
    pub master_seed: u64,
}

impl EnsembleSpec {
    pub fn new(n: usize, distribution: ScalarDistribution, master_seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "must be at least 1"));
        }
        Ok(Self { n, distribution, master_seed })
    }

    /// Same law and seed, different dimension.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(n, self.distribution.clone(), self.master_seed)
    }

    /// Entry sampler positioned at the start of the stream for `trial_index`.
    pub fn sampler(&self, trial_index: u64) -> Result<EntrySampler<'_>> {
        self.distribution.validate()?;
        Ok(EntrySampler::new(
            &self.distribution,
            derive_substream(self.master_seed, trial_index),
        ))
    }
}

/// Deterministic shift `A` added to the random matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum ShiftMatrix {
    Diagonal(Vec<f64>),
    Dense(Matrix),
}

impl ShiftMatrix {
    pub fn zero(n: usize) -> Self {
        ShiftMatrix::Diagonal(vec![0.0; n])
    }

    pub fn identity(n: usize) -> Self {
        ShiftMatrix::Diagonal(vec![1.0; n])
    }

    pub fn dense(m: Matrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: "square shift".into(),
                got: format!("{}x{}", m.nrows(), m.ncols()),
            });
        }
        Ok(ShiftMatrix::Dense(m))
    }

    pub fn n(&self) -> usize {
        match self {
            ShiftMatrix::Diagonal(d) => d.len(),
            ShiftMatrix::Dense(m) => m.nrows(),
        }
    }

    pub fn to_dense(&self) -> Matrix {
        match self {
            ShiftMatrix::Diagonal(d) => Matrix::from_diagonal(&Vector::from_column_slice(d)),
            ShiftMatrix::Dense(m) => m.clone(),
        }
    }

    /// `m += A` in place.
    pub fn add_to(&self, m: &mut Matrix) {
        match self {
            ShiftMatrix::Diagonal(d) => {
                for (i, &v) in d.iter().enumerate() {
                    m[(i, i)] += v;
                }
            }
            ShiftMatrix::Dense(a) => *m += a,
        }
    }

    /// `m -= A` in place.
    pub fn subtract_from(&self, m: &mut Matrix) {
        match self {
            ShiftMatrix::Diagonal(d) => {
                for (i, &v) in d.iter().enumerate() {
                    m[(i, i)] -= v;
                }
            }
            ShiftMatrix::Dense(a) => *m -= a,
        }
    }

    /// Short human-readable description for report metadata.
    pub fn describe(&self) -> String {
        match self {
            ShiftMatrix::Diagonal(d) => {
                let mut runs: Vec<(f64, usize)> = Vec::new();
                for &v in d {
                    match runs.last_mut() {
                        Some((last, count)) if *last == v => *count += 1,
                        _ => runs.push((v, 1)),
                    }
                }
                let parts: Vec<String> = runs
                    .iter()
                    .map(|(v, c)| if *c == 1 { format!("{v:?}") } else { format!("{v:?}x{c}") })
                    .collect();
                format!("diag({})", parts.join(","))
            }
            ShiftMatrix::Dense(m) => format!("dense {}x{}", m.nrows(), m.ncols()),
        }
    }
}

/// Seed of the substream used by trial `trial_index`.
///
/// For fixed `master_seed` the map is injective over all of `u64`: an odd
/// multiplier and the splitmix64 finalizer are both bijections.
pub fn derive_substream(master_seed: u64, trial_index: u64) -> u64 {
    let base = mix64(master_seed ^ 0x6A09_E667_F3BC_C909);
    mix64(base.wrapping_add(trial_index.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generic random generator for one trial, for callers that need raw uniforms.
pub fn trial_rng(master_seed: u64, trial_index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_substream(master_seed, trial_index))
}

/// Uniform in `[0, 1)` with 53 random bits.
pub fn uniform01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal pair by the Marsaglia polar method.
pub fn gaussian_pair<R: RngCore + ?Sized>(rng: &mut R) -> (f64, f64) {
    loop {
        let u = 2.0 * uniform01(rng) - 1.0;
        let v = 2.0 * uniform01(rng) - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            let f = (-2.0 * s.ln() / s).sqrt();
            return (u * f, v * f);
        }
    }
}

/// Uniformly distributed point on the unit sphere in `R^dim`.
pub fn random_unit_vector<R: RngCore + ?Sized>(rng: &mut R, dim: usize) -> Vector {
    loop {
        let mut v = Vector::zeros(dim);
        let mut i = 0;
        while i < dim {
            let (a, b) = gaussian_pair(rng);
            v[i] = a;
            if i + 1 < dim {
                v[i + 1] = b;
            }
            i += 2;
        }
        let norm = v.norm();
        if norm > 0.0 {
            return v / norm;
        }
    }
}

/// Draws i.i.d. entries of one law from one substream.
pub struct EntrySampler<'a> {
    dist: &'a ScalarDistribution,
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl<'a> EntrySampler<'a> {
    pub fn new(dist: &'a ScalarDistribution, stream_seed: u64) -> Self {
        Self { dist, rng: ChaCha8Rng::seed_from_u64(stream_seed), spare: None }
    }

    pub fn sample(&mut self) -> f64 {
        match self.dist {
            ScalarDistribution::Gaussian => {
                if let Some(z) = self.spare.take() {
                    return z;
                }
                let (a, b) = gaussian_pair(&mut self.rng);
                self.spare = Some(b);
                a
            }
            ScalarDistribution::Rademacher => {
                if self.rng.next_u64() >> 63 == 0 {
                    -1.0
                } else {
                    1.0
                }
            }
            ScalarDistribution::LazyRademacher => match self.rng.next_u64() >> 62 {
                0 => -1.0,
                1 => 1.0,
                _ => 0.0,
            },
            ScalarDistribution::UniformPm => {
                let s3 = 3f64.sqrt();
                (2.0 * uniform01(&mut self.rng) - 1.0) * s3
            }
            ScalarDistribution::Discrete(law) => law.sample_with(uniform01(&mut self.rng)),
        }
    }

    /// `rows × cols` matrix filled in row-major order.
    pub fn matrix(&mut self, rows: usize, cols: usize) -> Matrix {
        let data: Vec<f64> = (0..rows * cols).map(|_| self.sample()).collect();
        Matrix::from_row_slice(rows, cols, &data)
    }

    pub fn vector(&mut self, len: usize) -> Vector {
        Vector::from_iterator(len, (0..len).map(|_| self.sample()))
    }

    /// Access to the underlying generator for auxiliary draws.
    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// The `n × n` noise matrix of trial `trial_index`.
pub fn sample_matrix(spec: &EnsembleSpec, trial_index: u64) -> Result<Matrix> {
    Ok(spec.sampler(trial_index)?.matrix(spec.n, spec.n))
}

/// A vector of i.i.d. entries from the stream of trial `trial_index`.
///
/// Uses the same stream as [`sample_matrix`], so it equals the first `length`
/// row-major entries of that trial's matrix.
pub fn sample_vector(spec: &EnsembleSpec, length: usize, trial_index: u64) -> Result<Vector> {
    if length == 0 {
        return Err(Error::param("length", "must be at least 1"));
    }
    Ok(spec.sampler(trial_index)?.vector(length))
}
