//! Brute-force lattice counting, ellipsoid covers, the `S_2 ⊆ S_1 ⊆ √2 S_2`
//! sandwich, and the integer-point net of a level set.
//!
//! Every membership test is closed (`<=`).

use std::collections::{BTreeSet, HashMap};

use rand::RngCore;
use serde::Serialize;

use crate::arithmetic::{level_set_membership, LcdParams};
use crate::ensembles::{random_unit_vector, trial_rng, uniform01};
use crate::{Error, Matrix, Result, Vector};

pub const MAX_COUNT_DIM: usize = 8;
pub const MAX_COUNT_RADIUS: f64 = 1e3;
pub const MAX_SCAN_POINTS: f64 = 1e8;
pub const MAX_COVER_DIM: usize = 12;
pub const MAX_COVER_CELLS: f64 = 1e7;
pub const MAX_NET_DIM: usize = 5;
pub const MAX_NET_D: f64 = 12.0;

const ORTHO_TOL: f64 = 1e-10;
const MEMBERSHIP_TOL: f64 = 1e-9;

fn check_axes(center: &Vector, axes: &Matrix, extents: &[f64], what: &'static str) -> Result<()> {
    let n = center.len();
    if n == 0 || axes.nrows() != n || axes.ncols() != n || extents.len() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("center of length n, n x n axes and n {what}"),
            got: format!("{n}, {}x{}, {}", axes.nrows(), axes.ncols(), extents.len()),
        });
    }
    if center.iter().chain(axes.iter()).chain(extents).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    if let Some(bad) = extents.iter().find(|&&e| !(e > 0.0)) {
        return Err(Error::param(what, format!("positive {what} required, got {bad}")));
    }
    let defect = (axes.transpose() * axes - Matrix::identity(n, n)).amax();
    if defect > ORTHO_TOL {
        return Err(Error::param("axes", format!("not orthonormal (defect {defect:.3e})")));
    }
    Ok(())
}

/// Closed box `{x : |⟨x − c, a_i⟩| <= w_i / 2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Parallelepiped {
    pub center: Vector,
    pub axes: Matrix,
    pub widths: Vec<f64>,
}

impl Parallelepiped {
    pub fn new(center: Vector, axes: Matrix, widths: Vec<f64>) -> Result<Self> {
        check_axes(&center, &axes, &widths, "widths")?;
        Ok(Self { center, axes, widths })
    }

    pub fn axis_aligned(center: Vector, widths: Vec<f64>) -> Result<Self> {
        let n = center.len();
        Self::new(center, Matrix::identity(n, n), widths)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &Vector) -> bool {
        let d = x - &self.center;
        self.widths
            .iter()
            .enumerate()
            .all(|(i, w)| self.axes.column(i).dot(&d).abs() <= w / 2.0 + MEMBERSHIP_TOL)
    }

    /// Radius of the smallest centered ball containing the box.
    pub fn bounding_radius(&self) -> f64 {
        self.widths.iter().map(|w| w * w / 4.0).sum::<f64>().sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.widths.iter().product()
    }
}

/// `{x : Σ (⟨x − c, a_i⟩ / ℓ_i)² <= 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    pub center: Vector,
    pub axes: Matrix,
    pub semiaxes: Vec<f64>,
}

impl Ellipsoid {
    pub fn new(center: Vector, axes: Matrix, semiaxes: Vec<f64>) -> Result<Self> {
        check_axes(&center, &axes, &semiaxes, "semiaxes")?;
        Ok(Self { center, axes, semiaxes })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &Vector) -> bool {
        let d = x - &self.center;
        let q: f64 = self
            .semiaxes
            .iter()
            .enumerate()
            .map(|(i, l)| (self.axes.column(i).dot(&d) / l).powi(2))
            .sum();
        q <= 1.0 + MEMBERSHIP_TOL
    }

    /// Uniform sample from the solid ellipsoid.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> Vector {
        let n = self.dim();
        let dir = random_unit_vector(rng, n);
        let radius = uniform01(rng).powf(1.0 / n as f64);
        let mut x = self.center.clone();
        for i in 0..n {
            x += self.axes.column(i) * (self.semiaxes[i] * radius * dir[i]);
        }
        x
    }
}

/// Exact number of integer points in the closed box.
pub fn count_lattice_points(b: &Parallelepiped) -> Result<u64> {
    let n = b.dim();
    if n > MAX_COUNT_DIM {
        return Err(Error::BudgetExceeded { what: "dimension", needed: n as f64, limit: MAX_COUNT_DIM as f64 });
    }
    let radius = b.bounding_radius() + b.center.norm();
    if radius > MAX_COUNT_RADIUS {
        return Err(Error::BudgetExceeded { what: "bounding radius", needed: radius, limit: MAX_COUNT_RADIUS });
    }
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    let mut points = 1.0;
    for j in 0..n {
        let half: f64 = (0..n).map(|i| b.axes[(j, i)].abs() * b.widths[i] / 2.0).sum();
        let a = (b.center[j] - half - MEMBERSHIP_TOL).ceil() as i64;
        let z = (b.center[j] + half + MEMBERSHIP_TOL).floor() as i64;
        if z < a {
            return Ok(0);
        }
        points *= (z - a + 1) as f64;
        lo.push(a);
        hi.push(z);
    }
    if points > MAX_SCAN_POINTS {
        return Err(Error::BudgetExceeded { what: "scan points", needed: points, limit: MAX_SCAN_POINTS });
    }
    let mut cur = lo.clone();
    let mut x = Vector::zeros(n);
    let mut count = 0u64;
    loop {
        for j in 0..n {
            x[j] = cur[j] as f64;
        }
        count += u64::from(b.contains(&x));
        let mut j = 0;
        loop {
            if j == n {
                return Ok(count);
            }
            if cur[j] < hi[j] {
                cur[j] += 1;
                break;
            }
            cur[j] = lo[j];
            j += 1;
        }
    }
}

/// Number of cells per axis in [`cover_ellipsoid`]: `⌈2√n⌉`.
pub fn cells_per_axis(n: usize) -> usize {
    (2.0 * (n as f64).sqrt() - 1e-12).ceil() as usize
}

/// Grid of boxes of widths `ℓ_i/√n` along the semiaxes, `⌈2√n⌉` per axis,
/// centered on the ellipsoid and covering its bounding box.
pub fn cover_ellipsoid(e: &Ellipsoid) -> Result<Vec<Parallelepiped>> {
    let n = e.dim();
    if n > MAX_COVER_DIM {
        return Err(Error::BudgetExceeded { what: "dimension", needed: n as f64, limit: MAX_COVER_DIM as f64 });
    }
    let m = cells_per_axis(n);
    let total = (m as f64).powi(n as i32);
    if total > MAX_COVER_CELLS {
        return Err(Error::BudgetExceeded { what: "cover cells", needed: total, limit: MAX_COVER_CELLS });
    }
    let sqrt_n = (n as f64).sqrt();
    let widths: Vec<f64> = e.semiaxes.iter().map(|l| l / sqrt_n).collect();
    let offset = (m as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(total as usize);
    let mut idx = vec![0usize; n];
    loop {
        let mut c = e.center.clone();
        for i in 0..n {
            c += e.axes.column(i) * ((idx[i] as f64 - offset) * widths[i]);
        }
        out.push(Parallelepiped { center: c, axes: e.axes.clone(), widths: widths.clone() });
        let mut j = 0;
        loop {
            if j == n {
                return Ok(out);
            }
            if idx[j] + 1 < m {
                idx[j] += 1;
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverAudit {
    pub samples: u64,
    pub misses: u64,
    pub boxes: usize,
}

/// Samples points of `e` and counts those outside every box.
///
/// Boxes are bucketed by the position of their centers along the ellipsoid
/// axes in units of `ℓ_i/√n`; each sample is tested with
/// [`Parallelepiped::contains`] against the `2^n` neighbouring buckets.
/// Boxes not aligned with that grid are never found, so they show up as
/// misses rather than being credited.
pub fn cover_audit(e: &Ellipsoid, boxes: &[Parallelepiped], samples: u64, seed: u64) -> Result<CoverAudit> {
    let n = e.dim();
    let h: Vec<f64> = e.semiaxes.iter().map(|l| l / (n as f64).sqrt()).collect();
    let key = |x: &Vector, shift: f64| -> Vec<i64> {
        let d = x - &e.center;
        (0..n).map(|i| (e.axes.column(i).dot(&d) / h[i] + shift).floor() as i64).collect()
    };
    let mut buckets: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
    for (k, b) in boxes.iter().enumerate() {
        if b.dim() != n {
            return Err(Error::DimensionMismatch { expected: format!("boxes in R^{n}"), got: format!("R^{}", b.dim()) });
        }
        buckets.entry(key(&b.center, 0.5)).or_default().push(k);
    }
    let mut rng = trial_rng(seed, 0);
    let mut misses = 0;
    for _ in 0..samples {
        let x = e.sample(&mut rng);
        let base = key(&x, 0.0);
        let mut hit = false;
        'search: for mask in 0u32..(1 << n) {
            let k: Vec<i64> = (0..n).map(|i| base[i] + i64::from((mask >> i) & 1)).collect();
            if let Some(list) = buckets.get(&k) {
                for &b in list {
                    if boxes[b].contains(&x) {
                        hit = true;
                        break 'search;
                    }
                }
            }
        }
        misses += u64::from(!hit);
    }
    Ok(CoverAudit { samples, misses, boxes: boxes.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub holds: bool,
    pub samples: u64,
    pub counterexample: Option<Vec<f64>>,
}

/// Tests `S_2 ⊆ S_1 ⊆ √2 S_2` for `S_1 = {‖x‖ <= 1, ‖Jx‖ <= 1}` and
/// `S_2 = {‖x‖² + ‖Jx‖² <= 1}` on random points: uniform points of the
/// `√2`-ball, and points on the boundaries of `S_1` and `S_2`.
pub fn sandwich_check(j: &Matrix, samples: u64, seed: u64) -> Result<SandwichReport> {
    let n = j.ncols();
    if n == 0 {
        return Err(Error::param("J", "must have at least one column"));
    }
    if j.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let tol = 1e-12;
    let in_s1 = |x: &Vector| x.norm() <= 1.0 + tol && (j * x).norm() <= 1.0 + tol;
    let q2 = |x: &Vector| x.norm_squared() + (j * x).norm_squared();
    let mut rng = trial_rng(seed, 0);
    for i in 0..samples {
        let d = random_unit_vector(&mut rng, n);
        let jd = (j * &d).norm();
        let x = match i % 3 {
            0 => &d * (2f64.sqrt() * uniform01(&mut rng).powf(1.0 / n as f64)),
            1 => &d * (1.0f64).min(1.0 / jd),
            _ => &d / (1.0 + jd * jd).sqrt(),
        };
        let q = q2(&x);
        let violated = (q <= 1.0 && !in_s1(&x)) || (in_s1(&x) && q > 2.0 * (1.0 + tol));
        if violated {
            return Ok(SandwichReport { holds: false, samples: i + 1, counterexample: Some(x.iter().copied().collect()) });
        }
    }
    Ok(SandwichReport { holds: true, samples, counterexample: None })
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Primitive directions `p / gcd(p)` of the nonzero integer points with
/// `r_in² < ‖p‖² <= r_out²`.
pub fn primitive_directions(n: usize, r_out: f64, r_in: f64) -> Result<BTreeSet<Vec<i64>>> {
    if n == 0 {
        return Err(Error::param("n", "must be >= 1"));
    }
    let r = r_out.floor() as i64;
    let points = ((2 * r + 1) as f64).powi(n as i32);
    if points > MAX_SCAN_POINTS {
        return Err(Error::BudgetExceeded { what: "net scan points", needed: points, limit: MAX_SCAN_POINTS });
    }
    let (out2, in2) = (r_out * r_out, if r_in > 0.0 { r_in * r_in } else { -1.0 });
    let mut set = BTreeSet::new();
    let mut cur = vec![-r; n];
    loop {
        let sq = cur.iter().map(|&c| (c * c) as f64).sum::<f64>();
        if sq > 0.0 && sq <= out2 && sq > in2 {
            let g = cur.iter().fold(0, |g, &c| gcd(g, c));
            set.insert(cur.iter().map(|&c| c / g).collect());
        }
        let mut j = 0;
        loop {
            if j == n {
                return Ok(set);
            }
            if cur[j] < r {
                cur[j] += 1;
                break;
            }
            cur[j] = -r;
            j += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdNet {
    pub n: usize,
    pub d: f64,
    pub mu: f64,
    pub gamma: f64,
    #[serde(skip)]
    pub net: Vec<Vector>,
    pub size: usize,
    /// Level-set members found by rejection sampling.
    pub audited: u64,
    pub draws: u64,
    /// Largest distance from an audited member to the net.
    pub max_gap: f64,
    /// `2μ√n / D`.
    pub gap_bound: f64,
    pub holds: bool,
}

/// Direction within angle about `spread` of a random seed direction.
fn perturbed_seed<R: RngCore + ?Sized>(rng: &mut R, seeds: &[Vector], spread: f64) -> Vector {
    let idx = ((uniform01(rng) * seeds.len() as f64) as usize).min(seeds.len() - 1);
    let x = &seeds[idx] + random_unit_vector(rng, seeds[idx].len()) * (spread * uniform01(rng));
    let norm = x.norm();
    x / norm
}

/// Draw cap per requested audit member in [`build_sd_net`].
pub const AUDIT_DRAWS_PER_MEMBER: u64 = 200;

/// `{p/‖p‖ : p ∈ Z^n \ {0}, ‖p‖ <= 3D}` with an audit over up to
/// `sample_budget` sampled members of `S_D`.
///
/// Uniform members of `S_D` are rare in low dimension, so three in four audit
/// candidates are perturbations of seed directions `p/‖p‖` with `D <= ‖p‖ <= 2D`
/// that are themselves members. The rest are uniform. Only candidates passing
/// the level-set membership test are audited.
pub fn build_sd_net(n: usize, d: f64, mu: f64, gamma: f64, sample_budget: u64, seed: u64) -> Result<SdNet> {
    if n == 0 || n > MAX_NET_DIM {
        return Err(Error::BudgetExceeded { what: "net dimension", needed: n as f64, limit: MAX_NET_DIM as f64 });
    }
    if !(d > 0.0 && d <= MAX_NET_D) {
        return Err(Error::BudgetExceeded { what: "net D", needed: d, limit: MAX_NET_D });
    }
    if !(mu > 0.0 && gamma > 0.0) {
        return Err(Error::param("mu", "mu and gamma must be > 0"));
    }
    let prims = primitive_directions(n, 3.0 * d, 0.0)?;
    let net: Vec<Vector> = prims
        .iter()
        .map(|p| {
            let v = Vector::from_iterator(n, p.iter().map(|&c| c as f64));
            let norm = v.norm();
            v / norm
        })
        .collect();
    let alpha = mu * (n as f64).sqrt();
    let base = LcdParams { theta_max: 2.0 * d, ..LcdParams::with_defaults(n, alpha, gamma) };
    let gap_bound = 2.0 * mu * (n as f64).sqrt() / d;
    let mut seeds = Vec::new();
    if sample_budget > 0 {
        for (p, x) in prims.iter().zip(&net) {
            let norm = p.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
            if (d..=2.0 * d).contains(&norm) && level_set_membership(x, d, mu, gamma, &base)? {
                seeds.push(x.clone());
            }
        }
    }
    let mut rng = trial_rng(seed, 0);
    let (mut audited, mut draws, mut max_gap) = (0u64, 0u64, 0.0f64);
    let cap = sample_budget.saturating_mul(AUDIT_DRAWS_PER_MEMBER);
    while audited < sample_budget && draws < cap {
        draws += 1;
        let x = if seeds.is_empty() || draws % 4 == 0 {
            random_unit_vector(&mut rng, n)
        } else {
            perturbed_seed(&mut rng, &seeds, gap_bound / 4.0)
        };
        if !level_set_membership(&x, d, mu, gamma, &base)? {
            continue;
        }
        audited += 1;
        let gap = net.iter().map(|p| (p - &x).norm()).fold(f64::INFINITY, f64::min);
        max_gap = max_gap.max(gap);
    }
    Ok(SdNet {
        n,
        d,
        mu,
        gamma,
        size: net.len(),
        net,
        audited,
        draws,
        max_gap,
        gap_bound,
        holds: max_gap <= gap_bound,
    })
}

/// `μ^{−(1−η/2)n} D² (C D/√n)^n`, evaluated in log space.
pub fn net_size_bound(n: usize, d: f64, mu: f64, eta: f64, c_lemma: f64) -> Result<f64> {
    if !(d > 0.0 && mu > 0.0 && c_lemma > 0.0) {
        return Err(Error::param("D", "D, mu and C must be > 0"));
    }
    let nf = n as f64;
    let log = -(1.0 - eta / 2.0) * nf * mu.ln() + 2.0 * d.ln() + nf * (c_lemma * d / nf.sqrt()).ln();
    Ok(log.exp())
}
