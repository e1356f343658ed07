use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use svsmooth_core::ensembles::{sample_matrix, EnsembleSpec, ScalarDistribution, ShiftMatrix};
use svsmooth_core::runner::Executor;
use svsmooth_core::stats::{clopper_pearson, ks_critical, ks_statistic};
use svsmooth_core::tail::{estimate_tail_probability, sweep_tail_curve, McSettings};

fn builtin_laws() -> Vec<ScalarDistribution> {
    vec![
        ScalarDistribution::Gaussian,
        ScalarDistribution::Rademacher,
        ScalarDistribution::LazyRademacher,
        ScalarDistribution::UniformPm,
        ScalarDistribution::lazy_rademacher_unit(),
        ScalarDistribution::discrete(&[(-2.0, 0.2), (0.5, 0.8)]).unwrap(),
    ]
}

#[test]
fn variance_of_a_million_entries_within_one_percent() {
    for law in builtin_laws() {
        let spec = EnsembleSpec::new(1000, law.clone(), 99).unwrap();
        let (mut s1, mut s2) = (0.0, 0.0);
        for t in 0..1000 {
            let mut s = spec.sampler(t).unwrap();
            for _ in 0..1000 {
                let x = s.sample();
                s1 += x;
                s2 += x * x;
            }
        }
        let n = 1e6;
        let mean = s1 / n;
        let var = s2 / n - mean * mean;
        let want = law.variance();
        assert!((var - want).abs() <= 0.01 * want, "{law}: {var} vs {want}");
        assert!(mean.abs() < 5.0 * (want / n).sqrt(), "{law}: mean {mean}");
    }
}

#[test]
fn entries_of_distinct_trials_are_uncorrelated() {
    let samples = 20_000u64;
    for law in builtin_laws() {
        let spec = EnsembleSpec::new(3, law.clone(), 5).unwrap();
        // Same entry in consecutive trials, and two entries of one trial.
        let pairs: Vec<(f64, f64, f64)> = (0..samples)
            .map(|t| {
                let a = sample_matrix(&spec, 2 * t).unwrap();
                let b = sample_matrix(&spec, 2 * t + 1).unwrap();
                (a[(1, 1)], b[(1, 1)], a[(2, 0)])
            })
            .collect();
        let corr = |f: fn(&(f64, f64, f64)) -> (f64, f64)| {
            let xy: Vec<(f64, f64)> = pairs.iter().map(f).collect();
            let n = xy.len() as f64;
            let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
            let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
            let c: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let vx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let vy: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
            c / (vx * vy).sqrt()
        };
        let bound = 4.0 / (samples as f64).sqrt();
        let across = corr(|p| (p.0, p.1));
        let within = corr(|p| (p.0, p.2));
        assert!(across.abs() < bound, "{law}: across trials {across}");
        assert!(within.abs() < bound, "{law}: within trial {within}");
    }
}

#[test]
fn normalized_sums_look_gaussian() {
    // Sums of 400 lazy Rademacher entries against exact Gaussian samples.
    let spec = EnsembleSpec::new(400, ScalarDistribution::LazyRademacher, 8).unwrap();
    let g = EnsembleSpec::new(1, ScalarDistribution::Gaussian, 9).unwrap();
    let m = 4000;
    let sums: Vec<f64> = (0..m)
        .map(|t| spec.sampler(t).unwrap().vector(400).sum() / (400.0f64 * 0.5).sqrt())
        .collect();
    let gauss: Vec<f64> = (0..m).map(|t| g.sampler(t).unwrap().sample()).collect();
    let d = ks_statistic(&sums, &gauss).unwrap();
    // Lattice effects of a discrete sum keep D somewhat above zero.
    assert!(d < ks_critical(m as usize, m as usize, 0.01) + 0.02, "{d}");
}

#[test]
fn clopper_pearson_covers_at_nominal_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (p, trials) in [(0.5, 50u64), (0.1, 200), (0.02, 500), (0.003, 2000)] {
        for confidence in [0.9, 0.99] {
            let reps = 1000;
            let covered = (0..reps)
                .filter(|_| {
                    let s = (0..trials).filter(|_| rng.random::<f64>() < p).count() as u64;
                    let (lo, hi) = clopper_pearson(s, trials, confidence).unwrap();
                    lo <= p && p <= hi
                })
                .count();
            // The exact interval is conservative; allow binomial noise on the count.
            let need = confidence - 3.0 * (confidence * (1.0 - confidence) / reps as f64).sqrt();
            assert!(covered as f64 / reps as f64 >= need, "p={p}, conf={confidence}: {covered}/{reps}");
        }
    }
}

#[test]
fn gaussian_two_by_two_tail_is_self_consistent() {
    let mc = McSettings::new(0.99, Executor::available()).unwrap();
    let run = |seed| {
        let spec = EnsembleSpec::new(2, ScalarDistribution::Gaussian, seed).unwrap();
        estimate_tail_probability(&ShiftMatrix::zero(2), &spec, 0.05, 1_000_000, &mc).unwrap()
    };
    let (a, b) = (run(1), run(2));
    assert!(a.ci_low <= b.ci_high && b.ci_low <= a.ci_high, "{a:?} vs {b:?}");
    let bound = 2.35 * 0.05 * 2f64.sqrt();
    assert!(a.ci_low <= bound && b.ci_low <= bound);
}

#[test]
fn tail_curve_independent_of_worker_count() {
    let eps = [0.0, 0.01, 0.05, 0.1];
    for law in [ScalarDistribution::Gaussian, ScalarDistribution::LazyRademacher] {
        let spec = EnsembleSpec::new(12, law, 31).unwrap();
        let shift = ShiftMatrix::Diagonal(vec![3.0; 12]);
        let curves: Vec<_> = [1usize, 2, 3, 8]
            .iter()
            .map(|&w| {
                let mc = McSettings::new(0.99, Executor::new(w).unwrap()).unwrap();
                sweep_tail_curve(&shift, &spec, &eps, 3000, &mc).unwrap()
            })
            .collect();
        for c in &curves[1..] {
            assert_eq!(c, &curves[0]);
        }
        // A fresh seed changes the sample set.
        let other = EnsembleSpec { master_seed: 32, ..spec.clone() };
        let mc = McSettings::serial();
        let c = sweep_tail_curve(&shift, &other, &eps, 3000, &mc).unwrap();
        assert_ne!(c.rows, curves[0].rows);
    }
}

#[test]
fn expired_budget_marks_curve_truncated() {
    let spec = EnsembleSpec::new(4, ScalarDistribution::Gaussian, 1).unwrap();
    let ex = Executor::serial().with_deadline(Some(std::time::Instant::now()));
    let mc = McSettings::new(0.99, ex).unwrap();
    let c = sweep_tail_curve(&ShiftMatrix::zero(4), &spec, &[0.1], 5000, &mc).unwrap();
    assert!(c.meta.truncated);
    assert!(c.rows[0].trials > 0 && c.rows[0].trials < 5000);
    let later = std::time::Instant::now() + std::time::Duration::from_secs(3600);
    let mc = McSettings::new(0.99, Executor::serial().with_deadline(Some(later))).unwrap();
    let c = sweep_tail_curve(&ShiftMatrix::zero(4), &spec, &[0.1], 100, &mc).unwrap();
    assert!(!c.meta.truncated);
}

proptest! {
    #[test]
    fn cp_interval_brackets_estimate(trials in 1u64..5000, frac in 0.0f64..=1.0, conf in 0.5f64..0.999) {
        let s = ((trials as f64) * frac).floor() as u64;
        let (lo, hi) = clopper_pearson(s, trials, conf).unwrap();
        let p = s as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
        let (lo2, hi2) = clopper_pearson(s, trials, (conf + 1.0) / 2.0).unwrap();
        prop_assert!(lo2 <= lo + 1e-12 && hi <= hi2 + 1e-12);
    }

    #[test]
    fn tail_rows_respect_invariants(seed in 0u64..1000, n in 2usize..6, eps in prop::collection::vec(0.0f64..1.0, 1..5)) {
        let spec = EnsembleSpec::new(n, ScalarDistribution::Rademacher, seed).unwrap();
        let c = sweep_tail_curve(&ShiftMatrix::zero(n), &spec, &eps, 64, &McSettings::serial()).unwrap();
        prop_assert_eq!(c.rows.len(), eps.len());
        for w in c.rows.windows(2) {
            prop_assert!(w[0].epsilon <= w[1].epsilon && w[0].successes <= w[1].successes);
        }
        for r in &c.rows {
            prop_assert!(r.successes <= r.trials);
            prop_assert!(0.0 <= r.ci_low && r.ci_low <= r.p_hat && r.p_hat <= r.ci_high && r.ci_high <= 1.0);
        }
    }

    #[test]
    fn sampling_is_a_function_of_seed_and_index(seed: u64, idx: u64) {
        let spec = EnsembleSpec::new(3, ScalarDistribution::UniformPm, seed).unwrap();
        prop_assert_eq!(sample_matrix(&spec, idx).unwrap(), sample_matrix(&spec, idx).unwrap());
        let x = sample_matrix(&spec, idx).unwrap();
        prop_assert!(x.iter().all(|v| v.abs() <= 3f64.sqrt()));
    }
}
