//! Fast routines checked against slow, obviously-correct reimplementations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use svsmooth_core::arithmetic::{lcd, levy_concentration_empirical, sparsity_distance, LcdParams};
use svsmooth_core::ensembles::{random_unit_vector, sample_matrix, EnsembleSpec, ScalarDistribution};
use svsmooth_core::spectra::{interlacing_check, operator_norm, singular_values, smallest_singular_value};
use svsmooth_core::{Matrix, Vector};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn unit(v: Vec<f64>) -> Vector {
    let v = Vector::from_vec(v);
    let n = v.norm();
    v / n
}

/// Minimum over every support of size at most `s` of the off-support norm.
fn sparsity_oracle(x: &Vector, s: usize) -> f64 {
    let n = x.len();
    (0u32..(1 << n))
        .filter(|m| m.count_ones() as usize <= s)
        .map(|m| (0..n).filter(|i| m & (1 << i) == 0).map(|i| x[i] * x[i]).sum::<f64>().sqrt())
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn sparsity_matches_exhaustive_supports() {
    let mut r = rng(1);
    for trial in 0..400 {
        let x = unit((0..8).map(|_| r.random_range(-1.0..1.0) * if r.random_bool(0.3) { 0.05 } else { 1.0 }).collect());
        let delta = [0.1, 0.125, 0.25, 0.3, 0.5, 0.7, 0.9][trial % 7];
        let s = ((delta * 8.0) + 1e-9_f64).floor() as usize;
        let got = sparsity_distance(&x, delta).unwrap();
        let want = sparsity_oracle(&x, s);
        assert!((got - want).abs() < 1e-12, "delta={delta}: {got} vs {want}");
    }
}

fn levy_oracle(x: &[f64], r: f64) -> f64 {
    let best = x
        .iter()
        .map(|&a| x.iter().filter(|&&b| a <= b && b - a <= 2.0 * r).count())
        .max()
        .unwrap();
    best as f64 / x.len() as f64
}

#[test]
fn levy_empirical_matches_quadratic_oracle() {
    let mut r = rng(2);
    for trial in 0..1000 {
        let len = r.random_range(1..=120);
        let grid = trial % 2 == 0;
        let xs: Vec<f64> = (0..len)
            .map(|_| if grid { f64::from(r.random_range(-12..=12)) * 0.25 } else { r.random_range(-3.0..3.0) })
            .collect();
        let radius = if grid { f64::from(r.random_range(0..=6)) * 0.125 } else { r.random_range(0.0..1.0) };
        assert_eq!(levy_concentration_empirical(&xs, radius).unwrap(), levy_oracle(&xs, radius));
    }
}

/// First point of a fine grid where the LCD inequality holds, and the length
/// of the satisfying run that starts there.
fn lcd_grid_oracle(v: &Vector, p: &LcdParams, step: f64) -> Option<(f64, f64)> {
    let slack = |t: f64| {
        let d = v.iter().map(|x| (t * x - (t * x).round()).powi(2)).sum::<f64>().sqrt();
        d - (p.gamma * t).min(p.alpha)
    };
    let steps = (p.theta_max / step).ceil() as u64;
    let first = (1..=steps).find(|&k| slack(k as f64 * step) < 0.0)?;
    let run = (first..=steps).take_while(|&k| slack(k as f64 * step) < 0.0).count();
    Some((first as f64 * step, run as f64 * step))
}

#[test]
fn lcd_matches_fine_grid() {
    let mut r = rng(3);
    let fine = 1e-5;
    let mut compared = 0;
    for trial in 0..60 {
        let dim = 2 + trial % 4;
        let v = if trial % 3 == 0 {
            unit((0..dim).map(|_| f64::from(r.random_range(-5..=5)) + 0.5).collect())
        } else {
            random_unit_vector(&mut r, dim)
        };
        let gamma = [0.1, 0.3, 0.5][trial % 3];
        let p = LcdParams::with_defaults(dim, 0.5 * (dim as f64).sqrt(), gamma);
        let got = lcd(&v, &p).unwrap();
        match lcd_grid_oracle(&v, &p, fine) {
            None => assert!(got.found().is_none(), "{v:?}: got {got:?}"),
            Some((want, run)) => {
                let value = got.found().expect("fine grid found a hit the scan missed");
                // The value satisfies the strict inequality, so it cannot sit
                // before the oracle's first hit by more than one fine step.
                assert!(value >= want - fine, "{value} < {want}");
                assert!(got.witness_dist < (gamma * value).min(p.alpha));
                // Runs longer than two scan steps cannot be skipped.
                if run > 2.0 * p.grid_step {
                    assert!(value <= want + 1e-8, "{value} > {want}");
                    compared += 1;
                }
            }
        }
    }
    assert!(compared > 30);
}

/// `1/‖A⁻¹‖` by power iteration on `(AᵀA)⁻¹` with LU solves.
fn inverse_power_sn(a: &Matrix) -> f64 {
    let n = a.nrows();
    let lu_a = a.clone().lu();
    let lu_at = a.transpose().lu();
    let mut x = Vector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..3000 {
        let y = lu_at.solve(&x).unwrap();
        let z = lu_a.solve(&y).unwrap();
        lambda = z.norm();
        x = z / lambda;
    }
    1.0 / lambda.sqrt()
}

#[test]
fn smallest_singular_value_matches_inverse_power_iteration() {
    for n in [3usize, 7, 12, 20] {
        let spec = EnsembleSpec::new(n, ScalarDistribution::Gaussian, 40 + n as u64).unwrap();
        for t in 0..10 {
            let a = sample_matrix(&spec, t).unwrap();
            let s = singular_values(&a).unwrap();
            // Power iteration converges too slowly on near-degenerate gaps.
            let gap = s.values()[n - 2] / s.smallest();
            if gap < 1.05 {
                continue;
            }
            let got = s.smallest();
            let want = inverse_power_sn(&a);
            assert!((got - want).abs() <= 1e-6 * want, "n={n}: {got} vs {want}");
        }
    }
}

#[test]
fn spectrum_transpose_and_condition_identities() {
    let laws = [ScalarDistribution::Gaussian, ScalarDistribution::LazyRademacher, ScalarDistribution::UniformPm];
    for (li, law) in laws.into_iter().enumerate() {
        for n in [2usize, 5, 16, 33] {
            let spec = EnsembleSpec::new(n, law.clone(), 7 + li as u64).unwrap();
            for t in 0..20 {
                let a = sample_matrix(&spec, t).unwrap();
                let s = singular_values(&a).unwrap();
                let st = singular_values(&a.transpose()).unwrap();
                for (x, y) in s.values().iter().zip(st.values()) {
                    assert!((x - y).abs() < 1e-10 * s.largest().max(1.0));
                }
                let sn = smallest_singular_value(&a).unwrap();
                if sn > 1e-6 {
                    let inv = a.clone().try_inverse().unwrap();
                    let prod = sn * operator_norm(&inv).unwrap();
                    assert!((prod - 1.0).abs() < 1e-6, "{prod}");
                }
            }
        }
    }
}

#[test]
fn interlacing_on_ten_thousand_matrices() {
    let laws = [
        ScalarDistribution::Gaussian,
        ScalarDistribution::Rademacher,
        ScalarDistribution::LazyRademacher,
        ScalarDistribution::UniformPm,
    ];
    let mut count = 0;
    for i in 0..10_000u64 {
        let n = 3 + (i % 30) as usize;
        let spec = EnsembleSpec::new(n, laws[(i % 4) as usize].clone(), i / 120).unwrap();
        let a = sample_matrix(&spec, i).unwrap();
        assert!(interlacing_check(&a).unwrap(), "trial {i}, n={n}");
        count += 1;
    }
    assert_eq!(count, 10_000);
}
