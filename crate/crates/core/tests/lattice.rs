use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use svsmooth_core::ensembles::{EnsembleSpec, ScalarDistribution};
use svsmooth_core::lattice::{
    build_sd_net, count_lattice_points, cover_audit, cover_ellipsoid, net_size_bound,
    primitive_directions, sandwich_check, Ellipsoid, Parallelepiped,
};
use svsmooth_core::{Matrix, Vector};

/// Lattice-count constant, calibrated once (largest observed
/// `(count / Π ℓ_i)^{1/n}` was 1.64 over the corpus below) and frozen.
const C_HAT: f64 = 2.0;

fn rotation(n: usize, r: &mut ChaCha8Rng) -> Matrix {
    let spec = EnsembleSpec::new(1, ScalarDistribution::Gaussian, r.random()).unwrap();
    let g = spec.sampler(0).unwrap().matrix(n, n);
    g.qr().q()
}

fn random_box(r: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Parallelepiped {
    let center = Vector::from_iterator(n, (0..n).map(|_| r.random_range(-3.0..3.0)));
    let widths = (0..n).map(|_| r.random_range(lo..hi)).collect();
    Parallelepiped::new(center, rotation(n, r), widths).unwrap()
}

#[test]
fn counts_are_bounded_by_frozen_constant() {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for k in 0..1000 {
        let n = 1 + k % 5;
        let b = random_box(&mut r, n, 1.0, 4.0);
        let count = count_lattice_points(&b).unwrap() as f64;
        let ratio = (count / b.volume()).powf(1.0 / n as f64);
        worst = worst.max(ratio);
        assert!(count <= C_HAT.powi(n as i32) * b.volume(), "{b:?}: {count}");
    }
    println!("max (count / volume)^(1/n) = {worst:.4}");
}

#[test]
fn rotated_square_matches_direct_scan() {
    let mut r = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let angle: f64 = r.random_range(0.0..std::f64::consts::PI);
        let (s, c) = angle.sin_cos();
        let axes = Matrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let side = r.random_range(0.5..5.0);
        let center = Vector::from_vec(vec![r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)]);
        let b = Parallelepiped::new(center.clone(), axes, vec![side, side]).unwrap();
        // Every lattice point within the circumscribed disc, tested directly.
        let reach = (side / 2f64.sqrt()).ceil() as i64 + 1;
        let (cx, cy) = (center[0].round() as i64, center[1].round() as i64);
        let mut direct = 0;
        for x in cx - reach..=cx + reach {
            for y in cy - reach..=cy + reach {
                direct += u64::from(b.contains(&Vector::from_vec(vec![x as f64, y as f64])));
            }
        }
        assert_eq!(count_lattice_points(&b).unwrap(), direct);
    }
    let unit = Parallelepiped::new(
        Vector::zeros(2),
        Matrix::from_row_slice(2, 2, &[0.5f64.sqrt(), -(0.5f64.sqrt()), 0.5f64.sqrt(), 0.5f64.sqrt()]),
        vec![1.0, 1.0],
    )
    .unwrap();
    let count = count_lattice_points(&unit).unwrap() as f64;
    assert!(count <= C_HAT * C_HAT);
}

#[test]
fn covers_have_no_misses() {
    let mut r = ChaCha8Rng::seed_from_u64(3);
    for n in 1..=6 {
        let semiaxes: Vec<f64> = (0..n).map(|_| r.random_range(0.2..5.0)).collect();
        let center = Vector::from_iterator(n, (0..n).map(|_| r.random_range(-1.0..1.0)));
        let e = Ellipsoid::new(center, rotation(n, &mut r), semiaxes).unwrap();
        let boxes = cover_ellipsoid(&e).unwrap();
        let m = (2.0 * (n as f64).sqrt()).ceil() as usize;
        assert_eq!(boxes.len(), m.pow(n as u32));
        let audit = cover_audit(&e, &boxes, 100_000, 10 + n as u64).unwrap();
        assert_eq!(audit.misses, 0, "n={n}");
    }
    let bad = Ellipsoid::new(Vector::zeros(13), Matrix::identity(13, 13), vec![1.0; 13]).unwrap();
    assert!(cover_ellipsoid(&bad).is_err());
}

#[test]
fn sandwich_holds_for_random_maps() {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let j = Matrix::from_fn(4, 4, |_, _| r.random_range(-2.0..2.0));
    let rep = sandwich_check(&j, 100_000, 5).unwrap();
    assert!(rep.holds && rep.counterexample.is_none());
    for k in 0..100 {
        let rows = 1 + k % 6;
        let cols = 1 + (k / 6) % 5;
        let scale = [0.1, 1.0, 10.0][k % 3];
        let j = Matrix::from_fn(rows, cols, |_, _| r.random_range(-scale..scale));
        assert!(sandwich_check(&j, 2000, k as u64).unwrap().holds);
    }
}

#[test]
fn net_contains_small_lattice_directions() {
    let net = build_sd_net(2, 3.0, 0.5, 0.1, 0, 0).unwrap();
    for p in [[1.0, 0.0], [0.0, 1.0], [0.5f64.sqrt(), 0.5f64.sqrt()], [0.6, 0.8]] {
        let p = Vector::from_vec(p.to_vec());
        assert!(net.net.iter().any(|q| (q - &p).norm() < 1e-12), "{p:?}");
    }
    // Sizes are unique directions.
    assert_eq!(net.size, primitive_directions(2, 9.0, 0.0).unwrap().len());
}

#[test]
fn ball_and_annulus_give_the_same_net() {
    for (n, d) in [(2usize, 3.0), (3, 6.0), (4, 2.5), (5, 1.5)] {
        let ball = primitive_directions(n, 3.0 * d, 0.0).unwrap();
        let shell = primitive_directions(n, 3.0 * d, 1.5 * d).unwrap();
        assert_eq!(ball, shell, "n={n}, D={d}");
    }
}

#[test]
fn level_set_members_are_close_to_the_net() {
    let net = build_sd_net(3, 6.0, 0.5, 0.1, 10_000, 6).unwrap();
    println!("audited {} of {} draws, max gap {:.5} <= {:.5}", net.audited, net.draws, net.max_gap, net.gap_bound);
    assert_eq!(net.audited, 10_000);
    assert!(net.holds && net.max_gap <= net.gap_bound);
}

#[test]
fn constructed_nets_fit_the_size_bound() {
    for (n, d) in [(2usize, 2.0), (2, 6.0), (3, 3.0), (3, 6.0), (4, 2.0), (5, 1.5)] {
        let size = build_sd_net(n, d, 0.5, 0.1, 0, 0).unwrap().size as f64;
        let bound = net_size_bound(n, d, 0.5, 1.0, 10.0).unwrap();
        assert!(size <= bound, "n={n}, D={d}: {size} > {bound}");
    }
    let b = |d| net_size_bound(3, d, 1.0, 2.0, 10.0).unwrap();
    assert!(b(2.0) < b(3.0) && b(3.0) < b(4.0));
}

proptest! {
    #[test]
    fn counts_invariant_under_integer_translation(
        seed: u64,
        n in 1usize..4,
        shift in prop::collection::vec(-20i64..20, 3),
    ) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let b = random_box(&mut r, n, 0.5, 4.0);
        let moved = Parallelepiped::new(
            &b.center + Vector::from_iterator(n, shift.iter().take(n).map(|&s| s as f64)),
            b.axes.clone(),
            b.widths.clone(),
        )
        .unwrap();
        prop_assert_eq!(count_lattice_points(&b).unwrap(), count_lattice_points(&moved).unwrap());
    }
}
