mod common;

use common::{gauss_legendre, i0_scaled_trapezoid, MarcumOracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use ris_coverage::specfun::{marcum_q1, noncentral_chi2_cdf};

#[test]
fn oracle_sanity() {
    let gl = gauss_legendre(20);
    let integral: f64 = gl.iter().map(|&(x, w)| w * x.powi(38)).sum();
    assert!((integral - 2.0 / 39.0).abs() < 1e-15);
    // e^{-1} I0(1) and e^{-25} I0(25) from mpmath
    assert!((i0_scaled_trapezoid(1.0) - 0.465_759_607_593_640_6).abs() < 1e-15);
    assert!((i0_scaled_trapezoid(25.0) - 0.080_196_773_547_436_71).abs() < 1e-15);
    let o = MarcumOracle::default();
    assert!((o.q1(0.0, 2.0) - (-2.0f64).exp()).abs() < 1e-14);
    assert!((o.q1(3.0, 3.0) - 0.567_479_762_290_861_5).abs() < 1e-13);
}

#[test]
fn three_three_against_quadrature() {
    let o = MarcumOracle::default();
    let v = marcum_q1(3.0, 3.0).unwrap();
    assert!((v - o.q1(3.0, 3.0)).abs() <= 1e-9);
    let c = noncentral_chi2_cdf(9.0, 9.0).unwrap();
    assert!((c - (1.0 - v)).abs() < 1e-15);
    assert!((c - o.ncx2_cdf(9.0, 9.0)).abs() <= 1e-9);
}

#[test]
fn random_pairs_against_quadrature() {
    let o = MarcumOracle::default();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = (0.0, 0.0, 0.0);
    for _ in 0..2_000 {
        let a = rng.random_range(0.0..20.0);
        let b = rng.random_range(0.0..20.0);
        let err = (marcum_q1(a, b).unwrap() - o.q1(a, b)).abs();
        if err > worst.0 {
            worst = (err, a, b);
        }
    }
    assert!(worst.0 <= 1e-9, "{worst:?}");
}

#[test]
fn edges_of_the_range() {
    let o = MarcumOracle::default();
    for &(a, b) in &[(0.0, 0.0), (0.0, 20.0), (20.0, 0.0), (20.0, 20.0), (1e-8, 1e-8), (19.99, 0.01), (0.01, 19.99)] {
        let err = (marcum_q1(a, b).unwrap() - o.q1(a, b)).abs();
        assert!(err <= 1e-9, "({a}, {b}): {err}");
    }
    // wider range of the accuracy claim
    for &(a, b) in &[(50.0, 50.0), (45.0, 50.0), (50.0, 45.0), (30.0, 33.0), (0.5, 50.0), (50.0, 0.5)] {
        let err = (marcum_q1(a, b).unwrap() - o.q1(a, b)).abs();
        assert!(err <= 1e-12, "({a}, {b}): {err}");
    }
}

/// Kolmogorov-Smirnov distance between the CDF and `n` draws of
/// `X1² + X2²` with `X1 ~ N(sqrt λ, 1)`, `X2 ~ N(0, 1)`.
fn ks_distance(lambda: f64, n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs: Vec<f64> = (0..n)
        .map(|_| {
            let x1 = lambda.sqrt() + rng.sample::<f64, _>(StandardNormal);
            let x2: f64 = rng.sample(StandardNormal);
            x1 * x1 + x2 * x2
        })
        .collect();
    xs.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = noncentral_chi2_cdf(x, lambda).unwrap();
        d = d.max((i as f64 + 1.0) / nf - f).max(f - i as f64 / nf);
    }
    d
}

#[test]
fn chi_square_cdf_matches_sampling() {
    for (i, lambda) in [0.0, 1.0, 9.0, 60.0, 400.0].into_iter().enumerate() {
        let d = ks_distance(lambda, 1_000_000, 100 + i as u64);
        assert!(d <= 0.002, "λ = {lambda}: KS distance {d}");
    }
}

#[test]
fn chi_square_edges() {
    assert_eq!(noncentral_chi2_cdf(0.0, 7.0).unwrap(), 0.0);
    for x in [0.1, 1.0, 5.0, 30.0] {
        let want = 1.0 - (-x / 2.0f64).exp();
        assert!((noncentral_chi2_cdf(x, 0.0).unwrap() - want).abs() < 1e-15);
    }
    let mut prev = 0.0;
    for i in 0..400 {
        let c = noncentral_chi2_cdf(i as f64 * 0.25, 16.0).unwrap();
        assert!(c >= prev);
        prev = c;
    }
}
