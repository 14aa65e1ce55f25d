mod common;

use common::{direct_f, grid_beta_d, xorshift_uniforms};
use proptest::prelude::*;
use pspin::numerics::golden_section_minimize;
use pspin::thresholds::*;
use pspin::MixtureSpec;

fn pure(p: u32) -> MixtureSpec {
    MixtureSpec::pure(p).unwrap()
}

#[test]
fn tilted_map_matches_direct_quadrature() {
    let s = pure(3);
    let f = replica_fixed_point_map(&s, 2.0, 0.9).unwrap();
    assert!(f > 0.0 && f < 1.0);
    assert!((f - direct_f(&s, 2.0, 0.9)).abs() < 1e-8);
    // A spread of tilts covering both quadrature rules.
    let u = xorshift_uniforms(40);
    for pair in u.chunks(2) {
        let (beta, q) = (3.0 * pair[0], pair[1]);
        let got = replica_fixed_point_map(&s, beta, q).unwrap();
        let want = direct_f(&s, beta, q);
        assert!((got - want).abs() < 1e-8, "beta={beta} q={q}: {got} vs {want}");
    }
}

#[test]
fn beta_d_pure3_matches_grid_oracle() {
    let s = pure(3);
    let r = beta_d(&s, 1e-8).unwrap();
    let b = r.value();
    assert!(b > 0.0 && b < 2.0 * sqrt_2_ln_2());
    let oracle = grid_beta_d(&s);
    assert!((b - oracle).abs() < 1e-3 + 1e-9, "{b} vs {oracle}");
    // Just below: no grid point with F(q) >= q.
    let below = b - 1e-6;
    assert!((1..=10_000).all(|i| {
        let q = f64::from(i) * 1e-4;
        replica_fixed_point_map(&s, below, q).unwrap() < q
    }));
    let q_star = r.minimizer.unwrap();
    assert!(q_star > 0.0 && q_star < 1.0);
    let at = replica_fixed_point_map(&s, b + 1e-8, q_star).unwrap();
    assert!((at - q_star).abs() < 1e-3);
}

#[test]
fn beta_d_scaled_decreases_with_p() {
    let mut prev = f64::INFINITY;
    for p in [20u32, 50, 100, 200] {
        let b = beta_d(&pure(p), 1e-8).unwrap().value();
        let pf = f64::from(p);
        let scaled = b * (pf / (2.0 * pf.ln())).sqrt();
        assert!(scaled > 1.0 && scaled < prev, "p={p}: {scaled}");
        prev = scaled;
    }
}

fn grid_min(objective: impl Fn(f64) -> f64, step: f64) -> f64 {
    let n = (1.0 / step) as usize;
    (1..n).map(|i| objective(i as f64 * step)).fold(f64::INFINITY, f64::min)
}

#[test]
fn bar_beta_d_matches_fine_grid() {
    for spec in [pure(3), pure(4), MixtureSpec::new([(2, 0.3), (3, 1.0)]).unwrap()] {
        let r = bar_beta_d(&spec).unwrap();
        let oracle = grid_min(|q| bar_beta_d_objective(&spec, q), 1e-6);
        assert!((r.value() - oracle).abs() < 1e-5, "{} vs {oracle}", r.value());
        assert!(r.value() <= oracle + 1e-12);
        let rs = bar_beta_d_spherical(&spec).unwrap();
        let oracle = grid_min(|q| bar_beta_d_spherical_objective(&spec, q), 1e-6);
        assert!((rs.value() - oracle).abs() < 1e-5, "{} vs {oracle}", rs.value());
    }
}

#[test]
fn bar_beta_d_large_p_upper_bound() {
    for p in [50u32, 100, 200] {
        let pf = f64::from(p);
        let v = bar_beta_d(&pure(p)).unwrap().value();
        let bound = 1.1 * v_lambda(1.0) * (2.0 * pf.ln() / pf).sqrt();
        assert!(v <= bound, "p={p}: {v} > {bound}");
    }
}

#[test]
fn spherical_threshold_large_p_limit() {
    let r = bar_beta_d_spherical(&pure(1_000_000)).unwrap();
    let limit = large_p_constants();
    assert!((r.value() - 2.2160).abs() < 1e-2);
    let lambda = 1e6 * (1.0 - r.minimizer.unwrap());
    assert!((lambda - limit.lambda_star).abs() < 0.01, "{lambda}");
}

#[test]
fn dual_minimum_matches_numeric_minimization() {
    for i in 0..10 {
        let q = f64::from(i) / 10.0;
        let d = u_dual(q).unwrap();
        let (h, v) = golden_section_minimize(|h| dual_objective(h, q), -5.0, 10.0, 1e-12);
        assert!((v - d.min_value).abs() < 1e-8, "q={q}");
        assert!((h - d.h_star).abs() < 1e-4, "q={q}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fixed_point_map_in_unit_interval(beta in 0.0f64..4.0, q in 0.0f64..=1.0, p in 2u32..8) {
        let f = replica_fixed_point_map(&pure(p), beta, q).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
    }

    #[test]
    fn fixed_point_map_nondecreasing_in_beta(b1 in 0.0f64..3.0, db in 0.0f64..1.0, q in 0.01f64..=1.0) {
        let s = pure(3);
        let lo = replica_fixed_point_map(&s, b1, q).unwrap();
        let hi = replica_fixed_point_map(&s, b1 + db, q).unwrap();
        prop_assert!(hi + 1e-10 >= lo);
    }

    #[test]
    fn bar_beta_d_below_any_grid(step in 0.001f64..0.2, p in 3u32..12) {
        let s = pure(p);
        let v = bar_beta_d(&s).unwrap().value();
        prop_assert!(v <= grid_min(|q| bar_beta_d_objective(&s, q), step) + 1e-10);
    }

    #[test]
    fn band_satisfies_type_invariants(p in 3u32..2000, eps_prime in 0.01f64..2.0) {
        let c = ogp_band_pure_p(p, eps_prime, DEFAULT_RATE).unwrap();
        if let Some(b) = c.band {
            prop_assert!(b.q_low < b.q_high);
            prop_assert!(b.r < b.big_r);
            prop_assert!((b.r - 0.5 * (1.0 - b.q_high)).abs() < 1e-15);
            prop_assert!((b.big_r - 0.5 * (1.0 - b.q_low)).abs() < 1e-15);
            prop_assert!(b.eps > 0.0 && b.delta > 0.0);
        }
        prop_assert!(v_lambda(c.delta) * (1.0 + c.delta).sqrt() < 1.0 + eps_prime);
    }
}
