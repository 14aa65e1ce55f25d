use proptest::prelude::*;
use pspin::algolab::*;
use pspin::disorder::{sample_null, DisorderKind, DisorderTensor};
use pspin::landscape::FlipKernel;
use pspin::ogp::{exceptional_membership, tau_grid};
use pspin::rng::derive_seed;
use pspin::spins;
use pspin::stats::combined_se;
use pspin::thresholds::OgpBand;
use pspin::MixtureSpec;

fn p3() -> MixtureSpec {
    MixtureSpec::pure(3).unwrap()
}

fn band(q_low: f64, q_high: f64) -> OgpBand {
    OgpBand::new(q_low, q_high, 0.1, 0.1, 0.1).unwrap()
}

#[test]
fn algorithms_are_deterministic() {
    let spec = MixtureSpec::new(vec![(2, 0.5), (3, 0.8)]).unwrap();
    let g = sample_null(12, &spec, 4).unwrap();
    let algs: Vec<Box<dyn SearchAlgorithm>> = vec![
        Box::new(baseline_constant(vec![1.0; 12])),
        Box::new(baseline_diagonal(0.3)),
        Box::new(baseline_greedy(50).unwrap()),
        Box::new(negative_control(0.25)),
    ];
    for alg in &algs {
        let a = checked_run(alg.as_ref(), &g).unwrap();
        let b = alg.run(&sample_null(12, &spec, 4).unwrap()).unwrap();
        assert_eq!(a, b, "{}", alg.name());
        assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
    }
}

#[test]
fn diagonal_reads_top_degree_diagonal() {
    let spec = MixtureSpec::new(vec![(2, 0.5), (3, 0.8)]).unwrap();
    let g = sample_null(6, &spec, 9).unwrap();
    let out = baseline_diagonal(0.4).run(&g).unwrap();
    let top = g.degree(3).unwrap();
    for i in 0..6 {
        let expect = (0.4 * top[i * 36 + i * 6 + i]).clamp(-1.0, 1.0);
        assert_eq!(out[i], expect);
    }
}

#[test]
fn greedy_on_zero_disorder_stays_put() {
    let g = DisorderTensor::from_couplings(7, p3(), vec![vec![0.0; 343]], 0, DisorderKind::Null).unwrap();
    let out = baseline_greedy(5).unwrap().search(&g).unwrap();
    assert_eq!(out.config, 0);
    assert!(out.converged);
    assert_eq!(out.sweeps, 1);
    assert!(baseline_greedy(0).is_err());
}

#[test]
fn greedy_converges_to_local_maximum() {
    let spec = p3();
    for seed in 0..10 {
        let g = sample_null(14, &spec, seed).unwrap();
        let out = baseline_greedy(1000).unwrap().search(&g).unwrap();
        assert!(out.converged);
        let sigma = spins::decode(out.config, 14);
        for j in 0..14 {
            // Direct recomputation, independent of the flip kernel.
            let mut flipped = sigma.clone();
            flipped[j] = -flipped[j];
            assert!(g.energy(&flipped) - g.energy(&sigma) <= 1e-9);
        }
        let k = FlipKernel::new(&g).unwrap();
        assert!((k.energy(out.config) - g.energy(&sigma)).abs() < 1e-9);
    }
}

#[test]
fn constant_baseline_chi_is_one() {
    let c = chi_estimate(&baseline_constant(vec![1.0; 8]), 8, &p3(), &[0.0, 0.3, 1.0], 20, 5).unwrap();
    assert!(c.estimates.iter().all(|&x| x == 1.0));
    assert!(c.std_errors.iter().all(|&x| x == 0.0));
    let rep = chi_concentration_check(&baseline_constant(vec![1.0; 8]), 8, &p3(), 0.5, 20, &[0.01, 0.1], 5).unwrap();
    assert!(rep.rows.iter().all(|r| r.exceedance == 0.0 && r.pass == Some(true)));
}

#[test]
fn diagonal_chi_ratio_is_linear() {
    let taus = [0.25, 0.5, 0.75, 1.0];
    let ratios = chi_ratios(&baseline_diagonal(0.2), 10, &p3(), &taus, 1000, 1).unwrap();
    for r in &ratios {
        assert!((r.ratio - (1.0 - r.tau)).abs() <= 3.0 * r.std_error, "{r:?}");
    }
    let c = chi_estimate(&baseline_diagonal(0.2), 10, &p3(), &[0.0, 1.0], 1000, 1).unwrap();
    assert!((c.estimates[0] - 0.04).abs() <= 3.0 * c.std_errors[0]);
    assert!(c.estimates[1].abs() <= 3.0 * c.std_errors[1]);
}

#[test]
fn diagonal_respects_concentration_bound() {
    let rep = chi_concentration_check(&baseline_diagonal(0.2), 10, &p3(), 0.5, 400, &[0.05, 0.1, 0.2], 2).unwrap();
    assert!(rep.applicable && !rep.violated, "{rep:?}");
}

#[test]
fn hash_sign_control_is_flagged() {
    let rep = chi_concentration_check(&negative_control(0.25), 40, &p3(), 0.5, 100, &[0.05, 0.1, 0.2], 3).unwrap();
    assert!(rep.violated);
    assert_eq!(rep.rows[2].pass, Some(false));
}

#[test]
fn greedy_concentration_is_descriptive() {
    let rep = chi_concentration_check(&baseline_greedy(100).unwrap(), 12, &p3(), 0.5, 30, &[0.1], 3).unwrap();
    assert!(!rep.applicable && !rep.violated);
    assert!(rep.rows[0].pass.is_none());
    assert!(rep.empirical_scale > 0.0);
}

#[test]
fn greedy_chi_nonincreasing() {
    let taus: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let c = chi_estimate(&baseline_greedy(100).unwrap(), 20, &p3(), &taus, 100, 2).unwrap();
    assert_eq!(c.estimates[0], 1.0);
    for j in 1..c.taus.len() {
        let se = combined_se(c.std_errors[j - 1], c.std_errors[j]);
        assert!(c.estimates[j] <= c.estimates[j - 1] + 3.0 * se);
    }
}

#[test]
fn tau_selection_on_synthetic_curves() {
    let taus: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let linear: Vec<f64> = taus.iter().map(|t| 0.95 - 0.9 * t).collect();
    let curve = ChiCurve::from_points(taus.clone(), linear).unwrap();
    let b = band(0.3, 0.7);
    // L = 1: K = 25; window (0.4, 0.6) holds tau in (0.3889, 0.6111).
    match grid_tau_select(&curve, &b, 0.1, 1.0).unwrap() {
        TauSelection::Found { big_k, k, tau, chi } => {
            assert_eq!((big_k, k), (25, 10));
            assert_eq!(tau, 0.4);
            assert!((chi - 0.59).abs() < 1e-12);
        }
        other => panic!("{other:?}"),
    }
    let flat = ChiCurve::from_points(taus.clone(), vec![1.0; 11]).unwrap();
    match grid_tau_select(&flat, &b, 0.1, 1.0).unwrap() {
        TauSelection::EndpointFailure { failures } => {
            assert_eq!(failures.len(), 1);
            assert_eq!(failures[0].tau, 1.0);
        }
        other => panic!("{other:?}"),
    }
    // A jump over the window: no grid point qualifies.
    let jump = ChiCurve::from_points(vec![0.0, 0.49, 0.5, 1.0], vec![0.9, 0.9, 0.1, 0.1]).unwrap();
    assert!(matches!(
        grid_tau_select(&jump, &b, 0.1, 0.5).unwrap(),
        TauSelection::NoWitness { .. }
    ));
    assert!(grid_tau_select(&curve, &b, 0.25, 1.0).is_err());
    let constant = chi_estimate(&baseline_constant(vec![1.0; 8]), 8, &p3(), &[0.0, 1.0], 5, 1).unwrap();
    assert!(matches!(
        grid_tau_select(&constant, &b, default_delta(&b), 1.0).unwrap(),
        TauSelection::EndpointFailure { .. }
    ));
}

#[test]
fn rarity_report_constant_baseline_fails_often() {
    let cfg = RarityConfig {
        n: 10,
        beta: 1.2,
        beta_prime: 1.1,
        k: 2,
        c: 0.1,
        replicas: 30,
        inner_replicas: 5,
        seed: 8,
    };
    let rep = rarity_report(&baseline_constant(vec![1.0; 10]), &p3(), &band(0.3, 0.8), &cfg).unwrap();
    assert!(rep.terms.outside_s_beta.estimate > 0.9);
    assert!(rep.terms.failure_lhs.estimate > 3.0);
    assert_eq!(rep.rows.len(), 30);
}

#[test]
fn rarity_report_reduces_to_membership() {
    let (spec, b) = (p3(), band(0.3, 0.8));
    let cfg = RarityConfig {
        n: 10,
        beta: 1.0,
        beta_prime: 0.6,
        k: 1,
        c: 0.0,
        replicas: 12,
        inner_replicas: 6,
        seed: 10,
    };
    let alg = baseline_greedy(100).unwrap();
    let rep = rarity_report(&alg, &spec, &b, &cfg).unwrap();
    for (s, row) in rep.rows.iter().enumerate() {
        let g = sample_null(10, &spec, derive_seed(10, &[s as u64, 0])).unwrap();
        let sigma = alg.search(&g).unwrap().config;
        let inner = derive_seed(10, &[s as u64, 2, 0f64.to_bits()]);
        let m = exceptional_membership(sigma, &g, 0.6, &b, tau_grid(1)[0], 0.0, 6, inner).unwrap();
        assert_eq!(row.in_exceptional, m.member);
        assert_eq!(row.in_s_beta_prime, m.in_domain);
    }
}

#[test]
fn rarity_report_split_halves_agree() {
    let cfg = RarityConfig {
        n: 14,
        beta: 1.0,
        beta_prime: 0.8,
        k: 4,
        c: 0.1,
        replicas: 50,
        inner_replicas: 20,
        seed: 4,
    };
    let rep = rarity_report(&baseline_greedy(100).unwrap(), &p3(), &band(0.3, 0.8), &cfg).unwrap();
    assert!(rep.split_consistent, "{:?}", rep.split);
    assert_eq!(rep.split.len(), 5);
    let lhs = rep.terms.in_exceptional.estimate + 4.0 * rep.terms.outside_s_beta_prime.estimate;
    assert!((rep.terms.failure_lhs.estimate - lhs).abs() < 1e-12);
    assert_eq!(rep.mean_energy_raw, rep.mean_energy_rounded);
}

#[test]
fn rounding_ties_go_up() {
    let x = [0.0, -0.0, 0.3, -0.2];
    assert_eq!(spins::decode(spins::encode(&x), 4), vec![1.0, 1.0, 1.0, -1.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn greedy_never_decreases_energy(seed in 0u64..1000, n in 2usize..12) {
        let g = sample_null(n, &p3(), seed).unwrap();
        let out = baseline_greedy(3).unwrap().search(&g).unwrap();
        let start = g.energy(&vec![1.0; n]);
        prop_assert!(g.energy(&spins::decode(out.config, n)) >= start - 1e-12);
    }

    #[test]
    fn k_formula(l in 0.0f64..5.0, lo in 0.0f64..0.5, w in 0.05f64..0.5) {
        let b = OgpBand::new(lo, lo + w, 0.1, 0.1, 0.1).unwrap();
        let k = grid_size(l, &b);
        prop_assert!(k >= 2);
        prop_assert!(k as f64 >= 10.0 * l * l / w - 1e-6);
        prop_assert!(k == 2 || (k as f64) < 10.0 * l * l / w + 1.0);
    }
}
