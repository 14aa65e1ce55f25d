//! Acceptance suite: one PASS/FAIL line per criterion, with the individual
//! checks listed underneath. Tolerances are fixed; criteria that cannot be
//! met are reported as FAIL and the process still exits 0 so that the rest
//! of the workspace tests run.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{direct_f, grid_beta_d, llr_by_density_ratio, xorshift_uniforms};
use pspin::algolab::*;
use pspin::disorder::{interpolate, sample_null, sample_planted};
use pspin::landscape::*;
use pspin::numerics::{golden_section_minimize, normal_pdf, normal_quantile};
use pspin::ogp::*;
use pspin::rng::derive_seed;
use pspin::shattering::*;
use pspin::spins::{self, overlap_f64, Config};
use pspin::stats::{bernoulli_se, combined_se, MeanSe};
use pspin::thresholds::*;
use pspin::MixtureSpec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Check {
    label: String,
    pass: bool,
    detail: String,
}

#[derive(Default)]
struct Checks(Vec<Check>);

impl Checks {
    fn add(&mut self, label: impl Into<String>, pass: bool, detail: impl Into<String>) {
        self.0.push(Check {
            label: label.into(),
            pass,
            detail: detail.into(),
        });
    }

    /// `|got - want| <= tol`.
    fn close(&mut self, label: &str, got: f64, want: f64, tol: f64) {
        let diff = (got - want).abs();
        self.add(
            label,
            diff <= tol,
            format!("{got:.7} vs {want} (|diff| {diff:.2e}, tol {tol:.0e})"),
        );
    }
}

struct Criterion {
    id: u32,
    title: &'static str,
    budget: Option<Duration>,
    run: fn(&mut Checks),
}

fn pure(p: u32) -> MixtureSpec {
    MixtureSpec::pure(p).unwrap()
}

fn golden_constants(c: &mut Checks) {
    let k = large_p_constants();
    c.close("limit value", k.limit_value, 2.2160, 1e-3);
    c.close("lambda*", k.lambda_star, 1.2608, 1e-3);
    c.close("C", k.c, 2.342, 1e-3);
    c.close("lambda2", k.lambda2, 0.71, 0.01);
    c.close("lambda1", k.lambda1, 2.13, 0.01);
    c.close("lambda1 / lambda2", k.lambda1 / k.lambda2, 3.00, 0.01);
    let b = beta_d_spherical(1000).unwrap();
    let e = std::f64::consts::E.sqrt();
    let rel = (b - e).abs() / e;
    c.add(
        "spherical beta_d(1000)",
        rel <= 2e-3,
        format!("{b:.6} vs sqrt(e) = {e:.6} (rel {rel:.2e})"),
    );
    let grad = |l: f64| (spherical_limit_profile(l + 1e-6) - spherical_limit_profile(l - 1e-6)) / 2e-6;
    c.add(
        "stationarity",
        grad(k.lambda_star).abs() < 1e-6,
        format!(
            "profile'(lambda*) = {:.1e}; e^l - 1 = 2l at l = {:.6}",
            grad(k.lambda_star),
            k.lambda_star
        ),
    );
}

fn e_alg_quadrature(c: &mut Checks) {
    for p in 3..=10u32 {
        let got = e_alg(&pure(p), 1e-10).unwrap();
        let want = 2.0 * (f64::from(p - 1) / f64::from(p)).sqrt();
        c.close(&format!("p = {p}"), got, want, 1e-6);
    }
}

fn dual_identity(c: &mut Checks) {
    let mut worst = 0.0f64;
    for i in 0..10 {
        let q = f64::from(i) / 10.0;
        let (_, numeric) = golden_section_minimize(|h| dual_objective(h, q), -5.0, 10.0, 1e-12);
        let closed = 2.0 * normal_pdf(normal_quantile(0.5 * (1.0 + q)));
        worst = worst.max((numeric - closed).abs());
    }
    c.add(
        "dual minimum",
        worst <= 1e-8,
        format!("max |numeric - closed form| = {worst:.2e} over q = 0..0.9"),
    );
    let spec = MixtureSpec::new([(2, 0.6), (3, 0.8)]).unwrap();
    let mut worst = 0.0f64;
    for i in 0..10 {
        let q = f64::from(i) / 10.0;
        let want = 16.0 * spec.d1(1.0).sqrt() * u_dual(q).unwrap().min_value;
        worst = worst.max((sf_bound(&spec, 16, q).unwrap() - want).abs());
    }
    c.add("sf_bound", worst <= 1e-12, format!("max deviation {worst:.2e}"));
}

fn fixed_point_solver(c: &mut Checks) {
    let s = pure(3);
    let b = beta_d(&s, 1e-8).unwrap().value();
    let oracle = grid_beta_d(&s);
    c.close("beta_d(3) vs grid oracle", b, oracle, 1e-3 + 1e-9);
    let u = xorshift_uniforms(40);
    let worst = u
        .chunks(2)
        .map(|w| {
            let (beta, q) = (3.0 * w[0], w[1]);
            (replica_fixed_point_map(&s, beta, q).unwrap() - direct_f(&s, beta, q)).abs()
        })
        .fold(0.0, f64::max);
    c.add(
        "tilted F vs direct quadrature",
        worst <= 1e-8,
        format!("max deviation {worst:.2e} at 20 points"),
    );
    let scaled: Vec<f64> = [20u32, 50, 100, 200]
        .iter()
        .map(|&p| {
            let pf = f64::from(p);
            beta_d(&pure(p), 1e-8).unwrap().value() * (pf / (2.0 * pf.ln())).sqrt()
        })
        .collect();
    let decreasing = scaled.windows(2).all(|w| w[1] < w[0]) && scaled.iter().all(|&v| v > 1.0);
    c.add(
        "scaled beta_d decreasing to 1",
        decreasing,
        format!("p = 20, 50, 100, 200: {scaled:.4?}"),
    );
}

fn disorder_identities(c: &mut Checks) {
    let spec = pure(3);
    let (n, beta) = (10, 0.7);
    let inst = sample_planted(n, &spec, beta, 42).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let s = inst.g.random_config(&mut rng);
        let q = overlap_f64(&inst.sigma_star, &s) / n as f64;
        let lhs = inst.g.energy(&s);
        let rhs = beta * n as f64 * spec.value(q) + inst.g_tilde.energy(&s);
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(1.0));
    }
    c.add(
        "planted decomposition",
        worst <= 1e-9,
        format!("max relative deviation {worst:.2e} at 100 points"),
    );

    let two = pure(2);
    let g = sample_null(317, &two, 1).unwrap();
    let h = sample_null(317, &two, 2).unwrap();
    let m = g.len() as f64;
    let half = interpolate(&g, &h, 0.5).unwrap();
    let var = half.flat().map(|v| v * v).sum::<f64>() / m;
    let fourth = half.flat().map(|v| v.powi(4)).sum::<f64>() / m;
    let se = ((fourth - var * var) / m).sqrt();
    c.add(
        "variance at tau = 0.5",
        (var - 1.0).abs() <= 3.0 * se,
        format!("{var:.5} (se {se:.1e}) over {m} couplings"),
    );
    let one = interpolate(&g, &h, 1.0).unwrap();
    let products: Vec<f64> = g.flat().zip(one.flat()).map(|(a, b)| a * b).collect();
    let corr = MeanSe::of(&products);
    c.add(
        "independence at tau = 1",
        corr.mean.abs() <= 3.0 * corr.std_error,
        format!("correlation {:.2e} (se {:.1e})", corr.mean, corr.std_error),
    );
}

fn likelihood_ratio(c: &mut Checks) {
    let g = sample_null(8, &pure(2), 12).unwrap();
    let t = enumerate(&g).unwrap();
    let got = log_likelihood_ratio(&t, 0.6).unwrap();
    c.close("density-ratio oracle", got, llr_by_density_ratio(&g, 0.6), 1e-9);

    let (n, beta, tt, seeds) = (20, 0.5, 0.2, 200);
    let spec = pure(3);
    let exceed = (0..seeds)
        .filter(|&s| {
            let t = enumerate(&sample_null(n, &spec, derive_seed(6, &[s])).unwrap()).unwrap();
            log_likelihood_ratio(&t, beta).unwrap().abs() / n as f64 >= tt
        })
        .count();
    let frac = exceed as f64 / seeds as f64;
    let se = bernoulli_se(frac, seeds as usize);
    let bound = (-beta * beta * spec.value(1.0) * tt * tt * n as f64 / 2.0).exp();
    c.add(
        "LLR concentration at t = 0.2",
        frac <= bound + 3.0 * se,
        format!("exceedance {frac:.3} (se {se:.3}) vs bound {bound:.4}"),
    );
}

fn sudakov_fernique(c: &mut Checks) {
    let spec = pure(3);
    for q in [0.25, 0.5, 0.75] {
        let est = sf_empirical(&spec, 16, q, 100, 7).unwrap();
        let bound = sf_bound(&spec, 16, q).unwrap();
        c.add(
            format!("q = {q}"),
            !est.adjusted && est.mean <= bound + 3.0 * est.std_error,
            format!("mean {:.3} (se {:.3}) vs bound {bound:.3}", est.mean, est.std_error),
        );
    }
}

fn enumeration_engine(c: &mut Checks) {
    let mut specs: Vec<(String, MixtureSpec)> = (2..=4).map(|p| (format!("pure:{p}"), pure(p))).collect();
    specs.push(("2:0.5,3:1".into(), MixtureSpec::new([(2, 0.5), (3, 1.0)]).unwrap()));
    specs.push(("2:1,4:0.5".into(), MixtureSpec::new([(2, 1.0), (4, 0.5)]).unwrap()));
    let mut worst = 0.0f64;
    let mut cases = 0;
    for (_, spec) in &specs {
        for n in [4, 8, 12, 16] {
            let g = sample_null(n, spec, derive_seed(8, &[n as u64])).unwrap();
            worst = worst.max(enumerate(&g).unwrap().spot_check(&g, 64, n as u64));
            cases += 1;
        }
    }
    let names: Vec<&str> = specs.iter().map(|(s, _)| s.as_str()).collect();
    c.add(
        "Gray code vs direct",
        worst <= 1e-8,
        format!(
            "max relative error {worst:.2e} over {cases} tables (N = 4, 8, 12, 16; {})",
            names.join(" ")
        ),
    );

    let g = sample_null(18, &pure(3), 5).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| enumerate(&g).unwrap())
    };
    let bytes = |t: &EnergyTable| {
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        buf
    };
    let one = bytes(&run(1));
    let same = [4, 8].iter().all(|&w| bytes(&run(w)) == one);
    c.add(
        "byte-identical across workers",
        same,
        "N = 18 table file with 1, 4 and 8 workers",
    );

    let start = Instant::now();
    let t = enumerate(&sample_null(20, &pure(3), 1).unwrap()).unwrap();
    let elapsed = start.elapsed();
    c.add(
        "N = 20 full enumeration",
        t.len() == 1 << 20 && elapsed <= Duration::from_secs(120),
        format!("{:.2} s", elapsed.as_secs_f64()),
    );
}

fn shattering_structure(c: &mut Checks) {
    let n = 18;
    let bands = [(0.06, 0.2), (0.05, 0.2)];
    let betas = [1.0, 1.1, 1.2];
    let (mut partition, mut shell, mut diam, mut sep, mut union) = (true, true, true, true, true);
    let (mut points, mut multi) = (0, 0);
    for s in 0..50u64 {
        let (r, big_r) = bands[s as usize % 2];
        let band = OgpBand::from_radii(r, big_r, 0.1, 0.1).unwrap();
        assert!(band.r < band.big_r / 3.0);
        let params = ShatterParams::new(betas[s as usize % 3], 0.5, band).unwrap();
        let t = enumerate(&sample_null(n, &pure(3), derive_seed(9, &[s])).unwrap()).unwrap();
        let reg = regular_set(&t, &params);
        let dec = build_clusters(&reg.regular, &band).unwrap();
        let rep = verify_decomposition(&dec, &t, &reg, &params).unwrap();

        let mut seen = ConfigSet::empty(n);
        let mut total = 0;
        for cl in &dec.clusters {
            for &x in &cl.members {
                partition &= !seen.contains(x);
                seen.insert(x);
            }
            total += cl.members.len();
        }
        partition &= seen == reg.regular && total == reg.regular.len();

        let (rn, big_rn) = (band.r * n as f64, band.big_r * n as f64);
        let label: Vec<(Config, usize)> = dec
            .clusters
            .iter()
            .enumerate()
            .flat_map(|(i, cl)| cl.members.iter().map(move |&x| (x, i)))
            .collect();
        for (a, &(x, cx)) in label.iter().enumerate() {
            for &(y, cy) in &label[a + 1..] {
                let d = f64::from(spins::distance(x, y));
                shell &= !(d > rn && d <= big_rn);
                if cx == cy {
                    diam &= d <= rn;
                } else {
                    sep &= d > big_rn;
                }
            }
        }
        union &= rep.complement.union_bound_holds && rep.coverage <= 1.0 + 1e-12 && rep.anomalies.is_empty();
        points += reg.regular.len();
        multi += usize::from(dec.clusters.len() >= 2);
    }
    c.add("clusters partition S_reg", partition, "50 seeds");
    c.add("no S_reg pair in (r, R]", shell, "all pairs checked directly");
    c.add("cluster diameters <= rN", diam, "");
    c.add("inter-cluster distances > RN", sep, "");
    c.add("coverage and union bound", union, "");
    c.add(
        "coverage of the check",
        true,
        format!("{points} regular points in total; {multi} seeds with two or more clusters"),
    );
}

fn gibbs_facts(c: &mut Checks) {
    let spec = pure(3);
    let mut worst = 0.0f64;
    for (s, beta) in [(1u64, 0.0), (2, 0.5), (3, 1.5), (4, 4.0)] {
        let t = enumerate(&sample_null(16, &spec, s).unwrap()).unwrap();
        let ens = GibbsEnsemble::new(&t, beta).unwrap();
        let total: f64 = ens.log_weights().iter().map(|w| w.exp()).sum();
        worst = worst.max((total - 1.0).abs());
    }
    c.add("normalization", worst <= 1e-12, format!("max |sum - 1| = {worst:.1e}"));

    let (n, beta) = (20, 0.5);
    let free: Vec<f64> = (0..20)
        .map(|s| {
            let t = enumerate(&sample_null(n, &spec, derive_seed(10, &[s])).unwrap()).unwrap();
            log_partition(&t, beta).unwrap() / n as f64
        })
        .collect();
    let mean = free.iter().sum::<f64>() / free.len() as f64;
    let annealed = 0.5 * beta * beta * spec.value(1.0) + std::f64::consts::LN_2;
    c.close("free energy vs annealed", mean, annealed, 0.05);

    let n = 16;
    let mut overlaps = Vec::with_capacity(10_000);
    for s in 0..20u64 {
        let t = enumerate(&sample_null(n, &spec, derive_seed(11, &[s])).unwrap()).unwrap();
        let ens = GibbsEnsemble::new(&t, beta).unwrap();
        let a = gibbs_sample(&ens, 500, derive_seed(12, &[s, 0]));
        let b = gibbs_sample(&ens, 500, derive_seed(12, &[s, 1]));
        overlaps.extend(
            a.iter()
                .zip(&b)
                .map(|(&x, &y)| spins::overlap(x, y, n) as f64 / n as f64),
        );
    }
    let ov = MeanSe::of(&overlaps);
    c.add(
        "two-replica overlap",
        ov.mean.abs() <= 0.2,
        format!("mean {:.4} (se {:.4}) over {} pairs", ov.mean, ov.std_error, ov.count),
    );
}

fn chi_harness(c: &mut Checks) {
    let spec = pure(3);
    let taus: Vec<f64> = (0..=10).map(|i| f64::from(i) / 10.0).collect();
    let constant = chi_estimate(&baseline_constant(vec![1.0; 16]), 16, &spec, &taus, 50, 1).unwrap();
    c.add(
        "constant baseline",
        constant.estimates.iter().all(|&x| x == 1.0) && constant.std_errors.iter().all(|&x| x == 0.0),
        "chi = 1 with zero SE on 11 grid points",
    );
    let ratios = chi_ratios(&baseline_diagonal(0.2), 10, &spec, &[0.25, 0.5, 0.75], 1000, 2).unwrap();
    for r in &ratios {
        c.add(
            format!("diagonal ratio at tau = {}", r.tau),
            (r.ratio - (1.0 - r.tau)).abs() <= 3.0 * r.std_error,
            format!("{:.4} vs {} (se {:.4})", r.ratio, 1.0 - r.tau, r.std_error),
        );
    }
    let rep = chi_concentration_check(&negative_control(0.25), 40, &spec, 0.5, 100, &[0.05, 0.1, 0.2], 3).unwrap();
    let worst = rep
        .rows
        .iter()
        .map(|r| r.exceedance - r.bound)
        .fold(f64::NEG_INFINITY, f64::max);
    c.add(
        "negative control flagged",
        rep.applicable && rep.violated,
        format!("largest exceedance over the bound {worst:.3}"),
    );
}

fn exceptional_sets(c: &mut Checks) {
    let spec = pure(3);
    let band = OgpBand::new(0.3, 0.8, 0.1, 0.1, 0.1).unwrap();
    let cfg = SurveyConfig {
        n: 12,
        beta: 1.0,
        beta_prime: 0.8,
        replicas: 50,
        inner_replicas: 30,
        seed: 12,
    };
    let survey = exceptional_survey(&spec, &band, &tau_grid(8), &cfg).unwrap();
    let cs = [0.0, 0.05, 0.1, 0.3, 1.0];
    let implies = |a: &ExceptionalMass, b: &ExceptionalMass| a.members.iter().zip(&b.members).all(|(x, y)| !x || *y);
    let mut in_k = true;
    for &cc in &cs {
        for k in [1, 2, 4] {
            in_k &= implies(&survey.mass(k, cc).unwrap(), &survey.mass(2 * k, cc).unwrap());
        }
    }
    c.add("per-sample monotone in K", in_k, "K = 1, 2, 4, 8 at five values of c");
    let mut in_c = true;
    for k in [1, 2, 4, 8] {
        for w in cs.windows(2) {
            in_c &= implies(&survey.mass(k, w[0]).unwrap(), &survey.mass(k, w[1]).unwrap());
        }
    }
    let moved = cs
        .windows(2)
        .any(|w| survey.mass(4, w[0]).unwrap().mass < survey.mass(4, w[1]).unwrap().mass);
    c.add(
        "per-sample monotone in c",
        in_c,
        format!("nondecreasing, since the threshold e^(-cN/2) falls as c grows; mass at K = 4 varies with c: {moved}"),
    );

    let (n, beta, beta_prime, inner) = (12, 1.0, 0.8, 40);
    let range = distance_range(n, band.q_low, band.q_high, Window::Open);
    let mut probs = Vec::new();
    for s in 0..20u64 {
        let g = sample_null(n, &spec, derive_seed(120, &[s])).unwrap();
        let t = enumerate(&g).unwrap();
        let ens = GibbsEnsemble::new(&t, beta).unwrap();
        let mut sigma = gibbs_sample(&ens, 1, s)[0];
        if t.energy(sigma) < beta_prime * n as f64 {
            sigma = t.max().0;
        }
        let m = exceptional_membership(sigma, &g, beta_prime, &band, 1.0, 0.1, inner, derive_seed(121, &[s])).unwrap();
        probs.push(m.conditional_prob);
    }
    let coupled = MeanSe::of(&probs);
    let fresh = 800;
    let hits = (0..fresh as u64)
        .filter(|&r| {
            let g = sample_null(n, &spec, derive_seed(122, &[r])).unwrap();
            HighSet::new(&enumerate(&g).unwrap(), beta_prime * n as f64).witness(0, range)
        })
        .count();
    let p = hits as f64 / fresh as f64;
    let se = combined_se(coupled.std_error, bernoulli_se(p, fresh));
    c.add(
        "tau = 1 membership decoupled",
        (coupled.mean - p).abs() <= 3.0 * se,
        format!(
            "{:.4} over 20 pairs vs {p:.4} independent (combined se {se:.4})",
            coupled.mean
        ),
    );

    let rcfg = RarityConfig {
        n: 14,
        beta: 1.0,
        beta_prime: 0.8,
        k: 4,
        c: 0.1,
        replicas: 60,
        inner_replicas: 20,
        seed: 13,
    };
    let rep = rarity_report(&baseline_greedy(100).unwrap(), &spec, &band, &rcfg).unwrap();
    let worst = rep
        .split
        .iter()
        .map(|s| {
            let se = combined_se(s.first.std_error, s.second.std_error);
            if se > 0.0 {
                (s.first.estimate - s.second.estimate).abs() / se
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    c.add(
        "rarity split-sample consistency",
        rep.split_consistent,
        format!(
            "largest half-sample gap {worst:.2} combined SE over {} terms",
            rep.split.len()
        ),
    );
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            title: "golden constants",
            budget: Some(Duration::from_secs(1)),
            run: golden_constants,
        },
        Criterion {
            id: 2,
            title: "E_ALG quadrature",
            budget: Some(Duration::from_secs(1)),
            run: e_alg_quadrature,
        },
        Criterion {
            id: 3,
            title: "dual identity",
            budget: None,
            run: dual_identity,
        },
        Criterion {
            id: 4,
            title: "fixed-point solver",
            budget: Some(Duration::from_secs(60)),
            run: fixed_point_solver,
        },
        Criterion {
            id: 5,
            title: "disorder identities",
            budget: None,
            run: disorder_identities,
        },
        Criterion {
            id: 6,
            title: "likelihood ratio",
            budget: Some(Duration::from_secs(600)),
            run: likelihood_ratio,
        },
        Criterion {
            id: 7,
            title: "Sudakov-Fernique bound",
            budget: Some(Duration::from_secs(600)),
            run: sudakov_fernique,
        },
        Criterion {
            id: 8,
            title: "enumeration engine",
            budget: None,
            run: enumeration_engine,
        },
        Criterion {
            id: 9,
            title: "shattering construction",
            budget: None,
            run: shattering_structure,
        },
        Criterion {
            id: 10,
            title: "Gibbs facts",
            budget: None,
            run: gibbs_facts,
        },
        Criterion {
            id: 11,
            title: "chi harness",
            budget: None,
            run: chi_harness,
        },
        Criterion {
            id: 12,
            title: "exceptional sets",
            budget: None,
            run: exceptional_sets,
        },
    ];
    let mut passed = 0;
    for cr in &criteria {
        let mut checks = Checks::default();
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| (cr.run)(&mut checks)));
        let elapsed = start.elapsed();
        if let Err(e) = outcome {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            checks.add("panic", false, msg);
        }
        if let Some(b) = cr.budget {
            checks.add(
                "runtime",
                elapsed <= b,
                format!("{:.2} s of {} s", elapsed.as_secs_f64(), b.as_secs()),
            );
        }
        let ok = checks.0.iter().all(|c| c.pass);
        passed += usize::from(ok);
        println!(
            "{} criterion {:>2}: {} ({:.2} s)",
            if ok { "PASS" } else { "FAIL" },
            cr.id,
            cr.title,
            elapsed.as_secs_f64()
        );
        for ch in &checks.0 {
            let tag = if ch.pass { "ok  " } else { "FAIL" };
            if ch.detail.is_empty() {
                println!("    {tag} {}", ch.label);
            } else {
                println!("    {tag} {}: {}", ch.label, ch.detail);
            }
        }
    }
    println!("{passed} of {} criteria pass", criteria.len());
}
