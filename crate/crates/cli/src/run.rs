use std::fs::File;
use std::io::{BufReader, BufWriter, Write};

use serde::Serialize;
use serde_json::{json, Value};

use pspin::algolab::{
    chi_concentration_check, chi_estimate, grid_tau_select, rarity_report, AlgorithmSpec, RarityConfig,
};
use pspin::disorder::{sample_null, sample_planted, DisorderTensor};
use pspin::landscape::{enumerate, enumerate_capped, summarize};
use pspin::ogp::{
    exceptional_mass, sf_bound, sf_empirical, soft_ogp_estimate, tau1_probability, OgpMode, SoftOgpConfig, SurveyConfig,
};
use pspin::shattering::{shatter, ShatterParams};
use pspin::thresholds::{
    all_thresholds, bar_beta_d, bar_beta_d_spherical, beta_d_with, check_beta, e_alg, ogp_band_pure_p,
    threshold_report, BetaCheck, OgpBand, SolverSettings, ThresholdName,
};
use pspin::{spins, MixtureSpec};

use crate::args::*;
use crate::output::csv_rows;
use crate::CliError;

pub struct Outcome {
    pub json: Value,
    pub csv: Vec<u8>,
    pub warnings: Vec<String>,
}

fn to_json<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Internal(e.to_string()))
}

fn mixture(s: &str) -> Result<MixtureSpec, CliError> {
    Ok(s.parse::<MixtureSpec>()?)
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(format!("{}\n", msg.into()))
}

/// Warnings from the `beta_c` bounds; mixtures have no bounds to check.
fn beta_warnings(spec: &MixtureSpec, beta: f64, warnings: &mut Vec<String>) -> Result<(), CliError> {
    match spec.pure_degree() {
        Some(p) => match check_beta(beta, p)? {
            BetaCheck::BelowCritical => {}
            BetaCheck::Uncertain => warnings.push(format!(
                "beta = {beta} lies between the lower and upper bounds on beta_c for p = {p}"
            )),
            BetaCheck::Rejected => {
                warnings.push(format!("beta = {beta} exceeds the upper bound sqrt(2 ln 2) on beta_c"))
            }
        },
        None => warnings.push("no beta_c bounds for mixtures; beta not checked".into()),
    }
    Ok(())
}

fn pair(s: &str, what: &str) -> Result<(f64, Option<f64>), CliError> {
    let mut it = s.split(',').map(str::trim);
    let bad = || CliError::Invalid(format!("cannot parse {what} '{s}'"));
    let a = it.next().ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?;
    let b = it.next().map(|x| x.parse::<f64>().map_err(|_| bad())).transpose()?;
    if it.next().is_some() {
        return Err(bad());
    }
    Ok((a, b))
}

fn auto_band(
    s: &str,
    default_eps_prime: Option<f64>,
    rate: f64,
    spec: &MixtureSpec,
    warnings: &mut Vec<String>,
) -> Result<(OgpBand, Value), CliError> {
    let (p, e) = pair(s, "auto band")?;
    if p.fract() != 0.0 || p < 3.0 {
        return Err(CliError::Invalid(format!(
            "auto band degree must be an integer >= 3, got {p}"
        )));
    }
    let eps_prime = e
        .or(default_eps_prime)
        .ok_or_else(|| usage("--auto-band needs p,eps'"))?;
    let p = p as u32;
    if spec.pure_degree() != Some(p) {
        warnings.push(format!("auto band built for pure p = {p}, mixture is {spec}"));
    }
    let cons = ogp_band_pure_p(p, eps_prime, rate)?;
    let echo = to_json(&cons)?;
    match cons.band {
        Some(b) => Ok((b, echo)),
        None => Err(CliError::Invalid(format!(
            "band construction infeasible for p = {p}, eps' = {eps_prime}: {}",
            cons.notes.join("; ")
        ))),
    }
}

fn overlap_band(b: &BandArgs, spec: &MixtureSpec, warnings: &mut Vec<String>) -> Result<OgpBand, CliError> {
    if let Some(s) = &b.auto_band {
        return Ok(auto_band(s, None, b.rate, spec, warnings)?.0);
    }
    match (b.q_low, b.q_high) {
        (Some(lo), Some(hi)) => Ok(OgpBand::from_window(lo, hi, b.band_eps, b.rate)?),
        _ => Err(usage("an overlap band needs --q-low and --q-high, or --auto-band")),
    }
}

pub fn run(cmd: &Command, format: Format) -> Result<Outcome, CliError> {
    match cmd {
        Command::Thresholds(a) => thresholds(a, format),
        Command::Disorder(DisorderCommand::Dump(a)) => dump(a),
        Command::Disorder(DisorderCommand::Load(a)) => load(a),
        Command::Enumerate(a) => enumerate_cmd(a),
        Command::Shatter(a) => shatter_cmd(a),
        Command::Ogp(a) => ogp(a),
        Command::Chi(a) => chi(a),
        Command::Rarity(a) => rarity(a),
    }
}

#[derive(Serialize)]
struct ThresholdRow {
    p: String,
    beta_d: f64,
    bar_beta_d: f64,
    bar_beta_d_sph: f64,
    e_alg: f64,
}

fn threshold_row(label: String, spec: &MixtureSpec, settings: &SolverSettings) -> Result<ThresholdRow, CliError> {
    Ok(ThresholdRow {
        p: label,
        beta_d: beta_d_with(spec, *settings)?.value(),
        bar_beta_d: bar_beta_d(spec)?.value(),
        bar_beta_d_sph: bar_beta_d_spherical(spec)?.value(),
        e_alg: e_alg(spec, settings.quad_tol)?,
    })
}

fn thresholds(a: &ThresholdsArgs, format: Format) -> Result<Outcome, CliError> {
    let spec = mixture(&a.mixture)?;
    let settings = SolverSettings {
        beta_tol: a.tol,
        ..SolverSettings::default()
    };
    let sweep_specs = a
        .sweep
        .iter()
        .map(|&p| Ok((p, MixtureSpec::pure(p)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    if format == Format::Csv {
        let rows = if sweep_specs.is_empty() {
            vec![threshold_row(spec.to_string(), &spec, &settings)?]
        } else {
            sweep_specs
                .iter()
                .map(|(p, s)| threshold_row(p.to_string(), s, &settings))
                .collect::<Result<Vec<_>, _>>()?
        };
        return Ok(Outcome {
            json: Value::Null,
            csv: csv_rows(&rows)?,
            warnings: Vec::new(),
        });
    }
    let reports = if a.which.trim() == "all" {
        all_thresholds(&spec, &settings)?
    } else {
        a.which
            .split(',')
            .map(|n| {
                let name: ThresholdName = n.trim().parse()?;
                Ok(threshold_report(&spec, name, &settings)?)
            })
            .collect::<Result<Vec<_>, CliError>>()?
    };
    let sweep = sweep_specs
        .iter()
        .map(|(p, s)| threshold_row(p.to_string(), s, &settings))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Outcome {
        json: json!({ "mixture": spec.to_string(), "reports": to_json(&reports)?, "sweep": to_json(&sweep)? }),
        csv: Vec::new(),
        warnings: Vec::new(),
    })
}

#[derive(Serialize)]
struct DisorderRow {
    n: usize,
    mixture: String,
    seed: u64,
    kind: String,
    couplings: usize,
    energy_all_plus: f64,
}

fn disorder_row(g: &DisorderTensor) -> Result<DisorderRow, CliError> {
    Ok(DisorderRow {
        n: g.n(),
        mixture: g.spec().to_string(),
        seed: g.seed(),
        kind: to_json(&g.kind())?.as_str().unwrap_or_default().to_string(),
        couplings: g.len(),
        energy_all_plus: g.energy(&vec![1.0; g.n()]),
    })
}

fn dump(a: &DumpArgs) -> Result<Outcome, CliError> {
    let spec = mixture(&a.mixture)?;
    let (g, star) = match a.planted_beta {
        Some(beta) => {
            let inst = sample_planted(a.n, &spec, beta, a.seed)?;
            (inst.g, Some(inst.sigma_star))
        }
        None => (sample_null(a.n, &spec, a.seed)?, None),
    };
    let file = File::create(&a.out).map_err(|e| CliError::Io(format!("{}: {e}", a.out.display())))?;
    let mut w = BufWriter::new(file);
    g.write_to(&mut w)?;
    w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    let row = disorder_row(&g)?;
    let mut json = to_json(&row)?;
    json["path"] = json!(a.out.display().to_string());
    if let Some(s) = &star {
        json["sigma_star"] = to_json(s)?;
    }
    Ok(Outcome {
        json,
        csv: csv_rows(&[row])?,
        warnings: Vec::new(),
    })
}

fn load(a: &LoadArgs) -> Result<Outcome, CliError> {
    let file = File::open(&a.input).map_err(|e| CliError::Io(format!("{}: {e}", a.input.display())))?;
    let g = DisorderTensor::read_from(BufReader::new(file), a.max_couplings)?;
    let row = disorder_row(&g)?;
    Ok(Outcome {
        json: to_json(&row)?,
        csv: csv_rows(&[row])?,
        warnings: Vec::new(),
    })
}

fn enumerate_cmd(a: &EnumerateArgs) -> Result<Outcome, CliError> {
    let spec = mixture(&a.mixture)?;
    let mut warnings = Vec::new();
    beta_warnings(&spec, a.beta, &mut warnings)?;
    if a.n > a.max_n {
        return Err(CliError::Resource(format!(
            "N = {} exceeds the enumeration cap {}",
            a.n, a.max_n
        )));
    }
    let g = sample_null(a.n, &spec, a.seed)?;
    let table = enumerate_capped(&g, a.max_n)?;
    let summary = summarize(&table, a.beta, a.eps)?;
    let (argmax, max_energy) = table.max();
    let spot = table.spot_check(&g, a.spot_checks, a.seed);
    if let Some(path) = &a.out {
        let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        table.write_to(&mut w)?;
        w.flush().map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(Outcome {
        json: json!({
            "summary": to_json(&summary)?,
            "argmax": argmax,
            "argmax_spins": spins::decode(argmax, a.n),
            "max_energy": max_energy,
            "spot_check_max_rel_error": spot,
            "table": a.out.as_ref().map(|p| p.display().to_string()),
        }),
        csv: csv_rows(&[summary])?,
        warnings,
    })
}

fn shatter_cmd(a: &ShatterArgs) -> Result<Outcome, CliError> {
    let spec = mixture(&a.mixture)?;
    let mut warnings = Vec::new();
    beta_warnings(&spec, a.beta, &mut warnings)?;
    let (band, construction) = match (&a.band, &a.auto_band) {
        (Some(s), _) => {
            let (r, big_r) = pair(s, "band")?;
            let big_r = big_r.ok_or_else(|| CliError::Invalid("--band needs r,R".into()))?;
            (OgpBand::from_radii(r, big_r, a.eps, a.rate)?, Value::Null)
        }
        (None, Some(s)) => auto_band(s, Some(a.eps_prime), a.rate, &spec, &mut warnings)?,
        (None, None) => return Err(usage("shatter needs --band or --auto-band")),
    };
    if !band.full_separation() {
        warnings.push("r >= R/3: only the most-pairs separation statistic applies".into());
    }
    let g = sample_null(a.n, &spec, a.seed)?;
    let table = enumerate(&g)?;
    let report = shatter(&table, &ShatterParams::new(a.beta, a.eps, band)?)?;
    warnings.extend(report.anomalies.iter().cloned());
    Ok(Outcome {
        json: json!({ "band": to_json(&band)?, "construction": construction, "report": to_json(&report)? }),
        csv: csv_rows(&report.clusters)?,
        warnings,
    })
}

#[derive(Serialize)]
struct OgpRow {
    tau: Option<f64>,
    q_low: f64,
    q_high: f64,
    estimate: f64,
    std_error: f64,
    replicas: usize,
    bound: Option<f64>,
}

fn ogp(a: &OgpArgs) -> Result<Outcome, CliError> {
    let spec = mixture(&a.mixture)?;
    let mut warnings = Vec::new();
    let need_beta = || {
        a.beta
            .ok_or_else(|| usage(format!("--beta is required for mode {:?}", a.mode).to_lowercase()))
    };
    let (rows, detail) = match a.mode {
        OgpModeArg::Sf => {
            if a.q.is_empty() {
                return Err(usage("mode sf needs --q"));
            }
            let mut rows = Vec::new();
            let mut detail = Vec::new();
            for &q in &a.q {
                let est = sf_empirical(&spec, a.n, q, a.replicas, a.seed)?;
                let bound = if q < 1.0 { Some(sf_bound(&spec, a.n, q)?) } else { None };
                if est.adjusted {
                    warnings.push(format!("q = {q} is off the parity grid; used {}", est.q_used));
                }
                rows.push(OgpRow {
                    tau: None,
                    q_low: est.q_used,
                    q_high: est.q_used,
                    estimate: est.mean,
                    std_error: est.std_error,
                    replicas: est.replicas,
                    bound,
                });
                detail.push(to_json(&est)?);
            }
            (rows, Value::Array(detail))
        }
        OgpModeArg::Soft => {
            let beta = need_beta()?;
            beta_warnings(&spec, beta, &mut warnings)?;
            let band = overlap_band(&a.band, &spec, &mut warnings)?;
            let mode = match a.model {
                ModelArg::Null => OgpMode::NullModel,
                ModelArg::Planted => OgpMode::PlantedModel,
            };
            let mut rows = Vec::new();
            let mut detail = Vec::new();
            for &tau in &a.tau {
                let cfg = SoftOgpConfig {
                    mode,
                    n: a.n,
                    beta,
                    beta_prime: a.beta_prime.unwrap_or(beta),
                    tau,
                    outer_replicas: a.replicas,
                    inner_samples: a.inner_samples,
                    seed: a.seed,
                };
                let est = soft_ogp_estimate(&spec, &band, &cfg)?;
                warnings.extend(est.warnings.iter().cloned());
                rows.push(OgpRow {
                    tau: Some(tau),
                    q_low: band.q_low,
                    q_high: band.q_high,
                    estimate: est.estimate,
                    std_error: est.std_error,
                    replicas: est.replicas,
                    bound: None,
                });
                detail.push(to_json(&est)?);
            }
            (rows, Value::Array(detail))
        }
        OgpModeArg::Tau1 => {
            let beta = need_beta()?;
            let q_low = a.band.q_low.ok_or_else(|| usage("mode tau1 needs --q-low"))?;
            let est = tau1_probability(a.n, &spec, beta, q_low, a.replicas, a.seed)?;
            let row = OgpRow {
                tau: Some(1.0),
                q_low,
                q_high: 1.0,
                estimate: est.estimate,
                std_error: est.std_error,
                replicas: est.replicas,
                bound: None,
            };
            (vec![row], to_json(&est)?)
        }
        OgpModeArg::Exceptional => {
            let beta = need_beta()?;
            beta_warnings(&spec, beta, &mut warnings)?;
            let band = overlap_band(&a.band, &spec, &mut warnings)?;
            let cfg = SurveyConfig {
                n: a.n,
                beta,
                beta_prime: a.beta_prime.unwrap_or(beta),
                replicas: a.replicas,
                inner_replicas: a.inner_replicas,
                seed: a.seed,
            };
            let mass = exceptional_mass(&spec, &band, a.grid_k, a.rate_c, &cfg)?;
            if mass.indeterminate > 0 {
                warnings.push(format!(
                    "{} of {} samples had a membership within 2 SE of the threshold",
                    mass.indeterminate, mass.replicas
                ));
            }
            let row = OgpRow {
                tau: None,
                q_low: band.q_low,
                q_high: band.q_high,
                estimate: mass.mass,
                std_error: mass.std_error,
                replicas: mass.replicas,
                bound: None,
            };
            (vec![row], to_json(&mass)?)
        }
    };
    Ok(Outcome {
        json: json!({ "mode": to_json(&a.mode)?, "rows": to_json(&rows)?, "detail": detail }),
        csv: csv_rows(&rows)?,
        warnings,
    })
}

#[derive(Serialize)]
struct ChiRow {
    tau: f64,
    chi: f64,
    se: f64,
}

fn chi(a: &ChiArgs) -> Result<Outcome, CliError> {
    let spec = mixture(&a.mixture)?;
    let alg = a.algorithm.parse::<AlgorithmSpec>()?.build(a.n)?;
    let curve = chi_estimate(alg.as_ref(), a.n, &spec, &a.tau, a.replicas, a.seed)?;
    let mut json = json!({ "curve": to_json(&curve)? });
    let mut warnings = Vec::new();
    if let Some(tau) = a.concentration_tau {
        let rep = chi_concentration_check(alg.as_ref(), a.n, &spec, tau, a.replicas, &a.t_grid, a.seed)?;
        if rep.violated {
            warnings.push(format!("{} violates its claimed concentration bound", rep.algorithm));
        }
        if !rep.applicable {
            warnings.push("no claimed Lipschitz constant: concentration rows are descriptive".into());
        }
        json["concentration"] = to_json(&rep)?;
    }
    if a.select {
        let (lo, hi) = a
            .q_low
            .zip(a.q_high)
            .ok_or_else(|| usage("--select needs --q-low and --q-high"))?;
        let band = OgpBand::from_window(lo, hi, 0.1, pspin::thresholds::DEFAULT_RATE)?;
        let delta = a.delta.unwrap_or(band.delta);
        let l = match a.lipschitz.or(alg.lipschitz().value()) {
            Some(l) => l,
            None => {
                return Err(CliError::Invalid(format!(
                    "{} claims no Lipschitz constant; pass --lipschitz",
                    alg.name()
                )))
            }
        };
        json["selection"] = to_json(&grid_tau_select(&curve, &band, delta, l)?)?;
    }
    let rows: Vec<ChiRow> = curve
        .taus
        .iter()
        .zip(&curve.estimates)
        .zip(&curve.std_errors)
        .map(|((&tau, &chi), &se)| ChiRow { tau, chi, se })
        .collect();
    Ok(Outcome {
        json,
        csv: csv_rows(&rows)?,
        warnings,
    })
}

fn rarity(a: &RarityArgs) -> Result<Outcome, CliError> {
    let spec = mixture(&a.mixture)?;
    let mut warnings = Vec::new();
    beta_warnings(&spec, a.beta, &mut warnings)?;
    let band = overlap_band(&a.band, &spec, &mut warnings)?;
    let alg = a.algorithm.parse::<AlgorithmSpec>()?.build(a.n)?;
    let cfg = RarityConfig {
        n: a.n,
        beta: a.beta,
        beta_prime: a.beta_prime.unwrap_or(a.beta),
        k: a.grid_k,
        c: a.rate_c,
        replicas: a.replicas,
        inner_replicas: a.inner_replicas,
        seed: a.seed,
    };
    let report = rarity_report(alg.as_ref(), &spec, &band, &cfg)?;
    if !report.split_consistent {
        warnings.push("split halves disagree beyond 3 combined SE".into());
    }
    Ok(Outcome {
        json: to_json(&report)?,
        csv: csv_rows(&report.rows)?,
        warnings,
    })
}
