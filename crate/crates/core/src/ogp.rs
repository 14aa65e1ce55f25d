//! Monte Carlo probes of the overlap gap around typical points: the
//! Sudakov–Fernique slice bound, the soft-OGP event probability, the
//! `tau = 1` decoupled event, and the exceptional sets `E_tau(G)`.
//!
//! Every inner existence test is an exact scan of a full energy table, so
//! all reported standard errors come from the outer sampling only.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{interpolate, sample_null, sample_planted, DisorderTensor};
use crate::error::{Error, Result};
use crate::landscape::{enumerate, gibbs_sample, slice_max, EnergyTable, GibbsEnsemble};
use crate::mixture::MixtureSpec;
use crate::numerics::{normal_pdf, normal_upper_quantile};
use crate::rng::derive_seed;
use crate::spins::{self, Config};
use crate::stats::{bernoulli_se, MeanSe};
use crate::thresholds::OgpBand;

const SLACK: f64 = 1e-9;

/// `2 sqrt(xi'(1)) N phi(Phi^{-1}((1+q)/2))`, the bound on the expected
/// maximum of `H` over an overlap-`q` slice.
pub fn sf_bound(spec: &MixtureSpec, n: usize, q: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::Domain(format!("q = {q} outside [0, 1)")));
    }
    let h = normal_upper_quantile(0.5 * (1.0 - q));
    Ok(2.0 * spec.d1(1.0).sqrt() * n as f64 * normal_pdf(h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SfEstimate {
    pub q: f64,
    /// Overlap of the slice actually scanned.
    pub q_used: f64,
    pub adjusted: bool,
    /// Mean of `max H` over the slice around the all-plus configuration.
    pub mean: f64,
    pub std_error: f64,
    pub replicas: usize,
}

/// Monte Carlo estimate of `E max{H(sigma') : <1, sigma'> = N q}` over
/// i.i.d. disorder.
pub fn sf_empirical(spec: &MixtureSpec, n: usize, q: f64, replicas: usize, seed: u64) -> Result<SfEstimate> {
    sf_empirical_with(n, q, replicas, |r| sample_null(n, spec, derive_seed(seed, &[r as u64])))
}

/// As [`sf_empirical`] with caller-supplied disorder per replica.
pub fn sf_empirical_with(
    n: usize,
    q: f64,
    replicas: usize,
    disorder: impl Fn(usize) -> Result<DisorderTensor> + Sync,
) -> Result<SfEstimate> {
    if replicas == 0 {
        return Err(Error::Domain("need at least one replica".into()));
    }
    let slices = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let g = disorder(r)?;
            if g.n() != n {
                return Err(Error::Incompatible(format!("replica {r} has N = {}", g.n())));
            }
            slice_max(&enumerate(&g)?, 0, q)
        })
        .collect::<Result<Vec<_>>>()?;
    let maxima: Vec<f64> = slices.iter().map(|s| s.value * n as f64).collect();
    let used = (slices[0].q_used, slices[0].adjusted);
    let m = MeanSe::of(&maxima);
    Ok(SfEstimate {
        q,
        q_used: used.0,
        adjusted: used.1,
        mean: m.mean,
        std_error: m.std_error,
        replicas,
    })
}

/// Whether the overlap window includes its endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    Closed,
    Open,
}

/// Hamming distances `d` with `N - 2d` inside the window, as an inclusive
/// range, or `None` when no feasible overlap falls inside.
pub fn distance_range(n: usize, q_low: f64, q_high: f64, window: Window) -> Option<(u32, u32)> {
    let nf = n as f64;
    let near = 0.5 * nf * (1.0 - q_high);
    let far = 0.5 * nf * (1.0 - q_low);
    let (lo, hi) = match window {
        Window::Closed => ((near - SLACK).ceil(), (far + SLACK).floor()),
        Window::Open => ((near + SLACK).floor() + 1.0, (far - SLACK).ceil() - 1.0),
    };
    let lo = lo.max(0.0);
    let hi = hi.min(nf);
    (lo <= hi).then_some((lo as u32, hi as u32))
}

/// Points of a table at or above an energy level.
#[derive(Debug, Clone)]
pub struct HighSet {
    points: Vec<Config>,
}

impl HighSet {
    /// `S = {H >= level}`; `level = -inf` keeps everything.
    pub fn new(table: &EnergyTable, level: f64) -> Self {
        Self {
            points: (0..table.len() as Config)
                .filter(|&x| table.energy(x) >= level)
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Some point at Hamming distance within `range` of `x`.
    pub fn witness(&self, x: Config, range: Option<(u32, u32)>) -> bool {
        match range {
            None => false,
            Some((lo, hi)) => self.points.iter().any(|&y| {
                let d = spins::distance(x, y);
                d >= lo && d <= hi
            }),
        }
    }

    /// Largest overlap `N - 2d` with `x`, if any point exists.
    pub fn max_overlap(&self, x: Config, n: usize) -> Option<i64> {
        self.points.iter().map(|&y| spins::overlap(x, y, n)).max()
    }
}

/// `beta' xi(1) N`.
fn level(spec: &MixtureSpec, n: usize, beta_prime: f64) -> f64 {
    if beta_prime == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        beta_prime * spec.value(1.0) * n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OgpMode {
    /// `G` i.i.d., `sigma ~ mu_{beta, G}`.
    NullModel,
    /// `(G, sigma)` from the planted law.
    PlantedModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftOgpEstimate {
    pub mode: OgpMode,
    pub tau: f64,
    pub band: OgpBand,
    pub beta: f64,
    pub beta_prime: f64,
    /// Probability that a witness exists in `S_{beta'}(G_tau)` with overlap
    /// in the closed window `[q_low, q_high]`.
    pub estimate: f64,
    pub std_error: f64,
    pub replicas: usize,
    pub inner_samples: usize,
    /// Per outer replica: fraction of its configurations with a witness.
    pub per_replica: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct SoftOgpConfig {
    pub mode: OgpMode,
    pub n: usize,
    pub beta: f64,
    pub beta_prime: f64,
    pub tau: f64,
    pub outer_replicas: usize,
    /// Configurations tested per outer replica.
    pub inner_samples: usize,
    pub seed: u64,
}

/// Monte Carlo estimate of the soft-OGP event probability.
pub fn soft_ogp_estimate(spec: &MixtureSpec, band: &OgpBand, cfg: &SoftOgpConfig) -> Result<SoftOgpEstimate> {
    if cfg.beta_prime > cfg.beta {
        return Err(Error::Domain(format!(
            "beta' = {} must not exceed beta = {}",
            cfg.beta_prime, cfg.beta
        )));
    }
    if !(0.0..=1.0).contains(&cfg.tau) {
        return Err(Error::Domain(format!("tau = {} outside [0, 1]", cfg.tau)));
    }
    if cfg.outer_replicas == 0 || cfg.inner_samples == 0 {
        return Err(Error::Domain("need at least one outer replica and one sample".into()));
    }
    let n = cfg.n;
    let range = distance_range(n, band.q_low, band.q_high, Window::Closed);
    let mut warnings = Vec::new();
    if range.is_none() {
        warnings.push(format!(
            "no overlap of the form 1 - 2d/{n} lies in [{}, {}]; the event is empty",
            band.q_low, band.q_high
        ));
    }
    let lvl = level(spec, n, cfg.beta_prime);
    let per_replica = (0..cfg.outer_replicas as u64)
        .into_par_iter()
        .map(|r| soft_ogp_replica(spec, cfg, r, range, lvl))
        .collect::<Result<Vec<f64>>>()?;
    let m = MeanSe::of(&per_replica);
    Ok(SoftOgpEstimate {
        mode: cfg.mode,
        tau: cfg.tau,
        band: *band,
        beta: cfg.beta,
        beta_prime: cfg.beta_prime,
        estimate: m.mean,
        std_error: m.std_error,
        replicas: cfg.outer_replicas,
        inner_samples: cfg.inner_samples,
        per_replica,
        warnings,
    })
}

fn soft_ogp_replica(
    spec: &MixtureSpec,
    cfg: &SoftOgpConfig,
    r: u64,
    range: Option<(u32, u32)>,
    lvl: f64,
) -> Result<f64> {
    let n = cfg.n;
    let (g, mut sigmas) = match cfg.mode {
        OgpMode::NullModel => (sample_null(n, spec, derive_seed(cfg.seed, &[r, 0]))?, Vec::new()),
        OgpMode::PlantedModel => {
            let inst = sample_planted(n, spec, cfg.beta, derive_seed(cfg.seed, &[r, 3]))?;
            let star = spins::encode(&inst.sigma_star);
            (inst.g, vec![star])
        }
    };
    if range.is_none() {
        return Ok(0.0);
    }
    let missing = cfg.inner_samples - sigmas.len();
    if missing > 0 {
        let table = enumerate(&g)?;
        let ens = GibbsEnsemble::new(&table, cfg.beta)?;
        sigmas.extend(gibbs_sample(&ens, missing, derive_seed(cfg.seed, &[r, 2])));
    }
    let g_prime = sample_null(n, spec, derive_seed(cfg.seed, &[r, 1]))?;
    let g_tau = interpolate(&g, &g_prime, cfg.tau)?;
    let high = HighSet::new(&enumerate(&g_tau)?, lvl);
    let hits = sigmas.iter().filter(|&&x| high.witness(x, range)).count();
    Ok(hits as f64 / sigmas.len() as f64)
}

/// `P(exists sigma' in S_beta(G') with <1, sigma'>/N >= q_low)` over fresh
/// disorder, stored through the per-replica maximal overlap so that any
/// `q_low` can be read off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tau1Estimate {
    pub q_low: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub replicas: usize,
    /// Largest overlap `N - 2d` with the all-plus configuration inside
    /// `S_beta(G')`, `None` when that set is empty.
    pub max_overlaps: Vec<Option<i64>>,
    pub n: usize,
}

impl Tau1Estimate {
    /// Estimate at another threshold from the same replicas.
    pub fn at(&self, q_low: f64) -> (f64, f64) {
        let need = self.n as f64 * q_low - SLACK;
        let hits = self
            .max_overlaps
            .iter()
            .filter(|m| m.is_some_and(|o| o as f64 >= need))
            .count();
        let p = hits as f64 / self.replicas as f64;
        (p, bernoulli_se(p, self.replicas))
    }
}

pub fn tau1_probability(
    n: usize,
    spec: &MixtureSpec,
    beta: f64,
    q_low: f64,
    replicas: usize,
    seed: u64,
) -> Result<Tau1Estimate> {
    if replicas == 0 {
        return Err(Error::Domain("need at least one replica".into()));
    }
    let lvl = level(spec, n, beta);
    let max_overlaps = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let g = sample_null(n, spec, derive_seed(seed, &[r]))?;
            Ok(HighSet::new(&enumerate(&g)?, lvl).max_overlap(0, n))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut est = Tau1Estimate {
        q_low,
        estimate: 0.0,
        std_error: 0.0,
        replicas,
        max_overlaps,
        n,
    };
    (est.estimate, est.std_error) = est.at(q_low);
    Ok(est)
}

/// Conditional witness count for one `(G, sigma, tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessCount {
    /// `sigma` lies in `S_{beta'}(G)`.
    pub in_domain: bool,
    pub hits: usize,
    pub inner_replicas: usize,
}

impl WitnessCount {
    pub fn probability(&self) -> f64 {
        if self.inner_replicas == 0 {
            0.0
        } else {
            self.hits as f64 / self.inner_replicas as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub in_domain: bool,
    pub member: bool,
    /// Estimate within two standard errors of the threshold.
    pub indeterminate: bool,
    pub conditional_prob: f64,
    pub std_error: f64,
    /// `exp(-c N / 2)`.
    pub threshold: f64,
    pub hits: usize,
    pub inner_replicas: usize,
}

impl Membership {
    pub fn classify(count: WitnessCount, n: usize, c: f64) -> Self {
        let threshold = (-0.5 * c * n as f64).exp();
        let p = count.probability();
        let se = bernoulli_se(p, count.inner_replicas);
        let member = count.in_domain && p >= threshold;
        Self {
            in_domain: count.in_domain,
            member,
            indeterminate: count.in_domain && se > 0.0 && (p - threshold).abs() < 2.0 * se,
            conditional_prob: p,
            std_error: se,
            threshold,
            hits: count.hits,
            inner_replicas: count.inner_replicas,
        }
    }
}

/// Counts inner replicas `G'` for which `S_{beta'}(G_tau)` has a point at
/// overlap with `sigma` strictly inside `(q_low, q_high)`.
pub fn witness_count(
    sigma: Config,
    g: &DisorderTensor,
    beta_prime: f64,
    band: &OgpBand,
    tau: f64,
    inner_replicas: usize,
    seed: u64,
) -> Result<WitnessCount> {
    Ok(witness_counts(&[sigma], g, beta_prime, band, tau, inner_replicas, seed)?[0])
}

/// [`witness_count`] for several configurations sharing the same inner
/// replicas.
pub fn witness_counts(
    sigmas: &[Config],
    g: &DisorderTensor,
    beta_prime: f64,
    band: &OgpBand,
    tau: f64,
    inner_replicas: usize,
    seed: u64,
) -> Result<Vec<WitnessCount>> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Domain(format!("tau = {tau} outside [0, 1]")));
    }
    let n = g.n();
    let lvl = level(g.spec(), n, beta_prime);
    let mut counts: Vec<WitnessCount> = sigmas
        .iter()
        .map(|&x| WitnessCount {
            in_domain: g.energy(&spins::decode(x, n)) >= lvl,
            hits: 0,
            inner_replicas,
        })
        .collect();
    let range = distance_range(n, band.q_low, band.q_high, Window::Open);
    if range.is_none() || counts.iter().all(|c| !c.in_domain) {
        return Ok(counts);
    }
    let mut tally = |high: &HighSet, times: usize| {
        for (c, &x) in counts.iter_mut().zip(sigmas) {
            if c.in_domain && high.witness(x, range) {
                c.hits += times;
            }
        }
    };
    if tau == 0.0 {
        // G_0 = G whatever G' is.
        tally(&HighSet::new(&enumerate(g)?, lvl), inner_replicas);
    } else {
        for j in 0..inner_replicas {
            let g_prime = sample_null(n, g.spec(), derive_seed(seed, &[j as u64]))?;
            let g_tau = interpolate(g, &g_prime, tau)?;
            tally(&HighSet::new(&enumerate(&g_tau)?, lvl), 1);
        }
    }
    Ok(counts)
}

/// Membership of `sigma` in `E_tau(G)`.
#[allow(clippy::too_many_arguments)]
pub fn exceptional_membership(
    sigma: Config,
    g: &DisorderTensor,
    beta_prime: f64,
    band: &OgpBand,
    tau: f64,
    c: f64,
    inner_replicas: usize,
    seed: u64,
) -> Result<Membership> {
    if !(c >= 0.0) {
        return Err(Error::Domain(format!("rate c = {c} must be >= 0")));
    }
    let count = witness_count(sigma, g, beta_prime, band, tau, inner_replicas, seed)?;
    Ok(Membership::classify(count, g.n(), c))
}

/// One outer sample of an exceptional-set survey.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveySample {
    pub sigma: Config,
    /// Witness counts keyed by `tau.to_bits()`.
    pub counts: BTreeMap<u64, WitnessCount>,
}

/// Witness counts for `sigma ~ mu_{beta, G}` over a set of `tau` values,
/// from which the exceptional mass can be read for any rate `c` and any
/// grid `k/K` contained in the surveyed values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalSurvey {
    pub n: usize,
    pub samples: Vec<SurveySample>,
    pub inner_replicas: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SurveyConfig {
    pub n: usize,
    pub beta: f64,
    pub beta_prime: f64,
    pub replicas: usize,
    pub inner_replicas: usize,
    pub seed: u64,
}

/// `k/K` for `k = 0, ..., K-1`.
pub fn tau_grid(k: usize) -> Vec<f64> {
    (0..k).map(|i| i as f64 / k as f64).collect()
}

pub fn exceptional_survey(
    spec: &MixtureSpec,
    band: &OgpBand,
    taus: &[f64],
    cfg: &SurveyConfig,
) -> Result<ExceptionalSurvey> {
    if cfg.replicas == 0 {
        return Err(Error::Domain("need at least one replica".into()));
    }
    let samples = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|s| {
            let g = sample_null(cfg.n, spec, derive_seed(cfg.seed, &[s, 0]))?;
            let table = enumerate(&g)?;
            let ens = GibbsEnsemble::new(&table, cfg.beta)?;
            let sigma = gibbs_sample(&ens, 1, derive_seed(cfg.seed, &[s, 1]))[0];
            let mut counts = BTreeMap::new();
            for &tau in taus {
                let key = tau.to_bits();
                if counts.contains_key(&key) {
                    continue;
                }
                let inner_seed = derive_seed(cfg.seed, &[s, 2, key]);
                let wc = witness_count(sigma, &g, cfg.beta_prime, band, tau, cfg.inner_replicas, inner_seed)?;
                counts.insert(key, wc);
            }
            Ok(SurveySample { sigma, counts })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExceptionalSurvey {
        n: cfg.n,
        samples,
        inner_replicas: cfg.inner_replicas,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalMass {
    pub k: usize,
    pub c: f64,
    pub threshold: f64,
    /// Fraction of Gibbs samples lying in `E(G) = ∪_k E_{k/K}(G)`.
    pub mass: f64,
    pub std_error: f64,
    pub replicas: usize,
    /// Per-sample union membership.
    pub members: Vec<bool>,
    /// Samples with at least one indeterminate classification.
    pub indeterminate: usize,
}

impl ExceptionalSurvey {
    /// Mass of the union over `tau_k = k/K`; every grid value must have
    /// been surveyed.
    pub fn mass(&self, k: usize, c: f64) -> Result<ExceptionalMass> {
        if k == 0 {
            return Err(Error::Domain("grid size K must be at least 1".into()));
        }
        if !(c >= 0.0) {
            return Err(Error::Domain(format!("rate c = {c} must be >= 0")));
        }
        let grid = tau_grid(k);
        let mut members = Vec::with_capacity(self.samples.len());
        let mut indeterminate = 0;
        for s in &self.samples {
            let mut member = false;
            let mut unsure = false;
            for tau in &grid {
                let count = s
                    .counts
                    .get(&tau.to_bits())
                    .ok_or_else(|| Error::Domain(format!("tau = {tau} was not part of the survey")))?;
                let m = Membership::classify(*count, self.n, c);
                member |= m.member;
                unsure |= m.indeterminate;
            }
            members.push(member);
            indeterminate += usize::from(unsure);
        }
        let mass = members.iter().filter(|&&m| m).count() as f64 / members.len() as f64;
        Ok(ExceptionalMass {
            k,
            c,
            threshold: (-0.5 * c * self.n as f64).exp(),
            mass,
            std_error: bernoulli_se(mass, members.len()),
            replicas: members.len(),
            members,
            indeterminate,
        })
    }
}

/// Estimate of `E mu_{beta, G}(E(G))` on the grid `k/K`.
pub fn exceptional_mass(
    spec: &MixtureSpec,
    band: &OgpBand,
    k: usize,
    c: f64,
    cfg: &SurveyConfig,
) -> Result<ExceptionalMass> {
    exceptional_survey(spec, band, &tau_grid(k), cfg)?.mass(k, c)
}
