//! Deterministic search algorithms run against sampled disorder: the
//! correlation curve `chi_N(tau)`, its concentration, the intermediate-`tau`
//! grid selection, and the rarity report for an algorithm's outputs.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::disorder::{interpolate, sample_null, DisorderTensor};
use crate::error::{Error, Result};
use crate::landscape::{enumerate, gibbs_sample, FlipKernel, GibbsEnsemble};
use crate::mixture::MixtureSpec;
use crate::ogp::{tau_grid, witness_counts, Membership};
use crate::rng::derive_seed;
use crate::spins::{self, Config};
use crate::stats::MeanSe;
use crate::thresholds::OgpBand;

/// Lipschitz constant an algorithm claims for itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lipschitz {
    Claimed(f64),
    Unknown,
}

impl Lipschitz {
    pub fn value(self) -> Option<f64> {
        match self {
            Lipschitz::Claimed(l) => Some(l),
            Lipschitz::Unknown => None,
        }
    }
}

/// A deterministic map from disorder to `[-1, 1]^N`.
pub trait SearchAlgorithm: Sync {
    fn name(&self) -> String;
    fn lipschitz(&self) -> Lipschitz;
    /// `B` with `||output||^2 <= B N`.
    fn norm_bound(&self) -> f64;
    fn run(&self, g: &DisorderTensor) -> Result<Vec<f64>>;
}

/// Returns a fixed point regardless of the disorder.
#[derive(Debug, Clone, PartialEq)]
pub struct Constant {
    pub sigma0: Vec<f64>,
}

pub fn baseline_constant(sigma0: Vec<f64>) -> Constant {
    Constant { sigma0 }
}

impl SearchAlgorithm for Constant {
    fn name(&self) -> String {
        "constant".into()
    }

    fn lipschitz(&self) -> Lipschitz {
        Lipschitz::Claimed(0.0)
    }

    fn norm_bound(&self) -> f64 {
        1.0
    }

    fn run(&self, g: &DisorderTensor) -> Result<Vec<f64>> {
        if self.sigma0.len() != g.n() {
            return Err(Error::Incompatible(format!(
                "constant point has {} coordinates, disorder has N = {}",
                self.sigma0.len(),
                g.n()
            )));
        }
        Ok(self.sigma0.clone())
    }
}

/// `clamp(scale g_{i,...,i}, -1, 1)` on the top-degree diagonal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagonal {
    pub scale: f64,
}

pub fn baseline_diagonal(scale: f64) -> Diagonal {
    Diagonal { scale }
}

/// Flat index of `(i, ..., i)` in a degree-`k` array.
fn diagonal_index(n: usize, k: u32, i: usize) -> usize {
    i * (0..k).map(|j| n.pow(j)).sum::<usize>()
}

impl SearchAlgorithm for Diagonal {
    fn name(&self) -> String {
        format!("diagonal:{}", self.scale)
    }

    fn lipschitz(&self) -> Lipschitz {
        Lipschitz::Claimed(self.scale.abs())
    }

    fn norm_bound(&self) -> f64 {
        1.0
    }

    fn run(&self, g: &DisorderTensor) -> Result<Vec<f64>> {
        let (k, arr) = g
            .arrays()
            .last()
            .ok_or_else(|| Error::InvalidMixture("mixture has no terms".into()))?;
        let n = g.n();
        Ok((0..n)
            .map(|i| (self.scale * arr[diagonal_index(n, k, i)]).clamp(-1.0, 1.0))
            .collect())
    }
}

/// Greedy single-flip ascent from the all-plus configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Greedy {
    pub max_sweeps: usize,
}

pub fn baseline_greedy(max_sweeps: usize) -> Result<Greedy> {
    if max_sweeps == 0 {
        return Err(Error::Domain("max_sweeps must be at least 1".into()));
    }
    Ok(Greedy { max_sweeps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyOutcome {
    pub config: Config,
    pub sweeps: usize,
    /// A full sweep made no flip.
    pub converged: bool,
}

impl Greedy {
    pub fn search(&self, g: &DisorderTensor) -> Result<GreedyOutcome> {
        let n = g.n();
        if n > 64 {
            return Err(Error::Resource(format!(
                "greedy search packs at most 64 spins, got N = {n}"
            )));
        }
        let kernel = FlipKernel::new(g)?;
        let mut x: Config = 0;
        for sweep in 1..=self.max_sweeps {
            let mut flipped = false;
            for j in 0..n {
                if kernel.flip_delta(x, j) > 0.0 {
                    x ^= 1 << j;
                    flipped = true;
                }
            }
            if !flipped {
                return Ok(GreedyOutcome {
                    config: x,
                    sweeps: sweep,
                    converged: true,
                });
            }
        }
        Ok(GreedyOutcome {
            config: x,
            sweeps: self.max_sweeps,
            converged: false,
        })
    }
}

impl SearchAlgorithm for Greedy {
    fn name(&self) -> String {
        format!("greedy:{}", self.max_sweeps)
    }

    fn lipschitz(&self) -> Lipschitz {
        Lipschitz::Unknown
    }

    fn norm_bound(&self) -> f64 {
        1.0
    }

    fn run(&self, g: &DisorderTensor) -> Result<Vec<f64>> {
        Ok(spins::decode(self.search(g)?.config, g.n()))
    }
}

/// Negative control: the all-plus or all-minus point chosen by a hash of
/// the couplings. It claims a Lipschitz constant it does not have.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HashSign {
    pub claimed_l: f64,
}

pub fn negative_control(claimed_l: f64) -> HashSign {
    HashSign { claimed_l }
}

impl SearchAlgorithm for HashSign {
    fn name(&self) -> String {
        format!("hash-sign:{}", self.claimed_l)
    }

    fn lipschitz(&self) -> Lipschitz {
        Lipschitz::Claimed(self.claimed_l)
    }

    fn norm_bound(&self) -> f64 {
        1.0
    }

    fn run(&self, g: &DisorderTensor) -> Result<Vec<f64>> {
        let mut h = Sha256::new();
        for v in g.flat() {
            h.update(v.to_le_bytes());
        }
        let s = if h.finalize()[0] & 1 == 0 { 1.0 } else { -1.0 };
        Ok(vec![s; g.n()])
    }
}

/// Algorithm selection by name, e.g. `greedy:50` or `diagonal:0.2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum AlgorithmSpec {
    /// All-plus, or the packed configuration given.
    Constant {
        config: Option<Config>,
    },
    Diagonal {
        scale: f64,
    },
    Greedy {
        max_sweeps: usize,
    },
    HashSign {
        claimed_l: f64,
    },
}

pub const DEFAULT_DIAGONAL_SCALE: f64 = 0.2;
pub const DEFAULT_MAX_SWEEPS: usize = 100;
pub const DEFAULT_HASH_CLAIMED_L: f64 = 0.25;

impl AlgorithmSpec {
    pub fn build(&self, n: usize) -> Result<Box<dyn SearchAlgorithm>> {
        Ok(match *self {
            AlgorithmSpec::Constant { config } => {
                let x = config.unwrap_or(0);
                if n > 64 && x != 0 {
                    return Err(Error::Domain("packed constant points need N <= 64".into()));
                }
                let sigma = if x == 0 { vec![1.0; n] } else { spins::decode(x, n) };
                Box::new(baseline_constant(sigma))
            }
            AlgorithmSpec::Diagonal { scale } => Box::new(baseline_diagonal(scale)),
            AlgorithmSpec::Greedy { max_sweeps } => Box::new(baseline_greedy(max_sweeps)?),
            AlgorithmSpec::HashSign { claimed_l } => Box::new(negative_control(claimed_l)),
        })
    }
}

impl fmt::Display for AlgorithmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgorithmSpec::Constant { config: None } => write!(f, "constant"),
            AlgorithmSpec::Constant { config: Some(x) } => write!(f, "constant:{x}"),
            AlgorithmSpec::Diagonal { scale } => write!(f, "diagonal:{scale}"),
            AlgorithmSpec::Greedy { max_sweeps } => write!(f, "greedy:{max_sweeps}"),
            AlgorithmSpec::HashSign { claimed_l } => write!(f, "hash-sign:{claimed_l}"),
        }
    }
}

impl FromStr for AlgorithmSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((a, b)) => (a.trim(), Some(b.trim())),
            None => (s.trim(), None),
        };
        let bad = |what: &str| Error::Parse {
            what: "algorithm",
            input: s.to_string(),
            reason: format!("bad {what} parameter"),
        };
        let real =
            |default: f64, what: &str| -> Result<f64> { arg.map_or(Ok(default), |a| a.parse().map_err(|_| bad(what))) };
        match name {
            "constant" => Ok(AlgorithmSpec::Constant {
                config: arg.map(|a| a.parse().map_err(|_| bad("configuration"))).transpose()?,
            }),
            "diagonal" => Ok(AlgorithmSpec::Diagonal {
                scale: real(DEFAULT_DIAGONAL_SCALE, "scale")?,
            }),
            "greedy" => Ok(AlgorithmSpec::Greedy {
                max_sweeps: arg.map_or(Ok(DEFAULT_MAX_SWEEPS), |a| a.parse().map_err(|_| bad("sweep count")))?,
            }),
            "hash-sign" => Ok(AlgorithmSpec::HashSign {
                claimed_l: real(DEFAULT_HASH_CLAIMED_L, "Lipschitz")?,
            }),
            _ => Err(Error::Parse {
                what: "algorithm",
                input: s.to_string(),
                reason: "expected constant, diagonal, greedy or hash-sign".into(),
            }),
        }
    }
}

/// Runs the algorithm twice and checks the outputs agree bit for bit and
/// respect the norm bound.
pub fn checked_run(alg: &dyn SearchAlgorithm, g: &DisorderTensor) -> Result<Vec<f64>> {
    let a = alg.run(g)?;
    let b = alg.run(g)?;
    if a.len() != g.n() || a.iter().zip(&b).any(|(x, y)| x.to_bits() != y.to_bits()) {
        return Err(Error::Domain(format!("algorithm {} is not deterministic", alg.name())));
    }
    let norm2: f64 = a.iter().map(|v| v * v).sum();
    if norm2 > alg.norm_bound() * g.n() as f64 * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "algorithm {} exceeds its norm bound: |x|^2 = {norm2}",
            alg.name()
        )));
    }
    Ok(a)
}

/// `<A(G), A(G_tau)> / N` for each replica (rows) and each `tau` (columns).
/// The pair `(G, G')` of replica `r` is shared across the grid.
pub fn overlap_samples(
    alg: &dyn SearchAlgorithm,
    n: usize,
    spec: &MixtureSpec,
    taus: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if let Some(t) = taus.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::Domain(format!("tau = {t} outside [0, 1]")));
    }
    if replicas == 0 {
        return Err(Error::Domain("need at least one replica".into()));
    }
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let g = sample_null(n, spec, derive_seed(seed, &[r, 0]))?;
            let g_prime = sample_null(n, spec, derive_seed(seed, &[r, 1]))?;
            let base = if r == 0 { checked_run(alg, &g)? } else { alg.run(&g)? };
            taus.iter()
                .map(|&tau| {
                    let other = alg.run(&interpolate(&g, &g_prime, tau)?)?;
                    Ok(spins::overlap_f64(&base, &other) / n as f64)
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiCurve {
    pub algorithm: String,
    pub n: usize,
    pub spec: MixtureSpec,
    pub taus: Vec<f64>,
    pub estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub replicas: usize,
}

impl ChiCurve {
    /// Curve from given points (synthetic curves and tests).
    pub fn from_points(taus: Vec<f64>, estimates: Vec<f64>) -> Result<Self> {
        if taus.len() != estimates.len() || taus.is_empty() {
            return Err(Error::Domain(
                "grid and estimates must be nonempty and equal length".into(),
            ));
        }
        if taus.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("tau grid must be strictly increasing".into()));
        }
        let len = taus.len();
        Ok(Self {
            algorithm: "synthetic".into(),
            n: 0,
            spec: MixtureSpec::pure(2)?,
            taus,
            estimates,
            std_errors: vec![0.0; len],
            replicas: 0,
        })
    }

    /// Linear interpolation of the estimates; `None` outside the grid.
    pub fn at(&self, tau: f64) -> Option<f64> {
        let i = self.taus.partition_point(|&t| t < tau);
        if i < self.taus.len() && self.taus[i] == tau {
            return Some(self.estimates[i]);
        }
        if i == 0 || i == self.taus.len() {
            return None;
        }
        let (t0, t1) = (self.taus[i - 1], self.taus[i]);
        let w = (tau - t0) / (t1 - t0);
        Some((1.0 - w) * self.estimates[i - 1] + w * self.estimates[i])
    }
}

/// Monte Carlo estimate of `chi_N(tau) = E <A(G), A(G_tau)> / N`.
pub fn chi_estimate(
    alg: &dyn SearchAlgorithm,
    n: usize,
    spec: &MixtureSpec,
    taus: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<ChiCurve> {
    let mut sorted = taus.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let rows = overlap_samples(alg, n, spec, &sorted, replicas, seed)?;
    let (estimates, std_errors) = (0..sorted.len())
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let m = MeanSe::of(&col);
            (m.mean, m.std_error)
        })
        .unzip();
    Ok(ChiCurve {
        algorithm: alg.name(),
        n,
        spec: spec.clone(),
        taus: sorted,
        estimates,
        std_errors,
        replicas,
    })
}

/// `chi(tau) / chi(0)` with a delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiRatio {
    pub tau: f64,
    pub ratio: f64,
    pub std_error: f64,
}

/// Ratios `chi(tau) / chi(0)` from shared replicas.
pub fn chi_ratios(
    alg: &dyn SearchAlgorithm,
    n: usize,
    spec: &MixtureSpec,
    taus: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<Vec<ChiRatio>> {
    let mut grid = vec![0.0];
    grid.extend_from_slice(taus);
    let rows = overlap_samples(alg, n, spec, &grid, replicas, seed)?;
    let x: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let x_bar = MeanSe::of(&x).mean;
    Ok(taus
        .iter()
        .enumerate()
        .map(|(j, &tau)| {
            let y: Vec<f64> = rows.iter().map(|r| r[j + 1]).collect();
            let ratio = MeanSe::of(&y).mean / x_bar;
            let resid: Vec<f64> = y.iter().zip(&x).map(|(y, x)| y - ratio * x).collect();
            ChiRatio {
                tau,
                ratio,
                std_error: MeanSe::of(&resid).std_error / x_bar.abs(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub t: f64,
    /// Fraction of replicas with `|overlap - chi| >= t`.
    pub exceedance: f64,
    pub std_error: f64,
    /// `2 exp(-N t^2 / (8 L^2))` with the claimed or empirical `L`.
    pub bound: f64,
    /// `exceedance <= bound + 3 SE`; `None` when the row is descriptive.
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    pub algorithm: String,
    pub n: usize,
    pub tau: f64,
    pub replicas: usize,
    pub chi_hat: f64,
    pub claimed_l: Option<f64>,
    /// `sqrt(N var) / 2`, the `L` at which the bound matches a Gaussian
    /// tail with the observed variance. Used when no `L` is claimed.
    pub empirical_scale: f64,
    /// Rows test the claimed bound (`false`: descriptive only).
    pub applicable: bool,
    /// Some row exceeds the claimed bound.
    pub violated: bool,
    pub rows: Vec<ConcentrationRow>,
}

/// Empirical exceedance of `|<A(G), A(G_tau)>/N - chi_hat| >= t` against
/// `2 exp(-N t^2 / 8 L^2)`.
pub fn chi_concentration_check(
    alg: &dyn SearchAlgorithm,
    n: usize,
    spec: &MixtureSpec,
    tau: f64,
    replicas: usize,
    t_grid: &[f64],
    seed: u64,
) -> Result<ConcentrationReport> {
    let samples: Vec<f64> = overlap_samples(alg, n, spec, &[tau], replicas, seed)?
        .into_iter()
        .map(|r| r[0])
        .collect();
    let m = MeanSe::of(&samples);
    let var = m.std_error * m.std_error * replicas as f64;
    let empirical_scale = 0.5 * (n as f64 * var).sqrt();
    let claimed = alg.lipschitz().value();
    let l = claimed.unwrap_or(empirical_scale);
    let rows: Vec<ConcentrationRow> = t_grid
        .iter()
        .map(|&t| {
            let hits = samples.iter().filter(|&&x| (x - m.mean).abs() >= t).count();
            let exceedance = hits as f64 / replicas as f64;
            let std_error = crate::stats::bernoulli_se(exceedance, replicas);
            let bound = if l > 0.0 {
                (2.0 * (-(n as f64) * t * t / (8.0 * l * l)).exp()).min(1.0)
            } else {
                0.0
            };
            ConcentrationRow {
                t,
                exceedance,
                std_error,
                bound,
                pass: claimed.map(|_| exceedance <= bound + 3.0 * std_error),
            }
        })
        .collect();
    Ok(ConcentrationReport {
        algorithm: alg.name(),
        n,
        tau,
        replicas,
        chi_hat: m.mean,
        claimed_l: claimed,
        empirical_scale,
        applicable: claimed.is_some(),
        violated: rows.iter().any(|r| r.pass == Some(false)),
        rows,
    })
}

/// `K = ceil(10 L^2 / (q_high - q_low))`, at least 2.
pub fn grid_size(l: f64, band: &OgpBand) -> usize {
    let k = (10.0 * l * l / (band.q_high - band.q_low) - 1e-9).ceil();
    (k.max(2.0)) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointFailure {
    pub tau: f64,
    pub chi: Option<f64>,
    pub requirement: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum TauSelection {
    /// Smallest `k` in `1..K` with `chi(k/K)` inside the shrunk window.
    Found {
        big_k: usize,
        k: usize,
        tau: f64,
        chi: f64,
    },
    /// No grid point qualifies; `k` minimises the distance to the window
    /// midpoint.
    NoWitness {
        big_k: usize,
        k: usize,
        tau: f64,
        chi: f64,
    },
    EndpointFailure {
        failures: Vec<EndpointFailure>,
    },
}

/// Picks `k` with `chi(k/K) in (q_low + delta, q_high - delta)`. The curve
/// must cover `tau = 0` and `tau = 1`; values between its grid points are
/// linearly interpolated.
pub fn grid_tau_select(chi: &ChiCurve, band: &OgpBand, delta: f64, l: f64) -> Result<TauSelection> {
    let width = band.q_high - band.q_low;
    if !(delta > 0.0 && delta < 0.5 * width) {
        return Err(Error::Domain(format!(
            "delta = {delta} must lie in (0, {})",
            0.5 * width
        )));
    }
    let (lo, hi) = (band.q_low + delta, band.q_high - delta);
    let mut failures = Vec::new();
    match chi.at(0.0) {
        Some(c) if c > hi => {}
        c => failures.push(EndpointFailure {
            tau: 0.0,
            chi: c,
            requirement: format!("chi(0) > q_high - delta = {hi}"),
        }),
    }
    match chi.at(1.0) {
        Some(c) if c < lo => {}
        c => failures.push(EndpointFailure {
            tau: 1.0,
            chi: c,
            requirement: format!("chi(1) < q_low + delta = {lo}"),
        }),
    }
    if !failures.is_empty() {
        return Ok(TauSelection::EndpointFailure { failures });
    }
    let big_k = grid_size(l, band);
    let points: Vec<(usize, f64, f64)> = (1..big_k)
        .map(|k| {
            let tau = k as f64 / big_k as f64;
            (k, tau, chi.at(tau).expect("grid covers [0, 1]"))
        })
        .collect();
    if let Some(&(k, tau, c)) = points.iter().find(|p| p.2 > lo && p.2 < hi) {
        return Ok(TauSelection::Found { big_k, k, tau, chi: c });
    }
    let mid = 0.5 * (lo + hi);
    let &(k, tau, c) = points
        .iter()
        .min_by(|a, b| (a.2 - mid).abs().total_cmp(&(b.2 - mid).abs()))
        .expect("K >= 2");
    Ok(TauSelection::NoWitness { big_k, k, tau, chi: c })
}

/// `delta = (q_high - q_low) / 4`.
pub fn default_delta(band: &OgpBand) -> f64 {
    0.25 * (band.q_high - band.q_low)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RarityRow {
    pub replica: usize,
    /// `H / N` at the raw output (multilinear extension).
    pub energy_raw: f64,
    /// `H / N` after rounding to the hypercube.
    pub energy_rounded: f64,
    pub in_s_beta: bool,
    pub in_s_beta_prime: bool,
    pub in_exceptional: bool,
    pub gibbs_in_exceptional: bool,
    /// Some grid point was within 2 SE of the threshold.
    pub indeterminate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub estimate: f64,
    pub std_error: f64,
}

impl From<MeanSe> for Term {
    fn from(m: MeanSe) -> Self {
        Self {
            estimate: m.mean,
            std_error: m.std_error,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RarityTerms {
    /// `P(A(G) not in S_beta(G))`.
    pub outside_s_beta: Term,
    /// `P(A(G) not in S_beta'(G))`.
    pub outside_s_beta_prime: Term,
    /// `P(A(G) in E(G))`.
    pub in_exceptional: Term,
    /// `E mu_{beta,G}(E(G))`.
    pub gibbs_exceptional_mass: Term,
    /// `P(A(G) in E(G)) + 4 P(A(G) not in S_beta'(G))`.
    pub failure_lhs: Term,
}

impl RarityTerms {
    fn of(rows: &[RarityRow]) -> Self {
        let term =
            |f: &dyn Fn(&RarityRow) -> f64| -> Term { MeanSe::of(&rows.iter().map(f).collect::<Vec<_>>()).into() };
        let ind = |b: bool| f64::from(u8::from(b));
        Self {
            outside_s_beta: term(&|r| ind(!r.in_s_beta)),
            outside_s_beta_prime: term(&|r| ind(!r.in_s_beta_prime)),
            in_exceptional: term(&|r| ind(r.in_exceptional)),
            gibbs_exceptional_mass: term(&|r| ind(r.gibbs_in_exceptional)),
            failure_lhs: term(&|r| ind(r.in_exceptional) + 4.0 * ind(!r.in_s_beta_prime)),
        }
    }

    fn named(&self) -> [(&'static str, Term); 5] {
        [
            ("outside_s_beta", self.outside_s_beta),
            ("outside_s_beta_prime", self.outside_s_beta_prime),
            ("in_exceptional", self.in_exceptional),
            ("gibbs_exceptional_mass", self.gibbs_exceptional_mass),
            ("failure_lhs", self.failure_lhs),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitTerm {
    pub term: String,
    pub first: Term,
    pub second: Term,
    /// `|first - second| <= 3 sqrt(se1^2 + se2^2)`.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RarityReport {
    pub algorithm: String,
    pub n: usize,
    pub spec: MixtureSpec,
    pub beta: f64,
    pub beta_prime: f64,
    pub band: OgpBand,
    pub k: usize,
    pub c: f64,
    pub replicas: usize,
    pub inner_replicas: usize,
    pub rounding: String,
    pub terms: RarityTerms,
    pub mean_energy_raw: f64,
    pub mean_energy_rounded: f64,
    pub indeterminate: usize,
    /// First half of the replicas against the second half.
    pub split: Vec<SplitTerm>,
    pub split_consistent: bool,
    pub rows: Vec<RarityRow>,
}

#[derive(Debug, Clone, Copy)]
pub struct RarityConfig {
    pub n: usize,
    pub beta: f64,
    pub beta_prime: f64,
    pub k: usize,
    pub c: f64,
    pub replicas: usize,
    pub inner_replicas: usize,
    pub seed: u64,
}

/// All terms of the failure inequality for one algorithm, next to the Gibbs
/// mass of the exceptional set. Memberships use the shared inner replicas
/// for the algorithm's output and the Gibbs sample.
pub fn rarity_report(
    alg: &dyn SearchAlgorithm,
    spec: &MixtureSpec,
    band: &OgpBand,
    cfg: &RarityConfig,
) -> Result<RarityReport> {
    if cfg.k == 0 {
        return Err(Error::Domain("grid size K must be at least 1".into()));
    }
    if !(cfg.c >= 0.0) {
        return Err(Error::Domain(format!("rate c = {} must be >= 0", cfg.c)));
    }
    if cfg.beta_prime > cfg.beta {
        return Err(Error::Domain(format!(
            "beta' = {} must not exceed beta = {}",
            cfg.beta_prime, cfg.beta
        )));
    }
    if cfg.replicas < 2 {
        return Err(Error::Domain("need at least two replicas for the split check".into()));
    }
    let n = cfg.n;
    let nf = n as f64;
    let xi1 = spec.value(1.0);
    let taus = tau_grid(cfg.k);
    let rows = (0..cfg.replicas)
        .into_par_iter()
        .map(|s| {
            let s64 = s as u64;
            let g = sample_null(n, spec, derive_seed(cfg.seed, &[s64, 0]))?;
            let raw = if s == 0 { checked_run(alg, &g)? } else { alg.run(&g)? };
            let sigma = spins::encode(&raw);
            let energy_raw = g.energy(&raw) / nf;
            let energy_rounded = g.energy(&spins::decode(sigma, n)) / nf;
            let table = enumerate(&g)?;
            let ens = GibbsEnsemble::new(&table, cfg.beta)?;
            let gibbs = gibbs_sample(&ens, 1, derive_seed(cfg.seed, &[s64, 1]))[0];
            let mut member = [false; 2];
            let mut unsure = false;
            for &tau in &taus {
                let inner = derive_seed(cfg.seed, &[s64, 2, tau.to_bits()]);
                let counts = witness_counts(
                    &[sigma, gibbs],
                    &g,
                    cfg.beta_prime,
                    band,
                    tau,
                    cfg.inner_replicas,
                    inner,
                )?;
                for (m, wc) in member.iter_mut().zip(counts) {
                    let cls = Membership::classify(wc, n, cfg.c);
                    *m |= cls.member;
                    unsure |= cls.indeterminate;
                }
            }
            Ok(RarityRow {
                replica: s,
                energy_raw,
                energy_rounded,
                in_s_beta: energy_rounded >= cfg.beta * xi1,
                in_s_beta_prime: energy_rounded >= cfg.beta_prime * xi1,
                in_exceptional: member[0],
                gibbs_in_exceptional: member[1],
                indeterminate: unsure,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let half = rows.len() / 2;
    let (a, b) = (RarityTerms::of(&rows[..half]), RarityTerms::of(&rows[half..]));
    let split: Vec<SplitTerm> = a
        .named()
        .into_iter()
        .zip(b.named())
        .map(|((name, first), (_, second))| SplitTerm {
            term: name.into(),
            first,
            second,
            consistent: (first.estimate - second.estimate).abs()
                <= 3.0 * crate::stats::combined_se(first.std_error, second.std_error),
        })
        .collect();
    let mean = |f: fn(&RarityRow) -> f64| rows.iter().map(f).sum::<f64>() / rows.len() as f64;
    Ok(RarityReport {
        algorithm: alg.name(),
        n,
        spec: spec.clone(),
        beta: cfg.beta,
        beta_prime: cfg.beta_prime,
        band: *band,
        k: cfg.k,
        c: cfg.c,
        replicas: cfg.replicas,
        inner_replicas: cfg.inner_replicas,
        rounding: "coordinatewise sign, ties to +1".into(),
        terms: RarityTerms::of(&rows),
        mean_energy_raw: mean(|r| r.energy_raw),
        mean_energy_rounded: mean(|r| r.energy_rounded),
        indeterminate: rows.iter().filter(|r| r.indeterminate).count(),
        split_consistent: split.iter().all(|t| t.consistent),
        split,
        rows,
    })
}
