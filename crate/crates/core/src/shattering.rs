//! The cluster decomposition of the Gibbs measure and exact checks of its
//! four properties on a full energy table.
//!
//! * regular points: energy within `(1 ± eps/2) beta xi(1) N`, and no point
//!   of energy `>= (1 - eps/2) beta xi(1) N` at normalized distance in `[r, R]`;
//! * clusters: `C(sigma) = S_reg ∩ B(sigma, r)`, grouped by equality.
//!
//! Energies are normalized by `N beta xi(1)`, which is `N beta` for the pure
//! model.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::{binomial, for_each_subset, ConfigSet, EnergyTable, GibbsEnsemble};
use crate::numerics::binary_entropy;
use crate::spins::{self, Config};
use crate::thresholds::OgpBand;

/// Largest regular set for which all-pairs scans are attempted.
pub const MAX_REGULAR_POINTS: usize = 1_000_000;

/// Slack absorbing rounding when converting normalized radii to integers.
const RADIUS_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShatterParams {
    pub beta: f64,
    /// Energy slack; both conditions use `eps / 2`.
    pub eps: f64,
    pub band: OgpBand,
}

impl ShatterParams {
    pub fn new(beta: f64, eps: f64, band: OgpBand) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) || !(eps > 0.0) {
            return Err(Error::Domain(format!(
                "need beta >= 0 and eps > 0, got beta = {beta}, eps = {eps}"
            )));
        }
        Ok(Self { beta, eps, band })
    }

    /// `r < R/3`: all clusters are separated; otherwise only most are.
    pub fn full_separation(&self) -> bool {
        self.band.full_separation()
    }
}

/// Integer Hamming radii for a given `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Radii {
    /// Largest distance inside `B(sigma, r)`: `floor(r N)`.
    pub ball: u32,
    /// Smallest and largest distances of the shell `[r, R]`.
    pub shell_lo: u32,
    pub shell_hi: u32,
    /// Union-find joining radius `floor(2 r N)`.
    pub join: u32,
    /// `floor((R - r) N)`, the range of the cluster-equality dichotomy.
    pub dichotomy: u32,
}

impl Radii {
    pub fn new(n: usize, band: &OgpBand) -> Self {
        let nf = n as f64;
        let floor = |x: f64| (x * nf + RADIUS_SLACK).floor().max(0.0) as u32;
        Self {
            ball: floor(band.r),
            shell_lo: (band.r * nf - RADIUS_SLACK).ceil().max(0.0) as u32,
            shell_hi: floor(band.big_r).min(n as u32),
            join: floor(2.0 * band.r),
            dichotomy: floor(band.big_r - band.r),
        }
    }
}

/// Sets making up the regular set, kept separately for the coverage report.
#[derive(Debug, Clone)]
pub struct RegularSet {
    pub regular: ConfigSet,
    /// Points inside the energy band.
    pub band: ConfigSet,
    /// Points with a high-energy point in their `[r, R]` shell.
    pub shell_failure: ConfigSet,
}

fn energy_level(table: &EnergyTable, beta: f64) -> f64 {
    table.n() as f64 * beta * table.spec().value(1.0)
}

/// Exact regular set of a table.
pub fn regular_set(table: &EnergyTable, params: &ShatterParams) -> RegularSet {
    let n = table.n();
    let level = energy_level(table, params.beta);
    let half = 0.5 * params.eps;
    let band = ConfigSet::from_predicate(n, |x| (table.energy(x) - level).abs() <= half * level);
    let high_threshold = (1.0 - half) * level;
    let radii = Radii::new(n, &params.band);
    let mut shell_failure = ConfigSet::empty(n);
    if radii.shell_lo <= radii.shell_hi {
        for y in 0..table.len() as Config {
            if table.energy(y) >= high_threshold {
                for d in radii.shell_lo..=radii.shell_hi {
                    for_each_subset(n, d, |m| shell_failure.insert(y ^ m));
                }
            }
        }
    }
    let mut regular = band.clone();
    regular.difference_with(&shell_failure);
    RegularSet {
        regular,
        band,
        shell_failure,
    }
}

/// Number of points within Hamming distance `radius`.
pub fn ball_size(n: usize, radius: u32) -> f64 {
    (0..=radius.min(n as u32)).map(|d| binomial(n as u32, d)).sum()
}

/// Calls `f(y, d)` for members `y != x` of `set` within distance `radius`,
/// by enumerating the ball or scanning the member list, whichever is smaller.
fn for_each_neighbor(x: Config, radius: u32, set: &ConfigSet, members: &[Config], mut f: impl FnMut(Config, u32)) {
    let n = set.n();
    if ball_size(n, radius) <= members.len() as f64 {
        for d in 1..=radius.min(n as u32) {
            for_each_subset(n, d, |m| {
                if set.contains(x ^ m) {
                    f(x ^ m, d);
                }
            });
        }
    } else {
        for &y in members {
            let d = spins::distance(x, y);
            if y != x && d <= radius {
                f(y, d);
            }
        }
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    /// Keeps the smaller root so roots are the smallest members.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Smallest member.
    pub representative: Config,
    /// Members in increasing order.
    pub members: Vec<Config>,
    /// Largest normalized Hamming distance between members.
    pub diameter: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterDecomposition {
    pub n: usize,
    pub band: OgpBand,
    pub radii: Radii,
    pub regular: ConfigSet,
    /// Ordered by representative.
    pub clusters: Vec<Cluster>,
    /// Regular pairs at normalized distance in `[r, R]` (must be zero for a
    /// genuine regular set).
    pub shell_pairs: u64,
    /// Pairs within `(R - r) N` whose balls `C(.)` differ.
    pub dichotomy_violations: u64,
    /// Clusters that differ from `C(representative)`.
    pub cluster_ball_mismatches: u64,
    pub anomalies: Vec<String>,
}

impl ClusterDecomposition {
    /// Index of the cluster holding each regular point.
    pub fn cluster_of(&self) -> HashMap<Config, usize> {
        self.clusters
            .iter()
            .enumerate()
            .flat_map(|(i, c)| c.members.iter().map(move |&x| (x, i)))
            .collect()
    }
}

/// `C(x) = S_reg ∩ B(x, r)` as a sorted list.
fn ball_in(x: Config, radius: u32, set: &ConfigSet, members: &[Config]) -> Vec<Config> {
    let mut out = vec![x];
    for_each_neighbor(x, radius, set, members, |y, _| out.push(y));
    out.sort_unstable();
    out
}

/// Groups the regular set into clusters: union-find over pairs at
/// normalized distance `<= 2r`, then exact checks of the dichotomy
/// "`C(x) = C(y)` or `d(x, y) > R - r`" and of the empty `[r, R]` shell.
pub fn build_clusters(regular: &ConfigSet, band: &OgpBand) -> Result<ClusterDecomposition> {
    let n = regular.n();
    let members: Vec<Config> = regular.iter().collect();
    if members.len() > MAX_REGULAR_POINTS {
        return Err(Error::Resource(format!(
            "{} regular points exceed the cap of {MAX_REGULAR_POINTS}",
            members.len()
        )));
    }
    let radii = Radii::new(n, band);
    let index: HashMap<Config, usize> = members.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let mut uf = UnionFind::new(members.len());
    let mut shell_pairs = 0u64;
    let mut dichotomy_violations = 0u64;
    let mut balls: HashMap<Config, Vec<Config>> = HashMap::new();
    let reach = radii.join.max(radii.shell_hi).max(radii.dichotomy);
    for (i, &x) in members.iter().enumerate() {
        let mut near = Vec::new();
        for_each_neighbor(x, reach, regular, &members, |y, d| near.push((y, d)));
        for (y, d) in near {
            if y < x {
                continue;
            }
            if d <= radii.join {
                uf.union(i, index[&y]);
            }
            if d >= radii.shell_lo && d <= radii.shell_hi {
                shell_pairs += 1;
            }
            if d <= radii.dichotomy {
                let bx = balls
                    .entry(x)
                    .or_insert_with(|| ball_in(x, radii.ball, regular, &members))
                    .clone();
                let by = balls
                    .entry(y)
                    .or_insert_with(|| ball_in(y, radii.ball, regular, &members));
                if &bx != by {
                    dichotomy_violations += 1;
                }
            }
        }
    }
    let mut groups: Vec<Vec<Config>> = vec![Vec::new(); members.len()];
    for (i, &x) in members.iter().enumerate() {
        let root = uf.find(i);
        groups[root].push(x);
    }
    let mut clusters = Vec::new();
    let mut mismatches = 0u64;
    for g in groups.into_iter().filter(|g| !g.is_empty()) {
        let rep = g[0];
        let ball = balls
            .remove(&rep)
            .unwrap_or_else(|| ball_in(rep, radii.ball, regular, &members));
        if ball != g {
            mismatches += 1;
        }
        let mut diam = 0;
        for (a, &x) in g.iter().enumerate() {
            for &y in &g[a + 1..] {
                diam = diam.max(spins::distance(x, y));
            }
        }
        clusters.push(Cluster {
            representative: rep,
            members: g,
            diameter: f64::from(diam) / n as f64,
        });
    }
    clusters.sort_by_key(|c| c.representative);
    let mut anomalies = Vec::new();
    if shell_pairs > 0 {
        anomalies.push(format!("{shell_pairs} regular pairs at normalized distance in [r, R]"));
    }
    if dichotomy_violations > 0 {
        anomalies.push(format!(
            "{dichotomy_violations} pairs within (R - r) N with different balls C(.)"
        ));
    }
    if mismatches > 0 {
        anomalies.push(format!("{mismatches} clusters differ from C(representative)"));
    }
    Ok(ClusterDecomposition {
        n,
        band: *band,
        radii,
        regular: regular.clone(),
        clusters,
        shell_pairs,
        dichotomy_violations,
        cluster_ball_mismatches: mismatches,
        anomalies,
    })
}

/// Either the exact minimum separation or, when `r >= R/3`, the share of
/// mass-weighted cluster pairs that are within `R` of each other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SeparationStat {
    /// Smallest normalized distance between points of different clusters,
    /// compared with `R`.
    MinSeparation { value: f64, exceeds_r: bool },
    /// `sum_{i != j, d(C_i, C_j) <= R} mu_i mu_j / sum_{i != j} mu_i mu_j`.
    CloseMassFraction { value: f64, min_separation: f64 },
    /// Fewer than two clusters.
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplementBreakdown {
    /// `mu(H outside (1 ± eps/2) beta xi(1) N)`.
    pub band_failure_mass: f64,
    /// `mu(high-energy point in the [r, R] shell)`.
    pub shell_failure_mass: f64,
    /// `coverage + band + shell - 1`, nonnegative by the union bound.
    pub double_count: f64,
    pub union_bound_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub representative: Config,
    pub size: usize,
    pub diameter: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShatterReport {
    pub n: usize,
    pub beta: f64,
    pub eps: f64,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub full_separation: bool,
    pub num_clusters: usize,
    pub regular_points: usize,
    /// `None` when there are no clusters.
    pub max_diameter: Option<f64>,
    pub diameter_within_r: bool,
    pub separation: SeparationStat,
    pub max_mass: f64,
    /// `(1/N) log max_i mu(C_i)`.
    pub max_mass_exponent: Option<f64>,
    pub coverage: f64,
    pub complement: ComplementBreakdown,
    pub anomalies: Vec<String>,
    pub clusters: Vec<ClusterRow>,
}

impl ShatterReport {
    /// Items 1 and 2 hold exactly and no structural anomaly was seen.
    pub fn structural_ok(&self) -> bool {
        let separated = match self.separation {
            SeparationStat::MinSeparation { exceeds_r, .. } => exceeds_r,
            _ => true,
        };
        self.diameter_within_r && separated && self.anomalies.is_empty()
    }
}

/// Diameter, separation, masses and coverage of a decomposition.
pub fn verify_decomposition(
    dec: &ClusterDecomposition,
    table: &EnergyTable,
    regular: &RegularSet,
    params: &ShatterParams,
) -> Result<ShatterReport> {
    let n = dec.n;
    let ens = GibbsEnsemble::new(table, params.beta)?;
    let masses: Vec<f64> = dec
        .clusters
        .iter()
        .map(|c| c.members.iter().map(|&x| ens.weight(x)).sum())
        .collect();
    let max_diameter = dec.clusters.iter().map(|c| c.diameter).reduce(f64::max);
    let r_int = f64::from(dec.radii.ball) / n as f64;
    let diameter_within_r = max_diameter.is_none_or(|d| d <= r_int + RADIUS_SLACK);

    let separation = separation_stat(dec, &masses, params.full_separation());
    let max_mass = masses.iter().cloned().fold(0.0, f64::max);
    let coverage: f64 = masses.iter().sum();
    let all = ConfigSet::full(n);
    let mut band_fail = all.clone();
    band_fail.difference_with(&regular.band);
    let band_failure_mass = ens.mass(&band_fail);
    let shell_failure_mass = ens.mass(&regular.shell_failure);
    let double_count = coverage + band_failure_mass + shell_failure_mass - 1.0;
    Ok(ShatterReport {
        n,
        beta: params.beta,
        eps: params.eps,
        r: dec.band.r,
        big_r: dec.band.big_r,
        full_separation: params.full_separation(),
        num_clusters: dec.clusters.len(),
        regular_points: dec.regular.len(),
        max_diameter,
        diameter_within_r,
        separation,
        max_mass,
        max_mass_exponent: (max_mass > 0.0).then(|| max_mass.ln() / n as f64),
        coverage,
        complement: ComplementBreakdown {
            band_failure_mass,
            shell_failure_mass,
            double_count,
            union_bound_holds: double_count >= -1e-12,
        },
        anomalies: dec.anomalies.clone(),
        clusters: dec
            .clusters
            .iter()
            .zip(&masses)
            .map(|(c, &m)| ClusterRow {
                representative: c.representative,
                size: c.members.len(),
                diameter: c.diameter,
                mass: m,
            })
            .collect(),
    })
}

fn separation_stat(dec: &ClusterDecomposition, masses: &[f64], full: bool) -> SeparationStat {
    if dec.clusters.len() < 2 {
        return SeparationStat::NotApplicable;
    }
    let n = dec.n;
    let points: Vec<(Config, usize)> = dec
        .clusters
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.members.iter().map(move |&x| (x, i)))
        .collect();
    let mut min_d = u32::MAX;
    let mut close: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (a, &(x, cx)) in points.iter().enumerate() {
        for &(y, cy) in &points[a + 1..] {
            if cx != cy {
                let d = spins::distance(x, y);
                min_d = min_d.min(d);
                if d <= dec.radii.shell_hi {
                    close.insert((cx.min(cy), cx.max(cy)));
                }
            }
        }
    }
    let min_sep = f64::from(min_d) / n as f64;
    if full {
        SeparationStat::MinSeparation {
            value: min_sep,
            exceeds_r: min_d > dec.radii.shell_hi,
        }
    } else {
        let total: f64 = masses.iter().sum();
        let sq: f64 = masses.iter().map(|m| m * m).sum();
        let all_pairs = total * total - sq;
        let close_mass: f64 = close.iter().map(|&(i, j)| 2.0 * masses[i] * masses[j]).sum();
        SeparationStat::CloseMassFraction {
            value: if all_pairs > 0.0 { close_mass / all_pairs } else { 0.0 },
            min_separation: min_sep,
        }
    }
}

/// Full pipeline: regular set, clusters, report.
pub fn shatter(table: &EnergyTable, params: &ShatterParams) -> Result<ShatterReport> {
    let reg = regular_set(table, params);
    let dec = build_clusters(&reg.regular, &params.band)?;
    verify_decomposition(&dec, table, &reg, params)
}

/// Per-cluster log-mass bound
/// `h(2r) + (1 + eps/2) beta^2 - beta^2/2 - log 2 + t` with
/// `t = [1 - (1 - eps')^2 (1 + eps)] log 2 / 2`; `size_exponent` is the
/// exponent `h(2r)` of the cluster size.
pub fn entropy_mass_bound(size_exponent: f64, beta: f64, eps: f64, eps_prime: f64) -> f64 {
    let t = (1.0 - (1.0 - eps_prime).powi(2) * (1.0 + eps)) * std::f64::consts::LN_2 / 2.0;
    size_exponent + (1.0 + 0.5 * eps) * beta * beta - 0.5 * beta * beta - std::f64::consts::LN_2 + t
}

/// `h(2r)` for a band.
pub fn cluster_size_exponent(band: &OgpBand) -> f64 {
    binary_entropy((2.0 * band.r).min(1.0))
}
