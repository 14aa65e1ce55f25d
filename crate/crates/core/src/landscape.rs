//! Exact enumeration of the energy landscape for small `N`.
//!
//! Tables are indexed by packed configuration (see [`crate::spins`]). The
//! traversal is a reflected Gray code: from step `t - 1` to `t` the flipped
//! site is `trailing_zeros(t)`. The `2^N` range is cut into fixed blocks of
//! `2^12` steps; block `j` visits exactly the table chunk `gray(j)`, starts
//! from one direct evaluation, and the chunks are filled independently, so
//! the table does not depend on the number of workers.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use fixedbitset::FixedBitSet;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::disorder::{read_u32, read_u64, DisorderKind, DisorderTensor};
use crate::error::{Error, Result};
use crate::mixture::MixtureSpec;
use crate::rng;
use crate::spins::{self, Config};

/// Default largest `N` that [`enumerate`] accepts.
pub const DEFAULT_MAX_N: usize = 26;

/// Gray-code steps per block (log2).
const BLOCK_BITS: usize = 12;

#[inline]
pub fn gray(t: u64) -> u64 {
    t ^ (t >> 1)
}

#[inline]
pub fn inverse_gray(mut g: u64) -> u64 {
    let mut t = g;
    while g > 0 {
        g >>= 1;
        t ^= g;
    }
    t
}

/// `H` rewritten as a multilinear polynomial in the spins.
///
/// Repeated indices in a tuple cancel in pairs (`sigma_i^2 = 1`), so each
/// tuple contributes to the monomial of the sites it contains an odd number
/// of times. The monomials are stored as bit masks, which makes a
/// single-flip increment a sum of signed coefficients selected by popcount.
#[derive(Debug, Clone)]
pub struct FlipKernel {
    n: usize,
    constant: f64,
    /// `(mask, coefficient)` over nonempty monomials.
    monomials: Vec<(Config, f64)>,
    /// Per site, the monomials containing it with that site removed.
    by_site: Vec<Vec<(Config, f64)>>,
}

#[inline]
fn signed(c: f64, x: Config, mask: Config) -> f64 {
    let parity = u64::from((x & mask).count_ones() & 1);
    f64::from_bits(c.to_bits() ^ (parity << 63))
}

impl FlipKernel {
    pub fn new(g: &DisorderTensor) -> Result<Self> {
        let n = g.n();
        if n > 64 {
            return Err(Error::Resource(format!("N = {n} exceeds 64 packed spins")));
        }
        let mut acc: BTreeMap<Config, f64> = BTreeMap::new();
        for (k, a) in g.arrays() {
            let scale = g.degree_scale(k);
            let mut digits = vec![0usize; k as usize];
            for &c in a {
                let mask = digits.iter().fold(0u64, |m, &d| m ^ (1 << d));
                *acc.entry(mask).or_insert(0.0) += scale * c;
                // Increment the mixed-radix counter, last digit fastest.
                for d in digits.iter_mut().rev() {
                    *d += 1;
                    if *d < n {
                        break;
                    }
                    *d = 0;
                }
            }
        }
        let constant = acc.remove(&0).unwrap_or(0.0);
        let monomials: Vec<(Config, f64)> = acc.into_iter().filter(|&(_, c)| c != 0.0).collect();
        let mut by_site = vec![Vec::new(); n];
        for &(m, c) in &monomials {
            for (j, site) in by_site.iter_mut().enumerate() {
                if (m >> j) & 1 == 1 {
                    site.push((m ^ (1 << j), c));
                }
            }
        }
        Ok(Self {
            n,
            constant,
            monomials,
            by_site,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `H(x)` from the multilinear form.
    pub fn energy(&self, x: Config) -> f64 {
        self.constant + self.monomials.iter().map(|&(m, c)| signed(c, x, m)).sum::<f64>()
    }

    /// `H(x ^ (1 << j)) - H(x)`.
    #[inline]
    pub fn flip_delta(&self, x: Config, j: usize) -> f64 {
        let field: f64 = self.by_site[j].iter().map(|&(m, c)| signed(c, x, m)).sum();
        -2.0 * spins::spin(x, j) * field
    }
}

/// Where a table came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub spec: MixtureSpec,
    pub kind: DisorderKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTable {
    n: usize,
    energies: Vec<f64>,
    provenance: Provenance,
}

/// Full landscape with the default size cap.
pub fn enumerate(g: &DisorderTensor) -> Result<EnergyTable> {
    enumerate_capped(g, DEFAULT_MAX_N)
}

pub fn enumerate_capped(g: &DisorderTensor, max_n: usize) -> Result<EnergyTable> {
    let n = g.n();
    if n > max_n || n > 40 {
        return Err(Error::Resource(format!(
            "enumeration of 2^{n} configurations exceeds the cap N <= {max_n}"
        )));
    }
    let kernel = FlipKernel::new(g)?;
    let block_bits = BLOCK_BITS.min(n);
    let block = 1usize << block_bits;
    let mut energies = vec![0.0; 1usize << n];
    energies.par_chunks_mut(block).enumerate().for_each(|(chunk, out)| {
        let j = inverse_gray(chunk as u64);
        let t0 = j << block_bits;
        let base = (chunk as u64) << block_bits;
        let mut x = gray(t0);
        let mut e = g.energy(&spins::decode(x, n));
        out[(x - base) as usize] = e;
        for t in t0 + 1..t0 + block as u64 {
            let site = t.trailing_zeros() as usize;
            e += kernel.flip_delta(x, site);
            x ^= 1 << site;
            out[(x - base) as usize] = e;
        }
    });
    Ok(EnergyTable {
        n,
        energies,
        provenance: Provenance {
            seed: g.seed(),
            spec: g.spec().clone(),
            kind: g.kind(),
        },
    })
}

const TABLE_MAGIC: &[u8; 8] = b"PSPNTAB\0";
const TABLE_VERSION: u32 = 1;

/// SHA-256 of the canonical text form of a mixture.
pub fn spec_hash(spec: &MixtureSpec) -> [u8; 32] {
    Sha256::digest(spec.to_string().as_bytes()).into()
}

impl EnergyTable {
    pub fn from_energies(n: usize, energies: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if n > 40 || energies.len() != 1usize << n {
            return Err(Error::Domain(format!(
                "table of length {} does not match N = {n}",
                energies.len()
            )));
        }
        if let Some(i) = energies.iter().position(|e| !e.is_finite()) {
            return Err(Error::Domain(format!("energy at index {i} is not finite")));
        }
        Ok(Self {
            n,
            energies,
            provenance,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn energy(&self, x: Config) -> f64 {
        self.energies[x as usize]
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn spec(&self) -> &MixtureSpec {
        &self.provenance.spec
    }

    /// `(argmax, max)`; ties go to the smallest index.
    pub fn max(&self) -> (Config, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, &e) in self.energies.iter().enumerate() {
            if e > best.1 {
                best = (i as Config, e);
            }
        }
        best
    }

    /// Largest relative mismatch against direct evaluation at `samples`
    /// random configurations.
    pub fn spot_check(&self, g: &DisorderTensor, samples: usize, seed: u64) -> f64 {
        let mut r = rng::rng_for(seed, &[]);
        (0..samples)
            .map(|_| {
                let x = r.random_range(0..self.len()) as Config;
                let want = g.energy(&spins::decode(x, self.n));
                (self.energy(x) - want).abs() / want.abs().max(1.0)
            })
            .fold(0.0, f64::max)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(TABLE_MAGIC)?;
        w.write_all(&TABLE_VERSION.to_le_bytes())?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&spec_hash(&self.provenance.spec))?;
        w.write_all(&self.provenance.seed.to_le_bytes())?;
        let mut buf = Vec::with_capacity(1 << 16);
        for chunk in self.energies.chunks(1 << 13) {
            buf.clear();
            for e in chunk {
                buf.extend_from_slice(&e.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    /// Reads a table written by [`EnergyTable::write_to`]. The mixture is
    /// not stored in the file; it is supplied here and checked against the
    /// stored hash.
    pub fn read_from(mut r: impl Read, spec: &MixtureSpec, max_n: usize) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != TABLE_MAGIC {
            return Err(Error::Format("not an energy table (bad magic)".into()));
        }
        let version = read_u32(&mut r)?;
        if version != TABLE_VERSION {
            return Err(Error::Format(format!("unsupported table version {version}")));
        }
        let n = read_u64(&mut r)? as usize;
        if n > max_n {
            return Err(Error::Resource(format!("table with N = {n} exceeds the cap {max_n}")));
        }
        let mut hash = [0u8; 32];
        r.read_exact(&mut hash)?;
        if hash != spec_hash(spec) {
            return Err(Error::Format(format!("table was not generated for mixture {spec}")));
        }
        let seed = read_u64(&mut r)?;
        let mut bytes = vec![0u8; 8usize << n];
        r.read_exact(&mut bytes)?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after energy table".into()));
        }
        let energies = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Self::from_energies(
            n,
            energies,
            Provenance {
                seed,
                spec: spec.clone(),
                kind: DisorderKind::Null,
            },
        )
    }
}

/// Deterministic log-sum-exp of `beta * E` over a table.
fn log_sum_exp_scaled(energies: &[f64], beta: f64) -> f64 {
    let m = energies.iter().map(|&e| beta * e).fold(f64::NEG_INFINITY, f64::max);
    let partial: Vec<f64> = energies
        .par_chunks(1 << 14)
        .map(|c| c.iter().map(|&e| (beta * e - m).exp()).sum::<f64>())
        .collect();
    m + partial.iter().sum::<f64>().ln()
}

/// `log sum_sigma exp(beta H(sigma))`.
pub fn log_partition(table: &EnergyTable, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(log_sum_exp_scaled(&table.energies, beta))
}

/// `log[2^{-N} sum_sigma exp(beta H(sigma) - beta^2 N xi(1) / 2)]`, the log
/// density ratio of the planted to the null disorder law.
pub fn log_likelihood_ratio(table: &EnergyTable, beta: f64) -> Result<f64> {
    let n = table.n as f64;
    Ok(log_partition(table, beta)? - n * std::f64::consts::LN_2 - 0.5 * beta * beta * n * table.spec().value(1.0))
}

fn check_beta(beta: f64) -> Result<()> {
    if beta >= 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("beta = {beta} must be finite and >= 0")))
    }
}

/// Gibbs measure `mu(sigma) = exp(beta H(sigma)) / Z` on a table.
#[derive(Debug, Clone)]
pub struct GibbsEnsemble<'a> {
    table: &'a EnergyTable,
    beta: f64,
    log_z: f64,
    log_weights: Vec<f64>,
}

impl<'a> GibbsEnsemble<'a> {
    pub fn new(table: &'a EnergyTable, beta: f64) -> Result<Self> {
        let log_z = log_partition(table, beta)?;
        let log_weights = table.energies.par_iter().map(|&e| beta * e - log_z).collect();
        Ok(Self {
            table,
            beta,
            log_z,
            log_weights,
        })
    }

    pub fn table(&self) -> &'a EnergyTable {
        self.table
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn weight(&self, x: Config) -> f64 {
        self.log_weights[x as usize].exp()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    /// Gibbs mass of a set.
    pub fn mass(&self, set: &ConfigSet) -> f64 {
        set.iter().map(|x| self.weight(x)).sum()
    }

    /// Cumulative weights for inverse-CDF sampling.
    pub fn sampler(&self) -> GibbsSampler {
        let mut acc = 0.0;
        let cdf = self
            .log_weights
            .iter()
            .map(|l| {
                acc += l.exp();
                acc
            })
            .collect();
        GibbsSampler { cdf }
    }
}

/// Inverse-CDF sampler over a fixed Gibbs measure.
#[derive(Debug, Clone)]
pub struct GibbsSampler {
    cdf: Vec<f64>,
}

impl GibbsSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Config {
        let total = *self.cdf.last().expect("nonempty table");
        let u = rng.random::<f64>() * total;
        let i = self.cdf.partition_point(|&c| c <= u);
        i.min(self.cdf.len() - 1) as Config
    }
}

/// `n_samples` exact draws from the Gibbs measure, reproducible from `seed`.
pub fn gibbs_sample(ensemble: &GibbsEnsemble, n_samples: usize, seed: u64) -> Vec<Config> {
    let sampler = ensemble.sampler();
    let mut r = rng::rng_for(seed, &[]);
    (0..n_samples).map(|_| sampler.sample(&mut r)).collect()
}

/// A subset of `{-1, +1}^N` as a bitset over packed configurations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigSet {
    n: usize,
    bits: FixedBitSet,
}

impl ConfigSet {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            bits: FixedBitSet::with_capacity(1 << n),
        }
    }

    pub fn full(n: usize) -> Self {
        let mut s = Self::empty(n);
        s.bits.insert_range(..);
        s
    }

    pub fn from_predicate(n: usize, pred: impl Fn(Config) -> bool) -> Self {
        let mut s = Self::empty(n);
        for x in 0..(1u64 << n) {
            if pred(x) {
                s.bits.insert(x as usize);
            }
        }
        s
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn insert(&mut self, x: Config) {
        self.bits.insert(x as usize);
    }

    pub fn contains(&self, x: Config) -> bool {
        self.bits.contains(x as usize)
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn iter(&self) -> impl Iterator<Item = Config> + '_ {
        self.bits.ones().map(|i| i as Config)
    }

    pub fn union_with(&mut self, other: &ConfigSet) {
        self.bits.union_with(&other.bits);
    }

    pub fn difference_with(&mut self, other: &ConfigSet) {
        self.bits.difference_with(&other.bits);
    }

    pub fn intersect_with(&mut self, other: &ConfigSet) {
        self.bits.intersect_with(&other.bits);
    }

    pub fn is_subset(&self, other: &ConfigSet) -> bool {
        self.bits.is_subset(&other.bits)
    }
}

/// `S_beta = {sigma : H(sigma) >= beta_level xi(1) N}`.
pub fn superlevel(table: &EnergyTable, beta_level: f64, xi1: f64) -> ConfigSet {
    let threshold = beta_level * xi1 * table.n as f64;
    ConfigSet::from_predicate(table.n, |x| table.energy(x) >= threshold)
}

/// Gibbs mass of `{sigma : |H(sigma) / (N xi(1) beta) - 1| <= eps}`.
pub fn energy_band_mass(ensemble: &GibbsEnsemble, eps: f64) -> Result<f64> {
    if !(eps > 0.0) || !(ensemble.beta > 0.0) {
        return Err(Error::Domain("energy band needs eps > 0 and beta > 0".into()));
    }
    let table = ensemble.table;
    let level = table.n as f64 * table.spec().value(1.0) * ensemble.beta;
    Ok(table
        .energies
        .iter()
        .zip(&ensemble.log_weights)
        .filter(|(&e, _)| (e / level - 1.0).abs() <= eps)
        .map(|(_, l)| l.exp())
        .sum())
}

/// How a slice maximum was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceRoute {
    /// Enumerate the `C(N, d)` flip subsets of the reference.
    Subsets,
    /// Scan the full table for configurations at distance `d`.
    TableFilter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceMax {
    /// `max H(sigma') / N` over the slice.
    pub value: f64,
    pub argmax: Config,
    /// Overlap actually used, `1 - 2d/N`.
    pub q_used: f64,
    /// Hamming distance of the slice.
    pub distance: u32,
    /// The requested overlap was not feasible and was rounded.
    pub adjusted: bool,
    pub route: SliceRoute,
}

/// Hamming distance of the feasible slice nearest to overlap `q`, and
/// whether rounding was needed.
pub fn slice_distance(n: usize, q: f64) -> Result<(u32, bool)> {
    if !(-1.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("overlap q = {q} outside [-1, 1]")));
    }
    let exact = 0.5 * n as f64 * (1.0 - q);
    let d = exact.round().clamp(0.0, n as f64);
    Ok((d as u32, (d - exact).abs() > 1e-9))
}

pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Visits every `n`-bit mask with `d` bits set (Gosper's hack).
pub fn for_each_subset(n: usize, d: u32, mut f: impl FnMut(Config)) {
    if d as usize > n {
        return;
    }
    if d == 0 {
        f(0);
        return;
    }
    let limit = 1u64 << n;
    let mut m: u64 = (1u64 << d) - 1;
    while m < limit {
        f(m);
        let c = m & m.wrapping_neg();
        let r = m + c;
        m = (((r ^ m) >> 2) / c) | r;
    }
}

/// Exact `max{H(sigma') / N : <sigma, sigma'> = N q}`, using the subset
/// route when the slice holds fewer than `2^N / 4` points.
pub fn slice_max(table: &EnergyTable, reference: Config, q: f64) -> Result<SliceMax> {
    let (d, _) = slice_distance(table.n, q)?;
    let route = if binomial(table.n as u32, d) < (1u64 << table.n) as f64 / 4.0 {
        SliceRoute::Subsets
    } else {
        SliceRoute::TableFilter
    };
    slice_max_via(table, reference, q, route)
}

pub fn slice_max_via(table: &EnergyTable, reference: Config, q: f64, route: SliceRoute) -> Result<SliceMax> {
    let n = table.n;
    let (d, adjusted) = slice_distance(n, q)?;
    let mut best = (0, f64::NEG_INFINITY);
    let mut consider = |y: Config| {
        let e = table.energy(y);
        if e > best.1 || (e == best.1 && y < best.0) {
            best = (y, e);
        }
    };
    match route {
        SliceRoute::Subsets => for_each_subset(n, d, |m| consider(reference ^ m)),
        SliceRoute::TableFilter => {
            for y in 0..(1u64 << n) {
                if spins::distance(reference, y) == d {
                    consider(y);
                }
            }
        }
    }
    Ok(SliceMax {
        value: best.1 / n as f64,
        argmax: best.0,
        q_used: 1.0 - 2.0 * f64::from(d) / n as f64,
        distance: d,
        adjusted,
        route,
    })
}

/// Slice maximum straight from the disorder, without a table.
pub fn slice_max_direct(g: &DisorderTensor, reference: Config, q: f64) -> Result<SliceMax> {
    let n = g.n();
    if n > 64 {
        return Err(Error::Resource(format!("N = {n} exceeds 64 packed spins")));
    }
    let (d, adjusted) = slice_distance(n, q)?;
    let kernel = FlipKernel::new(g)?;
    let mut best = (0, f64::NEG_INFINITY);
    for_each_subset(n, d, |m| {
        let y = reference ^ m;
        let e = kernel.energy(y);
        if e > best.1 || (e == best.1 && y < best.0) {
            best = (y, e);
        }
    });
    Ok(SliceMax {
        value: best.1 / n as f64,
        argmax: best.0,
        q_used: 1.0 - 2.0 * f64::from(d) / n as f64,
        distance: d,
        adjusted,
        route: SliceRoute::Subsets,
    })
}

/// Row of the enumeration CSV summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableSummary {
    #[serde(rename = "logZ")]
    pub log_z: f64,
    pub max_energy: f64,
    pub band_mass: f64,
}

pub fn summarize(table: &EnergyTable, beta: f64, eps: f64) -> Result<TableSummary> {
    let ens = GibbsEnsemble::new(table, beta)?;
    Ok(TableSummary {
        log_z: ens.log_z,
        max_energy: table.max().1,
        band_mass: energy_band_mass(&ens, eps)?,
    })
}
