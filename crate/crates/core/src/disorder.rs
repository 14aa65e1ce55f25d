//! Gaussian disorder: sampling (null, planted, interpolated), the
//! Hamiltonian and single-flip increments.
//!
//! Couplings are kept for ordered tuples `(i_1, ..., i_k)` in mixed-radix
//! order with `i_1` most significant, one flat array of length `N^k` per
//! degree of the mixture. The Hamiltonian is
//! `H(sigma) = sum_k gamma_k N^{-(k-1)/2} sum g_{i_1..i_k} sigma_{i_1}..sigma_{i_k}`.

use std::io::{Read, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::MixtureSpec;
use crate::rng::{self, NormalStream};

/// Default cap on the total number of stored couplings.
pub const DEFAULT_COUPLING_CAP: u64 = 100_000_000;

/// Couplings generated per parallel work item.
const SAMPLE_CHUNK: usize = 1 << 16;

/// Label for the planted configuration in the seed path.
const PLANT_LABEL: u64 = 0x0070_6c61_6e74;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisorderKind {
    Null,
    Planted,
    Interpolated,
}

impl DisorderKind {
    fn code(self) -> u8 {
        match self {
            DisorderKind::Null => 0,
            DisorderKind::Planted => 1,
            DisorderKind::Interpolated => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(DisorderKind::Null),
            1 => Ok(DisorderKind::Planted),
            2 => Ok(DisorderKind::Interpolated),
            _ => Err(Error::Format(format!("unknown disorder kind {c}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisorderTensor {
    n: usize,
    spec: MixtureSpec,
    /// One array per entry of `spec.terms()`, same order.
    couplings: Vec<Vec<f64>>,
    seed: u64,
    kind: DisorderKind,
}

/// Checks `sum_k N^k <= cap` and returns the total.
pub fn coupling_count(n: usize, spec: &MixtureSpec, cap: u64) -> Result<u64> {
    if n == 0 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    let mut total: u64 = 0;
    for k in spec.degrees() {
        let size = (n as u64)
            .checked_pow(k)
            .filter(|&s| s <= cap)
            .ok_or_else(|| Error::Resource(format!("N^k = {n}^{k} couplings exceeds the cap of {cap}")))?;
        total += size;
        if total > cap {
            return Err(Error::Resource(format!(
                "{total} couplings in total (last degree {k}, N^k = {n}^{k}) exceeds the cap of {cap}"
            )));
        }
    }
    Ok(total)
}

/// i.i.d. standard normal couplings with the default cap.
pub fn sample_null(n: usize, spec: &MixtureSpec, seed: u64) -> Result<DisorderTensor> {
    sample_null_capped(n, spec, seed, DEFAULT_COUPLING_CAP)
}

pub fn sample_null_capped(n: usize, spec: &MixtureSpec, seed: u64, cap: u64) -> Result<DisorderTensor> {
    coupling_count(n, spec, cap)?;
    let couplings = spec
        .degrees()
        .map(|k| {
            let mut a = vec![0.0; n.pow(k)];
            a.par_chunks_mut(SAMPLE_CHUNK).enumerate().for_each(|(c, chunk)| {
                NormalStream::new(seed, u64::from(k)).fill_from((c * SAMPLE_CHUNK) as u64, chunk);
            });
            a
        })
        .collect();
    Ok(DisorderTensor {
        n,
        spec: spec.clone(),
        couplings,
        seed,
        kind: DisorderKind::Null,
    })
}

/// Disorder tilted toward a hidden configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedInstance {
    pub sigma_star: Vec<f64>,
    /// Shifted couplings `g = beta gamma_k N^{-(k-1)/2} sigma*^{(x)k} + g~`.
    pub g: DisorderTensor,
    /// The i.i.d. part `g~`.
    pub g_tilde: DisorderTensor,
    pub beta: f64,
}

/// Planted instance: `sigma*` uniform, `g~` the null tensor with the same seed.
pub fn sample_planted(n: usize, spec: &MixtureSpec, beta: f64, seed: u64) -> Result<PlantedInstance> {
    let mut sign_rng = rng::rng_for(seed, &[PLANT_LABEL]);
    let sigma_star = rng::random_signs(&mut sign_rng, n);
    plant(n, spec, beta, seed, sigma_star)
}

/// Planted instance with a given hidden configuration.
pub fn plant(n: usize, spec: &MixtureSpec, beta: f64, seed: u64, sigma_star: Vec<f64>) -> Result<PlantedInstance> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("beta = {beta} must be finite and >= 0")));
    }
    if sigma_star.len() != n {
        return Err(Error::Domain(format!(
            "planted configuration has {} sites, expected {n}",
            sigma_star.len()
        )));
    }
    let g_tilde = sample_null(n, spec, seed)?;
    let mut g = g_tilde.clone();
    g.kind = DisorderKind::Planted;
    if beta > 0.0 {
        for (&(k, _), arr) in spec.terms().iter().zip(&mut g.couplings) {
            let shift = beta * g_tilde.degree_scale(k);
            let outer = outer_power(&sigma_star, k);
            for (c, o) in arr.iter_mut().zip(outer) {
                *c += shift * o;
            }
        }
    }
    Ok(PlantedInstance {
        sigma_star,
        g,
        g_tilde,
        beta,
    })
}

/// `sigma^{(x)k}` flattened in mixed-radix order.
fn outer_power(sigma: &[f64], k: u32) -> Vec<f64> {
    let mut out = vec![1.0];
    for _ in 0..k {
        out = out.iter().flat_map(|&a| sigma.iter().map(move |&s| a * s)).collect();
    }
    out
}

/// `G_tau = (1 - tau) G + sqrt(2 tau - tau^2) G'`, coupling by coupling.
pub fn interpolate(g: &DisorderTensor, g_prime: &DisorderTensor, tau: f64) -> Result<DisorderTensor> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Domain(format!("tau = {tau} outside [0, 1]")));
    }
    if g.n != g_prime.n || g.spec != g_prime.spec {
        return Err(Error::Incompatible(format!(
            "(N = {}, {}) vs (N = {}, {})",
            g.n, g.spec, g_prime.n, g_prime.spec
        )));
    }
    let a = 1.0 - tau;
    let b = (2.0 * tau - tau * tau).sqrt();
    let couplings = g
        .couplings
        .iter()
        .zip(&g_prime.couplings)
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| a * u + b * v).collect())
        .collect();
    Ok(DisorderTensor {
        n: g.n,
        spec: g.spec.clone(),
        couplings,
        seed: g.seed,
        kind: DisorderKind::Interpolated,
    })
}

impl DisorderTensor {
    /// Tensor from explicit coupling arrays, one per mixture term.
    pub fn from_couplings(
        n: usize,
        spec: MixtureSpec,
        couplings: Vec<Vec<f64>>,
        seed: u64,
        kind: DisorderKind,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("N must be at least 1".into()));
        }
        if couplings.len() != spec.terms().len() {
            return Err(Error::Domain(format!(
                "{} coupling arrays for {} mixture terms",
                couplings.len(),
                spec.terms().len()
            )));
        }
        for (&(k, _), a) in spec.terms().iter().zip(&couplings) {
            let want = n
                .checked_pow(k)
                .ok_or_else(|| Error::Resource(format!("{n}^{k} overflows")))?;
            if a.len() != want {
                return Err(Error::Domain(format!(
                    "degree {k} array has {} entries, expected {want}",
                    a.len()
                )));
            }
        }
        Ok(Self {
            n,
            spec,
            couplings,
            seed,
            kind,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spec(&self) -> &MixtureSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn kind(&self) -> DisorderKind {
        self.kind
    }

    /// Coupling arrays paired with their degree.
    pub fn arrays(&self) -> impl Iterator<Item = (u32, &[f64])> {
        self.spec.degrees().zip(self.couplings.iter().map(Vec::as_slice))
    }

    /// Coupling array of one degree.
    pub fn degree(&self, k: u32) -> Option<&[f64]> {
        self.arrays().find(|&(d, _)| d == k).map(|(_, a)| a)
    }

    /// Total number of couplings `M = sum_k N^k`.
    pub fn len(&self) -> usize {
        self.couplings.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All couplings concatenated in term order.
    pub fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.couplings.iter().flatten().copied()
    }

    /// `gamma_k N^{-(k-1)/2}`.
    pub fn degree_scale(&self, k: u32) -> f64 {
        let gamma = self.spec.gamma(k).unwrap_or(0.0);
        gamma * (self.n as f64).powf(-0.5 * f64::from(k - 1))
    }

    fn check_sigma(&self, sigma: &[f64]) {
        assert_eq!(sigma.len(), self.n, "configuration length must equal N");
    }

    /// `H(sigma)` by full tensor contraction, `O(sum_k N^k)`.
    pub fn energy(&self, sigma: &[f64]) -> f64 {
        self.check_sigma(sigma);
        self.arrays()
            .map(|(k, a)| self.degree_scale(k) * contract(a, self.n, k, sigma))
            .sum()
    }

    /// `H(sigma^{(i)}) - H(sigma)` where `sigma^{(i)}` flips site `i`.
    ///
    /// A tuple containing `i` at an odd number of positions changes sign
    /// under the flip and one with even multiplicity does not, so
    /// `delta = -2 sigma_i sum_{|S| odd} T_S`, where `T_S` contracts the
    /// tensor with `e_i` at the positions in `S` and with `sigma` (zeroed
    /// at `i`) elsewhere. Cost `O(sum_k k N^{k-1})`.
    pub fn flip_delta(&self, sigma: &[f64], i: usize) -> f64 {
        self.check_sigma(sigma);
        assert!(i < self.n, "site {i} out of range");
        let mut u = sigma.to_vec();
        u[i] = 0.0;
        let mut total = 0.0;
        for (k, a) in self.arrays() {
            let mut t = 0.0;
            for subset in 1u32..(1 << k) {
                if subset.count_ones() % 2 == 1 {
                    t += contract_with_fixed(a, self.n, k, subset, i, &u);
                }
            }
            total += self.degree_scale(k) * t;
        }
        -2.0 * sigma[i] * total
    }

    /// Writes the binary dump.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(DISORDER_MAGIC)?;
        w.write_all(&DISORDER_VERSION.to_le_bytes())?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&(self.spec.terms().len() as u32).to_le_bytes())?;
        for &(k, g) in self.spec.terms() {
            w.write_all(&k.to_le_bytes())?;
            w.write_all(&g.to_le_bytes())?;
        }
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&[self.kind.code()])?;
        for a in &self.couplings {
            let mut buf = Vec::with_capacity(8 * a.len());
            for v in a {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    /// Reads a binary dump, enforcing the coupling cap before allocating.
    pub fn read_from(mut r: impl Read, cap: u64) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != DISORDER_MAGIC {
            return Err(Error::Format("not a disorder dump (bad magic)".into()));
        }
        let version = read_u32(&mut r)?;
        if version != DISORDER_VERSION {
            return Err(Error::Format(format!("unsupported disorder dump version {version}")));
        }
        let n = usize::try_from(read_u64(&mut r)?).map_err(|_| Error::Format("N does not fit in usize".into()))?;
        let terms = read_u32(&mut r)?;
        if terms == 0 || terms > 64 {
            return Err(Error::Format(format!("implausible number of terms {terms}")));
        }
        let mut spec_terms = Vec::new();
        for _ in 0..terms {
            let k = read_u32(&mut r)?;
            let g = f64::from_le_bytes(read_array(&mut r)?);
            spec_terms.push((k, g));
        }
        let spec = MixtureSpec::new(spec_terms).map_err(|e| Error::Format(e.to_string()))?;
        coupling_count(n, &spec, cap)?;
        let seed = read_u64(&mut r)?;
        let mut kind = [0u8; 1];
        r.read_exact(&mut kind)?;
        let kind = DisorderKind::from_code(kind[0])?;
        let mut couplings = Vec::new();
        for k in spec.degrees() {
            let len = n.pow(k);
            let mut bytes = vec![0u8; 8 * len];
            r.read_exact(&mut bytes)?;
            couplings.push(
                bytes
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                    .collect(),
            );
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("trailing bytes after disorder dump".into()));
        }
        Self::from_couplings(n, spec, couplings, seed, kind)
    }

    /// Random `±1` configuration drawn from `rng`.
    pub fn random_config<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        rng::random_signs(rng, self.n)
    }
}

const DISORDER_MAGIC: &[u8; 8] = b"PSPNDIS\0";
const DISORDER_VERSION: u32 = 1;

fn read_array<const L: usize>(r: &mut impl Read) -> Result<[u8; L]> {
    let mut b = [0u8; L];
    r.read_exact(&mut b)?;
    Ok(b)
}

pub(crate) fn read_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

pub(crate) fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

/// Full contraction of a flat `N^k` array with `sigma` in every slot.
fn contract(a: &[f64], n: usize, k: u32, sigma: &[f64]) -> f64 {
    let mut cur: Vec<f64> = a.chunks_exact(n).map(|row| dot(row, sigma)).collect();
    for _ in 1..k {
        cur = cur.chunks_exact(n).map(|row| dot(row, sigma)).collect();
    }
    cur[0]
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Contraction with `e_i` at the tuple positions in `fixed` (bit `m` is
/// position `m`, position 0 most significant) and `u` elsewhere.
fn contract_with_fixed(a: &[f64], n: usize, k: u32, fixed: u32, i: usize, u: &[f64]) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn rec(a: &[f64], n: usize, k: u32, pos: u32, offset: usize, fixed: u32, i: usize, u: &[f64]) -> f64 {
        let is_fixed = (fixed >> pos) & 1 == 1;
        if pos + 1 == k {
            let row = &a[offset * n..offset * n + n];
            return if is_fixed { row[i] } else { dot(row, u) };
        }
        if is_fixed {
            rec(a, n, k, pos + 1, offset * n + i, fixed, i, u)
        } else {
            (0..n)
                .filter(|&j| u[j] != 0.0)
                .map(|j| u[j] * rec(a, n, k, pos + 1, offset * n + j, fixed, i, u))
                .sum()
        }
    }
    rec(a, n, k, 0, 0, fixed, i, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pure(p: u32) -> MixtureSpec {
        MixtureSpec::pure(p).unwrap()
    }

    #[test]
    fn hand_contraction() {
        let g =
            DisorderTensor::from_couplings(2, pure(2), vec![vec![1.0, 0.0, 0.0, 1.0]], 0, DisorderKind::Null).unwrap();
        assert!((g.energy(&[1.0, 1.0]) - 2f64.sqrt()).abs() < 1e-15);
        assert!((g.energy(&[1.0, -1.0]) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sampling_is_deterministic_and_capped() {
        let a = sample_null(2, &pure(2), 7).unwrap();
        let b = sample_null(2, &pure(2), 7).unwrap();
        assert_eq!(a, b);
        let c = sample_null(2, &pure(2), 8).unwrap();
        assert_ne!(a, c);
        let err = sample_null(50, &pure(6), 1).unwrap_err();
        assert!(err.is_resource());
        assert!(err.to_string().contains("50^6"));
    }

    #[test]
    fn sample_mean_clt() {
        let g = sample_null(10, &pure(3), 3).unwrap();
        assert_eq!(g.len(), 1000);
        let mean = g.flat().sum::<f64>() / 1000.0;
        assert!(mean.abs() < 4.0 / 1000f64.sqrt());
    }

    #[test]
    fn chunked_sampling_matches_sequential_stream() {
        let g = sample_null(300, &pure(2), 5).unwrap();
        let mut s = NormalStream::new(5, 2);
        let seq: Vec<f64> = (0..g.len()).map(|_| s.next_normal()).collect();
        assert_eq!(g.degree(2).unwrap(), &seq[..]);
    }

    #[test]
    fn flip_delta_matches_energy_difference() {
        let spec = MixtureSpec::new([(2, 0.7), (3, 1.0), (4, 0.3)]).unwrap();
        let g = sample_null(7, &spec, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..30 {
            let s = g.random_config(&mut rng);
            let i = rng.random_range(0..7);
            let mut f = s.clone();
            f[i] = -f[i];
            let want = g.energy(&f) - g.energy(&s);
            let got = g.flip_delta(&s, i);
            assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "{got} vs {want}");
            let back = g.flip_delta(&f, i);
            assert!((got + back).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_couplings() {
        let g = DisorderTensor::from_couplings(4, pure(3), vec![vec![0.0; 64]], 0, DisorderKind::Null).unwrap();
        let s = [1.0, -1.0, 1.0, 1.0];
        assert_eq!(g.energy(&s), 0.0);
        assert_eq!(g.flip_delta(&s, 2), 0.0);
    }

    #[test]
    fn interpolation_endpoints_and_shape_check() {
        let g = sample_null(5, &pure(3), 1).unwrap();
        let h = sample_null(5, &pure(3), 2).unwrap();
        assert_eq!(
            interpolate(&g, &h, 0.0).unwrap().flat().collect::<Vec<_>>(),
            g.flat().collect::<Vec<_>>()
        );
        assert_eq!(
            interpolate(&g, &h, 1.0).unwrap().flat().collect::<Vec<_>>(),
            h.flat().collect::<Vec<_>>()
        );
        let other = sample_null(4, &pure(3), 2).unwrap();
        assert!(matches!(interpolate(&g, &other, 0.5), Err(Error::Incompatible(_))));
        assert!(interpolate(&g, &h, 1.5).is_err());
    }

    #[test]
    fn planted_zero_beta_and_shift_at_star() {
        let spec = pure(3);
        let p = sample_planted(6, &spec, 0.0, 9).unwrap();
        assert_eq!(p.g.flat().collect::<Vec<_>>(), p.g_tilde.flat().collect::<Vec<_>>());
        let p = sample_planted(6, &spec, 0.8, 9).unwrap();
        let diff = p.g.energy(&p.sigma_star) - p.g_tilde.energy(&p.sigma_star);
        assert!((diff - 0.8 * 6.0 * spec.value(1.0)).abs() < 1e-12);
    }

    #[test]
    fn dump_roundtrip_and_corruption() {
        let spec = MixtureSpec::new([(2, 0.5), (3, 1.0)]).unwrap();
        let g = sample_planted(4, &spec, 0.3, 2).unwrap().g;
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        let back = DisorderTensor::read_from(&buf[..], DEFAULT_COUPLING_CAP).unwrap();
        assert_eq!(back, g);
        assert!(DisorderTensor::read_from(&buf[..buf.len() - 1], DEFAULT_COUPLING_CAP).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(
            DisorderTensor::read_from(&bad[..], DEFAULT_COUPLING_CAP),
            Err(Error::Format(_))
        ));
        let mut long = buf.clone();
        long.push(0);
        assert!(DisorderTensor::read_from(&long[..], DEFAULT_COUPLING_CAP).is_err());
        assert!(DisorderTensor::read_from(&buf[..], 10).unwrap_err().is_resource());
    }
}
