//! Oracles shared by the integration tests and the acceptance suite.

#![allow(dead_code)]

use pspin::disorder::DisorderTensor;
use pspin::numerics::{adaptive_simpson, normal_pdf, GaussHermite};
use pspin::spins;
use pspin::thresholds::replica_fixed_point_map;
use pspin::MixtureSpec;

/// Untilted ratio E[cosh(aZ) tanh^2(aZ)] / E[cosh(aZ)] by direct quadrature.
pub fn direct_f(spec: &MixtureSpec, beta: f64, q: f64) -> f64 {
    let a = beta * spec.d1(q).sqrt();
    if a < 1.0 {
        let gh = GaussHermite::standard();
        let num = gh.expect(|z| (a * z).cosh() * (a * z).tanh().powi(2));
        let den = gh.expect(|z| (a * z).cosh());
        return num / den;
    }
    // Scale by e^{-a^2/2} inside the integrand to keep it bounded.
    let w = |z: f64| (a * z - 0.5 * a * a).exp() * normal_pdf(z);
    let hi = 14.0 + 2.0 * a;
    let num = adaptive_simpson(|z| (0.5 * (w(z) + w(-z))) * (a * z).tanh().powi(2), -hi, hi, 1e-13, 50).unwrap();
    let den = adaptive_simpson(|z| 0.5 * (w(z) + w(-z)), -hi, hi, 1e-13, 50).unwrap();
    num / den
}

/// Smallest beta on a 1e-3 grid for which some q on a 1e-3 grid has F >= q.
pub fn grid_beta_d(spec: &MixtureSpec) -> f64 {
    let mut beta = 0.0;
    loop {
        beta += 1e-3;
        if (1..=1000).any(|i| {
            let q = f64::from(i) * 1e-3;
            replica_fixed_point_map(spec, beta, q).unwrap() >= q
        }) {
            return beta;
        }
    }
}

/// Uniform draws in [0, 1) from a fixed xorshift stream.
pub fn xorshift_uniforms(count: usize) -> Vec<f64> {
    let mut state = 0x9e37_79b9_7f4a_7c15u64;
    (0..count)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}

/// `log[2^{-N} sum_sigma prod_c phi(g_c - s_c) / prod_c phi(g_c)]` for a
/// pure 2-spin tensor, summing the shifted Gaussian densities explicitly.
pub fn llr_by_density_ratio(g: &DisorderTensor, beta: f64) -> f64 {
    let n = g.n();
    let couplings = g.degree(2).unwrap();
    let scale = beta / (n as f64).sqrt();
    let terms: Vec<f64> = (0..1u64 << n)
        .map(|x| {
            let s = spins::decode(x, n);
            let mut log_ratio = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let shift = scale * s[i] * s[j];
                    let gc = couplings[i * n + j];
                    log_ratio += -0.5 * (gc - shift).powi(2) + 0.5 * gc * gc;
                }
            }
            log_ratio
        })
        .collect();
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|v| (v - m).exp()).sum::<f64>().ln() - n as f64 * std::f64::consts::LN_2
}
