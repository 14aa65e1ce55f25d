//! Scalar numerical kernels shared by the threshold solvers and the
//! Monte Carlo estimators.

use std::f64::consts::{PI, SQRT_2};
use std::sync::OnceLock;

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::function::erf;

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x / SQRT_2)
}

/// Upper tail `P(Z > x)`, accurate far into the tail.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erf::erfc(x / SQRT_2)
}

/// `x` with `P(Z > x) = tail`. Taking the tail directly avoids the
/// cancellation in `Phi^{-1}(1 - tail)` when `tail` is tiny.
pub fn normal_upper_quantile(tail: f64) -> f64 {
    if tail <= 0.0 {
        return f64::INFINITY;
    }
    if tail >= 1.0 {
        return f64::NEG_INFINITY;
    }
    let mut x = SQRT_2 * erf::erfc_inv(2.0 * tail);
    // One Newton polish on the tail equation.
    let dens = normal_pdf(x);
    if dens > 0.0 {
        x += (normal_sf(x) - tail) / dens;
    }
    x
}

/// Standard normal quantile `Phi^{-1}(p)`.
pub fn normal_quantile(p: f64) -> f64 {
    if p > 0.5 {
        normal_upper_quantile(1.0 - p)
    } else {
        -normal_upper_quantile(p)
    }
}

/// Gauss–Hermite rule for expectations under `N(0, 1)`:
/// `E f(Z) ≈ sum_i w_i f(x_i)`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Builds the `n`-point rule. Nodes start from the Golub–Welsch
    /// eigenvalues of the Jacobi matrix and are polished by Newton steps on
    /// the orthonormal Hermite recurrence, which also yields the weights.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        // Physicists' convention, weight exp(-x^2).
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let mut roots: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
        roots.sort_by(f64::total_cmp);

        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for (i, &guess) in roots.iter().enumerate() {
            // Exploit symmetry: mirror the positive half.
            if i < n / 2 {
                continue;
            }
            let mut z = if n % 2 == 1 && i == n / 2 { 0.0 } else { guess };
            let mut deriv = hermite_orthonormal(n, z).1;
            for _ in 0..10 {
                let (p, dp) = hermite_orthonormal(n, z);
                deriv = dp;
                let step = p / dp;
                z -= step;
                if step.abs() <= 4.0 * f64::EPSILON * z.abs().max(1.0) {
                    deriv = hermite_orthonormal(n, z).1;
                    break;
                }
            }
            nodes.push(z);
            weights.push(2.0 / (deriv * deriv));
        }
        let sqrt_pi = PI.sqrt();
        let half: Vec<(f64, f64)> = nodes
            .iter()
            .zip(&weights)
            .map(|(&x, &w)| (x * SQRT_2, w / sqrt_pi))
            .collect();
        let mut pairs: Vec<(f64, f64)> = half.iter().map(|&(x, w)| (-x, w)).filter(|p| p.0 < 0.0).collect();
        pairs.extend(half.iter().copied());
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        }
    }

    /// Shared 201-node rule used for the replica fixed-point map.
    pub fn standard() -> &'static GaussHermite {
        static RULE: OnceLock<GaussHermite> = OnceLock::new();
        RULE.get_or_init(|| GaussHermite::new(201))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E f(Z)` for `Z ~ N(0, 1)`.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Orthonormal Hermite polynomial of degree `n` at `z` and the derivative
/// scale used by the Newton step and the weight formula.
fn hermite_orthonormal(n: usize, z: f64) -> (f64, f64) {
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let (mut p1, mut p2) = (PIM4, 0.0);
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
///
/// Fails with [`Error::Accuracy`] when the panels that hit `max_depth`
/// without converging carry more than `tol` of estimated error in total.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_depth: u32) -> Result<f64> {
    struct State<F> {
        f: F,
        unresolved: f64,
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        st: &mut State<F>,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = (st.f)(lm);
        let frm = (st.f)(rm);
        let h = (b - a) / 12.0;
        let left = h * (fa + 4.0 * flm + fm);
        let right = h * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        if depth == 0 || m <= a || m >= b {
            st.unresolved += delta.abs() / 15.0;
            return left + right + delta / 15.0;
        }
        recurse(st, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(st, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }

    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut st = State { f, unresolved: 0.0 };
    let value = recurse(&mut st, a, b, fa, fm, fb, whole, tol, max_depth);
    if st.unresolved > tol || !value.is_finite() {
        return Err(Error::Accuracy {
            what: "adaptive Simpson",
            residual: st.unresolved,
        });
    }
    Ok(value)
}

/// Golden-section search for the minimum of a unimodal `f` on `[a, b]`,
/// shrinking the bracket below `width`. Returns `(x_min, f_min)`.
pub fn golden_section_minimize(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, width: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iters = 0;
    while (b - a).abs() > width && iters < 500 {
        // Ties keep the left point so the smallest minimizer wins.
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
        iters += 1;
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Bisection for the switch point of a monotone predicate with
/// `pred(lo) == false` and `pred(hi) == true`. Returns `(lo, hi)` bracketing
/// the switch with `hi - lo <= tol`.
pub fn bisect_predicate(mut lo: f64, mut hi: f64, tol: f64, mut pred: impl FnMut(f64) -> bool) -> (f64, f64) {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

/// Binary entropy in nats, `h(s) = -s ln s - (1-s) ln(1-s)`.
pub fn binary_entropy(s: f64) -> f64 {
    let term = |x: f64| if x <= 0.0 { 0.0 } else { -x * x.ln() };
    term(s) + term(1.0 - s)
}

/// Numerically stable `ln sum exp(x_i)`; returns `-inf` for an empty input.
pub fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}
