//! The mixture function `xi(x) = sum_k gamma_k^2 x^k` and its derivatives.
//!
//! A [`MixtureSpec`] fixes the covariance of the Hamiltonian:
//! `E[H(s) H(s')] = N xi(<s, s'> / N)`. Coefficients are stored as the
//! `gamma_k` that multiply the couplings, so a negative `gamma_k` describes
//! the same law as `|gamma_k|`.
//!
//! ```
//! use pspin::mixture::MixtureSpec;
//!
//! let spec: MixtureSpec = "2:1.0,3:2.0".parse().unwrap();
//! assert!((spec.value(0.5) - 0.75).abs() < 1e-15);
//! assert_eq!(spec.to_string(), "2:1,3:2");
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse list of `(degree, gamma)` pairs, sorted by degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(u32, f64)>", into = "Vec<(u32, f64)>")]
pub struct MixtureSpec {
    terms: Vec<(u32, f64)>,
}

impl MixtureSpec {
    pub fn new(terms: impl IntoIterator<Item = (u32, f64)>) -> Result<Self> {
        let mut terms: Vec<(u32, f64)> = terms.into_iter().collect();
        terms.sort_by_key(|&(k, _)| k);
        if terms.is_empty() {
            return Err(Error::InvalidMixture("no coefficients".into()));
        }
        for w in terms.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidMixture(format!("degree {} repeated", w[0].0)));
            }
        }
        for &(k, g) in &terms {
            if k < 2 {
                return Err(Error::InvalidDegree {
                    degree: k.into(),
                    reason: "mixture degrees must be at least 2",
                });
            }
            if !g.is_finite() {
                return Err(Error::InvalidMixture(format!("gamma_{k} is not finite")));
            }
        }
        if terms.iter().all(|&(_, g)| g == 0.0) {
            return Err(Error::InvalidMixture("all coefficients are zero".into()));
        }
        Ok(Self { terms })
    }

    /// The pure p-spin mixture `xi(x) = x^p`.
    pub fn pure(p: u32) -> Result<Self> {
        if p < 2 {
            return Err(Error::InvalidDegree {
                degree: p.into(),
                reason: "pure p-spin needs p >= 2",
            });
        }
        Self::new([(p, 1.0)])
    }

    pub fn terms(&self) -> &[(u32, f64)] {
        &self.terms
    }

    pub fn degrees(&self) -> impl Iterator<Item = u32> + '_ {
        self.terms.iter().map(|&(k, _)| k)
    }

    /// Largest degree `P` present in the mixture.
    pub fn max_degree(&self) -> u32 {
        self.terms.last().map(|&(k, _)| k).unwrap_or(0)
    }

    pub fn gamma(&self, degree: u32) -> Option<f64> {
        self.terms.iter().find(|&&(k, _)| k == degree).map(|&(_, g)| g)
    }

    /// `Some(p)` when the mixture is exactly `x^p` (up to the sign of gamma).
    pub fn pure_degree(&self) -> Option<u32> {
        match self.terms.as_slice() {
            [(k, g)] if g.abs() == 1.0 => Some(*k),
            _ => None,
        }
    }

    /// `xi`, `xi'` or `xi''` at `x`, selected by `order`.
    pub fn xi(&self, x: f64, order: u32) -> Result<f64> {
        if order > 2 {
            return Err(Error::Domain(format!("derivative order {order} not in {{0,1,2}}")));
        }
        Ok(self.horner(x, order))
    }

    pub fn value(&self, x: f64) -> f64 {
        self.horner(x, 0)
    }

    pub fn d1(&self, x: f64) -> f64 {
        self.horner(x, 1)
    }

    pub fn d2(&self, x: f64) -> f64 {
        self.horner(x, 2)
    }

    /// `xi(1) - xi(1 - s)`, accurate when `s` is tiny.
    pub fn drop_from_one(&self, s: f64) -> f64 {
        let log1ms = (-s).ln_1p();
        self.terms
            .iter()
            .map(|&(k, g)| -g * g * (f64::from(k) * log1ms).exp_m1())
            .sum()
    }

    // Sparse Horner: walk degrees from the top, multiplying by x^gap between
    // consecutive exponents of the differentiated polynomial.
    fn horner(&self, x: f64, order: u32) -> f64 {
        let mut acc = 0.0;
        let mut prev_exp: Option<u32> = None;
        for &(k, g) in self.terms.iter().rev() {
            if k < order {
                continue;
            }
            let falling = (0..order).fold(1.0, |f, j| f * f64::from(k - j));
            let coeff = g * g * falling;
            let exp = k - order;
            acc = match prev_exp {
                Some(pe) => acc * powi(x, pe - exp) + coeff,
                None => coeff,
            };
            prev_exp = Some(exp);
        }
        match prev_exp {
            Some(e) => acc * powi(x, e),
            None => 0.0,
        }
    }
}

fn powi(x: f64, e: u32) -> f64 {
    x.powi(e as i32)
}

impl fmt::Display for MixtureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &(k, g)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}:{g}")?;
        }
        Ok(())
    }
}

impl FromStr for MixtureSpec {
    type Err = Error;

    /// Accepts `k:gamma` pairs separated by commas, or the shorthand `pure:p`.
    fn from_str(s: &str) -> Result<Self> {
        let perr = |reason: String| Error::Parse {
            what: "mixture",
            input: s.to_string(),
            reason,
        };
        let s = s.trim();
        if let Some(p) = s.strip_prefix("pure:") {
            let p: u32 = p.trim().parse().map_err(|e| perr(format!("{e}")))?;
            return Self::pure(p);
        }
        let mut terms = Vec::new();
        for item in s.split(',') {
            let (k, g) = item
                .split_once(':')
                .ok_or_else(|| perr(format!("expected k:gamma, got {item:?}")))?;
            let k: u32 = k.trim().parse().map_err(|e| perr(format!("degree: {e}")))?;
            let g: f64 = g.trim().parse().map_err(|e| perr(format!("gamma: {e}")))?;
            terms.push((k, g));
        }
        Self::new(terms)
    }
}

impl TryFrom<Vec<(u32, f64)>> for MixtureSpec {
    type Error = Error;

    fn try_from(terms: Vec<(u32, f64)>) -> Result<Self> {
        Self::new(terms)
    }
}

impl From<MixtureSpec> for Vec<(u32, f64)> {
    fn from(spec: MixtureSpec) -> Self {
        spec.terms
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pure_cubic_values() {
        let s = MixtureSpec::pure(3).unwrap();
        assert_eq!(s.xi(1.0, 0).unwrap(), 1.0);
        assert_eq!(s.xi(1.0, 1).unwrap(), 3.0);
        assert_eq!(s.xi(1.0, 2).unwrap(), 6.0);
        assert_eq!(s.xi(0.0, 1).unwrap(), 0.0);
        assert_eq!(s.pure_degree(), Some(3));
    }

    #[test]
    fn pure_quadratic_derivative_at_zero() {
        let s = MixtureSpec::pure(2).unwrap();
        assert_eq!(s.d1(0.0), 0.0);
        assert_eq!(s.d2(0.3), 2.0);
    }

    #[test]
    fn rejects_bad_degrees() {
        assert!(matches!(MixtureSpec::pure(1), Err(Error::InvalidDegree { .. })));
        assert!(MixtureSpec::new([(1, 1.0)]).is_err());
        assert!(MixtureSpec::new([(2, 1.0), (2, 0.5)]).is_err());
        assert!(MixtureSpec::new([(2, 0.0)]).is_err());
        assert!(MixtureSpec::new([(3, f64::NAN)]).is_err());
        assert!(MixtureSpec::pure(3).unwrap().xi(0.5, 3).is_err());
    }

    #[test]
    fn two_term_mixture() {
        let s = MixtureSpec::new([(2, 1.0), (3, 2.0)]).unwrap();
        assert!((s.value(0.5) - 0.75).abs() < 1e-15);
        // xi' = 2x + 12x^2, xi'' = 2 + 24x
        assert!((s.d1(0.5) - 4.0).abs() < 1e-15);
        assert!((s.d2(0.5) - 14.0).abs() < 1e-15);
    }

    #[test]
    fn negative_gamma_is_equivalent() {
        let a = MixtureSpec::new([(2, -1.5), (4, 0.5)]).unwrap();
        let b = MixtureSpec::new([(2, 1.5), (4, 0.5)]).unwrap();
        for x in [0.0, 0.3, 0.9, 1.0] {
            assert_eq!(a.value(x), b.value(x));
        }
    }

    #[test]
    fn parse_and_display() {
        let s: MixtureSpec = "pure:3".parse().unwrap();
        assert_eq!(s, MixtureSpec::pure(3).unwrap());
        let s: MixtureSpec = " 3:2.0, 2:1 ".parse().unwrap();
        assert_eq!(s.to_string(), "2:1,3:2");
        assert!("3".parse::<MixtureSpec>().is_err());
        assert!("pure:x".parse::<MixtureSpec>().is_err());
        assert!("1:1.0".parse::<MixtureSpec>().is_err());
    }

    #[test]
    fn drop_from_one_matches_direct() {
        let s = MixtureSpec::new([(2, 0.5), (5, 1.0)]).unwrap();
        for q in [0.0, 0.2, 0.7, 0.99] {
            let direct = s.value(1.0) - s.value(q);
            assert!((s.drop_from_one(1.0 - q) - direct).abs() < 1e-14);
        }
        let p = MixtureSpec::pure(1_000_000).unwrap();
        let d = p.drop_from_one(1e-6);
        assert!((d - (1.0 - (-1.0f64).exp())).abs() < 1e-6);
    }

    fn arb_spec() -> impl Strategy<Value = MixtureSpec> {
        prop::collection::btree_map(2u32..9, -3.0f64..3.0, 1..4)
            .prop_filter("one nonzero", |m| m.values().any(|g| g.abs() > 1e-3))
            .prop_map(|m| MixtureSpec::new(m).unwrap())
    }

    proptest! {
        #[test]
        fn vanishes_at_zero(spec in arb_spec()) {
            prop_assert_eq!(spec.value(0.0), 0.0);
            prop_assert_eq!(spec.d1(0.0), 0.0);
        }

        #[test]
        fn nonnegative_and_nondecreasing_on_unit_interval(spec in arb_spec(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for order in 0..3 {
                let f_lo = spec.xi(lo, order).unwrap();
                let f_hi = spec.xi(hi, order).unwrap();
                prop_assert!(f_lo >= 0.0);
                prop_assert!(f_hi + 1e-12 * f_hi.abs() >= f_lo);
            }
        }

        #[test]
        fn central_difference_matches_derivative(spec in arb_spec()) {
            let h = 1e-5;
            for i in 1..10 {
                let x = f64::from(i) / 10.0;
                let fd = (spec.value(x + h) - spec.value(x - h)) / (2.0 * h);
                let scale = spec.d2(1.0).max(1.0) + spec.value(1.0);
                prop_assert!((fd - spec.d1(x)).abs() < 1e-6 * scale, "x={} fd={} d1={}", x, fd, spec.d1(x));
                let fd2 = (spec.d1(x + h) - spec.d1(x - h)) / (2.0 * h);
                prop_assert!((fd2 - spec.d2(x)).abs() < 1e-5 * scale * 10.0);
            }
        }

        #[test]
        fn text_encoding_round_trips(spec in arb_spec()) {
            let back: MixtureSpec = spec.to_string().parse().unwrap();
            prop_assert_eq!(back, spec);
        }
    }
}
