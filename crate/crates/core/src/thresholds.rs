//! Scalar thresholds of the mixed p-spin model.
//!
//! * `beta_d`: smallest inverse temperature at which the replica fixed-point
//!   map `q -> F(q; beta)` has a nonzero fixed point.
//! * `bar_beta_d`: the Gaussian-comparison threshold
//!   `inf_q 2 sqrt(xi'(1)) phi(Phi^{-1}((1+q)/2)) / (xi(1) - xi(q))`, above
//!   which a typical Gibbs sample has no typical-energy point in an overlap
//!   window; and its spherical counterpart.
//! * closed forms: spherical `beta_d`, bounds on `beta_c`, the algorithmic
//!   energy `E_ALG = int_0^1 sqrt(xi'')`, and the large-`p` constants.
//! * the overlap band `(q_low, q_high)` and radii `(r, R)` for pure p-spin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::MixtureSpec;
use crate::numerics::{
    adaptive_simpson, bisect_predicate, golden_section_minimize, normal_cdf, normal_pdf, normal_upper_quantile,
    GaussHermite,
};

const LN_2: f64 = std::f64::consts::LN_2;

/// `sqrt(2 log 2)`, the upper bound on `beta_c` for every Ising mixture.
pub fn sqrt_2_ln_2() -> f64 {
    (2.0 * LN_2).sqrt()
}

/// Solver settings, echoed into every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Step of the coarse `q` grid used by the infimum searches and the
    /// fixed-point existence scan.
    pub q_grid_step: f64,
    /// Final bracket width of the golden-section refinement.
    pub golden_width: f64,
    /// Width of the final `beta` bracket in the `beta_d` bisection.
    pub beta_tol: f64,
    /// Absolute tolerance of the adaptive quadratures.
    pub quad_tol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            q_grid_step: 1e-4,
            golden_width: 1e-10,
            beta_tol: 1e-8,
            quad_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdName {
    BetaD,
    BarBetaD,
    BarBetaDSph,
    BetaDSph,
    BetaCBounds,
    EAlg,
    LargePLimit,
    ConstantC,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThresholdValue {
    Scalar(f64),
    Interval { lo: f64, hi: f64 },
}

impl ThresholdValue {
    pub fn scalar(&self) -> Option<f64> {
        match *self {
            ThresholdValue::Scalar(v) => Some(v),
            ThresholdValue::Interval { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub name: ThresholdName,
    pub value: ThresholdValue,
    /// `q*`, `lambda*` or similar, depending on the threshold.
    pub minimizer: Option<f64>,
    pub spec: Option<MixtureSpec>,
    pub settings: SolverSettings,
}

impl ThresholdReport {
    fn scalar(
        name: ThresholdName,
        value: f64,
        minimizer: Option<f64>,
        spec: Option<&MixtureSpec>,
        settings: SolverSettings,
    ) -> Self {
        Self {
            name,
            value: ThresholdValue::Scalar(value),
            minimizer,
            spec: spec.cloned(),
            settings,
        }
    }

    /// Scalar value; intervals report their upper end.
    pub fn value(&self) -> f64 {
        match self.value {
            ThresholdValue::Scalar(v) => v,
            ThresholdValue::Interval { hi, .. } => hi,
        }
    }
}

impl ThresholdName {
    pub const ALL: [ThresholdName; 8] = [
        ThresholdName::BetaD,
        ThresholdName::BarBetaD,
        ThresholdName::BarBetaDSph,
        ThresholdName::BetaDSph,
        ThresholdName::BetaCBounds,
        ThresholdName::EAlg,
        ThresholdName::LargePLimit,
        ThresholdName::ConstantC,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ThresholdName::BetaD => "beta_d",
            ThresholdName::BarBetaD => "bar_beta_d",
            ThresholdName::BarBetaDSph => "bar_beta_d_sph",
            ThresholdName::BetaDSph => "beta_d_sph",
            ThresholdName::BetaCBounds => "beta_c_bounds",
            ThresholdName::EAlg => "e_alg",
            ThresholdName::LargePLimit => "large_p_limit",
            ThresholdName::ConstantC => "constant_c",
        }
    }

    /// Needs a pure mixture.
    pub fn pure_only(self) -> bool {
        matches!(self, ThresholdName::BetaDSph | ThresholdName::BetaCBounds)
    }
}

impl std::fmt::Display for ThresholdName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ThresholdName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::Parse {
                what: "threshold name",
                input: s.to_string(),
                reason: "unknown threshold".into(),
            })
    }
}

/// Report for one named threshold. Pure-only thresholds on a mixture give
/// [`Error::Incompatible`].
pub fn threshold_report(spec: &MixtureSpec, name: ThresholdName, settings: &SolverSettings) -> Result<ThresholdReport> {
    let pure = || {
        spec.pure_degree()
            .ok_or_else(|| Error::Incompatible(format!("{name} needs a pure mixture, got {spec}")))
    };
    Ok(match name {
        ThresholdName::BetaD => beta_d_with(spec, *settings)?,
        ThresholdName::BarBetaD => bar_beta_d(spec)?,
        ThresholdName::BarBetaDSph => bar_beta_d_spherical(spec)?,
        ThresholdName::BetaDSph => {
            ThresholdReport::scalar(name, beta_d_spherical(pure()?)?, None, Some(spec), *settings)
        }
        ThresholdName::BetaCBounds => {
            let b = beta_c_bounds(pure()?)?;
            ThresholdReport {
                name,
                value: ThresholdValue::Interval { lo: b.lo, hi: b.hi },
                minimizer: None,
                spec: Some(spec.clone()),
                settings: *settings,
            }
        }
        ThresholdName::EAlg => {
            ThresholdReport::scalar(name, e_alg(spec, settings.quad_tol)?, None, Some(spec), *settings)
        }
        ThresholdName::LargePLimit => {
            let c = large_p_constants();
            ThresholdReport::scalar(name, c.limit_value, Some(c.lambda_star), None, *settings)
        }
        ThresholdName::ConstantC => {
            let c = large_p_constants();
            ThresholdReport::scalar(name, c.c, None, None, *settings)
        }
    })
}

/// Every threshold that applies to `spec`.
pub fn all_thresholds(spec: &MixtureSpec, settings: &SolverSettings) -> Result<Vec<ThresholdReport>> {
    ThresholdName::ALL
        .into_iter()
        .filter(|n| !n.pure_only() || spec.pure_degree().is_some_and(|p| p >= 3))
        .map(|n| threshold_report(spec, n, settings))
        .collect()
}

// ---------------------------------------------------------------------------
// Replica fixed point

/// Tilt parameter `a = beta sqrt(xi'(q))` below which the 201-node
/// Gauss–Hermite rule is used; above it the integrand develops a dip of
/// width `1/a` that the fixed rule under-resolves.
const GH_TILT_LIMIT: f64 = 1.0;

/// `F(q; beta) = E[cosh(aZ) tanh^2(aZ)] / E[cosh(aZ)]`, `a = beta sqrt(xi'(q))`.
///
/// Evaluated in the tilted form `E tanh^2(a (a + Z))`, which follows from
/// `cosh(az) phi(z) = e^{a^2/2} (phi(z-a) + phi(z+a)) / 2` and the evenness of
/// `tanh^2`.
pub fn replica_fixed_point_map(spec: &MixtureSpec, beta: f64, q: f64) -> Result<f64> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!("beta = {beta} must be finite and >= 0")));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("q = {q} outside [0, 1]")));
    }
    let a = beta * spec.d1(q).sqrt();
    tilted_tanh2(a, SolverSettings::default().quad_tol)
}

fn tilted_tanh2(a: f64, tol: f64) -> Result<f64> {
    if a == 0.0 {
        return Ok(0.0);
    }
    let f = |z: f64| {
        let t = (a * (a + z)).tanh();
        t * t
    };
    if a <= GH_TILT_LIMIT {
        return Ok(GaussHermite::standard().expect(f));
    }
    // Split at the dip z = -a; the N(0,1) mass beyond |z| = 12 is < 1e-32.
    let g = |z: f64| f(z) * normal_pdf(z);
    let lo = -12.0;
    let hi = 12.0;
    let mid = (-a).clamp(lo, hi);
    let mut total = 0.0;
    for (x0, x1) in [(lo, mid), (mid, hi)] {
        if x1 > x0 {
            total += adaptive_simpson(g, x0, x1, 0.5 * tol, 50)?;
        }
    }
    Ok(total.clamp(0.0, 1.0))
}

fn q_grid(step: f64) -> impl Iterator<Item = f64> {
    let n = (1.0 / step).round() as usize;
    (1..=n).map(move |i| (i as f64 * step).min(1.0))
}

/// Largest value of `F(q; beta) - q` over the grid `q in (0, 1]` and where
/// it occurs. A nonnegative maximum means a nonzero fixed point exists.
fn fixed_point_gap(spec: &MixtureSpec, beta: f64, step: f64) -> Result<(f64, f64)> {
    let mut best = (f64::NEG_INFINITY, 0.0);
    for q in q_grid(step) {
        let gap = replica_fixed_point_map(spec, beta, q)? - q;
        if gap > best.0 {
            best = (gap, q);
        }
    }
    Ok(best)
}

fn has_fixed_point(spec: &MixtureSpec, beta: f64, step: f64) -> Result<bool> {
    for q in q_grid(step) {
        if replica_fixed_point_map(spec, beta, q)? >= q {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Dynamical threshold `beta_d = inf{beta : exists q in (0,1], q = F(q; beta)}`
/// by bisection on `beta` of the fixed-point existence predicate.
///
/// The predicate is monotone because `F` is nondecreasing in `beta`.
/// `minimizer` holds the fixed point `q*` found at `beta_d + tol`.
pub fn beta_d(spec: &MixtureSpec, tol: f64) -> Result<ThresholdReport> {
    let settings = SolverSettings {
        beta_tol: tol,
        ..SolverSettings::default()
    };
    beta_d_with(spec, settings)
}

pub fn beta_d_with(spec: &MixtureSpec, settings: SolverSettings) -> Result<ThresholdReport> {
    if !(settings.beta_tol > 0.0) {
        return Err(Error::Domain("beta tolerance must be positive".into()));
    }
    let step = settings.q_grid_step;
    let lo = 0.0;
    let hi = 2.0 * sqrt_2_ln_2();
    if has_fixed_point(spec, lo, step)? {
        return Err(Error::Bracket("fixed point present at beta = 0".into()));
    }
    if !has_fixed_point(spec, hi, step)? {
        return Err(Error::Bracket(format!(
            "no nonzero fixed point at the upper bracket beta = {hi}"
        )));
    }
    let mut failure = None;
    let (_, beta_hi) = bisect_predicate(lo, hi, settings.beta_tol, |b| match has_fixed_point(spec, b, step) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            true
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let (_, q_star) = fixed_point_gap(spec, beta_hi + settings.beta_tol, step)?;
    Ok(ThresholdReport::scalar(
        ThresholdName::BetaD,
        beta_hi,
        Some(q_star),
        Some(spec),
        settings,
    ))
}

// ---------------------------------------------------------------------------
// Infimum thresholds

/// Objective of `bar_beta_d` written in `s = 1 - q`.
fn bar_objective_s(spec: &MixtureSpec, s: f64) -> f64 {
    let h = normal_upper_quantile(0.5 * s);
    2.0 * spec.d1(1.0).sqrt() * normal_pdf(h) / spec.drop_from_one(s)
}

/// Objective of the spherical threshold in `s = 1 - q`.
fn sph_objective_s(spec: &MixtureSpec, s: f64) -> f64 {
    (spec.d1(1.0) * s * (2.0 - s)).sqrt() / spec.drop_from_one(s)
}

/// `2 sqrt(xi'(1)) phi(Phi^{-1}((1+q)/2)) / (xi(1) - xi(q))`.
pub fn bar_beta_d_objective(spec: &MixtureSpec, q: f64) -> f64 {
    bar_objective_s(spec, 1.0 - q)
}

/// `sqrt(xi'(1) (1 - q^2)) / (xi(1) - xi(q))`.
pub fn bar_beta_d_spherical_objective(spec: &MixtureSpec, q: f64) -> f64 {
    sph_objective_s(spec, 1.0 - q)
}

/// Infimum over `q in (0, 1)` of an objective given in `s = 1 - q`.
///
/// The coarse grid is uniform in `q` plus log-spaced in `s` below the
/// uniform step, so minimizers at `1 - q = O(1/p)` for very large `p` are
/// still bracketed. Refinement is golden section in `ln s`. Ties go to the
/// smallest `q` (largest `s`).
fn infimum_in_s(objective: impl Fn(f64) -> f64, settings: &SolverSettings) -> Result<(f64, f64)> {
    let step = settings.q_grid_step;
    let n = (1.0 / step).round() as usize;
    // s values in decreasing order (q increasing).
    let mut grid: Vec<f64> = (1..n).map(|i| 1.0 - i as f64 * step).collect();
    let decades = 12.0;
    let per_decade = 100.0;
    let k_max = (decades * per_decade) as usize;
    for k in 1..=k_max {
        grid.push(step * 10f64.powf(-(k as f64) / per_decade));
    }
    let mut best_i = 0;
    let mut best_v = f64::INFINITY;
    for (i, &s) in grid.iter().enumerate() {
        let v = objective(s);
        if !v.is_finite() {
            return Err(Error::Domain(format!("objective not finite at q = {}", 1.0 - s)));
        }
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    let s_hi = if best_i == 0 { 1.0 } else { grid[best_i - 1] };
    let s_lo = grid.get(best_i + 1).copied().unwrap_or(grid[best_i] * 0.5);
    let (t, v) = golden_section_minimize(
        |t: f64| objective(t.exp()),
        s_lo.ln(),
        s_hi.ln(),
        settings.golden_width.min(1e-10),
    );
    if v <= best_v {
        Ok((t.exp(), v))
    } else {
        Ok((grid[best_i], best_v))
    }
}

/// Gaussian-comparison threshold for Ising mixtures, with minimizer `q*`.
pub fn bar_beta_d(spec: &MixtureSpec) -> Result<ThresholdReport> {
    let settings = SolverSettings::default();
    let (s, v) = infimum_in_s(|s| bar_objective_s(spec, s), &settings)?;
    Ok(ThresholdReport::scalar(
        ThresholdName::BarBetaD,
        v,
        Some(1.0 - s),
        Some(spec),
        settings,
    ))
}

/// Spherical analogue of [`bar_beta_d`].
pub fn bar_beta_d_spherical(spec: &MixtureSpec) -> Result<ThresholdReport> {
    let settings = SolverSettings::default();
    let (s, v) = infimum_in_s(|s| sph_objective_s(spec, s), &settings)?;
    Ok(ThresholdReport::scalar(
        ThresholdName::BarBetaDSph,
        v,
        Some(1.0 - s),
        Some(spec),
        settings,
    ))
}

// ---------------------------------------------------------------------------
// Large-p constants

/// `sqrt(2 lambda) / (1 - e^{-lambda})`, the large-`p` limit of the spherical
/// objective at `q = 1 - lambda/p`.
pub fn spherical_limit_profile(lambda: f64) -> f64 {
    (2.0 * lambda).sqrt() / -(-lambda).exp_m1()
}

/// `v(lambda) = lambda / (1 - e^{-lambda})`, increasing with `v(0+) = 1`.
pub fn v_lambda(lambda: f64) -> f64 {
    if lambda == 0.0 {
        1.0
    } else {
        lambda / -(-lambda).exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LargePConstants {
    /// `inf_lambda sqrt(2 lambda)/(1 - e^{-lambda})`.
    pub limit_value: f64,
    pub lambda_star: f64,
    /// Smallest level whose sublevel interval `[lambda2, lambda1]` has
    /// `lambda1 / lambda2 >= 3`.
    pub c: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

/// Endpoints `(lambda2, lambda1)` of `{lambda : profile(lambda) <= level}`.
fn sublevel_interval(level: f64, lambda_star: f64) -> (f64, f64) {
    let (_, l2) = bisect_predicate(1e-12, lambda_star, 1e-14, |l| spherical_limit_profile(l) <= level);
    let mut upper = 2.0 * lambda_star;
    while spherical_limit_profile(upper) <= level {
        upper *= 2.0;
    }
    let (l1, _) = bisect_predicate(lambda_star, upper, 1e-14, |l| spherical_limit_profile(l) > level);
    (l2, l1)
}

pub fn large_p_constants() -> LargePConstants {
    let (lambda_star, limit_value) = golden_section_minimize(spherical_limit_profile, 1e-3, 20.0, 1e-12);
    let (_, c) = bisect_predicate(limit_value, limit_value + 10.0, 1e-13, |v| {
        let (l2, l1) = sublevel_interval(v, lambda_star);
        l1 >= 3.0 * l2
    });
    let (lambda2, lambda1) = sublevel_interval(c, lambda_star);
    LargePConstants {
        limit_value,
        lambda_star,
        c,
        lambda1,
        lambda2,
    }
}

/// `sqrt((p-1)^{p-1} / (p (p-2)^{p-2}))`, evaluated in log space.
pub fn beta_d_spherical(p: u32) -> Result<f64> {
    if p < 3 {
        return Err(Error::InvalidDegree {
            degree: p.into(),
            reason: "spherical beta_d needs p >= 3",
        });
    }
    let pf = f64::from(p);
    let xlnx = |x: f64| if x == 0.0 { 0.0 } else { x * x.ln() };
    let log_sq = xlnx(pf - 1.0) - pf.ln() - xlnx(pf - 2.0);
    Ok((0.5 * log_sq).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// `(1 - 2^{-p}) sqrt(2 log 2) <= beta_c <= sqrt(2 log 2)`.
pub fn beta_c_bounds(p: u32) -> Result<Interval> {
    if p < 2 {
        return Err(Error::InvalidDegree {
            degree: p.into(),
            reason: "beta_c bounds need p >= 2",
        });
    }
    let hi = sqrt_2_ln_2();
    Ok(Interval {
        lo: (1.0 - 0.5f64.powi(p as i32)) * hi,
        hi,
    })
}

/// Outcome of checking a user inverse temperature against the `beta_c`
/// bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaCheck {
    BelowCritical,
    /// Between the lower and upper bounds: possibly above `beta_c`.
    Uncertain,
    /// Above the upper bound.
    Rejected,
}

pub fn check_beta(beta: f64, p: u32) -> Result<BetaCheck> {
    let b = beta_c_bounds(p)?;
    Ok(if beta > b.hi {
        BetaCheck::Rejected
    } else if beta >= b.lo {
        BetaCheck::Uncertain
    } else {
        BetaCheck::BelowCritical
    })
}

/// `E_ALG = int_0^1 sqrt(xi''(x)) dx`.
///
/// Integrated after the substitution `x = t^2`, which turns the `sqrt(x)`
/// behaviour at the origin (lowest degree 3) into a polynomial.
pub fn e_alg(spec: &MixtureSpec, quad_tol: f64) -> Result<f64> {
    if !(quad_tol > 0.0) {
        return Err(Error::Domain("quadrature tolerance must be positive".into()));
    }
    adaptive_simpson(|t| 2.0 * t * spec.d2(t * t).max(0.0).sqrt(), 0.0, 1.0, quad_tol, 50)
}

// ---------------------------------------------------------------------------
// Dual of the slice maximum

/// `E|g + h| - h q = h (2 Phi(h) - 1) + 2 phi(h) - h q`.
pub fn dual_objective(h: f64, q: f64) -> f64 {
    h * (2.0 * normal_cdf(h) - 1.0) + 2.0 * normal_pdf(h) - h * q
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualMinimum {
    pub h_star: f64,
    pub min_value: f64,
}

/// Minimizer `h* = Phi^{-1}((1+q)/2)` and minimum `2 phi(h*)` of
/// [`dual_objective`].
pub fn u_dual(q: f64) -> Result<DualMinimum> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::Domain(format!("q = {q} outside [0, 1)")));
    }
    let h_star = normal_upper_quantile(0.5 * (1.0 - q));
    Ok(DualMinimum {
        h_star,
        min_value: 2.0 * normal_pdf(h_star),
    })
}

// ---------------------------------------------------------------------------
// Overlap band for pure p-spin

/// Overlap window and radii for the soft overlap gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OgpBand {
    pub q_low: f64,
    pub q_high: f64,
    /// Energy slack: witnesses are searched in `S_{(1-eps) beta}`.
    pub eps: f64,
    /// Exponent of the pure p-spin construction.
    pub delta: f64,
    /// Inner radius `(1 - q_high) / 2`.
    pub r: f64,
    /// Outer radius `(1 - q_low) / 2`.
    #[serde(rename = "R")]
    pub big_r: f64,
    /// Exponential rate `c` used for exceptional-set thresholds.
    pub rate: f64,
}

pub const DEFAULT_RATE: f64 = 0.1;

impl OgpBand {
    pub fn new(q_low: f64, q_high: f64, eps: f64, delta: f64, rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&q_low) || !(q_high > q_low && q_high <= 1.0) {
            return Err(Error::Domain(format!(
                "overlap window [{q_low}, {q_high}] must satisfy 0 <= q_low < q_high <= 1"
            )));
        }
        if !(eps > 0.0) || !(delta > 0.0) || !(rate > 0.0) {
            return Err(Error::Domain("eps, delta and rate must be positive".into()));
        }
        Ok(Self {
            q_low,
            q_high,
            eps,
            delta,
            r: 0.5 * (1.0 - q_high),
            big_r: 0.5 * (1.0 - q_low),
            rate,
        })
    }

    /// Band from a user window, with `delta` a quarter of its width.
    pub fn from_window(q_low: f64, q_high: f64, eps: f64, rate: f64) -> Result<Self> {
        Self::new(q_low, q_high, eps, 0.25 * (q_high - q_low), rate)
    }

    /// Band from user radii `r < R`.
    pub fn from_radii(r: f64, big_r: f64, eps: f64, rate: f64) -> Result<Self> {
        if !(r >= 0.0 && r < big_r && big_r <= 0.5) {
            return Err(Error::Domain(format!(
                "radii must satisfy 0 <= r < R <= 1/2, got r = {r}, R = {big_r}"
            )));
        }
        let delta = (big_r - r) / 4.0;
        Self::new(
            1.0 - 2.0 * big_r,
            1.0 - 2.0 * r,
            eps,
            delta.max(f64::MIN_POSITIVE),
            rate,
        )
    }

    /// True when `r < R/3`, the regime with separation between all clusters.
    pub fn full_separation(&self) -> bool {
        self.r < self.big_r / 3.0
    }
}

/// Result of the pure p-spin band construction; infeasibility is reported,
/// not raised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandConstruction {
    pub p: u32,
    pub eps_prime: f64,
    pub delta: f64,
    /// Inverse temperature `(1 + eps') sqrt(2 log p / p)` at which the
    /// construction is checked.
    pub beta: f64,
    pub band: Option<OgpBand>,
    /// The energy-slack inequality holds at every point of a grid covering
    /// the band (endpoints included).
    pub condition_holds: bool,
    pub feasible: bool,
    pub notes: Vec<String>,
}

/// Pure p-spin band: largest `delta` with `v(delta) sqrt(1+delta) < 1+eps'`,
/// `q_low = 1 - delta/p`, `q_high = 1 - p^{-(1+delta)}`, and `eps` half of
/// the available slack.
pub fn ogp_band_pure_p(p: u32, eps_prime: f64, rate: f64) -> Result<BandConstruction> {
    if p < 3 {
        return Err(Error::InvalidDegree {
            degree: p.into(),
            reason: "band construction needs p >= 3",
        });
    }
    if !(eps_prime > 0.0 && eps_prime.is_finite()) {
        return Err(Error::Domain(format!("eps' = {eps_prime} must be positive")));
    }
    let pf = f64::from(p);
    let target = 1.0 + eps_prime;
    let lhs = |d: f64| v_lambda(d) * (1.0 + d).sqrt();
    let mut upper = 1.0;
    while lhs(upper) < target {
        upper *= 2.0;
    }
    // `lo` keeps the strict inequality.
    let (delta, _) = bisect_predicate(0.0, upper, 1e-13, |d| lhs(d) >= target);

    let mut notes = Vec::new();
    let scale = (2.0 * pf.ln() / pf).sqrt();
    let beta = target * scale;
    let q_low = 1.0 - delta / pf;
    let q_high = 1.0 - pf.powf(-(1.0 + delta));

    let slack = |lambda: f64| target * -(-lambda).exp_m1() - lambda * (1.0 + delta).sqrt();
    // slack is concave in lambda, so its minimum over the range is at an end.
    let lam_lo = pf.powf(-delta);
    let min_slack = slack(lam_lo).min(slack(delta));
    let eps = 0.5 * min_slack * scale / sqrt_2_ln_2();

    if !(delta > 0.0) {
        notes.push("no delta > 0 satisfies v(delta) sqrt(1 + delta) < 1 + eps'".into());
    }
    if !(q_low < q_high) {
        notes.push(format!(
            "empty window: q_low = {q_low} >= q_high = {q_high} (needs delta p^delta > 1)"
        ));
    }
    if !(eps > 0.0) {
        notes.push(format!("no positive energy slack (min slack {min_slack:.3e})"));
    }
    let band = if delta > 0.0 && q_low < q_high && eps > 0.0 {
        Some(OgpBand::new(q_low, q_high, eps, delta, rate)?)
    } else {
        None
    };

    let spec = MixtureSpec::pure(p)?;
    let condition_holds = band
        .map(|b| slack_condition_on_band(&spec, beta, &b, 200))
        .unwrap_or(false);
    if band.is_some() && !condition_holds {
        notes.push(format!("energy-slack condition fails somewhere in the band at p = {p}"));
    }
    if let Some(b) = band {
        if !b.full_separation() {
            notes.push("r >= R/3: only separation between most clusters".into());
        }
    }
    Ok(BandConstruction {
        p,
        eps_prime,
        delta,
        beta,
        band,
        condition_holds,
        feasible: band.is_some() && condition_holds,
        notes,
    })
}

/// `2 sqrt(xi'(1)) phi(Phi^{-1}((1+q)/2)) < (1 - eps) beta xi(1) - beta xi(q)`
/// at one overlap.
pub fn slack_condition_at(spec: &MixtureSpec, beta: f64, eps: f64, q: f64) -> bool {
    let s = 1.0 - q;
    let lhs = 2.0 * spec.d1(1.0).sqrt() * normal_pdf(normal_upper_quantile(0.5 * s));
    let rhs = beta * spec.drop_from_one(s) - eps * beta * spec.value(1.0);
    lhs < rhs
}

/// [`slack_condition_at`] on `points + 1` evenly spaced overlaps spanning the
/// band, endpoints included.
pub fn slack_condition_on_band(spec: &MixtureSpec, beta: f64, band: &OgpBand, points: usize) -> bool {
    let points = points.max(1);
    (0..=points).all(|i| {
        let q = band.q_low + (band.q_high - band.q_low) * i as f64 / points as f64;
        slack_condition_at(spec, beta, band.eps, q)
    })
}
