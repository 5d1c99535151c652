//! Problem description: the unit-diffusion process, the two killing
//! boundaries, the potential, the terminal payoff and the scheme parameters.
//!
//! Everything here is immutable once built and `Send + Sync`, so a single
//! [`Problem`] can be shared between threads pricing at different `n`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type StateFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type ComplexStateFn = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;
pub type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Drift value together with the partial derivatives the moment matching
/// needs, all evaluated at one `(t, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriftPartials {
    pub value: f64,
    pub dt: f64,
    pub dx: f64,
    pub dxx: f64,
}

impl DriftPartials {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.dt.is_finite() && self.dx.is_finite() && self.dxx.is_finite()
    }
}

/// Drift coefficient `mu(t, x)` of a unit-diffusion process.
pub trait Drift: Send + Sync {
    fn value(&self, t: f64, x: f64) -> f64;

    fn partials(&self, t: f64, x: f64) -> DriftPartials;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDrift;

impl Drift for ZeroDrift {
    fn value(&self, _t: f64, _x: f64) -> f64 {
        0.0
    }

    fn partials(&self, _t: f64, _x: f64) -> DriftPartials {
        DriftPartials::default()
    }
}

/// Drift given as four hand-written functions: `mu`, `d/dt mu`, `d/dx mu`,
/// `d2/dx2 mu`. Useful for drifts the expression language cannot express.
#[derive(Clone)]
pub struct FnDrift {
    pub value: SpaceTimeFn,
    pub dt: SpaceTimeFn,
    pub dx: SpaceTimeFn,
    pub dxx: SpaceTimeFn,
}

impl Drift for FnDrift {
    fn value(&self, t: f64, x: f64) -> f64 {
        (self.value)(t, x)
    }

    fn partials(&self, t: f64, x: f64) -> DriftPartials {
        DriftPartials {
            value: (self.value)(t, x),
            dt: (self.dt)(t, x),
            dx: (self.dx)(t, x),
            dxx: (self.dxx)(t, x),
        }
    }
}

/// `X(t) = x0 + int_0^t mu(s, X(s)) ds + W(t)` on `[0, 1]`.
#[derive(Clone)]
pub struct DiffusionModel {
    pub x0: f64,
    pub drift: Arc<dyn Drift>,
}

impl DiffusionModel {
    pub fn new(x0: f64, drift: Arc<dyn Drift>) -> Self {
        Self { x0, drift }
    }

    /// Standard Brownian motion started at `x0`.
    pub fn brownian(x0: f64) -> Self {
        Self::new(x0, Arc::new(ZeroDrift))
    }
}

impl fmt::Debug for DiffusionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionModel").field("x0", &self.x0).finish_non_exhaustive()
    }
}

/// Lower and upper killing boundaries `g-(t) < g+(t)`.
#[derive(Clone)]
pub struct BoundaryPair {
    pub lower: TimeFn,
    pub upper: TimeFn,
}

impl BoundaryPair {
    pub fn new(lower: TimeFn, upper: TimeFn) -> Self {
        Self { lower, upper }
    }

    pub fn constant(lower: f64, upper: f64) -> Self {
        Self::new(Arc::new(move |_| lower), Arc::new(move |_| upper))
    }

    #[inline]
    pub fn lower_at(&self, t: f64) -> f64 {
        (self.lower)(t)
    }

    #[inline]
    pub fn upper_at(&self, t: f64) -> f64 {
        (self.upper)(t)
    }

    #[inline]
    pub fn width_at(&self, t: f64) -> f64 {
        self.upper_at(t) - self.lower_at(t)
    }

    /// Both boundaries divided by `scale` (used to move to unit diffusion).
    pub fn scaled(&self, scale: f64) -> Self {
        let lower = Arc::clone(&self.lower);
        let upper = Arc::clone(&self.upper);
        Self::new(
            Arc::new(move |t| lower(t) / scale),
            Arc::new(move |t| upper(t) / scale),
        )
    }
}

impl fmt::Debug for BoundaryPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryPair")
            .field("lower(0)", &self.lower_at(0.0))
            .field("upper(0)", &self.upper_at(0.0))
            .finish()
    }
}

/// Killing rate `V`.
#[derive(Clone)]
pub enum Potential {
    /// Continuous `V: R -> C`. `real_valued` records that the imaginary part
    /// is identically zero, which lets callers assert real prices.
    Smooth { v: ComplexStateFn, real_valued: bool },
    /// `V(x) = kappa * 1{x > level}`.
    Step { kappa: f64, level: f64 },
}

impl Potential {
    pub fn zero() -> Self {
        Self::real(|_| 0.0)
    }

    pub fn real(v: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Smooth {
            v: Arc::new(move |x| Complex64::new(v(x), 0.0)),
            real_valued: true,
        }
    }

    pub fn complex(v: impl Fn(f64) -> Complex64 + Send + Sync + 'static) -> Self {
        Self::Smooth {
            v: Arc::new(v),
            real_valued: false,
        }
    }

    pub fn step(kappa: f64, level: f64) -> Self {
        Self::Step { kappa, level }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> Complex64 {
        match self {
            Self::Smooth { v, .. } => v(x),
            Self::Step { kappa, level } => {
                if x > *level {
                    Complex64::new(*kappa, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
        }
    }

    pub fn is_real_valued(&self) -> bool {
        match self {
            Self::Smooth { real_valued, .. } => *real_valued,
            Self::Step { .. } => true,
        }
    }

    pub fn is_step(&self) -> bool {
        matches!(self, Self::Step { .. })
    }
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Smooth { real_valued, .. } => f
                .debug_struct("Smooth")
                .field("real_valued", real_valued)
                .finish_non_exhaustive(),
            Self::Step { kappa, level } => f
                .debug_struct("Step")
                .field("kappa", kappa)
                .field("level", level)
                .finish(),
        }
    }
}

/// Terminal payoff `phi(X(1))`.
#[derive(Clone)]
pub struct Payoff(pub StateFn);

impl Payoff {
    pub fn new(phi: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(phi))
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_| c)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

impl fmt::Debug for Payoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Payoff(..)")
    }
}

/// Time steps `n`, node density `gamma` and refinement exponent `delta`.
///
/// `delta = 0` is accepted alongside `(0, 1/2]` and is what the presets use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    pub n: usize,
    pub gamma: f64,
    pub delta: f64,
}

impl SchemeParams {
    pub fn new(n: usize, gamma: f64, delta: f64) -> Result<Self> {
        let p = Self { n, gamma, delta };
        let issues = p.violations();
        if issues.is_empty() {
            Ok(p)
        } else {
            Err(Error::InvalidProblem(issues))
        }
    }

    pub fn with_n(self, n: usize) -> Self {
        Self { n, ..self }
    }

    /// Time step `1/n`.
    #[inline]
    pub fn dt(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Grid time `k/n`.
    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        k as f64 / self.n as f64
    }

    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.n == 0 {
            out.push(Violation::ZeroSteps);
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            out.push(Violation::BadGamma(self.gamma));
        }
        if !(0.0..=0.5).contains(&self.delta) {
            out.push(Violation::BadDelta(self.delta));
        }
        out
    }
}

/// Which correction multiplies the step-potential transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepRule {
    /// First-order bridge sojourn correction `1 - kappa * E[occupation]`.
    #[default]
    BridgeSojourn,
    /// Plain trapezoid `exp(-dt/2 (V(x) + V(y)))`, kept for comparison.
    Trapezoid,
}

pub const DEFAULT_QUAD_ORDER: usize = 16;

/// Everything needed to price one expectation.
#[derive(Clone, Debug)]
pub struct Problem {
    pub model: DiffusionModel,
    pub bounds: BoundaryPair,
    pub potential: Potential,
    pub payoff: Payoff,
    pub params: SchemeParams,
    pub quad_order: usize,
    pub step_rule: StepRule,
}

impl Problem {
    pub fn new(
        model: DiffusionModel,
        bounds: BoundaryPair,
        potential: Potential,
        payoff: Payoff,
        params: SchemeParams,
    ) -> Self {
        Self {
            model,
            bounds,
            potential,
            payoff,
            params,
            quad_order: DEFAULT_QUAD_ORDER,
            step_rule: StepRule::default(),
        }
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self {
            params: self.params.with_n(n),
            ..self.clone()
        }
    }

    pub fn with_quad_order(mut self, order: usize) -> Self {
        self.quad_order = order;
        self
    }

    pub fn with_step_rule(mut self, rule: StepRule) -> Self {
        self.step_rule = rule;
        self
    }

    pub fn with_potential(mut self, potential: Potential) -> Self {
        self.potential = potential;
        self
    }

    pub fn with_payoff(mut self, payoff: Payoff) -> Self {
        self.payoff = payoff;
        self
    }

    pub fn with_bounds(mut self, bounds: BoundaryPair) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut v = validate_problem(&self.model, &self.bounds, &self.params);
        if self.quad_order == 0 {
            v.push(Violation::ZeroQuadOrder);
        }
        v
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidProblem(v))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ZeroSteps,
    BadGamma(f64),
    BadDelta(f64),
    ZeroQuadOrder,
    NonFiniteStart(f64),
    NonFiniteBoundary { t: f64 },
    StartOutsideStrip { x0: f64, lower: f64, upper: f64 },
    NonPositiveWidth { t: f64, width: f64 },
    GridTooCoarse { k: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ZeroSteps => write!(f, "n must be positive"),
            Self::BadGamma(g) => write!(f, "gamma must be positive and finite, got {g}"),
            Self::BadDelta(d) => write!(f, "delta must lie in [0, 0.5], got {d}"),
            Self::ZeroQuadOrder => write!(f, "quadrature order must be positive"),
            Self::NonFiniteStart(x) => write!(f, "x0 is not finite ({x})"),
            Self::NonFiniteBoundary { t } => write!(f, "boundary not finite at t={t}"),
            Self::StartOutsideStrip { x0, lower, upper } => write!(
                f,
                "x0 outside strip at t=0 (x0={x0}, lower={lower}, upper={upper})"
            ),
            Self::NonPositiveWidth { t, width } => {
                write!(f, "strip width nonpositive at t={t} (width={width})")
            }
            Self::GridTooCoarse { k } => {
                write!(f, "grid too coarse: no interior lattice interval at layer {k}")
            }
        }
    }
}

const STRIP_SAMPLES: usize = 1000;

/// Lists every violated precondition; an empty list means the problem can be
/// priced. Boundaries are checked on a uniform sample of 1000 times in
/// `[0, 1]`, and the lattice floor is checked for each layer `k = 1..n`.
pub fn validate_problem(
    model: &DiffusionModel,
    bounds: &BoundaryPair,
    params: &SchemeParams,
) -> Vec<Violation> {
    let mut out = params.violations();

    if !model.x0.is_finite() {
        out.push(Violation::NonFiniteStart(model.x0));
    }

    let (lo0, hi0) = (bounds.lower_at(0.0), bounds.upper_at(0.0));
    if lo0.is_finite() && hi0.is_finite() && !(lo0 < model.x0 && model.x0 < hi0) {
        out.push(Violation::StartOutsideStrip {
            x0: model.x0,
            lower: lo0,
            upper: hi0,
        });
    }

    for i in 0..STRIP_SAMPLES {
        let t = i as f64 / (STRIP_SAMPLES - 1) as f64;
        let (lo, hi) = (bounds.lower_at(t), bounds.upper_at(t));
        if !(lo.is_finite() && hi.is_finite()) {
            out.push(Violation::NonFiniteBoundary { t });
            break;
        }
        if hi - lo <= 0.0 {
            out.push(Violation::NonPositiveWidth { t, width: hi - lo });
            break;
        }
    }

    // The floor check only makes sense once the parameters and strip are sane.
    if out.is_empty() {
        for k in 1..=params.n {
            if crate::grid::interval_count(bounds, params, k) < 1 {
                out.push(Violation::GridTooCoarse { k });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parabolic_bounds() -> BoundaryPair {
        BoundaryPair::new(Arc::new(|t| -4.0 + t * t), Arc::new(|t| 4.0 - t * t))
    }

    #[test]
    fn curved_strip_at_n30_is_valid() {
        let params = SchemeParams::new(30, 2.0, 0.0).unwrap();
        let v = validate_problem(&DiffusionModel::brownian(0.0), &parabolic_bounds(), &params);
        assert!(v.is_empty(), "{v:?}");
    }

    #[test]
    fn start_above_upper_boundary_is_reported() {
        let params = SchemeParams::new(30, 2.0, 0.0).unwrap();
        let v = validate_problem(&DiffusionModel::brownian(5.0), &parabolic_bounds(), &params);
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().starts_with("x0 outside strip at t=0"));
    }

    #[test]
    fn closing_strip_is_reported_at_t1() {
        let bounds = BoundaryPair::new(Arc::new(|t| -(1.0 - t)), Arc::new(|t| 1.0 - t));
        let params = SchemeParams::new(30, 2.0, 0.0).unwrap();
        let v = validate_problem(&DiffusionModel::brownian(0.0), &bounds, &params);
        assert_eq!(v.len(), 1);
        assert!(v[0].to_string().starts_with("strip width nonpositive at t=1"), "{}", v[0]);
    }

    #[test]
    fn validation_is_idempotent() {
        let params = SchemeParams { n: 2, gamma: 2.0, delta: 0.0 };
        let b = BoundaryPair::constant(-0.0005, 0.0005);
        let m = DiffusionModel::brownian(0.0);
        let a = validate_problem(&m, &b, &params);
        assert_eq!(a, validate_problem(&m, &b, &params));
        assert!(a.iter().any(|v| matches!(v, Violation::GridTooCoarse { k: 1 })));
    }

    #[test]
    fn params_reject_bad_values() {
        assert!(SchemeParams::new(0, 2.0, 0.0).is_err());
        assert!(SchemeParams::new(10, -1.0, 0.0).is_err());
        assert!(SchemeParams::new(10, 2.0, 0.7).is_err());
        assert!(SchemeParams::new(10, 2.0, 0.5).is_ok());
    }

    #[test]
    fn step_indicator_is_strict() {
        let p = Potential::step(2.0, 0.5);
        let eps = 1e-12;
        assert_eq!(p.eval(0.5 - eps).re, 0.0);
        assert_eq!(p.eval(0.5).re, 0.0);
        assert_eq!(p.eval(0.5 + eps).re, 2.0);
    }

    #[test]
    fn complex_exp_modulus() {
        let z = Complex64::new(0.3, -1.7);
        assert!((z.exp().norm() - 0.3f64.exp()).abs() < 1e-15);
    }
}
