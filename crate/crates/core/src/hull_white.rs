//! One-factor Hull-White short rate `dr = (theta(t) - alpha r) dt + sigma dW`
//! fitted to an instantaneous forward curve `f`, rescaled to unit diffusion
//! via `x = r / sigma`.

use std::sync::Arc;

use crate::autodiff::HyperDual;
use crate::error::{Error, Result};
use crate::expr::{Bindings, EvalError, Expr};
use crate::model::{BoundaryPair, DiffusionModel, Drift, DriftPartials, Payoff, Potential, Problem, SchemeParams};

/// Forward curve `f(t)` with its first two derivatives.
#[derive(Debug, Clone)]
pub struct ForwardCurve {
    expr: Expr,
}

impl ForwardCurve {
    pub fn new(expr: Expr) -> Result<Self> {
        if expr.uses_var(crate::expr::Var::X) {
            return Err(Error::InvalidArgument("forward curve may only depend on t".into()));
        }
        if expr.uses_imaginary_unit() {
            return Err(EvalError::ComplexValue { im: f64::NAN }.into());
        }
        Ok(Self { expr })
    }

    /// `(f(t), f'(t), f''(t))`.
    pub fn jet(&self, t: f64) -> std::result::Result<(f64, f64, f64), EvalError> {
        let d = self.expr.eval(&Bindings::t(HyperDual::variable(t)))?;
        Ok((d.value, d.d1, d.d12))
    }
}

#[derive(Debug, Clone)]
pub struct HullWhite {
    pub alpha: f64,
    pub sigma: f64,
    pub forward: ForwardCurve,
}

impl HullWhite {
    pub fn new(alpha: f64, sigma: f64, forward: ForwardCurve) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) || !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "alpha and sigma must be positive (alpha={alpha}, sigma={sigma})"
            )));
        }
        Ok(Self { alpha, sigma, forward })
    }

    /// `theta(t) = f'(t) + alpha f(t) + sigma^2 / (2 alpha) (1 - exp(-2 alpha t))`
    /// and its time derivative.
    pub fn theta(&self, t: f64) -> std::result::Result<(f64, f64), EvalError> {
        let (a, s) = (self.alpha, self.sigma);
        let (f, df, d2f) = self.forward.jet(t)?;
        let decay = (-2.0 * a * t).exp();
        let theta = df + a * f + s * s / (2.0 * a) * (1.0 - decay);
        let dtheta = d2f + a * df + s * s * decay;
        Ok((theta, dtheta))
    }
}

/// Drift of `x = r / sigma`: `theta(t) / sigma - alpha x`.
#[derive(Debug, Clone)]
pub struct HullWhiteDrift(pub HullWhite);

impl Drift for HullWhiteDrift {
    fn value(&self, t: f64, x: f64) -> f64 {
        match self.0.theta(t) {
            Ok((theta, _)) => theta / self.0.sigma - self.0.alpha * x,
            Err(_) => f64::NAN,
        }
    }

    fn partials(&self, t: f64, x: f64) -> DriftPartials {
        let s = self.0.sigma;
        match self.0.theta(t) {
            Ok((theta, dtheta)) => DriftPartials {
                value: theta / s - self.0.alpha * x,
                dt: dtheta / s,
                dx: -self.0.alpha,
                dxx: 0.0,
            },
            Err(_) => DriftPartials {
                value: f64::NAN,
                dt: f64::NAN,
                dx: f64::NAN,
                dxx: f64::NAN,
            },
        }
    }
}

/// A knock-out zero-coupon bond in unit-diffusion coordinates: discounting by
/// `V(x) = sigma x` and unit payoff.
#[derive(Debug, Clone)]
pub struct ScaledProblem {
    pub model: DiffusionModel,
    pub bounds: BoundaryPair,
    pub potential: Potential,
    pub payoff: Payoff,
}

impl ScaledProblem {
    pub fn with_params(self, params: SchemeParams) -> Problem {
        Problem::new(self.model, self.bounds, self.potential, self.payoff, params)
    }
}

/// Rescales a Hull-White bond with rate barriers `rate_bounds` to the
/// unit-diffusion state `x = r / sigma`, starting from `r(0) = f(0)`.
pub fn hull_white_problem(
    alpha: f64,
    sigma: f64,
    forward_curve: &Expr,
    rate_bounds: &BoundaryPair,
) -> Result<ScaledProblem> {
    let hw = HullWhite::new(alpha, sigma, ForwardCurve::new(forward_curve.clone())?)?;
    let (f0, _, _) = hw.forward.jet(0.0)?;
    Ok(ScaledProblem {
        model: DiffusionModel::new(f0 / sigma, Arc::new(HullWhiteDrift(hw))),
        bounds: rate_bounds.scaled(sigma),
        potential: Potential::real(move |x| sigma * x),
        payoff: Payoff::constant(1.0),
    })
}
