//! TOML problem files. Every function-valued field is an expression in the
//! language of [`fklattice::expr`].

use std::path::Path;
use std::sync::Arc;

use fklattice::autodiff::ExprDrift;
use fklattice::expr::{Bindings, Expr, Var};
use fklattice::hull_white::hull_white_problem;
use fklattice::{BoundaryPair, DiffusionModel, Payoff, Potential, Problem, SchemeParams, StepRule};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub lower: String,
    pub upper: String,
    pub x0: Option<f64>,
    pub drift: Option<String>,
    pub potential: Option<String>,
    pub payoff: Option<String>,
    pub scheme: SchemeConfig,
    pub hull_white: Option<HullWhiteConfig>,
    pub quad_order: Option<usize>,
    pub step_rule: Option<StepRuleConfig>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub n: usize,
    pub gamma: f64,
    pub delta: f64,
}

/// Short-rate model whose state is rescaled to unit diffusion. With this
/// block the boundaries are given in rate units and the start, drift,
/// potential and payoff are implied by the model.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HullWhiteConfig {
    pub alpha: f64,
    pub sigma: f64,
    pub forward_curve: String,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRuleConfig {
    BridgeSojourn,
    Trapezoid,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn parse_field(field: &str, src: &str, allowed: &[Var]) -> Result<Expr, CliError> {
    let e = Expr::parse(src).map_err(|e| config_err(format!("{field}: {e}")))?;
    for v in [Var::T, Var::X] {
        if !allowed.contains(&v) && e.uses_var(v) {
            return Err(config_err(format!("{field}: may not depend on {v}")));
        }
    }
    Ok(e)
}

fn real_only(field: &str, e: Expr) -> Result<Expr, CliError> {
    if e.uses_imaginary_unit() {
        Err(config_err(format!("{field}: complex values are only allowed in the potential")))
    } else {
        Ok(e)
    }
}

fn time_fn(e: Expr) -> fklattice::model::TimeFn {
    Arc::new(move |t| e.eval_real(Bindings::t(t)).unwrap_or(f64::NAN))
}

fn potential(e: Expr) -> Potential {
    if let Some((kappa, level)) = e.as_step_potential() {
        Potential::step(kappa, level)
    } else if e.uses_imaginary_unit() {
        Potential::complex(move |x| {
            e.eval_complex(Bindings::x(x))
                .unwrap_or(fklattice::Complex64::new(f64::NAN, f64::NAN))
        })
    } else {
        Potential::real(move |x| e.eval_real(Bindings::x(x)).unwrap_or(f64::NAN))
    }
}

impl ProblemConfig {
    pub fn from_toml(src: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(src)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let src = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml(&src).map_err(|e| config_err(format!("{}: {e}", path.display())))
    }

    pub fn into_problem(self) -> Result<Problem, CliError> {
        let lower = real_only("lower", parse_field("lower", &self.lower, &[Var::T])?)?;
        let upper = real_only("upper", parse_field("upper", &self.upper, &[Var::T])?)?;
        let bounds = BoundaryPair::new(time_fn(lower), time_fn(upper));
        let params = SchemeParams::new(self.scheme.n, self.scheme.gamma, self.scheme.delta)
            .map_err(|e| CliError::Invalid(e.to_string()))?;

        let problem = match &self.hull_white {
            Some(hw) => {
                for (name, present) in [
                    ("x0", self.x0.is_some()),
                    ("drift", self.drift.is_some()),
                    ("potential", self.potential.is_some()),
                    ("payoff", self.payoff.is_some()),
                ] {
                    if present {
                        return Err(config_err(format!("{name} may not be combined with hull_white")));
                    }
                }
                let forward = real_only("forward_curve", parse_field("forward_curve", &hw.forward_curve, &[Var::T])?)?;
                hull_white_problem(hw.alpha, hw.sigma, &forward, &bounds)
                    .map_err(|e| CliError::Invalid(format!("hull_white: {e}")))?
                    .with_params(params)
            }
            None => {
                let x0 = self.x0.ok_or_else(|| config_err("missing field `x0`"))?;
                let model = match &self.drift {
                    Some(src) => {
                        let e = real_only("drift", parse_field("drift", src, &[Var::T, Var::X])?)?;
                        let drift = ExprDrift::new(e).map_err(|e| config_err(format!("drift: {e}")))?;
                        DiffusionModel::new(x0, Arc::new(drift))
                    }
                    None => DiffusionModel::brownian(x0),
                };
                let v = match &self.potential {
                    Some(src) => potential(parse_field("potential", src, &[Var::X])?),
                    None => Potential::zero(),
                };
                let phi = match &self.payoff {
                    Some(src) => {
                        let e = real_only("payoff", parse_field("payoff", src, &[Var::X])?)?;
                        Payoff::new(move |x| e.eval_real(Bindings::x(x)).unwrap_or(f64::NAN))
                    }
                    None => Payoff::constant(1.0),
                };
                Problem::new(model, bounds, v, phi, params)
            }
        };

        let mut problem = problem;
        if let Some(order) = self.quad_order {
            problem = problem.with_quad_order(order);
        }
        if let Some(rule) = self.step_rule {
            problem = problem.with_step_rule(match rule {
                StepRuleConfig::BridgeSojourn => StepRule::BridgeSojourn,
                StepRuleConfig::Trapezoid => StepRule::Trapezoid,
            });
        }
        Ok(problem)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
lower = "-1"
upper = "1"
x0 = 0
[scheme]
n = 8
gamma = 2
delta = 0
"#;

    #[test]
    fn defaults() {
        let p = ProblemConfig::from_toml(BASE).unwrap().into_problem().unwrap();
        assert_eq!(p.payoff.eval(0.3), 1.0);
        assert_eq!(p.potential.eval(0.3).re, 0.0);
        assert_eq!(p.bounds.upper_at(0.5), 1.0);
    }

    #[test]
    fn step_potential_detected() {
        let src = format!("potential = \"2*step(x, 1/19)\"\n{BASE}");
        let p = ProblemConfig::from_toml(&src).unwrap().into_problem().unwrap();
        assert!(matches!(p.potential, Potential::Step { kappa, level } if kappa == 2.0 && level == 1.0 / 19.0));
    }

    #[test]
    fn rejects_bad_fields() {
        for extra in ["payoff = \"i\"", "drift = \"x*i\"", "potential = \"t\"", "potential = \"x +\""] {
            let src = format!("{extra}\n{BASE}");
            let err = ProblemConfig::from_toml(&src).unwrap().into_problem().unwrap_err();
            assert!(matches!(err, CliError::Config(_)), "{extra}: {err}");
        }
    }

    #[test]
    fn hull_white_excludes_drift() {
        let hw = "[hull_white]\nalpha = 0.01\nsigma = 0.01\nforward_curve = \"0.03\"\n";
        let ok = format!("{}{hw}", BASE.replace("x0 = 0\n", ""));
        let p = ProblemConfig::from_toml(&ok).unwrap().into_problem().unwrap();
        assert!((p.model.x0 - 3.0).abs() < 1e-12);
        let bad = format!("drift = \"0\"\n{ok}");
        let err = ProblemConfig::from_toml(&bad).unwrap().into_problem().unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }
}
