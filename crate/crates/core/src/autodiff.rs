//! Hyper-dual numbers `a + b e1 + c e2 + d e1e2` with `e1^2 = e2^2 = 0`.
//!
//! Seeding a variable as `x + e1 + e2` and pushing it through a function `f`
//! leaves `f(x)` in the value slot, `f'(x)` in both first-order slots and
//! `f''(x)` in the mixed slot, exactly and without a step size.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::expr::{EvalError, Expr, Var};
use crate::model::{Drift, DriftPartials};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HyperDual {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d12: f64,
}

impl HyperDual {
    pub const fn new(value: f64, d1: f64, d2: f64, d12: f64) -> Self {
        Self { value, d1, d2, d12 }
    }

    pub const fn constant(value: f64) -> Self {
        Self::new(value, 0.0, 0.0, 0.0)
    }

    /// A variable seeded in both directions, so `d1` carries the first and
    /// `d12` the second derivative.
    pub const fn variable(value: f64) -> Self {
        Self::new(value, 1.0, 1.0, 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite() && self.d1.is_finite() && self.d2.is_finite() && self.d12.is_finite()
    }

    pub fn is_constant(&self) -> bool {
        self.d1 == 0.0 && self.d2 == 0.0 && self.d12 == 0.0
    }

    /// Applies a scalar function given its value and first two derivatives at
    /// `self.value`.
    #[inline]
    pub fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        Self {
            value: f,
            d1: df * self.d1,
            d2: df * self.d2,
            d12: df * self.d12 + d2f * self.d1 * self.d2,
        }
    }

    pub fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn ln(self) -> Result<Self, EvalError> {
        let v = self.value;
        if v <= 0.0 {
            return Err(EvalError::Domain { func: "log", arg: v });
        }
        Ok(self.chain(v.ln(), 1.0 / v, -1.0 / (v * v)))
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn sqrt(self) -> Result<Self, EvalError> {
        let v = self.value;
        if v < 0.0 || (v == 0.0 && !self.is_constant()) {
            return Err(EvalError::Domain { func: "sqrt", arg: v });
        }
        let r = v.sqrt();
        if self.is_constant() {
            return Ok(Self::constant(r));
        }
        Ok(self.chain(r, 0.5 / r, -0.25 / (r * v)))
    }

    /// `self^p` for a constant exponent. Integer exponents accept any base.
    pub fn powf(self, p: f64) -> Result<Self, EvalError> {
        let v = self.value;
        if p == 0.0 {
            return Ok(Self::constant(1.0));
        }
        let integer = p.fract() == 0.0 && p.abs() <= i32::MAX as f64;
        if integer {
            let k = p as i32;
            if v == 0.0 && k < 0 {
                return Err(EvalError::Domain { func: "pow", arg: v });
            }
            // powi(v, k-2) is fine at v = 0 for k >= 2; below that the factor is zero.
            let d1 = if k == 1 { 1.0 } else { p * v.powi(k - 1) };
            let d2 = match k {
                1 => 0.0,
                2 => 2.0,
                _ => p * (p - 1.0) * v.powi(k - 2),
            };
            return Ok(self.chain(v.powi(k), d1, d2));
        }
        if v < 0.0 || (v == 0.0 && p < 2.0 && !self.is_constant()) {
            return Err(EvalError::Domain { func: "pow", arg: v });
        }
        Ok(self.chain(v.powf(p), p * v.powf(p - 1.0), p * (p - 1.0) * v.powf(p - 2.0)))
    }

    /// `self^other` where the exponent may itself carry derivatives.
    pub fn pow(self, other: Self) -> Result<Self, EvalError> {
        if other.is_constant() {
            return self.powf(other.value);
        }
        Ok((other * self.ln()?).exp())
    }

    pub fn abs(self) -> Self {
        if self.value < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn recip(self) -> Result<Self, EvalError> {
        let v = self.value;
        if v == 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        Ok(self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v)))
    }
}

impl fmt::Display for HyperDual {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}e1 + {}e2 + {}e1e2", self.value, self.d1, self.d2, self.d12)
    }
}

impl From<f64> for HyperDual {
    fn from(v: f64) -> Self {
        Self::constant(v)
    }
}

impl Add for HyperDual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.value + o.value, self.d1 + o.d1, self.d2 + o.d2, self.d12 + o.d12)
    }
}

impl Sub for HyperDual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.value - o.value, self.d1 - o.d1, self.d2 - o.d2, self.d12 - o.d12)
    }
}

impl Mul for HyperDual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.value * o.value,
            self.value * o.d1 + self.d1 * o.value,
            self.value * o.d2 + self.d2 * o.value,
            self.value * o.d12 + self.d1 * o.d2 + self.d2 * o.d1 + self.d12 * o.value,
        )
    }
}

impl Div for HyperDual {
    type Output = Result<Self, EvalError>;
    fn div(self, o: Self) -> Result<Self, EvalError> {
        Ok(self * o.recip()?)
    }
}

impl Neg for HyperDual {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.value, -self.d1, -self.d2, -self.d12)
    }
}

/// Elementary functions that can be lifted onto hyper-dual numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UnaryFn {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    PowConst(f64),
}

pub fn lift_unary(f: UnaryFn, x: HyperDual) -> Result<HyperDual, EvalError> {
    match f {
        UnaryFn::Exp => Ok(x.exp()),
        UnaryFn::Log => x.ln(),
        UnaryFn::Sin => Ok(x.sin()),
        UnaryFn::Cos => Ok(x.cos()),
        UnaryFn::Sqrt => x.sqrt(),
        UnaryFn::PowConst(p) => x.powf(p),
    }
}

/// `(mu, d/dt mu, d/dx mu, d2/dx2 mu)` of a drift expression over `{t, x}`.
///
/// Two passes: one seeding `t`, one seeding `x`.
pub fn drift_partials(expr: &Expr, t: f64, x: f64) -> Result<DriftPartials, EvalError> {
    let in_t = expr.eval_with(|v| match v {
        Var::T => Some(HyperDual::variable(t)),
        Var::X => Some(HyperDual::constant(x)),
    })?;
    let in_x = expr.eval_with(|v| match v {
        Var::T => Some(HyperDual::constant(t)),
        Var::X => Some(HyperDual::variable(x)),
    })?;
    Ok(DriftPartials {
        value: in_x.value,
        dt: in_t.d1,
        dx: in_x.d1,
        dxx: in_x.d12,
    })
}

/// Drift defined by an expression in `t` and `x`, differentiated by
/// hyper-dual evaluation. Evaluation failures surface as NaN, which the
/// engine reports as a numeric failure.
#[derive(Debug, Clone)]
pub struct ExprDrift {
    expr: Expr,
}

impl ExprDrift {
    pub fn new(expr: Expr) -> Result<Self, EvalError> {
        if expr.uses_imaginary_unit() {
            return Err(EvalError::ComplexValue { im: f64::NAN });
        }
        Ok(Self { expr })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }
}

impl Drift for ExprDrift {
    fn value(&self, t: f64, x: f64) -> f64 {
        self.expr
            .eval_with(|v| match v {
                Var::T => Some(t),
                Var::X => Some(x),
            })
            .unwrap_or(f64::NAN)
    }

    fn partials(&self, t: f64, x: f64) -> DriftPartials {
        drift_partials(&self.expr, t, x).unwrap_or(DriftPartials {
            value: f64::NAN,
            dt: f64::NAN,
            dx: f64::NAN,
            dxx: f64::NAN,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn sin_at_zero() {
        let r = lift_unary(UnaryFn::Sin, HyperDual::variable(0.0)).unwrap();
        assert_eq!((r.value, r.d1, r.d12), (0.0, 1.0, 0.0));
    }

    #[test]
    fn exp_at_zero() {
        let r = lift_unary(UnaryFn::Exp, HyperDual::variable(0.0)).unwrap();
        assert_eq!((r.value, r.d1, r.d12), (1.0, 1.0, 1.0));
    }

    #[test]
    fn cube_at_two() {
        let r = lift_unary(UnaryFn::PowConst(3.0), HyperDual::variable(2.0)).unwrap();
        assert_eq!((r.value, r.d1, r.d12), (8.0, 12.0, 12.0));
        let x = HyperDual::variable(2.0);
        let m = x * x * x;
        assert_eq!((m.value, m.d1, m.d12), (8.0, 12.0, 12.0));
    }

    #[test]
    fn log_domain() {
        assert!(lift_unary(UnaryFn::Log, HyperDual::variable(0.0)).is_err());
        assert!(lift_unary(UnaryFn::Log, HyperDual::variable(-1.0)).is_err());
        assert!(lift_unary(UnaryFn::Sqrt, HyperDual::variable(-1.0)).is_err());
    }

    #[test]
    fn quotient_rule() {
        // f = 1/x at 2: f' = -1/4, f'' = 2/8
        let r = (HyperDual::constant(1.0) / HyperDual::variable(2.0)).unwrap();
        assert_abs_diff_eq!(r.d1, -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(r.d12, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn mixed_slot_product_rule() {
        let a = HyperDual::new(1.5, 0.3, -0.7, 0.2);
        let b = HyperDual::new(-2.0, 1.1, 0.4, -0.9);
        let p = a * b;
        let expect = a.value * b.d12 + a.d1 * b.d2 + a.d2 * b.d1 + a.d12 * b.value;
        assert_abs_diff_eq!(p.d12, expect, epsilon = 1e-15);
    }

    #[test]
    fn drift_partials_examples() {
        let e = Expr::parse("t*x^2").unwrap();
        let p = drift_partials(&e, 1.0, 2.0).unwrap();
        assert_eq!((p.value, p.dt, p.dx, p.dxx), (4.0, 4.0, 4.0, 2.0));

        let zero = Expr::parse("0").unwrap();
        assert_eq!(drift_partials(&zero, 0.3, -1.2).unwrap(), DriftPartials::default());

        let hw = Expr::parse("0.03 + 0.5*(1 - exp(-0.02*t)) - 0.01*x").unwrap();
        for (t, x) in [(0.0, 3.0), (0.5, -2.0), (1.0, 7.0)] {
            assert_abs_diff_eq!(drift_partials(&hw, t, x).unwrap().dx, -0.01, epsilon = 1e-15);
        }
    }

    #[test]
    fn drift_rejects_imaginary_unit() {
        assert!(ExprDrift::new(Expr::parse("i*x").unwrap()).is_err());
    }

    fn poly_strategy() -> impl Strategy<Value = Vec<(f64, u32, u32)>> {
        // terms c * t^a * x^b with a + b <= 4
        prop::collection::vec(
            (-3.0f64..3.0, 0u32..=4, 0u32..=4).prop_filter("degree <= 4", |(_, a, b)| a + b <= 4),
            1..6,
        )
    }

    fn poly_source(terms: &[(f64, u32, u32)]) -> String {
        terms
            .iter()
            .map(|(c, a, b)| format!("({c:?})*t^{a}*x^{b}"))
            .collect::<Vec<_>>()
            .join(" + ")
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn polynomial_drift_matches_finite_differences(
            terms in poly_strategy(),
            t in 0.0f64..1.0,
            x in -3.0f64..3.0,
        ) {
            let e = Expr::parse(&poly_source(&terms)).unwrap();
            let f = |t: f64, x: f64| e.eval_with(|v| match v { Var::T => Some(t), Var::X => Some(x) }).unwrap();
            let h = 1e-5;
            let fd_t = (f(t + h, x) - f(t - h, x)) / (2.0 * h);
            let fd_x = (f(t, x + h) - f(t, x - h)) / (2.0 * h);
            let fd_xx = (f(t, x + h) - 2.0 * f(t, x) + f(t, x - h)) / (h * h);
            let p = drift_partials(&e, t, x).unwrap();
            prop_assert!(rel_close(p.dt, fd_t, 1e-6), "dt {} vs {}", p.dt, fd_t);
            prop_assert!(rel_close(p.dx, fd_x, 1e-6), "dx {} vs {}", p.dx, fd_x);
            // the second difference loses ~half the digits at h = 1e-5
            prop_assert!(rel_close(p.dxx, fd_xx, 1e-3), "dxx {} vs {}", p.dxx, fd_xx);
        }

        #[test]
        fn lifted_functions_stay_finite(v in 0.01f64..20.0, p in -3.0f64..3.0) {
            let x = HyperDual::variable(v);
            for f in [UnaryFn::Exp, UnaryFn::Log, UnaryFn::Sin, UnaryFn::Cos, UnaryFn::Sqrt, UnaryFn::PowConst(p)] {
                let r = lift_unary(f, x).unwrap();
                prop_assert!(r.is_finite(), "{f:?} at {v}: {r}");
            }
        }
    }
}
