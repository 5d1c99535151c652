//! The three reference problems, all on `[0, 1]` with `gamma = 2`,
//! `delta = 0` and unit payoff.

use std::sync::Arc;

use num_complex::Complex64;

use crate::expr::Expr;
use crate::hull_white::hull_white_problem;
use crate::model::{BoundaryPair, DiffusionModel, Payoff, Potential, Problem, SchemeParams};

pub const GAMMA: f64 = 2.0;
pub const DELTA: f64 = 0.0;
pub const FIGURE_N: usize = 30;

pub const HW_ALPHA: f64 = 0.01;
pub const HW_SIGMA: f64 = 0.01;
pub const HW_FORWARD: f64 = 0.03;

pub const STEP_KAPPA: f64 = 2.0;
pub const STEP_LEVEL: f64 = 1.0 / 19.0;

fn params(n: usize) -> SchemeParams {
    SchemeParams::new(n, GAMMA, DELTA).expect("preset parameters are valid")
}

/// `g(t) = -+(4 - t^2)`.
pub fn parabolic_bounds() -> BoundaryPair {
    BoundaryPair::new(Arc::new(|t| -4.0 + t * t), Arc::new(|t| 4.0 - t * t))
}

/// `g(t) = -+0.04 (1 +- sin(3t)/2)` in rate units.
pub fn hull_white_rate_bounds() -> BoundaryPair {
    BoundaryPair::new(
        Arc::new(|t: f64| -0.04 * (1.0 + 0.5 * (3.0 * t).sin())),
        Arc::new(|t: f64| 0.04 * (1.0 - 0.5 * (3.0 * t).sin())),
    )
}

pub fn kac_potential() -> Potential {
    Potential::complex(|x| Complex64::new(0.0, -x * x))
}

/// Brownian motion from 0 with `V(x) = -i x^2` between parabolic barriers.
pub fn example1(n: usize) -> Problem {
    Problem::new(
        DiffusionModel::brownian(0.0),
        parabolic_bounds(),
        kac_potential(),
        Payoff::constant(1.0),
        params(n),
    )
}

/// Knock-out zero-coupon bond under Hull-White with a flat 3% forward curve.
pub fn example2(n: usize) -> Problem {
    let forward = Expr::Num(HW_FORWARD);
    hull_white_problem(HW_ALPHA, HW_SIGMA, &forward, &hull_white_rate_bounds())
        .expect("preset parameters are valid")
        .with_params(params(n))
}

/// Hybrid step-barrier option: `V(x) = 2 * 1{x > 1/19}` between parabolic
/// barriers.
pub fn example3(n: usize) -> Problem {
    example3_with_kappa(n, STEP_KAPPA)
}

pub fn example3_with_kappa(n: usize, kappa: f64) -> Problem {
    Problem::new(
        DiffusionModel::brownian(0.0),
        parabolic_bounds(),
        Potential::step(kappa, STEP_LEVEL),
        Payoff::constant(1.0),
        params(n),
    )
}

/// Example 1's potential with barriers at `+-8`, far enough that crossing is
/// negligible and the unrestricted characteristic function applies.
pub fn kac_wide(n: usize) -> Problem {
    example1(n).with_bounds(BoundaryPair::constant(-8.0, 8.0))
}

/// Probability that Brownian motion stays in `(-1, 1)` up to time 1.
pub fn brownian_strip(n: usize) -> Problem {
    Problem::new(
        DiffusionModel::brownian(0.0),
        BoundaryPair::constant(-1.0, 1.0),
        Potential::zero(),
        Payoff::constant(1.0),
        params(n),
    )
}

pub fn by_name(name: &str, n: usize) -> Option<Problem> {
    Some(match name {
        "example1" => example1(n),
        "example2" => example2(n),
        "example3" => example3(n),
        "kac-wide" => kac_wide(n),
        "brownian-strip" => brownian_strip(n),
        _ => return None,
    })
}

pub const NAMES: [&str; 5] = ["example1", "example2", "example3", "kac-wide", "brownian-strip"];
