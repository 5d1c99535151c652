use thiserror::Error;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid problem: {}", join_violations(.0))]
    InvalidProblem(Vec<Violation>),

    #[error("grid too coarse at layer {k}: floor({gamma} * {scaled_width}) = 0, increase n or gamma")]
    GridTooCoarse {
        k: usize,
        gamma: f64,
        scaled_width: f64,
    },

    #[error("non-finite value in {context} at layer {k}")]
    NonFinite { context: &'static str, k: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate convergence fit: {0}")]
    DegenerateFit(String),

    #[error(transparent)]
    Eval(#[from] crate::expr::EvalError),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
