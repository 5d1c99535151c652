//! Lattice pricing of Feynman-Kac expectations
//! `E[exp(-int_0^1 V(X)) phi(X(1)); g- < X < g+]` for unit-diffusion
//! processes killed at two time-dependent boundaries.
//!
//! The process is replaced by a Markov chain on boundary-anchored lattices
//! with Gaussian pseudo-transition weights, a Brownian bridge correction for
//! crossings between grid times, and a correction for the potential. The
//! expectation becomes a chain of matrix products.
//!
//! ```
//! use fklattice::{engine, presets};
//!
//! let result = engine::price(&presets::brownian_strip(64)).unwrap();
//! assert!((result.q.re - 0.37078).abs() < 1e-4);
//! ```

pub mod autodiff;
pub mod engine;
pub mod error;
pub mod expr;
pub mod grid;
pub mod hull_white;
pub mod kernel;
pub mod model;
pub mod oracle;
pub mod presets;

pub use engine::{convergence_study, price, value_surface, ConvergenceStudy, PriceResult, ValueSurface};
pub use error::{Error, Result};
pub use model::{
    validate_problem, BoundaryPair, DiffusionModel, Drift, DriftPartials, Payoff, Potential, Problem, SchemeParams,
    StepRule,
};
pub use num_complex::Complex64;
pub use oracle::{mc_price, McEstimate};
