//! Monte Carlo estimate of the same expectation, used to cross-check the
//! lattice.
//!
//! Paths are Euler-discretised on `m` uniform steps. Between steps the path
//! is treated as a Brownian bridge: its survival is weighted by the same
//! two-boundary factor the lattice uses, and for the step potential the
//! occupation time above the level is replaced by its bridge expectation in
//! closed form.
//! Smooth potentials are integrated with the trapezoid rule.
//!
//! Paths are split into fixed-size chunks, each with its own ChaCha stream,
//! and the chunk sums are reduced in chunk order, so the estimate is
//! bit-for-bit reproducible from the seed regardless of thread count.

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::bridge_occupation_exact;
use crate::model::{Potential, Problem};

pub const MIN_STEPS: usize = 100;
pub const MIN_PATHS: usize = 1000;
const CHUNK: usize = 4096;

/// Beyond this exponent `exp(-a)` is below half an ulp of 1.
const NEGLIGIBLE_EXPONENT: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: Complex64,
    /// Standard errors of the real and imaginary parts.
    pub std_error: Complex64,
    pub paths: usize,
    pub steps_per_path: usize,
    pub seed: u64,
}

impl McEstimate {
    /// Standard error of the real part, the headline uncertainty for real
    /// problems.
    pub fn se(&self) -> f64 {
        self.std_error.re
    }
}

#[derive(Default, Clone, Copy)]
struct Moments {
    re: f64,
    re2: f64,
    im: f64,
    im2: f64,
}

impl Moments {
    fn push(&mut self, z: Complex64) {
        self.re += z.re;
        self.re2 += z.re * z.re;
        self.im += z.im;
        self.im2 += z.im * z.im;
    }

    fn merge(self, o: Self) -> Self {
        Self {
            re: self.re + o.re,
            re2: self.re2 + o.re2,
            im: self.im + o.im,
            im2: self.im2 + o.im2,
        }
    }
}

struct PathSimulator<'a> {
    problem: &'a Problem,
    steps: usize,
    dt: f64,
    sqrt_dt: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl PathSimulator<'_> {
    fn run(&self, rng: &mut ChaCha8Rng) -> Complex64 {
        let p = self.problem;
        let two_m = 2.0 * self.steps as f64;
        let mut x = p.model.x0;
        let mut weight = 1.0;
        let mut integral = Complex64::new(0.0, 0.0);
        let mut occupation = 0.0;
        let mut v_prev = p.potential.eval(x);

        for j in 0..self.steps {
            let t = j as f64 * self.dt;
            let z: f64 = rng.sample(StandardNormal);
            let y = x + p.model.drift.value(t, x) * self.dt + self.sqrt_dt * z;
            let (lo, hi) = (self.lower[j + 1], self.upper[j + 1]);
            if !(lo < y && y < hi) {
                return Complex64::new(0.0, 0.0);
            }

            let a = two_m * (self.upper[j] - x) * (hi - y);
            let b = two_m * (self.lower[j] - x) * (lo - y);
            let mut survive = 1.0;
            if a < NEGLIGIBLE_EXPONENT {
                survive -= (-a).exp();
            }
            if b < NEGLIGIBLE_EXPONENT {
                survive -= (-b).exp();
            }
            if survive <= 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            weight *= survive;

            match &p.potential {
                Potential::Smooth { v, .. } => {
                    let v_next = v(y);
                    integral += 0.5 * self.dt * (v_prev + v_next);
                    v_prev = v_next;
                }
                Potential::Step { level, .. } => {
                    occupation += bridge_occupation_exact(*level, x, y, self.dt);
                }
            }
            x = y;
        }

        let discount = match &p.potential {
            Potential::Smooth { .. } => (-integral).exp(),
            Potential::Step { kappa, .. } => Complex64::new((-kappa * occupation).exp(), 0.0),
        };
        discount * (weight * p.payoff.eval(x))
    }
}

/// Estimates the problem's expectation from `paths` simulated paths of
/// `m_steps` steps each. The problem's lattice parameters are ignored.
pub fn mc_price(problem: &Problem, m_steps: usize, paths: usize, seed: u64) -> Result<McEstimate> {
    if m_steps < MIN_STEPS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_STEPS} steps per path, got {m_steps}")));
    }
    if paths < MIN_PATHS {
        return Err(Error::InvalidArgument(format!("need at least {MIN_PATHS} paths, got {paths}")));
    }
    let violations = problem.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidProblem(violations));
    }

    let dt = 1.0 / m_steps as f64;
    let times = (0..=m_steps).map(|j| j as f64 * dt);
    let sim = PathSimulator {
        problem,
        steps: m_steps,
        dt,
        sqrt_dt: dt.sqrt(),
        lower: times.clone().map(|t| problem.bounds.lower_at(t)).collect(),
        upper: times.map(|t| problem.bounds.upper_at(t)).collect(),
    };

    let chunks = paths.div_ceil(CHUNK);
    let partial: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(paths - c * CHUNK);
            let mut m = Moments::default();
            for _ in 0..count {
                m.push(sim.run(&mut rng));
            }
            m
        })
        .collect();
    let total = partial.into_iter().fold(Moments::default(), Moments::merge);

    let np = paths as f64;
    let se = |sum: f64, sum2: f64| {
        let mean = sum / np;
        let var = ((sum2 - np * mean * mean) / (np - 1.0)).max(0.0);
        (var / np).sqrt()
    };
    let mean = Complex64::new(total.re / np, total.im / np);
    if !mean.is_finite() {
        return Err(Error::NonFinite { context: "monte carlo mean", k: m_steps });
    }
    Ok(McEstimate {
        mean,
        std_error: Complex64::new(se(total.re, total.re2), se(total.im, total.im2)),
        paths,
        steps_per_path: m_steps,
        seed,
    })
}
