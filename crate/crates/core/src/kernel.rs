//! Corrected one-step transition weights between consecutive lattice layers.
//!
//! Entry `(x, y)` of the layer-`k` matrix is the product of
//!
//! * a Gaussian pseudo-transition probability with moment-matched drift and
//!   variance, times the lattice step (rows are deliberately not normalised),
//! * a Brownian bridge survival factor for the two boundaries, and
//! * a potential factor: the trapezoid `exp(-dt/2 (V(x) + V(y)))` for smooth
//!   potentials, or `1 - kappa * E[bridge occupation above r]` for the step
//!   potential `kappa * 1{x > r}`.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use ndarray::Array2;
use num_complex::Complex64;
use libm::erfc;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::LatticeLayer;
use crate::model::{Drift, Potential, Problem, SchemeParams, StepRule};

/// Entries whose Gaussian factor is below `1e-30` of the row peak are left at
/// zero.
const NEGLIGIBLE_EXPONENT: f64 = -69.0;

/// Dense complex weights from layer `k - 1` (rows) to layer `k` (columns).
#[derive(Debug, Clone)]
pub struct TransitionLayer {
    pub k: usize,
    pub weights: Array2<Complex64>,
    /// Number of bridge factors that came out negative and were set to zero.
    pub clamped: usize,
}

impl TransitionLayer {
    pub fn rows(&self) -> usize {
        self.weights.nrows()
    }

    pub fn cols(&self) -> usize {
        self.weights.ncols()
    }
}

/// Standard normal upper tail `1 - Phi(z)`.
#[inline]
pub fn normal_tail(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// One-step mean increment and variance at layer `k`, evaluated from the
/// drift at `(t_{k-1}, x)`.
pub fn moments(drift: &dyn Drift, params: &SchemeParams, k: usize, x: f64) -> (f64, f64) {
    let dt = params.dt();
    let d = drift.partials(params.time(k - 1), x);
    let mu_step = (d.value + 0.5 * dt * (d.dt + d.value * d.dx + 0.5 * d.dxx)) * dt;
    let spread = 1.0 + 0.5 * dt * d.dx;
    (mu_step, spread * spread * dt)
}

/// Gaussian density of `y` around `x + mu_step`, times the lattice step `h`.
#[inline]
pub fn pseudo_prob(x: f64, y: f64, mu_step: f64, sigma2_step: f64, h: f64) -> f64 {
    let z = y - x - mu_step;
    h * (-z * z / (2.0 * sigma2_step)).exp() / (2.0 * PI * sigma2_step).sqrt()
}

/// Two-sided bridge survival factor before clamping. Can be negative when
/// both boundaries are close, because double crossings are ignored.
#[inline]
pub fn bridge_factor_raw(x: f64, y: f64, prev: &LatticeLayer, next: &LatticeLayer, n: usize) -> f64 {
    let two_n = 2.0 * n as f64;
    1.0 - (-two_n * (prev.g_hi - x) * (next.g_hi - y)).exp()
        - (-two_n * (prev.g_lo - x) * (next.g_lo - y)).exp()
}

/// Bridge survival factor clamped to `[0, 1)`.
#[inline]
pub fn bridge_factor(x: f64, y: f64, prev: &LatticeLayer, next: &LatticeLayer, n: usize) -> f64 {
    bridge_factor_raw(x, y, prev, next, n).max(0.0)
}

/// Trapezoid factor `exp(-dt/2 (V(x) + V(y)))`.
pub fn potential_factor_smooth(potential: &Potential, dt: f64, x: f64, y: f64) -> Complex64 {
    (-(dt / 2.0) * (potential.eval(x) + potential.eval(y))).exp()
}

/// Gauss-Legendre rule for the bridge occupation integral.
///
/// With `a = (level - x) / sqrt(t)`, `b = (level - y) / sqrt(t)` and
/// `s = t sin^2(theta)` the integral becomes
/// `t * int_0^{pi/2} Phibar(a cot(theta) + b tan(theta)) sin(2 theta)`,
/// which has no square-root endpoint singularity. What remains are thin
/// layers at both ends and, when the bridge crosses the level, a front at
/// the crossing angle. The rule is applied on
/// panels graded geometrically away from each of these.
#[derive(Debug, Clone)]
pub struct SojournQuadrature {
    rule: GaussLegendre,
}

/// Layers thinner than this carry a contribution below `1e-14`.
const MIN_LAYER: f64 = 1e-7;
const PANEL_RATIO: f64 = 4.0;
const FIRST_PANEL: f64 = 1.0 / 8.0;

fn panel_breaks(a: f64, b: f64) -> Vec<f64> {
    let mut pts = vec![0.0, FRAC_PI_2];
    let mut grade = |centre: f64, scale: f64| {
        let mut d = scale * FIRST_PANEL;
        while d < FRAC_PI_2 {
            for q in [centre - d, centre + d] {
                if 0.0 < q && q < FRAC_PI_2 {
                    pts.push(q);
                }
            }
            d *= PANEL_RATIO;
        }
    };
    // Near theta = 0 the argument is about a / theta + b theta, giving
    // layers of width |a| and 1 / |b| there.
    for (end, near, far) in [(0.0, a, b), (FRAC_PI_2, b, a)] {
        for scale in [near.abs(), 1.0 / far.abs()] {
            if scale > MIN_LAYER {
                grade(end, scale.min(1.0));
            }
        }
    }
    if a * b < 0.0 {
        let cross = (-a / b).sqrt().atan();
        let (sn, cs) = cross.sin_cos();
        let slope = (b / (cs * cs) - a / (sn * sn)).abs();
        grade(cross, 16.0 / slope);
        pts.push(cross);
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

impl SojournQuadrature {
    pub fn new(order: usize) -> Result<Self> {
        let order = NonZeroUsize::new(order)
            .ok_or_else(|| Error::InvalidArgument("quadrature order must be positive".into()))?;
        Ok(Self {
            rule: GaussLegendre::new(order),
        })
    }

    /// Expected time a Brownian bridge from `(0, x)` to `(t, y)` spends above
    /// `level`.
    pub fn occupation(&self, level: f64, x: f64, y: f64, t: f64) -> f64 {
        // Far from the level on one side the integrand is 0 or 1 to below
        // 1e-19: the bridge spread is at most sqrt(t)/2.
        let d_min = (level - x).abs().min((level - y).abs());
        let same_side = (x > level) == (y > level) && x != level && y != level;
        if same_side && 2.0 * d_min / t.sqrt() > 9.0 {
            return if x > level { t } else { 0.0 };
        }
        let sd = t.sqrt();
        let (a, b) = ((level - x) / sd, (level - y) / sd);
        let f = |theta: f64| {
            let (sn, cs) = theta.sin_cos();
            normal_tail(a * cs / sn + b * sn / cs) * 2.0 * sn * cs
        };
        let pts = panel_breaks(a, b);
        let sum: f64 = pts.windows(2).map(|w| self.rule.integrate(w[0], w[1], f)).sum();
        t * sum
    }
}

/// `exp(c^2) erfc(c)` for `c >= 0`.
fn erfcx(c: f64) -> f64 {
    if c < 15.0 {
        return (c * c).exp() * erfc(c);
    }
    // asymptotic series; twelve terms are below 1e-17 relative from c = 15
    let u = 1.0 / (2.0 * c * c);
    let (mut term, mut sum) = (1.0, 1.0);
    for n in 1..=12 {
        term *= -((2 * n - 1) as f64) * u;
        sum += term;
    }
    sum / (c * PI.sqrt())
}

/// Closed form of [`SojournQuadrature::occupation`]. Used by the Monte Carlo
/// oracle and to check the quadrature.
pub fn bridge_occupation_exact(level: f64, x: f64, y: f64, t: f64) -> f64 {
    let sd = t.sqrt();
    let (a, b) = ((level - x) / sd, (level - y) / sd);
    let c = (a.abs() + b.abs()) / SQRT_2;
    let frac = if a * b > 0.0 {
        let tail = 0.5 * (-2.0 * a * b).exp() * (1.0 - c * PI.sqrt() * erfcx(c));
        if a < 0.0 {
            1.0 - tail
        } else {
            tail
        }
    } else {
        0.5 - (a + b) * (PI / 8.0).sqrt() * erfcx(c)
    };
    t * frac
}

/// `P(bridge(s) > level)` for the bridge from `(0, x)` to `(t, y)`, with the
/// endpoint limits filled in.
pub fn occupation_integrand(level: f64, x: f64, y: f64, t: f64, s: f64) -> f64 {
    let endpoint = |v: f64| {
        if v > level {
            1.0
        } else if v < level {
            0.0
        } else {
            0.5
        }
    };
    if s <= 0.0 {
        return endpoint(x);
    }
    if s >= t {
        return endpoint(y);
    }
    let mean = x + (y - x) * s / t;
    let sd = ((t - s) * s / t).sqrt();
    normal_tail((level - mean) / sd)
}

/// First-order sojourn correction `1 - kappa * E[occupation above level]`
/// over one step of length `dt`.
pub fn potential_factor_step(
    kappa: f64,
    level: f64,
    dt: f64,
    x: f64,
    y: f64,
    quad: &SojournQuadrature,
) -> f64 {
    if kappa == 0.0 {
        return 1.0;
    }
    1.0 - kappa * quad.occupation(level, x, y, dt)
}

/// Assembles transition matrices for one problem.
pub struct Kernel<'a> {
    problem: &'a Problem,
    quad: SojournQuadrature,
}

impl<'a> Kernel<'a> {
    pub fn new(problem: &'a Problem) -> Result<Self> {
        Ok(Self {
            problem,
            quad: SojournQuadrature::new(problem.quad_order)?,
        })
    }

    pub fn assemble(&self, layers: &[LatticeLayer], k: usize) -> Result<TransitionLayer> {
        let p = self.problem;
        let params = &p.params;
        let (n, dt) = (params.n, params.dt());
        let prev = &layers[k - 1];
        let next = &layers[k];
        let (rows, cols) = (prev.len(), next.len());
        let h = next.h;

        // Row-wise moments, computed once per source node.
        let moments: Vec<(f64, f64)> = prev
            .nodes
            .iter()
            .map(|&x| moments(p.model.drift.as_ref(), params, k, x))
            .collect();
        if moments.iter().any(|(m, s)| !m.is_finite() || !s.is_finite() || *s <= 0.0) {
            return Err(Error::NonFinite { context: "drift moments", k });
        }

        // The trapezoid factor splits into per-node halves.
        let half_factors = |nodes: &[f64], rule: Option<(f64, f64)>| -> Vec<Complex64> {
            nodes
                .iter()
                .map(|&x| {
                    let v = match rule {
                        Some((kappa, level)) => Complex64::new(if x > level { kappa } else { 0.0 }, 0.0),
                        None => p.potential.eval(x),
                    };
                    (-(dt / 2.0) * v).exp()
                })
                .collect()
        };
        let (row_half, col_half, sojourn) = match (&p.potential, p.step_rule) {
            (Potential::Step { kappa, level }, StepRule::BridgeSojourn) => {
                (Vec::new(), Vec::new(), Some((*kappa, *level)))
            }
            (Potential::Step { kappa, level }, StepRule::Trapezoid) => (
                half_factors(&prev.nodes, Some((*kappa, *level))),
                half_factors(&next.nodes, Some((*kappa, *level))),
                None,
            ),
            (Potential::Smooth { .. }, _) => (
                half_factors(&prev.nodes, None),
                half_factors(&next.nodes, None),
                None,
            ),
        };
        if row_half.iter().chain(&col_half).any(|z| !z.is_finite()) {
            return Err(Error::NonFinite { context: "potential", k });
        }

        let mut data = vec![Complex64::new(0.0, 0.0); rows * cols];
        let clamped: usize = data
            .par_chunks_mut(cols.max(1))
            .enumerate()
            .map(|(i, row)| {
                let x = prev.nodes[i];
                let (mu_step, s2) = moments[i];
                let inv_two_var = 1.0 / (2.0 * s2);
                let norm = h / (2.0 * PI * s2).sqrt();
                let mut clamped = 0;
                for (j, out) in row.iter_mut().enumerate() {
                    let y = next.nodes[j];
                    let z = y - x - mu_step;
                    let expo = -z * z * inv_two_var;
                    if expo < NEGLIGIBLE_EXPONENT {
                        continue;
                    }
                    let raw = bridge_factor_raw(x, y, prev, next, n);
                    if raw < 0.0 {
                        clamped += 1;
                        continue;
                    }
                    let base = norm * expo.exp() * raw;
                    *out = match sojourn {
                        Some((kappa, level)) => {
                            Complex64::new(base * potential_factor_step(kappa, level, dt, x, y, &self.quad), 0.0)
                        }
                        None => row_half[i] * col_half[j] * base,
                    };
                }
                clamped
            })
            .sum();

        Ok(TransitionLayer {
            k,
            weights: Array2::from_shape_vec((rows, cols), data).expect("shape matches buffer"),
            clamped,
        })
    }
}

/// Layer-`k` transition matrix for `problem` on the given lattice.
pub fn assemble_layer(problem: &Problem, layers: &[LatticeLayer], k: usize) -> Result<TransitionLayer> {
    if k == 0 || k >= layers.len() {
        return Err(Error::InvalidArgument(format!("layer index {k} outside 1..{}", layers.len())));
    }
    Kernel::new(problem)?.assemble(layers, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_layers;
    use crate::model::{BoundaryPair, DiffusionModel, FnDrift, Payoff, ZeroDrift};
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn layer(k: usize, lo: f64, hi: f64) -> LatticeLayer {
        LatticeLayer {
            k,
            t: 0.0,
            h: 0.1,
            g_lo: lo,
            g_hi: hi,
            nodes: vec![],
        }
    }

    #[test]
    fn zero_drift_moments() {
        let p = SchemeParams::new(30, 2.0, 0.0).unwrap();
        let (m, s2) = moments(&ZeroDrift, &p, 5, 1.3);
        assert_eq!(m, 0.0);
        assert_eq!(s2, p.dt());
    }

    #[test]
    fn mean_reverting_moments() {
        let alpha = 0.01;
        let drift = FnDrift {
            value: Arc::new(move |t, x| 0.03 + t - alpha * x),
            dt: Arc::new(|_, _| 1.0),
            dx: Arc::new(move |_, _| -alpha),
            dxx: Arc::new(|_, _| 0.0),
        };
        let p = SchemeParams::new(30, 2.0, 0.0).unwrap();
        let (_, s2) = moments(&drift, &p, 3, 2.0);
        let expect = (1.0 - 0.5 * (1.0 / 30.0) * alpha).powi(2) / 30.0;
        assert_abs_diff_eq!(s2, expect, epsilon = 1e-17);
    }

    #[test]
    fn linear_drift_moments() {
        let drift = FnDrift {
            value: Arc::new(|_, x| x),
            dt: Arc::new(|_, _| 0.0),
            dx: Arc::new(|_, _| 1.0),
            dxx: Arc::new(|_, _| 0.0),
        };
        let p = SchemeParams::new(10, 2.0, 0.0).unwrap();
        let (m, _) = moments(&drift, &p, 1, 1.0);
        assert_abs_diff_eq!(m, 0.105, epsilon = 1e-15);
    }

    #[test]
    fn density_mode() {
        let s2 = 1.0 / 30.0;
        assert_abs_diff_eq!(
            pseudo_prob(0.3, 0.35, 0.05, s2, 0.1),
            0.1 / (2.0 * PI * s2).sqrt(),
            epsilon = 1e-15
        );
        let v = pseudo_prob(0.0, 0.0, 0.0, s2, 0.09146);
        assert_abs_diff_eq!(v, 0.09146 * (30.0 / (2.0 * PI)).sqrt(), epsilon = 1e-15);
        assert!((v - 0.19985).abs() < 5e-5);
    }

    #[test]
    fn bridge_factor_examples() {
        let prev = layer(0, -4.0, 4.0);
        let next = layer(1, -4.0, 4.0);
        assert_eq!(bridge_factor(4.0, 3.0, &prev, &next, 30), 0.0);
        let deep = bridge_factor(0.0, 0.1, &prev, &next, 1000);
        assert!(deep > 1.0 - 1e-12);
        let v = bridge_factor(3.9, 3.9, &prev, &next, 30);
        let expect = 1.0 - (-0.6f64).exp() - (-2.0 * 30.0 * 62.41f64).exp();
        assert_abs_diff_eq!(v, expect, epsilon = 1e-12);
        assert!((v - 0.45119).abs() < 1e-5);
    }

    #[test]
    fn bridge_factor_clamps_in_narrow_strip() {
        let prev = layer(0, -0.05, 0.05);
        let next = layer(1, -0.05, 0.05);
        assert!(bridge_factor_raw(0.0, 0.0, &prev, &next, 2) < 0.0);
        assert_eq!(bridge_factor(0.0, 0.0, &prev, &next, 2), 0.0);
    }

    #[test]
    fn bridge_factor_time_reversal_symmetry() {
        let prev = layer(0, -1.5, 2.0);
        let next = layer(1, -1.5, 2.0);
        for (x, y) in [(0.3, -0.7), (1.9, 1.2), (-1.4, 0.0)] {
            let a = bridge_factor_raw(x, y, &prev, &next, 30);
            let b = bridge_factor_raw(y, x, &prev, &next, 30);
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn smooth_potential_factors() {
        let dt = 1.0 / 30.0;
        assert_eq!(potential_factor_smooth(&Potential::zero(), dt, 0.3, -0.2), Complex64::new(1.0, 0.0));
        let lin = Potential::real(|x| x);
        assert_abs_diff_eq!(potential_factor_smooth(&lin, dt, 0.03, 0.03).re, (-0.001f64).exp(), epsilon = 1e-15);
        let kac = Potential::complex(|x| Complex64::new(0.0, -x * x));
        let z = potential_factor_smooth(&kac, dt, 1.0, 2.0);
        assert_abs_diff_eq!(z.re, (1.0f64 / 12.0).cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(z.im, (1.0f64 / 12.0).sin(), epsilon = 1e-15);
    }

    #[test]
    fn step_potential_factors() {
        let q = SojournQuadrature::new(16).unwrap();
        let dt = 1.0 / 30.0;
        assert_eq!(potential_factor_step(0.0, 0.1, dt, 0.1, 0.1, &q), 1.0);
        // integrand is identically 1/2 on the level
        assert_abs_diff_eq!(potential_factor_step(2.0, 0.1, dt, 0.1, 0.1, &q), 1.0 - dt, epsilon = 1e-14);
        let sd = dt.sqrt();
        let far = potential_factor_step(2.0, 0.1, dt, 0.1 - 5.0 * sd, 0.1 - 5.5 * sd, &q);
        assert!((far - 1.0).abs() < 1e-5);
        let above = potential_factor_step(2.0, 0.1, dt, 0.1 + 5.0 * sd, 0.1 + 5.5 * sd, &q);
        assert!((above - (1.0 - 2.0 * dt)).abs() < 1e-5);
    }

    #[test]
    fn occupation_integrand_limits() {
        assert_eq!(occupation_integrand(0.0, 1.0, -1.0, 0.1, 0.0), 1.0);
        assert_eq!(occupation_integrand(0.0, 1.0, -1.0, 0.1, 0.1), 0.0);
        assert_eq!(occupation_integrand(0.0, 0.0, 0.0, 0.1, 0.05), 0.5);
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let q = SojournQuadrature::new(16).unwrap();
        let dt: f64 = 1.0 / 30.0;
        let sd = dt.sqrt();
        let offsets = [-30.0, -4.7, -1.0, -0.3, -1e-3, -1e-8, 0.0, 2e-9, 1e-4, 0.05, 0.6, 2.0, 5.0, 25.0];
        for &u in &offsets {
            for &v in &offsets {
                let (x, y) = (0.05 + u * sd, 0.05 + v * sd);
                let exact = bridge_occupation_exact(0.05, x, y, dt);
                let quad = q.occupation(0.05, x, y, dt);
                assert!((quad - exact).abs() < 1e-13 * dt, "u={u} v={v}: {quad} vs {exact}");
                assert!((0.0..=dt).contains(&exact));
            }
        }
    }

    #[test]
    fn closed_form_special_cases() {
        // on the level the bridge is above half the time
        assert_abs_diff_eq!(bridge_occupation_exact(0.0, 0.0, 0.0, 0.3), 0.15, epsilon = 1e-16);
        // symmetric endpoints about the level
        assert_abs_diff_eq!(bridge_occupation_exact(0.0, -0.4, 0.4, 1.0), 0.5, epsilon = 1e-15);
        // reflection x -> 2 level - x swaps time above and below
        let (a, b) = (bridge_occupation_exact(0.1, 0.3, -0.2, 0.5), bridge_occupation_exact(0.1, -0.1, 0.4, 0.5));
        assert_abs_diff_eq!(a + b, 0.5, epsilon = 1e-15);
        // one endpoint on the level, the other one sd below: mpmath reference
        assert_abs_diff_eq!(bridge_occupation_exact(0.0, 0.0, -1.0, 1.0), 0.17216022879060078, epsilon = 1e-15);
        // a long jump spends the time after the crossing above
        assert_abs_diff_eq!(bridge_occupation_exact(0.0, -3.0, 40.0, 1.0), 0.9300002507371927, epsilon = 1e-13);
        assert!(bridge_occupation_exact(0.0, -300.0, 400.0, 1.0).is_finite());
    }

    fn kac_problem(n: usize) -> Problem {
        Problem::new(
            DiffusionModel::brownian(0.0),
            BoundaryPair::new(Arc::new(|t| -4.0 + t * t), Arc::new(|t| 4.0 - t * t)),
            Potential::complex(|x| Complex64::new(0.0, -x * x)),
            Payoff::constant(1.0),
            SchemeParams::new(n, 2.0, 0.0).unwrap(),
        )
    }

    #[test]
    fn first_layer_has_single_row() {
        let p = kac_problem(30);
        let layers = build_layers(&p).unwrap();
        let s = assemble_layer(&p, &layers, 1).unwrap();
        assert_eq!(s.rows(), 1);
        assert_eq!(s.cols(), layers[1].len());
    }

    #[test]
    fn zero_potential_entries_are_density_times_bridge() {
        let p = kac_problem(20).with_potential(Potential::zero());
        let layers = build_layers(&p).unwrap();
        let k = 7;
        let s = assemble_layer(&p, &layers, k).unwrap();
        let dt = p.params.dt();
        for (i, &x) in layers[k - 1].nodes.iter().enumerate().step_by(5) {
            for (j, &y) in layers[k].nodes.iter().enumerate().step_by(7) {
                let expect = pseudo_prob(x, y, 0.0, dt, layers[k].h) * bridge_factor(x, y, &layers[k - 1], &layers[k], 20);
                assert_abs_diff_eq!(s.weights[[i, j]].re, expect, epsilon = 1e-15);
                assert_eq!(s.weights[[i, j]].im, 0.0);
            }
        }
    }

    #[test]
    fn entries_respect_magnitude_bound() {
        let p = kac_problem(30).with_potential(Potential::real(|x| -0.5 * x));
        let layers = build_layers(&p).unwrap();
        let dt = p.params.dt();
        for k in [1, 10, 30] {
            let s = assemble_layer(&p, &layers, k).unwrap();
            let min_re_v = layers[k - 1]
                .nodes
                .iter()
                .chain(&layers[k].nodes)
                .map(|&x| -0.5 * x)
                .fold(f64::INFINITY, f64::min);
            let growth = (dt * (-min_re_v).max(0.0)).exp();
            for (i, &x) in layers[k - 1].nodes.iter().enumerate() {
                for (j, &y) in layers[k].nodes.iter().enumerate() {
                    let bound = pseudo_prob(x, y, 0.0, dt, layers[k].h) * growth;
                    assert!(s.weights[[i, j]].norm() <= bound * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn unrestricted_row_sums_are_close_to_one() {
        // Row sums over the full lattice E_{n,k}, not just the strip interior.
        let p = kac_problem(30);
        let layers = build_layers(&p).unwrap();
        let dt = p.params.dt();
        for k in [1, 2, 15, 30] {
            let next = &layers[k];
            for &x in layers[k - 1].nodes.iter().step_by(9) {
                let sum: f64 = (-20_000i64..20_000)
                    .map(|j| next.g_hi - j as f64 * next.h)
                    .map(|y| pseudo_prob(x, y, 0.0, dt, next.h))
                    .sum();
                assert!((sum - 1.0).abs() < 1e-3, "k={k} x={x} sum={sum}");
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn quadrature_tracks_closed_form(
            ea in -9.0f64..1.5, eb in -9.0f64..1.5,
            sa in proptest::bool::ANY, sb in proptest::bool::ANY,
            dt in 0.001f64..0.2,
        ) {
            let sd = dt.sqrt();
            let u = if sa { 10f64.powf(ea) } else { -(10f64.powf(ea)) };
            let v = if sb { 10f64.powf(eb) } else { -(10f64.powf(eb)) };
            let (x, y) = (0.3 - u * sd, 0.3 - v * sd);
            let q = SojournQuadrature::new(16).unwrap();
            let exact = bridge_occupation_exact(0.3, x, y, dt);
            proptest::prop_assert!((q.occupation(0.3, x, y, dt) - exact).abs() < 1e-13 * dt);
        }
    }
}
