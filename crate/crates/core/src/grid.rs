//! Boundary-anchored space lattices.
//!
//! Layer `k >= 1` lives at `t = k/n` on the lattice `{g+ - j h : j in Z}`
//! whose step `h` divides the strip width exactly, so both boundaries are
//! lattice points. Only the interior points are kept. Layer `0` is the
//! single starting point `x0`.

use crate::error::{Error, Result};
use crate::model::{BoundaryPair, Problem, SchemeParams};

/// Nodes of one time layer, stored in descending order from `g_hi - h`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeLayer {
    pub k: usize,
    pub t: f64,
    /// Lattice step. Zero for the singleton layer `k = 0`.
    pub h: f64,
    pub g_lo: f64,
    pub g_hi: f64,
    pub nodes: Vec<f64>,
}

impl LatticeLayer {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of lattice intervals spanning the strip, `(g_hi - g_lo) / h`.
    pub fn intervals(&self) -> usize {
        if self.k == 0 {
            0
        } else {
            self.nodes.len() + 1
        }
    }
}

/// Grid scale `dt^(1/2 + delta)` for `k < n` and `dt` for the last layer.
fn scale(params: &SchemeParams, k: usize) -> f64 {
    let dt = params.dt();
    if k < params.n {
        dt.powf(0.5 + params.delta)
    } else {
        dt
    }
}

/// `floor(gamma * width / scale)`, the number of lattice intervals between
/// the boundaries at layer `k`.
pub(crate) fn interval_count(bounds: &BoundaryPair, params: &SchemeParams, k: usize) -> i64 {
    let width = bounds.width_at(params.time(k));
    (params.gamma * width / scale(params, k)).floor() as i64
}

/// Normalised node spacing `w` and lattice step `h` for layer `k` (`1..=n`).
pub fn layer_step(bounds: &BoundaryPair, params: &SchemeParams, k: usize) -> Result<(f64, f64)> {
    if k == 0 || k > params.n {
        return Err(Error::InvalidArgument(format!(
            "layer index {k} outside 1..={}",
            params.n
        )));
    }
    let sc = scale(params, k);
    let scaled_width = bounds.width_at(params.time(k)) / sc;
    let m = (params.gamma * scaled_width).floor();
    if !(m >= 1.0) {
        return Err(Error::GridTooCoarse {
            k,
            gamma: params.gamma,
            scaled_width,
        });
    }
    let w = scaled_width / m;
    Ok((w, w * sc))
}

pub fn build_layer(bounds: &BoundaryPair, params: &SchemeParams, k: usize) -> Result<LatticeLayer> {
    let t = params.time(k);
    let (g_lo, g_hi) = (bounds.lower_at(t), bounds.upper_at(t));
    let (_, h) = layer_step(bounds, params, k)?;
    let ratio = (g_hi - g_lo) / h;
    let m = ratio.round();
    assert!(
        (m - ratio).abs() < 1e-6,
        "lattice interval count drifted from an integer: {ratio}"
    );
    let m = m as usize;
    let nodes = (1..m).map(|j| g_hi - j as f64 * h).collect();
    Ok(LatticeLayer {
        k,
        t,
        h,
        g_lo,
        g_hi,
        nodes,
    })
}

/// Layers `0..=n`; layer `n` uses the finer `dt`-scale step.
pub fn build_layers(problem: &Problem) -> Result<Vec<LatticeLayer>> {
    problem.ensure_valid()?;
    let params = &problem.params;
    let bounds = &problem.bounds;
    let mut layers = Vec::with_capacity(params.n + 1);
    layers.push(LatticeLayer {
        k: 0,
        t: 0.0,
        h: 0.0,
        g_lo: bounds.lower_at(0.0),
        g_hi: bounds.upper_at(0.0),
        nodes: vec![problem.model.x0],
    });
    for k in 1..=params.n {
        layers.push(build_layer(bounds, params, k)?);
    }
    Ok(layers)
}
