//! Matrix-chain evaluation of the lattice approximation `Q_n`.
//!
//! [`price`] pushes the single row of the starting point forward through the
//! layers; [`value_surface`] runs the chain backwards from the payoff and
//! keeps every intermediate vector, giving `v(t_k, x)` on each layer.

use std::time::{Duration, Instant};

use ndarray::{Array1, ArrayView1};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{build_layers, LatticeLayer};
use crate::kernel::Kernel;
use crate::model::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GridStats {
    pub total_nodes: usize,
    pub max_nodes: usize,
    pub last_layer_nodes: usize,
    /// Bridge factors clamped at zero over all layers.
    pub clamped: usize,
}

impl GridStats {
    fn from_layers(layers: &[LatticeLayer]) -> Self {
        Self {
            total_nodes: layers.iter().map(LatticeLayer::len).sum(),
            max_nodes: layers.iter().map(LatticeLayer::len).max().unwrap_or(0),
            last_layer_nodes: layers.last().map_or(0, LatticeLayer::len),
            clamped: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceResult {
    pub n: usize,
    pub q: Complex64,
    pub layer_count: usize,
    pub wall_time: Duration,
    pub grid: GridStats,
}

/// Approximations to `v(t_k, x)` on every lattice layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface {
    pub layers: Vec<SurfaceLayer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceLayer {
    pub k: usize,
    pub t: f64,
    pub nodes: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl ValueSurface {
    /// The value at the starting point, equal to `Q_n`.
    pub fn q(&self) -> Complex64 {
        self.layers[0].values[0]
    }

    pub fn row_count(&self) -> usize {
        self.layers.iter().map(|l| l.nodes.len()).sum()
    }
}

fn payoff_vector(problem: &Problem, layer: &LatticeLayer) -> Result<Array1<Complex64>> {
    let phi: Array1<Complex64> = layer
        .nodes
        .iter()
        .map(|&x| Complex64::new(problem.payoff.eval(x), 0.0))
        .collect();
    if phi.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFinite {
            context: "payoff",
            k: layer.k,
        });
    }
    Ok(phi)
}

fn check_finite(v: ArrayView1<Complex64>, k: usize) -> Result<()> {
    if v.iter().all(|z| z.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            context: "propagated values",
            k,
        })
    }
}

/// `Q_n` by forward propagation of the starting row.
pub fn price(problem: &Problem) -> Result<PriceResult> {
    let start = Instant::now();
    let layers = build_layers(problem)?;
    let kernel = Kernel::new(problem)?;
    let mut grid = GridStats::from_layers(&layers);

    let mut row = Array1::from_elem(1, Complex64::new(1.0, 0.0));
    for k in 1..layers.len() {
        let s = kernel.assemble(&layers, k)?;
        grid.clamped += s.clamped;
        row = row.dot(&s.weights);
        check_finite(row.view(), k)?;
    }
    let phi = payoff_vector(problem, layers.last().expect("n >= 1"))?;
    let q = row.dot(&phi);

    Ok(PriceResult {
        n: problem.params.n,
        q,
        layer_count: layers.len(),
        wall_time: start.elapsed(),
        grid,
    })
}

/// Backward pass `v_n = phi`, `v_{k-1} = S_k v_k`, keeping every layer.
pub fn value_surface(problem: &Problem) -> Result<ValueSurface> {
    let layers = build_layers(problem)?;
    let kernel = Kernel::new(problem)?;
    let n = layers.len() - 1;

    let mut values: Vec<Array1<Complex64>> = vec![Array1::zeros(0); n + 1];
    values[n] = payoff_vector(problem, &layers[n])?;
    for k in (1..=n).rev() {
        let s = kernel.assemble(&layers, k)?;
        let v = s.weights.dot(&values[k]);
        check_finite(v.view(), k - 1)?;
        values[k - 1] = v;
    }

    Ok(ValueSurface {
        layers: layers
            .into_iter()
            .zip(values)
            .map(|(layer, v)| SurfaceLayer {
                k: layer.k,
                t: layer.t,
                nodes: layer.nodes,
                values: v.to_vec(),
            })
            .collect(),
    })
}

pub const DEFAULT_N_LIST: [usize; 7] = [16, 24, 32, 48, 64, 96, 128];

/// Differences below this are treated as numerically zero by the fit.
pub const DEGENERATE_DIFF: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub q: Complex64,
    pub q_next: Complex64,
    /// `|Re Q_{n+1} - Re Q_n|`.
    pub diff: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub rows: Vec<ConvergenceRow>,
    /// `None` when some difference is too small to take a logarithm of.
    pub fit: Option<LogLogFit>,
}

impl ConvergenceStudy {
    pub fn is_degenerate(&self) -> bool {
        self.fit.is_none()
    }
}

/// Ordinary least squares of `log y` on `log x`.
pub fn fit_log_log(xs: &[f64], ys: &[f64]) -> Result<LogLogFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::DegenerateFit("need at least two points".into()));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::DegenerateFit("non-positive value on a log axis".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(LogLogFit { slope, intercept, r2 })
}

/// Prices at each `n` and `n + 1` of `n_list` and fits the decay of
/// `|Re Q_{n+1} - Re Q_n|` against `n` on log-log axes.
pub fn convergence_study(problem: &Problem, n_list: &[usize]) -> Result<ConvergenceStudy> {
    if n_list.len() < 4 {
        return Err(Error::InvalidArgument("convergence study needs at least 4 values of n".into()));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("n list must be strictly increasing".into()));
    }
    let mut ns: Vec<usize> = n_list.iter().flat_map(|&n| [n, n + 1]).collect();
    ns.dedup();
    let prices: Vec<(usize, Complex64)> = ns
        .par_iter()
        .map(|&n| price(&problem.with_n(n)).map(|r| (n, r.q)))
        .collect::<Result<_>>()?;
    let lookup = |n: usize| prices.iter().find(|(m, _)| *m == n).map(|(_, q)| *q).expect("priced");

    let rows: Vec<ConvergenceRow> = n_list
        .iter()
        .map(|&n| {
            let (q, q_next) = (lookup(n), lookup(n + 1));
            ConvergenceRow {
                n,
                q,
                q_next,
                diff: (q_next.re - q.re).abs(),
            }
        })
        .collect();

    let fit = if rows.iter().any(|r| r.diff < DEGENERATE_DIFF) {
        None
    } else {
        let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.diff).collect();
        Some(fit_log_log(&xs, &ys)?)
    };
    Ok(ConvergenceStudy { rows, fit })
}
