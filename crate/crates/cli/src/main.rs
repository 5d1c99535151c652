//! `fklattice` command-line front end.
//!
//! Exit codes: 1 for unreadable or malformed configuration, 2 for a problem
//! or argument that fails validation, 3 for numeric failures and output
//! errors.

mod config;
mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fklattice::{engine, mc_price, presets, Potential, Problem};
use serde_json::json;

use config::ProblemConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid: {0}")]
    Invalid(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("output error: {0}")]
    Output(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 1,
            Self::Invalid(_) => 2,
            Self::Numeric(_) | Self::Output(_) => 3,
        }
    }
}

impl From<fklattice::Error> for CliError {
    fn from(e: fklattice::Error) -> Self {
        use fklattice::Error as E;
        match e {
            E::InvalidProblem(_) | E::GridTooCoarse { .. } | E::InvalidArgument(_) => Self::Invalid(e.to_string()),
            E::NonFinite { .. } | E::DegenerateFit(_) | E::Eval(_) => Self::Numeric(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "fklattice", version, about = "Lattice pricing of killed Feynman-Kac expectations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price Q_n at a single n.
    Price {
        #[command(flatten)]
        source: Source,
        /// Print a JSON summary on stdout.
        #[arg(long)]
        json: bool,
    },
    /// Write the value surface v(t_k, x) as CSV.
    Surface {
        #[command(flatten)]
        source: Source,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print a JSON summary on stdout.
        #[arg(long)]
        json: bool,
    },
    /// Tabulate |Re Q_{n+1} - Re Q_n| and fit its log-log slope.
    Convergence {
        #[command(flatten)]
        source: Source,
        /// Comma-separated values of n [default: 16,24,32,48,64,96,128].
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print a JSON summary on stdout.
        #[arg(long)]
        json: bool,
    },
    /// Monte Carlo estimate compared against the lattice price.
    Mc {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Print a JSON summary on stdout.
        #[arg(long)]
        json: bool,
    },
    /// Check a problem without pricing it.
    Validate {
        #[command(flatten)]
        source: Source,
        /// Print a JSON summary on stdout.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "problem")]
struct ProblemArg {
    /// TOML problem file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in problem: example1, example2, example3, kac-wide, brownian-strip.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct Source {
    #[command(flatten)]
    problem: ProblemArg,
    /// Override the number of time steps.
    #[arg(long)]
    n: Option<usize>,
    /// Gauss-Legendre order per panel for the step potential.
    #[arg(long)]
    quad_order: Option<usize>,
    /// Override the height of a step potential.
    #[arg(long)]
    kappa: Option<f64>,
}

impl Source {
    fn load(&self) -> Result<Problem, CliError> {
        let mut p = match (&self.problem.config, &self.problem.preset) {
            (Some(path), _) => ProblemConfig::load(path)?.into_problem()?,
            (None, Some(name)) => presets::by_name(name, presets::FIGURE_N).ok_or_else(|| {
                CliError::Config(format!("unknown preset {name:?}; expected one of {}", presets::NAMES.join(", ")))
            })?,
            (None, None) => unreachable!("clap requires a problem source"),
        };
        if let Some(n) = self.n {
            if n == 0 {
                return Err(CliError::Invalid("n must be positive".into()));
            }
            p = p.with_n(n);
        }
        if let Some(order) = self.quad_order {
            p = p.with_quad_order(order);
        }
        if let Some(kappa) = self.kappa {
            match p.potential {
                Potential::Step { level, .. } => p = p.with_potential(Potential::step(kappa, level)),
                _ => return Err(CliError::Invalid("--kappa needs a step potential".into())),
            }
        }
        Ok(p)
    }

    fn load_valid(&self) -> Result<Problem, CliError> {
        let p = self.load()?;
        p.ensure_valid()?;
        Ok(p)
    }
}

fn print_json(value: &serde_json::Value) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer(&mut out, value).map_err(std::io::Error::from)?;
    writeln!(out)?;
    Ok(())
}

fn write_csv(out: Option<&Path>, body: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, body)?,
        None => match std::io::stdout().lock().write_all(body.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => return Err(e.into()),
            _ => {}
        },
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Price { source, json } => {
            let r = engine::price(&source.load_valid()?)?;
            if json {
                print_json(&json!({
                    "n": r.n,
                    "q_re": r.q.re,
                    "q_im": r.q.im,
                    "runtime_ms": r.wall_time.as_secs_f64() * 1e3,
                    "layers": r.layer_count,
                    "total_nodes": r.grid.total_nodes,
                    "max_nodes": r.grid.max_nodes,
                    "last_layer_nodes": r.grid.last_layer_nodes,
                    "clamped": r.grid.clamped,
                }))?;
            } else {
                println!("n={} Q={} ({:.1} ms)", r.n, r.q, r.wall_time.as_secs_f64() * 1e3);
            }
        }
        Command::Surface { source, out, json } => {
            let s = engine::value_surface(&source.load_valid()?)?;
            write_csv(out.as_deref(), &output::surface_csv(&s))?;
            if json && out.is_some() {
                print_json(&json!({ "rows": s.row_count(), "layers": s.layers.len(), "q_re": s.q().re, "q_im": s.q().im }))?;
            }
        }
        Command::Convergence { source, n_list, out, json } => {
            let p = source.load_valid()?;
            let ns = n_list.unwrap_or_else(|| engine::DEFAULT_N_LIST.to_vec());
            let study = engine::convergence_study(&p, &ns)?;
            write_csv(out.as_deref(), &output::convergence_csv(&study))?;
            let summary = match study.fit {
                Some(f) => json!({ "slope": f.slope, "intercept": f.intercept, "r2": f.r2, "degenerate": false }),
                None => json!({ "slope": null, "intercept": null, "r2": null, "degenerate": true }),
            };
            if out.is_some() {
                if json {
                    print_json(&summary)?;
                } else {
                    match study.fit {
                        Some(f) => println!("slope={:.4} r2={:.5}", f.slope, f.r2),
                        None => println!("degenerate: differences below {:e}", engine::DEGENERATE_DIFF),
                    }
                }
            } else {
                eprintln!("{summary}");
            }
        }
        Command::Mc { source, paths, steps, seed, json } => {
            let p = source.load_valid()?;
            let e = mc_price(&p, steps, paths, seed)?;
            let q = engine::price(&p)?.q;
            let z = if e.se() > 0.0 { (q.re - e.mean.re) / e.se() } else { f64::NAN };
            if json {
                print_json(&json!({
                    "mean_re": e.mean.re,
                    "mean_im": e.mean.im,
                    "se": e.se(),
                    "se_im": e.std_error.im,
                    "z_score": if z.is_finite() { json!(z) } else { json!(null) },
                    "engine_n": p.params.n,
                    "engine_re": q.re,
                    "engine_im": q.im,
                    "paths": e.paths,
                    "steps": e.steps_per_path,
                    "seed": e.seed,
                }))?;
            } else {
                println!("MC={} se={:.3e} engine={} z={z:.3}", e.mean, e.se(), q);
            }
        }
        Command::Validate { source, json } => {
            let p = source.load()?;
            let violations = p.validate();
            if json {
                let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
                print_json(&json!({ "valid": list.is_empty(), "violations": list }))?;
            }
            if !violations.is_empty() {
                for v in &violations {
                    eprintln!("{v}");
                }
                return Err(fklattice::Error::InvalidProblem(violations).into());
            }
            if !json {
                println!("ok");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fklattice: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
