//! Command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::frictionless::{asymptotic_report, Oracle};
use crate::model::{GridSpec, ModelParams};
use crate::output::{self, RunManifest, SweepRow};
use crate::sim::{simulate, FixedTarget, NeverTrade, OptimalPolicy, SimConfig};
use crate::solver::solve;

#[derive(Debug, Parser)]
#[command(name = "notrade", version, about = "Optimal investment with Poisson trading times and proportional costs")]
pub struct Cli {
    /// Worker threads; 0 uses one per core.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Paths {
    /// Configuration file with `key = value` lines.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the value surface and the no-trade boundaries.
    Solve {
        #[command(flatten)]
        paths: Paths,
    },
    /// Frictionless root and first-order cost expansion on the time grid.
    Asymptotics {
        #[command(flatten)]
        paths: Paths,
    },
    /// One solve per value of a parameter, read off at a fixed time.
    Sweep {
        #[command(flatten)]
        paths: Paths,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated, positive and increasing.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Time at which boundaries and values are reported.
        #[arg(long, default_value_t = 0.0)]
        time: f64,
    },
    /// Monte Carlo estimate of the expected log of terminal wealth.
    Simulate {
        #[command(flatten)]
        paths: Paths,
        #[arg(long, value_enum, default_value_t = PolicyKind::Optimal)]
        policy: PolicyKind,
        #[arg(long = "paths", default_value_t = 100_000)]
        n_paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Initial stock fraction; defaults to the Merton fraction clamped to [0, 1].
        #[arg(long)]
        x0: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        w0: f64,
        /// Also write every trade to trades.csv.
        #[arg(long)]
        trade_log: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    /// Both proportional costs, set equal.
    Epsilon,
    /// Trading intensity.
    Lambda,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyKind {
    Optimal,
    Never,
    Merton,
}

impl PolicyKind {
    fn name(self) -> &'static str {
        match self {
            PolicyKind::Optimal => "optimal",
            PolicyKind::Never => "never",
            PolicyKind::Merton => "merton",
        }
    }
}

/// 1 for numerical failures, 2 for bad input or I/O.
pub fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        1
    } else {
        2
    }
}

/// Parses the arguments, runs the command and maps errors to exit codes.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::parse_from(args);
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Runs one command and returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&cli.command))
}

fn dispatch(cmd: &Command) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let (paths, name) = match cmd {
        Command::Solve { paths } => (paths, "solve"),
        Command::Asymptotics { paths } => (paths, "asymptotics"),
        Command::Sweep { paths, .. } => (paths, "sweep"),
        Command::Simulate { paths, .. } => (paths, "simulate"),
    };
    let cfg = Config::load(&paths.config)?;
    let out = &paths.out;
    std::fs::create_dir_all(out).map_err(|source| Error::Io { path: out.clone(), source })?;
    let (p, spec) = (cfg.params, cfg.grid);

    let mut outputs = Vec::new();
    let mut residuals = Vec::new();
    let options = match cmd {
        Command::Solve { .. } => {
            let rep = solve(&p, &spec)?;
            residuals.push(rep.final_residual);
            outputs.push(out.join("surface.csv"));
            output::write_surface(&outputs[0], &rep.surface)?;
            outputs.push(out.join("boundaries.csv"));
            output::write_boundaries(&outputs[1], &rep.boundaries)?;
            json!({
                "picard_iterations": rep.picard_iterations,
                "lo_clamp_onset": rep.boundaries.lo_clamp_onset(),
            })
        }
        Command::Asymptotics { .. } => {
            let rep = asymptotic_report(&p, &spec)?;
            outputs.push(out.join("asymptotics.csv"));
            output::write_asymptotics(&outputs[0], &rep)?;
            json!({})
        }
        Command::Sweep { axis, values, time, .. } => {
            let (rows, res) = sweep(&p, &spec, *axis, values, *time)?;
            residuals = res;
            let label = match axis {
                Axis::Epsilon => "epsilon",
                Axis::Lambda => "lambda",
            };
            outputs.push(out.join("sweep.csv"));
            output::write_sweep(&outputs[0], label, &rows)?;
            json!({ "axis": label, "values": values, "time": time })
        }
        Command::Simulate { policy, n_paths, seed, x0, w0, trade_log, .. } => {
            let x0 = x0.unwrap_or_else(|| p.merton_fraction().clamp(0.0, 1.0));
            let config = SimConfig { n_paths: *n_paths, seed: *seed, x0, w0: *w0, record_trades: *trade_log }.validate()?;
            let mut solver_value = None;
            let result = match policy {
                PolicyKind::Optimal => {
                    let rep = solve(&p, &spec)?;
                    residuals.push(rep.final_residual);
                    solver_value = Some(w0.ln() + rep.surface.value_at(0.0, x0));
                    simulate(&p, &OptimalPolicy { boundaries: rep.boundaries }, &config)?
                }
                PolicyKind::Never => simulate(&p, &NeverTrade, &config)?,
                PolicyKind::Merton => simulate(&p, &FixedTarget::merton(&p), &config)?,
            };
            outputs.push(out.join("simresult.csv"));
            output::write_sim_result(&outputs[0], policy.name(), *seed, x0, *w0, &result, solver_value)?;
            if let Some(log) = &result.trade_log {
                outputs.push(out.join("trades.csv"));
                output::write_trades(&outputs[1], log)?;
            }
            json!({
                "policy": policy.name(),
                "paths": n_paths,
                "seed": seed,
                "x0": x0,
                "w0": w0,
                "trade_log": trade_log,
            })
        }
    };

    let manifest = out.join("manifest.json");
    outputs.push(manifest.clone());
    let m = RunManifest {
        command: name.to_string(),
        params: p,
        grid: spec,
        outputs: outputs.clone(),
        duration_seconds: start.elapsed().as_secs_f64(),
        residuals,
        options,
    };
    output::write_manifest(&manifest, &m)?;
    Ok(outputs)
}

/// Solves once per value and reads boundaries and values off at time `t`.
///
/// On the epsilon axis both costs take the swept value; on the lambda axis
/// the configured costs are kept. The value loss is measured against a
/// cost-free solve with the same intensity, at the frictionless root.
/// Returns the rows and the final Picard residual of every solve.
pub fn sweep(params: &ModelParams, spec: &GridSpec, axis: Axis, values: &[f64], t: f64) -> Result<(Vec<SweepRow>, Vec<f64>)> {
    if values.is_empty() {
        return Err(Error::InvalidParams("sweep needs at least one value".into()));
    }
    if values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidParams("sweep values must be positive".into()));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams("sweep values must be increasing".into()));
    }
    if !(0.0..params.horizon).contains(&t) {
        return Err(Error::InvalidParams(format!("sweep time must lie in [0, {})", params.horizon)));
    }
    let mut residuals = Vec::new();
    let baseline = |p: &ModelParams, residuals: &mut Vec<f64>| -> Result<(f64, f64)> {
        let free = p.with_cost(0.0);
        let y0 = Oracle::new(&free, spec.n_quad)?.y0(t)?;
        let rep = solve(&free, spec)?;
        residuals.push(rep.final_residual);
        Ok((y0, rep.surface.value_at(t, y0)))
    };
    let mut cached = match axis {
        Axis::Epsilon => Some(baseline(params, &mut residuals)?),
        Axis::Lambda => None,
    };
    let mut rows = Vec::with_capacity(values.len());
    for &v in values {
        let p = match axis {
            Axis::Epsilon => params.with_cost(v),
            Axis::Lambda => params.with_lambda(v),
        };
        let (y0, v0) = match cached {
            Some(b) => b,
            None => baseline(&p, &mut residuals)?,
        };
        let rep = solve(&p, spec)?;
        residuals.push(rep.final_residual);
        let b = rep.boundaries.at_time(t);
        let value = rep.surface.value_at(t, y0);
        rows.push(SweepRow {
            value: v,
            y_lo: b.y_lo,
            y_hi: b.y_hi,
            v_at_y0: value,
            width: b.y_hi - b.y_lo,
            value_loss: v0 - value,
        });
        if axis == Axis::Lambda {
            cached = None;
        }
    }
    Ok((rows, residuals))
}
