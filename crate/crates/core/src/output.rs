//! CSV and JSON writers. Every real is written with 17 significant digits so
//! files round-trip to the same doubles.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::frictionless::AsymptoticReport;
use crate::model::{GridSpec, ModelParams};
use crate::sim::{SimResult, TradeRecord};
use crate::solver::{NoTradeBoundaries, ValueSurface};

/// `x` in scientific notation with 17 significant digits.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Columns `t, x, v`, including the `x = 0` and `x = 1` curves.
pub fn write_surface(path: &Path, s: &ValueSurface) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "x", "v"])?;
    let x = s.x_nodes();
    for (i, &t) in s.times.iter().enumerate() {
        let t = real(t);
        w.write_record([&t, &real(0.0), &real(s.v_at_zero[i])])?;
        for (x, v) in x.iter().zip(&s.u_values[i]) {
            w.write_record([&t, &real(*x), &real(*v)])?;
        }
        w.write_record([&t, &real(1.0), &real(s.v_at_one[i])])?;
    }
    finish(w, path)
}

/// Columns `t, y_lo, y_hi, lo_clamped, hi_clamped`.
pub fn write_boundaries(path: &Path, b: &NoTradeBoundaries) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "y_lo", "y_hi", "lo_clamped", "hi_clamped"])?;
    for i in 0..b.times.len() {
        w.write_record([
            real(b.times[i]),
            real(b.y_lo[i]),
            real(b.y_hi[i]),
            b.lo_clamped[i].to_string(),
            b.hi_clamped[i].to_string(),
        ])?;
    }
    finish(w, path)
}

/// Columns `t, y0, vxx0, F, G, slope_lo, slope_hi, value_slope`.
pub fn write_asymptotics(path: &Path, r: &AsymptoticReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["t", "y0", "vxx0", "F", "G", "slope_lo", "slope_hi", "value_slope"])?;
    for i in 0..r.times.len() {
        let row = [
            r.times[i],
            r.y0[i],
            r.vxx0[i],
            r.f_at_y0[i],
            r.g[i],
            r.slope_lo[i],
            r.slope_hi[i],
            r.value_slope[i],
        ];
        w.write_record(row.map(real))?;
    }
    finish(w, path)
}

/// One solve of a parameter sweep, read off at a fixed time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    /// Value at the frictionless root `y0(t)`.
    pub v_at_y0: f64,
    pub width: f64,
    /// Frictionless value minus this value, both at `y0(t)`.
    pub value_loss: f64,
}

/// Columns `<axis>, y_lo, y_hi, v_at_y0, width, value_loss`.
pub fn write_sweep(path: &Path, axis: &str, rows: &[SweepRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([axis, "y_lo", "y_hi", "v_at_y0", "width", "value_loss"])?;
    for r in rows {
        w.write_record([r.value, r.y_lo, r.y_hi, r.v_at_y0, r.width, r.value_loss].map(real))?;
    }
    finish(w, path)
}

/// Summary of one simulation run.
pub fn write_sim_result(path: &Path, policy: &str, seed: u64, x0: f64, w0: f64, r: &SimResult, solver_value: Option<f64>) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "policy",
        "n_paths",
        "seed",
        "x0",
        "w0",
        "mean_log_wealth",
        "std_error",
        "mean_trade_count",
        "solver_value",
    ])?;
    w.write_record([
        policy.to_string(),
        r.n_paths.to_string(),
        seed.to_string(),
        real(x0),
        real(w0),
        real(r.mean_log_wealth),
        real(r.std_error),
        real(r.mean_trade_count),
        solver_value.map(real).unwrap_or_default(),
    ])?;
    finish(w, path)
}

/// Columns `path, time, x_pre, x_post, cost`.
pub fn write_trades(path: &Path, log: &[Vec<TradeRecord>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["path", "time", "x_pre", "x_post", "cost"])?;
    for (k, trades) in log.iter().enumerate() {
        for t in trades {
            w.write_record([k.to_string(), real(t.time), real(t.x_pre), real(t.x_post), real(t.cost)])?;
        }
    }
    finish(w, path)
}

/// Provenance written next to every set of outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub params: ModelParams,
    pub grid: GridSpec,
    pub outputs: Vec<PathBuf>,
    pub duration_seconds: f64,
    /// Final Picard residual of every solve in the run.
    pub residuals: Vec<f64>,
    /// Command-specific settings.
    pub options: serde_json::Value,
}

pub fn write_manifest(path: &Path, m: &RunManifest) -> Result<()> {
    let io = |source| Error::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io)?;
    serde_json::to_writer_pretty(BufWriter::new(file), m).map_err(|e| io(e.into()))
}
