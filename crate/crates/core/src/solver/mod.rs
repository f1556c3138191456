//! Backward Picard solver for the nonlocal HJB equation.

mod boundary;
mod phi;
mod surface;

pub use boundary::{extract_boundaries, sup_term, NoTradeBoundaries, SliceBoundary, CONCAVITY_TOL};
pub use phi::SliceValues;
pub use surface::{chord_defect, Slice, ValueSurface};

pub(crate) use phi::time_weights;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fraction::QuadratureRule;
use crate::model::{make_grid, Grid, GridSpec, ModelParams};
use phi::{Context, KernelSlice, OffsetTable, SliceOperator};

/// Output of a solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub surface: ValueSurface,
    pub boundaries: NoTradeBoundaries,
    /// Picard sweeps per time slice; zero for the terminal slice.
    pub picard_iterations: Vec<usize>,
    /// Largest last-sweep update over all slices.
    pub final_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    /// Evaluate the states of a sweep on the rayon pool. Results are
    /// bitwise identical either way.
    pub parallel: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { parallel: true }
    }
}

pub fn solve(params: &ModelParams, spec: &GridSpec) -> Result<SolveReport> {
    solve_with(params, spec, &SolveOptions::default())
}

/// Marches backward from `t = T`, iterating each slice to its fixed point.
pub fn solve_with(params: &ModelParams, spec: &GridSpec, options: &SolveOptions) -> Result<SolveReport> {
    let params = params.validate()?;
    let spec = spec.validate()?;
    let grid = make_grid(&spec, &params);
    let rule = QuadratureRule::gauss_hermite(spec.n_quad)?;
    let offsets = OffsetTable::new(&params, &grid, &rule);
    let exp_z: Vec<f64> = grid.z.iter().map(|z| z.exp()).collect();
    let x = grid.x();
    let ctx = Context { params: &params, grid: &grid, offsets: &offsets, exp_z: &exp_z, parallel: options.parallel };

    let nt = grid.times.len();
    let ns = grid.z.len();
    let terminal = SliceBoundary::terminal(&params);
    let mut bounds = vec![terminal; nt];
    let mut iterations = vec![0; nt];
    let mut residual: f64 = 0.0;
    // kernels[l] is slice nt - 1 - l, so the slices after i form a prefix
    // once reversed.
    let mut kernels = vec![KernelSlice::new(SliceValues::zeros(ns), &terminal, &grid.z, &params)];

    for i in (0..nt - 1).rev() {
        let later: Vec<&KernelSlice> = kernels.iter().rev().collect();
        let op = SliceOperator::new(&ctx, i, &later);
        let mut candidate = later[0].values().clone();
        let mut converged = None;
        for it in 1..=spec.picard_max_iter {
            let (next, _) = op.apply(&ctx, &x, &candidate)?;
            let r = next.distance(&candidate);
            candidate = next;
            if r <= spec.picard_tol {
                converged = Some((it, r));
                break;
            }
            if it == spec.picard_max_iter {
                iterations[i] = it;
                kernels.push(KernelSlice::new(candidate, &terminal, &grid.z, &params));
                let partial = partial_report(&grid, &kernels, &bounds, &iterations, r);
                return Err(Error::NotConverged {
                    time: grid.times[i],
                    residual: r,
                    iterations: it,
                    partial: Box::new(partial),
                });
            }
        }
        let (it, r) = converged.expect("loop exits through convergence or error");
        iterations[i] = it;
        residual = residual.max(r);
        bounds[i] = extract_boundaries(&candidate.view(&grid.z), &params)?;
        kernels.push(KernelSlice::new(candidate, &bounds[i], &grid.z, &params));
    }

    Ok(assemble(&grid, &kernels, &bounds, &iterations, residual))
}

fn assemble(
    grid: &Grid,
    kernels: &[KernelSlice],
    bounds: &[SliceBoundary],
    iterations: &[usize],
    residual: f64,
) -> SolveReport {
    let slices: Vec<&SliceValues> = kernels.iter().rev().map(|k| k.values()).collect();
    SolveReport {
        surface: ValueSurface {
            times: grid.times.clone(),
            z_nodes: grid.z.clone(),
            u_values: slices.iter().map(|s| s.u.clone()).collect(),
            v_at_zero: slices.iter().map(|s| s.v0).collect(),
            v_at_one: slices.iter().map(|s| s.v1).collect(),
        },
        boundaries: NoTradeBoundaries::from_slices(grid.times.clone(), bounds),
        picard_iterations: iterations.to_vec(),
        final_residual: residual,
    }
}

/// Report for a failed solve: slices that were never reached hold NaN.
fn partial_report(
    grid: &Grid,
    kernels: &[KernelSlice],
    bounds: &[SliceBoundary],
    iterations: &[usize],
    residual: f64,
) -> SolveReport {
    let nt = grid.times.len();
    let mut filled: Vec<KernelSlice> = kernels.to_vec();
    let blank = SliceValues { u: vec![f64::NAN; grid.z.len()], v0: f64::NAN, v1: f64::NAN };
    let mut bounds = bounds.to_vec();
    while filled.len() < nt {
        let i = nt - 1 - filled.len();
        bounds[i] = SliceBoundary { y_lo: f64::NAN, y_hi: f64::NAN, lo_clamped: false, hi_clamped: false };
        filled.push(KernelSlice::blank(blank.clone()));
    }
    assemble(grid, &filled, &bounds, iterations, residual)
}

/// One application of the fixed-point map for slice `t_index`.
///
/// `later` holds the converged slices `t_index + 1 ..= n_time - 1` with their
/// boundaries, in time order; `candidate` is the current guess for the slice
/// itself. At the terminal index the map returns zeros.
pub fn apply_phi_slice(
    candidate: &SliceValues,
    later: &[(SliceValues, SliceBoundary)],
    t_index: usize,
    params: &ModelParams,
    grid: &Grid,
    rule: &QuadratureRule,
) -> Result<SliceValues> {
    let nt = grid.times.len();
    if t_index + 1 >= nt {
        return Ok(SliceValues::zeros(grid.z.len()));
    }
    if later.len() != nt - 1 - t_index {
        return Err(Error::InvalidParams(format!(
            "slice {t_index} needs {} later slices, got {}",
            nt - 1 - t_index,
            later.len()
        )));
    }
    let offsets = OffsetTable::new(params, grid, rule);
    let exp_z: Vec<f64> = grid.z.iter().map(|z| z.exp()).collect();
    let ctx = Context { params, grid, offsets: &offsets, exp_z: &exp_z, parallel: false };
    let kernels: Vec<KernelSlice> = later
        .iter()
        .map(|(v, b)| KernelSlice::new(v.clone(), b, &grid.z, params))
        .collect();
    let refs: Vec<&KernelSlice> = kernels.iter().collect();
    let op = SliceOperator::new(&ctx, t_index, &refs);
    Ok(op.apply(&ctx, &grid.x(), candidate)?.0)
}

/// Post-trade fraction chosen at `(t, x)`.
pub fn policy_target(t: f64, x: f64, boundaries: &NoTradeBoundaries) -> f64 {
    boundaries.at_time(t).target(x)
}

/// Stock bought (positive) or sold (negative), in wealth units, when the
/// fraction `x` of wealth `w` is moved to its target at time `t`.
pub fn trade_amount(t: f64, wealth: f64, x: f64, boundaries: &NoTradeBoundaries, params: &ModelParams) -> f64 {
    trade_to(wealth, x, policy_target(t, x, boundaries), params)
}

/// Trade taking the fraction `x` of wealth `w` to `y` after costs.
#[inline]
pub(crate) fn trade_to(wealth: f64, x: f64, y: f64, params: &ModelParams) -> f64 {
    if y > x {
        wealth * (y - x) / (1.0 + params.cost_buy * y)
    } else if y < x {
        wealth * (y - x) / (1.0 - params.cost_sell * y)
    } else {
        0.0
    }
}
