//! The per-slice fixed-point map.
//!
//! For slice `i` the value satisfies
//!
//! ```text
//! u_i(z) = sum_{k >= i} W_ik E[K_k(z + c)],   K_k(z) = f(h(z)) + lambda L_k(h(z)),
//! ```
//!
//! where `W_ik` are composite Simpson weights on `[t_i, T]` times the
//! survival factor `exp(-lambda (t_k - t_i))`, `c` is the Gaussian log-odds
//! increment over `t_k - t_i` and `L_k` is the sup term of slice `k`. Only the
//! `k = i` term depends on the unknown slice, and its increment is zero, so
//! the later terms are summed once and the iteration only refreshes the
//! pointwise part.

use rayon::prelude::*;

use super::boundary::{extract_boundaries, sup_term, SliceBoundary};
use super::surface::{cubic_weights, Slice};
use crate::error::Result;
use crate::fraction::QuadratureRule;
use crate::model::{logit, Grid, ModelParams};

/// Composite Newton-Cotes weights for `m` uniform intervals of width `h`:
/// Simpson, with the 3/8 rule on the last three intervals when `m` is odd
/// and the trapezoid rule for a single interval.
pub(crate) fn time_weights(m: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; m + 1];
    match m {
        0 => {}
        1 => {
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
        }
        _ => {
            let simpson = if m.is_multiple_of(2) { m } else { m - 3 };
            for p in (0..simpson).step_by(2) {
                w[p] += h / 3.0;
                w[p + 1] += 4.0 * h / 3.0;
                w[p + 2] += h / 3.0;
            }
            if m % 2 == 1 {
                for (o, c) in [1.0, 3.0, 3.0, 1.0].into_iter().enumerate() {
                    w[simpson + o] += 3.0 * h / 8.0 * c;
                }
            }
        }
    }
    w
}

/// Values of one slice: interior nodes and the two endpoint curves.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceValues {
    pub u: Vec<f64>,
    pub v0: f64,
    pub v1: f64,
}

impl SliceValues {
    pub fn zeros(n: usize) -> Self {
        SliceValues { u: vec![0.0; n], v0: 0.0, v1: 0.0 }
    }

    pub fn view<'a>(&'a self, z: &'a [f64]) -> Slice<'a> {
        Slice { z, u: &self.u, v0: self.v0, v1: self.v1 }
    }

    /// Sup-norm distance, endpoint curves included.
    pub fn distance(&self, other: &SliceValues) -> f64 {
        self.u
            .iter()
            .zip(&other.u)
            .map(|(a, b)| (a - b).abs())
            .fold((self.v0 - other.v0).abs().max((self.v1 - other.v1).abs()), f64::max)
    }
}

/// Normal increment of the log-odds for one lag and one quadrature node,
/// split into a whole number of grid cells and a remainder.
#[derive(Debug, Clone, Copy)]
struct Offset {
    weight: f64,
    c: f64,
    exp_c: f64,
    cells: isize,
    stencil: [f64; 4],
}

/// Offsets for every lag on a uniform grid.
pub(crate) struct OffsetTable {
    per_lag: usize,
    offsets: Vec<Offset>,
}

impl OffsetTable {
    pub(crate) fn new(params: &ModelParams, grid: &Grid, rule: &QuadratureRule) -> Self {
        let drift = params.log_odds_drift();
        let dz = grid.dz();
        let nodes: Vec<(f64, f64)> = rule.significant().collect();
        let mut offsets = Vec::with_capacity(grid.times.len() * nodes.len());
        for lag in 0..grid.times.len() {
            let tau = grid.times[lag] - grid.times[0];
            for &(g, weight) in &nodes {
                let c = drift * tau + params.sigma * tau.sqrt() * g;
                let s = c / dz;
                let cells = s.floor();
                offsets.push(Offset {
                    weight,
                    c,
                    exp_c: c.exp(),
                    cells: cells as isize,
                    stencil: cubic_weights(s - cells),
                });
            }
        }
        OffsetTable { per_lag: nodes.len(), offsets }
    }

    fn lag(&self, lag: usize) -> &[Offset] {
        &self.offsets[lag * self.per_lag..(lag + 1) * self.per_lag]
    }
}

/// A converged slice reduced to what the kernel needs.
#[derive(Debug, Clone)]
pub(crate) struct KernelSlice {
    values: SliceValues,
    z_lo: f64,
    z_hi: f64,
    /// `v(y_lo) - ln(1 + beta y_lo)` and `v(y_hi) - ln(1 - eps y_hi)`.
    base_lo: f64,
    base_hi: f64,
    /// Sup term at `x = 0` and `x = 1`.
    l_zero: f64,
    l_one: f64,
}

impl KernelSlice {
    pub(crate) fn new(values: SliceValues, b: &SliceBoundary, z: &[f64], params: &ModelParams) -> Self {
        let s = values.view(z);
        let base_lo = s.value(b.y_lo) - (params.cost_buy * b.y_lo).ln_1p();
        let base_hi = s.value(b.y_hi) - (-params.cost_sell * b.y_hi).ln_1p();
        let l_zero = sup_term(&s, b, 0.0, params);
        let l_one = sup_term(&s, b, 1.0, params);
        KernelSlice {
            values,
            z_lo: logit(b.y_lo),
            z_hi: logit(b.y_hi),
            base_lo,
            base_hi,
            l_zero,
            l_one,
        }
    }

    /// Placeholder for a slice that was never computed.
    pub(crate) fn blank(values: SliceValues) -> Self {
        KernelSlice {
            values,
            z_lo: f64::NAN,
            z_hi: f64::NAN,
            base_lo: f64::NAN,
            base_hi: f64::NAN,
            l_zero: f64::NAN,
            l_one: f64::NAN,
        }
    }

    pub(crate) fn values(&self) -> &SliceValues {
        &self.values
    }
}

/// Everything the fixed-point map of one slice needs from later slices.
pub(crate) struct SliceOperator {
    later: Vec<f64>,
    later_zero: f64,
    later_one: f64,
    /// Weight of the `s = t_i` node.
    w0: f64,
}

pub(crate) struct Context<'a> {
    pub params: &'a ModelParams,
    pub grid: &'a Grid,
    pub offsets: &'a OffsetTable,
    pub exp_z: &'a [f64],
    pub parallel: bool,
}

impl SliceOperator {
    /// Sums the contributions of slices `i + 1 ..` (`later[l - 1]` is slice
    /// `i + l`).
    pub(crate) fn new(ctx: &Context<'_>, i: usize, later: &[&KernelSlice]) -> Self {
        let p = ctx.params;
        let nt = ctx.grid.times.len();
        let m = nt - 1 - i;
        let tw = time_weights(m, ctx.grid.dt());
        let w: Vec<f64> = (0..=m)
            .map(|l| tw[l] * (-p.lambda * (ctx.grid.times[l] - ctx.grid.times[0])).exp())
            .collect();
        let n = ctx.grid.z.len();
        let node = |j: usize| -> f64 {
            let mut acc = 0.0;
            for (l, slice) in later.iter().enumerate().take(m) {
                let lag = l + 1;
                acc += w[lag] * expect_kernel(ctx, slice, j, ctx.offsets.lag(lag));
            }
            acc
        };
        let values: Vec<f64> = if ctx.parallel {
            (0..n).into_par_iter().with_min_len(8).map(node).collect()
        } else {
            (0..n).map(node).collect()
        };
        let (mut zero, mut one) = (0.0, 0.0);
        let stock_only = p.mu - 0.5 * p.sigma * p.sigma;
        for (l, slice) in later.iter().enumerate().take(m) {
            zero += w[l + 1] * (p.r + p.lambda * slice.l_zero);
            one += w[l + 1] * (stock_only + p.lambda * slice.l_one);
        }
        SliceOperator { later: values, later_zero: zero, later_one: one, w0: w[0] }
    }

    /// One application of the map to a candidate slice; also returns the
    /// boundaries of the candidate used in its sup term.
    pub(crate) fn apply(
        &self,
        ctx: &Context<'_>,
        x: &[f64],
        candidate: &SliceValues,
    ) -> Result<(SliceValues, SliceBoundary)> {
        let p = ctx.params;
        let s = candidate.view(&ctx.grid.z);
        let b = extract_boundaries(&s, p)?;
        let u = x
            .iter()
            .zip(&self.later)
            .map(|(&x, &a)| a + self.w0 * (p.running_reward(x) + p.lambda * sup_term(&s, &b, x, p)))
            .collect();
        let v0 = self.later_zero + self.w0 * (p.r + p.lambda * sup_term(&s, &b, 0.0, p));
        let v1 = self.later_one
            + self.w0 * (p.mu - 0.5 * p.sigma * p.sigma + p.lambda * sup_term(&s, &b, 1.0, p));
        Ok((SliceValues { u, v0, v1 }, b))
    }
}

/// `E[K(z_j + c)]` for one later slice and one lag.
#[inline]
fn expect_kernel(ctx: &Context<'_>, k: &KernelSlice, j: usize, offsets: &[Offset]) -> f64 {
    let p = ctx.params;
    let z = &ctx.grid.z;
    let zj = z[j];
    let ez = ctx.exp_z[j];
    let (beta, eps, lambda) = (p.cost_buy, p.cost_sell, p.lambda);
    let u = &k.values.u;
    let last = u.len() as isize - 1;
    let mut acc = 0.0;
    for o in offsets {
        let q = ez * o.exp_c;
        let x = q / (1.0 + q);
        let mut val = p.running_reward(x);
        if lambda != 0.0 {
            let zp = zj + o.c;
            let l = if zp < k.z_lo {
                k.base_lo + (beta * x).ln_1p()
            } else if zp > k.z_hi {
                k.base_hi + (-eps * x).ln_1p()
            } else {
                let c = j as isize + o.cells;
                if c >= 1 && c + 2 <= last {
                    let c = c as usize;
                    let w = &o.stencil;
                    w[0] * u[c - 1] + w[1] * u[c] + w[2] * u[c + 1] + w[3] * u[c + 2]
                } else {
                    k.values.view(z).value_z(zp)
                }
            };
            val += lambda * l;
        }
        acc += o.weight * val;
    }
    acc
}
