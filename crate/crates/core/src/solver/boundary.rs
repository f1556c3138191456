use serde::Serialize;

use super::surface::{bracket, chord_defect, Slice};
use crate::error::{Error, Result};
use crate::model::{logistic, ModelParams};

/// Largest chord defect tolerated in a value slice before extraction fails.
pub const CONCAVITY_TOL: f64 = 1e-8;

const ROOT_TOL: f64 = 1e-10;

/// No-trade interval of a single time slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SliceBoundary {
    pub y_lo: f64,
    pub y_hi: f64,
    /// The lower boundary sits at 0 or 1 rather than at an interior root.
    pub lo_clamped: bool,
    pub hi_clamped: bool,
}

impl SliceBoundary {
    /// Post-trade fraction chosen at `x`.
    #[inline]
    pub fn target(&self, x: f64) -> f64 {
        if x < self.y_lo {
            self.y_lo
        } else if x > self.y_hi {
            self.y_hi
        } else {
            x
        }
    }

    /// Boundaries at `t = T`, where the value is zero and any trade only
    /// costs: the whole interval is a no-trade region unless a side is free.
    pub fn terminal(params: &ModelParams) -> Self {
        let y = params.merton_fraction().clamp(0.0, 1.0);
        let (y_lo, lo_clamped) = if params.cost_buy > 0.0 { (0.0, true) } else { (y, y == 0.0 || y == 1.0) };
        let (y_hi, hi_clamped) = if params.cost_sell > 0.0 { (1.0, true) } else { (y, y == 0.0 || y == 1.0) };
        SliceBoundary { y_lo, y_hi, lo_clamped, hi_clamped }
    }
}

/// No-trade boundaries over the time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoTradeBoundaries {
    pub times: Vec<f64>,
    pub y_lo: Vec<f64>,
    pub y_hi: Vec<f64>,
    pub lo_clamped: Vec<bool>,
    pub hi_clamped: Vec<bool>,
}

impl NoTradeBoundaries {
    pub(crate) fn from_slices(times: Vec<f64>, slices: &[SliceBoundary]) -> Self {
        NoTradeBoundaries {
            times,
            y_lo: slices.iter().map(|b| b.y_lo).collect(),
            y_hi: slices.iter().map(|b| b.y_hi).collect(),
            lo_clamped: slices.iter().map(|b| b.lo_clamped).collect(),
            hi_clamped: slices.iter().map(|b| b.hi_clamped).collect(),
        }
    }

    pub fn at(&self, i: usize) -> SliceBoundary {
        SliceBoundary {
            y_lo: self.y_lo[i],
            y_hi: self.y_hi[i],
            lo_clamped: self.lo_clamped[i],
            hi_clamped: self.hi_clamped[i],
        }
    }

    /// Boundaries at an arbitrary time: linear in `t` between slices, with a
    /// clamped side held at its value from the earlier slice.
    pub fn at_time(&self, t: f64) -> SliceBoundary {
        let (i, w) = bracket(&self.times, t);
        let b = self.at(i);
        if w == 0.0 {
            return b;
        }
        let next = self.at(i + 1);
        let lerp = |a: f64, c: f64| (1.0 - w) * a + w * c;
        let y_lo = if b.lo_clamped { b.y_lo } else { lerp(b.y_lo, next.y_lo) };
        let y_hi = if b.hi_clamped { b.y_hi } else { lerp(b.y_hi, next.y_hi) };
        SliceBoundary {
            y_lo,
            y_hi: y_hi.max(y_lo),
            ..b
        }
    }

    /// Earliest grid time from which the lower boundary stays clamped at 0
    /// through every later slice before `T`, if any slice before `T` is.
    pub fn lo_clamp_onset(&self) -> Option<f64> {
        let last = self.times.len().checked_sub(2)?;
        let mut onset = None;
        for i in (0..=last).rev() {
            if self.lo_clamped[i] && self.y_lo[i] == 0.0 {
                onset = Some(self.times[i]);
            } else {
                break;
            }
        }
        onset
    }
}

/// Maximized payoff of an immediate trade from `x` given the slice and its
/// no-trade interval.
pub fn sup_term(slice: &Slice<'_>, b: &SliceBoundary, x: f64, params: &ModelParams) -> f64 {
    if x < b.y_lo {
        slice.value(b.y_lo) - (params.cost_buy * b.y_lo).ln_1p() + (params.cost_buy * x).ln_1p()
    } else if x > b.y_hi {
        slice.value(b.y_hi) - (-params.cost_sell * b.y_hi).ln_1p() + (-params.cost_sell * x).ln_1p()
    } else {
        slice.value(x)
    }
}

/// No-trade interval of one slice.
///
/// The lower boundary is the first root of `v_x(y)(1 + beta y) - beta` and
/// the upper one the first root of `v_x(y)(1 - eps y) + eps`, with `v_x`
/// linear in `x` between nodes. A side is clamped to 0 when its function is
/// already nonpositive at the first node and to 1 when it never changes sign.
/// Without costs both sides are the maximizer of the slice.
pub fn extract_boundaries(slice: &Slice<'_>, params: &ModelParams) -> Result<SliceBoundary> {
    let x: Vec<f64> = slice.z.iter().map(|&z| logistic(z)).collect();
    let (defect, at) = chord_defect(&x, slice.u);
    if defect > CONCAVITY_TOL {
        return Err(Error::NonConcave { defect, x: at, tol: CONCAVITY_TOL });
    }
    if params.is_frictionless() {
        let (y, clamped) = argmax(slice);
        return Ok(SliceBoundary { y_lo: y, y_hi: y, lo_clamped: clamped, hi_clamped: clamped });
    }
    let vx = slice.v_x();
    let (beta, eps) = (params.cost_buy, params.cost_sell);
    let (y_lo, lo_clamped) = first_root(&x, &vx, |y, d| d * (1.0 + beta * y) - beta);
    let (y_hi, hi_clamped) = first_root(&x, &vx, |y, d| d * (1.0 - eps * y) + eps);
    Ok(SliceBoundary {
        y_lo,
        y_hi: y_hi.max(y_lo),
        lo_clamped,
        hi_clamped,
    })
}

fn first_root(x: &[f64], vx: &[f64], g: impl Fn(f64, f64) -> f64) -> (f64, bool) {
    let Some(j) = (0..x.len()).find(|&j| g(x[j], vx[j]) <= 0.0) else {
        return (1.0, true);
    };
    if j == 0 {
        return (0.0, true);
    }
    let (mut a, mut b) = (x[j - 1], x[j]);
    let slope = (vx[j] - vx[j - 1]) / (b - a);
    let (xa, da) = (a, vx[j - 1]);
    let h = |y: f64| g(y, da + slope * (y - xa));
    while b - a > ROOT_TOL {
        let m = 0.5 * (a + b);
        if h(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    (0.5 * (a + b), false)
}

/// Maximizer of the slice over `[0, 1]` by golden-section search around the
/// best node.
fn argmax(slice: &Slice<'_>) -> (f64, bool) {
    let n = slice.u.len();
    let j = (0..n).fold(0, |best, j| if slice.u[j] > slice.u[best] { j } else { best });
    let best = slice.u[j];
    if slice.v0 >= best && slice.v0 >= slice.v1 {
        return (0.0, true);
    }
    if slice.v1 > best {
        return (1.0, true);
    }
    let (mut a, mut b) = (slice.z[j.saturating_sub(1)], slice.z[(j + 1).min(n - 1)]);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (slice.value_z(c), slice.value_z(d));
    while b - a > ROOT_TOL {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = slice.value_z(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = slice.value_z(d);
        }
    }
    (logistic(0.5 * (a + b)), false)
}
