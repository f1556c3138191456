//! Frictionless reference quantities and first-order cost corrections,
//! computed by quadrature against the law of the uncontrolled fraction.
//!
//! Nothing here reads a solved value surface, so these numbers serve as an
//! independent check on the solver.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fraction::{integrate_panels, FractionLaw, QuadratureRule};
use crate::model::{make_grid, GridSpec, ModelParams};
use crate::solver::time_weights;

/// Survival factors below `exp(-60)` are dropped from the time integrals.
const SURVIVAL_CUTOFF: f64 = 60.0;
const ROOT_TOL: f64 = 1e-10;

/// Frictionless root `y0(t)` tabulated on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Y0Curve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Y0Curve {
    /// Linear interpolation, constant beyond the table.
    pub fn at(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let k = self.times.partition_point(|&s| s <= t) - 1;
        let w = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
        (1.0 - w) * self.values[k] + w * self.values[k + 1]
    }
}

/// First-order small-cost expansion along the time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticReport {
    pub times: Vec<f64>,
    pub y0: Vec<f64>,
    pub vxx0: Vec<f64>,
    pub f_at_y0: Vec<f64>,
    pub g: Vec<f64>,
    /// `-(F - 1) / v0_xx`, the rate at which the lower boundary moves with cost.
    pub slope_lo: Vec<f64>,
    /// `-(F + 1) / v0_xx`.
    pub slope_hi: Vec<f64>,
    /// `G(t) + lambda int_t^T G`, the rate of value loss at `y0(t)`.
    pub value_slope: Vec<f64>,
}

impl AsymptoticReport {
    pub fn y0_curve(&self) -> Y0Curve {
        Y0Curve { times: self.times.clone(), values: self.y0.clone() }
    }

    /// Index of the grid time nearest to `t`.
    pub fn index_of(&self, t: f64) -> usize {
        let k = self.times.partition_point(|&s| s < t);
        if k == 0 {
            0
        } else if k == self.times.len() || t - self.times[k - 1] <= self.times[k] - t {
            k - 1
        } else {
            k
        }
    }
}

/// Quadrature engine for the frictionless problem of one market.
#[derive(Debug, Clone)]
pub struct Oracle {
    params: ModelParams,
    law: FractionLaw,
    rule: QuadratureRule,
}

impl Oracle {
    pub fn new(params: &ModelParams, n_quad: usize) -> Result<Self> {
        let params = params.validate()?;
        Ok(Oracle {
            params,
            law: FractionLaw::new(&params),
            rule: QuadratureRule::gauss_hermite(n_quad)?,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// `int_t^T exp(-lambda (s - t)) h(s) ds`, integrated in `w = sqrt(s - t)`
    /// so that integrands behaving like `sqrt(s - t)` become smooth.
    fn discounted(&self, t: f64, mut h: impl FnMut(f64) -> f64) -> f64 {
        let lambda = self.params.lambda;
        let mut end = self.params.horizon - t;
        if lambda > 0.0 {
            end = end.min(SURVIVAL_CUTOFF / lambda);
        }
        if !(end > 0.0) {
            return 0.0;
        }
        let width = 0.5 / lambda.max(1.0).sqrt();
        integrate_panels(0.0, end.sqrt(), width, |w| {
            let tau = w * w;
            2.0 * w * (-lambda * tau).exp() * h(t + tau)
        })
    }

    fn check_interior(x: f64, what: &str) -> Result<()> {
        if x > 0.0 && x < 1.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!("{what} needs 0 < x < 1, got {x}")))
        }
    }

    /// `v0_x(t, x)`.
    pub fn vx0(&self, t: f64, x: f64) -> Result<f64> {
        Self::check_interior(x, "vx0")?;
        let p = &self.params;
        let (excess, var) = (p.mu - p.r, p.sigma * p.sigma);
        let scale = 1.0 / (x * (1.0 - x));
        Ok(self.discounted(t, |s| {
            self.law
                .expect(t, x, s, &self.rule, |y| y * (1.0 - y) * (excess - var * y))
        }) * scale)
    }

    /// `v0_xx(t, x)`, strictly negative for `t < T`.
    pub fn vxx0(&self, t: f64, x: f64) -> Result<f64> {
        Self::check_interior(x, "vxx0")?;
        let p = &self.params;
        let scale = 1.0 / (x * (1.0 - x));
        let spread = |s: f64| {
            self.law.expect(t, x, s, &self.rule, |y| {
                let d = (y - x) * scale;
                d * d
            })
        };
        let tail = (-p.lambda * (p.horizon - t)).exp() * spread(p.horizon);
        Ok(-tail - p.lambda * self.discounted(t, spread))
    }

    /// Root of `v0_x(t, .)` by bisection; the Merton fraction at `t >= T`.
    pub fn y0(&self, t: f64) -> Result<f64> {
        let y_inf = self.params.merton_fraction();
        if !(y_inf > 0.0 && y_inf < 1.0) {
            return Err(Error::Bracket { time: t });
        }
        if t >= self.params.horizon {
            return Ok(y_inf);
        }
        let (mut a, mut b) = (1e-9, 1.0 - 1e-9);
        if !(self.vx0(t, a)? > 0.0 && self.vx0(t, b)? < 0.0) {
            return Err(Error::Bracket { time: t });
        }
        while b - a > ROOT_TOL {
            let m = 0.5 * (a + b);
            if self.vx0(t, m)? > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(0.5 * (a + b))
    }

    /// `y0` on the given times, evaluated in parallel.
    pub fn y0_curve(&self, times: &[f64]) -> Result<Y0Curve> {
        let values = times.par_iter().map(|&t| self.y0(t)).collect::<Result<Vec<_>>>()?;
        Ok(Y0Curve { times: times.to_vec(), values })
    }

    /// `F(t, x) = lambda int exp(-lambda (s - t)) E[dY/dx sgn(y0(s) - Y_s)] ds`.
    pub fn f_coeff(&self, t: f64, x: f64, y0: &Y0Curve) -> Result<f64> {
        Self::check_interior(x, "F")?;
        if self.params.lambda == 0.0 {
            return Ok(0.0);
        }
        let scale = 1.0 / (x * (1.0 - x));
        let integral = self.discounted(t, |s| {
            let (below, above) = self.law.expect_split(t, x, s, y0.at(s), |y| y * (1.0 - y) * scale);
            below - above
        });
        Ok(self.params.lambda * integral)
    }

    /// `G(t) = lambda int exp(-lambda (s - t)) E|Y_s - y0(s)| ds`, started
    /// from `y0(t)`.
    pub fn g_coeff(&self, t: f64, y0: &Y0Curve) -> f64 {
        if self.params.lambda == 0.0 {
            return 0.0;
        }
        let x = y0.at(t);
        let integral = self.discounted(t, |s| {
            let thr = y0.at(s);
            let (below, above) = self.law.expect_split(t, x, s, thr, |y| (y - thr).abs());
            below + above
        });
        self.params.lambda * integral
    }

    /// First-order value slope at an arbitrary state:
    /// `value_slope(t) - int_{y0(t)}^x F(t, eta) d eta`.
    pub fn value_slope_at_x(&self, report: &AsymptoticReport, t: f64, x: f64) -> Result<f64> {
        Self::check_interior(x, "value slope")?;
        let curve = report.y0_curve();
        let base = Y0Curve { times: report.times.clone(), values: report.value_slope.clone() }.at(t);
        let y0 = curve.at(t);
        let (a, b, sign) = if x >= y0 { (y0, x, 1.0) } else { (x, y0, -1.0) };
        let mut failure = None;
        let integral = integrate_panels(a, b, 0.05, |eta| match self.f_coeff(t, eta, &curve) {
            Ok(f) => f,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(base - sign * integral)
    }
}

/// Frictionless root, curvature, `F`, `G` and the expansion slopes on the
/// time grid of `spec`.
pub fn asymptotic_report(params: &ModelParams, spec: &GridSpec) -> Result<AsymptoticReport> {
    let spec = spec.validate()?;
    let oracle = Oracle::new(params, spec.n_quad)?;
    let p = *oracle.params();
    let times = make_grid(&spec, &p).times;
    let curve = oracle.y0_curve(&times)?;
    let nt = times.len();

    let rows = (0..nt)
        .into_par_iter()
        .map(|i| {
            let t = times[i];
            if i + 1 == nt {
                return Ok((0.0, 0.0, 0.0));
            }
            let y = curve.values[i];
            Ok((oracle.vxx0(t, y)?, oracle.f_coeff(t, y, &curve)?, oracle.g_coeff(t, &curve)))
        })
        .collect::<Result<Vec<_>>>()?;
    let vxx0: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let f_at_y0: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let g: Vec<f64> = rows.iter().map(|r| r.2).collect();

    let dt = times[1] - times[0];
    let value_slope = (0..nt)
        .map(|i| {
            let w = time_weights(nt - 1 - i, dt);
            let tail: f64 = w.iter().zip(&g[i..]).map(|(w, g)| w * g).sum();
            g[i] + p.lambda * tail
        })
        .collect();
    let slope = |sign: f64| -> Vec<f64> {
        (0..nt)
            .map(|i| {
                if i + 1 == nt {
                    -sign * f64::INFINITY
                } else {
                    -(f_at_y0[i] + sign) / vxx0[i]
                }
            })
            .collect()
    };
    Ok(AsymptoticReport {
        slope_lo: slope(-1.0),
        slope_hi: slope(1.0),
        times,
        y0: curve.values,
        vxx0,
        f_at_y0,
        g,
        value_slope,
    })
}
