//! Closed-form law of the uncontrolled risky fraction.
//!
//! Between trades the fraction started at `x` at time `t` is
//!
//! ```text
//! Y_s = x A / (x A + 1 - x),   A = exp((mu - r - sigma^2/2)(s - t) + sigma (B_s - B_t)),
//! ```
//!
//! so its log-odds is Gaussian. Every expectation in the solver and in the
//! frictionless formulas is an integral of a bounded function of `Y_s`
//! against a normal law, evaluated here.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::hermite::GaussHermite;
use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};
use crate::model::{logistic, logit, ModelParams};

/// Gauss-Hermite rule rescaled to integrate against the standard normal law.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// `n`-point rule; exact for polynomials of degree `2n - 1` in a
    /// standard normal variable.
    pub fn gauss_hermite(n: usize) -> Result<Self> {
        let deg = NonZeroUsize::new(n)
            .filter(|_| n >= 2)
            .ok_or_else(|| Error::InvalidParams("n_quad must be >= 2".into()))?;
        let rule = GaussHermite::new(deg);
        let scale = PI.sqrt();
        let (nodes, weights) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (x * std::f64::consts::SQRT_2, w / scale))
            .unzip();
        Ok(QuadratureRule { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `E[f(G)]` for `G ~ N(0, 1)`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&g, &w)| w * f(g))
            .sum()
    }

    /// Node/weight pairs whose weight can still move an `O(1)` sum in double
    /// precision.
    pub(crate) fn significant(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes
            .iter()
            .zip(&self.weights)
            .filter(|(_, &w)| w > 1e-24)
            .map(|(&g, &w)| (g, w))
    }
}

/// Half-width of the normal range integrated by the split rules; the mass
/// outside `[-12, 12]` is below 1e-32.
const SPLIT_RANGE: f64 = 12.0;

fn panel_rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        GaussLegendre::new(NonZeroUsize::new(12).unwrap())
            .as_node_weight_pairs()
            .iter()
            // nodes on [-1, 1] -> [0, 1]
            .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .collect()
    })
}

/// `int_a^b f` by composite 12-point Gauss-Legendre on panels no wider than
/// `max_width`.
pub(crate) fn integrate_panels(a: f64, b: f64, max_width: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let panels = ((b - a) / max_width).ceil().max(1.0) as usize;
    let h = (b - a) / panels as f64;
    let rule = panel_rule();
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + h * p as f64;
        let part: f64 = rule.iter().map(|&(u, w)| w * f(lo + h * u)).sum();
        total += h * part;
    }
    total
}

#[inline]
fn std_normal_pdf(g: f64) -> f64 {
    (-0.5 * g * g).exp() / (2.0 * PI).sqrt()
}

/// Law of the uncontrolled fraction for one market.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionLaw {
    drift: f64,
    sigma: f64,
}

impl FractionLaw {
    pub fn new(params: &ModelParams) -> Self {
        FractionLaw {
            drift: params.log_odds_drift(),
            sigma: params.sigma,
        }
    }

    /// Log of the growth factor `A` over `[t, s]` for the normal draw `g`.
    #[inline]
    pub fn log_growth(&self, t: f64, s: f64, g: f64) -> f64 {
        let tau = s - t;
        self.drift * tau + self.sigma * tau.sqrt() * g
    }

    /// `Y_s` started from `x` at `t`, with `B_s - B_t = g sqrt(s - t)`.
    /// The endpoints 0 and 1 are absorbing.
    pub fn flow(&self, t: f64, x: f64, s: f64, g: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        if s <= t {
            return x;
        }
        logistic(logit(x) + self.log_growth(t, s, g))
    }

    /// `dY_s/dx = Y (1 - Y) / (x (1 - x))`, defined for interior `x`.
    pub fn flow_sensitivity(&self, t: f64, x: f64, s: f64, g: f64) -> Result<f64> {
        if !(x > 0.0 && x < 1.0) {
            return Err(Error::Domain(format!(
                "flow sensitivity needs 0 < x < 1, got {x}"
            )));
        }
        let y = self.flow(t, x, s, g);
        Ok(y * (1.0 - y) / (x * (1.0 - x)))
    }

    /// Density of `Y_s` at `y` given `Y_t = x`.
    pub fn density(&self, s: f64, y: f64, t: f64, x: f64) -> Result<f64> {
        if !(s > t) {
            return Err(Error::Domain(format!("density needs s > t, got s={s}, t={t}")));
        }
        if !(y > 0.0 && y < 1.0 && x > 0.0 && x < 1.0) {
            return Err(Error::Domain(format!(
                "density needs interior states, got y={y}, x={x}"
            )));
        }
        let tau = s - t;
        let var = self.sigma * self.sigma * tau;
        let m = -self.drift * tau + (y * (1.0 - x) / ((1.0 - y) * x)).ln();
        Ok((-m * m / (2.0 * var)).exp() / (self.sigma * y * (1.0 - y) * (2.0 * PI * tau).sqrt()))
    }

    /// Gauss-Hermite approximation of `E[f(Y_s)]` given `Y_t = x`.
    pub fn expect(
        &self,
        t: f64,
        x: f64,
        s: f64,
        rule: &QuadratureRule,
        mut f: impl FnMut(f64) -> f64,
    ) -> f64 {
        if s <= t || x <= 0.0 || x >= 1.0 {
            return f(x.clamp(0.0, 1.0));
        }
        let z = logit(x);
        let drift = self.drift * (s - t);
        let spread = self.sigma * (s - t).sqrt();
        rule.integrate(|g| f(logistic(z + drift + spread * g)))
    }

    /// Normal draw `g` at which `Y_s` crosses `threshold`, for interior `x`
    /// and `s > t`. Infinite when the threshold sits at 0 or 1.
    pub fn crossing_draw(&self, t: f64, x: f64, s: f64, threshold: f64) -> f64 {
        let tau = s - t;
        (logit(threshold) - logit(x) - self.drift * tau) / (self.sigma * tau.sqrt())
    }

    /// `(E[f(Y_s); Y_s < threshold], E[f(Y_s); Y_s > threshold])`.
    ///
    /// Each side is integrated separately on the normal axis, so a jump or
    /// kink of `f` at the threshold costs no accuracy. A deterministic state
    /// sitting exactly on the threshold is shared equally between the sides.
    pub fn expect_split(
        &self,
        t: f64,
        x: f64,
        s: f64,
        threshold: f64,
        mut f: impl FnMut(f64) -> f64,
    ) -> (f64, f64) {
        if s <= t || x <= 0.0 || x >= 1.0 {
            let x = x.clamp(0.0, 1.0);
            let v = f(x);
            return if x < threshold {
                (v, 0.0)
            } else if x > threshold {
                (0.0, v)
            } else {
                (0.5 * v, 0.5 * v)
            };
        }
        let z = logit(x);
        let drift = self.drift * (s - t);
        let spread = self.sigma * (s - t).sqrt();
        let cut = self
            .crossing_draw(t, x, s, threshold)
            .clamp(-SPLIT_RANGE, SPLIT_RANGE);
        let mut side = |a: f64, b: f64| {
            integrate_panels(a, b, 1.0, |g| {
                std_normal_pdf(g) * f(logistic(z + drift + spread * g))
            })
        };
        let below = side(-SPLIT_RANGE, cut);
        let above = side(cut, SPLIT_RANGE);
        (below, above)
    }
}
