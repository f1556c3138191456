//! Market parameters, discretization settings and the log-odds change of
//! variable shared by every other module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Market and friction constants.
///
/// The stock follows `dS = S (mu dt + sigma dB)`, the bond grows at rate `r`,
/// trades execute only at jump times of a Poisson process with intensity
/// `lambda`, and each share costs `(1 + cost_buy) S` to buy and returns
/// `(1 - cost_sell) S` when sold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mu: f64,
    pub r: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub horizon: f64,
    pub cost_buy: f64,
    pub cost_sell: f64,
}

impl ModelParams {
    /// Checks every field constraint and returns the parameters unchanged.
    ///
    /// `lambda = 0` is accepted: no trading opportunity ever arrives and the
    /// value reduces to a plain expectation.
    pub fn validate(self) -> Result<Self> {
        let fail = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        let all = [
            self.mu,
            self.r,
            self.sigma,
            self.lambda,
            self.horizon,
            self.cost_buy,
            self.cost_sell,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return fail("all parameters must be finite");
        }
        if self.sigma <= 0.0 {
            return fail("sigma must be positive");
        }
        if self.horizon <= 0.0 {
            return fail("horizon must be positive");
        }
        if self.lambda < 0.0 {
            return fail("lambda must be >= 0");
        }
        if self.cost_buy < 0.0 {
            return fail("cost_buy must be >= 0");
        }
        if self.cost_sell < 0.0 {
            return fail("cost_sell must be >= 0");
        }
        if self.cost_sell >= 1.0 {
            return fail("cost_sell must be < 1");
        }
        Ok(self)
    }

    /// `(mu - r) / sigma^2`, the optimal constant fraction without frictions.
    pub fn merton_fraction(&self) -> f64 {
        (self.mu - self.r) / (self.sigma * self.sigma)
    }

    /// Same market with `cost_buy = cost_sell = eps`.
    pub fn with_cost(self, eps: f64) -> Self {
        ModelParams {
            cost_buy: eps,
            cost_sell: eps,
            ..self
        }
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        ModelParams { lambda, ..self }
    }

    pub fn is_frictionless(&self) -> bool {
        self.cost_buy == 0.0 && self.cost_sell == 0.0
    }

    /// Instantaneous expected log-growth `(mu - r) x + r - sigma^2 x^2 / 2`
    /// of a portfolio holding the fraction `x` in the stock.
    #[inline]
    pub fn running_reward(&self, x: f64) -> f64 {
        (self.mu - self.r) * x + self.r - 0.5 * self.sigma * self.sigma * x * x
    }

    /// Drift of the log-odds of the uncontrolled fraction, `mu - r - sigma^2/2`.
    #[inline]
    pub fn log_odds_drift(&self) -> f64 {
        self.mu - self.r - 0.5 * self.sigma * self.sigma
    }
}

/// Discretization of the time interval and of the log-odds axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub z_min: f64,
    pub z_max: f64,
    /// State nodes, endpoints included.
    pub n_state: usize,
    /// Time slices, `t = 0` and `t = T` included.
    pub n_time: usize,
    /// Gauss-Hermite nodes for every normal expectation.
    pub n_quad: usize,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            z_min: -8.0,
            z_max: 8.0,
            n_state: 401,
            n_time: 200,
            n_quad: 64,
            picard_tol: 1e-12,
            picard_max_iter: 100,
        }
    }
}

impl GridSpec {
    pub fn validate(self) -> Result<Self> {
        let fail = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        if !(self.z_min.is_finite() && self.z_max.is_finite()) {
            return fail("z_min and z_max must be finite");
        }
        if !(self.z_min < 0.0 && 0.0 < self.z_max) {
            return fail("z_min < 0 < z_max is required");
        }
        if self.n_state < 3 {
            return fail("n_state must be >= 3");
        }
        if self.n_time < 2 {
            return fail("n_time must be >= 2");
        }
        if self.n_quad < 2 {
            return fail("n_quad must be >= 2");
        }
        if !(self.picard_tol > 0.0) {
            return fail("picard_tol must be positive");
        }
        if self.picard_max_iter == 0 {
            return fail("picard_max_iter must be >= 1");
        }
        Ok(self)
    }

    /// Grid with the spacing halved in both axes; the coarse nodes are kept.
    pub fn refined(self) -> Self {
        GridSpec {
            n_state: 2 * (self.n_state - 1) + 1,
            n_time: 2 * (self.n_time - 1) + 1,
            ..self
        }
    }
}

/// Uniform time grid on `[0, T]` and uniform log-odds grid on `[z_min, z_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub times: Vec<f64>,
    pub z: Vec<f64>,
}

impl Grid {
    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn dz(&self) -> f64 {
        self.z[1] - self.z[0]
    }

    /// State nodes mapped back to fractions.
    pub fn x(&self) -> Vec<f64> {
        self.z.iter().map(|&z| logistic(z)).collect()
    }
}

/// Builds the time and state nodes for a validated spec.
pub fn make_grid(spec: &GridSpec, params: &ModelParams) -> Grid {
    Grid {
        times: linspace(0.0, params.horizon, spec.n_time),
        z: linspace(spec.z_min, spec.z_max, spec.n_state),
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { b } else { a + step * i as f64 })
        .collect()
}

/// `h(z) = e^z / (1 + e^z)`.
#[inline]
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`logistic`]; maps 0 and 1 to the infinities.
#[inline]
pub fn logit(x: f64) -> f64 {
    x.ln() - (-x).ln_1p()
}
