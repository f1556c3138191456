//! Exact Monte Carlo simulation of the controlled wealth process.
//!
//! Holdings are carried as a bond leg and a stock leg. Between trading
//! opportunities each leg grows by its closed-form factor, so the only error
//! in the estimate of `E[ln W_T]` is sampling error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::solver::{trade_to, NoTradeBoundaries};

/// Legs this far below zero, relative to wealth, are rounding and reset to 0.
const LEG_SLACK: f64 = 1e-12;

/// A trading rule: the post-trade fraction chosen at `(t, x)`.
pub trait Policy: Sync {
    fn target(&self, t: f64, x: f64) -> f64;
}

impl<F: Fn(f64, f64) -> f64 + Sync> Policy for F {
    fn target(&self, t: f64, x: f64) -> f64 {
        self(t, x)
    }
}

/// Trades to the nearest edge of the solved no-trade region.
#[derive(Debug, Clone)]
pub struct OptimalPolicy {
    pub boundaries: NoTradeBoundaries,
}

impl Policy for OptimalPolicy {
    fn target(&self, t: f64, x: f64) -> f64 {
        self.boundaries.at_time(t).target(x)
    }
}

/// Never trades.
#[derive(Debug, Clone, Copy)]
pub struct NeverTrade;

impl Policy for NeverTrade {
    fn target(&self, _t: f64, x: f64) -> f64 {
        x
    }
}

/// Always rebalances to a fixed fraction, whatever it costs.
#[derive(Debug, Clone, Copy)]
pub struct FixedTarget(pub f64);

impl FixedTarget {
    /// The Merton fraction, clamped to `[0, 1]`.
    pub fn merton(params: &ModelParams) -> Self {
        FixedTarget(params.merton_fraction().clamp(0.0, 1.0))
    }
}

impl Policy for FixedTarget {
    fn target(&self, _t: f64, _x: f64) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub x0: f64,
    pub w0: f64,
    pub record_trades: bool,
}

impl SimConfig {
    pub fn validate(self) -> Result<Self> {
        if self.n_paths == 0 {
            return Err(Error::InvalidParams("n_paths must be positive".into()));
        }
        if !(self.x0 >= 0.0 && self.x0 <= 1.0) {
            return Err(Error::InvalidParams("x0 must lie in [0, 1]".into()));
        }
        if !(self.w0 > 0.0 && self.w0.is_finite()) {
            return Err(Error::InvalidParams("w0 must be positive".into()));
        }
        Ok(self)
    }
}

/// One executed trade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TradeRecord {
    pub time: f64,
    pub x_pre: f64,
    pub x_post: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub mean_log_wealth: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub mean_trade_count: f64,
    /// Per-path trades, when requested.
    pub trade_log: Option<Vec<Vec<TradeRecord>>>,
}

struct PathOutcome {
    log_wealth: f64,
    trades: usize,
    log: Vec<TradeRecord>,
}

/// Estimates `E[ln W_T]` under `policy`.
///
/// Path `k` draws from its own ChaCha stream `k` under `seed`, so results do
/// not depend on the thread count and different policies see the same
/// arrivals and shocks.
pub fn simulate(params: &ModelParams, policy: &(impl Policy + ?Sized), config: &SimConfig) -> Result<SimResult> {
    let params = params.validate()?;
    let config = config.validate()?;
    let outcomes = (0..config.n_paths)
        .into_par_iter()
        .map(|k| run_path(&params, policy, &config, k as u64))
        .collect::<Result<Vec<_>>>()?;

    let n = outcomes.len() as f64;
    let logs: Vec<f64> = outcomes.iter().map(|o| o.log_wealth).collect();
    let mean = pairwise_sum(&logs) / n;
    let dev: Vec<f64> = logs.iter().map(|l| (l - mean) * (l - mean)).collect();
    let std_error = if outcomes.len() > 1 {
        (pairwise_sum(&dev) / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    let counts: Vec<f64> = outcomes.iter().map(|o| o.trades as f64).collect();
    let mean_trade_count = pairwise_sum(&counts) / n;
    let trade_log = config
        .record_trades
        .then(|| outcomes.into_iter().map(|o| o.log).collect());
    Ok(SimResult {
        mean_log_wealth: mean,
        std_error,
        n_paths: config.n_paths,
        mean_trade_count,
        trade_log,
    })
}

/// Runs every policy on the same random numbers.
pub fn compare(
    params: &ModelParams,
    policies: &[(&str, &dyn Policy)],
    config: &SimConfig,
) -> Result<Vec<(String, SimResult)>> {
    policies
        .iter()
        .map(|(name, p)| Ok((name.to_string(), simulate(params, *p, config)?)))
        .collect()
}

/// Standard error of the difference of two estimates.
pub fn pooled_std_error(a: &SimResult, b: &SimResult) -> f64 {
    a.std_error.hypot(b.std_error)
}

fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn run_path(p: &ModelParams, policy: &(impl Policy + ?Sized), c: &SimConfig, path: u64) -> Result<PathOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    rng.set_stream(path);
    let arrivals = (p.lambda > 0.0).then(|| Exp::new(p.lambda).expect("positive rate"));
    let stock_drift = p.mu - 0.5 * p.sigma * p.sigma;

    let mut bond = c.w0 * (1.0 - c.x0);
    let mut stock = c.w0 * c.x0;
    let mut t = 0.0;
    let mut trades = 0;
    let mut log = Vec::new();
    loop {
        let next = match &arrivals {
            Some(e) => t + e.sample(&mut rng),
            None => f64::INFINITY,
        };
        let end = next.min(p.horizon);
        let dt = end - t;
        let g: f64 = rng.sample(StandardNormal);
        bond *= (p.r * dt).exp();
        stock *= (stock_drift * dt + p.sigma * dt.sqrt() * g).exp();
        t = end;
        if next >= p.horizon {
            break;
        }

        let w = bond + stock;
        let x = stock / w;
        let y = policy.target(t, x);
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::Inadmissible(format!("target {y} at t = {t} lies outside [0, 1]")));
        }
        let m = trade_to(w, x, y, p);
        if m == 0.0 {
            continue;
        }
        let cost = p.cost_buy * m.max(0.0) + p.cost_sell * (-m).max(0.0);
        stock += m;
        bond -= m + cost;
        for leg in [&mut bond, &mut stock] {
            if *leg < 0.0 {
                if *leg < -LEG_SLACK * w {
                    return Err(Error::Inadmissible(format!("negative holding {leg} after trade at t = {t}")));
                }
                *leg = 0.0;
            }
        }
        trades += 1;
        if c.record_trades {
            log.push(TradeRecord { time: t, x_pre: x, x_post: stock / (bond + stock), cost });
        }
    }
    Ok(PathOutcome { log_wealth: (bond + stock).ln(), trades, log })
}
