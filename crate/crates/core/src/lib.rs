//! Log-utility investment with Poisson trading opportunities and
//! proportional transaction costs.
//!
//! The crate solves the nonlocal HJB equation for the value function
//! `v(t, x)` (total value `ln w + v`), extracts the no-trade region, computes
//! the frictionless reference quantities and their first-order cost
//! corrections by direct quadrature, and checks everything against exact
//! Monte Carlo simulation of the wealth process.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod fraction;
pub mod frictionless;
pub mod model;
pub mod output;
pub mod sim;
pub mod solver;

pub use config::Config;
pub use error::{Error, Result};
pub use fraction::{FractionLaw, QuadratureRule};
pub use frictionless::{asymptotic_report, AsymptoticReport, Oracle, Y0Curve};
pub use model::{logistic, logit, make_grid, Grid, GridSpec, ModelParams};
pub use sim::{compare, simulate, FixedTarget, NeverTrade, OptimalPolicy, Policy, SimConfig, SimResult, TradeRecord};
pub use solver::{
    extract_boundaries, policy_target, solve, solve_with, sup_term, trade_amount, NoTradeBoundaries, SliceBoundary,
    SolveOptions, SolveReport, ValueSurface,
};
