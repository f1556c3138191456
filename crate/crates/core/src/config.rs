//! Flat `key = value` configuration files.
//!
//! ```text
//! # reference market
//! mu = 0.4
//! r = 0.1
//! sigma = 1
//! lambda = 3
//! horizon = 1
//! cost_buy = 0.05
//! cost_sell = 0.05
//! n_state = 401
//! ```
//!
//! Model keys are required. Grid keys fall back to [`GridSpec::default`].

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{GridSpec, ModelParams};

const MODEL_KEYS: [&str; 7] = ["mu", "r", "sigma", "lambda", "horizon", "cost_buy", "cost_sell"];
const GRID_KEYS: [&str; 7] = [
    "z_min",
    "z_max",
    "n_state",
    "n_time",
    "n_quad",
    "picard_tol",
    "picard_max_iter",
];

/// Parsed and validated configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Config {
    pub params: ModelParams,
    pub grid: GridSpec,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Config::parse(&text).map_err(|msg| Error::Config {
            path: path.to_path_buf(),
            msg,
        })
    }

    pub fn parse(text: &str) -> std::result::Result<Config, String> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected `key = value`", lineno + 1))?;
            let key = key.trim();
            if !MODEL_KEYS.contains(&key) && !GRID_KEYS.contains(&key) {
                return Err(format!("line {}: unknown key `{key}`", lineno + 1));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(format!("line {}: duplicate key `{key}`", lineno + 1));
            }
        }

        let real = |key: &str| -> std::result::Result<Option<f64>, String> {
            entries
                .get(key)
                .map(|v| v.parse::<f64>().map_err(|e| format!("`{key}`: {e}")))
                .transpose()
        };
        let count = |key: &str| -> std::result::Result<Option<usize>, String> {
            entries
                .get(key)
                .map(|v| v.parse::<usize>().map_err(|e| format!("`{key}`: {e}")))
                .transpose()
        };
        let required = |key: &str| real(key)?.ok_or_else(|| format!("missing key `{key}`"));

        let params = ModelParams {
            mu: required("mu")?,
            r: required("r")?,
            sigma: required("sigma")?,
            lambda: required("lambda")?,
            horizon: required("horizon")?,
            cost_buy: required("cost_buy")?,
            cost_sell: required("cost_sell")?,
        }
        .validate()
        .map_err(|e| e.to_string())?;

        let d = GridSpec::default();
        let grid = GridSpec {
            z_min: real("z_min")?.unwrap_or(d.z_min),
            z_max: real("z_max")?.unwrap_or(d.z_max),
            n_state: count("n_state")?.unwrap_or(d.n_state),
            n_time: count("n_time")?.unwrap_or(d.n_time),
            n_quad: count("n_quad")?.unwrap_or(d.n_quad),
            picard_tol: real("picard_tol")?.unwrap_or(d.picard_tol),
            picard_max_iter: count("picard_max_iter")?.unwrap_or(d.picard_max_iter),
        }
        .validate()
        .map_err(|e| e.to_string())?;

        Ok(Config { params, grid })
    }

    /// Renders the configuration back into the file format.
    pub fn render(&self) -> String {
        let p = &self.params;
        let g = &self.grid;
        format!(
            "mu = {}\nr = {}\nsigma = {}\nlambda = {}\nhorizon = {}\ncost_buy = {}\ncost_sell = {}\n\
             z_min = {}\nz_max = {}\nn_state = {}\nn_time = {}\nn_quad = {}\npicard_tol = {:e}\npicard_max_iter = {}\n",
            p.mu, p.r, p.sigma, p.lambda, p.horizon, p.cost_buy, p.cost_sell,
            g.z_min, g.z_max, g.n_state, g.n_time, g.n_quad, g.picard_tol, g.picard_max_iter
        )
    }
}
