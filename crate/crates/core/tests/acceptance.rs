//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints one PASS or FAIL line; exits nonzero if any fails.

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::Instant;

use gauss_quad::legendre::GaussLegendre;
use notrade::cli::{sweep, Axis};
use notrade::sim::pooled_std_error;
use notrade::{
    asymptotic_report, compare, logistic, logit, simulate, AsymptoticReport, FixedTarget, GridSpec, ModelParams,
    NeverTrade, OptimalPolicy, Oracle, Policy, SimConfig, SolveReport,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn(&mut Cache) -> Outcome);

fn reference() -> ModelParams {
    ModelParams { mu: 0.4, r: 0.1, sigma: 1.0, lambda: 3.0, horizon: 1.0, cost_buy: 0.05, cost_sell: 0.05 }
}

fn grid() -> GridSpec {
    GridSpec { n_time: 201, ..GridSpec::default() }
}

const SLOPE_COSTS: [f64; 3] = [0.0025, 0.005, 0.01];
const T_PROBE: f64 = 0.75;

struct Cache {
    solves: HashMap<String, SolveReport>,
    report: Option<AsymptoticReport>,
}

impl Cache {
    fn solve(&mut self, p: &ModelParams, spec: &GridSpec) -> Result<&SolveReport, String> {
        let key = format!("{p:?}{spec:?}");
        if !self.solves.contains_key(&key) {
            let rep = notrade::solve(p, spec).map_err(|e| e.to_string())?;
            self.solves.insert(key.clone(), rep);
        }
        Ok(&self.solves[&key])
    }

    fn report(&mut self) -> Result<&AsymptoticReport, String> {
        if self.report.is_none() {
            let rep = asymptotic_report(&reference().with_cost(0.0), &grid()).map_err(|e| e.to_string())?;
            self.report = Some(rep);
        }
        Ok(self.report.as_ref().unwrap())
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// `int_t^T E[f(Y_s)] ds` for `lambda = 0`, by Gauss-Legendre in
/// `w = sqrt(s - t)` and a fine trapezoid rule on the normal axis.
fn no_trade_value(p: &ModelParams, t: f64, x: f64) -> f64 {
    let z = logit(x);
    let a = p.mu - p.r - 0.5 * p.sigma * p.sigma;
    let expect = |tau: f64| {
        let n = 8000;
        let h = 24.0 / n as f64;
        let sum: f64 = (0..=n)
            .map(|k| {
                let g = -12.0 + h * k as f64;
                let w = if k == 0 || k == n { 0.5 } else { 1.0 };
                let y = logistic(z + a * tau + p.sigma * tau.sqrt() * g);
                w * (-0.5 * g * g).exp() * ((p.mu - p.r) * y + p.r - 0.5 * p.sigma * p.sigma * y * y)
            })
            .sum();
        sum * h / (2.0 * std::f64::consts::PI).sqrt()
    };
    let end = (p.horizon - t).sqrt();
    GaussLegendre::new(40.try_into().unwrap()).integrate(0.0, end, |w| 2.0 * w * expect(w * w))
}

fn c1(c: &mut Cache) -> Outcome {
    let p = reference().with_lambda(0.0);
    let rep = c.solve(&p, &grid())?;
    let s = &rep.surface;
    let mut end_err = 0.0f64;
    for (i, &t) in s.times.iter().enumerate() {
        end_err = end_err.max((s.v_at_zero[i] - p.r * (1.0 - t)).abs());
        end_err = end_err.max((s.v_at_one[i] - (p.mu - 0.5) * (1.0 - t)).abs());
    }
    let mut int_err = 0.0f64;
    for &t in &[0.0, 0.25, 0.5, 0.75, 0.995] {
        for &x in &[0.001, 0.05, 0.3, 0.5, 0.8, 0.999] {
            int_err = int_err.max((s.value_at(t, x) - no_trade_value(&p, t, x)).abs());
        }
    }
    check(end_err <= 1e-8 && int_err <= 1e-6, format!("endpoint error {end_err:.2e}, interior error {int_err:.2e}"))
}

fn c2(c: &mut Cache) -> Outcome {
    let rep = c.solve(&reference(), &grid())?;
    let s = &rep.surface;
    let last = s.times.len() - 1;
    let terminal = s.u_values[last].iter().chain([&s.v_at_zero[last], &s.v_at_one[last]]).fold(0.0f64, |m, v| m.max(v.abs()));
    let worst = (0..last).map(|i| s.concavity_defect(i).0).fold(f64::NEG_INFINITY, f64::max);
    check(terminal == 0.0 && worst <= 1e-8, format!("max |v(T,x)| = {terminal}, max chord defect {worst:.2e}"))
}

fn c3(c: &mut Cache) -> Outcome {
    let spec = grid();
    let p = reference().with_cost(0.0);
    let oracle = Oracle::new(&p, spec.n_quad).map_err(|e| e.to_string())?;
    let rep = c.solve(&p, &spec)?;
    let dz = (spec.z_max - spec.z_min) / (spec.n_state - 1) as f64;
    let mut worst = 0.0f64;
    for (i, &t) in rep.boundaries.times.iter().enumerate() {
        let b = rep.boundaries.at(i);
        let y0 = if i + 1 == rep.boundaries.times.len() { p.merton_fraction() } else { oracle.y0(t).map_err(|e| e.to_string())? };
        let cell = y0 * (1.0 - y0) * dz;
        worst = worst.max((b.y_lo - y0).abs().max((b.y_hi - y0).abs()) / cell);
    }
    check(worst <= 2.0, format!("max distance {worst:.3} cells"))
}

fn c4(_: &mut Cache) -> Outcome {
    let err = |lambda: f64| -> Result<f64, String> {
        let o = Oracle::new(&reference().with_cost(0.0).with_lambda(lambda), 64).map_err(|e| e.to_string())?;
        Ok((o.y0(0.0).map_err(|e| e.to_string())? - 0.3).abs())
    };
    let (e20, e40) = (err(20.0)?, err(40.0)?);
    let o = Oracle::new(&reference().with_cost(0.0), 64).map_err(|e| e.to_string())?;
    let near = (o.y0(1.0 - 1e-6).map_err(|e| e.to_string())? - 0.3).abs();
    check(e40 <= 0.6 * e20 && near < 1e-3, format!("error {e20:.3e} at 20, {e40:.3e} at 40, {near:.2e} near T"))
}

fn c5(c: &mut Cache) -> Outcome {
    let rep = c.solve(&reference(), &grid())?;
    let v = rep.surface.value_at(0.0, 0.3);
    let policy = OptimalPolicy { boundaries: rep.boundaries.clone() };
    let cfg = SimConfig { n_paths: 100_000, seed: 20240601, x0: 0.3, w0: 1.0, record_trades: false };
    let start = Instant::now();
    let r = simulate(&reference(), &policy, &cfg).map_err(|e| e.to_string())?;
    let gap = (r.mean_log_wealth - v).abs();
    check(
        gap <= 3.0 * r.std_error,
        format!(
            "mean {:.5} vs v {:.5}, gap {:.2} SE, {:.1}s",
            r.mean_log_wealth,
            v,
            gap / r.std_error,
            start.elapsed().as_secs_f64()
        ),
    )
}

fn c6(c: &mut Cache) -> Outcome {
    let rep = c.solve(&reference(), &grid())?;
    let optimal = OptimalPolicy { boundaries: rep.boundaries.clone() };
    let merton = FixedTarget::merton(&reference());
    let policies: [(&str, &dyn Policy); 3] = [("optimal", &optimal), ("never", &NeverTrade), ("merton", &merton)];
    let cfg = SimConfig { n_paths: 100_000, seed: 7, x0: 0.3, w0: 1.0, record_trades: false };
    let res = compare(&reference(), &policies, &cfg).map_err(|e| e.to_string())?;
    let best = &res[0].1;
    let mut ok = true;
    let mut parts = vec![format!("optimal {:.5}", best.mean_log_wealth)];
    for (name, r) in &res[1..] {
        ok &= best.mean_log_wealth >= r.mean_log_wealth - 3.0 * pooled_std_error(best, r);
        parts.push(format!("{name} {:.5}", r.mean_log_wealth));
    }
    check(ok, parts.join(", "))
}

/// Cost used only to show how the finite-difference slopes approach theory.
const PROBE_COST: f64 = SLOPE_COSTS[0] / 8.0;

/// `((y_lo - y0) / eps, (y_hi - y0) / eps, (v0 - v) / eps)` at the probe
/// time, measured against the frictionless solve on the same grid.
fn slope_runs(c: &mut Cache, costs: &[f64]) -> Result<Vec<(f64, f64, f64)>, String> {
    let spec = grid();
    let y0 = {
        let r = c.report()?;
        r.y0[r.index_of(T_PROBE)]
    };
    let base = c.solve(&reference().with_cost(0.0), &spec)?;
    let i = base.boundaries.times.iter().position(|&t| (t - T_PROBE).abs() < 1e-12).ok_or("0.75 is not a grid time")?;
    let y_base = base.boundaries.at(i).y_lo;
    let v_base = base.surface.value_at(T_PROBE, y0);
    let mut rows = Vec::new();
    for &eps in costs {
        let rep = c.solve(&reference().with_cost(eps), &spec)?;
        let b = rep.boundaries.at(i);
        let loss = (v_base - rep.surface.value_at(T_PROBE, y0)) / eps;
        rows.push(((b.y_lo - y_base) / eps, (b.y_hi - y_base) / eps, loss));
    }
    Ok(rows)
}

fn decreasing_and_small(errors: &[f64]) -> bool {
    errors[0] <= 0.1 && errors.windows(2).all(|w| w[0] < w[1])
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c7(c: &mut Cache) -> Outcome {
    let rows = slope_runs(c, &SLOPE_COSTS)?;
    let probe = slope_runs(c, &[PROBE_COST])?[0];
    let r = c.report()?;
    let k = r.index_of(T_PROBE);
    let (lo, hi) = (r.slope_lo[k], r.slope_hi[k]);
    let err_lo: Vec<f64> = rows.iter().map(|row| rel(row.0, lo)).collect();
    let err_hi: Vec<f64> = rows.iter().map(|row| rel(row.1, hi)).collect();
    check(
        decreasing_and_small(&err_lo) && decreasing_and_small(&err_hi),
        format!(
            "theory ({lo:.4}, {hi:.4}), relative errors lower {err_lo:.4?}, upper {err_hi:.4?}; at eps {PROBE_COST:e}: {:.4}, {:.4}",
            rel(probe.0, lo),
            rel(probe.1, hi)
        ),
    )
}

fn c8(c: &mut Cache) -> Outcome {
    let rows = slope_runs(c, &SLOPE_COSTS)?;
    let probe = slope_runs(c, &[PROBE_COST])?[0];
    let r = c.report()?;
    let theory = r.value_slope[r.index_of(T_PROBE)];
    let measured: Vec<f64> = rows.iter().map(|row| row.2).collect();
    let errs: Vec<f64> = measured.iter().map(|&m| rel(m, theory)).collect();
    check(
        errs[0] <= 0.1,
        format!(
            "theory {theory:.5}, measured {measured:.5?}, relative errors {errs:.4?}; at eps {PROBE_COST:e}: {:.4}",
            rel(probe.2, theory)
        ),
    )
}

fn c9(c: &mut Cache) -> Outcome {
    let r = c.report()?;
    let n = r.times.len() - 1;
    let f_max = r.f_at_y0[..n].iter().fold(0.0f64, |m, f| m.max(f.abs()));
    let vxx_max = r.vxx0[..n].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    check(f_max < 1.0 && vxx_max < 0.0, format!("max |F| {f_max:.4}, max vxx0 {vxx_max:.4e}"))
}

fn c10(_: &mut Cache) -> Outcome {
    let (rows, _) = sweep(&reference().with_cost(0.01), &grid(), Axis::Lambda, &[3.0, 12.0], T_PROBE).map_err(|e| e.to_string())?;
    let (a, b) = (&rows[0], &rows[1]);
    check(
        b.width > a.width && b.value_loss > a.value_loss,
        format!("width {:.5} -> {:.5}, value loss {:.3e} -> {:.3e}", a.width, b.width, a.value_loss, b.value_loss),
    )
}

fn c11(c: &mut Cache) -> Outcome {
    let rep = c.solve(&reference(), &grid())?;
    let b = &rep.boundaries;
    let n = b.times.len() - 1;
    let ordered = (0..n).all(|i| b.y_hi[i] > 0.0 && b.y_lo[i] < 1.0 && b.y_lo[i] < b.y_hi[i]);
    let onset = (0..n).rev().take_while(|&i| b.y_lo[i] == 0.0).last();
    check(
        ordered && onset.is_some(),
        format!("ordering {ordered}, lower boundary zero from t = {:?}", onset.map(|i| b.times[i])),
    )
}

fn c12(c: &mut Cache) -> Outcome {
    let coarse = grid();
    let fine = coarse.refined();
    let (v_c, bc) = {
        let r = c.solve(&reference(), &coarse)?;
        (r.surface.value_at(0.0, 0.3), r.boundaries.clone())
    };
    let (v_f, bf) = {
        let r = c.solve(&reference(), &fine)?;
        (r.surface.value_at(0.0, 0.3), r.boundaries.clone())
    };
    let z: Vec<f64> = (0..coarse.n_state)
        .map(|j| coarse.z_min + (coarse.z_max - coarse.z_min) * j as f64 / (coarse.n_state - 1) as f64)
        .collect();
    let x: Vec<f64> = z.iter().map(|&z| logistic(z)).collect();
    // width of the coarse cell holding y; the end cells reach 0 and 1
    let cell = |y: f64| {
        let k = x.partition_point(|&xj| xj <= y);
        let lo = if k == 0 { 0.0 } else { x[k - 1] };
        let hi = if k == x.len() { 1.0 } else { x[k] };
        hi - lo
    };
    let mut worst = 0.0f64;
    for i in 0..bc.times.len() {
        let j = 2 * i;
        for (a, b) in [(bc.y_lo[i], bf.y_lo[j]), (bc.y_hi[i], bf.y_hi[j])] {
            worst = worst.max((a - b).abs() / cell(a));
        }
    }
    let dv = (v_c - v_f).abs();
    check(dv < 1e-3 && worst < 1.0, format!("|dv(0,0.3)| {dv:.2e}, max boundary shift {worst:.3} cells"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("degenerate values without trading", c1),
        ("terminal value and concavity", c2),
        ("frictionless boundary against oracle root", c3),
        ("frictionless root tends to Merton fraction", c4),
        ("simulated value matches solver", c5),
        ("optimal policy beats alternatives", c6),
        ("boundary slopes in the cost", c7),
        ("value slope in the cost", c8),
        ("bounds on F and curvature", c9),
        ("higher intensity widens region and loss", c10),
        ("qualitative boundary behavior", c11),
        ("grid stability", c12),
    ];
    let mut cache = Cache { solves: HashMap::new(), report: None };
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f(&mut cache);
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {:>2} {name}: {d} [{secs:.1}s]", k + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d} [{secs:.1}s]", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
