use notrade::solver::chord_defect;
use notrade::{logistic, logit, FractionLaw, ModelParams};
use proptest::prelude::*;

fn law() -> FractionLaw {
    FractionLaw::new(&ModelParams {
        mu: 0.4,
        r: 0.1,
        sigma: 1.0,
        lambda: 3.0,
        horizon: 1.0,
        cost_buy: 0.05,
        cost_sell: 0.05,
    })
}

proptest! {
    #[test]
    fn flow_is_increasing_in_the_start(a in 1e-4..0.9999f64, b in 1e-4..0.9999f64, tau in 1e-3..2.0f64, g in -4.0..4.0f64) {
        prop_assume!((a - b).abs() > 1e-9);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let l = law();
        prop_assert!(l.flow(0.0, lo, tau, g) < l.flow(0.0, hi, tau, g));
    }

    #[test]
    fn flow_sensitivity_matches_central_differences(x in 0.05..0.95f64, tau in 1e-3..1.0f64, g in -3.0..3.0f64) {
        let l = law();
        let h = 1e-5;
        let fd = (l.flow(0.0, x + h, tau, g) - l.flow(0.0, x - h, tau, g)) / (2.0 * h);
        let exact = l.flow_sensitivity(0.0, x, tau, g).unwrap();
        prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs(), "fd={fd} exact={exact}");
    }

    #[test]
    fn relative_move_lies_between_growth_bounds(x in 1e-3..0.999f64, tau in 1e-2..2.0f64, g in -4.0..4.0f64) {
        let l = law();
        let log_a = l.log_growth(0.0, tau, g);
        prop_assume!(log_a.abs() > 1e-3);
        let a = log_a.exp();
        let y = l.flow(0.0, x, tau, g);
        let q = (y - x) / (x * (1.0 - x));
        prop_assert!(1.0 - 1.0 / a < q && q < a - 1.0, "A={a} q={q}");
    }

    #[test]
    fn logistic_is_symmetric_and_inverted_by_logit(z in -20.0..20.0f64) {
        prop_assert!((logistic(-z) - (1.0 - logistic(z))).abs() <= f64::EPSILON);
        prop_assert!(logistic(z) < logistic(z + 1e-6));
        let tol = 4.0 * f64::EPSILON * (1.0 + z.abs().exp());
        prop_assert!((logit(logistic(z)) - z).abs() <= tol);
    }

    #[test]
    fn concave_samples_have_no_chord_defect(c in 0.01..10.0f64, b in -5.0..5.0f64, n in 3usize..60) {
        let x: Vec<f64> = (0..n).map(|j| logistic(-8.0 + 16.0 * j as f64 / (n - 1) as f64)).collect();
        let v: Vec<f64> = x.iter().map(|x| b * x - c * x * x).collect();
        prop_assert!(chord_defect(&x, &v).0 <= 1e-12);
    }
}
