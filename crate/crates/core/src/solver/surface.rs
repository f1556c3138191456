use serde::Serialize;

use crate::model::{logistic, logit};

/// Discretized value function `v(t, x)` on a time by log-odds grid.
///
/// `u_values[i][j] = v(times[i], h(z_nodes[j]))`; the curves at `x = 0` and
/// `x = 1` are stored separately because the grid never reaches them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueSurface {
    pub times: Vec<f64>,
    pub z_nodes: Vec<f64>,
    pub u_values: Vec<Vec<f64>>,
    pub v_at_zero: Vec<f64>,
    pub v_at_one: Vec<f64>,
}

impl ValueSurface {
    pub fn slice(&self, i: usize) -> Slice<'_> {
        Slice {
            z: &self.z_nodes,
            u: &self.u_values[i],
            v0: self.v_at_zero[i],
            v1: self.v_at_one[i],
        }
    }

    pub fn x_nodes(&self) -> Vec<f64> {
        self.z_nodes.iter().map(|&z| logistic(z)).collect()
    }

    /// `v(t, x)`, linear in `t` between slices and interpolated in `z` within
    /// each slice. `t` is clamped to the time grid.
    pub fn value_at(&self, t: f64, x: f64) -> f64 {
        let (i, w) = bracket(&self.times, t);
        let a = self.slice(i).value(x);
        if w == 0.0 {
            return a;
        }
        (1.0 - w) * a + w * self.slice(i + 1).value(x)
    }

    /// Largest chord defect of slice `i` over the interior nodes, with the
    /// state where it occurs. Positive defects mean a loss of concavity.
    pub fn concavity_defect(&self, i: usize) -> (f64, f64) {
        let x = self.x_nodes();
        chord_defect(&x, &self.u_values[i])
    }
}

/// `(max_j D_j, x_j)` where `D_j` is the gap between the chord through the
/// neighbours of node `j` and the value at `j`. A concave sequence has every
/// `D_j <= 0`.
pub fn chord_defect(x: &[f64], v: &[f64]) -> (f64, f64) {
    let mut worst = (f64::NEG_INFINITY, f64::NAN);
    for j in 1..x.len().saturating_sub(1) {
        let (a, b) = (x[j] - x[j - 1], x[j + 1] - x[j]);
        let d = (a * v[j + 1] + b * v[j - 1]) / (a + b) - v[j];
        if d > worst.0 {
            worst = (d, x[j]);
        }
    }
    worst
}

/// Index of the slice at or before `t` and the linear weight of the next one.
pub(crate) fn bracket(times: &[f64], t: f64) -> (usize, f64) {
    let n = times.len();
    if t <= times[0] {
        return (0, 0.0);
    }
    if t >= times[n - 1] {
        return (n - 1, 0.0);
    }
    let dt = times[1] - times[0];
    let mut i = (((t - times[0]) / dt).floor() as usize).min(n - 2);
    // guard against rounding of the division
    while i > 0 && times[i] > t {
        i -= 1;
    }
    while i + 2 < n && times[i + 1] <= t {
        i += 1;
    }
    (i, (t - times[i]) / (times[i + 1] - times[i]))
}

/// One time slice with its interpolant.
#[derive(Debug, Clone, Copy)]
pub struct Slice<'a> {
    pub z: &'a [f64],
    pub u: &'a [f64],
    pub v0: f64,
    pub v1: f64,
}

/// Cubic Lagrange weights for nodes `-1, 0, 1, 2` at offset `theta`.
#[inline]
pub(crate) fn cubic_weights(theta: f64) -> [f64; 4] {
    let (p, m1, m2) = (theta + 1.0, theta - 1.0, theta - 2.0);
    [
        -theta * m1 * m2 / 6.0,
        p * m1 * m2 / 2.0,
        -p * theta * m2 / 2.0,
        p * theta * m1 / 6.0,
    ]
}

impl Slice<'_> {
    /// Value at a fraction `x` in `[0, 1]`.
    pub fn value(&self, x: f64) -> f64 {
        if x <= 0.0 {
            self.v0
        } else if x >= 1.0 {
            self.v1
        } else {
            self.value_z(logit(x))
        }
    }

    /// Value at log-odds `z`: cubic in `z` on the grid, linear in `x`
    /// between the last node and the endpoint curve beyond it.
    pub fn value_z(&self, z: f64) -> f64 {
        let n = self.z.len();
        let (z0, zn) = (self.z[0], self.z[n - 1]);
        if z < z0 {
            if z == f64::NEG_INFINITY {
                return self.v0;
            }
            let (x, x0) = (logistic(z), logistic(z0));
            return self.v0 + (self.u[0] - self.v0) * x / x0;
        }
        if z > zn {
            if z == f64::INFINITY {
                return self.v1;
            }
            // 1 - h(z) = h(-z)
            let (y, yn) = (logistic(-z), logistic(-zn));
            return self.v1 + (self.u[n - 1] - self.v1) * y / yn;
        }
        let dz = self.z[1] - z0;
        let s = (z - z0) / dz;
        if n < 4 {
            let k = (s.floor() as usize).min(n - 2);
            let th = s - k as f64;
            return (1.0 - th) * self.u[k] + th * self.u[k + 1];
        }
        let k = (s.floor() as usize).clamp(1, n - 3);
        let w = cubic_weights(s - k as f64);
        w[0] * self.u[k - 1] + w[1] * self.u[k] + w[2] * self.u[k + 1] + w[3] * self.u[k + 2]
    }

    /// `u_z` at every node: fourth-order central differences inside,
    /// second order next to the ends, one-sided second order at the ends.
    pub fn u_z(&self) -> Vec<f64> {
        let n = self.z.len();
        let h = self.z[1] - self.z[0];
        let u = self.u;
        (0..n)
            .map(|j| {
                if j == 0 {
                    (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
                } else if j == n - 1 {
                    (3.0 * u[j] - 4.0 * u[j - 1] + u[j - 2]) / (2.0 * h)
                } else if j == 1 || j == n - 2 {
                    (u[j + 1] - u[j - 1]) / (2.0 * h)
                } else {
                    (8.0 * (u[j + 1] - u[j - 1]) - (u[j + 2] - u[j - 2])) / (12.0 * h)
                }
            })
            .collect()
    }

    /// `v_x` at every node by the chain rule `x (1 - x) v_x = u_z`.
    pub fn v_x(&self) -> Vec<f64> {
        self.u_z()
            .iter()
            .zip(self.z)
            .map(|(&d, &z)| {
                let x = logistic(z);
                d / (x * (1.0 - x))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|j| -8.0 + 16.0 * j as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn cubic_weights_reproduce_cubics() {
        for k in 0..=20 {
            let th = k as f64 / 20.0;
            let w = cubic_weights(th);
            let p = |s: f64| 1.0 - 2.0 * s + 0.5 * s * s - 0.25 * s * s * s;
            let approx = w[0] * p(-1.0) + w[1] * p(0.0) + w[2] * p(1.0) + w[3] * p(2.0);
            assert!((approx - p(th)).abs() < 1e-14);
        }
    }

    #[test]
    fn interpolant_hits_nodes_endpoints_and_is_accurate() {
        let z = grid(401);
        let f = |x: f64| 0.3 * x - 0.5 * x * x + 0.1;
        let u: Vec<f64> = z.iter().map(|&z| f(logistic(z))).collect();
        let s = Slice { z: &z, u: &u, v0: f(0.0), v1: f(1.0) };
        for j in [0, 7, 200, 400] {
            assert!((s.value_z(z[j]) - u[j]).abs() < 1e-14);
        }
        assert_eq!(s.value(0.0), f(0.0));
        assert_eq!(s.value(1.0), f(1.0));
        for &x in &[1e-5, 0.01, 0.3, 0.77, 0.9999, 1.0 - 1e-6] {
            assert!((s.value(x) - f(x)).abs() < 3e-8, "x={x}");
        }
        let vx = s.v_x();
        for (j, &zj) in z.iter().enumerate().skip(2).step_by(37) {
            let x = logistic(zj);
            assert!((vx[j] - (0.3 - x)).abs() < 1e-5, "j={j}");
        }
    }

    #[test]
    fn chord_defect_signs() {
        let x: Vec<f64> = (0..11).map(|j| j as f64 / 10.0).collect();
        let concave: Vec<f64> = x.iter().map(|x| -x * x).collect();
        assert!(chord_defect(&x, &concave).0 < 0.0);
        let convex: Vec<f64> = x.iter().map(|x| x * x).collect();
        let (d, _) = chord_defect(&x, &convex);
        assert!((d - 0.01).abs() < 1e-12);
    }

    #[test]
    fn bracket_finds_slices() {
        let t: Vec<f64> = (0..=4).map(|i| i as f64 * 0.25).collect();
        assert_eq!(bracket(&t, -1.0), (0, 0.0));
        assert_eq!(bracket(&t, 0.25), (1, 0.0));
        let (i, w) = bracket(&t, 0.6);
        assert_eq!(i, 2);
        assert!((w - 0.4).abs() < 1e-12);
        assert_eq!(bracket(&t, 1.0), (4, 0.0));
    }
}
