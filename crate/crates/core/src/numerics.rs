//! Small numerical kernels shared by the solvers.

use std::f64::consts::PI;

/// Finite-difference weights for derivatives of order `0..=max_order` at `x0`
/// from samples at `xs` (Fornberg's recursion). `w[k][j]` multiplies `f(xs[j])`
/// in the `k`-th derivative.
pub fn fd_weights(x0: f64, xs: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] *= c4 / c3;
        }
        c1 = c2;
    }
    c
}

/// Index window of `width` consecutive samples, centered on `k` where possible.
pub fn stencil_window(len: usize, k: usize, width: usize) -> std::ops::Range<usize> {
    let width = width.min(len);
    let half = width / 2;
    let start = k.saturating_sub(half).min(len - width);
    start..start + width
}

/// First derivative at sample `k` from a `width`-point stencil.
pub fn sample_derivative(times: &[f64], values: &[f64], k: usize, width: usize) -> f64 {
    let w = stencil_window(times.len(), k, width);
    let weights = fd_weights(times[k], &times[w.clone()], 1);
    weights[1].iter().zip(&values[w]).map(|(a, b)| a * b).sum()
}

/// Normalized Hermite functions `h_0(x) .. h_{n_max}(x)` (eigenfunctions of
/// `p² + q²` with eigenvalues `2n+1`), by the stable three-term recurrence.
pub fn hermite_functions(n_max: usize, x: f64) -> Vec<f64> {
    let mut h = Vec::with_capacity(n_max + 1);
    h.push(PI.powf(-0.25) * (-0.5 * x * x).exp());
    if n_max >= 1 {
        h.push(2f64.sqrt() * x * h[0]);
    }
    for n in 1..n_max {
        let next = (2.0 / (n + 1) as f64).sqrt() * x * h[n]
            - (n as f64 / (n + 1) as f64).sqrt() * h[n - 1];
        h.push(next);
    }
    h
}

/// Cumulative integral `∫_{t_0}^{t_k} g` on a (possibly nonuniform) sample grid,
/// exact for quadratics, and for cubics away from the ends of a uniform grid.
pub fn cumulative_integral(times: &[f64], values: &[f64]) -> Vec<f64> {
    let n = times.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = 0.5 * (values[0] + values[1]) * (times[1] - times[0]);
        return out;
    }
    for k in 0..n - 1 {
        // Quadratics through the left and right neighbour triples, averaged so
        // the leading error terms cancel on smooth data.
        let (a, b) = (times[k], times[k + 1]);
        let left = (k >= 1)
            .then(|| integrate_quadratic(&times[k - 1..k + 2], &values[k - 1..k + 2], a, b));
        let right =
            (k + 2 < n).then(|| integrate_quadratic(&times[k..k + 3], &values[k..k + 3], a, b));
        let step = match (left, right) {
            (Some(l), Some(r)) => 0.5 * (l + r),
            (Some(v), None) | (None, Some(v)) => v,
            (None, None) => unreachable!(),
        };
        out[k + 1] = out[k] + step;
    }
    out
}

fn integrate_quadratic(ts: &[f64], vs: &[f64], a: f64, b: f64) -> f64 {
    // Lagrange basis integrated exactly with 3-point Gauss-Legendre.
    let nodes = [-(0.6f64).sqrt(), 0.0, (0.6f64).sqrt()];
    let weights = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut s = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        let t = mid + half * x;
        let mut v = 0.0;
        for i in 0..3 {
            let mut l = 1.0;
            for j in 0..3 {
                if i != j {
                    l *= (t - ts[j]) / (ts[i] - ts[j]);
                }
            }
            v += l * vs[i];
        }
        s += w * v;
    }
    s * half
}
