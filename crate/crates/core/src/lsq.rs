//! Dense Levenberg–Marquardt for small parameter counts.

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when the relative cost reduction falls below this.
    pub ftol: f64,
    /// Stop when the relative step falls below this.
    pub xtol: f64,
    pub initial_lambda: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            ftol: 1e-30,
            xtol: 1e-15,
            initial_lambda: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub x: Vec<f64>,
    /// Half the sum of squared residuals.
    pub cost: f64,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

fn cost_of(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

fn jacobian(f: &impl Fn(&[f64]) -> Vec<f64>, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    // Column-major: jac[j][i] = d r_i / d x_j, central differences.
    let mut jac = Vec::with_capacity(x.len());
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let h = 1e-6 * x[j].abs().max(1e-3);
        xp[j] = x[j] + h;
        let rp = f(&xp);
        xp[j] = x[j] - h;
        let rm = f(&xp);
        xp[j] = x[j];
        jac.push((0..m).map(|i| (rp[i] - rm[i]) / (2.0 * h)).collect());
    }
    jac
}

/// Solves `a x = b` for a small symmetric positive definite `a` (Cholesky).
fn solve_spd(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    Some(x)
}

/// Minimizes `½‖r(x)‖²` from `x0`.
pub fn levenberg_marquardt(
    residual: impl Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
    opts: &LmOptions,
) -> LmResult {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = residual(&x);
    let m = r.len();
    let mut cost = cost_of(&r);
    let mut lambda = opts.initial_lambda;
    let mut iterations = 0;

    while iterations < opts.max_iterations && cost.is_finite() && cost > 0.0 {
        iterations += 1;
        let jac = jacobian(&residual, &x, m);
        let mut jtj = vec![vec![0.0; n]; n];
        let mut jtr = vec![0.0; n];
        for a in 0..n {
            for b in 0..=a {
                let s: f64 = jac[a].iter().zip(&jac[b]).map(|(u, v)| u * v).sum();
                jtj[a][b] = s;
                jtj[b][a] = s;
            }
            jtr[a] = jac[a].iter().zip(&r).map(|(u, v)| u * v).sum();
        }

        let mut accepted = false;
        for _ in 0..30 {
            let mut damped = jtj.clone();
            for i in 0..n {
                damped[i][i] += lambda * jtj[i][i].max(1e-12);
            }
            let rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let Some(step) = solve_spd(&damped, &rhs) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            let rt = residual(&trial);
            let ct = cost_of(&rt);
            if ct.is_finite() && ct < cost {
                let rel_drop = (cost - ct) / cost;
                let step_norm = step.iter().map(|v| v * v).sum::<f64>().sqrt();
                let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                x = trial;
                r = rt;
                cost = ct;
                lambda = (lambda * 0.3).max(1e-15);
                accepted = true;
                if rel_drop < opts.ftol || step_norm <= opts.xtol * (x_norm + opts.xtol) {
                    return LmResult {
                        x,
                        cost,
                        residuals: r,
                        iterations,
                    };
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    LmResult {
        x,
        cost,
        residuals: r,
        iterations,
    }
}
