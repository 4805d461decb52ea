//! Time-dependent coefficients of the linear and quadratic invariants.
//!
//! The quadratic invariant `D p² + E (pq+qp) + F q² + A p + B q + C` of
//! `H = p²/2m + f(t) q` obeys
//!
//! ```text
//! D' = -2E/m,  E' = -F/m,  F' = 0,
//! A' = 2 D f - B/m,  B' = 2 E f,  C' = f A.
//! ```
//!
//! `F`, `E`, `D` have closed forms. `B`, `A`, `C` are integrated in that order
//! with a classical fourth-order scheme (Simpson's rule on each link of the
//! chain) on a fine substep grid, followed by one Richardson extrapolation.

use serde::{Deserialize, Serialize};

use crate::algebra::{lvn_residual, QuadOp};
use crate::error::{Error, Result};
use crate::force::ForceProfile;
use crate::io::{fmt17, Sig17};
use crate::numerics::sample_derivative;

/// Largest substep used when integrating `B`, `A`, `C`.
const MAX_SUBSTEP: f64 = 1.0e-3;
/// Stencil width for differentiating the quadrature-produced coefficients.
const DERIVATIVE_STENCIL: usize = 9;

/// Integration constants `D0, E0, F0, A0, B0, C0` (values at `t = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantConstants {
    pub d0: f64,
    pub e0: f64,
    pub f0: f64,
    pub a0: f64,
    pub b0: f64,
    pub c0: f64,
}

impl Default for InvariantConstants {
    fn default() -> Self {
        InvariantConstants {
            d0: 1.0,
            e0: 0.0,
            f0: 1.0,
            a0: 0.0,
            b0: 0.0,
            c0: 0.0,
        }
    }
}

impl InvariantConstants {
    pub fn linear(a0: f64, b0: f64, c0: f64) -> Self {
        InvariantConstants {
            d0: 0.0,
            e0: 0.0,
            f0: 0.0,
            a0,
            b0,
            c0,
        }
    }

    pub fn determinant(&self) -> f64 {
        self.d0 * self.f0 - self.e0 * self.e0
    }

    fn as_array(&self) -> [f64; 6] {
        [self.d0, self.e0, self.f0, self.a0, self.b0, self.c0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Linear,
    Quadratic,
}

/// Sampled invariant coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffTrajectory {
    pub branch: Branch,
    pub mass: f64,
    pub constants: InvariantConstants,
    pub times: Vec<f64>,
    /// `f(t)` at each sample.
    pub force: Vec<f64>,
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    pub f: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

/// `samples` equally spaced times on `[0, t_end]`.
pub fn uniform_times(t_end: f64, samples: usize) -> Vec<f64> {
    let n = samples.max(2);
    (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect()
}

fn check_inputs(force: &ForceProfile, mass: f64, times: &[f64]) -> Result<()> {
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::InvalidMass(mass));
    }
    if times.len() < 2 {
        return Err(Error::NonIncreasingTimes(
            "need at least two samples".into(),
        ));
    }
    if times[0] != 0.0 {
        return Err(Error::NonIncreasingTimes(format!(
            "first sample is {}",
            times[0]
        )));
    }
    if let Some(w) = times
        .windows(2)
        .find(|w| !(w[1] > w[0]) || !w[1].is_finite())
    {
        return Err(Error::NonIncreasingTimes(format!(
            "{} followed by {}",
            w[0], w[1]
        )));
    }
    force.check_span(times[times.len() - 1])
}

struct ClosedForm {
    mass: f64,
    d0: f64,
    e0: f64,
    f0: f64,
}

impl ClosedForm {
    fn d(&self, t: f64) -> f64 {
        let m = self.mass;
        self.d0 - 2.0 * self.e0 * t / m + self.f0 * t * t / (m * m)
    }

    fn e(&self, t: f64) -> f64 {
        self.e0 - self.f0 * t / self.mass
    }

    fn d_dot(&self, t: f64) -> f64 {
        let m = self.mass;
        -2.0 * self.e0 / m + 2.0 * self.f0 * t / (m * m)
    }

    fn e_dot(&self) -> f64 {
        -self.f0 / self.mass
    }
}

/// Integrates `(B, A, C)` across the sample grid using `refine` times the
/// base substep count per interval.
fn integrate_chain(
    cf: &ClosedForm,
    force: &ForceProfile,
    times: &[f64],
    start: [f64; 3],
    refine: usize,
) -> Vec<[f64; 3]> {
    let m = cf.mass;
    let rhs = |t: f64, y: &[f64; 3]| -> [f64; 3] {
        let f = force.at(t);
        [2.0 * cf.e(t) * f, 2.0 * cf.d(t) * f - y[0] / m, f * y[1]]
    };
    let mut out = Vec::with_capacity(times.len());
    let mut y = start;
    out.push(y);
    let mut pieces = Vec::new();
    for w in times.windows(2) {
        pieces.clear();
        pieces.push(w[0]);
        pieces.extend(force.kinks_between(w[0], w[1]));
        pieces.push(w[1]);
        for p in pieces.windows(2) {
            advance(&rhs, &mut y, p[0], p[1], refine);
        }
        out.push(y);
    }
    out
}

fn advance(
    rhs: &impl Fn(f64, &[f64; 3]) -> [f64; 3],
    y: &mut [f64; 3],
    t0: f64,
    t1: f64,
    refine: usize,
) {
    let span = t1 - t0;
    let n = ((span / MAX_SUBSTEP).ceil() as usize).max(1) * refine;
    let h = span / n as f64;
    for s in 0..n {
        let t = t0 + s as f64 * h;
        let k1 = rhs(t, y);
        let y2 = [0, 1, 2].map(|i| y[i] + 0.5 * h * k1[i]);
        let k2 = rhs(t + 0.5 * h, &y2);
        let y3 = [0, 1, 2].map(|i| y[i] + 0.5 * h * k2[i]);
        let k3 = rhs(t + 0.5 * h, &y3);
        let y4 = [0, 1, 2].map(|i| y[i] + h * k3[i]);
        let k4 = rhs(t + h, &y4);
        *y = [0, 1, 2].map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
}

fn build(
    branch: Branch,
    force: &ForceProfile,
    mass: f64,
    init: InvariantConstants,
    times: &[f64],
) -> Result<CoeffTrajectory> {
    check_inputs(force, mass, times)?;
    if init.as_array().iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("integration constants must be finite".into()));
    }
    let cf = ClosedForm {
        mass,
        d0: init.d0,
        e0: init.e0,
        f0: init.f0,
    };
    let start = [init.b0, init.a0, init.c0];
    let coarse = integrate_chain(&cf, force, times, start, 1);
    let fine = integrate_chain(&cf, force, times, start, 2);
    let chain: Vec<[f64; 3]> = coarse
        .iter()
        .zip(&fine)
        .map(|(c, f)| [0, 1, 2].map(|i| f[i] + (f[i] - c[i]) / 15.0))
        .collect();

    let mut traj = CoeffTrajectory {
        branch,
        mass,
        constants: init,
        times: times.to_vec(),
        force: times.iter().map(|&t| force.at(t)).collect(),
        d: times.iter().map(|&t| cf.d(t)).collect(),
        e: times.iter().map(|&t| cf.e(t)).collect(),
        f: vec![init.f0; times.len()],
        b: chain.iter().map(|y| y[0]).collect(),
        a: chain.iter().map(|y| y[1]).collect(),
        c: chain.iter().map(|y| y[2]).collect(),
    };
    if branch == Branch::Linear {
        traj.b = vec![init.b0; times.len()];
        traj.a = times
            .iter()
            .map(|&t| init.a0 - init.b0 * t / mass)
            .collect();
    }
    Ok(traj)
}

/// Coefficients of the quadratic invariant on the given sample times.
pub fn solve_quadratic_coeffs(
    force: &ForceProfile,
    mass: f64,
    init: InvariantConstants,
    times: &[f64],
) -> Result<CoeffTrajectory> {
    build(Branch::Quadratic, force, mass, init, times)
}

/// Coefficients of the linear invariant `A p + B q + C`.
pub fn solve_linear_coeffs(
    force: &ForceProfile,
    mass: f64,
    a0: f64,
    b0: f64,
    c0: f64,
    times: &[f64],
) -> Result<CoeffTrajectory> {
    build(
        Branch::Linear,
        force,
        mass,
        InvariantConstants::linear(a0, b0, c0),
        times,
    )
}

/// Conserved scale `ς = sqrt(D F - E²)` and its observed drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Casimir {
    pub sigma: f64,
    /// `max_k |D F - E² - ς²| / ς²`.
    pub max_relative_drift: f64,
}

/// Drift beyond this is reported as an error rather than a number.
const CASIMIR_GUARD: f64 = 1.0e-9;

pub fn casimir_sigma(traj: &CoeffTrajectory) -> Result<Casimir> {
    let k = traj.constants;
    let det = k.determinant();
    if !(det > 0.0) {
        return Err(Error::NonElliptic {
            d0: k.d0,
            e0: k.e0,
            f0: k.f0,
            det,
        });
    }
    let drift = (0..traj.len())
        .map(|i| (traj.d[i] * traj.f[i] - traj.e[i] * traj.e[i] - det).abs() / det)
        .fold(0.0, f64::max);
    if drift > CASIMIR_GUARD {
        return Err(Error::ConservationDrift(format!(
            "D F - E^2 relative drift {drift:e}"
        )));
    }
    Ok(Casimir {
        sigma: det.sqrt(),
        max_relative_drift: drift,
    })
}

impl CoeffTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        self.times[self.len() - 1]
    }

    /// `[D, E, F, A, B, C]` at sample `k`.
    pub fn coeffs(&self, k: usize) -> [f64; 6] {
        [
            self.d[k], self.e[k], self.f[k], self.a[k], self.b[k], self.c[k],
        ]
    }

    pub fn invariant(&self, k: usize) -> QuadOp {
        QuadOp::from_real(self.coeffs(k))
    }

    pub fn hamiltonian(&self, k: usize) -> QuadOp {
        QuadOp::hamiltonian(self.mass, self.force[k])
    }

    /// `dI/dt` at sample `k`: analytic for `D, E, F`, a high-order centered
    /// finite difference for the quadrature-produced `A, B, C`.
    pub fn d_invariant(&self, k: usize) -> QuadOp {
        let cf = ClosedForm {
            mass: self.mass,
            d0: self.constants.d0,
            e0: self.constants.e0,
            f0: self.constants.f0,
        };
        let t = self.times[k];
        let (d_dot, e_dot) = match self.branch {
            Branch::Quadratic => (cf.d_dot(t), cf.e_dot()),
            Branch::Linear => (0.0, 0.0),
        };
        let fd = |v: &[f64]| sample_derivative(&self.times, v, k, DERIVATIVE_STENCIL);
        QuadOp::from_real([d_dot, e_dot, 0.0, fd(&self.a), fd(&self.b), fd(&self.c)])
    }

    pub fn lvn_residual(&self, k: usize) -> QuadOp {
        lvn_residual(
            &self.invariant(k),
            &self.d_invariant(k),
            &self.hamiltonian(k),
        )
    }

    /// Largest coefficient max-norm of the Liouville–von Neumann residual and where it occurs.
    pub fn max_lvn_residual(&self) -> (f64, f64) {
        (0..self.len())
            .map(|k| (self.lvn_residual(k).max_norm(), self.times[k]))
            .fold((0.0, 0.0), |acc, x| if x.0 > acc.0 { x } else { acc })
    }

    /// Index of the sample equal to `t` (within a relative `1e-12`).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * self.t_end().max(1.0);
        let i = self.times.partition_point(|&s| s < t - tol);
        (i < self.len() && (self.times[i] - t).abs() <= tol).then_some(i)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,D,E,F,A,B,C\n");
        for k in 0..self.len() {
            let row: Vec<String> = std::iter::once(self.times[k])
                .chain(self.coeffs(k))
                .map(fmt17)
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let col = |v: &[f64]| serde_json::to_value(crate::io::sig17_vec(v)).unwrap();
        let k = self.constants;
        serde_json::json!({
            "branch": self.branch,
            "mass": Sig17(self.mass),
            "constants": {
                "D0": Sig17(k.d0), "E0": Sig17(k.e0), "F0": Sig17(k.f0),
                "A0": Sig17(k.a0), "B0": Sig17(k.b0), "C0": Sig17(k.c0),
            },
            "t": col(&self.times),
            "D": col(&self.d),
            "E": col(&self.e),
            "F": col(&self.f),
            "A": col(&self.a),
            "B": col(&self.b),
            "C": col(&self.c),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn konst(v: f64) -> ForceProfile {
        ForceProfile::constant(v)
    }

    #[test]
    fn free_static_form_stays_put() {
        let times = uniform_times(5.0, 101);
        let init = InvariantConstants {
            d0: 1.0,
            e0: 0.0,
            f0: 0.0,
            ..Default::default()
        };
        let tr = solve_quadratic_coeffs(&konst(0.0), 1.0, init, &times).unwrap();
        assert!(tr.d.iter().all(|&d| d == 1.0));
    }

    #[test]
    fn closed_form_values_at_two() {
        let times = uniform_times(2.0, 21);
        let tr = solve_quadratic_coeffs(
            &ForceProfile::parse("sin(t)").unwrap(),
            1.0,
            Default::default(),
            &times,
        )
        .unwrap();
        let k = tr.len() - 1;
        assert_eq!(tr.e[k], -2.0);
        assert_eq!(tr.d[k], 5.0);
        assert!(tr.f.iter().all(|&f| f == 1.0));
    }

    #[test]
    fn constant_force_quadratic_chain() {
        let times = uniform_times(3.0, 61);
        let init = InvariantConstants {
            d0: 1.0,
            e0: 0.0,
            f0: 0.0,
            ..Default::default()
        };
        let tr = solve_quadratic_coeffs(&konst(1.0), 1.0, init, &times).unwrap();
        for (k, &t) in tr.times.iter().enumerate() {
            assert!((tr.a[k] - 2.0 * t).abs() < 1e-12);
            assert!(tr.b[k].abs() < 1e-15);
            assert!((tr.c[k] - t * t).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_constant_force() {
        let times = uniform_times(4.0, 81);
        let tr = solve_linear_coeffs(&konst(1.0), 1.0, 0.0, 1.0, 0.0, &times).unwrap();
        for (k, &t) in tr.times.iter().enumerate() {
            assert_eq!(tr.a[k], -t);
            assert!((tr.c[k] + 0.5 * t * t).abs() < 1e-12);
        }
        assert!(tr.max_lvn_residual().0 < 1e-10);
    }

    #[test]
    fn free_linear_invariant_is_constant() {
        let times = uniform_times(4.0, 41);
        let tr = solve_linear_coeffs(&konst(0.0), 1.0, 0.7, 0.0, -0.2, &times).unwrap();
        assert!(tr.a.iter().all(|&a| a == 0.7));
        assert!(tr.c.iter().all(|&c| c == -0.2));
    }

    #[test]
    fn zero_b0_gives_integrated_force() {
        let times = uniform_times(6.0, 301);
        let tr = solve_linear_coeffs(
            &ForceProfile::parse("cos(t)").unwrap(),
            2.0,
            1.5,
            0.0,
            0.3,
            &times,
        )
        .unwrap();
        for (k, &t) in tr.times.iter().enumerate() {
            assert_eq!(tr.a[k], 1.5);
            assert!((tr.c[k] - (0.3 + 1.5 * t.sin())).abs() < 1e-12);
        }
    }

    #[test]
    fn casimir_examples() {
        let times = uniform_times(10.0, 201);
        let tr = solve_quadratic_coeffs(&konst(0.0), 1.0, Default::default(), &times).unwrap();
        let cas = casimir_sigma(&tr).unwrap();
        assert_eq!(cas.sigma, 1.0);
        assert!(cas.max_relative_drift < 1e-12);

        let init = InvariantConstants {
            d0: 2.0,
            f0: 2.0,
            ..Default::default()
        };
        let tr = solve_quadratic_coeffs(&konst(0.0), 1.0, init, &times).unwrap();
        assert_eq!(casimir_sigma(&tr).unwrap().sigma, 2.0);

        let init = InvariantConstants {
            d0: 1.0,
            e0: 1.0,
            f0: 1.0,
            ..Default::default()
        };
        let tr = solve_quadratic_coeffs(&konst(0.0), 1.0, init, &times).unwrap();
        assert!(matches!(casimir_sigma(&tr), Err(Error::NonElliptic { .. })));
    }

    #[test]
    fn input_validation() {
        let f = konst(0.0);
        assert!(matches!(
            solve_quadratic_coeffs(&f, 1.0, Default::default(), &[0.0, 1.0, 1.0]),
            Err(Error::NonIncreasingTimes(_))
        ));
        assert!(matches!(
            solve_quadratic_coeffs(&f, 1.0, Default::default(), &[0.5, 1.0]),
            Err(Error::NonIncreasingTimes(_))
        ));
        assert!(matches!(
            solve_quadratic_coeffs(&f, 0.0, Default::default(), &[0.0, 1.0]),
            Err(Error::InvalidMass(_))
        ));
        let table = ForceProfile::table(vec![(0.0, 1.0), (1.0, 1.0)]).unwrap();
        assert!(matches!(
            solve_quadratic_coeffs(&table, 1.0, Default::default(), &uniform_times(2.0, 5)),
            Err(Error::TableSpan { .. })
        ));
    }

    #[test]
    fn csv_header_and_rows() {
        let tr =
            solve_quadratic_coeffs(&konst(0.0), 1.0, Default::default(), &uniform_times(1.0, 3))
                .unwrap();
        let csv = tr.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,D,E,F,A,B,C"));
        assert_eq!(lines.count(), 3);
    }
}
