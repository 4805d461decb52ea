//! Direct numerical integration of `i∂_tψ = [p²/2m + f(t) q]ψ`.

use num_complex::Complex64;
use serde::Serialize;

use crate::algebra::{apply_quadop, QuadOp};
use crate::error::{Error, Result};
use crate::force::ForceProfile;
use crate::grid::{GridSpec, GridWavefunction};
use crate::io::{sig17_vec, Sig17};

/// Norm fraction near the momentum or position edge that triggers a warning.
pub const RESOLUTION_WARN: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SplitStep,
    CrankNicolson,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::SplitStep => "split-step",
            Method::CrankNicolson => "crank-nicolson",
        }
    }
}

/// A propagated state sampled at the requested times.
#[derive(Debug, Clone)]
pub struct PropagationRun {
    pub grid: GridSpec,
    pub method: Method,
    pub mass: f64,
    pub dt: f64,
    pub t_end: f64,
    pub steps: usize,
    pub snapshot_times: Vec<f64>,
    pub snapshots: Vec<GridWavefunction>,
    /// Largest relative change of the norm over the run.
    pub norm_drift: f64,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct RunMetadata<'a> {
    method: Method,
    mass: Sig17,
    force: String,
    grid_points: usize,
    grid_extent: Sig17,
    dt: Sig17,
    t_end: Sig17,
    steps: usize,
    snapshot_times: Vec<Sig17>,
    norm_drift: Sig17,
    warnings: &'a [String],
}

impl PropagationRun {
    pub fn snapshot_at(&self, t: f64) -> Option<&GridWavefunction> {
        let tol = 1e-12 * self.t_end.max(1.0);
        self.snapshot_times
            .iter()
            .position(|s| (s - t).abs() <= tol)
            .map(|i| &self.snapshots[i])
    }

    pub fn final_state(&self) -> &GridWavefunction {
        self.snapshots
            .last()
            .expect("runs always hold the initial snapshot")
    }

    pub fn metadata_json(&self, force: &ForceProfile) -> String {
        crate::io::to_json_pretty(&RunMetadata {
            method: self.method,
            mass: Sig17(self.mass),
            force: force.describe(),
            grid_points: self.grid.points,
            grid_extent: Sig17(self.grid.extent),
            dt: Sig17(self.dt),
            t_end: Sig17(self.t_end),
            steps: self.steps,
            snapshot_times: sig17_vec(&self.snapshot_times),
            norm_drift: Sig17(self.norm_drift),
            warnings: &self.warnings,
        })
    }
}

/// Sorted snapshot list with `0` and `t_end` included.
fn snapshot_schedule(t_end: f64, requested: &[f64]) -> Result<Vec<f64>> {
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::NonIncreasingTimes(format!("horizon {t_end}")));
    }
    let mut times: Vec<f64> = requested.to_vec();
    if times
        .iter()
        .any(|t| !t.is_finite() || *t < 0.0 || *t > t_end * (1.0 + 1e-12))
    {
        return Err(Error::NonIncreasingTimes(format!(
            "snapshot times must lie in [0, {t_end}]"
        )));
    }
    times.push(0.0);
    times.push(t_end);
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * t_end.max(1.0));
    Ok(times)
}

fn validate(mass: f64, dt: f64) -> Result<()> {
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(Error::InvalidMass(mass));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::NonIncreasingTimes(format!("time step {dt}")));
    }
    Ok(())
}

fn resolution_warning(psi: &GridWavefunction, t: f64) -> Option<String> {
    let (pos, mom) = psi.edge_weight(0.05);
    (pos > RESOLUTION_WARN || mom > RESOLUTION_WARN)
        .then(|| format!("t = {t}: edge weight {pos:e} in position, {mom:e} in momentum"))
}

/// Runs `stepper` between consecutive snapshot times with steps no longer
/// than `dt`, landing exactly on every snapshot.
#[allow(clippy::too_many_arguments)]
fn drive(
    psi0: &GridWavefunction,
    method: Method,
    force: &ForceProfile,
    mass: f64,
    dt: f64,
    t_end: f64,
    snapshot_times: &[f64],
    mut stepper: impl FnMut(&mut GridWavefunction, f64, f64) -> Result<()>,
) -> Result<PropagationRun> {
    validate(mass, dt)?;
    psi0.check()?;
    force.check_span(t_end)?;
    let times = snapshot_schedule(t_end, snapshot_times)?;
    let norm0 = psi0.norm_sqr();
    let mut psi = psi0.clone();
    let mut snapshots = vec![psi.clone()];
    let mut warnings: Vec<String> = resolution_warning(&psi, 0.0).into_iter().collect();
    let mut norm_drift: f64 = 0.0;
    let mut steps = 0;
    for w in times.windows(2) {
        let span = w[1] - w[0];
        let count = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
        let h = span / count as f64;
        for i in 0..count {
            stepper(&mut psi, w[0] + i as f64 * h, h)?;
            steps += 1;
        }
        norm_drift = norm_drift.max((psi.norm_sqr() / norm0 - 1.0).abs());
        if warnings.len() < 8 {
            warnings.extend(resolution_warning(&psi, w[1]));
        }
        snapshots.push(psi.clone());
    }
    Ok(PropagationRun {
        grid: psi0.grid,
        method,
        mass,
        dt,
        t_end,
        steps,
        snapshot_times: times,
        snapshots,
        norm_drift,
        warnings,
    })
}

/// Strang splitting: half potential kick, exact kinetic step, half kick,
/// with `f` evaluated at the step midpoint.
pub fn split_step_evolve(
    psi0: &GridWavefunction,
    force: &ForceProfile,
    mass: f64,
    dt: f64,
    t_end: f64,
    snapshot_times: &[f64],
) -> Result<PropagationRun> {
    let grid = psi0.grid;
    let k2: Vec<f64> = grid.wavenumbers().iter().map(|k| k * k).collect();
    let q = grid.positions();
    let stepper = |psi: &mut GridWavefunction, t: f64, h: f64| -> Result<()> {
        let f = force.eval(t + 0.5 * h)?;
        let kick: Vec<Complex64> = q
            .iter()
            .map(|x| Complex64::from_polar(1.0, -0.5 * h * f * x))
            .collect();
        for (z, k) in psi.amplitudes.iter_mut().zip(&kick) {
            *z *= k;
        }
        psi.map_momentum(|j, _| Complex64::from_polar(1.0, -0.5 * h * k2[j] / mass));
        for (z, k) in psi.amplitudes.iter_mut().zip(&kick) {
            *z *= k;
        }
        Ok(())
    };
    drive(
        psi0,
        Method::SplitStep,
        force,
        mass,
        dt,
        t_end,
        snapshot_times,
        stepper,
    )
}

/// Solves `a_j x_j + o (x_{j-1} + x_{j+1}) = r_j` with periodic wrap-around
/// (constant off-diagonal `o`), via Thomas plus a Sherman–Morrison correction.
fn solve_periodic_tridiagonal(
    diag: &[Complex64],
    off: Complex64,
    rhs: &[Complex64],
) -> Vec<Complex64> {
    let n = diag.len();
    let gamma = -diag[0];
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= off * off / gamma;
    let thomas = |r: &[Complex64]| -> Vec<Complex64> {
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        let mut d = vec![Complex64::new(0.0, 0.0); n];
        c[0] = off / b[0];
        d[0] = r[0] / b[0];
        for j in 1..n {
            let m = b[j] - off * c[j - 1];
            c[j] = off / m;
            d[j] = (r[j] - off * d[j - 1]) / m;
        }
        let mut x = d;
        for j in (0..n - 1).rev() {
            let next = x[j + 1];
            x[j] -= c[j] * next;
        }
        x
    };
    let x = thomas(rhs);
    let mut u = vec![Complex64::new(0.0, 0.0); n];
    u[0] = gamma;
    u[n - 1] = off;
    let z = thomas(&u);
    // v = (1, 0, ..., 0, off/gamma)
    let vx = x[0] + off / gamma * x[n - 1];
    let vz = z[0] + off / gamma * z[n - 1];
    let factor = vx / (Complex64::new(1.0, 0.0) + vz);
    x.iter().zip(&z).map(|(a, b)| a - factor * b).collect()
}

/// Crank–Nicolson with a three-point Laplacian. Second order in `dt` but
/// only second order in the grid spacing, so it agrees with the split-step
/// result to a looser tolerance.
pub fn crank_nicolson_evolve(
    psi0: &GridWavefunction,
    force: &ForceProfile,
    mass: f64,
    dt: f64,
    t_end: f64,
    snapshot_times: &[f64],
) -> Result<PropagationRun> {
    let grid = psi0.grid;
    let q = grid.positions();
    let dx2 = grid.spacing().powi(2);
    let kin = 1.0 / (2.0 * mass * dx2);
    let stepper = |psi: &mut GridWavefunction, t: f64, h: f64| -> Result<()> {
        let f = force.eval(t + 0.5 * h)?;
        let half = Complex64::new(0.0, 0.5 * h);
        let n = psi.len();
        let a = &psi.amplitudes;
        let rhs: Vec<Complex64> = (0..n)
            .map(|j| {
                let lap = a[(j + n - 1) % n] + a[(j + 1) % n] - 2.0 * a[j];
                let h_psi = -kin * lap + f * q[j] * a[j];
                a[j] - half * h_psi
            })
            .collect();
        let diag: Vec<Complex64> = q.iter().map(|x| 1.0 + half * (2.0 * kin + f * x)).collect();
        psi.amplitudes = solve_periodic_tridiagonal(&diag, -half * kin, &rhs);
        Ok(())
    };
    drive(
        psi0,
        Method::CrankNicolson,
        force,
        mass,
        dt,
        t_end,
        snapshot_times,
        stepper,
    )
}

/// `⟨ψ|X|ψ⟩ / ⟨ψ|ψ⟩`.
pub fn expectation(psi: &GridWavefunction, op: &QuadOp) -> Result<Complex64> {
    Ok(psi.inner(&apply_quadop(op, psi)?)? / psi.norm_sqr())
}

/// `|⟨ψ₁|ψ₂⟩|` after normalizing both states.
pub fn fidelity(a: &GridWavefunction, b: &GridWavefunction) -> Result<f64> {
    let overlap = a.inner(b)?.norm() / (a.norm() * b.norm());
    Ok(overlap.min(1.0))
}
