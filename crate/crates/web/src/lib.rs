//! Browser bindings for the interactive demo in `www/`.

use wasm_bindgen::prelude::*;

use lrinv::auxiliary::{
    solve_quadratic_coeffs, uniform_times, CoeffTrajectory, InvariantConstants,
};
use lrinv::propagator::{fidelity, split_step_evolve};
use lrinv::transforms::transforms_along;
use lrinv::wavefunctions::LRSolution;
use lrinv::{ForceProfile, GridSpec};

const SAMPLE_DT: f64 = 0.005;

fn err(e: lrinv::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn constants(c: &[f64]) -> Result<InvariantConstants, JsError> {
    let &[d0, e0, f0, a0, b0, c0] = c else {
        return Err(JsError::new(
            "expected six constants D0, E0, F0, A0, B0, C0",
        ));
    };
    Ok(InvariantConstants {
        d0,
        e0,
        f0,
        a0,
        b0,
        c0,
    })
}

fn trajectory(force: &ForceProfile, c: &[f64], t_end: f64) -> Result<CoeffTrajectory, JsError> {
    if !(t_end > 0.0 && t_end <= 50.0) {
        return Err(JsError::new("end time must lie in (0, 50]"));
    }
    let samples = (t_end / SAMPLE_DT).round() as usize + 1;
    solve_quadratic_coeffs(
        force,
        1.0,
        constants(c)?,
        &uniform_times(t_end, samples.max(9)),
    )
    .map_err(err)
}

/// Rows `t, D, E, F, A, B, C` flattened, `rows` rows on `[0, t_end]`.
#[wasm_bindgen]
pub fn coefficient_curves(
    force: &str,
    constants: &[f64],
    t_end: f64,
    rows: usize,
) -> Result<Vec<f64>, JsError> {
    let force = ForceProfile::parse(force).map_err(err)?;
    let traj = trajectory(&force, constants, t_end)?;
    let last = traj.len() - 1;
    let rows = rows.clamp(2, traj.len());
    let mut out = Vec::with_capacity(7 * rows);
    for k in (0..rows).map(|i| i * last / (rows - 1)) {
        out.push(traj.times[k]);
        out.extend(traj.coeffs(k));
    }
    Ok(out)
}

/// `q, |ψ_n|², Re ψ_n` flattened for the Lewis–Riesenfeld solution at time `t`.
#[wasm_bindgen]
pub fn eigenstate_density(
    force: &str,
    constants: &[f64],
    n: usize,
    t: f64,
    extent: f64,
) -> Result<Vec<f64>, JsError> {
    let force = ForceProfile::parse(force).map_err(err)?;
    let traj = trajectory(&force, constants, t.max(SAMPLE_DT))?;
    let k = if t > 0.0 { traj.len() - 1 } else { 0 };
    let grid = GridSpec::new(extent, 1024).map_err(err)?;
    let records = transforms_along(&traj).map_err(err)?;
    let sol = LRSolution::build(n, &traj, &records, &grid).map_err(err)?;
    let psi = sol.state(k);
    let mut out = Vec::with_capacity(3 * grid.points);
    for (q, z) in grid.positions().into_iter().zip(&psi.amplitudes) {
        out.extend([q, z.norm_sqr(), z.re]);
    }
    Ok(out)
}

/// `t, 1 - F` pairs comparing the analytic `|n, t⟩` with split-step
/// propagation of `|n, 0⟩`, at `points` equally spaced times.
#[wasm_bindgen]
pub fn fidelity_trace(
    force: &str,
    constants: &[f64],
    n: usize,
    t_end: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    let force = ForceProfile::parse(force).map_err(err)?;
    let traj = trajectory(&force, constants, t_end)?;
    let grid = GridSpec::new(160.0, 2048).map_err(err)?;
    let records = transforms_along(&traj).map_err(err)?;
    let sol = LRSolution::build(n, &traj, &records, &grid).map_err(err)?;
    let last = traj.len() - 1;
    let points = points.clamp(2, 200);
    let picks: Vec<usize> = (0..points).map(|i| i * last / (points - 1)).collect();
    let snapshots: Vec<f64> = picks.iter().map(|&k| traj.times[k]).collect();
    let run =
        split_step_evolve(&sol.state(0), &force, 1.0, 1e-3, t_end, &snapshots).map_err(err)?;
    let mut out = Vec::with_capacity(2 * points);
    for (&k, psi) in picks.iter().zip(&run.snapshots) {
        out.push(traj.times[k]);
        out.push(1.0 - fidelity(&sol.state(k), psi).map_err(err)?);
    }
    Ok(out)
}
