//! Whether a quadratic invariant is a multiple of the square of a linear one,
//! and the check that linear invariants map solutions to solutions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::apply_quadop;
use crate::auxiliary::{solve_linear_coeffs, Branch, CoeffTrajectory, InvariantConstants};
use crate::error::{Error, Result};
use crate::force::ForceProfile;
use crate::grid::GridWavefunction;
use crate::io::Sig17;
use crate::lsq::{levenberg_marquardt, LmOptions};
use crate::propagator::{fidelity, split_step_evolve};

/// Residual below which a quadratic invariant counts as a square.
pub const SQUARE_TOL: f64 = 1e-8;

/// `c · I_l²` as a quadratic trajectory.
pub fn square_linear(traj_l: &CoeffTrajectory, c: f64) -> CoeffTrajectory {
    let sq = |i: usize| {
        let (a, b, cc) = (traj_l.a[i], traj_l.b[i], traj_l.c[i]);
        [
            c * a * a,
            c * a * b,
            c * b * b,
            2.0 * c * a * cc,
            2.0 * c * b * cc,
            c * cc * cc,
        ]
    };
    let rows: Vec<[f64; 6]> = (0..traj_l.len()).map(sq).collect();
    let column = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<_>>();
    let first = rows.first().copied().unwrap_or([0.0; 6]);
    CoeffTrajectory {
        branch: Branch::Quadratic,
        mass: traj_l.mass,
        constants: InvariantConstants {
            d0: first[0],
            e0: first[1],
            f0: first[2],
            a0: first[3],
            b0: first[4],
            c0: first[5],
        },
        times: traj_l.times.clone(),
        force: traj_l.force.clone(),
        d: column(0),
        e: column(1),
        f: column(2),
        a: column(3),
        b: column(4),
        c: column(5),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    IsSquare,
    NotSquare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchMethod {
    /// `DF - E²` is nonzero somewhere, so no square can match.
    RankCertificate,
    LeastSquares,
}

/// Outcome of [`match_square`]. The linear constants are normalized to
/// `A₀² + B₀² = 1`, which removes the scale freedom `(c, A₀, B₀, C₀) →
/// (c/λ², λA₀, λB₀, λC₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatchReport {
    pub c: f64,
    pub a0: f64,
    pub b0: f64,
    pub c0: f64,
    /// Max-norm of the six coefficient equations over all samples, or the
    /// largest `|DF - E²|` when the rank certificate decided.
    pub residual: f64,
    pub rank_gap: f64,
    pub verdict: Verdict,
    pub method: MatchMethod,
    pub starts: usize,
}

#[derive(Serialize)]
struct ReportJson {
    c: Sig17,
    a0: Sig17,
    b0: Sig17,
    c0: Sig17,
    residual: Sig17,
    rank_gap: Sig17,
    verdict: Verdict,
    method: MatchMethod,
    starts: usize,
}

impl SquareMatchReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(ReportJson {
            c: Sig17(self.c),
            a0: Sig17(self.a0),
            b0: Sig17(self.b0),
            c0: Sig17(self.c0),
            residual: Sig17(self.residual),
            rank_gap: Sig17(self.rank_gap),
            verdict: self.verdict,
            method: self.method,
            starts: self.starts,
        })
        .unwrap()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MatchOptions {
    pub rank_shortcut: bool,
    pub starts: usize,
    pub seed: u64,
    /// Random starts draw `c ∈ [-c_box, c_box]` and `C₀ ∈ [-c0_box, c0_box]`.
    pub c_box: f64,
    pub c0_box: f64,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            rank_shortcut: true,
            starts: 16,
            seed: 0x005e_ed0f_c0de,
            c_box: 4.0,
            c0_box: 3.0,
        }
    }
}

fn rank_gap(traj: &CoeffTrajectory) -> f64 {
    (0..traj.len())
        .map(|k| (traj.d[k] * traj.f[k] - traj.e[k] * traj.e[k]).abs())
        .fold(0.0, f64::max)
}

/// Linear invariants of the same system, written as
/// `C(t) = C₀ + A₀ G_a(t) + B₀ G_b(t)` with `A = A₀ - B₀t/m`, `B = B₀`.
struct LinearBasis {
    times: Vec<f64>,
    mass: f64,
    ga: Vec<f64>,
    gb: Vec<f64>,
}

impl LinearBasis {
    fn new(force: &ForceProfile, mass: f64, times: &[f64]) -> Result<Self> {
        let ua = solve_linear_coeffs(force, mass, 1.0, 0.0, 0.0, times)?;
        let ub = solve_linear_coeffs(force, mass, 0.0, 1.0, 0.0, times)?;
        Ok(LinearBasis {
            times: times.to_vec(),
            mass,
            ga: ua.c,
            gb: ub.c,
        })
    }

    fn at(&self, k: usize, a0: f64, b0: f64, c0: f64) -> (f64, f64, f64) {
        (
            a0 - b0 * self.times[k] / self.mass,
            b0,
            c0 + a0 * self.ga[k] + b0 * self.gb[k],
        )
    }
}

fn square_residuals(traj: &CoeffTrajectory, basis: &LinearBasis, p: &[f64]) -> Vec<f64> {
    let (c, phi, c0) = (p[0], p[1], p[2]);
    let mut out = Vec::with_capacity(6 * traj.len());
    for k in 0..traj.len() {
        let (a, b, cc) = basis.at(k, phi.cos(), phi.sin(), c0);
        out.extend_from_slice(&[
            traj.d[k] - c * a * a,
            traj.e[k] - c * a * b,
            traj.f[k] - c * b * b,
            traj.a[k] - 2.0 * c * a * cc,
            traj.b[k] - 2.0 * c * b * cc,
            traj.c[k] - c * cc * cc,
        ]);
    }
    out
}

/// Best `(c, A₀, B₀, C₀)` with `I_q ≈ c I_l²` over every sample of `traj_q`.
pub fn match_square(
    traj_q: &CoeffTrajectory,
    force: &ForceProfile,
    mass: f64,
    opts: &MatchOptions,
) -> Result<SquareMatchReport> {
    let gap = rank_gap(traj_q);
    let scale = (0..traj_q.len())
        .map(|k| {
            traj_q.d[k]
                .abs()
                .max(traj_q.e[k].abs())
                .max(traj_q.f[k].abs())
        })
        .fold(1.0, f64::max);
    if opts.rank_shortcut && gap > SQUARE_TOL * scale * scale {
        return Ok(SquareMatchReport {
            c: 0.0,
            a0: 0.0,
            b0: 0.0,
            c0: 0.0,
            residual: gap,
            rank_gap: gap,
            verdict: Verdict::NotSquare,
            method: MatchMethod::RankCertificate,
            starts: 0,
        });
    }

    let basis = LinearBasis::new(force, mass, &traj_q.times)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut starts: Vec<[f64; 3]> = Vec::with_capacity(opts.starts + 1);
    // Informed start from the first sample: c = D₀ + F₀, direction of (√D₀, ±√F₀).
    let (d0, e0, f0) = (traj_q.d[0], traj_q.e[0], traj_q.f[0]);
    let trace = d0 + f0;
    if trace != 0.0 {
        let phi = (e0.signum() * (f0 / trace).abs().sqrt()).atan2((d0 / trace).abs().sqrt());
        let a = phi.cos();
        let c0 = if a.abs() > 1e-3 {
            traj_q.a[0] / (2.0 * trace * a)
        } else {
            0.0
        };
        starts.push([trace, phi, c0]);
    }
    for _ in 0..opts.starts {
        starts.push([
            rng.gen_range(-opts.c_box..opts.c_box),
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            rng.gen_range(-opts.c0_box..opts.c0_box),
        ]);
    }

    let lm = LmOptions::default();
    let mut best: Option<(f64, [f64; 3])> = None;
    for x0 in &starts {
        let res = levenberg_marquardt(|p| square_residuals(traj_q, &basis, p), x0, &lm);
        let max = res.residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        if !max.is_finite() {
            continue;
        }
        if best.is_none_or(|(b, _)| max < b) {
            best = Some((max, [res.x[0], res.x[1], res.x[2]]));
        }
    }
    let Some((residual, [c, phi, c0])) = best else {
        return Err(Error::OptimizerFailure(format!(
            "none of {} starts produced a finite residual",
            starts.len()
        )));
    };
    // Fold the sign ambiguity (φ, C₀) ~ (φ + π, -C₀) so that A₀ ≥ 0.
    let (mut a0, mut b0, mut c0) = (phi.cos(), phi.sin(), c0);
    if a0 < 0.0 || (a0 == 0.0 && b0 < 0.0) {
        a0 = -a0;
        b0 = -b0;
        c0 = -c0;
    }
    Ok(SquareMatchReport {
        c,
        a0,
        b0,
        c0,
        residual,
        rank_gap: gap,
        verdict: if residual < SQUARE_TOL {
            Verdict::IsSquare
        } else {
            Verdict::NotSquare
        },
        method: MatchMethod::LeastSquares,
        starts: starts.len(),
    })
}

/// Propagates `ψ₀` and `I_l(0)ψ₀` to the last sample of `traj_l` and returns
/// the fidelity between `I_l(T)ψ(T)` and the propagated `I_l(0)ψ₀`.
pub fn verify_invariant_maps_solutions(
    traj_l: &CoeffTrajectory,
    psi0: &GridWavefunction,
    force: &ForceProfile,
    dt: f64,
) -> Result<f64> {
    let t_end = traj_l.t_end();
    let last = traj_l.len() - 1;
    let mapped0 = apply_quadop(&traj_l.invariant(0), psi0)?;
    let size = mapped0.norm() / psi0.norm();
    if size < 1e-8 {
        return Err(Error::DegenerateState(size));
    }
    let psi_t = split_step_evolve(psi0, force, traj_l.mass, dt, t_end, &[])?;
    let mapped_t = split_step_evolve(&mapped0.normalized(), force, traj_l.mass, dt, t_end, &[])?;
    let image = apply_quadop(&traj_l.invariant(last), psi_t.final_state())?;
    fidelity(&image, mapped_t.final_state())
}
