//! Grid states: oscillator eigenstates, their images under `V₁V₂`, the
//! dressed Lewis–Riesenfeld solutions, and linear-invariant eigenstates.

use num_complex::Complex64;

use crate::algebra::{apply_quadop, QuadOp};
use crate::auxiliary::CoeffTrajectory;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, GridWavefunction};
use crate::io::fmt17;
use crate::numerics::{cumulative_integral, fd_weights, hermite_functions, stencil_window};
use crate::transforms::{mat_mul, GaussianFrame, Mat2, SymplecticGaussian, TransformRecord};

/// Boundary amplitude above which a state is considered to touch the box edge.
pub const BOUNDARY_TOL: f64 = 1e-12;
/// Norm fraction allowed in the outer band of position or momentum space.
pub const EDGE_WEIGHT_TOL: f64 = 1e-10;
const EDGE_BAND: f64 = 0.05;
/// Stencil width for time derivatives of states.
pub const TIME_STENCIL: usize = 7;
/// Largest tolerated imaginary part of the phase integrand.
pub const IMAG_TOL: f64 = 1e-8;

/// Normalized Hermite–Gaussian `h_n(q)`, eigenstate of `p² + q²` with eigenvalue `2n+1`.
pub fn ho_eigenstate(n: usize, grid: &GridSpec) -> Result<GridWavefunction> {
    let psi = GridWavefunction::from_fn(*grid, |q| Complex64::new(hermite_functions(n, q)[n], 0.0));
    let edge = psi.amplitudes[0]
        .norm()
        .max(hermite_functions(n, grid.extent / 2.0)[n].abs());
    if edge >= BOUNDARY_TOL {
        return Err(Error::GridTooSmall(format!(
            "|h_{n}(±L/2)| = {edge:e} on L = {}",
            grid.extent
        )));
    }
    Ok(psi)
}

/// `U h_n` for the Gaussian unitary described by `frame`, in closed form.
///
/// The rotation part of the frame only contributes the phase
/// `e^{-iθ(n+½)}`; it is dropped when `with_rotation` is false.
pub fn frame_eigenstate(
    n: usize,
    frame: &GaussianFrame,
    grid: &GridSpec,
    with_rotation: bool,
) -> GridWavefunction {
    let [dq, dp] = frame.shift;
    let (s, c) = (frame.scale, frame.chirp);
    let mut global = frame.phase - 0.5 * dq * dp;
    if with_rotation {
        global -= frame.rotation * (n as f64 + 0.5);
    }
    let amp = s.powf(-0.5);
    GridWavefunction::from_fn(*grid, |q| {
        let x = q - dq;
        let h = hermite_functions(n, x / s)[n];
        Complex64::from_polar(amp * h, global + dp * q + 0.5 * c * x * x)
    })
}

/// Fails with `ResolutionExceeded` if `psi` has noticeable weight near the
/// box edge or near the Nyquist band.
pub fn check_resolved(psi: &GridWavefunction, context: &str) -> Result<()> {
    let (pos, mom) = psi.edge_weight(EDGE_BAND);
    if pos > EDGE_WEIGHT_TOL || mom > EDGE_WEIGHT_TOL {
        return Err(Error::ResolutionExceeded(format!(
            "{context}: edge weight {pos:e} in position, {mom:e} in momentum"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
enum Shear {
    /// `e^{icq²/2}`, matrix `[[1, 0], [c, 1]]`.
    Position(f64),
    /// `e^{-ibp²/2}`, matrix `[[1, b], [0, 1]]`.
    Momentum(f64),
}

impl Shear {
    fn size(self) -> f64 {
        match self {
            Shear::Position(c) | Shear::Momentum(c) => c.abs(),
        }
    }
}

/// Three shears whose product is `s`, listed in the order they act.
fn three_shears(s: &Mat2) -> Option<[Shear; 3]> {
    let [[a, b], [c, d]] = *s;
    let qpq = (b != 0.0).then(|| {
        [
            Shear::Position((a - 1.0) / b),
            Shear::Momentum(b),
            Shear::Position((d - 1.0) / b),
        ]
    });
    let pqp = (c != 0.0).then(|| {
        [
            Shear::Momentum((d - 1.0) / c),
            Shear::Position(c),
            Shear::Momentum((a - 1.0) / c),
        ]
    });
    let cost = |x: &[Shear; 3]| x.iter().map(|s| s.size()).fold(0.0, f64::max);
    match (qpq, pqp) {
        (Some(x), Some(y)) => Some(if cost(&x) <= cost(&y) { x } else { y }),
        (x, y) => x.or(y),
    }
}

/// Shear sequence realizing `s`, choosing the factorization with the smallest shears.
fn shear_sequence(s: &Mat2) -> Vec<Shear> {
    let cost = |x: &[Shear]| x.iter().map(|s| s.size()).fold(0.0, f64::max);
    let direct = three_shears(s);
    // Through the quarter turn J = [[0, 1], [-1, 0]]: S = (S J⁻¹) J.
    let j_inv = [[0.0, -1.0], [1.0, 0.0]];
    let turned = three_shears(&mat_mul(s, &j_inv)).map(|rest| {
        let quarter = three_shears(&[[0.0, 1.0], [-1.0, 0.0]]).expect("quarter turn factorizes");
        let mut seq = quarter.to_vec();
        seq.extend_from_slice(&rest);
        seq
    });
    match (direct, turned) {
        (Some(d), Some(t)) if cost(&d) <= 4.0 || cost(&d) <= cost(&t) => d.to_vec(),
        (_, Some(t)) => t,
        (Some(d), None) => d.to_vec(),
        (None, None) => Vec::new(),
    }
}

/// `U ψ` for the Gaussian unitary with Heisenberg action `U† v U = S v + d`,
/// realized as position chirps and momentum chirps followed by a displacement.
///
/// The factorization fixes the metaplectic sign and phase; callers that
/// need a specific global phase should set it through `g.phase`.
pub fn apply_gaussian_unitary(
    psi: &GridWavefunction,
    g: &SymplecticGaussian,
) -> Result<GridWavefunction> {
    let mut out = psi.clone();
    let k2: Vec<f64> = psi.grid.wavenumbers().iter().map(|k| k * k).collect();
    let identity = g.matrix == [[1.0, 0.0], [0.0, 1.0]];
    if !identity {
        check_resolved(&out, "input state")?;
        for shear in shear_sequence(&g.matrix) {
            match shear {
                Shear::Position(c) => {
                    out.map_position(|q| Complex64::from_polar(1.0, 0.5 * c * q * q))
                }
                Shear::Momentum(b) => {
                    out.map_momentum(|j, _| Complex64::from_polar(1.0, -0.5 * b * k2[j]))
                }
            }
            check_resolved(&out, "squeeze")?;
        }
    }
    let [dq, dp] = g.shift;
    if dq != 0.0 {
        let kp = psi.grid.momentum_multiplier();
        out.map_momentum(|j, _| Complex64::from_polar(1.0, -kp[j] * dq));
    }
    let global = g.phase - 0.5 * dq * dp;
    if dp != 0.0 || global != 0.0 {
        out.map_position(|q| Complex64::from_polar(1.0, global + dp * q));
    }
    if dq != 0.0 || dp != 0.0 {
        check_resolved(&out, "displacement")?;
    }
    Ok(out)
}

/// States of one Lewis–Riesenfeld solution family at the trajectory samples.
///
/// `eigenstate(k)` is `V₁V₂|n⟩` in the rotation-free frame, which is smooth
/// in `t`; any rotation phase is absorbed into `phases`.
#[derive(Debug, Clone)]
pub struct LRSolution {
    pub n: usize,
    pub grid: GridSpec,
    pub times: Vec<f64>,
    pub frames: Vec<GaussianFrame>,
    pub phases: Vec<f64>,
    /// `⟨H⟩ - i⟨∂_t⟩` in the eigenstate at each sample.
    pub integrand: Vec<f64>,
    pub sigma: f64,
    pub kappa: f64,
}

impl LRSolution {
    pub fn build(
        n: usize,
        traj: &CoeffTrajectory,
        records: &[TransformRecord],
        grid: &GridSpec,
    ) -> Result<Self> {
        let frames = rotation_free_frames(records);
        check_resolved(
            &frame_eigenstate(n, &frames[0], grid, false),
            "eigenstate at first sample",
        )?;
        let last = frames.len() - 1;
        check_resolved(
            &frame_eigenstate(n, &frames[last], grid, false),
            "eigenstate at last sample",
        )?;
        let integrand = phase_integrand(n, traj, &frames, grid)?;
        let phases = cumulative_integral(&traj.times, &integrand);
        Ok(LRSolution {
            n,
            grid: *grid,
            times: traj.times.clone(),
            frames,
            phases,
            integrand,
            sigma: records[0].squeeze.sigma,
            kappa: records[0].displacement.kappa,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `(2n+1)ς + κ`.
    pub fn eigenvalue(&self) -> f64 {
        (2 * self.n + 1) as f64 * self.sigma + self.kappa
    }

    /// Eigenstate of `I(t_k)` without the dynamical phase.
    pub fn eigenstate(&self, k: usize) -> GridWavefunction {
        frame_eigenstate(self.n, &self.frames[k], &self.grid, false)
    }

    /// `e^{-iφ_n(t_k)} V₁V₂|n⟩`, a solution of the Schrödinger equation.
    pub fn state(&self, k: usize) -> GridWavefunction {
        let mut psi = self.eigenstate(k);
        psi.scale(Complex64::from_polar(1.0, -self.phases[k]));
        psi
    }
}

fn rotation_free_frames(records: &[TransformRecord]) -> Vec<GaussianFrame> {
    records
        .iter()
        .map(|r| GaussianFrame {
            rotation: 0.0,
            ..r.gaussian.frame()
        })
        .collect()
}

/// Time derivative weights at sample `k`, with the window they apply to.
fn time_weights(times: &[f64], k: usize) -> (std::ops::Range<usize>, Vec<f64>) {
    let w = stencil_window(times.len(), k, TIME_STENCIL);
    let weights = fd_weights(times[k], &times[w.clone()], 1).swap_remove(1);
    (w, weights)
}

/// `⟨χ|H|χ⟩ - i⟨χ|∂_tχ⟩` for the rotation-free frame states.
///
/// The energy is evaluated on the grid. The time-derivative term is exact for
/// a displaced, chirped, dilated `h_n`: `-i⟨χ|∂_tχ⟩ = ½(dq dp' - dp dq') + c' s² (n+½)/2`,
/// so only the smooth frame parameters are differenced in time.
fn phase_integrand(
    n: usize,
    traj: &CoeffTrajectory,
    frames: &[GaussianFrame],
    grid: &GridSpec,
) -> Result<Vec<f64>> {
    let level = n as f64 + 0.5;
    let dq: Vec<f64> = frames.iter().map(|f| f.shift[0]).collect();
    let dp: Vec<f64> = frames.iter().map(|f| f.shift[1]).collect();
    let chirp: Vec<f64> = frames.iter().map(|f| f.chirp).collect();
    let mut out = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        let (window, weights) = time_weights(&traj.times, k);
        let rate = |v: &[f64]| -> f64 {
            v[window.clone()]
                .iter()
                .zip(&weights)
                .map(|(x, w)| x * w)
                .sum()
        };
        let f = &frames[k];
        let geometric = 0.5 * (dq[k] * rate(&dp) - dp[k] * rate(&dq))
            + 0.5 * rate(&chirp) * f.scale * f.scale * level;
        let chi = frame_eigenstate(n, f, grid, false);
        let energy = chi.inner(&apply_quadop(&traj.hamiltonian(k), &chi)?)?;
        if energy.im.abs() > IMAG_TOL {
            return Err(Error::NonRealIntegrand {
                t: traj.times[k],
                imag: energy.im,
            });
        }
        out.push(energy.re + geometric);
    }
    Ok(out)
}

/// `φ_n(t) = ∫₀ᵗ ⟨n|(V₁V₂)†(H - i∂_t)(V₁V₂)|n⟩ dt'` at every sample.
pub fn lr_phase(
    n: usize,
    traj: &CoeffTrajectory,
    records: &[TransformRecord],
    grid: &GridSpec,
) -> Result<Vec<f64>> {
    let frames = rotation_free_frames(records);
    let integrand = phase_integrand(n, traj, &frames, grid)?;
    Ok(cumulative_integral(&traj.times, &integrand))
}

/// `Σ c_n e^{-iφ_n} V₁V₂|n⟩` at sample `k`, normalized.
pub fn assemble_solution(
    coeffs: &[Complex64],
    solutions: &[LRSolution],
    k: usize,
) -> Result<GridWavefunction> {
    let grid = solutions
        .first()
        .map(|s| s.grid)
        .ok_or_else(|| Error::Config("no solutions to assemble".into()))?;
    let mut psi = GridWavefunction::zeros(grid);
    for (c, sol) in coeffs.iter().zip(solutions) {
        psi.axpy(*c, &sol.state(k))?;
    }
    Ok(psi.normalized())
}

/// Expansion coefficients `⟨n, 0|ψ₀⟩` of an initial state.
pub fn project_initial(
    psi0: &GridWavefunction,
    solutions: &[LRSolution],
) -> Result<Vec<Complex64>> {
    solutions.iter().map(|s| s.state(0).inner(psi0)).collect()
}

/// `‖I ψ - λ ψ‖ / ‖ψ‖` on the full grid.
pub fn eigen_residual(op: &QuadOp, psi: &GridWavefunction, lambda: f64) -> Result<f64> {
    eigen_residual_within(op, psi, lambda, f64::INFINITY)
}

/// `‖I ψ - λ ψ‖ / ‖ψ‖` restricted to `|q| ≤ half_width`.
pub fn eigen_residual_within(
    op: &QuadOp,
    psi: &GridWavefunction,
    lambda: f64,
    half_width: f64,
) -> Result<f64> {
    let image = apply_quadop(op, psi)?;
    let (mut num, mut den) = (0.0, 0.0);
    for (j, (x, y)) in image.amplitudes.iter().zip(&psi.amplitudes).enumerate() {
        if psi.grid.position(j).abs() <= half_width {
            num += (x - lambda * y).norm_sqr();
            den += y.norm_sqr();
        }
    }
    Ok((num / den).sqrt())
}

/// `‖i∂_t ψ - Hψ‖ / ‖ψ‖` at sample `k`, with a finite-difference time derivative.
pub fn schrodinger_residual(sol: &LRSolution, traj: &CoeffTrajectory, k: usize) -> Result<f64> {
    let (window, weights) = time_weights(&traj.times, k);
    let psi = sol.state(k);
    let mut lhs = GridWavefunction::zeros(sol.grid);
    for (j, w) in window.zip(&weights) {
        lhs.axpy(Complex64::new(0.0, *w), &sol.state(j))?;
    }
    let h_psi = apply_quadop(&traj.hamiltonian(k), &psi)?;
    Ok(lhs.distance(&h_psi)? / psi.norm())
}

/// CSV with header `t,phi_0,phi_1,...` for solutions sharing one time grid.
pub fn phase_csv(solutions: &[LRSolution]) -> String {
    let mut out = String::from("t");
    for s in solutions {
        out.push_str(&format!(",phi_{}", s.n));
    }
    out.push('\n');
    if let Some(first) = solutions.first() {
        for (k, t) in first.times.iter().enumerate() {
            out.push_str(&fmt17(*t));
            for s in solutions {
                out.push(',');
                out.push_str(&fmt17(s.phases[k]));
            }
            out.push('\n');
        }
    }
    out
}

/// Flat-top envelope `exp(-(q/w)^{2·order})` used to make continuous-spectrum
/// eigenfunctions square integrable on the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub half_width: f64,
    pub order: u32,
}

impl Window {
    /// Half width `0.6·L/2`, order 16.
    pub fn for_grid(grid: &GridSpec) -> Self {
        Window {
            half_width: 0.6 * grid.extent / 2.0,
            order: 16,
        }
    }

    pub fn value(&self, q: f64) -> f64 {
        (-(q / self.half_width).powi(2 * self.order as i32)).exp()
    }

    /// Region `|q| ≤ w/2` where the envelope is flat to well below `1e-8`.
    pub fn interior(&self) -> f64 {
        0.5 * self.half_width
    }
}

/// Generalized eigenfunction of `I_l = A p + B q + C` at sample `k`:
/// `exp[i((λ - C) q / A - B q² / (2A))]`, multiplied by `window` if given.
pub fn linear_invariant_eigenstate(
    lambda: f64,
    traj: &CoeffTrajectory,
    k: usize,
    grid: &GridSpec,
    window: Option<Window>,
) -> Result<GridWavefunction> {
    let (a, b, c) = (traj.a[k], traj.b[k], traj.c[k]);
    if a.abs() < 1e-12 {
        return Err(Error::ZeroMomentumCoefficient(a));
    }
    let k0 = (lambda - c) / a;
    let slope = b / a;
    let reach = window.map_or(grid.extent / 2.0, |w| {
        (1.3 * w.half_width).min(grid.extent / 2.0)
    });
    let kmax = (k0 - slope * reach).abs().max((k0 + slope * reach).abs());
    if kmax > 0.8 * grid.nyquist() {
        return Err(Error::ResolutionExceeded(format!(
            "local wavenumber {kmax:e} near Nyquist {:e}",
            grid.nyquist()
        )));
    }
    Ok(GridWavefunction::from_fn(*grid, |q| {
        let env = window.map_or(1.0, |w| w.value(q));
        Complex64::from_polar(env, k0 * q - 0.5 * slope * q * q)
    }))
}
