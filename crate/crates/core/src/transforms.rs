//! Displacement `V₁ = exp(ηq + βp)` and squeeze `V₂ = exp(αp² + ρq²)` that
//! reduce the quadratic invariant to `ς(p² + q²) + κ`.
//!
//! `η, β, α, ρ` are purely imaginary; only their imaginary parts are stored.
//! Phase-space vectors are ordered `(q, p)` and quadratic forms
//! `D p² + E (pq+qp) + F q²` are represented by the matrix `[[F, E], [E, D]]`.

use num_complex::Complex64;
use serde::Serialize;

use crate::auxiliary::CoeffTrajectory;
use crate::error::{Error, Result};
use crate::io::Sig17;
use crate::lsq::{levenberg_marquardt, LmOptions};

pub type Mat2 = [[f64; 2]; 2];

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn transpose(a: &Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

pub fn det(a: &Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

/// `cosh(√z)` continued to `z < 0`.
pub fn cosh_sqrt(z: f64) -> f64 {
    if z >= 0.0 {
        z.sqrt().cosh()
    } else {
        (-z).sqrt().cos()
    }
}

/// `sinh(√z)/√z`, entire in `z`.
pub fn sinhc_sqrt(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        1.0 + z / 6.0 + z * z / 120.0
    } else if z > 0.0 {
        let s = z.sqrt();
        s.sinh() / s
    } else {
        let s = (-z).sqrt();
        s.sin() / s
    }
}

/// `(cosh(√z) - 1)/z`, entire in `z`.
pub fn coshm_sqrt(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        0.5 + z / 24.0 + z * z / 720.0
    } else {
        (cosh_sqrt(z) - 1.0) / z
    }
}

/// `η = i·eta_im`, `β = i·beta_im`, and the scalar `κ` left in `V₁†IV₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisplacementParams {
    pub eta_im: f64,
    pub beta_im: f64,
    pub kappa: f64,
}

impl DisplacementParams {
    pub fn identity() -> Self {
        DisplacementParams {
            eta_im: 0.0,
            beta_im: 0.0,
            kappa: 0.0,
        }
    }

    pub fn eta(&self) -> Complex64 {
        Complex64::new(0.0, self.eta_im)
    }

    pub fn beta(&self) -> Complex64 {
        Complex64::new(0.0, self.beta_im)
    }
}

/// Solves `A + 2i(Eβ - Dη) = 0`, `B + 2i(Fβ - Eη) = 0` for `η, β` and returns
/// the leftover scalar `κ = C - [-i(Bβ - Aη) + Dη² + Fβ² - 2Eβη]`.
pub fn eliminate_linear_part(coeffs: [f64; 6]) -> Result<DisplacementParams> {
    let [d, e, f, a, b, c] = coeffs;
    let gap = d * f - e * e;
    let scale = (d * d + 2.0 * e * e + f * f).sqrt().max(f64::MIN_POSITIVE);
    if gap.abs() <= 1e-13 * scale * scale {
        return Err(Error::DegenerateForm(gap.abs()));
    }
    let x = (d * b - e * a) / (2.0 * gap);
    let y = (e * b - f * a) / (2.0 * gap);
    // With η = iy, β = ix the bracket is Bx - Ay - Dy² - Fx² + 2Exy.
    let kappa = c - (b * x - a * y - d * y * y - f * x * x + 2.0 * e * x * y);
    Ok(DisplacementParams {
        eta_im: y,
        beta_im: x,
        kappa,
    })
}

/// `eliminate_linear_part` at trajectory sample `k`.
pub fn eliminate_linear_part_at(traj: &CoeffTrajectory, k: usize) -> Result<DisplacementParams> {
    eliminate_linear_part(traj.coeffs(k))
}

/// `α = i·alpha_im`, `ρ = i·rho_im`, and the reduced scale `ς`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezeParams {
    pub alpha_im: f64,
    pub rho_im: f64,
    pub sigma: f64,
}

impl SqueezeParams {
    pub fn identity(sigma: f64) -> Self {
        SqueezeParams {
            alpha_im: 0.0,
            rho_im: 0.0,
            sigma,
        }
    }

    /// Heisenberg action `V₂† (q, p) V₂ = S (q, p)` of `exp(i(a p² + r q²))`.
    pub fn matrix(&self) -> Mat2 {
        let (a, r) = (self.alpha_im, self.rho_im);
        let z = -4.0 * a * r;
        let ch = cosh_sqrt(z);
        let sc = sinhc_sqrt(z);
        [[ch, -2.0 * a * sc], [2.0 * r * sc, ch]]
    }
}

fn nonelliptic(d: f64, e: f64, f: f64) -> Error {
    Error::NonElliptic {
        d0: d,
        e0: e,
        f0: f,
        det: d * f - e * e,
    }
}

/// Coefficients `(𝒟, ℰ, ℱ)` of `V₂†(D p² + E(pq+qp) + F q²)V₂` written with
/// the closed Glauber-formula expressions, evaluated through entire
/// functions of `16ρα` so no branch of the square root is needed.
pub fn transformed_form(d: f64, e: f64, f: f64, sq: &SqueezeParams) -> (f64, f64, f64) {
    let alpha = Complex64::new(0.0, sq.alpha_im);
    let rho = Complex64::new(0.0, sq.rho_im);
    let i = Complex64::i();
    let z = (16.0 * rho * alpha).re;
    let sinhc = sinhc_sqrt(z);
    let coshm = coshm_sqrt(z);
    let ch = cosh_sqrt(z);
    let mix = f * alpha - d * rho;
    let cal_d = d + 4.0 * i * e * alpha * sinhc - 8.0 * mix * alpha * coshm;
    let cal_e = 2.0 * i * mix * sinhc + e * ch;
    let cal_f = f - 4.0 * i * e * rho * sinhc + 8.0 * mix * rho * coshm;
    (cal_d.re, cal_e.re, cal_f.re)
}

/// Same transformation computed as `Sᵀ K S`.
pub fn transformed_form_matrix(d: f64, e: f64, f: f64, sq: &SqueezeParams) -> (f64, f64, f64) {
    let s = sq.matrix();
    let k = [[f, e], [e, d]];
    let out = mat_mul(&transpose(&s), &mat_mul(&k, &s));
    (out[1][1], 0.5 * (out[0][1] + out[1][0]), out[0][0])
}

/// Finds `α, ρ` such that `V₂` maps `(D, E, F)` to `(ς, 0, ς)`, by direct
/// symplectic diagonalization of `[[F, E], [E, D]]`.
///
/// Of the two squeezes `±S` that diagonalize the form, the one with
/// non-negative diagonal is returned; it is the unique solution with the
/// rotation angle of `S` in `[0, π/2]`.
pub fn diagonalize_quadratic(d: f64, e: f64, f: f64) -> Result<SqueezeParams> {
    let gap = d * f - e * e;
    if !(gap > 0.0 && d > 0.0) || !gap.is_finite() {
        return Err(nonelliptic(d, e, f));
    }
    let sigma = gap.sqrt();
    // W = sqrt(ς) K^{-1/2} = adj(K^{1/2}) / sqrt(ς), K^{1/2} = (K + ς) / sqrt(tr K + 2ς).
    let norm = 1.0 / (sigma.sqrt() * (d + f + 2.0 * sigma).sqrt());
    let w = [
        [(d + sigma) * norm, -e * norm],
        [-e * norm, (f + sigma) * norm],
    ];
    let (w11, w12, w22) = (w[0][0], w[0][1], w[1][1]);

    let mut phi = if w12 == 0.0 && w11 == w22 {
        0.0
    } else {
        (w22 - w11).atan2(2.0 * w12)
    };
    let diag = |phi: f64| w11 * phi.cos() + w12 * phi.sin();
    if diag(phi) < 0.0 {
        phi += std::f64::consts::PI;
    }
    let rot = [[phi.cos(), -phi.sin()], [phi.sin(), phi.cos()]];
    let s = mat_mul(&w, &rot);

    let c = (0.5 * (s[0][0] + s[1][1])).max(0.0);
    let sc = if c > 1.0 {
        let mu = c.acosh();
        if mu < 1e-8 {
            1.0
        } else {
            mu.sinh() / mu
        }
    } else {
        let nu = c.min(1.0).acos();
        if nu < 1e-8 {
            1.0
        } else {
            nu.sin() / nu
        }
    };
    Ok(SqueezeParams {
        alpha_im: -s[0][1] / (2.0 * sc),
        rho_im: s[1][0] / (2.0 * sc),
        sigma,
    })
}

/// The parameterization `α = uθ/4`, `ρ = vθ/4`, `F = h cosh(√(uv)θ)`,
/// `D = g cosh(√(uv)θ)`, `E = ζ sinh(√(uv)θ)` in the gauge `u = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UvThetaParameterization {
    pub u: f64,
    pub v: f64,
    /// `θ` is purely imaginary; `theta_im` is its imaginary part.
    pub theta_im: f64,
    pub g: f64,
    pub h: f64,
    /// Imaginary for `v > 0`, real for `v < 0`.
    pub zeta: Complex64,
    pub sigma: f64,
    /// Residual max-norm of the defining equations at the returned point.
    pub residual: f64,
}

impl UvThetaParameterization {
    pub fn squeeze(&self) -> SqueezeParams {
        SqueezeParams {
            alpha_im: self.u * self.theta_im / 4.0,
            rho_im: self.v * self.theta_im / 4.0,
            sigma: self.sigma,
        }
    }
}

/// Residuals of the reduced conditions with `u = 1`, written in `α = iτ/4`
/// and `ρ = ivτ/4` so that small `α` is not singular: the `pq+qp`
/// coefficient condition and `𝒟 = ℱ = ς`.
fn uv_theta_residuals(d: f64, e: f64, f: f64, sigma: f64, a: f64, r: f64) -> [f64; 3] {
    let z = -16.0 * a * r;
    let ch = cosh_sqrt(z);
    // (h - g v) τ with h = F/ch, g = D/ch.
    let wt = 4.0 * (f * a - d * r) / ch;
    let sc = sinhc_sqrt(z);
    let cm = coshm_sqrt(z);
    [
        e - 0.5 * wt * sc,
        d - 2.0 * wt * a * cm - sigma,
        f + 2.0 * wt * r * cm - sigma,
    ]
}

/// Solves the `(u, v, θ, g, h, ζ)` system by multistart Levenberg–Marquardt.
/// Among converged roots, the one whose squeeze matrix has non-negative
/// diagonal and the smallest `|α| + |ρ|` is returned.
pub fn solve_squeeze_paper(d: f64, e: f64, f: f64) -> Result<UvThetaParameterization> {
    let gap = d * f - e * e;
    if !(gap > 0.0 && d > 0.0) || !gap.is_finite() {
        return Err(nonelliptic(d, e, f));
    }
    let sigma = gap.sqrt();
    let scale = d.abs().max(f.abs()).max(e.abs());
    let tol = 1e-12 * scale;
    let opts = LmOptions::default();

    let grid = [-2.0, -0.8, -0.3, -0.1, 0.0, 0.1, 0.3, 0.8, 2.0];
    let mut best: Option<(f64, f64, f64, f64)> = None;
    for &a0 in &grid {
        for &r0 in &grid {
            let res = levenberg_marquardt(
                |x| uv_theta_residuals(d, e, f, sigma, x[0], x[1]).to_vec(),
                &[a0, r0],
                &opts,
            );
            let (a, r) = (res.x[0], res.x[1]);
            let resid = uv_theta_residuals(d, e, f, sigma, a, r)
                .iter()
                .fold(0.0f64, |m, x| m.max(x.abs()));
            if !(resid <= tol) {
                continue;
            }
            let sq = SqueezeParams {
                alpha_im: a,
                rho_im: r,
                sigma,
            };
            if sq.matrix()[0][0] < -1e-12 {
                continue;
            }
            let size = a.abs() + r.abs();
            if best.is_none_or(|b| size < b.2 - 1e-9) {
                best = Some((a, r, size, resid));
            }
        }
    }
    let Some((a, r, _, residual)) = best else {
        return Err(Error::NoConvergence(format!(
            "no admissible root for D = {d}, E = {e}, F = {f}"
        )));
    };
    let tau = 4.0 * a;
    // Without squeeze the gauge leaves v free; zero is the natural choice.
    let v = if a == 0.0 { 0.0 } else { r / a };
    let z = -16.0 * a * r;
    let ch = cosh_sqrt(z);
    let (h, g) = (f / ch, d / ch);
    // ζ = -i(hu - gv) / (2 sqrt(uv)) with u = 1.
    let sqrt_v = Complex64::new(v, 0.0).sqrt();
    let zeta = if v == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        -Complex64::i() * (h - g * v) / (2.0 * sqrt_v)
    };
    Ok(UvThetaParameterization {
        u: 1.0,
        v,
        theta_im: tau,
        g,
        h,
        zeta,
        sigma,
        residual,
    })
}

/// Heisenberg action of `e^{iφ₀} V₁ V₂`: `U† (q, p) U = S (q, p) + d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticGaussian {
    pub matrix: Mat2,
    pub shift: [f64; 2],
    pub phase: f64,
}

impl SymplecticGaussian {
    pub fn identity() -> Self {
        SymplecticGaussian {
            matrix: [[1.0, 0.0], [0.0, 1.0]],
            shift: [0.0, 0.0],
            phase: 0.0,
        }
    }

    pub fn det(&self) -> f64 {
        det(&self.matrix)
    }

    /// Factorization `S = [[s, 0], [c s, 1/s]] · R(θ)` with `s > 0`, where
    /// `R(θ) = [[cos θ, sin θ], [-sin θ, cos θ]]` is the oscillator rotation.
    pub fn frame(&self) -> GaussianFrame {
        let s = &self.matrix;
        let scale = s[0][0].hypot(s[0][1]);
        let theta = s[0][1].atan2(s[0][0]);
        let chirp = (s[1][0] * theta.cos() + s[1][1] * theta.sin()) / scale;
        GaussianFrame {
            scale,
            chirp,
            rotation: theta,
            shift: self.shift,
            phase: self.phase,
        }
    }
}

/// Iwasawa form of a [`SymplecticGaussian`]: chirp · dilation · rotation, then displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianFrame {
    pub scale: f64,
    pub chirp: f64,
    pub rotation: f64,
    pub shift: [f64; 2],
    pub phase: f64,
}

/// Combines `V₁` and `V₂` into the Heisenberg action of `V₁V₂`.
///
/// `V₁† (q, p) V₁ = (q - x, p + y)` for `η = iy`, `β = ix`, and
/// `V₂† (q, p) V₂ = S (q, p)`; hence `(V₁V₂)† v (V₁V₂) = S v + (-x, y)`.
pub fn compose_symplectic(disp: &DisplacementParams, sq: &SqueezeParams) -> SymplecticGaussian {
    SymplecticGaussian {
        matrix: sq.matrix(),
        shift: [-disp.beta_im, disp.eta_im],
        phase: 0.0,
    }
}

/// Transform parameters for one trajectory sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformRecord {
    pub t: f64,
    pub displacement: DisplacementParams,
    pub squeeze: SqueezeParams,
    pub gaussian: SymplecticGaussian,
}

#[derive(Serialize)]
struct TransformJson {
    t: Sig17,
    eta_im: Sig17,
    beta_im: Sig17,
    kappa: Sig17,
    alpha_im: Sig17,
    rho_im: Sig17,
    sigma: Sig17,
    matrix: [[Sig17; 2]; 2],
    shift: [Sig17; 2],
}

impl TransformRecord {
    pub fn to_json(&self) -> serde_json::Value {
        let m = self.gaussian.matrix;
        serde_json::to_value(TransformJson {
            t: Sig17(self.t),
            eta_im: Sig17(self.displacement.eta_im),
            beta_im: Sig17(self.displacement.beta_im),
            kappa: Sig17(self.displacement.kappa),
            alpha_im: Sig17(self.squeeze.alpha_im),
            rho_im: Sig17(self.squeeze.rho_im),
            sigma: Sig17(self.squeeze.sigma),
            matrix: [
                [Sig17(m[0][0]), Sig17(m[0][1])],
                [Sig17(m[1][0]), Sig17(m[1][1])],
            ],
            shift: [Sig17(self.gaussian.shift[0]), Sig17(self.gaussian.shift[1])],
        })
        .unwrap()
    }
}

/// Transform parameters at every sample of a quadratic trajectory.
pub fn transforms_along(traj: &CoeffTrajectory) -> Result<Vec<TransformRecord>> {
    (0..traj.len())
        .map(|k| {
            let disp = eliminate_linear_part_at(traj, k)?;
            let sq = diagonalize_quadratic(traj.d[k], traj.e[k], traj.f[k])?;
            Ok(TransformRecord {
                t: traj.times[k],
                displacement: disp,
                squeeze: sq,
                gaussian: compose_symplectic(&disp, &sq),
            })
        })
        .collect()
}

/// Largest deviation of `κ` from its value at the first sample.
pub fn kappa_drift(records: &[TransformRecord]) -> f64 {
    let k0 = records.first().map_or(0.0, |r| r.displacement.kappa);
    records
        .iter()
        .map(|r| (r.displacement.kappa - k0).abs())
        .fold(0.0, f64::max)
}
