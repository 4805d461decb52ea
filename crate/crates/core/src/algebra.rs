//! The six-dimensional operator algebra spanned by `{p², pq+qp, q², p, q, 1}`
//! with `[q, p] = i` (natural units, ħ = 1).

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::error::Result;
use crate::grid::{fft_forward, fft_inverse, GridWavefunction};
use crate::io::Sig17;

/// Index of each basis element; this is also the serialized order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    P2 = 0,
    Sym = 1,
    Q2 = 2,
    P = 3,
    Q = 4,
    One = 5,
}

impl Basis {
    pub const ALL: [Basis; 6] = [
        Basis::P2,
        Basis::Sym,
        Basis::Q2,
        Basis::P,
        Basis::Q,
        Basis::One,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Basis::P2 => "p^2",
            Basis::Sym => "pq+qp",
            Basis::Q2 => "q^2",
            Basis::P => "p",
            Basis::Q => "q",
            Basis::One => "1",
        }
    }
}

/// `[X_a, X_b] = i * k * X_c` stored as `Some((c, k))`; `None` means the pair commutes.
const STRUCTURE: [[Option<(usize, i32)>; 6]; 6] = {
    const P2: usize = 0;
    const SYM: usize = 1;
    const Q2: usize = 2;
    const P: usize = 3;
    const Q: usize = 4;
    let mut t = [[None; 6]; 6];
    t[P2][SYM] = Some((P2, -4));
    t[SYM][P2] = Some((P2, 4));
    t[P2][Q2] = Some((SYM, -2));
    t[Q2][P2] = Some((SYM, 2));
    t[SYM][Q2] = Some((Q2, -4));
    t[Q2][SYM] = Some((Q2, 4));
    t[P2][Q] = Some((P, -2));
    t[Q][P2] = Some((P, 2));
    t[Q2][P] = Some((Q, 2));
    t[P][Q2] = Some((Q, -2));
    t[SYM][P] = Some((P, 2));
    t[P][SYM] = Some((P, -2));
    t[SYM][Q] = Some((Q, -2));
    t[Q][SYM] = Some((Q, 2));
    t[Q][P] = Some((5, 1));
    t[P][Q] = Some((5, -1));
    t
};

/// Operator `c0 p² + c1 (pq+qp) + c2 q² + c3 p + c4 q + c5`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuadOp {
    pub coeffs: [Complex64; 6],
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

impl QuadOp {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_real(c: [f64; 6]) -> Self {
        QuadOp { coeffs: c.map(re) }
    }

    pub fn basis(b: Basis) -> Self {
        let mut op = Self::zero();
        op.coeffs[b as usize] = re(1.0);
        op
    }

    /// `D p² + E (pq+qp) + F q² + A p + B q + C`.
    pub fn quadratic(d: f64, e: f64, f: f64, a: f64, b: f64, c: f64) -> Self {
        Self::from_real([d, e, f, a, b, c])
    }

    /// `A p + B q + C`.
    pub fn linear(a: f64, b: f64, c: f64) -> Self {
        Self::from_real([0.0, 0.0, 0.0, a, b, c])
    }

    /// `H = p²/2m + f q`.
    pub fn hamiltonian(mass: f64, force: f64) -> Self {
        Self::from_real([0.5 / mass, 0.0, 0.0, 0.0, force, 0.0])
    }

    pub fn coeff(&self, b: Basis) -> Complex64 {
        self.coeffs[b as usize]
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|c| c.im.abs() <= tol)
    }

    pub fn max_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        QuadOp {
            coeffs: self.coeffs.map(|c| c * s),
        }
    }

    pub fn real_parts(&self) -> [f64; 6] {
        self.coeffs.map(|c| c.re)
    }
}

impl Add for QuadOp {
    type Output = QuadOp;
    fn add(mut self, rhs: QuadOp) -> QuadOp {
        for (a, b) in self.coeffs.iter_mut().zip(rhs.coeffs) {
            *a += b;
        }
        self
    }
}

impl Sub for QuadOp {
    type Output = QuadOp;
    fn sub(self, rhs: QuadOp) -> QuadOp {
        self + (-rhs)
    }
}

impl Neg for QuadOp {
    type Output = QuadOp;
    fn neg(self) -> QuadOp {
        self.scale(re(-1.0))
    }
}

impl Mul<QuadOp> for f64 {
    type Output = QuadOp;
    fn mul(self, rhs: QuadOp) -> QuadOp {
        rhs.scale(re(self))
    }
}

impl Mul<QuadOp> for Complex64 {
    type Output = QuadOp;
    fn mul(self, rhs: QuadOp) -> QuadOp {
        rhs.scale(self)
    }
}

impl Serialize for QuadOp {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(6))?;
        for c in &self.coeffs {
            seq.serialize_element(&[Sig17(c.re), Sig17(c.im)])?;
        }
        seq.end()
    }
}

/// `[X, Y] = XY - YX` expanded on the basis.
pub fn commutator(x: &QuadOp, y: &QuadOp) -> QuadOp {
    // Pairs a < b only, so antisymmetry holds exactly in floating point.
    let mut out = QuadOp::zero();
    for (a, row) in STRUCTURE.iter().enumerate() {
        for (b, entry) in row.iter().enumerate().skip(a + 1) {
            if let Some((c, k)) = *entry {
                let w = x.coeffs[a] * y.coeffs[b] - x.coeffs[b] * y.coeffs[a];
                out.coeffs[c] += w * Complex64::new(0.0, k as f64);
            }
        }
    }
    out
}

/// `dI/dt + (1/i)[I, H]`; zero iff `I` is an invariant at this instant.
pub fn lvn_residual(invariant: &QuadOp, d_invariant: &QuadOp, hamiltonian: &QuadOp) -> QuadOp {
    *d_invariant + Complex64::new(0.0, -1.0) * commutator(invariant, hamiltonian)
}

/// Spectral `p ψ`.
pub fn apply_p(psi: &GridWavefunction) -> GridWavefunction {
    let kp = psi.grid.momentum_multiplier();
    let mut buf = psi.amplitudes.clone();
    fft_forward(&mut buf);
    for (z, k) in buf.iter_mut().zip(&kp) {
        *z *= k;
    }
    fft_inverse(&mut buf);
    GridWavefunction {
        grid: psi.grid,
        amplitudes: buf,
    }
}

/// Spectral `p² ψ` using the full wavenumber, Nyquist bin included.
pub fn apply_p2(psi: &GridWavefunction) -> GridWavefunction {
    let mut out = psi.clone();
    out.map_momentum(|_, k| re(k * k));
    out
}

fn apply_q(psi: &GridWavefunction) -> GridWavefunction {
    let mut out = psi.clone();
    out.map_position(re);
    out
}

/// `X ψ` on the grid: `q` multiplies, `p` is the exact Fourier multiplier and
/// `pq+qp` is applied as the symmetrized product.
pub fn apply_quadop(x: &QuadOp, psi: &GridWavefunction) -> Result<GridWavefunction> {
    psi.check()?;
    let grid = psi.grid;
    let c = &x.coeffs;
    let zero = re(0.0);
    let mut out = GridWavefunction::zeros(grid);

    let q_psi = apply_q(psi);
    if c[Basis::P2 as usize] != zero {
        out.axpy(c[0], &apply_p2(psi))?;
    }
    if c[Basis::P as usize] != zero || c[Basis::Sym as usize] != zero {
        let p_psi = apply_p(psi);
        out.axpy(c[3], &p_psi)?;
        if c[1] != zero {
            let pq = apply_p(&q_psi);
            let qp = apply_q(&p_psi);
            out.axpy(c[1], &pq)?;
            out.axpy(c[1], &qp)?;
        }
    }
    for (j, z) in out.amplitudes.iter_mut().enumerate() {
        let q = grid.position(j);
        *z += (c[2] * q * q + c[4] * q + c[5]) * psi.amplitudes[j];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn i(k: f64) -> Complex64 {
        Complex64::new(0.0, k)
    }

    /// Reference products of basis monomials as polynomials in the ordered
    /// symbols (q, p), reduced to the basis with the normal-ordering rule
    /// `p q = q p - i`. Independent of the structure table.
    mod weyl {
        use super::super::Basis;
        use num_complex::Complex64;
        use std::collections::BTreeMap;

        /// Polynomial in normal order: key (a, b) means q^a p^b.
        pub type Poly = BTreeMap<(u32, u32), Complex64>;

        pub fn basis(b: Basis) -> Poly {
            let mut p = Poly::new();
            let one = Complex64::new(1.0, 0.0);
            match b {
                Basis::P2 => {
                    p.insert((0, 2), one);
                }
                // pq + qp = 2 qp - i
                Basis::Sym => {
                    p.insert((1, 1), 2.0 * one);
                    p.insert((0, 0), Complex64::new(0.0, -1.0));
                }
                Basis::Q2 => {
                    p.insert((2, 0), one);
                }
                Basis::P => {
                    p.insert((0, 1), one);
                }
                Basis::Q => {
                    p.insert((1, 0), one);
                }
                Basis::One => {
                    p.insert((0, 0), one);
                }
            }
            p
        }

        fn binom(n: u32, k: u32) -> f64 {
            (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
        }

        /// p^b q^c = sum_k C(b,k) C(c,k) k! (-i)^k q^(c-k) p^(b-k).
        pub fn mul(x: &Poly, y: &Poly) -> Poly {
            let mut out = Poly::new();
            for (&(a, b), &cx) in x {
                for (&(c, d), &cy) in y {
                    for k in 0..=b.min(c) {
                        let fact: f64 = (1..=k).map(|v| v as f64).product();
                        let coef = binom(b, k) * binom(c, k) * fact;
                        let phase = Complex64::new(0.0, -1.0).powu(k);
                        *out.entry((a + c - k, b + d - k)).or_default() += cx * cy * coef * phase;
                    }
                }
            }
            out
        }

        pub fn sub(x: &Poly, y: &Poly) -> Poly {
            let mut out = x.clone();
            for (k, v) in y {
                *out.entry(*k).or_default() -= v;
            }
            out.retain(|_, v| v.norm() > 1e-14);
            out
        }
    }

    fn to_poly(x: &QuadOp) -> weyl::Poly {
        let mut out = weyl::Poly::new();
        for b in Basis::ALL {
            for (k, v) in weyl::basis(b) {
                *out.entry(k).or_default() += v * x.coeff(b);
            }
        }
        out.retain(|_, v| v.norm() > 1e-14);
        out
    }

    #[test]
    fn table_matches_normal_ordered_products() {
        for a in Basis::ALL {
            for b in Basis::ALL {
                let (xa, xb) = (QuadOp::basis(a), QuadOp::basis(b));
                let expected = weyl::sub(
                    &weyl::mul(&to_poly(&xa), &to_poly(&xb)),
                    &weyl::mul(&to_poly(&xb), &to_poly(&xa)),
                );
                let got = to_poly(&commutator(&xa, &xb));
                assert_eq!(got.len(), expected.len(), "[{}, {}]", a.label(), b.label());
                for (k, v) in &expected {
                    assert!(
                        (got[k] - v).norm() < 1e-12,
                        "[{}, {}]",
                        a.label(),
                        b.label()
                    );
                }
            }
        }
    }

    #[test]
    fn printed_relations() {
        let c = |a, b| commutator(&QuadOp::basis(a), &QuadOp::basis(b));
        assert_eq!(c(Basis::Q2, Basis::P2), i(2.0) * QuadOp::basis(Basis::Sym));
        assert_eq!(c(Basis::Sym, Basis::Q2), i(-4.0) * QuadOp::basis(Basis::Q2));
        assert_eq!(c(Basis::Sym, Basis::P2), i(4.0) * QuadOp::basis(Basis::P2));
        assert_eq!(c(Basis::Q, Basis::P2), i(2.0) * QuadOp::basis(Basis::P));
        assert_eq!(c(Basis::P, Basis::Q2), i(-2.0) * QuadOp::basis(Basis::Q));
        assert_eq!(c(Basis::Q, Basis::Sym), i(2.0) * QuadOp::basis(Basis::Q));
        assert_eq!(c(Basis::P, Basis::Sym), i(-2.0) * QuadOp::basis(Basis::P));
        assert_eq!(c(Basis::Q, Basis::P), i(1.0) * QuadOp::basis(Basis::One));
    }

    #[test]
    fn self_commutator_vanishes() {
        let x = QuadOp::quadratic(0.3, -1.2, 2.0, 0.7, -0.1, 5.0);
        assert_eq!(commutator(&x, &x), QuadOp::zero());
    }

    #[test]
    fn jacobi_on_all_basis_triples() {
        for a in Basis::ALL {
            for b in Basis::ALL {
                for c in Basis::ALL {
                    let (x, y, z) = (QuadOp::basis(a), QuadOp::basis(b), QuadOp::basis(c));
                    let s = commutator(&x, &commutator(&y, &z))
                        + commutator(&y, &commutator(&z, &x))
                        + commutator(&z, &commutator(&x, &y));
                    assert_eq!(s.max_norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn hamiltonian_is_its_own_invariant_when_static() {
        let h = QuadOp::hamiltonian(1.0, 0.0);
        assert_eq!(lvn_residual(&h, &QuadOp::zero(), &h), QuadOp::zero());
    }

    #[test]
    fn linear_invariant_constant_force() {
        for t in [0.0, 0.4, 3.0, 10.0] {
            let inv = QuadOp::linear(-t, 1.0, -0.5 * t * t);
            let d_inv = QuadOp::linear(-1.0, 0.0, -t);
            let h = QuadOp::hamiltonian(1.0, 1.0);
            assert!(lvn_residual(&inv, &d_inv, &h).max_norm() < 1e-15);
        }
    }

    #[test]
    fn position_residual_under_free_motion() {
        // (1/i)[q, p²/2m] = p/m
        let m = 2.5;
        let r = lvn_residual(
            &QuadOp::basis(Basis::Q),
            &QuadOp::zero(),
            &QuadOp::hamiltonian(m, 0.0),
        );
        assert_eq!(r, (1.0 / m) * QuadOp::basis(Basis::P));
    }

    #[test]
    fn grid_multiplication_and_plane_waves() {
        let grid = GridSpec::default();
        let k = grid.wavenumber(7);
        let psi = GridWavefunction::from_fn(grid, |q| Complex64::from_polar(1.0, k * q));
        let qpsi = apply_quadop(&QuadOp::basis(Basis::Q), &psi).unwrap();
        let ppsi = apply_quadop(&QuadOp::basis(Basis::P), &psi).unwrap();
        for j in 0..grid.points {
            let q = grid.position(j);
            assert!((qpsi.amplitudes[j] - q * psi.amplitudes[j]).norm() < 1e-13);
            assert!((ppsi.amplitudes[j] - k * psi.amplitudes[j]).norm() < 1e-11);
        }
    }

    #[test]
    fn oscillator_ground_state_eigenvalue() {
        let grid = GridSpec::default();
        let psi = GridWavefunction::from_fn(grid, |q| {
            re(std::f64::consts::PI.powf(-0.25) * (-0.5 * q * q).exp())
        });
        let h = QuadOp::from_real([1.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let out = apply_quadop(&h, &psi).unwrap();
        assert!(out.distance(&psi).unwrap() < 1e-10);
    }

    #[test]
    fn grid_commutator_matches_operator_products() {
        let grid = GridSpec::default();
        let psi = GridWavefunction::gaussian(grid, 0.5, 0.8, 1.4);
        for a in Basis::ALL {
            for b in Basis::ALL {
                let (x, y) = (QuadOp::basis(a), QuadOp::basis(b));
                let lhs = apply_quadop(&commutator(&x, &y), &psi).unwrap();
                let xy = apply_quadop(&x, &apply_quadop(&y, &psi).unwrap()).unwrap();
                let mut rhs = apply_quadop(&y, &apply_quadop(&x, &psi).unwrap()).unwrap();
                rhs.scale(re(-1.0));
                rhs.axpy(re(1.0), &xy).unwrap();
                assert!(
                    lhs.distance(&rhs).unwrap() < 1e-8,
                    "{} {}",
                    a.label(),
                    b.label()
                );
            }
        }
    }

    #[test]
    fn json_layout() {
        let op = QuadOp::quadratic(1.0, 0.0, 0.0, 0.0, 0.0, -2.0);
        let v: serde_json::Value =
            serde_json::from_str(&serde_json::to_string(&op).unwrap()).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 6);
        assert_eq!(v[0][0].as_f64(), Some(1.0));
        assert_eq!(v[5][0].as_f64(), Some(-2.0));
        assert_eq!(v[5][1].as_f64(), Some(0.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn op() -> impl Strategy<Value = QuadOp> {
            prop::array::uniform6(-3.0f64..3.0).prop_map(QuadOp::from_real)
        }

        proptest! {
            #[test]
            fn antisymmetric_and_bilinear(x in op(), y in op(), z in op(), s in -2.0f64..2.0) {
                let lhs = commutator(&x, &y) + commutator(&y, &x);
                prop_assert!(lhs.max_norm() < 1e-12);
                let lin = commutator(&(x + s * z), &y) - commutator(&x, &y) - s * commutator(&z, &y);
                prop_assert!(lin.max_norm() < 1e-11);
            }

            #[test]
            fn commutator_of_hermitian_is_anti_hermitian(x in op(), y in op()) {
                let c = commutator(&x, &y);
                prop_assert!(c.coeffs.iter().all(|z| z.re.abs() < 1e-12));
            }

            #[test]
            fn residual_is_linear(x in op(), y in op(), dx in op(), dy in op(), h in op(), s in -2.0f64..2.0) {
                let lhs = lvn_residual(&(x + s * y), &(dx + s * dy), &h);
                let rhs = lvn_residual(&x, &dx, &h) + s * lvn_residual(&y, &dy, &h);
                prop_assert!((lhs - rhs).max_norm() < 1e-11);
            }
        }
    }
}
