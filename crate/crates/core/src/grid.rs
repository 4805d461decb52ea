//! Uniform periodic position grids and wavefunctions sampled on them.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic grid of `points` samples on `[-extent/2, extent/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub extent: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            extent: 40.0,
            points: 1024,
        }
    }
}

impl GridSpec {
    pub fn new(extent: f64, points: usize) -> Result<Self> {
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "extent must be positive, got {extent}"
            )));
        }
        if points < 64 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "point count must be a power of two >= 64, got {points}"
            )));
        }
        Ok(GridSpec { extent, points })
    }

    pub fn spacing(&self) -> f64 {
        self.extent / self.points as f64
    }

    pub fn position(&self, j: usize) -> f64 {
        -0.5 * self.extent + j as f64 * self.spacing()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.position(j)).collect()
    }

    /// Wavenumber of FFT bin `j` in standard (unshifted) order.
    pub fn wavenumber(&self, j: usize) -> f64 {
        let n = self.points as isize;
        let j = j as isize;
        let m = if j < n / 2 { j } else { j - n };
        2.0 * PI * m as f64 / self.extent
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.wavenumber(j)).collect()
    }

    /// Multiplier realizing `p` spectrally; the unpaired Nyquist bin is zeroed
    /// so that `p` stays Hermitian.
    pub fn momentum_multiplier(&self) -> Vec<f64> {
        (0..self.points)
            .map(|j| {
                if j == self.points / 2 {
                    0.0
                } else {
                    self.wavenumber(j)
                }
            })
            .collect()
    }

    pub fn nyquist(&self) -> f64 {
        PI / self.spacing()
    }

    pub(crate) fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "(L = {}, N = {}) vs (L = {}, N = {})",
                self.extent, self.points, other.extent, other.points
            )));
        }
        Ok(())
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place unnormalized forward FFT.
pub(crate) fn fft_forward(buf: &mut [Complex64]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

/// In-place inverse FFT including the `1/N` factor.
pub(crate) fn fft_inverse(buf: &mut [Complex64]) {
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
    let scale = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|z| *z *= scale);
}

/// Complex amplitudes on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridWavefunction {
    pub grid: GridSpec,
    pub amplitudes: Vec<Complex64>,
}

impl GridWavefunction {
    pub fn new(grid: GridSpec, amplitudes: Vec<Complex64>) -> Result<Self> {
        let psi = GridWavefunction { grid, amplitudes };
        psi.check()?;
        Ok(psi)
    }

    pub fn zeros(grid: GridSpec) -> Self {
        GridWavefunction {
            grid,
            amplitudes: vec![Complex64::new(0.0, 0.0); grid.points],
        }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> Complex64) -> Self {
        GridWavefunction {
            grid,
            amplitudes: (0..grid.points).map(|j| f(grid.position(j))).collect(),
        }
    }

    /// Normalized Gaussian packet centered at `q0` with mean momentum `p0`
    /// and position standard deviation `width / sqrt(2)`.
    pub fn gaussian(grid: GridSpec, q0: f64, p0: f64, width: f64) -> Self {
        let mut psi = Self::from_fn(grid, |q| {
            let x = (q - q0) / width;
            Complex64::from_polar((-0.5 * x * x).exp(), p0 * q)
        });
        psi.normalize();
        psi
    }

    pub fn check(&self) -> Result<()> {
        if self.amplitudes.len() != self.grid.points {
            return Err(Error::GridMismatch(format!(
                "{} amplitudes on a grid of {} points",
                self.amplitudes.len(),
                self.grid.points
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.spacing()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            self.scale(Complex64::new(1.0 / n, 0.0));
        }
        n
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    pub fn scale(&mut self, s: Complex64) {
        self.amplitudes.iter_mut().for_each(|z| *z *= s);
    }

    /// `<self|other>` with the grid measure.
    pub fn inner(&self, other: &GridWavefunction) -> Result<Complex64> {
        self.grid.check_same(&other.grid)?;
        self.check()?;
        other.check()?;
        let s: Complex64 = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.grid.spacing())
    }

    pub fn axpy(&mut self, a: Complex64, x: &GridWavefunction) -> Result<()> {
        self.grid.check_same(&x.grid)?;
        for (y, xv) in self.amplitudes.iter_mut().zip(&x.amplitudes) {
            *y += a * xv;
        }
        Ok(())
    }

    pub fn distance(&self, other: &GridWavefunction) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let s: f64 = self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok((s * self.grid.spacing()).sqrt())
    }

    pub fn map_position(&mut self, f: impl Fn(f64) -> Complex64) {
        let grid = self.grid;
        for (j, z) in self.amplitudes.iter_mut().enumerate() {
            *z *= f(grid.position(j));
        }
    }

    /// Multiplies by `g(k)` in the discrete Fourier domain.
    pub fn map_momentum(&mut self, g: impl Fn(usize, f64) -> Complex64) {
        let grid = self.grid;
        fft_forward(&mut self.amplitudes);
        for (j, z) in self.amplitudes.iter_mut().enumerate() {
            *z *= g(j, grid.wavenumber(j));
        }
        fft_inverse(&mut self.amplitudes);
    }

    pub fn momentum_amplitudes(&self) -> Vec<Complex64> {
        let mut buf = self.amplitudes.clone();
        fft_forward(&mut buf);
        buf
    }

    /// Fraction of the norm carried by the outer `fraction` of the position
    /// window and of the momentum band. Used to detect support leaving the grid.
    pub fn edge_weight(&self, fraction: f64) -> (f64, f64) {
        let total: f64 = self.amplitudes.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            return (0.0, 0.0);
        }
        let n = self.grid.points;
        let cut = ((n as f64) * fraction * 0.5).ceil() as usize;
        let pos: f64 = self.amplitudes[..cut]
            .iter()
            .chain(&self.amplitudes[n - cut..])
            .map(|z| z.norm_sqr())
            .sum();
        let amps = self.momentum_amplitudes();
        let momentum_total: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        let kcut = self.grid.nyquist() * (1.0 - fraction);
        let mom: f64 = amps
            .iter()
            .enumerate()
            .filter(|(j, _)| self.grid.wavenumber(*j).abs() >= kcut)
            .map(|(_, z)| z.norm_sqr())
            .sum();
        (pos / total, mom / momentum_total)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("q,re,im\n");
        for (j, z) in self.amplitudes.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{}\n",
                crate::io::fmt17(self.grid.position(j)),
                crate::io::fmt17(z.re),
                crate::io::fmt17(z.im)
            ));
        }
        out
    }
}
