//! Laguerre-Gauss modes, the Gaussian beacon, the discrete overlap integral
//! and the receiver aperture.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// A complex scalar field sampled on a square grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
    /// Plane coordinate (m).
    pub z: f64,
    pub wavelength: f64,
}

impl ComplexField {
    pub fn zeros(grid: &GridSpec, z: f64, wavelength: f64) -> Self {
        ComplexField {
            values: vec![Complex64::default(); grid.len()],
            grid: grid.clone(),
            z,
            wavelength,
        }
    }

    /// Builds a field by evaluating `f(x, y)` at every cell center.
    pub fn from_fn<F>(grid: &GridSpec, z: f64, wavelength: f64, mut f: F) -> Self
    where
        F: FnMut(f64, f64) -> Complex64,
    {
        let mut values = Vec::with_capacity(grid.len());
        for &y in grid.y() {
            for &x in grid.x() {
                values.push(f(x, y));
            }
        }
        ComplexField {
            grid: grid.clone(),
            values,
            z,
            wavelength,
        }
    }

    /// Discrete power `Σ|u|² dx²`.
    pub fn power(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_area()
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Rescales to unit discrete power. A zero field is left untouched.
    pub fn normalize(&mut self) {
        let p = self.power();
        if p > 0.0 {
            let s = 1.0 / p.sqrt();
            for v in &mut self.values {
                *v *= s;
            }
        }
    }

    pub fn scaled(mut self, alpha: Complex64) -> Self {
        for v in &mut self.values {
            *v *= alpha;
        }
        self
    }

    /// Cell-wise product with a mask on the same grid.
    pub fn masked(&self, mask: &[Complex64]) -> Self {
        assert_eq!(mask.len(), self.values.len(), "mask size does not match grid");
        ComplexField {
            values: self.values.iter().zip(mask).map(|(v, m)| v * m).collect(),
            ..self.clone_meta()
        }
    }

    fn clone_meta(&self) -> Self {
        ComplexField {
            grid: self.grid.clone(),
            values: Vec::new(),
            z: self.z,
            wavelength: self.wavelength,
        }
    }

    pub fn max_amplitude(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub(crate) fn check_grid(&self, other: &GridSpec) -> Result<()> {
        if self.grid.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Radial index `p` and azimuthal (OAM) index `l` of an LG mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeIndex {
    pub p: u32,
    pub l: i32,
}

impl ModeIndex {
    pub fn new(p: u32, l: i32) -> Self {
        ModeIndex { p, l }
    }

    pub fn oam(l: i32) -> Self {
        ModeIndex { p: 0, l }
    }
}

/// Gaussian-beam parameters of a waist `w0` observed at distance `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParams {
    pub rayleigh_range: f64,
    /// Beam radius `w(z)`.
    pub radius: f64,
    /// Inverse wavefront curvature `1/R(z)`; zero at the waist.
    pub inv_curvature: f64,
    /// Gouy angle `arctan(z/zR)`.
    pub gouy: f64,
}

impl BeamParams {
    pub fn at(w0: f64, wavelength: f64, z: f64) -> Self {
        let zr = PI * w0 * w0 / wavelength;
        let ratio = z / zr;
        BeamParams {
            rayleigh_range: zr,
            radius: w0 * (1.0 + ratio * ratio).sqrt(),
            inv_curvature: z / (z * z + zr * zr),
            gouy: ratio.atan(),
        }
    }
}

/// Generalized Laguerre polynomial `L_p^α(x)` by the three-term recurrence.
pub fn laguerre(p: u32, alpha: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if p == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for k in 1..p {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + alpha - x) * cur - (k + alpha) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Analytic LG amplitude with continuum normalization (`∫|u|² d²r = 1`).
///
/// The plane-wave carrier `e^{ikz}` is omitted.
pub fn lg_value(mode: ModeIndex, beam: &BeamParams, k: f64, x: f64, y: f64) -> Complex64 {
    let al = mode.l.unsigned_abs();
    let w = beam.radius;
    let norm = (2.0 * factorial(mode.p) / (PI * factorial(mode.p + al))).sqrt() / w;
    let r2 = x * x + y * y;
    let s = 2.0 * r2 / (w * w);
    let radial = s.sqrt().powi(al as i32) * laguerre(mode.p, al as f64, s) * (-r2 / (w * w)).exp();
    let phase = mode.l as f64 * y.atan2(x) + 0.5 * k * r2 * beam.inv_curvature
        - f64::from(2 * mode.p + al + 1) * beam.gouy;
    Complex64::from_polar(norm * radial, phase)
}

/// Samples `LG_{p,l}` at plane `z` and normalizes it on the grid.
pub fn lg_mode(
    grid: &GridSpec,
    mode: ModeIndex,
    w0: f64,
    wavelength: f64,
    z: f64,
) -> Result<ComplexField> {
    if !(w0 > 0.0) || !(wavelength > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "waist and wavelength must be positive (w0 = {w0}, wavelength = {wavelength})"
        )));
    }
    let beam = BeamParams::at(w0, wavelength, z);
    let w = beam.radius;
    if w < 4.0 * grid.dx() {
        return Err(Error::Sampling(format!(
            "beam radius {w:.3e} m under-resolved by pitch {:.3e} m (need w >= 4 dx)",
            grid.dx()
        )));
    }
    let extent = w * f64::from(mode.l.unsigned_abs() + 1).sqrt();
    if extent > grid.width() / 4.0 {
        return Err(Error::Sampling(format!(
            "mode extent {extent:.3e} m exceeds a quarter of the grid width {:.3e} m",
            grid.width()
        )));
    }
    let k = 2.0 * PI / wavelength;
    let mut f = ComplexField::from_fn(grid, z, wavelength, |x, y| lg_value(mode, &beam, k, x, y));
    f.normalize();
    Ok(f)
}

/// Gaussian beacon at its waist plane.
pub fn gaussian_beacon(grid: &GridSpec, w_beacon: f64, wavelength: f64) -> Result<ComplexField> {
    lg_mode(grid, ModeIndex::oam(0), w_beacon, wavelength, 0.0)
}

/// Discrete overlap `Σ a·conj(b)·dx²`.
pub fn inner_product(a: &ComplexField, b: &ComplexField) -> Result<Complex64> {
    a.check_grid(&b.grid)?;
    let s: Complex64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(u, v)| u * v.conj())
        .sum();
    Ok(s * a.grid.cell_area())
}

/// Hard circular stop of the given diameter, centered on the grid.
pub fn apply_aperture(mut f: ComplexField, diameter: f64) -> ComplexField {
    let r = 0.5 * diameter;
    let r2 = r * r;
    let n = f.grid.n();
    for iy in 0..n {
        let y = f.grid.y()[iy];
        for ix in 0..n {
            let x = f.grid.x()[ix];
            if x * x + y * y > r2 {
                f.values[iy * n + ix] = Complex64::default();
            }
        }
    }
    f
}
