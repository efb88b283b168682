//! Paraxial Fresnel propagation and the split-step multi-screen channel.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Fft2, GridSpec};
use crate::modes::ComplexField;
use crate::turbulence::PhaseScreen;

/// Where each thin screen sits inside its slab.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScreenPlacement {
    /// Half-slab drift, screen, full-slab drifts between screens, half-slab
    /// drift at the end.
    #[default]
    Symmetric,
    /// Full-slab drift followed by the screen, for every slab.
    End,
}

/// The screens of one turbulence realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    screens: Vec<PhaseScreen>,
    /// `exp(iφ)` of every screen, shared by all fields sent through.
    phasors: Vec<Vec<Complex64>>,
    /// `Δz = L / n_screens`.
    pub slab_length: f64,
    pub placement: ScreenPlacement,
}

impl ChannelRealization {
    pub fn new(screens: Vec<PhaseScreen>, path_length: f64) -> Result<Self> {
        if screens.is_empty() {
            return Err(Error::InvalidParameter("channel needs at least one screen".into()));
        }
        let g = &screens[0].grid;
        if screens.iter().any(|s| !s.grid.same_as(g)) {
            return Err(Error::GridMismatch);
        }
        let slab_length = path_length / screens.len() as f64;
        let phasors = screens
            .iter()
            .map(|s| s.phase.iter().map(|&p| Complex64::cis(p)).collect())
            .collect();
        Ok(ChannelRealization {
            screens,
            phasors,
            slab_length,
            placement: ScreenPlacement::Symmetric,
        })
    }

    pub fn with_placement(mut self, placement: ScreenPlacement) -> Self {
        self.placement = placement;
        self
    }

    pub fn screens(&self) -> &[PhaseScreen] {
        &self.screens
    }

    pub fn path_length(&self) -> f64 {
        self.slab_length * self.screens.len() as f64
    }

    pub fn grid(&self) -> &GridSpec {
        &self.screens[0].grid
    }
}

/// Angular-spectrum transfer function `exp(-i dz κ²/(2k))` in DFT order.
pub fn transfer_function(grid: &GridSpec, wavelength: f64, dz: f64) -> Vec<Complex64> {
    let k = 2.0 * std::f64::consts::PI / wavelength;
    let c = -dz / (2.0 * k);
    let mut h = Vec::with_capacity(grid.len());
    for &ky in grid.ky() {
        for &kx in grid.kx() {
            h.push(Complex64::cis(c * (kx * kx + ky * ky)));
        }
    }
    h
}

/// Vacuum propagation over `dz >= 0`.
pub fn fresnel_propagate(f: &ComplexField, dz: f64) -> Result<ComplexField> {
    if !(dz >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative propagation distance {dz}")));
    }
    let mut out = f.clone();
    if dz == 0.0 {
        return Ok(out);
    }
    let fft = Fft2::for_grid(&f.grid);
    let h = transfer_function(&f.grid, f.wavelength, dz);
    drift(&fft, &mut out.values, &h);
    out.z += dz;
    Ok(out)
}

fn drift(fft: &Fft2, values: &mut [Complex64], h: &[Complex64]) {
    fft.forward(values);
    for (v, t) in values.iter_mut().zip(h) {
        *v *= t;
    }
    fft.inverse(values);
}

/// Multiplies by `exp(i φ)`.
pub fn apply_screen(f: &ComplexField, s: &PhaseScreen) -> Result<ComplexField> {
    let mut out = f.clone();
    apply_screen_in_place(&mut out, s)?;
    Ok(out)
}

fn apply_screen_in_place(f: &mut ComplexField, s: &PhaseScreen) -> Result<()> {
    f.check_grid(&s.grid)?;
    for (v, &p) in f.values.iter_mut().zip(&s.phase) {
        *v *= Complex64::cis(p);
    }
    Ok(())
}

fn apply_phasor(values: &mut [Complex64], phasor: &[Complex64]) {
    for (v, p) in values.iter_mut().zip(phasor) {
        *v *= p;
    }
}

/// Propagates through every screen of `ch`, ending at `z + L`.
pub fn propagate_channel(f: &ComplexField, ch: &ChannelRealization) -> Result<ComplexField> {
    SplitStep::new(ch.grid(), f.wavelength, ch.slab_length, ch.placement).run(f.clone(), ch)
}

/// Precomputed split-step operator for a fixed grid, wavelength and slab
/// length. Reused read-only across all fields of a realization.
#[derive(Debug, Clone)]
pub struct SplitStep {
    grid: GridSpec,
    wavelength: f64,
    slab_length: f64,
    placement: ScreenPlacement,
    fft: Fft2,
    half: Vec<Complex64>,
    full: Vec<Complex64>,
    absorber: Option<Vec<f64>>,
}

impl SplitStep {
    pub fn new(
        grid: &GridSpec,
        wavelength: f64,
        slab_length: f64,
        placement: ScreenPlacement,
    ) -> Self {
        SplitStep {
            grid: grid.clone(),
            wavelength,
            slab_length,
            placement,
            fft: Fft2::for_grid(grid),
            half: transfer_function(grid, wavelength, 0.5 * slab_length),
            full: transfer_function(grid, wavelength, slab_length),
            absorber: None,
        }
    }

    /// Enables a super-Gaussian edge absorber `exp(-(r / 0.47 W)^16)` after
    /// every drift. Breaks exact power conservation.
    pub fn with_edge_absorber(mut self, enabled: bool) -> Self {
        self.absorber = enabled.then(|| {
            let r0 = 0.47 * self.grid.width();
            self.grid.radii().iter().map(|r| (-(r / r0).powi(16)).exp()).collect()
        });
        self
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn step(&self, values: &mut [Complex64], h: &[Complex64]) {
        drift(&self.fft, values, h);
        if let Some(mask) = &self.absorber {
            for (v, m) in values.iter_mut().zip(mask) {
                *v *= m;
            }
        }
    }

    pub fn run(&self, mut f: ComplexField, ch: &ChannelRealization) -> Result<ComplexField> {
        f.check_grid(&self.grid)?;
        f.check_grid(ch.grid())?;
        if (ch.slab_length - self.slab_length).abs() > 1e-12 * self.slab_length
            || (f.wavelength - self.wavelength).abs() > 1e-12 * self.wavelength
        {
            return Err(Error::InvalidParameter(
                "split-step operator built for a different slab length or wavelength".into(),
            ));
        }
        match self.placement {
            ScreenPlacement::Symmetric => {
                let last = ch.phasors.len() - 1;
                self.step(&mut f.values, &self.half);
                for (i, s) in ch.phasors.iter().enumerate() {
                    apply_phasor(&mut f.values, s);
                    let h = if i == last { &self.half } else { &self.full };
                    self.step(&mut f.values, h);
                }
            }
            ScreenPlacement::End => {
                for s in &ch.phasors {
                    self.step(&mut f.values, &self.full);
                    apply_phasor(&mut f.values, s);
                }
            }
        }
        f.z += ch.path_length();
        Ok(f)
    }
}
