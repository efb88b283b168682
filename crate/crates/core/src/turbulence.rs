//! Kolmogorov phase screens (FFT method with subharmonic low-frequency
//! augmentation) and the derived channel parameters.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::{Fft2, GridSpec};

/// Coefficient of the per-screen phase PSD, `Φ_φ(κ) = 0.49 r0^{-5/3} κ^{-11/3}`.
pub const PHASE_PSD_COEFF: f64 = 0.49;

/// Coefficient of the Kolmogorov phase structure function, `6.88 (r/r0)^{5/3}`.
pub const STRUCTURE_COEFF: f64 = 6.88;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurbulenceParams {
    /// Refractive-index structure constant `Cn²` (m^-2/3).
    pub cn2: f64,
    pub path_length: f64,
    pub wavelength: f64,
    pub n_screens: usize,
    pub subharmonic_orders: u32,
}

impl TurbulenceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cn2 >= 0.0) {
            return Err(Error::InvalidParameter(format!("cn2 must be >= 0, got {}", self.cn2)));
        }
        if !(self.path_length > 0.0) || !(self.wavelength > 0.0) {
            return Err(Error::InvalidParameter(
                "path length and wavelength must be positive".into(),
            ));
        }
        if self.n_screens == 0 {
            return Err(Error::InvalidParameter("n_screens must be >= 1".into()));
        }
        Ok(())
    }

    /// Slab thickness `L / n_screens`.
    pub fn slab_length(&self) -> f64 {
        self.path_length / self.n_screens as f64
    }

    /// Fried parameter of a single slab, or `None` without turbulence.
    pub fn screen_r0(&self) -> Option<f64> {
        fried_parameter(self.cn2, self.wavelength, self.slab_length()).ok()
    }
}

/// A thin random phase layer (radians), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseScreen {
    pub grid: GridSpec,
    pub phase: Vec<f64>,
}

impl PhaseScreen {
    pub fn zeros(grid: &GridSpec) -> Self {
        PhaseScreen {
            grid: grid.clone(),
            phase: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn<F: FnMut(f64, f64) -> f64>(grid: &GridSpec, mut f: F) -> Self {
        let mut phase = Vec::with_capacity(grid.len());
        for &y in grid.y() {
            for &x in grid.x() {
                phase.push(f(x, y));
            }
        }
        PhaseScreen {
            grid: grid.clone(),
            phase,
        }
    }
}

fn wavenumber(wavelength: f64) -> f64 {
    2.0 * PI / wavelength
}

/// `r0 = (0.423 Cn² k² L)^{-3/5}`.
pub fn fried_parameter(cn2: f64, wavelength: f64, path_length: f64) -> Result<f64> {
    if !(path_length > 0.0) || !(wavelength > 0.0) || !(cn2 >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "fried parameter needs cn2 >= 0, L > 0, wavelength > 0 (cn2 = {cn2}, L = {path_length})"
        )));
    }
    if cn2 == 0.0 {
        return Err(Error::InfiniteFriedParameter);
    }
    let k = wavenumber(wavelength);
    Ok((0.423 * cn2 * k * k * path_length).powf(-0.6))
}

/// Plane-wave Rytov variance `1.23 Cn² k^{7/6} L^{11/6}`.
pub fn rytov_variance(cn2: f64, wavelength: f64, path_length: f64) -> f64 {
    let k = wavenumber(wavelength);
    1.23 * cn2 * k.powf(7.0 / 6.0) * path_length.powf(11.0 / 6.0)
}

/// Smallest number of equal slabs whose individual Rytov variance stays
/// below `threshold`.
pub fn screen_count(cn2: f64, wavelength: f64, path_length: f64, threshold: f64) -> Result<usize> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Rytov threshold must be positive, got {threshold}"
        )));
    }
    // σR² scales as (L/n)^{11/6}; start from the closed-form estimate.
    let whole = rytov_variance(cn2, wavelength, path_length);
    let mut n = if whole < threshold {
        1
    } else {
        ((whole / threshold).powf(6.0 / 11.0).floor() as usize).max(1)
    };
    while n > 1 && rytov_variance(cn2, wavelength, path_length / (n - 1) as f64) < threshold {
        n -= 1;
    }
    while rytov_variance(cn2, wavelength, path_length / n as f64) >= threshold {
        n += 1;
    }
    Ok(n)
}

/// Per-screen phase power spectral density (rad² m², angular frequency).
pub fn phase_psd(r0: f64, kappa: f64) -> f64 {
    PHASE_PSD_COEFF * r0.powf(-5.0 / 3.0) * kappa.powf(-11.0 / 3.0)
}

/// Kolmogorov phase structure function `6.88 (r/r0)^{5/3}`.
pub fn kolmogorov_structure(r: f64, r0: f64) -> f64 {
    STRUCTURE_COEFF * (r / r0).powf(5.0 / 3.0)
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    complex_gaussian_sd(rng, variance.sqrt())
}

/// Circular Gaussian with `E|c|² = sd²`.
fn complex_gaussian_sd<R: Rng + ?Sized>(rng: &mut R, sd: f64) -> Complex64 {
    let s = std::f64::consts::FRAC_1_SQRT_2 * sd;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Draws one slab's screen for the given channel parameters.
///
/// Random numbers are consumed in a fixed order: the `n² - 1` FFT
/// coefficients in row-major order (κ = 0 skipped), then the subharmonic
/// coefficients order by order.
pub fn phase_screen<R: Rng + ?Sized>(
    grid: &GridSpec,
    params: &TurbulenceParams,
    slab_index: usize,
    rng: &mut R,
) -> Result<PhaseScreen> {
    ScreenSynth::new(grid).phase_screen(params, slab_index, rng)
}

/// Screen with slab Fried parameter `r0` and `orders` subharmonic levels.
pub fn kolmogorov_screen<R: Rng + ?Sized>(
    grid: &GridSpec,
    r0: f64,
    orders: u32,
    rng: &mut R,
) -> PhaseScreen {
    ScreenSynth::new(grid).generate(r0, orders, rng)
}

/// High-frequency part of a screen, synthesized on the FFT lattice.
pub fn fft_screen<R: Rng + ?Sized>(grid: &GridSpec, r0: f64, rng: &mut R) -> PhaseScreen {
    ScreenSynth::new(grid).fft_part(r0, rng)
}

/// Screen generator for one grid, caching the FFT plan and the spectral
/// shape `√(Φ_φ Δκ²)` at `r0 = 1`.
#[derive(Debug, Clone)]
pub struct ScreenSynth {
    grid: GridSpec,
    fft: Fft2,
    shape: Vec<f64>,
}

impl ScreenSynth {
    pub fn new(grid: &GridSpec) -> Self {
        let dk2 = grid.dk() * grid.dk();
        let mut shape = Vec::with_capacity(grid.len());
        for &ky in grid.ky() {
            for &kx in grid.kx() {
                let kappa = kx.hypot(ky);
                shape.push(if kappa > 0.0 {
                    (phase_psd(1.0, kappa) * dk2).sqrt()
                } else {
                    0.0
                });
            }
        }
        ScreenSynth {
            grid: grid.clone(),
            fft: Fft2::for_grid(grid),
            shape,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// As [`phase_screen`], reusing the cached tables.
    pub fn phase_screen<R: Rng + ?Sized>(
        &self,
        params: &TurbulenceParams,
        slab_index: usize,
        rng: &mut R,
    ) -> Result<PhaseScreen> {
        params.validate()?;
        if slab_index >= params.n_screens {
            return Err(Error::InvalidParameter(format!(
                "slab index {slab_index} outside 0..{}",
                params.n_screens
            )));
        }
        match params.screen_r0() {
            None => Ok(PhaseScreen::zeros(&self.grid)),
            Some(r0) => Ok(self.generate(r0, params.subharmonic_orders, rng)),
        }
    }

    pub fn generate<R: Rng + ?Sized>(&self, r0: f64, orders: u32, rng: &mut R) -> PhaseScreen {
        let screen = self.fft_part(r0, rng);
        if orders > 0 {
            add_subharmonic_layers(screen, r0, orders, rng)
        } else {
            screen
        }
    }

    fn fft_part<R: Rng + ?Sized>(&self, r0: f64, rng: &mut R) -> PhaseScreen {
        // Φ_φ ∝ r0^{-5/3}, so the standard deviation scales as r0^{-5/6}
        let scale = r0.powf(-5.0 / 6.0);
        let mut spec: Vec<Complex64> = self
            .shape
            .iter()
            .enumerate()
            .map(|(i, &a)| {
                if i == 0 {
                    Complex64::default()
                } else {
                    complex_gaussian_sd(rng, a * scale)
                }
            })
            .collect();
        self.fft.inverse_unnormalized(&mut spec);
        let phase = spec.iter().map(|c| std::f64::consts::SQRT_2 * c.re).collect();
        PhaseScreen {
            grid: self.grid.clone(),
            phase,
        }
    }
}

/// Adds `params.subharmonic_orders` levels of low-frequency plane waves.
pub fn add_subharmonics<R: Rng + ?Sized>(
    screen: PhaseScreen,
    params: &TurbulenceParams,
    slab_index: usize,
    rng: &mut R,
) -> Result<PhaseScreen> {
    params.validate()?;
    if slab_index >= params.n_screens {
        return Err(Error::InvalidParameter(format!(
            "slab index {slab_index} outside 0..{}",
            params.n_screens
        )));
    }
    match params.screen_r0() {
        Some(r0) if params.subharmonic_orders > 0 => Ok(add_subharmonic_layers(
            screen,
            r0,
            params.subharmonic_orders,
            rng,
        )),
        _ => Ok(screen),
    }
}

/// For order `d`, the eight neighbours of the origin on a lattice of pitch
/// `q = Δκ/3^d`. Each wave is `√2·Re(c e^{iκ·r})` with `c` circular
/// Gaussian, the same convention as the FFT part.
///
/// The variance of `c` is `q² ⟨κ²Φ_φ⟩_cell / κ_c²`: the cell's phase-gradient
/// variance is carried exactly.
fn add_subharmonic_layers<R: Rng + ?Sized>(
    mut screen: PhaseScreen,
    r0: f64,
    orders: u32,
    rng: &mut R,
) -> PhaseScreen {
    let grid = screen.grid.clone();
    let n = grid.n();
    let xs = grid.x();

    // Group waves by κy so each cell costs one complex product per group.
    let mut zero_row = vec![Complex64::default(); n];
    let mut rows: Vec<(f64, Vec<Complex64>)> = Vec::new();
    for d in 1..=orders {
        let dk = grid.dk() / 3f64.powi(d as i32);
        let mut plus = vec![Complex64::default(); n];
        let mut minus = vec![Complex64::default(); n];
        for j in -1i32..=1 {
            for i in -1i32..=1 {
                if i == 0 && j == 0 {
                    continue;
                }
                let kx = f64::from(i) * dk;
                let ky = f64::from(j) * dk;
                let weight = subharmonic_cell_weight(i != 0 && j != 0);
                let c = complex_gaussian(rng, weight * phase_psd(r0, kx.hypot(ky)) * dk * dk);
                let target = match j {
                    -1 => &mut minus,
                    0 => &mut zero_row,
                    _ => &mut plus,
                };
                for (t, &x) in target.iter_mut().zip(xs) {
                    *t += c * Complex64::cis(kx * x);
                }
            }
        }
        rows.push((dk, plus));
        rows.push((-dk, minus));
    }

    for (iy, &y) in grid.y().iter().enumerate() {
        let phases: Vec<Complex64> = rows.iter().map(|(ky, _)| Complex64::cis(ky * y)).collect();
        let out = &mut screen.phase[iy * n..(iy + 1) * n];
        for (ix, v) in out.iter_mut().enumerate() {
            let mut s = zero_row[ix];
            for ((_, row), e) in rows.iter().zip(&phases) {
                s += row[ix] * e;
            }
            *v += std::f64::consts::SQRT_2 * s.re;
        }
    }
    screen
}

/// `⟨κ²Φ⟩_cell / (κ_c² Φ(κ_c))` for an edge or corner cell of a 3×3
/// subharmonic block. Scale-free because `Φ` is a power law.
fn subharmonic_cell_weight(corner: bool) -> f64 {
    static WEIGHTS: OnceLock<[f64; 2]> = OnceLock::new();
    let w = WEIGHTS.get_or_init(|| {
        const M: usize = 64;
        let weight = |cx: f64, cy: f64| {
            let mut sum = 0.0;
            for a in 0..M {
                for b in 0..M {
                    let u = cx + (a as f64 + 0.5) / M as f64 - 0.5;
                    let v = cy + (b as f64 + 0.5) / M as f64 - 0.5;
                    sum += u.hypot(v).powf(-5.0 / 3.0);
                }
            }
            sum / (M * M) as f64 * cx.hypot(cy).powf(5.0 / 3.0)
        };
        [weight(1.0, 0.0), weight(1.0, 1.0)]
    });
    w[usize::from(corner)]
}

/// One point of an estimated phase structure function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructurePoint {
    /// Separation actually used, an integer number of pitches (m).
    pub separation: f64,
    pub value: f64,
    /// Standard error of the ensemble mean.
    pub std_error: f64,
    /// Estimates restricted to pairs along one axis.
    pub along_x: f64,
    pub along_y: f64,
}

/// Ensemble estimate of `D_φ(r) = ⟨[φ(x+r) − φ(x)]²⟩`.
///
/// Each separation is rounded to the nearest whole number of pitches; all
/// non-wrapping cell pairs along both axes contribute.
pub fn structure_function(
    screens: &[PhaseScreen],
    separations: &[f64],
) -> Result<Vec<StructurePoint>> {
    let first = screens.first().ok_or(Error::EmptyEnsemble)?;
    let grid = &first.grid;
    if screens.iter().any(|s| !s.grid.same_as(grid)) {
        return Err(Error::GridMismatch);
    }
    let lags = separation_lags(grid, separations)?;
    let per_screen: Vec<Vec<(f64, f64)>> =
        screens.iter().map(|s| screen_structure(s, &lags)).collect();
    Ok(summarize_structure(grid, &lags, &per_screen))
}

/// Separations in whole pitches.
pub(crate) fn separation_lags(grid: &GridSpec, separations: &[f64]) -> Result<Vec<usize>> {
    separations
        .iter()
        .map(|&r| {
            let lag = (r / grid.dx()).round() as usize;
            if lag == 0 || lag >= grid.n() {
                Err(Error::InvalidParameter(format!(
                    "separation {r} m is not resolvable on this grid"
                )))
            } else {
                Ok(lag)
            }
        })
        .collect()
}

/// Mean squared differences `(along x, along y)` of one screen per lag.
pub(crate) fn screen_structure(s: &PhaseScreen, lags: &[usize]) -> Vec<(f64, f64)> {
    let n = s.grid.n();
    let p = &s.phase;
    lags.iter()
        .map(|&lag| {
            let (mut ax, mut ay) = (0.0, 0.0);
            for iy in 0..n {
                for ix in 0..n - lag {
                    let d = p[iy * n + ix + lag] - p[iy * n + ix];
                    ax += d * d;
                }
            }
            for iy in 0..n - lag {
                for ix in 0..n {
                    let d = p[(iy + lag) * n + ix] - p[iy * n + ix];
                    ay += d * d;
                }
            }
            let pairs = (n * (n - lag)) as f64;
            (ax / pairs, ay / pairs)
        })
        .collect()
}

pub(crate) fn summarize_structure(
    grid: &GridSpec,
    lags: &[usize],
    per_screen: &[Vec<(f64, f64)>],
) -> Vec<StructurePoint> {
    lags.iter()
        .enumerate()
        .map(|(k, &lag)| {
            let xs: Vec<f64> = per_screen.iter().map(|p| p[k].0).collect();
            let ys: Vec<f64> = per_screen.iter().map(|p| p[k].1).collect();
            let both: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| 0.5 * (x + y)).collect();
            let (mean, se) = mean_and_sem(&both);
            StructurePoint {
                separation: lag as f64 * grid.dx(),
                value: mean,
                std_error: se,
                along_x: mean_and_sem(&xs).0,
                along_y: mean_and_sem(&ys).0,
            }
        })
        .collect()
}

/// Sample mean and standard error of the mean.
pub(crate) fn mean_and_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
