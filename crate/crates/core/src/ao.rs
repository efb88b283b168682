//! Adaptive-optics correction derived from the received beacon.
//!
//! Two models bracket a real system: ideal phase conjugation at full grid
//! resolution, and tip/tilt removal from the focal-spot centroid.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{Fft2, GridSpec};
use crate::modes::ComplexField;

/// Relative beacon amplitude below which the ideal correction phase is 0.
pub const AMPLITUDE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CorrectionKind {
    None,
    TipTilt,
    Ideal,
}

impl CorrectionKind {
    pub const ALL: [CorrectionKind; 3] =
        [CorrectionKind::None, CorrectionKind::TipTilt, CorrectionKind::Ideal];

    pub fn name(self) -> &'static str {
        match self {
            CorrectionKind::None => "none",
            CorrectionKind::TipTilt => "tiptilt",
            CorrectionKind::Ideal => "ideal",
        }
    }
}

impl std::fmt::Display for CorrectionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for CorrectionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(CorrectionKind::None),
            "tiptilt" => Ok(CorrectionKind::TipTilt),
            "ideal" => Ok(CorrectionKind::Ideal),
            other => Err(Error::Parse(format!("unknown AO scenario `{other}`"))),
        }
    }
}

/// Correction phase `φ_B`, subtracted from received fields.
#[derive(Debug, Clone, PartialEq)]
pub struct AoCorrection {
    pub kind: CorrectionKind,
    pub grid: GridSpec,
    pub phase: Vec<f64>,
    /// Linear coefficients `(g_x, g_y)` (rad/m) for tip/tilt.
    pub tilt: Option<(f64, f64)>,
}

impl AoCorrection {
    pub fn none(grid: &GridSpec) -> Self {
        AoCorrection {
            kind: CorrectionKind::None,
            grid: grid.clone(),
            phase: vec![0.0; grid.len()],
            tilt: None,
        }
    }

    pub fn tilt(grid: &GridSpec, gx: f64, gy: f64) -> Self {
        let mut phase = Vec::with_capacity(grid.len());
        for &y in grid.y() {
            for &x in grid.x() {
                phase.push(gx * x + gy * y);
            }
        }
        AoCorrection {
            kind: CorrectionKind::TipTilt,
            grid: grid.clone(),
            phase,
            tilt: Some((gx, gy)),
        }
    }
}

/// Full-resolution phase conjugation of the received beacon.
pub fn ideal_correction(beacon_rx: &ComplexField) -> Result<AoCorrection> {
    let peak = beacon_rx.max_amplitude();
    if !(peak > 0.0) {
        return Err(Error::BeaconLost);
    }
    let floor = AMPLITUDE_FLOOR * peak;
    let phase = beacon_rx
        .values
        .iter()
        .map(|v| if v.norm() >= floor { v.arg() } else { 0.0 })
        .collect();
    Ok(AoCorrection {
        kind: CorrectionKind::Ideal,
        grid: beacon_rx.grid.clone(),
        phase,
        tilt: None,
    })
}

/// Centroid `(κ̄x, κ̄y)` of the focal-plane intensity `|FT(beacon)|²`.
pub fn focal_centroid(beacon_rx: &ComplexField) -> Result<(f64, f64)> {
    let grid = &beacon_rx.grid;
    let mut spec = beacon_rx.values.clone();
    Fft2::for_grid(grid).forward(&mut spec);
    let n = grid.n();
    let (mut sum, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for (iy, &ky) in grid.ky().iter().enumerate() {
        for (ix, &kx) in grid.kx().iter().enumerate() {
            let i = spec[iy * n + ix].norm_sqr();
            sum += i;
            sx += kx * i;
            sy += ky * i;
        }
    }
    if !(sum > 0.0) {
        return Err(Error::BeaconLost);
    }
    Ok((sx / sum, sy / sum))
}

/// Tip/tilt mirror setting from the focal-spot centre of mass.
pub fn tiptilt_correction(beacon_rx: &ComplexField) -> Result<AoCorrection> {
    let (gx, gy) = focal_centroid(beacon_rx)?;
    Ok(AoCorrection::tilt(&beacon_rx.grid, gx, gy))
}

/// Derives the correction of the given kind.
pub fn correction(kind: CorrectionKind, beacon_rx: &ComplexField) -> Result<AoCorrection> {
    match kind {
        CorrectionKind::None => Ok(AoCorrection::none(&beacon_rx.grid)),
        CorrectionKind::TipTilt => tiptilt_correction(beacon_rx),
        CorrectionKind::Ideal => ideal_correction(beacon_rx),
    }
}

/// Multiplies by `exp(-i φ_B)`.
pub fn apply_correction(f: &ComplexField, c: &AoCorrection) -> Result<ComplexField> {
    f.check_grid(&c.grid)?;
    let mut out = f.clone();
    if c.kind != CorrectionKind::None {
        for (v, &p) in out.values.iter_mut().zip(&c.phase) {
            *v *= Complex64::cis(-p);
        }
    }
    Ok(out)
}

/// `exp(-i φ_B)` of a correction, for applying it to many fields.
pub fn correction_mask(c: &AoCorrection) -> Option<Vec<Complex64>> {
    (c.kind != CorrectionKind::None).then(|| c.phase.iter().map(|&p| Complex64::cis(-p)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::modes::{apply_aperture, gaussian_beacon};
    use crate::propagation::fresnel_propagate;

    const LAMBDA: f64 = 1.064e-6;

    fn beacon() -> ComplexField {
        gaussian_beacon(&make_grid(256, 0.4).unwrap(), 0.0735, LAMBDA).unwrap()
    }

    fn weighted_phase_spread(f: &ComplexField) -> f64 {
        // amplitude-weighted circular standard deviation
        let w: f64 = f.values.iter().map(|v| v.norm()).sum();
        let m: Complex64 = f.values.iter().sum::<Complex64>() / w;
        (-2.0 * m.norm().ln()).sqrt()
    }

    #[test]
    fn ideal_correction_flattens_vacuum_beacon() {
        let b = apply_aperture(fresnel_propagate(&beacon(), 500.0).unwrap(), 0.2);
        let c = ideal_correction(&b).unwrap();
        assert_eq!(c.kind, CorrectionKind::Ideal);
        let flat = apply_correction(&b, &c).unwrap();
        assert!(weighted_phase_spread(&flat) < 1e-3);
        let floor = AMPLITUDE_FLOOR * b.max_amplitude();
        for v in &flat.values {
            if v.norm() > floor {
                assert!(v.re >= 0.0 && v.im.abs() < 1e-12 * v.norm().max(1.0));
            }
        }
        assert!((flat.power() - b.power()).abs() < 1e-12 * b.power());
    }

    #[test]
    fn ideal_correction_recovers_tilt() {
        let b = beacon();
        let g = 37.0;
        let mut cells = b.values.iter();
        let tilted = ComplexField::from_fn(&b.grid, b.z, b.wavelength, |x, _| {
            cells.next().unwrap() * Complex64::cis(g * x)
        });
        let c = ideal_correction(&tilted).unwrap();
        let n = b.grid.n();
        let floor = AMPLITUDE_FLOOR * tilted.max_amplitude();
        let piston = c.phase[b.grid.index(n / 2, n / 2)] - g * b.grid.x()[n / 2];
        for (i, &p) in c.phase.iter().enumerate() {
            if tilted.values[i].norm() <= floor {
                assert_eq!(p, 0.0);
                continue;
            }
            let want = g * b.grid.x()[i % n] + piston;
            let d = (p - want).rem_euclid(2.0 * std::f64::consts::PI);
            assert!(d.min(2.0 * std::f64::consts::PI - d) < 1e-9);
        }
    }

    #[test]
    fn lost_beacon_is_an_error() {
        let z = ComplexField::zeros(&make_grid(16, 0.4).unwrap(), 0.0, LAMBDA);
        assert_eq!(ideal_correction(&z), Err(Error::BeaconLost));
        assert_eq!(tiptilt_correction(&z), Err(Error::BeaconLost));
    }

    #[test]
    fn untilted_beacon_has_centred_spot() {
        let b = fresnel_propagate(&beacon(), 500.0).unwrap();
        let c = tiptilt_correction(&b).unwrap();
        let (gx, gy) = c.tilt.unwrap();
        assert!(gx.abs() < 1e-9 && gy.abs() < 1e-9);
        assert!(c.phase.iter().all(|p| p.abs() < 1e-9));
    }

    #[test]
    fn tilted_beacon_centroid_and_fixed_point() {
        let b = beacon();
        let tilted = apply_correction(&b, &AoCorrection::tilt(&b.grid, -50.0, 0.0)).unwrap();
        let c = tiptilt_correction(&tilted).unwrap();
        let (gx, gy) = c.tilt.unwrap();
        assert!((gx - 50.0).abs() < 1.0, "{gx}");
        assert!(gy.abs() < 1e-9);
        let fixed = apply_correction(&tilted, &c).unwrap();
        let (rx, ry) = focal_centroid(&fixed).unwrap();
        let dk = b.grid.dk();
        assert!(rx.abs() < 1e-6 * dk && ry.abs() < 1e-6 * dk, "{rx} {ry}");
    }

    #[test]
    fn tilt_phase_is_exactly_linear() {
        let g = make_grid(64, 0.4).unwrap();
        let c = AoCorrection::tilt(&g, 12.5, -3.25);
        let n = g.n();
        for iy in 0..n {
            for ix in 0..n {
                let want = 12.5 * g.x()[ix] - 3.25 * g.y()[iy];
                assert_eq!(c.phase[g.index(iy, ix)], want);
            }
        }
    }

    #[test]
    fn correction_composition_and_identity() {
        let b = beacon();
        let none = AoCorrection::none(&b.grid);
        assert_eq!(apply_correction(&b, &none).unwrap(), b);
        let t = AoCorrection::tilt(&b.grid, 7.0, -4.0);
        let twice = apply_correction(&apply_correction(&b, &t).unwrap(), &t).unwrap();
        let doubled = apply_correction(&b, &AoCorrection::tilt(&b.grid, 14.0, -8.0)).unwrap();
        for (u, v) in twice.values.iter().zip(&doubled.values) {
            assert!((u - v).norm() < 1e-12);
        }
        assert!((twice.power() - b.power()).abs() < 1e-12 * b.power());
    }
}
