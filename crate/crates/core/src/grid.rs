//! Square transverse grid and the unitary 2-D discrete Fourier transform
//! shared by all field operations.
//!
//! Coordinates are cell-centered: for even `n` the origin falls between the
//! two middle samples. Spatial frequencies follow the usual DFT ordering
//! (`0, 1, …, n/2-1, -n/2, …, -1` times `Δκ`).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    n: usize,
    width: f64,
    dx: f64,
    x: Vec<f64>,
    kx: Vec<f64>,
}

/// Builds a square grid with `n` samples per side spanning `width` metres.
pub fn make_grid(n: usize, width: f64) -> Result<GridSpec> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidGrid(format!(
            "sample count must be even and >= 2, got {n}"
        )));
    }
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::InvalidGrid(format!(
            "width must be positive, got {width}"
        )));
    }
    let dx = exact_pitch(width, n);
    let half = n as f64 / 2.0;
    let x = (0..n).map(|j| (j as f64 - half + 0.5) * dx).collect();
    let dk = 2.0 * PI / width;
    let kx = (0..n)
        .map(|j| {
            let m = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
            m * dk
        })
        .collect();
    Ok(GridSpec {
        n,
        width,
        dx,
        x,
        kx,
    })
}

/// `width / n`, nudged by a few ulps when needed so that `dx * n == width`.
/// Some pairs admit no such pitch; those keep the rounded quotient.
fn exact_pitch(width: f64, n: usize) -> f64 {
    let nf = n as f64;
    let dx = width / nf;
    if dx * nf == width {
        return dx;
    }
    let (mut up, mut down) = (dx, dx);
    for _ in 0..8 {
        up = up.next_up();
        down = down.next_down();
        if up * nf == width {
            return up;
        }
        if down * nf == width {
            return down;
        }
    }
    dx
}

impl GridSpec {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Sample pitch in metres.
    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Cell area `dx²`, the quadrature weight of every discrete integral.
    pub fn cell_area(&self) -> f64 {
        self.dx * self.dx
    }

    /// Spatial-frequency spacing `2π/width` (rad/m).
    pub fn dk(&self) -> f64 {
        2.0 * PI / self.width
    }

    /// Centered coordinate axis (identical for x and y).
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.x
    }

    /// Angular spatial-frequency axis in DFT order (identical for kx and ky).
    pub fn kx(&self) -> &[f64] {
        &self.kx
    }

    pub fn ky(&self) -> &[f64] {
        &self.kx
    }

    /// Number of cells, `n²`.
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major index of cell (row `iy`, column `ix`).
    #[inline]
    pub fn index(&self, iy: usize, ix: usize) -> usize {
        iy * self.n + ix
    }

    /// Radius of every cell from the grid center, row-major.
    pub fn radii(&self) -> Vec<f64> {
        let mut r = Vec::with_capacity(self.len());
        for &y in &self.x {
            for &x in &self.x {
                r.push(x.hypot(y));
            }
        }
        r
    }

    /// `true` when two grids describe the same sampling.
    pub fn same_as(&self, other: &GridSpec) -> bool {
        self.n == other.n && self.width == other.width
    }
}

/// Unitary 2-D FFT on an `n × n` row-major buffer.
///
/// Forward and inverse each carry `1/n` (that is `1/√(n²)`), so the pair is
/// the identity and discrete Parseval holds without extra factors.
#[derive(Clone)]
pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("n", &self.n).finish()
    }
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn for_grid(grid: &GridSpec) -> Self {
        Self::new(grid.n())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward, 1.0 / self.n as f64);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse, 1.0 / self.n as f64);
    }

    /// Inverse transform without normalization: `Σ_k c_k e^{+iκ·x}`.
    pub fn inverse_unnormalized(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse, 1.0);
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>, scale: f64) {
        let n = self.n;
        assert_eq!(data.len(), n * n, "buffer size does not match FFT size");
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(data, &mut scratch);

        // Columns: gather a few at a time into contiguous rows, transform,
        // scatter back with the scale applied. The tile stride is padded so
        // the gathered rows do not share cache sets.
        let stride = n + 4;
        let mut tile = vec![Complex64::default(); COLUMN_TILE * stride];
        for c0 in (0..n).step_by(COLUMN_TILE) {
            let w = COLUMN_TILE.min(n - c0);
            for (r, row) in data.chunks_exact(n).enumerate() {
                for (k, &v) in row[c0..c0 + w].iter().enumerate() {
                    tile[k * stride + r] = v;
                }
            }
            for col in tile.chunks_exact_mut(stride).take(w) {
                fft.process_with_scratch(&mut col[..n], &mut scratch);
            }
            for (r, row) in data.chunks_exact_mut(n).enumerate() {
                for (k, v) in row[c0..c0 + w].iter_mut().enumerate() {
                    *v = tile[k * stride + r] * scale;
                }
            }
        }
    }
}

const COLUMN_TILE: usize = 16;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn full_grid_pitch_and_frequency_spacing() {
        let g = make_grid(512, 0.4).unwrap();
        assert_relative_eq!(g.dx(), 7.8125e-4, max_relative = 1e-15);
        assert_relative_eq!(g.dk(), 2.0 * PI / 0.4, max_relative = 1e-15);
        assert!((g.dk() - 15.708).abs() < 1e-3);
    }

    #[test]
    fn two_point_grid_is_centered() {
        let g = make_grid(2, 1.0).unwrap();
        assert_eq!(g.x(), &[-0.25, 0.25]);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(make_grid(3, 1.0).is_err());
        assert!(make_grid(0, 1.0).is_err());
        assert!(make_grid(4, 0.0).is_err());
        assert!(make_grid(4, -1.0).is_err());
    }

    #[test]
    fn axis_invariants() {
        for &(n, w) in &[(2usize, 1.0), (64, 0.4), (256, 0.4), (100, 3.7)] {
            let g = make_grid(n, w).unwrap();
            assert_relative_eq!(g.dx() * n as f64, w, max_relative = 2.0 * f64::EPSILON);
            let span = g.x()[n - 1] - g.x()[0];
            assert_relative_eq!(span, w - g.dx(), max_relative = 1e-12);
            assert_relative_eq!(g.x()[0], -g.x()[n - 1], max_relative = 1e-12);
            assert_relative_eq!(g.dk() * n as f64, 2.0 * PI / g.dx(), max_relative = 1e-12);
            assert_eq!(g.kx()[0], 0.0);
            assert_relative_eq!(g.kx()[n / 2], -(n as f64 / 2.0) * g.dk());
        }
    }

    proptest::proptest! {
        #[test]
        fn width_round_trips(log2n in 1u32..12, width in 1e-3f64..10.0) {
            let g = make_grid(1 << log2n, width).unwrap();
            proptest::prop_assert_eq!(g.dx() * g.n() as f64, width);
        }

        #[test]
        fn width_round_trips_within_an_ulp(half in 1usize..1024, width in 1e-3f64..10.0) {
            let g = make_grid(2 * half, width).unwrap();
            let w = g.dx() * g.n() as f64;
            proptest::prop_assert!(w == width || w == width.next_up() || w == width.next_down());
        }
    }

    #[test]
    fn fft_round_trip_and_parseval() {
        let n = 32;
        let fft = Fft2::new(n);
        let data: Vec<Complex64> = (0..n * n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut buf = data.clone();
        fft.forward(&mut buf);
        let e_in: f64 = data.iter().map(|v| v.norm_sqr()).sum();
        let e_k: f64 = buf.iter().map(|v| v.norm_sqr()).sum();
        assert_relative_eq!(e_in, e_k, max_relative = 1e-12);
        fft.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&data) {
            assert!((a - b).norm() <= 1e-12 * b.norm().max(1.0));
        }
    }

    #[test]
    fn fft_places_plane_wave_on_its_frequency() {
        let g = make_grid(16, 1.0).unwrap();
        let fft = Fft2::for_grid(&g);
        let (mx, my) = (3usize, 13usize); // ky index 13 is -3
        let mut buf = Vec::with_capacity(g.len());
        for &y in g.y() {
            for &x in g.x() {
                buf.push(Complex64::cis(g.kx()[mx] * x + g.ky()[my] * y));
            }
        }
        fft.forward(&mut buf);
        let peak = buf
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap()
            .0;
        assert_eq!(peak, g.index(my, mx));
    }
}
