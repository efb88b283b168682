//! Projected biphoton state, concurrence, trace and crosstalk error rate.
//!
//! The two-qubit basis is ordered `|l0,l0⟩, |-l0,l0⟩, |l0,-l0⟩, |-l0,-l0⟩`
//! (Alice first), so a realization with amplitudes `(a, b, c, d)` contributes
//! the unnormalized state vector `(a, b, c, d)`. The common `1/√2` of the
//! projected state cancels in every normalized quantity and is dropped.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::modes::{inner_product, lg_mode, ComplexField, ModeIndex};

/// Largest tolerated `|ρ - ρ†|` entry, relative to the largest entry.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues of `R` below `-NEGATIVE_TOL` are an error; above it they are
/// clamped to zero.
pub const NEGATIVE_TOL: f64 = 1e-9;
/// Eigenvalues of `R` within this multiple of `ε·‖R‖` of zero are treated
/// as exact zeros.
const ROUNDOFF_FACTOR: f64 = 64.0;

/// Overlap amplitudes of one turbulence realization.
///
/// `a` and `d` are crosstalk amplitudes, `b` and `c` survival amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RealizationAmplitudes {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl RealizationAmplitudes {
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        RealizationAmplitudes { a, b, c, d }
    }

    pub fn as_vector(&self) -> Vector4<Complex64> {
        Vector4::new(self.a, self.b, self.c, self.d)
    }

    /// `|a|² + |b|² + |c|² + |d|²`.
    pub fn norm_sqr(&self) -> f64 {
        self.a.norm_sqr() + self.b.norm_sqr() + self.c.norm_sqr() + self.d.norm_sqr()
    }

    pub fn crosstalk(&self) -> f64 {
        self.a.norm_sqr() + self.d.norm_sqr()
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        RealizationAmplitudes::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }
}

/// Receiver projection basis `LG_{0,±l0}` at the receiver plane, evaluated
/// with the vacuum-propagated parameters of the transmitted waist.
#[derive(Debug, Clone)]
pub struct ReceiverBasis {
    pub l0: i32,
    pub plus: ComplexField,
    pub minus: ComplexField,
}

impl ReceiverBasis {
    pub fn new(grid: &GridSpec, l0: i32, w0: f64, wavelength: f64, z: f64) -> Result<Self> {
        if l0 == 0 {
            return Err(Error::InvalidParameter(
                "l0 = 0 gives a degenerate encoding".into(),
            ));
        }
        let l0 = l0.abs();
        Ok(ReceiverBasis {
            l0,
            plus: lg_mode(grid, ModeIndex::oam(l0), w0, wavelength, z)?,
            minus: lg_mode(grid, ModeIndex::oam(-l0), w0, wavelength, z)?,
        })
    }
}

/// Projects the received fields for inputs `LG_{0,-l0}` and `LG_{0,+l0}`
/// onto the encoding subspace.
///
/// The amplitudes are those of the projected two-photon state, so each
/// single-photon overlap carries the `1/√2` of the input Bell state and
/// `|a|²+|b|²+|c|²+|d|² ≤ 1`.
pub fn compute_amplitudes(
    psi_minus: &ComplexField,
    psi_plus: &ComplexField,
    basis: &ReceiverBasis,
) -> Result<RealizationAmplitudes> {
    let h = Complex64::from(std::f64::consts::FRAC_1_SQRT_2);
    Ok(RealizationAmplitudes {
        a: h * inner_product(psi_minus, &basis.plus)?,
        b: h * inner_product(psi_plus, &basis.plus)?,
        c: h * inner_product(psi_minus, &basis.minus)?,
        d: h * inner_product(psi_plus, &basis.minus)?,
    })
}

/// Disorder-averaged, projected and renormalized two-qubit state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix4 {
    pub rho: Matrix4<Complex64>,
    /// Trace before renormalization, `N`.
    pub trace_raw: f64,
}

impl DensityMatrix4 {
    /// Wraps an already normalized matrix (`N = 1`).
    pub fn from_matrix(rho: Matrix4<Complex64>) -> Self {
        DensityMatrix4 { rho, trace_raw: 1.0 }
    }

    /// Largest deviation from Hermiticity.
    pub fn hermitian_defect(&self) -> f64 {
        hermitian_defect(&self.rho)
    }
}

pub(crate) fn hermitian_defect(m: &Matrix4<Complex64>) -> f64 {
    (m - m.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max)
}

pub(crate) fn check_hermitian(m: &Matrix4<Complex64>) -> Result<()> {
    let scale = m.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
    let defect = hermitian_defect(m);
    if defect > HERMITIAN_TOL * scale {
        Err(Error::NotHermitian(defect))
    } else {
        Ok(())
    }
}

/// Sums in a fixed pairwise tree so the result does not depend on how the
/// ensemble was produced.
pub(crate) fn pairwise_sum<T, F>(items: &[T], leaf: &F) -> Matrix4<Complex64>
where
    F: Fn(&T) -> Matrix4<Complex64>,
{
    match items.len() {
        0 => Matrix4::zeros(),
        1 => leaf(&items[0]),
        n => {
            let (l, r) = items.split_at(n / 2);
            pairwise_sum(l, leaf) + pairwise_sum(r, leaf)
        }
    }
}

pub(crate) fn pairwise_sum_f64(items: &[f64]) -> f64 {
    match items.len() {
        0 => 0.0,
        1 => items[0],
        n => {
            let (l, r) = items.split_at(n / 2);
            pairwise_sum_f64(l) + pairwise_sum_f64(r)
        }
    }
}

/// `v v†` for the realization's state vector.
pub fn outer(amp: &RealizationAmplitudes) -> Matrix4<Complex64> {
    let v = amp.as_vector();
    v * v.adjoint()
}

/// Averages `v v†` over the ensemble and renormalizes by `N = ⟨|v|²⟩`.
pub fn accumulate_density_matrix(ensemble: &[RealizationAmplitudes]) -> Result<DensityMatrix4> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let n = ensemble.len() as f64;
    let second_moments = pairwise_sum(ensemble, &outer) / Complex64::from(n);
    let trace_raw = second_moments.trace().re;
    if !(trace_raw > 0.0) {
        return Err(Error::ZeroTrace);
    }
    Ok(DensityMatrix4 {
        rho: second_moments / Complex64::from(trace_raw),
        trace_raw,
    })
}

/// `σy ⊗ σy`, symmetric under exchange of the two qubits.
pub fn sigma_yy() -> Matrix4<Complex64> {
    let o = Complex64::new(1.0, 0.0);
    let z = Complex64::default();
    Matrix4::new(
        z, z, z, -o, //
        z, z, o, z, //
        z, o, z, z, //
        -o, z, z, z,
    )
}

/// `ρ (σy⊗σy) ρ* (σy⊗σy)`.
pub fn wootters_matrix(rho: &Matrix4<Complex64>) -> Matrix4<Complex64> {
    let yy = sigma_yy();
    rho * (yy * rho.conjugate() * yy)
}

/// Eigenvalues of a general complex 4×4 matrix (unordered).
pub fn eigenvalues(m: &Matrix4<Complex64>) -> [Complex64; 4] {
    let schur = m.schur();
    let (_, t) = schur.unpack();
    [t[(0, 0)], t[(1, 1)], t[(2, 2)], t[(3, 3)]]
}

/// Real eigenvalues of `R` sorted in decreasing order, clamped at zero.
pub fn wootters_eigenvalues(rho: &Matrix4<Complex64>) -> Result<[f64; 4]> {
    let r = wootters_matrix(rho);
    let scale = r.norm();
    let roundoff = ROUNDOFF_FACTOR * f64::EPSILON * scale;
    let mut lam = eigenvalues(&r).map(|z| z.re);
    for l in &mut lam {
        if *l < -NEGATIVE_TOL {
            return Err(Error::NotPositive(*l));
        }
        if *l <= roundoff {
            *l = 0.0;
        }
    }
    lam.sort_by(|a, b| b.total_cmp(a));
    Ok(lam)
}

/// Wootters concurrence `max{√λ1 − √λ2 − √λ3 − √λ4, 0}`.
pub fn concurrence(rho: &DensityMatrix4) -> Result<f64> {
    concurrence_of(&rho.rho)
}

pub fn concurrence_of(rho: &Matrix4<Complex64>) -> Result<f64> {
    check_hermitian(rho)?;
    Ok(concurrence_argument(rho)?.max(0.0))
}

/// `√λ1 − √λ2 − √λ3 − √λ4` before the cut at zero.
pub fn concurrence_argument(rho: &Matrix4<Complex64>) -> Result<f64> {
    let lam = wootters_eigenvalues(rho)?;
    let s = lam.map(f64::sqrt);
    Ok(s[0] - s[1] - s[2] - s[3])
}

/// Crosstalk error rate `⟨|a|² + |d|²⟩ / N`.
pub fn qber(ensemble: &[RealizationAmplitudes]) -> Result<f64> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let cross: Vec<f64> = ensemble.iter().map(|e| e.crosstalk()).collect();
    let norm: Vec<f64> = ensemble.iter().map(|e| e.norm_sqr()).collect();
    let total = pairwise_sum_f64(&norm);
    if !(total > 0.0) {
        return Err(Error::ZeroTrace);
    }
    Ok(pairwise_sum_f64(&cross) / total)
}

/// Point estimates `(C, N, R)` of one ensemble.
pub fn point_metrics(ensemble: &[RealizationAmplitudes]) -> Result<(f64, f64, f64)> {
    let rho = accumulate_density_matrix(ensemble)?;
    Ok((concurrence(&rho)?, rho.trace_raw, qber(ensemble)?))
}

/// Ensemble observables with their standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuantumMetrics {
    pub concurrence: f64,
    pub concurrence_err: f64,
    pub trace: f64,
    pub trace_err: f64,
    pub qber: f64,
    pub qber_err: f64,
    pub n_realizations: usize,
}
