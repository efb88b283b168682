//! Statistical error bars: Bloch-representation error propagation to the
//! concurrence through first-order non-Hermitian eigenvalue perturbation,
//! and a bootstrap cross-check.
//!
//! Normalization: `ρ = ¼ Σ B_ij σi⊗σj` with `B_ij = tr(ρ σi⊗σj)`, so the
//! Wootters matrix reads `R = (1/16) Σ B_ij B_kl Γ_ijkl`.

use std::sync::OnceLock;

use nalgebra::{DMatrix, Matrix2, Matrix4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quantum::{
    accumulate_density_matrix, check_hermitian, concurrence_of, eigenvalues, outer,
    point_metrics, DensityMatrix4, RealizationAmplitudes,
};

/// Floor below which an eigenvalue is left out of the `1/√λ` sum.
pub const EIGEN_FLOOR: f64 = 1e-12;
/// Eigenvalues closer than this are treated as one degenerate cluster.
pub const DEGENERACY_GAP: f64 = 1e-10;

pub type Bloch = [[f64; 4]; 4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochDecomposition {
    pub b: Bloch,
    /// Standard errors of the mean of each coefficient.
    pub db: Bloch,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `σ0 = I, σ1 = X, σ2 = Y, σ3 = Z`.
pub fn pauli(i: usize) -> Matrix2<Complex64> {
    let (o, z) = (c(1.0, 0.0), c(0.0, 0.0));
    match i {
        0 => Matrix2::new(o, z, z, o),
        1 => Matrix2::new(z, o, o, z),
        2 => Matrix2::new(z, c(0.0, -1.0), c(0.0, 1.0), z),
        3 => Matrix2::new(o, z, z, -o),
        _ => panic!("Pauli index {i} out of range"),
    }
}

fn kron(a: &Matrix2<Complex64>, b: &Matrix2<Complex64>) -> Matrix4<Complex64> {
    let mut m = Matrix4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    m[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    m
}

fn pauli_products() -> &'static [Matrix4<Complex64>] {
    static CACHE: OnceLock<Vec<Matrix4<Complex64>>> = OnceLock::new();
    CACHE.get_or_init(|| {
        let mut v = Vec::with_capacity(16);
        for i in 0..4 {
            for j in 0..4 {
                v.push(kron(&pauli(i), &pauli(j)));
            }
        }
        v
    })
}

/// `σi ⊗ σj`.
pub fn pauli_product(i: usize, j: usize) -> &'static Matrix4<Complex64> {
    &pauli_products()[4 * i + j]
}

/// `B_ij = tr(ρ σi⊗σj)`; rejects non-Hermitian input.
pub fn bloch_coefficients(rho: &DensityMatrix4) -> Result<Bloch> {
    bloch_of(&rho.rho)
}

pub fn bloch_of(rho: &Matrix4<Complex64>) -> Result<Bloch> {
    check_hermitian(rho)?;
    let mut b = [[0.0; 4]; 4];
    for (i, row) in b.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let t = (rho * pauli_product(i, j)).trace();
            if t.im.abs() > 1e-12 * t.re.abs().max(1.0) {
                return Err(Error::NotHermitian(t.im.abs()));
            }
            *v = t.re;
        }
    }
    Ok(b)
}

/// `¼ Σ B_ij σi⊗σj`.
pub fn reconstruct(b: &Bloch) -> Matrix4<Complex64> {
    let mut m = Matrix4::zeros();
    for (i, row) in b.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            m += pauli_product(i, j) * c(0.25 * v, 0.0);
        }
    }
    m
}

/// Standard error of the mean of every Bloch coefficient.
///
/// Each realization contributes `ρ_k = v v† / N` with the ensemble trace
/// `N`, whose ensemble mean is exactly the averaged density matrix.
pub fn bloch_errors(ensemble: &[RealizationAmplitudes]) -> Result<Bloch> {
    let n = ensemble.len();
    if n < 2 {
        return Err(Error::EnsembleTooSmall { needed: 2, got: n });
    }
    let trace = accumulate_density_matrix(ensemble)?.trace_raw;
    let per: Vec<Bloch> = ensemble
        .iter()
        .map(|e| {
            let m = outer(e) / c(trace, 0.0);
            let mut b = [[0.0; 4]; 4];
            for (i, row) in b.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = (m * pauli_product(i, j)).trace().re;
                }
            }
            b
        })
        .collect();
    let mut db = [[0.0; 4]; 4];
    for (i, row) in db.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let xs: Vec<f64> = per.iter().map(|b| b[i][j]).collect();
            *v = crate::turbulence::mean_and_sem(&xs).1;
        }
    }
    Ok(db)
}

/// Coefficients of the averaged state together with their errors.
pub fn bloch_decomposition(ensemble: &[RealizationAmplitudes]) -> Result<BlochDecomposition> {
    let rho = accumulate_density_matrix(ensemble)?;
    Ok(BlochDecomposition {
        b: bloch_coefficients(&rho)?,
        db: bloch_errors(ensemble)?,
    })
}

fn gammas() -> &'static [Matrix4<Complex64>] {
    static CACHE: OnceLock<Vec<Matrix4<Complex64>>> = OnceLock::new();
    CACHE.get_or_init(|| {
        let y = pauli(2);
        let half = |a: usize, b: usize| pauli(a) * y * pauli(b).conjugate() * y;
        let mut v = Vec::with_capacity(256);
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    for l in 0..4 {
                        v.push(kron(&half(i, k), &half(j, l)));
                    }
                }
            }
        }
        v
    })
}

/// `Γ_ijkl = (σi σy σk* σy) ⊗ (σj σy σl* σy)`.
pub fn gamma_tensor(i: usize, j: usize, k: usize, l: usize) -> &'static Matrix4<Complex64> {
    assert!(i < 4 && j < 4 && k < 4 && l < 4, "Γ index out of range");
    &gammas()[64 * i + 16 * j + 4 * k + l]
}

/// `R = (1/16) Σ B_ij B_kl Γ_ijkl`.
pub fn wootters_from_bloch(b: &Bloch) -> Matrix4<Complex64> {
    let mut r = Matrix4::zeros();
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                for l in 0..4 {
                    let w = b[i][j] * b[k][l];
                    if w != 0.0 {
                        r += gamma_tensor(i, j, k, l) * c(w / 16.0, 0.0);
                    }
                }
            }
        }
    }
    r
}

/// `ΔR = Σ_mn (∂R/∂B_mn) ΔB_mn` with
/// `∂R/∂B_mn = (1/16) Σ_kl B_kl (Γ_mnkl + Γ_klmn)`.
pub fn wootters_differential(b: &Bloch, delta: &Bloch) -> Matrix4<Complex64> {
    let mut r = Matrix4::zeros();
    for m in 0..4 {
        for n in 0..4 {
            let dbmn = delta[m][n];
            if dbmn == 0.0 {
                continue;
            }
            for k in 0..4 {
                for l in 0..4 {
                    let w = b[k][l] * dbmn / 16.0;
                    if w != 0.0 {
                        r += (gamma_tensor(m, n, k, l) + gamma_tensor(k, l, m, n)) * c(w, 0.0);
                    }
                }
            }
        }
    }
    r
}

/// First-order shift of one eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenShift {
    pub eigenvalue: Complex64,
    /// `W† ΔR V` with `W† V = 1`; averaged over a degenerate cluster.
    pub shift: Complex64,
    pub multiplicity: usize,
}

/// Orthonormal basis (columns) of the `m` smallest right singular vectors.
fn near_null_space(a: &Matrix4<Complex64>, m: usize) -> DMatrix<Complex64> {
    let svd = a.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let mut basis = DMatrix::zeros(4, m);
    for (col, &idx) in order.iter().take(m).enumerate() {
        for r in 0..4 {
            basis[(r, col)] = vt[(idx, r)].conj();
        }
    }
    basis
}

/// First-order eigenvalue shifts of a diagonalizable (possibly
/// non-Hermitian) matrix under the perturbation `dr`.
///
/// Right eigenvectors `V` span the near-null space of `R − λ`, left ones `W`
/// that of `(R − λ)†`; they are normalized biorthogonally. Eigenvalues
/// within [`DEGENERACY_GAP`] form a cluster whose shifts are the eigenvalues
/// of `(W†V)⁻¹ W† ΔR V`; the cluster average is reported for every member.
pub fn first_order_shifts(
    r: &Matrix4<Complex64>,
    dr: &Matrix4<Complex64>,
) -> Result<Vec<EigenShift>> {
    let mut lam = eigenvalues(r).to_vec();
    lam.sort_by(|a, b| b.re.total_cmp(&a.re));
    let mut out = Vec::with_capacity(4);
    let mut start = 0;
    while start < 4 {
        let mut end = start + 1;
        while end < 4 && (lam[end] - lam[end - 1]).norm() < DEGENERACY_GAP {
            end += 1;
        }
        let m = end - start;
        let mu = lam[start..end].iter().sum::<Complex64>() / c(m as f64, 0.0);
        let a = r - Matrix4::identity() * mu;
        let v = near_null_space(&a, m);
        let w = near_null_space(&a.adjoint(), m);
        let wv = w.adjoint() * &v;
        let proj = w.adjoint() * DMatrix::from_iterator(4, 4, dr.iter().copied()) * &v;
        let shift = match wv.try_inverse() {
            Some(inv) => (inv * proj).trace() / c(m as f64, 0.0),
            None => {
                return Err(Error::InvalidParameter(
                    "Wootters matrix is not diagonalizable at this point".into(),
                ))
            }
        };
        for l in &lam[start..end] {
            out.push(EigenShift {
                eigenvalue: *l,
                shift,
                multiplicity: m,
            });
        }
        start = end;
    }
    Ok(out)
}

/// Propagated concurrence error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcurrenceError {
    pub value: f64,
    /// Set when `C = 0`: the derivative is taken on the argument of the
    /// `max{·, 0}` and only bounds the error from above.
    pub one_sided: bool,
    /// Eigenvalues left out of the sum because they fell below
    /// [`EIGEN_FLOOR`].
    pub excluded: usize,
}

/// `(ΔC)² = Σ_i (Δλ_i / (2√λ_i))²` with `Δλ_i = |W_i† ΔR V_i|`.
pub fn concurrence_error(bloch: &BlochDecomposition) -> Result<ConcurrenceError> {
    let r = wootters_from_bloch(&bloch.b);
    let dr = wootters_differential(&bloch.b, &bloch.db);
    let shifts = first_order_shifts(&r, &dr)?;
    let mut sum = 0.0;
    let mut excluded = 0;
    let mut arg = 0.0;
    for (i, s) in shifts.iter().enumerate() {
        let lam = s.eigenvalue.re;
        let root = lam.max(0.0).sqrt();
        arg += if i == 0 { root } else { -root };
        if lam > EIGEN_FLOOR {
            sum += (s.shift.norm() / (2.0 * root)).powi(2);
        } else {
            excluded += 1;
        }
    }
    Ok(ConcurrenceError {
        value: sum.sqrt(),
        one_sided: arg <= 0.0,
        excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapErrors {
    pub concurrence: f64,
    pub trace: f64,
    pub qber: f64,
}

/// Resamples realizations with replacement and reports the sample standard
/// deviations of `C`, `N` and `R`.
///
/// Resample `i` draws from ChaCha8 stream `i` of `seed`, so the result does
/// not depend on the number of worker threads.
pub fn bootstrap_error(
    ensemble: &[RealizationAmplitudes],
    n_resamples: usize,
    seed: u64,
) -> Result<BootstrapErrors> {
    if ensemble.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if n_resamples < 100 {
        return Err(Error::InvalidParameter(format!(
            "bootstrap needs at least 100 resamples, got {n_resamples}"
        )));
    }
    let n = ensemble.len();
    let samples: Vec<(f64, f64, f64)> = (0..n_resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let resample: Vec<RealizationAmplitudes> =
                (0..n).map(|_| ensemble[rng.random_range(0..n)]).collect();
            point_metrics(&resample)
        })
        .collect::<Result<_>>()?;
    let sd = |f: fn(&(f64, f64, f64)) -> f64| {
        let xs: Vec<f64> = samples.iter().map(f).collect();
        crate::turbulence::mean_and_sem(&xs).1 * (xs.len() as f64).sqrt()
    };
    Ok(BootstrapErrors {
        concurrence: sd(|s| s.0),
        trace: sd(|s| s.1),
        qber: sd(|s| s.2),
    })
}

/// Convenience wrapper: concurrence of a Bloch vector.
pub fn concurrence_from_bloch(b: &Bloch) -> Result<f64> {
    concurrence_of(&reconstruct(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::wootters_matrix;

    fn bell_phi_plus() -> Matrix4<Complex64> {
        let mut m = Matrix4::zeros();
        for &i in &[0, 3] {
            for &j in &[0, 3] {
                m[(i, j)] = c(0.5, 0.0);
            }
        }
        m
    }

    fn random_rho(seed: u64) -> Matrix4<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Matrix4::from_fn(|_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let m = a * a.adjoint();
        let t = m.trace();
        m / t
    }

    #[test]
    fn bell_state_coefficients() {
        let b = bloch_of(&bell_phi_plus()).unwrap();
        let mut want = [[0.0; 4]; 4];
        want[0][0] = 1.0;
        want[1][1] = 1.0;
        want[2][2] = -1.0;
        want[3][3] = 1.0;
        for i in 0..4 {
            for j in 0..4 {
                assert!((b[i][j] - want[i][j]).abs() < 1e-15, "B{i}{j} = {}", b[i][j]);
            }
        }
    }

    #[test]
    fn round_trip_and_unit_trace() {
        for s in 0..20 {
            let rho = random_rho(s);
            let b = bloch_of(&rho).unwrap();
            assert!((b[0][0] - 1.0).abs() < 1e-14);
            assert!((reconstruct(&b) - rho).norm() < 1e-12);
        }
    }

    #[test]
    fn gamma_identity_and_direct_products() {
        assert!((gamma_tensor(0, 0, 0, 0) - Matrix4::identity()).norm() < 1e-15);
        let y = pauli(2);
        for j in 0..4 {
            for l in 0..4 {
                // direct 2×2 evaluation of each factor
                let left = y * y * y.conjugate() * y;
                let right = pauli(j) * y * pauli(l).conjugate() * y;
                let want = kron(&left, &right);
                assert!((gamma_tensor(2, j, 2, l) - want).norm() < 1e-15);
            }
        }
        // σy σy σy* σy = -σy σy σy σy = -I on the first factor
        let g = gamma_tensor(2, 0, 2, 0);
        assert!((g + Matrix4::identity()).norm() < 1e-15);
    }

    #[test]
    fn bloch_route_reproduces_wootters_matrix() {
        for s in 0..20 {
            let rho = random_rho(100 + s);
            let b = bloch_of(&rho).unwrap();
            let direct = wootters_matrix(&rho);
            assert!((wootters_from_bloch(&b) - direct).norm() < 1e-10);
        }
    }

    #[test]
    fn eigenvalue_sum_matches_trace() {
        for s in 0..20 {
            let r = wootters_matrix(&random_rho(200 + s));
            let sum: Complex64 = eigenvalues(&r).iter().sum();
            assert!((sum - r.trace()).norm() < 1e-10);
        }
    }

    #[test]
    fn hermitian_case_reduces_to_diagonal_shift() {
        let rho = Matrix4::from_diagonal(&nalgebra::Vector4::new(
            c(0.4, 0.0),
            c(0.3, 0.0),
            c(0.2, 0.0),
            c(0.1, 0.0),
        ));
        let r = wootters_matrix(&rho);
        let diag = [0.01, 0.02, 0.05, 0.03];
        let dr = Matrix4::from_fn(|i, j| if i == j { c(diag[i], 0.0) } else { c(0.003, 0.0) });
        let shifts = first_order_shifts(&r, &dr).unwrap();
        // R = diag(0.04, 0.06, 0.06, 0.04): clusters {1,2} and {0,3}
        for s in &shifts {
            assert_eq!(s.multiplicity, 2);
            let want = if (s.eigenvalue.re - 0.06).abs() < 1e-12 {
                0.5 * (0.02 + 0.05)
            } else {
                0.5 * (0.01 + 0.03)
            };
            assert!((s.shift - c(want, 0.0)).norm() < 1e-12);
        }
    }

    fn sorted_re(m: &Matrix4<Complex64>) -> Vec<f64> {
        let mut v: Vec<f64> = eigenvalues(m).iter().map(|v| v.re).collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    #[test]
    fn first_order_shifts_match_central_differences() {
        let t = 1e-4;
        for s in 0..24u64 {
            // alternate generic states with nearly pure ones around a Bell state
            let eps = [1.0, 0.3, 0.05, 0.01][(s % 4) as usize];
            let rho0 = bell_phi_plus() * c(1.0 - eps, 0.0) + random_rho(300 + s) * c(eps, 0.0);
            let rho1 = random_rho(400 + s);
            let (b0, b1) = (bloch_of(&rho0).unwrap(), bloch_of(&rho1).unwrap());
            let mut db = [[0.0; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    db[i][j] = t * (b1[i][j] - b0[i][j]);
                }
            }
            let shifts = first_order_shifts(&wootters_matrix(&rho0), &wootters_differential(&b0, &db)).unwrap();
            let plus = sorted_re(&wootters_matrix(&(rho0 * c(1.0 - t, 0.0) + rho1 * c(t, 0.0))));
            let minus = sorted_re(&wootters_matrix(&(rho0 * c(1.0 + t, 0.0) - rho1 * c(t, 0.0))));
            for (k, sh) in shifts.iter().enumerate() {
                assert_eq!(sh.multiplicity, 1);
                let fd = (plus[k] - minus[k]) / 2.0;
                let rel = (sh.shift.re - fd).abs() / fd.abs();
                assert!(rel < 1e-3, "state {s}, eigenvalue {k}: predicted {} vs {fd} ({rel:.2e})", sh.shift.re);
            }
        }
    }

    #[test]
    fn zero_errors_give_zero_concurrence_error() {
        let rho = random_rho(7);
        let bd = BlochDecomposition {
            b: bloch_of(&rho).unwrap(),
            db: [[0.0; 4]; 4],
        };
        assert_eq!(concurrence_error(&bd).unwrap().value, 0.0);
    }

    #[test]
    fn identical_realizations_have_no_spread() {
        let e = vec![
            RealizationAmplitudes::new(c(0.1, 0.0), c(0.6, 0.2), c(0.5, -0.1), c(0.0, 0.05));
            10
        ];
        let db = bloch_errors(&e).unwrap();
        assert!(db.iter().flatten().all(|&v| v < 1e-15));
        let bs = bootstrap_error(&e, 100, 1).unwrap();
        assert!(bs.concurrence < 1e-12 && bs.trace < 1e-15 && bs.qber < 1e-15);
        assert!(matches!(
            bloch_errors(&e[..1]),
            Err(Error::EnsembleTooSmall { .. })
        ));
        assert!(bootstrap_error(&e, 10, 1).is_err());
        assert_eq!(bootstrap_error(&[], 100, 1), Err(Error::EmptyEnsemble));
    }
}
