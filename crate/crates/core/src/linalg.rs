//! Dense helpers shared by the norm families: spectral norm by power iteration,
//! a Cholesky-certified upper bound on it, and the elementary induced norms.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub(crate) const POWER_REL_TOL: f64 = 1e-12;
pub(crate) const POWER_MAX_ITERS: usize = 10_000;
const RESTART_SEED: u64 = 0x005e_ed0f_b10c;

/// Largest column sum of absolute values, the ℓ¹ → ℓ¹ norm.
pub fn max_col_abs_sum(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest row sum of absolute values, the ℓ∞ → ℓ∞ norm.
pub fn max_row_abs_sum(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Gram matrix on the smaller side; its top eigenvalue is ‖m‖₂².
fn gram(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() <= m.nrows() {
        m.tr_mul(m)
    } else {
        m * m.transpose()
    }
}

fn top_eigenvalue_psd(a: &DMatrix<f64>, start: DVector<f64>) -> f64 {
    let norm = start.norm();
    if norm == 0.0 {
        return 0.0;
    }
    let mut v = start / norm;
    let mut best: f64 = 0.0;
    let mut prev: Option<f64> = None;
    for _ in 0..POWER_MAX_ITERS {
        let w = a * &v;
        let rayleigh = v.dot(&w);
        let wn = w.norm();
        // both the Rayleigh quotient and ‖Av‖ are lower bounds on λ_max for unit v
        best = best.max(rayleigh).max(wn);
        if wn == 0.0 {
            break;
        }
        v = w / wn;
        if let Some(p) = prev {
            if (rayleigh - p).abs() <= POWER_REL_TOL * rayleigh.abs() {
                break;
            }
        }
        prev = Some(rayleigh);
    }
    best
}

/// Power-method estimate of λ_max of a symmetric positive semidefinite matrix:
/// an all-ones start plus one seeded random restart.
pub fn top_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let k = a.nrows();
    if k == 0 {
        return 0.0;
    }
    let ones = DVector::from_element(k, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);
    let random = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
    top_eigenvalue_psd(a, ones).max(top_eigenvalue_psd(a, random))
}

/// Largest singular value by power iteration on the Gram matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    top_eigenvalue(&gram(m)).max(0.0).sqrt()
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

/// A certified upper bound on ‖m‖₂.
///
/// Cheap bounds (√(‖m‖₁‖m‖∞) and Frobenius) are used when they are already tight;
/// otherwise U·I − mᵀm is checked positive definite by Cholesky at U slightly above
/// the power-method estimate, with the margin grown until factorization succeeds.
pub fn spectral_norm_upper(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let cheap = (max_col_abs_sum(m) * max_row_abs_sum(m))
        .sqrt()
        .min(frobenius(m));
    let a = gram(m);
    let estimate = top_eigenvalue(&a).max(0.0);
    if cheap * cheap <= estimate * (1.0 + 1e-9) {
        return cheap;
    }
    let k = a.nrows() as f64;
    let rounding = (k + 1.0) * (k + 1.0) * f64::EPSILON;
    let mut margin = 4.0 * rounding;
    while margin < 1.0 {
        let u = (estimate * (1.0 + margin)).max(f64::MIN_POSITIVE);
        let shifted = DMatrix::from_diagonal_element(a.nrows(), a.ncols(), u) - &a;
        if Cholesky::new(shifted).is_some() {
            // Cholesky backward error is O(k² ε ‖A‖); absorb it into the bound.
            let certified = (u * (1.0 + 8.0 * rounding)).sqrt();
            return certified.min(cheap);
        }
        margin *= 4.0;
    }
    cheap
}

/// LU inverse; `None` when singular or when the result is not finite.
pub fn inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if !m.is_square() {
        return None;
    }
    let inv = m.clone().try_inverse()?;
    inv.iter().all(|v| v.is_finite()).then_some(inv)
}

/// Rows and columns of `m` indexed by `idx`, in that order.
pub fn principal_submatrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn induced_norms_on_small_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(max_col_abs_sum(&m), 6.0);
        assert_eq!(max_row_abs_sum(&m), 7.0);
    }

    #[test]
    fn spectral_norm_matches_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1usize, 2, 5, 17, 40] {
            let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let svd = m.clone().svd(false, false).singular_values.max();
            let pm = spectral_norm(&m);
            let up = spectral_norm_upper(&m);
            assert!((pm - svd).abs() <= 1e-8 * svd, "n={n}: {pm} vs {svd}");
            assert!(up >= svd, "upper {up} below svd {svd}");
            assert!(up <= svd * (1.0 + 1e-6), "upper {up} loose against {svd}");
        }
    }

    #[test]
    fn spectral_upper_on_rectangular_and_zero() {
        let z = DMatrix::<f64>::zeros(3, 2);
        assert_eq!(spectral_norm(&z), 0.0);
        assert_eq!(spectral_norm_upper(&z), 0.0);
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 2.0, 0.0, 3.0, 0.0]);
        let svd = m.clone().svd(false, false).singular_values.max();
        assert!((spectral_norm(&m) - svd).abs() < 1e-10);
        assert!(spectral_norm_upper(&m) >= svd);
    }

    #[test]
    fn identity_upper_is_one() {
        let m = DMatrix::<f64>::identity(50, 50);
        assert_eq!(spectral_norm_upper(&m), 1.0);
    }

    #[test]
    fn inverse_rejects_singular() {
        let m = DMatrix::from_element(2, 2, 1.0);
        assert!(inverse(&m).is_none());
    }
}
