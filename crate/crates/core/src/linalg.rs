//! Small dense linear-algebra helpers shared by the grid and controller code.

use nalgebra::{ComplexField, DMatrix, DVector};

use crate::error::{Error, Result};

/// Spectral norm `‖M‖₂`, the largest singular value of `m`.
pub fn spectral_norm(m: &DMatrix<f64>) -> Result<f64> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("spectral_norm input"));
    }
    if m.is_empty() {
        return Ok(0.0);
    }
    let svd = m.clone().svd(false, false);
    Ok(svd.singular_values.max())
}

/// One-norm (maximum absolute column sum).
pub fn norm_one<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.clone().abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverts a square matrix with partially pivoted LU.
///
/// Fails with [`Error::Singular`] when the factorization breaks down or the
/// one-norm condition estimate exceeds `1e14`.
pub fn invert<T: ComplexField<RealField = f64>>(
    m: &DMatrix<T>,
    context: &'static str,
) -> Result<DMatrix<T>> {
    let inv = m.clone().lu().try_inverse().ok_or(Error::Singular {
        context,
        condition: f64::INFINITY,
    })?;
    let condition = norm_one(m) * norm_one(&inv);
    if !condition.is_finite() || condition > 1e14 {
        return Err(Error::Singular { context, condition });
    }
    Ok(inv)
}

pub fn norm_inf(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_has_unit_norm() {
        assert_relative_eq!(spectral_norm(&DMatrix::identity(3, 3)).unwrap(), 1.0);
    }

    #[test]
    fn diagonal_norm_is_largest_magnitude() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -5.0]));
        assert_relative_eq!(spectral_norm(&m).unwrap(), 5.0, max_relative = 1e-12);
    }

    #[test]
    fn random_matrix_matches_gram_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m: DMatrix<f64> = DMatrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
            // independent route: largest eigenvalue of MᵀM
            let gram = m.transpose() * &m;
            let oracle = gram.symmetric_eigenvalues().max().sqrt();
            let norm = spectral_norm(&m).unwrap();
            assert!((norm - oracle).abs() <= 1e-8 * oracle, "{norm} vs {oracle}");
        }
    }

    #[test]
    fn non_finite_input_rejected() {
        let m = DMatrix::from_element(2, 2, f64::NAN);
        assert!(matches!(spectral_norm(&m), Err(Error::NonFinite(_))));
    }

    #[test]
    fn singular_matrix_reported() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(invert(&m, "test"), Err(Error::Singular { .. })));
    }
}
