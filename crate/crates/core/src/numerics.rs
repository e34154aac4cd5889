//! Dense linear-algebra kernels shared by the rest of the crate.
//!
//! Matrices are plain `nalgebra` dynamic matrices. Real symmetric and complex
//! Hermitian inputs go through the same generic code path, so a routine that
//! works for `RealMatrix` also works for `ComplexMatrix`.

use nalgebra::{ComplexField, DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type RealMatrix = DMatrix<f64>;
pub type ComplexMatrix = DMatrix<Complex64>;
pub type RealVector = DVector<f64>;
pub type ComplexVector = DVector<Complex64>;

/// Symmetry tolerance, relative to the largest entry.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Negative eigenvalues above `-PSD_CLAMP * max|value|` are round-off.
pub const PSD_CLAMP: f64 = 1e-12;

/// Eigen-decomposition `X = V diag(values) V^H` with values sorted non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair<T: nalgebra::Scalar> {
    pub values: RealVector,
    pub vectors: DMatrix<T>,
}

impl<T> EigenPair<T>
where
    T: ComplexField<RealField = f64>,
{
    /// `V diag(values) V^H`.
    pub fn reconstruct(&self) -> DMatrix<T> {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col.scale_mut(self.values[j]);
        }
        &scaled * self.vectors.adjoint()
    }
}

fn max_modulus<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> f64 {
    m.iter().map(|v| v.clone().modulus()).fold(0.0, f64::max)
}

/// Check squareness and Hermitian symmetry within [`HERMITIAN_TOL`].
pub fn check_hermitian<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Contract(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.clone().modulus().is_finite()) {
        return Err(Error::Contract("matrix has non-finite entries".into()));
    }
    let tol = HERMITIAN_TOL * max_modulus(m).max(1.0);
    let n = m.nrows();
    for i in 0..n {
        for j in i..n {
            let gap = (m[(i, j)].clone() - m[(j, i)].clone().conjugate()).modulus();
            if gap > tol {
                return Err(Error::Contract(format!(
                    "matrix is not Hermitian: entry ({i},{j}) differs from its mirror by {gap:e}"
                )));
            }
        }
    }
    Ok(())
}

/// `(X + X^H) / 2`.
pub fn hermitize<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.adjoint()).unscale(2.0)
}

/// Eigen-decomposition of a Hermitian (or real symmetric) matrix.
///
/// Values come back sorted non-increasing. Each eigenvector is rotated so
/// that its largest-magnitude entry is real and positive, which makes the
/// basis reproducible for inputs with distinct eigenvalues. Negative values
/// within `PSD_CLAMP * max|value|` of zero are clamped to zero.
pub fn hermitian_eig<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> Result<EigenPair<T>> {
    check_hermitian(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(EigenPair {
            values: RealVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = nalgebra::SymmetricEigen::new(hermitize(m));

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let scale = eig.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut values = RealVector::zeros(n);
    let mut vectors = DMatrix::<T>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut v = eig.eigenvalues[src];
        if v < 0.0 && v > -PSD_CLAMP * scale {
            v = 0.0;
        }
        values[dst] = v;

        let col = eig.eigenvectors.column(src);
        let peak = col.iter().map(|c| c.clone().modulus()).fold(0.0, f64::max);
        let pivot = col
            .iter()
            .find(|c| (*c).clone().modulus() >= peak * (1.0 - 1e-12))
            .cloned()
            .expect("eigenvector has at least one entry");
        let phase = pivot.clone().conjugate().unscale(pivot.modulus());
        vectors.set_column(dst, &(col * phase));
    }
    Ok(EigenPair { values, vectors })
}

/// Lower Cholesky factor `L` with `L L^H = X`.
pub fn cholesky_lower<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> Result<DMatrix<T>> {
    check_hermitian(m)?;
    nalgebra::Cholesky::new(hermitize(m))
        .map(|c| c.unpack())
        .ok_or_else(|| Error::Singular {
            matrix: "cholesky input".into(),
        })
}

/// Solve `lhs * X = rhs` for Hermitian positive-definite `lhs`.
pub fn hpd_solve<T: ComplexField<RealField = f64>>(lhs: &DMatrix<T>, rhs: &DMatrix<T>) -> Result<DMatrix<T>> {
    check_hermitian(lhs)?;
    if lhs.nrows() != rhs.nrows() {
        return Err(Error::DimensionMismatch {
            context: "hpd_solve",
            expected: format!("{} rhs rows", lhs.nrows()),
            found: format!("{}", rhs.nrows()),
        });
    }
    let chol = nalgebra::Cholesky::new(hermitize(lhs)).ok_or_else(|| Error::Singular {
        matrix: "hpd_solve lhs".into(),
    })?;
    Ok(chol.solve(rhs))
}

/// Real trace of a square complex matrix; the imaginary part is dropped.
pub fn real_trace(m: &ComplexMatrix) -> f64 {
    m.diagonal().iter().map(|c| c.re).sum()
}

pub fn complexify(m: &RealMatrix) -> ComplexMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Frobenius distance `|a - b|_F / max(|b|_F, tiny)`.
pub fn relative_frobenius<T: ComplexField<RealField = f64>>(a: &DMatrix<T>, b: &DMatrix<T>) -> f64 {
    let denom = b.norm().max(f64::MIN_POSITIVE);
    (a - b).norm() / denom
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_hermitian(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
        let g = ComplexMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        hermitize(&g)
    }

    fn random_hpd(n: usize, rng: &mut impl Rng) -> ComplexMatrix {
        let g = ComplexMatrix::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        &g * g.adjoint() + ComplexMatrix::identity(n, n).scale(0.5)
    }

    #[test]
    fn eig_identity() {
        let e = hermitian_eig(&RealMatrix::identity(2, 2)).unwrap();
        assert_eq!(e.values.as_slice(), &[1.0, 1.0]);
        let gram = e.vectors.transpose() * &e.vectors;
        assert!(relative_frobenius(&gram, &RealMatrix::identity(2, 2)) < 1e-12);
    }

    #[test]
    fn eig_two_by_two_correlation() {
        let m = RealMatrix::from_row_slice(2, 2, &[1.0, 0.8, 0.8, 1.0]);
        let e = hermitian_eig(&m).unwrap();
        assert_relative_eq!(e.values[0], 1.8, epsilon = 1e-12);
        assert_relative_eq!(e.values[1], 0.2, epsilon = 1e-12);
    }

    #[test]
    fn eig_sorts_diagonal_input() {
        let m = RealMatrix::from_diagonal(&RealVector::from_vec(vec![0.2, 1.8]));
        let e = hermitian_eig(&m).unwrap();
        assert_eq!(e.values.as_slice(), &[1.8, 0.2]);
        // basis is permuted: first vector is e_2, sign fixed positive
        assert_relative_eq!(e.vectors[(1, 0)], 1.0, epsilon = 1e-15);
        assert_relative_eq!(e.vectors[(0, 1)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn eig_rejects_non_square_and_non_hermitian() {
        assert!(matches!(
            hermitian_eig(&RealMatrix::zeros(2, 3)),
            Err(Error::Contract(_))
        ));
        let m = RealMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(hermitian_eig(&m), Err(Error::Contract(_))));
        let h = ComplexMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 1.0), c(0.0, 1.0), c(1.0, 0.0)]);
        assert!(matches!(hermitian_eig(&h), Err(Error::Contract(_))));
    }

    #[test]
    fn eig_clamps_round_off_on_rank_deficient_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = ComplexMatrix::from_fn(6, 2, |_, _| c(rng.gen(), rng.gen()));
        let e = hermitian_eig(&(&g * g.adjoint())).unwrap();
        assert!(e.values.iter().all(|&v| v >= 0.0));
        assert!(e.values[2] < 1e-12 * e.values[0]);
    }

    #[test]
    fn eig_is_reproducible_and_phase_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = random_hermitian(5, &mut rng);
        let a = hermitian_eig(&h).unwrap();
        let b = hermitian_eig(&h.clone()).unwrap();
        assert_eq!(a, b);
        for col in a.vectors.column_iter() {
            let peak = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let pivot = col.iter().find(|z| z.norm() >= peak * (1.0 - 1e-12)).unwrap();
            assert!(pivot.im.abs() < 1e-14 && pivot.re > 0.0);
        }
    }

    #[test]
    fn eig_round_trip_and_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 5, 12, 30] {
            let h = random_hermitian(n, &mut rng);
            let e = hermitian_eig(&h).unwrap();
            assert!(relative_frobenius(&e.reconstruct(), &h) < 1e-10);
            let gram = e.vectors.adjoint() * &e.vectors;
            assert!((gram - ComplexMatrix::identity(n, n)).norm() < 1e-10);
            assert!(e.values.as_slice().windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn hpd_solve_examples() {
        let b = ComplexMatrix::from_fn(3, 2, |i, j| c(i as f64, j as f64));
        let x = hpd_solve(&ComplexMatrix::identity(3, 3), &b).unwrap();
        assert_eq!(x, b);

        let two = RealMatrix::identity(3, 3).scale(2.0);
        let x = hpd_solve(&two, &RealMatrix::identity(3, 3)).unwrap();
        assert!(relative_frobenius(&x, &RealMatrix::identity(3, 3).scale(0.5)) < 1e-15);

        let lhs = RealMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let x = hpd_solve(&lhs, &RealMatrix::from_column_slice(2, 1, &[1.0, 1.0])).unwrap();
        assert_relative_eq!(x[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(x[1], 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn hpd_solve_rejects_indefinite() {
        let lhs = RealMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = hpd_solve(&lhs, &RealMatrix::identity(2, 2)).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
        assert_eq!(err.named("S").to_string(), "matrix `S` is not positive definite");
    }

    #[test]
    fn hpd_solve_matches_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = random_hpd(5, &mut rng);
            let b = ComplexMatrix::from_fn(5, 3, |_, _| c(rng.gen(), rng.gen()));
            let x = hpd_solve(&a, &b).unwrap();
            let via_inverse = a.clone().try_inverse().unwrap() * &b;
            assert!(relative_frobenius(&x, &via_inverse) < 1e-9);
            assert!(relative_frobenius(&(&a * &x), &b) < 1e-10);
        }
    }

    #[test]
    fn cholesky_examples() {
        assert_eq!(
            cholesky_lower(&RealMatrix::identity(3, 3)).unwrap(),
            RealMatrix::identity(3, 3)
        );
        let l = cholesky_lower(&RealMatrix::from_diagonal(&RealVector::from_vec(vec![4.0, 9.0]))).unwrap();
        assert_eq!(l, RealMatrix::from_diagonal(&RealVector::from_vec(vec![2.0, 3.0])));
        let l = cholesky_lower(&RealMatrix::from_row_slice(2, 2, &[1.0, 0.8, 0.8, 1.0])).unwrap();
        let expected = RealMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.8, 0.6]);
        assert!(relative_frobenius(&l, &expected) < 1e-15);
    }

    #[test]
    fn cholesky_complex_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_hpd(6, &mut rng);
        let l = cholesky_lower(&a).unwrap();
        assert!(relative_frobenius(&(&l * l.adjoint()), &a) < 1e-10);
        for i in 0..6 {
            assert!(l[(i, i)].im.abs() < 1e-15 && l[(i, i)].re > 0.0);
            for j in i + 1..6 {
                assert_eq!(l[(i, j)], c(0.0, 0.0));
            }
        }
        assert!(matches!(
            cholesky_lower(&RealMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])),
            Err(Error::Singular { .. })
        ));
    }
}
