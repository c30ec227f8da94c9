//! Dense linear algebra used by knockoff construction and the estimators.
//!
//! Everything here is a pure function of its inputs. Sizes are desk scale
//! (`p` in the hundreds), so the routines favor clarity and accuracy
//! (Householder QR, cyclic Jacobi) over blocking.

mod eigen;
mod matrix;
mod qr;

pub use eigen::{symmetric_eigen, SymmetricEigen};
pub use matrix::{dot, max_abs, norm2, Matrix, Vector};
pub use qr::{back_substitute, HouseholderQr};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Pivots below this fraction of the largest pivot signal rank deficiency.
pub const RANK_TOLERANCE: f64 = 1e-10;
/// Allowed `|a_ij - a_ji|`, relative to `max(1, max|a|)`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;
/// Eigenvalues in `[-PSD_TOLERANCE, 0)` are clipped to zero.
pub const PSD_TOLERANCE: f64 = 1e-8;

fn check_full_rank<T: Scalar>(qr: &HouseholderQr<T>) -> Result<()> {
    let pivots = qr.pivots();
    let largest = pivots.iter().fold(T::zero(), |m, &v| m.max(v));
    for &pv in &pivots {
        if !(pv > T::lit(RANK_TOLERANCE) * largest) {
            return Err(Error::SingularDesign {
                pivot: pv.as_f64(),
                largest: largest.as_f64(),
            });
        }
    }
    Ok(())
}

/// Minimizes `‖y − Xβ‖₂` for a tall, full-column-rank `X` via Householder QR.
pub fn least_squares<T: Scalar>(x: &Matrix<T>, y: &[T]) -> Result<Vector<T>> {
    let (n, q) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::InvalidInput(format!(
            "response length {} does not match {n} rows",
            y.len()
        )));
    }
    if n < q {
        return Err(Error::InvalidInput(format!(
            "least squares needs n >= q, got {n} x {q}"
        )));
    }
    let qr = HouseholderQr::new(x);
    check_full_rank(&qr)?;
    let mut z = y.to_vec();
    qr.apply_qt(&mut z);
    Ok(back_substitute(qr.r(), &z[..q]))
}

fn check_symmetric<T: Scalar>(s: &Matrix<T>) -> Result<()> {
    let asym = s
        .asymmetry()
        .ok_or_else(|| Error::InvalidInput(format!("{}x{} is not square", s.rows(), s.cols())))?;
    let tol = T::lit(SYMMETRY_TOLERANCE) * s.max_abs().max(T::one());
    if asym > tol {
        return Err(Error::InvalidInput(format!(
            "matrix is not symmetric (max asymmetry {:e})",
            asym.as_f64()
        )));
    }
    Ok(())
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue<T: Scalar>(s: &Matrix<T>) -> Result<T> {
    check_symmetric(s)?;
    Ok(symmetric_eigen(s).values[0])
}

/// An `n × p` matrix `Ũ` with orthonormal columns orthogonal to the columns of
/// `X`. Requires `n ≥ 2p` and full column rank. The basis is the canonical
/// one from the Householder factorization of `X`.
pub fn orthonormal_complement<T: Scalar>(x: &Matrix<T>) -> Result<Matrix<T>> {
    let (n, p) = (x.rows(), x.cols());
    if n < 2 * p {
        return Err(Error::InsufficientRows { n, p });
    }
    let qr = HouseholderQr::new(x);
    check_full_rank(&qr)?;
    let mut out = Matrix::zeros(n, p);
    for k in 0..p {
        out.set_column(k, &qr.q_column(p + k));
    }
    Ok(out)
}

/// Like [`orthonormal_complement`], but the basis spans a uniformly random
/// `p`-dimensional subspace of the complement, drawn from `rng`.
pub fn random_orthonormal_complement<T: Scalar, R: Rng + ?Sized>(
    x: &Matrix<T>,
    rng: &mut R,
) -> Result<Matrix<T>> {
    let (n, p) = (x.rows(), x.cols());
    if n < 2 * p {
        return Err(Error::InsufficientRows { n, p });
    }
    let qr = HouseholderQr::new(x);
    check_full_rank(&qr)?;
    let mut draws = Matrix::zeros(n, p);
    for k in 0..p {
        let mut col: Vec<T> = (0..n)
            .map(|_| T::lit(rng.sample::<f64, _>(StandardNormal)))
            .collect();
        qr.project_out(&mut col);
        draws.set_column(k, &col);
    }
    let basis = HouseholderQr::new(&draws);
    check_full_rank(&basis)?;
    let mut u = basis.thin_q();
    // Second projection pass removes the O(eps) leakage from the re-orthonormalization.
    for k in 0..p {
        let mut col = u.column(k);
        qr.project_out(&mut col);
        u.set_column(k, &col);
    }
    let basis = HouseholderQr::new(&u);
    Ok(basis.thin_q())
}

/// Returns `C` with `CᵀC = S` for a symmetric positive semidefinite `S`.
/// Eigenvalues down to `-PSD_TOLERANCE` are clipped to zero.
pub fn factor_psd<T: Scalar>(s: &Matrix<T>) -> Result<Matrix<T>> {
    check_symmetric(s)?;
    let eig = symmetric_eigen(s);
    factor_from_eigen(&eig.values, &eig.vectors)
}

/// `C = diag(√λ) Vᵀ` from a precomputed decomposition.
pub(crate) fn factor_from_eigen<T: Scalar>(values: &[T], vectors: &Matrix<T>) -> Result<Matrix<T>> {
    let p = values.len();
    if let Some(&worst) = values.iter().find(|&&l| l < -T::lit(PSD_TOLERANCE)) {
        return Err(Error::NotPsd(worst.as_f64()));
    }
    let roots: Vec<T> = values.iter().map(|&l| l.max(T::zero()).sqrt()).collect();
    Ok(Matrix::from_fn(p, p, |i, j| roots[i] * vectors[(j, i)]))
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    check_symmetric(a)?;
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    let largest = a.diagonal().into_iter().fold(T::zero(), |m, v| m.max(v.abs()));
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if !(d > T::lit(RANK_TOLERANCE) * largest) {
            return Err(Error::SingularDesign {
                pivot: d.as_f64(),
                largest: largest.as_f64(),
            });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    let l = cholesky(a)?;
    let n = a.rows();
    let mut inv = Matrix::zeros(n, n);
    for c in 0..n {
        // L z = e_c
        let mut z = vec![T::zero(); n];
        for i in 0..n {
            let mut s = if i == c { T::one() } else { T::zero() };
            for k in 0..i {
                s = s - l[(i, k)] * z[k];
            }
            z[i] = s / l[(i, i)];
        }
        // Lᵀ x = z
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in (i + 1)..n {
                s = s - l[(k, i)] * z[k];
            }
            z[i] = s / l[(i, i)];
        }
        inv.set_column(c, &z);
    }
    inv.symmetrize();
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    fn random_orthogonal(n: usize, seed: u64) -> Matrix<f64> {
        HouseholderQr::new(&random_matrix(n, n, seed)).thin_q()
    }

    #[test]
    fn least_squares_identity_and_mean() {
        let b = least_squares(&Matrix::<f64>::identity(2), &[3.0f64, -1.0]).unwrap();
        assert!((b[0] - 3.0).abs() < 1e-14 && (b[1] + 1.0).abs() < 1e-14);
        let ones = Matrix::<f64>::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let b = least_squares(&ones, &[2.0, 4.0]).unwrap();
        assert!((b[0] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn least_squares_satisfies_normal_equations() {
        let x = random_matrix(10, 3, 7);
        let y: Vec<f64> = random_matrix(10, 1, 8).column(0);
        let b = least_squares(&x, &y).unwrap();
        let fit = x.matvec(&b);
        let resid: Vec<f64> = y.iter().zip(&fit).map(|(a, f)| a - f).collect();
        let normal = x.t_matvec(&resid);
        assert!(max_abs(&normal) <= 1e-10, "normal-equation residual {:e}", max_abs(&normal));
    }

    #[test]
    fn least_squares_rejects_duplicate_column() {
        let base = random_matrix(8, 2, 3);
        let x = Matrix::from_fn(8, 3, |i, j| base[(i, j.min(1))]);
        let err = least_squares(&x, &[1.0; 8]).unwrap_err();
        assert!(matches!(err, Error::SingularDesign { .. }));
    }

    #[test]
    fn min_eigenvalue_examples() {
        assert!((min_eigenvalue(&Matrix::<f64>::identity(4)).unwrap() - 1.0).abs() < 1e-12);
        let d = Matrix::<f64>::from_diag(&[0.2, 5.0]);
        assert!((min_eigenvalue(&d).unwrap() - 0.2).abs() < 1e-12);
        // equicorrelated: eigenvalues 1 − ρ (×p−1) and 1 + (p−1)ρ
        let rho = 0.5;
        let s = Matrix::<f64>::from_fn(4, 4, |i, j| if i == j { 1.0 } else { rho });
        assert!((min_eigenvalue(&s).unwrap() - (1.0 - rho)).abs() < 1e-8 * 0.5);
    }

    #[test]
    fn min_eigenvalue_rejects_asymmetry() {
        let s = Matrix::from_rows(&[vec![1.0, 0.1], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(min_eigenvalue(&s), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn min_eigenvalue_is_rotation_invariant() {
        let a = random_matrix(6, 6, 11);
        let s = a.gram();
        let q = random_orthogonal(6, 12);
        let rotated = q.transpose().matmul(&s).matmul(&q);
        let (l0, l1) = (min_eigenvalue(&s).unwrap(), min_eigenvalue(&{
            let mut r = rotated;
            r.symmetrize();
            r
        })
        .unwrap());
        assert!((l0 - l1).abs() <= 1e-8 * l0.abs().max(1.0));
    }

    #[test]
    fn complement_of_coordinate_subspace() {
        let x = Matrix::<f64>::from_fn(10, 3, |i, j| if i == j { 1.0 } else { 0.0 });
        let u = orthonormal_complement(&x).unwrap();
        assert!(u.t_matmul(&x).max_abs() <= 1e-14);
        assert!(u.gram().max_abs_diff(&Matrix::identity(3)) <= 1e-14);
        // spanned by e_3.. e_9: no mass on the first three coordinates
        for i in 0..3 {
            for j in 0..3 {
                assert!(u[(i, j)].abs() < 1e-14);
            }
        }
    }

    #[test]
    fn complement_properties_random() {
        let x = random_matrix(20, 5, 99);
        for u in [
            orthonormal_complement(&x).unwrap(),
            random_orthonormal_complement(&x, &mut ChaCha8Rng::seed_from_u64(5)).unwrap(),
        ] {
            assert!(u.t_matmul(&x).max_abs() <= 1e-10);
            assert!(u.gram().max_abs_diff(&Matrix::identity(5)) <= 1e-10);
        }
    }

    #[test]
    fn complement_needs_two_p_rows() {
        let x = random_matrix(5, 3, 1);
        assert_eq!(orthonormal_complement(&x).unwrap_err(), Error::InsufficientRows { n: 5, p: 3 });
    }

    #[test]
    fn factor_psd_examples() {
        let c = factor_psd(&Matrix::<f64>::identity(3)).unwrap();
        assert!(c.gram().max_abs_diff(&Matrix::identity(3)) < 1e-14);
        let s = Matrix::from_diag(&[4.0, 9.0]);
        let c = factor_psd(&s).unwrap();
        assert!(c.gram().max_abs_diff(&s) < 1e-14);
    }

    #[test]
    fn factor_psd_clips_tiny_negative_eigenvalue() {
        let q = random_orthogonal(4, 21);
        let s = q
            .matmul(&Matrix::from_diag(&[-1e-12, 0.5, 1.0, 2.0]))
            .matmul(&q.transpose());
        let mut s = s;
        s.symmetrize();
        let c = factor_psd(&s).unwrap();
        assert!(c.gram().max_abs_diff(&s) <= 1e-8);
    }

    #[test]
    fn factor_psd_rejects_indefinite() {
        let s = Matrix::from_diag(&[1.0, -1e-6]);
        assert!(matches!(factor_psd(&s), Err(Error::NotPsd(_))));
    }

    #[test]
    fn spd_inverse_roundtrip() {
        let s = random_matrix(12, 5, 4).gram();
        let inv = spd_inverse(&s).unwrap();
        assert!(s.matmul(&inv).max_abs_diff(&Matrix::identity(5)) < 1e-10);
    }

    #[test]
    fn generic_over_f32() {
        let x = Matrix::<f32>::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0], vec![0.0, 0.0]]).unwrap();
        let b = least_squares(&x, &[1.0, 4.0, 7.0]).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-6 && (b[1] - 2.0).abs() < 1e-6);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn noiseless_recovery(seed in any::<u64>(), n in 4usize..16, q in 1usize..4) {
                let x = random_matrix(n, q, seed);
                let beta: Vec<f64> = (0..q).map(|j| j as f64 - 1.5).collect();
                let y = x.matvec(&beta);
                let b = least_squares(&x, &y).unwrap();
                for (bi, ti) in b.iter().zip(&beta) {
                    prop_assert!((bi - ti).abs() <= 1e-8);
                }
            }

            #[test]
            fn factor_matches_psd_input(seed in any::<u64>(), p in 1usize..7, rank in 0usize..7) {
                let r = rank.min(p);
                let a = random_matrix(p, r.max(1), seed);
                let mut s = if r == 0 { Matrix::zeros(p, p) } else { a.matmul(&a.transpose()) };
                s.symmetrize();
                let c = factor_psd(&s).unwrap();
                prop_assert!(c.gram().max_abs_diff(&s) <= 1e-8 * s.max_abs().max(1.0));
            }
        }
    }
}
