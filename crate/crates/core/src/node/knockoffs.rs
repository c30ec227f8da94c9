use crate::error::{Error, Result};
use crate::numerics::{factor_from_eigen, random_orthonormal_complement, symmetric_eigen, Matrix, Vector};
use crate::rng::rng_from_seed;
use crate::scalar::Scalar;

use super::unit_norm_tolerance;

/// Smallest admissible eigenvalue of `XᵀX`.
const GRAM_EIGEN_FLOOR: f64 = 1e-10;

/// Knockoff copies `X̃` of a design together with the gap vector `s`:
///
/// `X̃ᵀX̃ = XᵀX` and `XᵀX̃ = XᵀX − diag(s)`.
#[derive(Debug, Clone)]
pub struct KnockoffDesign<T> {
    pub x_tilde: Matrix<T>,
    pub s: Vector<T>,
}

/// Max-abs residuals of the two Gram identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnockoffReport {
    pub gram_residual: f64,
    pub cross_residual: f64,
    pub pass: bool,
}

/// Equicorrelated fixed-design knockoffs.
///
/// With `Σ = XᵀX` and `s_j = min(2 λ_min(Σ), 1)`,
/// `X̃ = X (I − Σ⁻¹ diag(s)) + Ũ C` where `Ũ` is an orthonormal basis of a
/// random slice of the orthogonal complement of `X` (drawn from `seed`) and
/// `CᵀC = 2 diag(s) − diag(s) Σ⁻¹ diag(s)`.
pub fn construct_knockoffs<T: Scalar>(x: &Matrix<T>, seed: u64) -> Result<KnockoffDesign<T>> {
    let (n, p) = (x.rows(), x.cols());
    if n < 2 * p {
        return Err(Error::InsufficientRows { n, p });
    }
    for (j, norm) in x.column_norms().into_iter().enumerate() {
        if (norm - T::one()).abs() > unit_norm_tolerance::<T>() {
            return Err(Error::InvalidInput(format!(
                "column {j} is not unit norm ({})",
                norm.as_f64()
            )));
        }
    }

    let sigma = x.gram();
    let eig = symmetric_eigen(&sigma);
    let lambda_min = eig.values[0];
    if !(lambda_min > T::lit(GRAM_EIGEN_FLOOR)) {
        return Err(Error::SingularDesign {
            pivot: lambda_min.as_f64(),
            largest: eig.values[p - 1].as_f64(),
        });
    }
    let s_val = (T::two() * lambda_min).min(T::one());

    // Σ = V Λ Vᵀ, so Σ⁻¹ = V Λ⁻¹ Vᵀ and, with s constant,
    // 2 diag(s) − diag(s) Σ⁻¹ diag(s) = V diag(2s − s²/λ) Vᵀ.
    let v = &eig.vectors;
    let inv_vals: Vec<T> = eig.values.iter().map(|&l| T::one() / l).collect();
    let sigma_inv = Matrix::from_fn(p, p, |i, j| {
        (0..p).fold(T::zero(), |acc, k| acc + v[(i, k)] * inv_vals[k] * v[(j, k)])
    });
    let s_eigs: Vec<T> = eig
        .values
        .iter()
        .map(|&l| T::two() * s_val - s_val * s_val / l)
        .collect();
    let c = factor_from_eigen(&s_eigs, v)?;

    let shrink = Matrix::identity(p).sub(&sigma_inv.scale(s_val));
    let u = random_orthonormal_complement(x, &mut rng_from_seed(seed))?;
    let x_tilde = x.matmul(&shrink).add(&u.matmul(&c));

    Ok(KnockoffDesign {
        x_tilde,
        s: vec![s_val; p],
    })
}

/// Checks the two Gram identities at tolerance `tol`.
pub fn validate_knockoffs<T: Scalar>(
    x: &Matrix<T>,
    x_tilde: &Matrix<T>,
    s: &[T],
    tol: f64,
) -> Result<KnockoffReport> {
    if x.rows() != x_tilde.rows() || x.cols() != x_tilde.cols() || s.len() != x.cols() {
        return Err(Error::InvalidInput(format!(
            "shape mismatch: X {}x{}, X̃ {}x{}, s {}",
            x.rows(),
            x.cols(),
            x_tilde.rows(),
            x_tilde.cols(),
            s.len()
        )));
    }
    let sigma = x.gram();
    let gram_residual = x_tilde.gram().max_abs_diff(&sigma).as_f64();
    let target = sigma.sub(&Matrix::from_diag(s));
    let cross_residual = x.t_matmul(x_tilde).max_abs_diff(&target).as_f64();
    Ok(KnockoffReport {
        gram_residual,
        cross_residual,
        pass: gram_residual <= tol && cross_residual <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::HouseholderQr;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
        let mut rng = rng_from_seed(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    fn unit_columns(m: Matrix<f64>) -> Matrix<f64> {
        crate::node::normalize_columns(&m).unwrap()
    }

    #[test]
    fn orthogonal_design_gets_full_gap() {
        let x = HouseholderQr::new(&gaussian(12, 4, 1)).thin_q();
        let ko = construct_knockoffs(&x, 9).unwrap();
        assert!(ko.s.iter().all(|&s| (s - 1.0).abs() < 1e-12));
        assert!(x.t_matmul(&ko.x_tilde).max_abs() < 1e-10);
        assert!(ko.x_tilde.gram().max_abs_diff(&Matrix::identity(4)) < 1e-10);
    }

    #[test]
    fn equicorrelated_design_gap() {
        // Build X with XᵀX exactly the ρ = 0.5 equicorrelation matrix:
        // X = Q L with Q orthonormal and L Lᵀ... use Q·chol(Σ)ᵀ.
        let p = 4;
        let rho = 0.5;
        let sigma = Matrix::<f64>::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho });
        let l = crate::numerics::cholesky(&sigma).unwrap();
        let q = HouseholderQr::new(&gaussian(10, p, 3)).thin_q();
        let x = q.matmul(&l.transpose());
        assert!(x.gram().max_abs_diff(&sigma) < 1e-12);
        let ko = construct_knockoffs(&x, 4).unwrap();
        // λ_min = 1 − ρ = 0.5 so s = min(1, 1) = 1
        assert!(ko.s.iter().all(|&s| (s - 1.0).abs() < 1e-10));
        assert!(validate_knockoffs(&x, &ko.x_tilde, &ko.s, 1e-8).unwrap().pass);
    }

    #[test]
    fn random_design_passes_validation() {
        for seed in 0..5 {
            let x = unit_columns(gaussian(60, 15, seed));
            let ko = construct_knockoffs(&x, seed + 100).unwrap();
            let report = validate_knockoffs(&x, &ko.x_tilde, &ko.s, 1e-8).unwrap();
            assert!(report.pass, "{report:?}");
            assert!(ko.s.iter().all(|&s| (0.0..=2.0).contains(&s)));
        }
    }

    #[test]
    fn construction_errors() {
        let x = unit_columns(gaussian(5, 3, 2));
        assert_eq!(construct_knockoffs(&x, 0).unwrap_err(), Error::InsufficientRows { n: 5, p: 3 });
        let base = unit_columns(gaussian(10, 2, 2));
        let dup = Matrix::from_fn(10, 3, |i, j| base[(i, j.min(1))]);
        assert!(matches!(construct_knockoffs(&dup, 0), Err(Error::SingularDesign { .. })));
    }

    #[test]
    fn validation_degenerate_cases() {
        let x = unit_columns(gaussian(10, 3, 8));
        assert!(validate_knockoffs(&x, &x, &[0.0; 3], 1e-8).unwrap().pass);
        let r = validate_knockoffs(&x, &x, &[1.0; 3], 1e-8).unwrap();
        assert!(!r.pass);
        assert!((r.cross_residual - 1.0).abs() < 1e-12);
        assert!(validate_knockoffs(&x, &x, &[0.0; 2], 1e-8).is_err());
    }

    #[test]
    fn seed_determinism() {
        let x = unit_columns(gaussian(30, 6, 1));
        let a = construct_knockoffs(&x, 5).unwrap();
        let b = construct_knockoffs(&x, 5).unwrap();
        assert_eq!(a.x_tilde, b.x_tilde);
    }
}
