use crate::numerics::matrix::Matrix;
use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    /// Ascending.
    pub values: Vec<T>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: Matrix<T>,
}

/// Cyclic Jacobi rotations. The caller is responsible for symmetry; only the
/// upper triangle drives the rotations but both halves are updated.
pub fn symmetric_eigen<T: Scalar>(s: &Matrix<T>) -> SymmetricEigen<T> {
    assert!(s.is_square());
    let n = s.rows();
    let mut a = s.clone();
    a.symmetrize();
    let mut v = Matrix::identity(n);

    let scale = a.as_slice().iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
    let eps = T::epsilon();

    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= eps * scale * T::lit(1e-2) || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (T::two() * apq);
                let t = {
                    let mag = T::one() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    if theta < T::zero() {
                        -mag
                    } else {
                        mag
                    }
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let sn = t * c;

                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = T::zero();
                a[(q, p)] = T::zero();
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    let np = c * akp - sn * akq;
                    let nq = sn * akp + c * akq;
                    a[(k, p)] = np;
                    a[(p, k)] = np;
                    a[(k, q)] = nq;
                    a[(q, k)] = nq;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).expect("finite eigenvalues"));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = v.select_columns(&order);
    SymmetricEigen { values, vectors }
}
