use crate::numerics::matrix::{dot, Matrix};
use crate::scalar::Scalar;

/// Householder QR factorization `A = QR` of a tall `n × q` matrix.
///
/// `Q` is kept implicitly as a product of reflectors; `R` is the `q × q`
/// upper-triangular factor.
#[derive(Debug, Clone)]
pub struct HouseholderQr<T> {
    n: usize,
    // (v, tau) with H = I - tau v vᵀ acting on rows k..n
    reflectors: Vec<(Vec<T>, T)>,
    r: Matrix<T>,
}

impl<T: Scalar> HouseholderQr<T> {
    pub fn new(a: &Matrix<T>) -> Self {
        let (n, q) = (a.rows(), a.cols());
        assert!(n >= q, "QR requires rows >= cols");
        // Work column-major; each column is contiguous.
        let mut cols: Vec<Vec<T>> = (0..q).map(|j| a.column(j)).collect();
        let mut reflectors = Vec::with_capacity(q);
        let mut r = Matrix::zeros(q, q);

        for k in 0..q {
            let x = &cols[k][k..];
            let norm = dot(x, x).sqrt();
            let mut v = x.to_vec();
            let alpha = if x[0] >= T::zero() { -norm } else { norm };
            v[0] = v[0] - alpha;
            let vtv = dot(&v, &v);
            let tau = if vtv > T::zero() { T::two() / vtv } else { T::zero() };

            // column k becomes (alpha, 0, ..., 0)
            if tau == T::zero() {
                r[(k, k)] = cols[k][k];
            } else {
                r[(k, k)] = alpha;
            }
            for col in cols.iter_mut().skip(k + 1) {
                apply_reflector(&v, tau, &mut col[k..]);
            }
            for j in (k + 1)..q {
                r[(k, j)] = cols[j][k];
            }
            reflectors.push((v, tau));
        }

        Self { n, reflectors, r }
    }

    pub fn r(&self) -> &Matrix<T> {
        &self.r
    }

    /// In place `v ← Qᵀ v` for `v` of length `n`.
    pub fn apply_qt(&self, v: &mut [T]) {
        assert_eq!(v.len(), self.n);
        for (k, (h, tau)) in self.reflectors.iter().enumerate() {
            apply_reflector(h, *tau, &mut v[k..]);
        }
    }

    /// In place `v ← Q v` for `v` of length `n`.
    pub fn apply_q(&self, v: &mut [T]) {
        assert_eq!(v.len(), self.n);
        for (k, (h, tau)) in self.reflectors.iter().enumerate().rev() {
            apply_reflector(h, *tau, &mut v[k..]);
        }
    }

    /// Column `k` of the full `n × n` orthogonal factor.
    pub fn q_column(&self, k: usize) -> Vec<T> {
        let mut e = vec![T::zero(); self.n];
        e[k] = T::one();
        self.apply_q(&mut e);
        e
    }

    /// Thin `n × q` orthonormal factor.
    pub fn thin_q(&self) -> Matrix<T> {
        let q = self.reflectors.len();
        let mut out = Matrix::zeros(self.n, q);
        for k in 0..q {
            out.set_column(k, &self.q_column(k));
        }
        out
    }

    /// Projects `v` onto the orthogonal complement of the column space.
    pub fn project_out(&self, v: &mut [T]) {
        self.apply_qt(v);
        for x in v.iter_mut().take(self.reflectors.len()) {
            *x = T::zero();
        }
        self.apply_q(v);
    }

    /// Absolute values of the diagonal of `R`.
    pub fn pivots(&self) -> Vec<T> {
        self.r.diagonal().into_iter().map(|d| d.abs()).collect()
    }
}

#[inline]
fn apply_reflector<T: Scalar>(v: &[T], tau: T, x: &mut [T]) {
    if tau == T::zero() {
        return;
    }
    let s = dot(v, x) * tau;
    for (xi, &vi) in x.iter_mut().zip(v) {
        *xi = *xi - s * vi;
    }
}

/// Solves `R b = z` for upper-triangular `R`.
pub fn back_substitute<T: Scalar>(r: &Matrix<T>, z: &[T]) -> Vec<T> {
    let q = r.cols();
    let mut b = vec![T::zero(); q];
    for i in (0..q).rev() {
        let mut s = z[i];
        for j in (i + 1)..q {
            s = s - r[(i, j)] * b[j];
        }
        b[i] = s / r[(i, i)];
    }
    b
}
