//! Exact Lasso path by homotopy (LARS with the Lasso drop rule).
//!
//! Between knots the active set and signs are fixed and the solution is
//! affine in λ: `b_A(λ) = G_AA⁻¹ c_A − λ G_AA⁻¹ σ_A`. Each knot is the largest
//! λ below the current one at which an inactive correlation reaches `±λ` or an
//! active coefficient reaches zero.

use crate::numerics::Matrix;
use crate::scalar::Scalar;

/// Relative gap below the current knot that a new event must clear. Stops a
/// variable that just joined or left from bouncing straight back.
const KNOT_GAP: f64 = 1e-10;

/// A new Cholesky pivot below this fraction of the diagonal means the active
/// columns are numerically dependent.
const PIVOT_FLOOR: f64 = 1e-9;

/// Lower-triangular factor of `G_AA`, grown one row at a time.
struct ActiveCholesky<T> {
    rows: Vec<Vec<T>>,
}

impl<T: Scalar> ActiveCholesky<T> {
    fn new() -> Self {
        Self { rows: Vec::new() }
    }

    /// Appends feature `j`; returns `false` (leaving the factor unchanged) if
    /// the new column is numerically dependent on the active ones.
    fn push(&mut self, gram: &Matrix<T>, active: &[usize], j: usize) -> bool {
        let k = self.rows.len();
        let mut row = Vec::with_capacity(k + 1);
        for i in 0..k {
            let li = &self.rows[i];
            let s = (0..i).fold(gram[(active[i], j)], |s, t| s - li[t] * row[t]);
            row.push(s / li[i]);
        }
        let gjj = gram[(j, j)];
        let d2 = row.iter().fold(gjj, |s, &v| s - v * v);
        if !(d2 > T::lit(PIVOT_FLOOR) * gjj) {
            return false;
        }
        row.push(d2.sqrt());
        self.rows.push(row);
        true
    }

    fn rebuild(&mut self, gram: &Matrix<T>, active: &[usize]) -> bool {
        self.rows.clear();
        for (k, &j) in active.iter().enumerate() {
            if !self.push(gram, &active[..k], j) {
                return false;
            }
        }
        true
    }

    fn solve(&self, b: &[T]) -> Vec<T> {
        let k = self.rows.len();
        let mut z = vec![T::zero(); k];
        for i in 0..k {
            let li = &self.rows[i];
            let s = (0..i).fold(b[i], |s, t| s - li[t] * z[t]);
            z[i] = s / li[i];
        }
        for i in (0..k).rev() {
            let s = ((i + 1)..k).fold(z[i], |s, t| s - self.rows[t][i] * z[t]);
            z[i] = s / self.rows[i][i];
        }
        z
    }
}

enum Event {
    Add(usize, i8),
    Drop(usize),
}

/// Where the homotopy stopped.
pub(crate) struct HomotopyState<T> {
    /// Index of the first grid value not yet visited.
    pub next_grid: usize,
    /// Solution at the last knot reached, for a warm-started fallback.
    pub beta: Vec<T>,
}

/// Visits `lambdas` (decreasing) along the exact path, calling `record(g, j, b_j)`
/// for every feature `j` with a nonzero coefficient `b_j` at grid value `g`.
/// Returns `Ok(())` when the grid is exhausted or `done()` holds, or the
/// state to resume from when the active set becomes numerically dependent.
pub(crate) fn walk_path<T: Scalar>(
    gram: &Matrix<T>,
    c: &[T],
    lambdas: &[T],
    mut record: impl FnMut(usize, usize, T),
    done: impl Fn() -> bool,
) -> Result<(), HomotopyState<T>> {
    let q = c.len();
    let (j0, lambda_max) = c
        .iter()
        .enumerate()
        .fold((0, T::zero()), |(bj, bv), (j, &v)| if v.abs() > bv { (j, v.abs()) } else { (bj, bv) });
    if !(lambda_max > T::zero()) {
        return Ok(());
    }
    let gap = T::one() - T::lit(KNOT_GAP);
    let mut active = vec![j0];
    let mut sign = vec![if c[j0] > T::zero() { T::one() } else { -T::one() }];
    let mut is_active = vec![false; q];
    is_active[j0] = true;
    let mut chol = ActiveCholesky::new();
    if !chol.push(gram, &[], j0) {
        return Err(HomotopyState {
            next_grid: 0,
            beta: vec![T::zero(); q],
        });
    }
    let mut lam = lambda_max;
    let mut g = 0usize;
    // Grid values at or above λ_max see the zero solution.
    while g < lambdas.len() && lambdas[g] >= lam {
        g += 1;
    }

    loop {
        let c_a: Vec<T> = active.iter().map(|&j| c[j]).collect();
        let u = chol.solve(&c_a);
        let d = chol.solve(&sign);
        let beta_at = |l: T| -> Vec<T> {
            let mut b = vec![T::zero(); q];
            for (k, &j) in active.iter().enumerate() {
                b[j] = u[k] - l * d[k];
            }
            b
        };

        let mut next = T::zero();
        let mut event = None;
        for j in 0..q {
            if is_active[j] {
                continue;
            }
            let row = gram.row(j);
            let (mut gu, mut gd) = (T::zero(), T::zero());
            for (k, &a) in active.iter().enumerate() {
                gu = gu + row[a] * u[k];
                gd = gd + row[a] * d[k];
            }
            let (e, f) = (c[j] - gu, gd);
            for s in [1i8, -1] {
                let denom = T::lit(f64::from(s)) - f;
                if denom == T::zero() {
                    continue;
                }
                let l = e / denom;
                if l > next && l < lam * gap {
                    next = l;
                    event = Some(Event::Add(j, s));
                }
            }
        }
        for k in 0..active.len() {
            if d[k] == T::zero() {
                continue;
            }
            let l = u[k] / d[k];
            if l > next && l < lam * gap {
                next = l;
                event = Some(Event::Drop(k));
            }
        }

        while g < lambdas.len() && lambdas[g] > next {
            let lg = lambdas[g];
            for (k, &j) in active.iter().enumerate() {
                let b = u[k] - lg * d[k];
                if b != T::zero() {
                    record(g, j, b);
                }
            }
            g += 1;
        }
        if g >= lambdas.len() || done() {
            return Ok(());
        }

        match event {
            None => return Ok(()),
            Some(Event::Add(j, s)) => {
                if !chol.push(gram, &active, j) {
                    return Err(HomotopyState {
                        next_grid: g,
                        beta: beta_at(next),
                    });
                }
                active.push(j);
                sign.push(T::lit(f64::from(s)));
                is_active[j] = true;
            }
            Some(Event::Drop(k)) => {
                let beta = beta_at(next);
                is_active[active[k]] = false;
                active.remove(k);
                sign.remove(k);
                if active.is_empty() {
                    // Only possible through rounding; resume with descent.
                    return Err(HomotopyState { next_grid: g, beta });
                }
                if !chol.rebuild(gram, &active) {
                    return Err(HomotopyState { next_grid: g, beta });
                }
            }
        }
        lam = next;
    }
}
