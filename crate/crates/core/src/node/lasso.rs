//! Coordinate-descent Lasso and entry times along a geometric λ grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{max_abs, Matrix, Vector};
use crate::scalar::Scalar;

use super::homotopy::walk_path;

pub const LASSO_MAX_SWEEPS: usize = 100_000;
/// Convergence threshold on the largest coefficient change in a full sweep.
pub const LASSO_TOLERANCE: f64 = 1e-8;

/// Geometric λ grid from `λ_max` down to `λ_max · min_ratio`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LambdaGrid {
    pub points: usize,
    pub min_ratio: f64,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        Self {
            points: 200,
            min_ratio: 1e-3,
        }
    }
}

impl LambdaGrid {
    pub fn new(points: usize, min_ratio: f64) -> Result<Self> {
        if points == 0 || !(min_ratio > 0.0 && min_ratio < 1.0) {
            return Err(Error::Config(format!(
                "grid needs points >= 1 and min_ratio in (0, 1), got {points}, {min_ratio}"
            )));
        }
        Ok(Self { points, min_ratio })
    }

    /// Decreasing grid values. Each value is rounded to the nearest `f32` so
    /// entry times survive a 32-bit wire encoding unchanged.
    pub fn values<T: Scalar>(&self, lambda_max: T) -> Vec<T> {
        let top = lambda_max.as_f64();
        let g = self.points;
        (0..g)
            .map(|k| {
                let frac = if g == 1 { 0.0 } else { k as f64 / (g - 1) as f64 };
                let v = top * self.min_ratio.powf(frac);
                T::lit(f64::from(v as f32))
            })
            .collect()
    }
}

/// Lasso on a fixed design with its Gram matrix cached, so a whole path
/// (or many responses) reuse one `O(n q²)` product.
#[derive(Debug, Clone)]
pub struct LassoPath<T> {
    a: Matrix<T>,
    gram: Matrix<T>,
}

impl<T: Scalar> LassoPath<T> {
    pub fn new(a: Matrix<T>) -> Self {
        let gram = a.gram();
        Self { a, gram }
    }

    pub fn design(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn correlations(&self, y: &[T]) -> Vector<T> {
        self.a.t_matvec(y)
    }

    /// Solves at one `λ`, warm-starting from `beta`. `grad` must hold
    /// `Aᵀy − G beta` on entry and is kept consistent on exit.
    fn solve_warm(&self, lambda: T, beta: &mut [T], grad: &mut [T]) -> Result<()> {
        let q = beta.len();
        let tol = T::lit(LASSO_TOLERANCE);
        let mut sweeps = 0usize;
        let all: Vec<usize> = (0..q).collect();
        let mut active: Vec<usize> = Vec::with_capacity(q);

        loop {
            let change = self.sweep(&all, lambda, beta, grad);
            sweeps += 1;
            if change < tol {
                return Ok(());
            }
            // Iterate on the current active set until it settles.
            loop {
                if sweeps >= LASSO_MAX_SWEEPS {
                    return Err(Error::Convergence {
                        sweeps,
                        change: change.as_f64(),
                    });
                }
                active.clear();
                active.extend((0..q).filter(|&j| beta[j] != T::zero()));
                let c = self.sweep(&active, lambda, beta, grad);
                sweeps += 1;
                if c < tol {
                    break;
                }
            }
            if sweeps >= LASSO_MAX_SWEEPS {
                return Err(Error::Convergence {
                    sweeps,
                    change: change.as_f64(),
                });
            }
        }
    }

    fn sweep(&self, coords: &[usize], lambda: T, beta: &mut [T], grad: &mut [T]) -> T {
        let mut max_change = T::zero();
        for &j in coords {
            let gjj = self.gram[(j, j)];
            if !(gjj > T::zero()) {
                continue;
            }
            let z = grad[j] + gjj * beta[j];
            let updated = soft_threshold(z, lambda) / gjj;
            let delta = updated - beta[j];
            if delta != T::zero() {
                for (g, &gk) in grad.iter_mut().zip(self.gram.row(j)) {
                    *g = *g - delta * gk;
                }
                beta[j] = updated;
                max_change = max_change.max(delta.abs());
            }
        }
        max_change
    }

    /// Minimizer of `½‖y − Ab‖² + λ‖b‖₁`.
    pub fn solve(&self, y: &[T], lambda: T) -> Result<Vector<T>> {
        if !(lambda >= T::zero()) {
            return Err(Error::InvalidInput(format!("lambda must be >= 0, got {lambda}")));
        }
        let mut grad = self.correlations(y);
        let mut beta = vec![T::zero(); self.a.cols()];
        self.solve_warm(lambda, &mut beta, &mut grad)?;
        Ok(beta)
    }

    /// Solutions along `lambdas`. A strictly decreasing sequence follows the
    /// exact path; any other order is solved by warm-started descent.
    pub fn solve_path(&self, y: &[T], lambdas: &[T]) -> Result<Vec<Vector<T>>> {
        let q = self.a.cols();
        if lambdas.windows(2).all(|w| w[0] > w[1]) && lambdas.iter().all(|&l| l >= T::zero()) {
            let c = self.correlations(y);
            let mut out = vec![vec![T::zero(); q]; lambdas.len()];
            let walked = walk_path(&self.gram, &c, lambdas, |g, j, b| out[g][j] = b, || false);
            if let Err(state) = walked {
                let mut beta = state.beta;
                let gb = self.gram.matvec(&beta);
                let mut grad: Vec<T> = c.iter().zip(&gb).map(|(&ci, &g)| ci - g).collect();
                for (g, &lambda) in lambdas.iter().enumerate().skip(state.next_grid) {
                    self.solve_warm(lambda, &mut beta, &mut grad)?;
                    out[g].clone_from(&beta);
                }
            }
            return Ok(out);
        }
        let mut grad = self.correlations(y);
        let mut beta = vec![T::zero(); self.a.cols()];
        let mut out = Vec::with_capacity(lambdas.len());
        for &lambda in lambdas {
            self.solve_warm(lambda, &mut beta, &mut grad)?;
            out.push(beta.clone());
        }
        Ok(out)
    }

    /// Largest grid `λ` at which each coefficient is nonzero (0 if never).
    ///
    /// Follows the exact path by homotopy and switches to warm-started
    /// coordinate descent if the active columns become numerically
    /// dependent (as they do near `λ = 0` for equicorrelated knockoffs).
    pub fn entry_times(&self, y: &[T], grid: &LambdaGrid) -> Result<Vector<T>> {
        let q = self.a.cols();
        let c = self.correlations(y);
        let lambda_max = max_abs(&c);
        let mut entry = vec![T::zero(); q];
        if !(lambda_max > T::zero()) {
            return Ok(entry);
        }
        let lambdas = grid.values(lambda_max);
        let remaining = std::cell::Cell::new(q);
        let walked = walk_path(
            &self.gram,
            &c,
            &lambdas,
            |g, j, _| {
                if entry[j] == T::zero() {
                    entry[j] = lambdas[g];
                    remaining.set(remaining.get() - 1);
                }
            },
            || remaining.get() == 0,
        );
        if let Err(state) = walked {
            let mut beta = state.beta;
            let gb = self.gram.matvec(&beta);
            let mut grad: Vec<T> = c.iter().zip(&gb).map(|(&ci, &g)| ci - g).collect();
            for &lambda in &lambdas[state.next_grid..] {
                if remaining.get() == 0 {
                    break;
                }
                self.solve_warm(lambda, &mut beta, &mut grad)?;
                for j in 0..q {
                    if entry[j] == T::zero() && beta[j] != T::zero() {
                        entry[j] = lambda;
                        remaining.set(remaining.get() - 1);
                    }
                }
            }
        }
        Ok(entry)
    }

    /// [`LassoPath::entry_times`] computed by coordinate descent alone,
    /// solving at every grid value.
    pub fn entry_times_descent(&self, y: &[T], grid: &LambdaGrid) -> Result<Vector<T>> {
        let q = self.a.cols();
        let mut grad = self.correlations(y);
        let lambda_max = max_abs(&grad);
        let mut entry = vec![T::zero(); q];
        if !(lambda_max > T::zero()) {
            return Ok(entry);
        }
        let mut remaining = q;
        let mut beta = vec![T::zero(); q];
        for lambda in grid.values(lambda_max) {
            self.solve_warm(lambda, &mut beta, &mut grad)?;
            for j in 0..q {
                if entry[j] == T::zero() && beta[j] != T::zero() {
                    entry[j] = lambda;
                    remaining -= 1;
                }
            }
            if remaining == 0 {
                break;
            }
        }
        Ok(entry)
    }
}

#[inline]
fn soft_threshold<T: Scalar>(z: T, lambda: T) -> T {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        T::zero()
    }
}

/// One-off Lasso solve; see [`LassoPath`] for repeated solves on a design.
pub fn lasso_solve<T: Scalar>(a: &Matrix<T>, y: &[T], lambda: T) -> Result<Vector<T>> {
    if y.len() != a.rows() {
        return Err(Error::InvalidInput(format!(
            "response length {} does not match {} rows",
            y.len(),
            a.rows()
        )));
    }
    LassoPath::new(a.clone()).solve(y, lambda)
}

/// Entry times of the original features (`z`) and their knockoffs (`z_tilde`).
#[derive(Debug, Clone, PartialEq)]
pub struct PilotStats<T> {
    pub z: Vector<T>,
    pub z_tilde: Vector<T>,
}

/// Entry times on an augmented design `A = [X, X̃]` (`n × 2p`).
pub fn entry_times<T: Scalar>(a: &Matrix<T>, y: &[T], grid: &LambdaGrid) -> Result<PilotStats<T>> {
    if !a.cols().is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "augmented design needs an even column count, got {}",
            a.cols()
        )));
    }
    if y.len() != a.rows() {
        return Err(Error::InvalidInput("response length mismatch".into()));
    }
    let times = LassoPath::new(a.clone()).entry_times(y, grid)?;
    Ok(split_pilot(times))
}

pub(crate) fn split_pilot<T: Scalar>(mut times: Vector<T>) -> PilotStats<T> {
    let p = times.len() / 2;
    let z_tilde = times.split_off(p);
    PilotStats { z: times, z_tilde }
}
