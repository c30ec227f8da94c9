//! Everything a single decentralized node computes from its own data.

mod homotopy;
mod knockoffs;
mod lasso;
mod stats;

pub use knockoffs::{construct_knockoffs, validate_knockoffs, KnockoffDesign, KnockoffReport};
pub use lasso::{entry_times, lasso_solve, LambdaGrid, LassoPath, PilotStats, LASSO_MAX_SWEEPS, LASSO_TOLERANCE};
pub use stats::{
    ls_contrast_statistics, median, node_statistics, node_statistics_with, statistics_from_pilot,
    NodeStatistics,
};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};
use crate::scalar::Scalar;

/// Column norms must be within this of one (or 64 ulp for `f32`).
pub const UNIT_NORM_TOLERANCE: f64 = 1e-10;

pub(crate) fn unit_norm_tolerance<T: Scalar>() -> T {
    T::lit(UNIT_NORM_TOLERANCE).max(T::epsilon() * T::lit(64.0))
}

/// One decentralized model: design, response and (in simulation) the true signal.
#[derive(Debug, Clone)]
pub struct NodeData<T> {
    x: Matrix<T>,
    y: Vector<T>,
    node_id: u32,
    truth: Option<Vector<T>>,
}

impl<T: Scalar> NodeData<T> {
    /// Validates `n ≥ 2p`, unit-norm columns and conformable shapes.
    pub fn new(x: Matrix<T>, y: Vector<T>, node_id: u32, truth: Option<Vector<T>>) -> Result<Self> {
        let (n, p) = (x.rows(), x.cols());
        if n < 2 * p {
            return Err(Error::InsufficientRows { n, p });
        }
        if y.len() != n {
            return Err(Error::InvalidInput(format!(
                "response has {} entries but design has {n} rows",
                y.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("response has non-finite entries".into()));
        }
        if let Some(t) = &truth {
            if t.len() != p {
                return Err(Error::InvalidInput(format!(
                    "truth has {} entries, expected {p}",
                    t.len()
                )));
            }
        }
        for (j, norm) in x.column_norms().into_iter().enumerate() {
            if (norm - T::one()).abs() > unit_norm_tolerance::<T>() {
                return Err(Error::InvalidInput(format!(
                    "column {j} has norm {} (expected unit norm)",
                    norm.as_f64()
                )));
            }
        }
        Ok(Self { x, y, node_id, truth })
    }

    pub fn x(&self) -> &Matrix<T> {
        &self.x
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn node_id(&self) -> u32 {
        self.node_id
    }

    pub fn truth(&self) -> Option<&[T]> {
        self.truth.as_deref()
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }
}

/// Scales every column to unit Euclidean norm.
pub fn normalize_columns<T: Scalar>(x: &Matrix<T>) -> Result<Matrix<T>> {
    let norms = x.column_norms();
    if let Some(j) = norms.iter().position(|&v| !(v > T::zero())) {
        return Err(Error::DegenerateFeature(j));
    }
    Ok(Matrix::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] / norms[j]))
}
