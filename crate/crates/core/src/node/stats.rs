use std::cmp::Ordering;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{orthonormal_complement, Matrix, Vector};
use crate::rng::{rng_from_seed, SimRng};
use crate::scalar::Scalar;

use super::knockoffs::KnockoffDesign;
use super::lasso::{split_pilot, LambdaGrid, LassoPath, PilotStats};
use super::NodeData;

/// Orthonormality tolerance for the least-squares contrast design.
const ORTHONORMAL_TOLERANCE: f64 = 1e-8;

/// Per-node ordering statistics `W` and one-bit p-values `chi ∈ {−1, +1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeStatistics<T> {
    pub w: Vector<T>,
    pub chi: Vec<i8>,
    pub n: usize,
}

impl<T: Scalar> NodeStatistics<T> {
    pub fn p(&self) -> usize {
        self.w.len()
    }

    /// Checks `chi ∈ {−1, +1}`, `W ≥ 0` finite, and matching lengths.
    pub fn validate(&self) -> Result<()> {
        if self.w.is_empty() || self.w.len() != self.chi.len() {
            return Err(Error::InvalidInput(format!(
                "statistics length mismatch: |W| = {}, |chi| = {}",
                self.w.len(),
                self.chi.len()
            )));
        }
        if let Some(j) = self.chi.iter().position(|&c| c != 1 && c != -1) {
            return Err(Error::InvalidInput(format!("chi[{j}] = {} is not ±1", self.chi[j])));
        }
        if let Some(j) = self.w.iter().position(|w| !(w.is_finite() && *w >= T::zero())) {
            return Err(Error::InvalidInput(format!("W[{j}] = {} is not a finite nonnegative value", self.w[j])));
        }
        Ok(())
    }
}

fn coin(rng: &mut SimRng) -> i8 {
    if rng.random::<bool>() {
        1
    } else {
        -1
    }
}

/// `W_j = max(Z_j, Z̃_j)`, `χ_j = sgn(Z_j − Z̃_j)` with exact ties broken by a fair coin.
pub fn statistics_from_pilot<T: Scalar>(pilot: &PilotStats<T>, n: usize, rng: &mut SimRng) -> NodeStatistics<T> {
    let mut w = Vec::with_capacity(pilot.z.len());
    let mut chi = Vec::with_capacity(pilot.z.len());
    for (&z, &zt) in pilot.z.iter().zip(&pilot.z_tilde) {
        w.push(z.max(zt));
        chi.push(match z.partial_cmp(&zt) {
            Some(Ordering::Greater) => 1,
            Some(Ordering::Less) => -1,
            _ => coin(rng),
        });
    }
    NodeStatistics { w, chi, n }
}

/// Knockoff statistics for one node from its data and a valid knockoff design.
pub fn node_statistics<T: Scalar>(
    data: &NodeData<T>,
    design: &KnockoffDesign<T>,
    grid: &LambdaGrid,
    seed: u64,
) -> Result<NodeStatistics<T>> {
    let path = LassoPath::new(data.x().hstack(&design.x_tilde));
    node_statistics_with(&path, data.y(), grid, seed)
}

/// Same as [`node_statistics`] on a precomputed augmented-design path, for
/// callers that reuse one design across many responses.
pub fn node_statistics_with<T: Scalar>(
    augmented: &LassoPath<T>,
    y: &[T],
    grid: &LambdaGrid,
    seed: u64,
) -> Result<NodeStatistics<T>> {
    let pilot = split_pilot(augmented.entry_times(y, grid)?);
    Ok(statistics_from_pilot(&pilot, y.len(), &mut rng_from_seed(seed)))
}

/// Median with the midpoint convention for even lengths. `values` must be non-empty.
pub fn median<T: Scalar>(values: &[T]) -> T {
    assert!(!values.is_empty(), "median of empty slice");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) * T::half()
    }
}

/// Least-squares contrast statistics on a `2p × p` orthonormal design.
///
/// Regresses `y` on `[X, Ũ]`, takes `χ_j = sgn(β̂_j − β̃_j)` and
/// `W_j = 1{|β̂_j − β̃_j| > median}`.
pub fn ls_contrast_statistics<T: Scalar>(data: &NodeData<T>, seed: u64) -> Result<NodeStatistics<T>> {
    let x = data.x();
    let p = x.cols();
    if x.rows() != 2 * p {
        return Err(Error::InvalidInput(format!(
            "contrast statistics need a 2p x p design, got {}x{p}",
            x.rows()
        )));
    }
    let dev = x.gram().max_abs_diff(&Matrix::identity(p));
    if dev > T::lit(ORTHONORMAL_TOLERANCE) {
        return Err(Error::InvalidInput(format!(
            "design columns are not orthonormal (max deviation {:e})",
            dev.as_f64()
        )));
    }
    // [X, Ũ] has orthonormal columns, so the least-squares fit is a projection.
    let u = orthonormal_complement(x)?;
    let (b, b_tilde) = (x.t_matvec(data.y()), u.t_matvec(data.y()));
    let diffs: Vec<T> = b.iter().zip(&b_tilde).map(|(&a, &c)| a - c).collect();
    Ok(contrast_from_differences(&diffs, data.n(), &mut rng_from_seed(seed)))
}

pub(crate) fn contrast_from_differences<T: Scalar>(diffs: &[T], n: usize, rng: &mut SimRng) -> NodeStatistics<T> {
    let mags: Vec<T> = diffs.iter().map(|d| d.abs()).collect();
    let med = median(&mags);
    let w = mags
        .iter()
        .map(|&m| if m > med { T::one() } else { T::zero() })
        .collect();
    let chi = diffs
        .iter()
        .map(|&d| {
            if d > T::zero() {
                1
            } else if d < T::zero() {
                -1
            } else {
                coin(rng)
            }
        })
        .collect();
    NodeStatistics { w, chi, n }
}
