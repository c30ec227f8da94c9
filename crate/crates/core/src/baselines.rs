//! Comparison procedures: averaged OLS z-scores with BHq, and per-node
//! cross-validated Lasso supports combined by majority vote.

use rand::seq::SliceRandom;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::coordinator::SelectionRow;
use crate::error::{Error, Result};
use crate::node::{LambdaGrid, LassoPath, NodeData};
use crate::numerics::{least_squares, max_abs, spd_inverse, Vector};
use crate::rng::rng_from_seed;
use crate::scalar::Scalar;

pub const DEFAULT_CV_FOLDS: usize = 10;

/// Grid used by the cross-validated Lasso baseline.
pub fn default_cv_grid() -> LambdaGrid {
    LambdaGrid {
        points: 100,
        min_ratio: 1e-4,
    }
}

/// Benjamini–Hochberg step-up outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BhqResult {
    /// Rejected feature indices, ascending.
    pub rejected: Vec<usize>,
    /// `k* = max{k : p_(k) ≤ kq/p}`, or 0.
    pub threshold_index: usize,
}

/// BH step-up at level `q`.
pub fn bhq(pvalues: &[f64], q: f64) -> Result<BhqResult> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Config(format!("q must lie in (0, 1), got {q}")));
    }
    if let Some(j) = pvalues.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidInput(format!("p-value {j} = {} is outside [0, 1]", pvalues[j])));
    }
    let p = pvalues.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]).then(a.cmp(&b)));
    let threshold_index = (1..=p)
        .rev()
        .find(|&k| pvalues[order[k - 1]] <= k as f64 * q / p as f64)
        .unwrap_or(0);
    let mut rejected = order[..threshold_index].to_vec();
    rejected.sort_unstable();
    Ok(BhqResult {
        rejected,
        threshold_index,
    })
}

/// Per-node OLS estimate and marginal variances `diag((XᵀX)⁻¹)` under unit noise.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsNodeSummary<T> {
    pub beta_hat: Vector<T>,
    pub theta_diag: Vector<T>,
}

pub fn ols_node_summary<T: Scalar>(data: &NodeData<T>) -> Result<OlsNodeSummary<T>> {
    let beta_hat = least_squares(data.x(), data.y())?;
    let theta_diag = spd_inverse(&data.x().gram())?.diagonal();
    if let Some(j) = theta_diag.iter().position(|t| !(*t > T::zero())) {
        return Err(Error::SingularDesign {
            pivot: theta_diag[j].as_f64(),
            largest: max_abs(&theta_diag).as_f64(),
        });
    }
    Ok(OlsNodeSummary { beta_hat, theta_diag })
}

/// Averaged OLS z-scores, their two-sided normal p-values, and the BHq set.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsSelection {
    pub z: Vec<f64>,
    pub p_values: Vec<f64>,
    pub bhq: BhqResult,
}

pub fn ols_aggregate_select<T: Scalar>(summaries: &[OlsNodeSummary<T>], q: f64) -> Result<OlsSelection> {
    let m = summaries.len();
    if m == 0 {
        return Err(Error::InvalidInput("no OLS summaries".into()));
    }
    let p = summaries[0].beta_hat.len();
    if summaries
        .iter()
        .any(|s| s.beta_hat.len() != p || s.theta_diag.len() != p)
    {
        return Err(Error::InvalidInput("OLS summaries differ in dimension".into()));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mf = m as f64;
    let z: Vec<f64> = (0..p)
        .map(|j| {
            let beta: f64 = summaries.iter().map(|s| s.beta_hat[j].as_f64()).sum::<f64>() / mf;
            let theta: f64 = summaries.iter().map(|s| s.theta_diag[j].as_f64()).sum::<f64>() / (mf * mf);
            beta / theta.sqrt()
        })
        .collect();
    let p_values: Vec<f64> = z.iter().map(|v| (2.0 * normal.cdf(-v.abs())).min(1.0)).collect();
    let bhq = bhq(&p_values, q)?;
    Ok(OlsSelection { z, p_values, bhq })
}

/// Bits a node sends for the OLS baseline: `β̂` and `diag Θ` as `f64`.
pub fn ols_message_bits(p: usize) -> u64 {
    2 * 64 * p as u64
}

/// Bits a node sends for the vote baseline: one support bit per feature.
pub fn vote_message_bits(p: usize) -> u64 {
    p as u64
}

/// Cross-validated Lasso fit with the one-standard-error rule.
#[derive(Debug, Clone, PartialEq)]
pub struct CvLasso<T> {
    pub lambdas: Vec<T>,
    pub cv_error: Vec<f64>,
    pub cv_se: Vec<f64>,
    pub lambda_min: T,
    pub lambda_1se: T,
    /// Nonzero coefficients of the full-data fit at `lambda_1se`, ascending.
    pub support: Vec<usize>,
}

/// `folds`-fold CV over a geometric grid from the full-data `λ_max`.
///
/// Rows are shuffled with `seed` and split into contiguous folds. Training
/// fits use `λ · n_train / n` so the penalty keeps its per-sample weight.
pub fn lasso_cv<T: Scalar>(data: &NodeData<T>, folds: usize, grid: &LambdaGrid, seed: u64) -> Result<CvLasso<T>> {
    let n = data.n();
    if folds < 2 || folds > n {
        return Err(Error::Config(format!("need 2 <= folds <= n = {n}, got {folds}")));
    }
    let x = data.x();
    let y = data.y();
    let lambda_max = max_abs(&x.t_matvec(y));
    if !(lambda_max > T::zero()) {
        return Ok(CvLasso {
            lambdas: vec![],
            cv_error: vec![],
            cv_se: vec![],
            lambda_min: T::zero(),
            lambda_1se: T::zero(),
            support: vec![],
        });
    }
    let lambdas = grid.values(lambda_max);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from_seed(seed));

    let mut errors = vec![vec![0.0; folds]; lambdas.len()];
    for f in 0..folds {
        let test: Vec<usize> = perm[f * n / folds..(f + 1) * n / folds].to_vec();
        let mut train: Vec<usize> = perm[..f * n / folds].to_vec();
        train.extend_from_slice(&perm[(f + 1) * n / folds..]);
        let path = LassoPath::new(x.select_rows(&train));
        let y_train: Vec<T> = train.iter().map(|&i| y[i]).collect();
        let scale = T::lit(train.len() as f64 / n as f64);
        let scaled: Vec<T> = lambdas.iter().map(|&l| l * scale).collect();
        let x_test = x.select_rows(&test);
        for (l, beta) in path.solve_path(&y_train, &scaled)?.iter().enumerate() {
            let pred = x_test.matvec(beta);
            let sse: f64 = test
                .iter()
                .zip(&pred)
                .map(|(&i, &yh)| (y[i] - yh).as_f64().powi(2))
                .sum();
            errors[l][f] = sse / test.len() as f64;
        }
    }
    let kf = folds as f64;
    let cv_error: Vec<f64> = errors.iter().map(|e| e.iter().sum::<f64>() / kf).collect();
    let cv_se: Vec<f64> = errors
        .iter()
        .zip(&cv_error)
        .map(|(e, &mean)| {
            let var = e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (kf - 1.0);
            (var / kf).sqrt()
        })
        .collect();
    let l_min = (0..lambdas.len())
        .min_by(|&a, &b| cv_error[a].total_cmp(&cv_error[b]).then(a.cmp(&b)))
        .expect("non-empty grid");
    let bound = cv_error[l_min] + cv_se[l_min];
    // grid is decreasing, so the first index under the bound is the largest λ
    let l_1se = (0..=l_min).find(|&l| cv_error[l] <= bound).unwrap_or(l_min);
    let beta = LassoPath::new(x.clone()).solve(y, lambdas[l_1se])?;
    let support = (0..beta.len()).filter(|&j| beta[j] != T::zero()).collect();
    Ok(CvLasso {
        lambda_min: lambdas[l_min],
        lambda_1se: lambdas[l_1se],
        lambdas,
        cv_error,
        cv_se,
        support,
    })
}

/// Support of the one-standard-error cross-validated Lasso.
pub fn lasso_cv_support<T: Scalar>(data: &NodeData<T>, folds: usize, grid: &LambdaGrid, seed: u64) -> Result<Vec<usize>> {
    Ok(lasso_cv(data, folds, grid, seed)?.support)
}

/// Number of supports containing each feature.
pub fn vote_counts(supports: &[Vec<usize>], p: usize) -> Result<Vec<usize>> {
    let mut counts = vec![0usize; p];
    for s in supports {
        for &j in s {
            let c = counts
                .get_mut(j)
                .ok_or_else(|| Error::InvalidInput(format!("support index {j} out of range for p = {p}")))?;
            *c += 1;
        }
    }
    Ok(counts)
}

/// Features present in strictly more than half of the supports.
pub fn majority_vote(supports: &[Vec<usize>], p: usize) -> Result<Vec<usize>> {
    let m = supports.len();
    Ok(vote_counts(supports, p)?
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| 2 * c > m)
        .map(|(j, _)| j)
        .collect())
}

/// OLS baseline in the selection CSV layout: `W = |z|`, `P` the two-sided p-value.
pub fn ols_selection_rows(sel: &OlsSelection) -> Vec<SelectionRow> {
    indicator_rows(sel.z.len(), &sel.bhq.rejected, |j| (sel.z[j].abs(), Some(sel.p_values[j])))
}

/// Vote baseline in the selection CSV layout: `W` is the vote count.
pub fn vote_selection_rows(counts: &[usize], selected: &[usize]) -> Vec<SelectionRow> {
    indicator_rows(counts.len(), selected, |j| (counts[j] as f64, None))
}

fn indicator_rows(p: usize, selected: &[usize], stat: impl Fn(usize) -> (f64, Option<f64>)) -> Vec<SelectionRow> {
    let mut chosen = vec![false; p];
    for &j in selected {
        chosen[j] = true;
    }
    (0..p)
        .map(|j| {
            let (w, p_value) = stat(j);
            SelectionRow {
                feature_index: j + 1,
                w,
                chi: None,
                p_value,
                omega: if chosen[j] { 1.0 } else { 0.0 },
                rejected: chosen[j],
            }
        })
        .collect()
}
