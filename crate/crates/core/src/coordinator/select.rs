use std::cmp::Ordering;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::wire::NodeSummary;

use super::binomial::{aggregate_chi, binomial_pvalue};
use super::confidence::ConfidenceSpec;
use super::summary::{aggregate_w, SummarySpec};

/// Coordinator-side per-feature aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateStats<T> {
    /// Number of `+1` signs per feature, in `[0, m]`.
    pub chi: Vec<usize>,
    pub w: Vec<T>,
    /// Binomial upper-tail p-value at `chi_j`.
    pub p_values: Vec<T>,
    pub m: usize,
}

impl<T: Scalar> AggregateStats<T> {
    pub fn p(&self) -> usize {
        self.w.len()
    }

    /// Aggregates raw per-node signs and ordering statistics.
    pub fn from_parts(chi_vectors: &[Vec<i8>], w_vectors: &[Vec<T>], gamma: &SummarySpec) -> Result<Self> {
        if chi_vectors.len() != w_vectors.len() {
            return Err(Error::InvalidInput(format!(
                "{} sign vectors but {} W vectors",
                chi_vectors.len(),
                w_vectors.len()
            )));
        }
        let chi = aggregate_chi(chi_vectors)?;
        let w = aggregate_w(w_vectors, gamma)?;
        if w.len() != chi.len() {
            return Err(Error::InvalidInput("sign and W vectors differ in length".into()));
        }
        let m = chi_vectors.len();
        let p_values = chi
            .iter()
            .map(|&c| binomial_pvalue(c, m).map(T::lit))
            .collect::<Result<_>>()?;
        Ok(AggregateStats { chi, w, p_values, m })
    }
}

/// Aggregates decoded node messages. A weighted-sum `Γ` without explicit
/// weights uses each node's reported sample size.
pub fn aggregate_summaries(summaries: &[NodeSummary], gamma: &SummarySpec) -> Result<AggregateStats<f64>> {
    let first = summaries
        .first()
        .ok_or_else(|| Error::InvalidInput("no node summaries".into()))?;
    if let Some(s) = summaries.iter().find(|s| s.p() != first.p()) {
        return Err(Error::InvalidInput(format!(
            "node {} reports p = {}, node {} reports p = {}",
            s.node_id,
            s.p(),
            first.node_id,
            first.p()
        )));
    }
    let sizes: Vec<f64> = summaries.iter().map(|s| s.n as f64).collect();
    let gamma = gamma.with_node_sizes(&sizes);
    let chi: Vec<Vec<i8>> = summaries.iter().map(|s| s.chi.clone()).collect();
    let w: Vec<Vec<f64>> = summaries.iter().map(|s| s.w.clone()).collect();
    AggregateStats::from_parts(&chi, &w, &gamma)
}

/// Outcome of the weighted selection rule.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult<T> {
    /// Feature indices sorted by `W` descending, ties by ascending index.
    pub rho: Vec<usize>,
    /// Number of ranks selected; `None` means nothing passes the bound.
    pub k_hat: Option<usize>,
    /// Confidence weight per feature (indexed by feature, not rank).
    pub omega: Vec<T>,
    pub q: f64,
}

impl<T: Scalar> SelectionResult<T> {
    pub fn rejected(&self) -> Vec<bool> {
        self.omega.iter().map(|&w| w > T::zero()).collect()
    }

    pub fn num_rejected(&self) -> usize {
        self.omega.iter().filter(|&&w| w > T::zero()).count()
    }
}

/// Order by `W` descending, ties by ascending index.
pub fn rank_by_w<T: Scalar>(w: &[T]) -> Vec<usize> {
    let mut rho: Vec<usize> = (0..w.len()).collect();
    rho.sort_by(|&a, &b| w[b].partial_cmp(&w[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    rho
}

/// `k̂`-rule on an ordered sequence of confidences `Ω(P_ρ(1)), …`: the largest
/// `k` whose prefix ratio `(1 + Σ(1 − Ω)) / ΣΩ` is at most `bound`.
pub fn k_hat_from_confidences(conf: &[f64], bound: f64) -> Option<usize> {
    let (mut miss, mut mass) = (0.0, 0.0);
    let mut best = None;
    for (k, &c) in conf.iter().enumerate() {
        miss += 1.0 - c;
        mass += c;
        let ratio = if mass > 0.0 { (1.0 + miss) / mass } else { f64::INFINITY };
        if ratio <= bound {
            best = Some(k + 1);
        }
    }
    best
}

/// Weighted knockoff selection at nominal level `q`.
pub fn knockoff_select<T: Scalar>(stats: &AggregateStats<T>, q: f64, omega: &ConfidenceSpec) -> Result<SelectionResult<T>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Config(format!("q must lie in (0, 1), got {q}")));
    }
    if stats.w.len() != stats.p_values.len() {
        return Err(Error::InvalidInput("W and P differ in length".into()));
    }
    let e = omega.expected_value()?;
    let bound = q / e - q;
    let rho = rank_by_w(&stats.w);
    let conf: Vec<f64> = rho.iter().map(|&j| omega.eval(stats.p_values[j].as_f64())).collect();
    let k_hat = k_hat_from_confidences(&conf, bound);
    let mut weights = vec![T::zero(); stats.w.len()];
    for (&j, &c) in rho.iter().zip(&conf).take(k_hat.unwrap_or(0)) {
        weights[j] = T::lit(c);
    }
    Ok(SelectionResult {
        rho,
        k_hat,
        omega: weights,
        q,
    })
}

/// Weighted false discovery proportion `Σ ω_j 1{null j} / Σ ω_j` (0 if no mass).
pub fn wfdp<T: Scalar>(omega: &[T], null_mask: &[bool]) -> Result<f64> {
    if omega.len() != null_mask.len() {
        return Err(Error::InvalidInput(format!(
            "{} weights but {} null flags",
            omega.len(),
            null_mask.len()
        )));
    }
    let total: f64 = omega.iter().map(|w| w.as_f64()).sum();
    if total <= 0.0 {
        return Ok(0.0);
    }
    let null: f64 = omega
        .iter()
        .zip(null_mask)
        .filter(|(_, &n)| n)
        .map(|(w, _)| w.as_f64())
        .sum();
    Ok(null / total)
}

pub const SELECTION_CSV_HEADER: &str = "feature_index,W,chi,P,omega,rejected";

/// One line of the selection CSV. `chi` and `P` are empty for procedures
/// that have no such quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRow {
    /// 1-based feature index.
    pub feature_index: usize,
    pub w: f64,
    pub chi: Option<usize>,
    pub p_value: Option<f64>,
    pub omega: f64,
    pub rejected: bool,
}

pub fn selection_rows<T: Scalar>(stats: &AggregateStats<T>, result: &SelectionResult<T>) -> Vec<SelectionRow> {
    (0..stats.p())
        .map(|j| SelectionRow {
            feature_index: j + 1,
            w: stats.w[j].as_f64(),
            chi: Some(stats.chi[j]),
            p_value: Some(stats.p_values[j].as_f64()),
            omega: result.omega[j].as_f64(),
            rejected: result.omega[j] > T::zero(),
        })
        .collect()
}

pub fn selection_csv(rows: &[SelectionRow]) -> String {
    let mut out = String::with_capacity(32 * (rows.len() + 1));
    out.push_str(SELECTION_CSV_HEADER);
    out.push('\n');
    for r in rows {
        let chi = r.chi.map(|c| c.to_string()).unwrap_or_default();
        let p = r.p_value.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.feature_index, r.w, chi, p, r.omega, r.rejected as u8
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn stats(w: Vec<f64>, p: Vec<f64>) -> AggregateStats<f64> {
        AggregateStats {
            chi: vec![0; w.len()],
            w,
            p_values: p,
            m: 1,
        }
    }

    #[test]
    fn nine_of_ten() {
        let w: Vec<f64> = (0..10).map(|j| 10.0 - j as f64).collect();
        let mut p = vec![0.1; 10];
        p[9] = 0.9;
        let r = knockoff_select(&stats(w, p), 0.2, &ConfidenceSpec::Step { c: 0.5 }).unwrap();
        assert_eq!(r.k_hat, Some(9));
        assert_eq!(r.num_rejected(), 9);
        assert!(r.omega[..9].iter().all(|&o| o == 1.0));
        assert_eq!(r.omega[9], 0.0);
    }

    #[test]
    fn nothing_when_all_large() {
        let r = knockoff_select(&stats(vec![1.0; 6], vec![0.9; 6]), 0.2, &ConfidenceSpec::Step { c: 0.5 }).unwrap();
        assert_eq!(r.k_hat, None);
        assert_eq!(r.num_rejected(), 0);
    }

    #[test]
    fn ties_by_ascending_index() {
        assert_eq!(rank_by_w(&[1.0, 3.0, 1.0, 3.0]), vec![1, 3, 0, 2]);
    }

    #[test]
    fn invalid_q() {
        let s = stats(vec![1.0], vec![0.1]);
        assert!(matches!(knockoff_select(&s, 0.0, &ConfidenceSpec::Linear), Err(Error::Config(_))));
        assert!(knockoff_select(&s, 1.0, &ConfidenceSpec::Linear).is_err());
    }

    #[test]
    fn wfdp_examples() {
        assert_eq!(wfdp(&[1.0, 1.0, 0.0], &[false, true, true]).unwrap(), 0.5);
        assert_eq!(wfdp(&[0.0, 0.0], &[true, false]).unwrap(), 0.0);
        assert_eq!(wfdp(&[0.5, 0.5], &[false, true]).unwrap(), 0.5);
        assert!(wfdp(&[1.0], &[true, false]).is_err());
    }

    fn brute_force_k_hat(conf: &[f64], bound: f64) -> Option<usize> {
        (1..=conf.len())
            .filter(|&k| {
                let num = 1.0 + conf[..k].iter().map(|c| 1.0 - c).sum::<f64>();
                let den: f64 = conf[..k].iter().sum();
                let ratio = if den > 0.0 { num / den } else { f64::INFINITY };
                ratio <= bound
            })
            .max()
    }

    #[test]
    fn k_hat_matches_exhaustive_scan() {
        let mut rng = rng_from_seed(17);
        let omegas = [
            ConfidenceSpec::Step { c: 0.5 },
            ConfidenceSpec::Linear,
            ConfidenceSpec::Poly { d: 2.0 },
        ];
        for trial in 0..3000 {
            let p = rng.random_range(1..=12);
            let m = rng.random_range(1..=15);
            let chi: Vec<Vec<i8>> = (0..m)
                .map(|_| (0..p).map(|_| if rng.random_bool(0.7) { 1 } else { -1 }).collect())
                .collect();
            let w: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..p).map(|_| (rng.random_range(0..4) as f64) * 0.5).collect())
                .collect();
            let gamma = if m >= 2 { SummarySpec::SumTopR { r: 2 } } else { SummarySpec::Max };
            let s = AggregateStats::from_parts(&chi, &w, &gamma).unwrap();
            let omega = &omegas[trial % omegas.len()];
            let q = [0.1, 0.2, 0.3][trial % 3];
            let r = knockoff_select(&s, q, omega).unwrap();
            let conf: Vec<f64> = r.rho.iter().map(|&j| omega.eval(s.p_values[j])).collect();
            let bound = q / omega.expected_value().unwrap() - q;
            assert_eq!(r.k_hat, brute_force_k_hat(&conf, bound));
            for (rank, &j) in r.rho.iter().enumerate() {
                let expect = if r.k_hat.is_some_and(|k| rank < k) { conf[rank] } else { 0.0 };
                assert_eq!(r.omega[j], expect);
            }
        }
    }

    #[test]
    fn invariant_to_w_rescaling() {
        let mut rng = rng_from_seed(4);
        for _ in 0..200 {
            let p = 15;
            let w: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
            let pv: Vec<f64> = (0..p).map(|_| rng.random::<f64>().powi(3)).collect();
            let a = knockoff_select(&stats(w.clone(), pv.clone()), 0.3, &ConfidenceSpec::Linear).unwrap();
            let scaled: Vec<f64> = w.iter().map(|v| v * 7.25).collect();
            let b = knockoff_select(&stats(scaled, pv), 0.3, &ConfidenceSpec::Linear).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn csv_layout() {
        let s = AggregateStats {
            chi: vec![3, 1],
            w: vec![2.5, 0.0],
            p_values: vec![0.125, 0.875],
            m: 3,
        };
        let r = knockoff_select(&s, 0.5, &ConfidenceSpec::Step { c: 0.5 }).unwrap();
        let csv = selection_csv(&selection_rows(&s, &r));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SELECTION_CSV_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("1,2.5,3,0.125,"));
    }
}
