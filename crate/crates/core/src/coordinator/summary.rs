use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Summary function `Γ` combining the per-node ordering statistics of one
/// feature. Every variant is nonnegative and non-decreasing in each argument
/// on nonnegative inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SummarySpec {
    Max,
    SumTopR { r: usize },
    ProductTopR { r: usize },
    /// `Σ n_i W^i`. When `weights` is absent the coordinator fills in the
    /// sample sizes reported by the nodes.
    WeightedSum {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
}

impl Default for SummarySpec {
    fn default() -> Self {
        SummarySpec::WeightedSum { weights: None }
    }
}

impl SummarySpec {
    /// Fills unspecified weighted-sum weights with the node sample sizes.
    pub fn with_node_sizes(&self, sizes: &[f64]) -> Self {
        match self {
            SummarySpec::WeightedSum { weights: None } => SummarySpec::WeightedSum {
                weights: Some(sizes.to_vec()),
            },
            other => other.clone(),
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        match self {
            SummarySpec::Max => Ok(()),
            SummarySpec::SumTopR { r } | SummarySpec::ProductTopR { r } => {
                if *r <= 1 || *r > m {
                    Err(Error::Config(format!("top-r summary needs 1 < r <= m = {m}, got r = {r}")))
                } else {
                    Ok(())
                }
            }
            SummarySpec::WeightedSum { weights } => match weights {
                None => Err(Error::Config("weighted_sum summary is missing its weights".into())),
                Some(w) if w.len() != m => Err(Error::Config(format!(
                    "weighted_sum has {} weights for {m} nodes",
                    w.len()
                ))),
                Some(w) if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) => {
                    Err(Error::Config("weighted_sum weights must be finite and nonnegative".into()))
                }
                Some(_) => Ok(()),
            },
        }
    }

    /// `Γ(x_1, …, x_m)`. Assumes [`SummarySpec::validate`] passed for `m = xs.len()`.
    pub fn apply<T: Scalar>(&self, xs: &[T]) -> T {
        match self {
            SummarySpec::Max => xs.iter().fold(T::zero(), |m, &x| m.max(x)),
            SummarySpec::SumTopR { r } => top_r(xs, *r).into_iter().fold(T::zero(), |s, x| s + x),
            SummarySpec::ProductTopR { r } => top_r(xs, *r).into_iter().fold(T::one(), |s, x| s * x),
            SummarySpec::WeightedSum { weights } => {
                let w = weights.as_deref().expect("validated weights");
                xs.iter().zip(w).fold(T::zero(), |s, (&x, &wi)| s + T::lit(wi) * x)
            }
        }
    }
}

fn top_r<T: Scalar>(xs: &[T], r: usize) -> Vec<T> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    v.truncate(r);
    v
}

/// Coordinate-wise `W_j = Γ(W_j^1, …, W_j^m)`.
pub fn aggregate_w<T: Scalar>(w_vectors: &[Vec<T>], gamma: &SummarySpec) -> Result<Vec<T>> {
    let m = w_vectors.len();
    if m == 0 {
        return Err(Error::InvalidInput("no node statistics to aggregate".into()));
    }
    let p = w_vectors[0].len();
    if w_vectors.iter().any(|w| w.len() != p) {
        return Err(Error::InvalidInput("W vectors differ in length".into()));
    }
    gamma.validate(m)?;
    let mut column = vec![T::zero(); m];
    Ok((0..p)
        .map(|j| {
            for (c, w) in column.iter_mut().zip(w_vectors) {
                *c = w[j];
            }
            gamma.apply(&column)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(gamma: &SummarySpec, xs: &[f64]) -> f64 {
        let vs: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        aggregate_w(&vs, gamma).unwrap()[0]
    }

    #[test]
    fn examples() {
        assert_eq!(single(&SummarySpec::Max, &[1.0, 4.0, 2.0]), 4.0);
        assert_eq!(single(&SummarySpec::SumTopR { r: 2 }, &[1.0, 4.0, 2.0]), 6.0);
        assert_eq!(single(&SummarySpec::ProductTopR { r: 2 }, &[1.0, 4.0, 2.0]), 8.0);
        let ws = SummarySpec::WeightedSum {
            weights: Some(vec![100.0, 200.0]),
        };
        assert_eq!(single(&ws, &[0.5, 0.25]), 100.0);
    }

    #[test]
    fn config_errors() {
        let vs = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            aggregate_w(&vs, &SummarySpec::WeightedSum { weights: None }),
            Err(Error::Config(_))
        ));
        assert!(matches!(aggregate_w(&vs, &SummarySpec::SumTopR { r: 3 }), Err(Error::Config(_))));
        assert!(matches!(aggregate_w(&vs, &SummarySpec::SumTopR { r: 1 }), Err(Error::Config(_))));
        assert!(aggregate_w(&[vec![1.0], vec![1.0, 2.0]], &SummarySpec::Max).is_err());
    }

    #[test]
    fn node_sizes_fill_weights() {
        let g = SummarySpec::default().with_node_sizes(&[3.0, 5.0]);
        assert_eq!(g, SummarySpec::WeightedSum { weights: Some(vec![3.0, 5.0]) });
        assert_eq!(SummarySpec::Max.with_node_sizes(&[1.0]), SummarySpec::Max);
    }

    #[test]
    fn serde_shape() {
        let g: SummarySpec = serde_json::from_str(r#"{"kind":"sum_top_r","r":2}"#).unwrap();
        assert_eq!(g, SummarySpec::SumTopR { r: 2 });
        let g: SummarySpec = serde_json::from_str(r#"{"kind":"weighted_sum"}"#).unwrap();
        assert_eq!(g, SummarySpec::WeightedSum { weights: None });
        assert!(serde_json::from_str::<SummarySpec>(r#"{"kind":"sum_top_r"}"#).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn specs(m: usize) -> Vec<SummarySpec> {
            let mut v = vec![
                SummarySpec::Max,
                SummarySpec::WeightedSum {
                    weights: Some((0..m).map(|i| (i * 37 % 11) as f64 + 1.0).collect()),
                },
            ];
            if m >= 2 {
                v.push(SummarySpec::SumTopR { r: 2 });
                v.push(SummarySpec::ProductTopR { r: m });
            }
            v
        }

        proptest! {
            #[test]
            fn monotone_in_each_coordinate(
                xs in proptest::collection::vec(0.0f64..10.0, 1..8),
                which in any::<prop::sample::Index>(),
                bump in 0.0f64..5.0,
            ) {
                let i = which.index(xs.len());
                let mut ys = xs.clone();
                ys[i] += bump;
                for g in specs(xs.len()) {
                    let a = g.apply(&xs);
                    let b = g.apply(&ys);
                    prop_assert!(a >= 0.0);
                    prop_assert!(b >= a, "{g:?}: {a} -> {b}");
                }
            }
        }
    }
}
