//! Short command-line forms for summary and confidence functions. A value
//! starting with `{` is read as the JSON used in config files instead.

use knockagg::coordinator::{ConfidenceSpec, SummarySpec};
use knockagg::wire::WireMode;

use crate::CliError;

fn split(s: &str) -> (&str, Option<&str>) {
    match s.split_once(':') {
        Some((k, v)) => (k.trim(), Some(v.trim())),
        None => (s.trim(), None),
    }
}

fn number<T: std::str::FromStr>(what: &str, v: Option<&str>) -> Result<T, CliError> {
    let v = v.ok_or_else(|| CliError::Validation(format!("{what} needs a value, e.g. {what}:2")))?;
    v.parse()
        .map_err(|_| CliError::Validation(format!("{what}: cannot parse {v:?}")))
}

fn json<T: serde::de::DeserializeOwned>(s: &str) -> Result<T, CliError> {
    serde_json::from_str(s).map_err(|e| CliError::Validation(format!("bad JSON {s:?}: {e}")))
}

/// `max`, `sum_top_r:R`, `product_top_r:R`, `weighted_sum` (node sizes) or
/// `weighted_sum:w1,w2,...`.
pub fn parse_gamma(s: &str) -> Result<SummarySpec, CliError> {
    if s.trim_start().starts_with('{') {
        return json(s);
    }
    let (kind, arg) = split(s);
    Ok(match kind {
        "max" => SummarySpec::Max,
        "sum_top_r" => SummarySpec::SumTopR { r: number(kind, arg)? },
        "product_top_r" => SummarySpec::ProductTopR { r: number(kind, arg)? },
        "weighted_sum" => SummarySpec::WeightedSum {
            weights: arg
                .map(|a| a.split(',').map(|w| number::<f64>(kind, Some(w.trim()))).collect())
                .transpose()?,
        },
        _ => return Err(CliError::Validation(format!("unknown summary function {kind:?}"))),
    })
}

/// `step:C`, `linear`, `poly:D` or `table:x0=y0,x1=y1,...`.
pub fn parse_omega(s: &str) -> Result<ConfidenceSpec, CliError> {
    if s.trim_start().starts_with('{') {
        return json(s);
    }
    let (kind, arg) = split(s);
    let spec = match kind {
        "step" => ConfidenceSpec::Step { c: number(kind, arg)? },
        "linear" => ConfidenceSpec::Linear,
        "poly" => ConfidenceSpec::Poly { d: number(kind, arg)? },
        "table" => {
            let arg = arg.ok_or_else(|| CliError::Validation("table needs knots x=y,...".into()))?;
            let points = arg
                .split(',')
                .map(|kv| {
                    let (x, y) = kv
                        .split_once('=')
                        .ok_or_else(|| CliError::Validation(format!("table knot {kv:?} is not x=y")))?;
                    Ok((number("table", Some(x.trim()))?, number("table", Some(y.trim()))?))
                })
                .collect::<Result<_, CliError>>()?;
            ConfidenceSpec::Tabulated { points }
        }
        _ => return Err(CliError::Validation(format!("unknown confidence function {kind:?}"))),
    };
    spec.validate()?;
    Ok(spec)
}

pub fn parse_mode(s: &str) -> Result<WireMode, CliError> {
    match s {
        "binary-median" | "binary_median" => Ok(WireMode::BinaryMedian),
        "fixed16" => Ok(WireMode::Fixed16),
        "raw32" => Ok(WireMode::Raw32),
        _ => Err(CliError::Validation(format!(
            "unknown wire mode {s:?} (binary-median, fixed16, raw32)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_forms() {
        assert_eq!(parse_gamma("max").unwrap(), SummarySpec::Max);
        assert_eq!(parse_gamma("sum_top_r:3").unwrap(), SummarySpec::SumTopR { r: 3 });
        assert_eq!(
            parse_gamma("weighted_sum:1,2").unwrap(),
            SummarySpec::WeightedSum {
                weights: Some(vec![1.0, 2.0])
            }
        );
        assert_eq!(parse_gamma(r#"{"kind":"max"}"#).unwrap(), SummarySpec::Max);
        assert!(parse_gamma("sum_top_r").is_err());
        assert_eq!(parse_omega("step:0.3").unwrap(), ConfidenceSpec::Step { c: 0.3 });
        assert_eq!(
            parse_omega("table:0=1,0.5=0.5,1=0").unwrap(),
            ConfidenceSpec::Tabulated {
                points: vec![(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)]
            }
        );
        assert!(parse_omega("step:2").is_err());
        assert!(parse_omega("cubic").is_err());
        assert_eq!(parse_mode("fixed16").unwrap(), WireMode::Fixed16);
    }
}
