use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Confidence function `Ω : [0, 1] → [0, 1]`, non-increasing with
/// `Ω(0) = 1` and `Ω(1) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConfidenceSpec {
    /// `1{x ≤ c}`; recovers selective SeqStep+.
    Step { c: f64 },
    /// `1 − x`.
    Linear,
    /// `(1 − x)^d`, `d > 0`.
    Poly { d: f64 },
    /// Piecewise-linear interpolation through `(x, Ω(x))` knots.
    Tabulated { points: Vec<(f64, f64)> },
}

impl Default for ConfidenceSpec {
    fn default() -> Self {
        ConfidenceSpec::Step { c: 0.5 }
    }
}

impl ConfidenceSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ConfidenceSpec::Step { c } => {
                if !(*c > 0.0 && *c < 1.0) {
                    return Err(Error::InvalidConfidence(format!("step threshold must lie in (0, 1), got {c}")));
                }
            }
            ConfidenceSpec::Linear => {}
            ConfidenceSpec::Poly { d } => {
                if !(*d > 0.0 && d.is_finite()) {
                    return Err(Error::InvalidConfidence(format!("poly exponent must be positive, got {d}")));
                }
            }
            ConfidenceSpec::Tabulated { points } => {
                if points.len() < 2 {
                    return Err(Error::InvalidConfidence("table needs at least two knots".into()));
                }
                if points[0] != (0.0, 1.0) || points[points.len() - 1] != (1.0, 0.0) {
                    return Err(Error::InvalidConfidence("table must start at (0, 1) and end at (1, 0)".into()));
                }
                for w in points.windows(2) {
                    let ((x0, y0), (x1, y1)) = (w[0], w[1]);
                    if !(x1 > x0) {
                        return Err(Error::InvalidConfidence("knot abscissae must increase".into()));
                    }
                    if !(y1 <= y0) || !(0.0..=1.0).contains(&y1) {
                        return Err(Error::InvalidConfidence("knot values must be non-increasing in [0, 1]".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self {
            ConfidenceSpec::Step { c } => {
                if x <= *c {
                    1.0
                } else {
                    0.0
                }
            }
            ConfidenceSpec::Linear => 1.0 - x,
            ConfidenceSpec::Poly { d } => (1.0 - x).powf(*d),
            ConfidenceSpec::Tabulated { points } => {
                let k = points.partition_point(|&(px, _)| px <= x);
                if k == 0 {
                    return points[0].1;
                }
                if k >= points.len() {
                    return points[points.len() - 1].1;
                }
                let ((x0, y0), (x1, y1)) = (points[k - 1], points[k]);
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        }
    }

    /// `E Ω(U)` for `U ~ Uniform[0, 1]`. Every variant has a closed form; the
    /// tabulated interpolant integrates exactly by the trapezoid rule.
    pub fn expected_value(&self) -> Result<f64> {
        self.validate()?;
        let e = match self {
            ConfidenceSpec::Step { c } => *c,
            ConfidenceSpec::Linear => 0.5,
            ConfidenceSpec::Poly { d } => 1.0 / (d + 1.0),
            ConfidenceSpec::Tabulated { points } => points
                .windows(2)
                .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
                .sum(),
        };
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::InvalidConfidence(format!("E Ω(U) = {e} is outside (0, 1)")));
        }
        Ok(e)
    }
}

/// `E Ω(U)`; see [`ConfidenceSpec::expected_value`].
pub fn expected_omega(omega: &ConfidenceSpec) -> Result<f64> {
    omega.expected_value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert_eq!(ConfidenceSpec::Step { c: 0.5 }.expected_value().unwrap(), 0.5);
        assert_eq!(ConfidenceSpec::Linear.expected_value().unwrap(), 0.5);
        let e = ConfidenceSpec::Poly { d: 2.0 }.expected_value().unwrap();
        assert!((e - 1.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn tabulated_expectation() {
        let points: Vec<(f64, f64)> = (0..=1000)
            .map(|k| {
                let x = k as f64 / 1000.0;
                (x, (1.0 - x).powi(2))
            })
            .collect();
        let e = ConfidenceSpec::Tabulated { points }.expected_value().unwrap();
        // interpolation error of a convex quadratic on h = 1e-3 is h^2 / 6
        assert!((e - 1.0 / 3.0).abs() < 2e-7, "{e}");
        let e = ConfidenceSpec::Tabulated {
            points: vec![(0.0, 1.0), (0.5, 1.0), (0.5, 0.0), (1.0, 0.0)],
        };
        assert!(e.validate().is_err());
        let e = ConfidenceSpec::Tabulated {
            points: vec![(0.0, 1.0), (0.2, 1.0), (0.4, 0.0), (1.0, 0.0)],
        };
        assert!((e.expected_value().unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn boundary_values() {
        for omega in [
            ConfidenceSpec::Step { c: 0.3 },
            ConfidenceSpec::Linear,
            ConfidenceSpec::Poly { d: 0.5 },
            ConfidenceSpec::Tabulated {
                points: vec![(0.0, 1.0), (0.2, 0.9), (1.0, 0.0)],
            },
        ] {
            assert_eq!(omega.eval(0.0), 1.0);
            assert_eq!(omega.eval(1.0), 0.0);
            let mut last = 1.0;
            for k in 0..=100 {
                let v = omega.eval(k as f64 / 100.0);
                assert!(v <= last);
                last = v;
            }
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(ConfidenceSpec::Step { c: 1.0 }.validate().is_err());
        assert!(ConfidenceSpec::Step { c: 0.0 }.expected_value().is_err());
        assert!(ConfidenceSpec::Poly { d: -1.0 }.validate().is_err());
        assert!(ConfidenceSpec::Tabulated {
            points: vec![(0.0, 1.0), (0.5, 0.7), (0.4, 0.2), (1.0, 0.0)]
        }
        .validate()
        .is_err());
        assert!(ConfidenceSpec::Tabulated {
            points: vec![(0.0, 0.9), (1.0, 0.0)]
        }
        .validate()
        .is_err());
    }
}
