use crate::coordinator::wfdp;
use crate::error::{Error, Result};

/// Per-replicate outcome of one selection procedure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub fdp: f64,
    pub power: f64,
    pub wfdp: f64,
    pub hamming: usize,
    pub comm_bits: u64,
}

/// FDP with a `max(|Ŝ|, 1)` denominator, power over `max(k, 1)`, weighted FDP
/// from `omega`, and the Hamming distance between rejection and truth indicators.
pub fn compute_metrics(rejected: &[bool], omega: &[f64], truth: &[bool], comm_bits: u64) -> Result<Metrics> {
    if rejected.len() != truth.len() || omega.len() != truth.len() {
        return Err(Error::InvalidInput(format!(
            "metric inputs differ in length: {} rejections, {} weights, {} truth flags",
            rejected.len(),
            omega.len(),
            truth.len()
        )));
    }
    let selected = rejected.iter().filter(|&&r| r).count();
    let true_hits = rejected.iter().zip(truth).filter(|(&r, &t)| r && t).count();
    let k = truth.iter().filter(|&&t| t).count();
    let nulls: Vec<bool> = truth.iter().map(|t| !t).collect();
    Ok(Metrics {
        fdp: (selected - true_hits) as f64 / selected.max(1) as f64,
        power: true_hits as f64 / k.max(1) as f64,
        wfdp: wfdp(omega, &nulls)?,
        hamming: rejected.iter().zip(truth).filter(|(r, t)| r != t).count(),
        comm_bits,
    })
}

/// Sample mean and standard deviation (`n − 1` denominator; 0 for one value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(rejected: &[bool], truth: &[bool]) -> Metrics {
        let omega: Vec<f64> = rejected.iter().map(|&r| f64::from(u8::from(r))).collect();
        compute_metrics(rejected, &omega, truth, 0).unwrap()
    }

    #[test]
    fn examples() {
        let truth = [true, true, false, false];
        let m = metrics(&[false; 4], &truth);
        assert_eq!((m.fdp, m.power, m.hamming), (0.0, 0.0, 2));
        let m = metrics(&truth, &truth);
        assert_eq!((m.fdp, m.power, m.hamming), (0.0, 1.0, 0));
        let m = metrics(&[true, false, true, false], &truth);
        assert_eq!((m.fdp, m.power, m.wfdp), (0.5, 0.5, 0.5));
        assert!(compute_metrics(&[true], &[1.0], &[true, false], 0).is_err());
    }

    #[test]
    fn summary_statistics() {
        assert_eq!(mean_sd(&[1.0, 3.0]), (2.0, 2f64.sqrt()));
        assert_eq!(mean_sd(&[4.0]), (4.0, 0.0));
    }
}
