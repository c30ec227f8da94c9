use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Largest `m` for which the tail is summed in exact integer arithmetic.
pub const EXACT_BINOMIAL_LIMIT: usize = 64;

/// `P(Binomial(m, ½) ≥ chi) = 2⁻ᵐ Σ_{i=chi}^m C(m, i)`.
///
/// Exact (correctly rounded) for `m ≤ 64`; log-sum-exp beyond.
pub fn binomial_pvalue(chi: usize, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidInput("binomial p-value needs m >= 1".into()));
    }
    if chi > m {
        return Err(Error::InvalidInput(format!("chi = {chi} exceeds m = {m}")));
    }
    if chi == 0 {
        return Ok(1.0);
    }
    if m <= EXACT_BINOMIAL_LIMIT {
        let mut c: u128 = 1;
        let mut tail: u128 = 0;
        for i in 0..=m {
            if i >= chi {
                tail += c;
            }
            c = c * (m - i) as u128 / (i + 1) as u128;
        }
        // 2^m is a power of two, so the only rounding is the u128 -> f64 cast
        return Ok(tail as f64 / (m as f64).exp2());
    }
    let mf = m as f64;
    let log_terms: Vec<f64> = (chi..=m)
        .map(|i| ln_gamma(mf + 1.0) - ln_gamma(i as f64 + 1.0) - ln_gamma((m - i) as f64 + 1.0))
        .collect();
    let top = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = log_terms.iter().map(|t| (t - top).exp()).sum();
    Ok((top + sum.ln() - mf * std::f64::consts::LN_2).exp().min(1.0))
}

/// `χ_j` = number of `+1` signs for each feature across nodes.
pub fn aggregate_chi(chi_vectors: &[Vec<i8>]) -> Result<Vec<usize>> {
    let first = chi_vectors
        .first()
        .ok_or_else(|| Error::InvalidInput("no node signs to aggregate".into()))?;
    let p = first.len();
    let mut counts = vec![0usize; p];
    for (i, chi) in chi_vectors.iter().enumerate() {
        if chi.len() != p {
            return Err(Error::InvalidInput(format!(
                "node {i} sent {} signs, expected {p}",
                chi.len()
            )));
        }
        for (c, &s) in counts.iter_mut().zip(chi) {
            match s {
                1 => *c += 1,
                -1 => {}
                other => return Err(Error::InvalidInput(format!("node {i} sent sign {other}"))),
            }
        }
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn exact_tail(chi: usize, m: usize) -> BigRational {
        let mut c = BigInt::from(1);
        let mut tail = BigInt::from(0);
        for i in 0..=m {
            if i >= chi {
                tail += &c;
            }
            c = c * BigInt::from(m - i) / BigInt::from(i + 1);
        }
        BigRational::new(tail, BigInt::from(1) << m)
    }

    #[test]
    fn examples() {
        assert_eq!(binomial_pvalue(5, 5).unwrap(), 1.0 / 32.0);
        assert_eq!(binomial_pvalue(0, 5).unwrap(), 1.0);
        assert_eq!(binomial_pvalue(4, 5).unwrap(), 0.1875);
        assert!(binomial_pvalue(6, 5).is_err());
        assert!(binomial_pvalue(0, 0).is_err());
    }

    #[test]
    fn exact_against_rational_oracle() {
        for m in 1..=20 {
            for chi in 0..=m {
                let got = BigRational::from_float(binomial_pvalue(chi, m).unwrap()).unwrap();
                assert_eq!(got, exact_tail(chi, m), "m = {m}, chi = {chi}");
            }
        }
    }

    #[test]
    fn strictly_decreasing() {
        for m in [1usize, 7, 64, 65, 200] {
            let ps: Vec<f64> = (0..=m).map(|c| binomial_pvalue(c, m).unwrap()).collect();
            assert!(ps.windows(2).all(|w| w[1] <= w[0]), "m = {m}");
            // strict wherever the step C(m, chi) / 2^m is resolvable next to P
            assert!(ps[m / 2..].windows(2).all(|w| w[1] < w[0]), "m = {m}");
            assert_eq!(ps[0], 1.0);
            let last = ps[m];
            assert!((last / (-(m as f64)).exp2() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn log_space_agrees_with_exact_near_the_switch() {
        // m = 66 by the log path vs the exact oracle
        let m = 66;
        for chi in [1usize, 20, 33, 40, 60, 66] {
            let exact: f64 = num_traits::ToPrimitive::to_f64(&exact_tail(chi, m)).unwrap();
            let got = binomial_pvalue(chi, m).unwrap();
            assert!((got / exact - 1.0).abs() < 1e-10, "chi = {chi}: {got} vs {exact}");
        }
    }

    #[test]
    fn chi_counts() {
        let v = vec![vec![1, 1, -1], vec![1, -1, -1], vec![-1, 1, -1], vec![1, 1, -1], vec![-1, -1, -1]];
        assert_eq!(aggregate_chi(&v).unwrap(), vec![3, 3, 0]);
        assert_eq!(aggregate_chi(&vec![vec![1]; 4]).unwrap(), vec![4]);
        assert!(aggregate_chi(&[vec![1, 1], vec![1]]).is_err());
        assert!(aggregate_chi(&[vec![0]]).is_err());
    }
}
