use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::node::normalize_columns;
use crate::numerics::{cholesky, HouseholderQr, Matrix, Vector};
use crate::rng::rng_from_seed;

/// Row covariance of a generated design.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SigmaSpec {
    #[default]
    Identity,
    /// Unit diagonal, constant off-diagonal `rho`.
    Equicorr { rho: f64 },
    /// Unit diagonal, off-diagonal `−0.3 / (0.3 (p − 2) + 1)`.
    PaperCorr,
}

impl SigmaSpec {
    pub fn off_diagonal(&self, p: usize) -> f64 {
        match self {
            SigmaSpec::Identity => 0.0,
            SigmaSpec::Equicorr { rho } => *rho,
            SigmaSpec::PaperCorr => -0.3 / (0.3 * (p as f64 - 2.0) + 1.0),
        }
    }

    pub fn covariance(&self, p: usize) -> Matrix<f64> {
        let off = self.off_diagonal(p);
        Matrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { off })
    }

    pub fn name(&self) -> &'static str {
        match self {
            SigmaSpec::Identity => "identity",
            SigmaSpec::Equicorr { .. } => "equicorr",
            SigmaSpec::PaperCorr => "paper_corr",
        }
    }
}

fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
    let mut rng = rng_from_seed(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// `n` rows i.i.d. `N(0, Σ)`, then columns scaled to unit length.
pub fn gen_design(n: usize, p: usize, sigma: &SigmaSpec, seed: u64) -> Result<Matrix<f64>> {
    if n < p || p == 0 {
        return Err(Error::InvalidInput(format!("design needs n >= p >= 1, got n = {n}, p = {p}")));
    }
    let z = gaussian_matrix(n, p, seed);
    let x = match sigma {
        SigmaSpec::Identity => z,
        _ => {
            let l = cholesky(&sigma.covariance(p)).map_err(|_| {
                Error::Config(format!("{} covariance is not positive definite at p = {p}", sigma.name()))
            })?;
            z.matmul(&l.transpose())
        }
    };
    normalize_columns(&x)
}

/// `k` entries equal to `amplitude` at uniformly sampled positions.
pub fn gen_signal(p: usize, k: usize, amplitude: f64, seed: u64) -> Result<Vector<f64>> {
    if k > p {
        return Err(Error::InvalidInput(format!("sparsity k = {k} exceeds p = {p}")));
    }
    let mut beta = vec![0.0; p];
    for j in sample(&mut rng_from_seed(seed), p, k) {
        beta[j] = amplitude;
    }
    Ok(beta)
}

/// `y = Xβ + σz` with `z` i.i.d. standard normal.
pub fn gen_response(x: &Matrix<f64>, beta: &[f64], noise_sd: f64, seed: u64) -> Result<Vector<f64>> {
    if beta.len() != x.cols() {
        return Err(Error::InvalidInput(format!(
            "signal has {} entries, design has {} columns",
            beta.len(),
            x.cols()
        )));
    }
    let mut rng = rng_from_seed(seed);
    Ok(x
        .matvec(beta)
        .into_iter()
        .map(|m| m + noise_sd * rng.sample::<f64, _>(StandardNormal))
        .collect())
}

/// Orthogonal-design instance: `m` designs with orthonormal columns and a
/// shared signal with i.i.d. entries in `{0, μ}`.
#[derive(Debug, Clone)]
pub struct OrthogonalExample {
    pub designs: Vec<Matrix<f64>>,
    pub beta: Vector<f64>,
    pub mu: f64,
}

/// `μ = √(ln p / m)`.
pub fn orthogonal_mu(p: usize, m: usize) -> f64 {
    ((p as f64).ln() / m as f64).sqrt()
}

pub fn gen_orthogonal_example(p: usize, m: usize, seed: u64) -> Result<OrthogonalExample> {
    if p < 2 || m == 0 {
        return Err(Error::InvalidInput(format!("need p >= 2 and m >= 1, got p = {p}, m = {m}")));
    }
    let mu = orthogonal_mu(p, m);
    let mut rng = rng_from_seed(seed);
    let beta = (0..p).map(|_| if rng.random::<bool>() { mu } else { 0.0 }).collect();
    let designs = (0..m)
        .map(|_| {
            let g = Matrix::from_fn(2 * p, p, |_, _| rng.sample(StandardNormal));
            HouseholderQr::new(&g).thin_q()
        })
        .collect();
    Ok(OrthogonalExample { designs, beta, mu })
}
