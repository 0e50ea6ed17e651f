//! Radial prefactor ∫ d^{2N_A}r (1+rᵀr)^{−N} / ∫ d^{2N_A}r e^{−rᵀr} = (N−N_A−1)!/(N−1)!.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prefactor {
    pub value: f64,
    /// Set for N_A = 0, where the ratio is 1 by convention.
    pub degenerate: bool,
}

pub fn prefactor_integral(n: usize, n_a: usize) -> Result<Prefactor> {
    if n_a == 0 {
        log::warn!("prefactor requested for an empty subsystem; returning 1");
        return Ok(Prefactor {
            value: 1.0,
            degenerate: true,
        });
    }
    if n <= n_a {
        return Err(Error::InvalidParameter(format!(
            "need N > N_A, got N = {n}, N_A = {n_a}"
        )));
    }
    let value = (ln_gamma((n - n_a) as f64) - ln_gamma(n as f64)).exp();
    Ok(Prefactor {
        value,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrefactorEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Importance-sampled ratio of the two integrals.
///
/// Both integrands are sampled from a multivariate Cauchy proposal in d = 2N_A dimensions, whose
/// tails dominate (1+rᵀr)^{−N}. The ratio's standard error follows from the delta method.
pub fn prefactor_monte_carlo(n: usize, n_a: usize, samples: usize, seed: u64) -> Result<PrefactorEstimate> {
    if n_a == 0 || n <= n_a {
        return Err(Error::InvalidParameter(format!(
            "need N > N_A >= 1, got N = {n}, N_A = {n_a}"
        )));
    }
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least two samples".into()));
    }
    let d = 2 * n_a;
    let df = d as f64;
    let log_norm = ln_gamma(0.5 * (1.0 + df)) - ln_gamma(0.5) - 0.5 * df * std::f64::consts::PI.ln();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut s1, mut s2, mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..samples {
        let w: f64 = rng.sample::<f64, _>(StandardNormal).abs();
        let mut r2 = 0.0;
        for _ in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            r2 += z * z;
        }
        r2 /= w * w;
        let log_p = log_norm - 0.5 * (1.0 + df) * r2.ln_1p();
        let f1 = (-(n as f64) * r2.ln_1p() - log_p).exp();
        let f2 = (-r2 - log_p).exp();
        s1 += f1;
        s2 += f2;
        s11 += f1 * f1;
        s22 += f2 * f2;
        s12 += f1 * f2;
    }
    let k = samples as f64;
    let (m1, m2) = (s1 / k, s2 / k);
    let v1 = (s11 / k - m1 * m1) * k / (k - 1.0);
    let v2 = (s22 / k - m2 * m2) * k / (k - 1.0);
    let c12 = (s12 / k - m1 * m2) * k / (k - 1.0);
    let ratio = m1 / m2;
    let var = (v1 / (m2 * m2) + ratio * ratio * v2 / (m2 * m2) - 2.0 * ratio * c12 / (m2 * m2)) / k;
    Ok(PrefactorEstimate {
        mean: ratio,
        stderr: var.max(0.0).sqrt(),
        samples,
    })
}
