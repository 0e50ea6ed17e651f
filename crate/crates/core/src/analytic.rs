//! Closed-form Rényi traces, entropies and the finite-N mean-field purity.
//!
//! Entropies are in nats.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::constraints::ConstraintSpec;
use crate::error::{Error, Result};
use crate::symplectic::{restrict, symplectic_spectrum, CovarianceMatrix, ModeSubset};

/// Symplectic eigenvalues closer than this to 1 are treated as exactly 1.
pub const PURE_CLAMP: f64 = 1e-8;

fn check_lambda(lambda: f64) -> Result<f64> {
    if !lambda.is_finite() || lambda < 1.0 - PURE_CLAMP {
        return Err(Error::Unphysical(format!("lambda = {lambda} is below 1")));
    }
    Ok(if lambda - 1.0 <= PURE_CLAMP { 1.0 } else { lambda })
}

/// 2^x / ((λ+1)^x − (λ−1)^x) for real x > 0.
///
/// Written as (2/(λ+1))^x / (1 − q^x) with q = (λ−1)/(λ+1) to avoid cancellation at large λ.
pub fn renyi_trace_continued(lambda: f64, x: f64) -> Result<f64> {
    let lambda = check_lambda(lambda)?;
    if !(x > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Rényi order must be positive, got {x}"
        )));
    }
    if lambda == 1.0 {
        return Ok(1.0);
    }
    let q = (lambda - 1.0) / (lambda + 1.0);
    let num = (x * (2.0 / (lambda + 1.0)).ln()).exp();
    let den = -(x * q.ln()).exp_m1();
    Ok(num / den)
}

pub fn renyi_trace_single(lambda: f64, x: u32) -> Result<f64> {
    if x == 0 {
        return Err(Error::InvalidParameter("Rényi order must be at least 1".into()));
    }
    if x == 1 {
        check_lambda(lambda)?;
        return Ok(1.0);
    }
    renyi_trace_continued(lambda, x as f64)
}

/// −ln 2 + ½(λ+1)ln(λ+1) − ½(λ−1)ln(λ−1).
pub fn entropy_single(lambda: f64) -> Result<f64> {
    let lambda = check_lambda(lambda)?;
    if lambda == 1.0 {
        return Ok(0.0);
    }
    let (p, m) = (lambda + 1.0, lambda - 1.0);
    Ok(-std::f64::consts::LN_2 + 0.5 * p * p.ln() - 0.5 * m * m.ln())
}

fn spectrum_of(c_a: &CovarianceMatrix) -> Result<Vec<f64>> {
    symplectic_spectrum(c_a)?.values.into_iter().map(check_lambda).collect()
}

pub fn renyi_trace_mixed(c_a: &CovarianceMatrix, x: u32) -> Result<f64> {
    let mut acc = 1.0;
    for nu in spectrum_of(c_a)? {
        acc *= renyi_trace_single(nu, x)?;
    }
    Ok(acc)
}

pub fn entropy_mixed(c_a: &CovarianceMatrix) -> Result<f64> {
    spectrum_of(c_a)?.into_iter().map(entropy_single).sum()
}

/// Finite-N mean-field purity 2^{N_A} (N−N_A−1)!/(N−1)! det((2/N)Ĉ_A)^{−1/2}.
pub fn finite_n_purity(c_hat_a: &CovarianceMatrix, n: usize, n_a: usize) -> Result<f64> {
    if n_a == 0 || n <= n_a {
        return Err(Error::InvalidParameter(format!(
            "need N > N_A >= 1, got N = {n}, N_A = {n_a}"
        )));
    }
    if c_hat_a.n_modes() != n_a {
        return Err(Error::Dimension(format!(
            "Ĉ_A has {} modes but N_A = {n_a}",
            c_hat_a.n_modes()
        )));
    }
    let chol = c_hat_a
        .matrix()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Spectral("Ĉ_A is not positive definite".into()))?;
    let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let (nf, naf) = (n as f64, n_a as f64);
    // 2^{N_A} (2/N)^{-N_A} = N^{N_A}; the scaled determinant contributes det(Ĉ_A)^{-1/2}.
    let log_val = naf * nf.ln() + ln_gamma(nf - naf) - ln_gamma(nf) - 0.5 * log_det;
    Ok(log_val.exp())
}

/// Cumulative entropy of the first N_A modes in `ordering`, for N_A = 0..=N.
pub fn page_slope(spec: &ConstraintSpec, ordering: &[usize]) -> Result<Vec<(usize, f64)>> {
    let lambdas = spec.lambdas();
    let mut seen = vec![false; lambdas.len()];
    if ordering.len() != lambdas.len() {
        return Err(Error::InvalidParameter(format!(
            "ordering lists {} modes but the spec has {}",
            ordering.len(),
            lambdas.len()
        )));
    }
    for &m in ordering {
        if m >= lambdas.len() || seen[m] {
            return Err(Error::InvalidParameter(format!(
                "ordering is not a permutation (mode {m})"
            )));
        }
        seen[m] = true;
    }
    let mut out = Vec::with_capacity(ordering.len() + 1);
    let mut acc = 0.0;
    out.push((0, 0.0));
    for (k, &m) in ordering.iter().enumerate() {
        acc += entropy_single(lambdas[m])?;
        out.push((k + 1, acc));
    }
    Ok(out)
}

pub fn page_csv(curve: &[(usize, f64)]) -> String {
    let mut s = String::from("n_a,cumulative_entropy_nats\n");
    for (n_a, e) in curve {
        s.push_str(&format!("{n_a},{e:.17e}\n"));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub subsystem: ModeSubset,
    pub renyi_traces: BTreeMap<u32, f64>,
    pub von_neumann: f64,
    pub purity: f64,
}

impl EntropyReport {
    pub fn compute(c: &CovarianceMatrix, subsystem: &ModeSubset, orders: &[u32]) -> Result<Self> {
        let c_a = restrict(c, subsystem)?;
        let mut renyi_traces = BTreeMap::new();
        for &x in orders.iter().chain(std::iter::once(&2)) {
            renyi_traces.insert(x, renyi_trace_mixed(&c_a, x)?);
        }
        Ok(Self {
            subsystem: subsystem.clone(),
            purity: renyi_traces[&2],
            von_neumann: entropy_mixed(&c_a)?,
            renyi_traces,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{ConstraintSpec, HawkingModel};
    use crate::symplectic::{covariance_from_symplectic, two_mode_squeezer};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};

    fn diag(v: &[f64]) -> CovarianceMatrix {
        CovarianceMatrix::new(DMatrix::from_diagonal(&DVector::from_row_slice(v))).unwrap()
    }

    #[test]
    fn renyi_examples() {
        assert_relative_eq!(renyi_trace_single(3.0, 2).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        for x in 1..8 {
            assert_relative_eq!(renyi_trace_single(1.0, x).unwrap(), 1.0, epsilon = 1e-15);
        }
        assert!(renyi_trace_single(0.5, 2).is_err());
    }

    #[test]
    fn renyi_against_truncated_fock_sum() {
        let (l, x) = (2.0_f64, 3);
        let q = (l - 1.0) / (l + 1.0);
        let mut sum = 0.0;
        let mut n = 0;
        while q.powi(x * n) > 1e-18 {
            sum += q.powi(x * n);
            n += 1;
        }
        let fock = (1.0 - q).powi(x) * sum;
        assert_relative_eq!(renyi_trace_single(l, x as u32).unwrap(), fock, epsilon = 1e-14);
        assert_relative_eq!(fock, 4.0 / 13.0, epsilon = 1e-14);
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy_single(1.0).unwrap(), 0.0);
        assert_eq!(entropy_single(1.0 + 1e-9).unwrap(), 0.0);
        assert_relative_eq!(
            entropy_single(3.0).unwrap(),
            2.0 * std::f64::consts::LN_2,
            epsilon = 1e-14
        );
    }

    #[test]
    fn entropy_from_finite_difference() {
        for l in [1.1, 2.0, 3.0, 10.0] {
            let h = 1e-5;
            let d =
                (renyi_trace_continued(l, 1.0 + h).unwrap() - renyi_trace_continued(l, 1.0 - h).unwrap()) / (2.0 * h);
            assert!((-d - entropy_single(l).unwrap()).abs() < 1e-8, "lambda {l}");
        }
    }

    #[test]
    fn mixed_examples() {
        for x in 2..6 {
            assert_relative_eq!(renyi_trace_mixed(&CovarianceMatrix::identity(2), x).unwrap(), 1.0);
        }
        assert_relative_eq!(
            renyi_trace_mixed(&diag(&[3.0, 3.0, 2.0, 2.0]), 2).unwrap(),
            1.0 / 6.0,
            epsilon = 1e-14
        );
        assert_relative_eq!(renyi_trace_mixed(&diag(&[2.0, 2.0]), 4).unwrap(), 0.2, epsilon = 1e-14);
        assert_relative_eq!(
            entropy_mixed(&diag(&[3.0, 3.0, 3.0, 3.0])).unwrap(),
            4.0 * std::f64::consts::LN_2,
            epsilon = 1e-13
        );
        let r = 0.45_f64;
        let c = covariance_from_symplectic(&two_mode_squeezer(r));
        assert!(entropy_mixed(&c).unwrap().abs() < 1e-12);
        let c0 = restrict(&c, &ModeSubset::new(2, vec![0]).unwrap()).unwrap();
        assert_relative_eq!(
            entropy_mixed(&c0).unwrap(),
            entropy_single((2.0 * r).cosh()).unwrap(),
            epsilon = 1e-12
        );
        assert!(renyi_trace_mixed(&diag(&[0.5, 0.5]), 2).is_err());
    }

    #[test]
    fn finite_n_examples() {
        let c = diag(&[2.0, 2.0]);
        assert_relative_eq!(finite_n_purity(&c, 10, 1).unwrap(), 5.0 / 9.0, epsilon = 1e-13);
        assert_relative_eq!(finite_n_purity(&c, 16, 1).unwrap(), 8.0 / 15.0, epsilon = 1e-13);
        let big = finite_n_purity(&c, 1_000_000, 1).unwrap();
        assert!((big - 0.5).abs() < 1e-6);
        let mut prev = f64::INFINITY;
        for n in [2, 4, 8, 16, 64] {
            let v = finite_n_purity(&c, n, 1).unwrap();
            assert!(v < prev && v > 0.5);
            assert_relative_eq!((v - 0.5) / 0.5, 1.0 / (n as f64 - 1.0), epsilon = 1e-12);
            prev = v;
        }
        assert!(finite_n_purity(&c, 1, 1).is_err());
        let c2 = diag(&[2.0, 2.0, 3.0, 3.0]);
        // 2^2 * 2!/4! * det((2/5) C)^{-1/2} with N = 5, det C = 36.
        let want = 4.0 * 2.0 / 24.0 / ((0.4_f64).powi(4) * 36.0).sqrt();
        assert_relative_eq!(finite_n_purity(&c2, 5, 2).unwrap(), want, epsilon = 1e-12);
    }

    #[test]
    fn page_slope_examples() {
        let zero = ConstraintSpec::scenario_one(&[1.0; 4]).unwrap();
        let curve = page_slope(&zero, &[0, 1, 2, 3]).unwrap();
        assert!(curve.iter().all(|&(_, e)| e == 0.0));
        let uni = ConstraintSpec::scenario_one(&[2.0; 5]).unwrap();
        let s = entropy_single(2.0).unwrap();
        for (n_a, e) in page_slope(&uni, &[0, 1, 2, 3, 4]).unwrap() {
            assert_relative_eq!(e, n_a as f64 * s, epsilon = 1e-13);
        }
        let toy = crate::constraints::hawking_constraints(&HawkingModel::new(3.0, 1.0).unwrap(), 0..2).unwrap();
        let curve = page_slope(&toy, &[0, 1, 2, 3, 4]).unwrap();
        let by_hand: f64 = toy.lambdas().iter().map(|&l| entropy_single(l).unwrap()).sum();
        assert_relative_eq!(curve[5].1, by_hand, epsilon = 1e-13);
        assert!(page_slope(&uni, &[0, 0, 1, 2, 3]).is_err());
        assert!(page_csv(&curve).starts_with("n_a,cumulative_entropy_nats\n0,"));
    }

    #[test]
    fn report_is_consistent() {
        let c = covariance_from_symplectic(&two_mode_squeezer(0.3));
        let rep = EntropyReport::compute(&c, &ModeSubset::new(2, vec![1]).unwrap(), &[3, 4]).unwrap();
        assert_eq!(rep.purity, rep.renyi_traces[&2]);
        assert!(rep.von_neumann > 0.0 && rep.purity < 1.0);
        let json = serde_json::to_string(&rep).unwrap();
        let back: EntropyReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.renyi_traces.len(), 3);
    }
}
