//! Ensemble averages with batch-means error bars.

use serde::{Deserialize, Serialize};

use super::SampleBatch;
use crate::analytic::{entropy_mixed, renyi_trace_mixed};
use crate::error::{Error, Result};
use crate::symplectic::{restrict, ModeSubset};

/// Smallest effective sample size accepted by the estimators.
pub const MIN_ESS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub ess: f64,
    pub n: usize,
}

fn weighted_mean(v: &[f64], w: &[f64]) -> f64 {
    let sw: f64 = w.iter().sum();
    v.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / sw
}

/// Mean of one chain's series with a batch-means variance estimate, √n batches of equal size.
fn chain_estimate(v: &[f64], w: &[f64]) -> (f64, f64) {
    let n = v.len();
    let mean = weighted_mean(v, w);
    if n < 4 {
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
        return (mean, var / n as f64);
    }
    let n_batches = (n as f64).sqrt().floor() as usize;
    let size = n / n_batches;
    let means: Vec<f64> = (0..n_batches)
        .map(|b| {
            let lo = b * size;
            let hi = if b + 1 == n_batches { n } else { lo + size };
            weighted_mean(&v[lo..hi], &w[lo..hi])
        })
        .collect();
    let var_b = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (n_batches - 1) as f64;
    (mean, var_b / n_batches as f64)
}

/// Pooled mean over chains, batch-means standard error, ESS = s²/stderr² capped at n.
pub fn batch_means(values: &[f64], weights: &[f64], chain: &[usize]) -> Estimate {
    let n = values.len();
    assert!(n > 0 && weights.len() == n && chain.len() == n, "mismatched series");
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Estimate {
            mean: first,
            stderr: 0.0,
            ess: n as f64,
            n,
        };
    }
    let mut mean = 0.0;
    let mut var_mean = 0.0;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && chain[end] == chain[start] {
            end += 1;
        }
        let frac = (end - start) as f64 / n as f64;
        let (m, v) = chain_estimate(&values[start..end], &weights[start..end]);
        mean += frac * m;
        var_mean += frac * frac * v;
        start = end;
    }
    let spread = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let ess = if var_mean > 0.0 {
        (spread / var_mean).min(n as f64)
    } else {
        n as f64
    };
    Estimate {
        mean,
        stderr: var_mean.sqrt(),
        ess,
        n,
    }
}

/// Extrapolates the last two (ε, estimate) pairs to ε = 0, assuming a bias ∝ ε^order.
pub fn richardson(points: &[(f64, Estimate)], order: f64) -> Result<Estimate> {
    if !(order > 0.0 && order.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "extrapolation order must be positive, got {order}"
        )));
    }
    match points {
        [] => Err(Error::InvalidParameter("no estimates to extrapolate".into())),
        [(_, e)] => Ok(*e),
        [.., (e1, m1), (e2, m2)] => {
            let (a, b) = (e1.powf(order), e2.powf(order));
            let mean = (a * m2.mean - b * m1.mean) / (a - b);
            let stderr = (a * a * m2.stderr.powi(2) + b * b * m1.stderr.powi(2)).sqrt() / (a - b);
            Ok(Estimate {
                mean,
                stderr,
                ess: m1.ess.min(m2.ess),
                n: m1.n.min(m2.n),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableRow {
    pub observable: String,
    pub x: Option<u32>,
    pub mean: f64,
    pub stderr: f64,
    pub ess: f64,
    pub n: usize,
}

impl ObservableRow {
    pub fn estimate(&self) -> Estimate {
        Estimate {
            mean: self.mean,
            stderr: self.stderr,
            ess: self.ess,
            n: self.n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StatisticsTable {
    pub rows: Vec<ObservableRow>,
}

impl StatisticsTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("observable,x,mean,stderr,ess,n\n");
        for r in &self.rows {
            let x = r.x.map(|x| x.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.observable, x, r.mean, r.stderr, r.ess, r.n
            ));
        }
        out
    }

    pub fn get(&self, observable: &str, x: Option<u32>) -> Option<&ObservableRow> {
        self.rows.iter().find(|r| r.observable == observable && r.x == x)
    }
}

fn row(batch: &SampleBatch, name: String, x: Option<u32>, values: &[f64]) -> Result<ObservableRow> {
    let est = batch_means(values, &batch.weights, &batch.chain);
    if est.ess < MIN_ESS {
        return Err(Error::InsufficientSamples(format!(
            "{name}: effective sample size {:.1} < {MIN_ESS} (n = {}, stderr = {:.3e})",
            est.ess, est.n, est.stderr
        )));
    }
    Ok(ObservableRow {
        observable: name,
        x,
        mean: est.mean,
        stderr: est.stderr,
        ess: est.ess,
        n: est.n,
    })
}

fn subset_label(a: &ModeSubset) -> String {
    let modes: Vec<String> = a.selected().iter().map(|m| m.to_string()).collect();
    modes.join("+")
}

/// ⟨Tr ρ_A^x⟩ for each x, plus ⟨S_A⟩.
pub fn estimate_observables(batch: &SampleBatch, a: &ModeSubset, x_list: &[u32]) -> Result<StatisticsTable> {
    if batch.is_empty() {
        return Err(Error::InsufficientSamples("empty batch".into()));
    }
    let reduced = batch
        .samples
        .iter()
        .map(|c| restrict(c, a))
        .collect::<Result<Vec<_>>>()?;
    let label = subset_label(a);
    let mut rows = Vec::new();
    for &x in x_list {
        let values = reduced
            .iter()
            .map(|c| renyi_trace_mixed(c, x))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row(batch, format!("renyi_trace[{label}]"), Some(x), &values)?);
    }
    let values = reduced.iter().map(entropy_mixed).collect::<Result<Vec<_>>>()?;
    rows.push(row(batch, format!("entropy[{label}]"), None, &values)?);
    Ok(StatisticsTable { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCorrelationSummary {
    pub i: usize,
    pub j: usize,
    pub mean: f64,
    pub stderr: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub ess: f64,
    pub n: usize,
}

/// Distribution of ‖C_ij‖_F over the batch.
pub fn mode_pair_correlation(batch: &SampleBatch, i: usize, j: usize) -> Result<PairCorrelationSummary> {
    let spec = &batch.metadata.spec;
    let n = spec.n_modes();
    if i == j {
        return Err(Error::InvalidParameter("mode pair needs i != j".into()));
    }
    if i >= n || j >= n {
        return Err(Error::InvalidParameter(format!(
            "modes ({i}, {j}) out of range for N = {n}"
        )));
    }
    let win = spec.window_of_mode();
    if win[i] == win[j] {
        return Err(Error::InvalidParameter(format!(
            "modes {i} and {j} share window {}, where correlations are fixed to zero",
            win[i]
        )));
    }
    if batch.is_empty() {
        return Err(Error::InsufficientSamples("empty batch".into()));
    }
    let values: Vec<f64> = batch.samples.iter().map(|c| c.block(i, j).norm()).collect();
    let est = batch_means(&values, &batch.weights, &batch.chain);
    let std = (values.iter().map(|v| (v - est.mean).powi(2)).sum::<f64>() / values.len() as f64).sqrt();
    Ok(PairCorrelationSummary {
        i,
        j,
        mean: est.mean,
        stderr: est.stderr,
        std,
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ess: est.ess,
        n: values.len(),
    })
}
