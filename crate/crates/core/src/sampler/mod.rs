//! Monte Carlo draws from the constrained ensemble of pure states.
//!
//! Two routes: an ambient sampler over raw S entries with Gaussian-softened constraints (small N,
//! extrapolated in ε), and an exact constrained walk on the pure-state manifold in Siegel
//! coordinates (the workhorse for larger N).

mod ambient;
pub mod io;
mod manifold;
pub mod siegel;
pub mod stats;

pub use io::{write_batch, SamplerFile};
pub use manifold::PROJECTION_TOL;
pub use stats::{
    batch_means, estimate_observables, mode_pair_correlation, richardson, Estimate, ObservableRow,
    PairCorrelationSummary, StatisticsTable, MIN_ESS,
};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constraints::{build_constraint_matrix, constraint_residual, ConstraintSpec};
use crate::error::{Error, Result};
use crate::symplectic::{random_passive_with, symplectic_residual, CovarianceMatrix};
use siegel::{Chart, Point};

/// Smallest λ accepted for sampling.
pub const MIN_SAMPLING_LAMBDA: f64 = 1.0 + 1e-6;
/// Largest N accepted by the ambient sampler.
pub const MAX_AMBIENT_MODES: usize = 6;
/// Acceptance window outside which the ambient sampler reports a tuning failure.
pub const AMBIENT_ACCEPTANCE_RANGE: (f64, f64) = (0.05, 0.7);
const FEASIBILITY_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    AmbientSoft,
    ManifoldWalk,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::AmbientSoft => "ambient-soft",
            Method::ManifoldWalk => "manifold-walk",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub spec: ConstraintSpec,
    pub method: Method,
    /// Softening widths for the ambient sampler, strictly decreasing.
    pub epsilon_schedule: Vec<f64>,
    /// Initial proposal scale: tangent step for the walk, leapfrog step (in units of ε) for HMC.
    pub step_size: f64,
    /// HMC trajectory length in S space.
    pub trajectory_length: f64,
    /// Exponent p of the assumed ε^p bias removed by extrapolation.
    pub extrapolation_order: f64,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    /// Total recorded samples, split across chains.
    pub n_samples: usize,
    pub chains: usize,
}

impl SamplerConfig {
    pub fn new(spec: ConstraintSpec, method: Method) -> Self {
        let step_size = match method {
            Method::ManifoldWalk => 0.2,
            Method::AmbientSoft => 0.1,
        };
        Self {
            spec,
            method,
            epsilon_schedule: vec![0.01, 0.005],
            step_size,
            trajectory_length: 1.0,
            extrapolation_order: 1.0,
            burn_in: 500,
            thinning: 1,
            seed: 0,
            n_samples: 1000,
            chains: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be at least 1".into()));
        }
        if self.chains == 0 || self.chains > self.n_samples {
            return Err(Error::Config(format!(
                "chains must lie in 1..={}, got {}",
                self.n_samples, self.chains
            )));
        }
        if self.thinning == 0 {
            return Err(Error::Config("thinning must be at least 1".into()));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!(
                "step_size must be positive, got {}",
                self.step_size
            )));
        }
        if let Some(l) = self.spec.lambdas().into_iter().find(|&l| l <= MIN_SAMPLING_LAMBDA) {
            return Err(Error::Unphysical(format!(
                "lambda {l} is too close to 1 for sampling (need > {MIN_SAMPLING_LAMBDA})"
            )));
        }
        if self.method == Method::AmbientSoft {
            if self.spec.n_modes() > MAX_AMBIENT_MODES {
                return Err(Error::Config(format!(
                    "ambient sampler supports at most {MAX_AMBIENT_MODES} modes, got {}",
                    self.spec.n_modes()
                )));
            }
            if self.epsilon_schedule.is_empty() {
                return Err(Error::Config("epsilon_schedule is empty".into()));
            }
            if self.epsilon_schedule.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
                return Err(Error::Config("softening widths must be positive".into()));
            }
            if self.epsilon_schedule.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::Config("epsilon_schedule must be strictly decreasing".into()));
            }
            if !(self.trajectory_length > 0.0 && self.trajectory_length.is_finite()) {
                return Err(Error::Config("trajectory_length must be positive".into()));
            }
            if !(self.extrapolation_order > 0.0 && self.extrapolation_order.is_finite()) {
                return Err(Error::Config("extrapolation_order must be positive".into()));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    fn chain_sizes(&self) -> Vec<usize> {
        let base = self.n_samples / self.chains;
        let extra = self.n_samples % self.chains;
        (0..self.chains).map(|c| base + (c < extra) as usize).collect()
    }
}

/// Per-sample residuals. Raw values are the ambient state before it is pushed onto the manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleResiduals {
    pub constraint: f64,
    pub symplectic: f64,
    pub purity: f64,
    pub raw_constraint: Option<f64>,
    pub raw_symplectic: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMetadata {
    pub method: Method,
    pub spec: ConstraintSpec,
    pub epsilon: Option<f64>,
    pub config_hash: String,
    pub seed: u64,
    pub chains: usize,
    pub n_samples: usize,
    pub acceptance_rate: f64,
    pub chain_acceptance: Vec<f64>,
    pub step_sizes: Vec<f64>,
    /// Proposals whose projection failed (walk) or recorded states that could not be projected (ambient).
    pub discarded: usize,
    pub discard_fraction: f64,
    /// Integrated autocorrelation time of ‖C‖_F², from batch means.
    pub autocorrelation_time: f64,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub samples: Vec<CovarianceMatrix>,
    /// Symplectic matrix behind each sample, S Sᵀ = C.
    pub symplectic: Vec<DMatrix<f64>>,
    pub residuals: Vec<SampleResiduals>,
    pub weights: Vec<f64>,
    pub chain: Vec<usize>,
    pub metadata: BatchMetadata,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn max_constraint_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.constraint).fold(0.0, f64::max)
    }

    pub fn max_symplectic_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.symplectic).fold(0.0, f64::max)
    }

    pub fn max_purity_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.purity).fold(0.0, f64::max)
    }

    /// Largest intra-window entry between distinct modes over all samples.
    pub fn max_intra_window_offdiag(&self) -> f64 {
        self.samples
            .iter()
            .map(|c| crate::constraints::intra_window_offdiag(c.matrix(), &self.metadata.spec))
            .fold(0.0, f64::max)
    }
}

/// One ambient batch per softening width.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientRun {
    pub batches: Vec<SampleBatch>,
    pub extrapolation_order: f64,
}

impl AmbientRun {
    /// Per-width observable tables and their extrapolation to ε = 0.
    pub fn estimate_observables(
        &self,
        a: &crate::symplectic::ModeSubset,
        x_list: &[u32],
    ) -> Result<(Vec<StatisticsTable>, StatisticsTable)> {
        let tables = self
            .batches
            .iter()
            .map(|b| estimate_observables(b, a, x_list))
            .collect::<Result<Vec<_>>>()?;
        let rows = (0..tables[0].rows.len())
            .map(|k| {
                let points: Vec<(f64, Estimate)> = self
                    .batches
                    .iter()
                    .zip(&tables)
                    .map(|(b, t)| (b.metadata.epsilon.unwrap_or(0.0), t.rows[k].estimate()))
                    .collect();
                let e = richardson(&points, self.extrapolation_order)?;
                Ok(ObservableRow {
                    observable: tables[0].rows[k].observable.clone(),
                    x: tables[0].rows[k].x,
                    mean: e.mean,
                    stderr: e.stderr,
                    ess: e.ess,
                    n: e.n,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((tables, StatisticsTable { rows }))
    }

    /// Pair-correlation means per width, extrapolated to ε = 0.
    pub fn pair_correlation(&self, i: usize, j: usize) -> Result<Estimate> {
        let points = self
            .batches
            .iter()
            .map(|b| {
                let s = mode_pair_correlation(b, i, j)?;
                Ok((
                    b.metadata.epsilon.unwrap_or(0.0),
                    Estimate {
                        mean: s.mean,
                        stderr: s.stderr,
                        ess: s.ess,
                        n: s.n,
                    },
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        richardson(&points, self.extrapolation_order)
    }
}

#[derive(Debug, Default)]
pub(crate) struct ChainOutput {
    pub points: Vec<DMatrix<f64>>,
    pub symplectic: Vec<DMatrix<f64>>,
    pub accepted: usize,
    pub proposed: usize,
    pub failed: usize,
    pub step_size: f64,
}

impl ChainOutput {
    fn acceptance(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Dual-averaging step-size adaptation (Nesterov's scheme as used for HMC).
pub(crate) struct DualAveraging {
    target: f64,
    mu: f64,
    h_bar: f64,
    log_h: f64,
    log_h_avg: f64,
    t: f64,
}

impl DualAveraging {
    pub(crate) fn new(h0: f64, target: f64) -> Self {
        Self {
            target,
            mu: (10.0 * h0).ln(),
            h_bar: 0.0,
            log_h: h0.ln(),
            log_h_avg: h0.ln(),
            t: 0.0,
        }
    }

    pub(crate) fn update(&mut self, accept_prob: f64) -> f64 {
        const GAMMA: f64 = 0.05;
        const T0: f64 = 10.0;
        const KAPPA: f64 = 0.75;
        self.t += 1.0;
        let eta = 1.0 / (self.t + T0);
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target - accept_prob);
        self.log_h = self.mu - self.t.sqrt() / GAMMA * self.h_bar;
        let w = self.t.powf(-KAPPA);
        self.log_h_avg = w * self.log_h + (1.0 - w) * self.log_h_avg;
        self.log_h.exp()
    }

    pub(crate) fn final_step(&self) -> f64 {
        self.log_h_avg.exp()
    }
}

pub(crate) fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

/// Feasible pure state: two-mode squeezed pairs at the mean λ, mixed by a random passive
/// transformation, then driven onto the constraints.
pub(crate) fn feasible_start(chart: &Chart, spec: &ConstraintSpec, rng: &mut ChaCha8Rng) -> Result<Point> {
    let n = spec.n_modes();
    let lambdas = spec.lambdas();
    let mean = lambdas.iter().sum::<f64>() / n as f64;
    let r = 0.5 * mean.acosh();
    let mut s0 = DMatrix::<f64>::identity(2 * n, 2 * n);
    let (ch, sh) = (r.cosh(), r.sinh());
    for k in 0..n / 2 {
        let (a, b) = (2 * (2 * k), 2 * (2 * k + 1));
        for (i, j, v) in [
            (a, a, ch),
            (b, b, ch),
            (a + 1, a + 1, ch),
            (b + 1, b + 1, ch),
            (a, b, sh),
            (b, a, sh),
            (a + 1, b + 1, -sh),
            (b + 1, a + 1, -sh),
        ] {
            s0[(i, j)] = v;
        }
    }
    if n % 2 == 1 {
        let a = 2 * (n - 1);
        s0[(a, a)] = (2.0 * r).exp().sqrt();
        s0[(a + 1, a + 1)] = (-2.0 * r).exp().sqrt();
    }
    let mut last = None;
    for _ in 0..FEASIBILITY_ATTEMPTS {
        let o = random_passive_with(n, rng);
        let s = &o * &s0;
        let z0 = chart.coords_of(&(&s * s.transpose()))?;
        match chart.solve_feasible(&z0, PROJECTION_TOL, 400) {
            Ok(pt) => return Ok(pt),
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::Infeasible("no feasible start found".into())))
}

fn finish_batch(
    config: &SamplerConfig,
    epsilon: Option<f64>,
    outputs: &[ChainOutput],
    records: Vec<(usize, CovarianceMatrix, DMatrix<f64>, SampleResiduals)>,
    discarded: usize,
    attempted: usize,
) -> Result<SampleBatch> {
    let proposed: usize = outputs.iter().map(|o| o.proposed).sum();
    let accepted: usize = outputs.iter().map(|o| o.accepted).sum();
    let mut samples = Vec::with_capacity(records.len());
    let mut symplectic = Vec::with_capacity(records.len());
    let mut residuals = Vec::with_capacity(records.len());
    let mut chain = Vec::with_capacity(records.len());
    for (c, cov, s, r) in records {
        chain.push(c);
        samples.push(cov);
        symplectic.push(s);
        residuals.push(r);
    }
    let weights = vec![1.0; samples.len()];
    let trace: Vec<f64> = samples.iter().map(|c| c.matrix().norm_squared()).collect();
    let (autocorrelation_time, ess) = if trace.is_empty() {
        (f64::NAN, 0.0)
    } else {
        let est = batch_means(&trace, &weights, &chain);
        (trace.len() as f64 / est.ess, est.ess)
    };
    Ok(SampleBatch {
        metadata: BatchMetadata {
            method: config.method,
            spec: config.spec.clone(),
            epsilon,
            config_hash: config.hash(),
            seed: config.seed,
            chains: config.chains,
            n_samples: samples.len(),
            acceptance_rate: if proposed == 0 {
                0.0
            } else {
                accepted as f64 / proposed as f64
            },
            chain_acceptance: outputs.iter().map(ChainOutput::acceptance).collect(),
            step_sizes: outputs.iter().map(|o| o.step_size).collect(),
            discarded,
            discard_fraction: if attempted == 0 {
                0.0
            } else {
                discarded as f64 / attempted as f64
            },
            autocorrelation_time,
            ess,
        },
        samples,
        symplectic,
        residuals,
        weights,
        chain,
    })
}

fn residuals_of(
    c: &CovarianceMatrix,
    s: &DMatrix<f64>,
    c_hat: &CovarianceMatrix,
    spec: &ConstraintSpec,
) -> Result<SampleResiduals> {
    Ok(SampleResiduals {
        constraint: constraint_residual(c, c_hat, spec)?,
        symplectic: symplectic_residual(s)?,
        purity: c.purity_residual(),
        raw_constraint: None,
        raw_symplectic: None,
    })
}

/// Exact constrained walk on the pure-state manifold.
pub fn sample_manifold(config: &SamplerConfig) -> Result<SampleBatch> {
    config.validate()?;
    let spec = &config.spec;
    let chart = Chart::new(spec);
    let c_hat = build_constraint_matrix(spec);
    let outputs: Vec<Result<ChainOutput>> = config
        .chain_sizes()
        .into_par_iter()
        .enumerate()
        .map(|(c, n)| {
            let mut rng = chain_rng(config.seed, c);
            let start = feasible_start(&chart, spec, &mut rng)?;
            let (mut out, kept) = manifold::run_chain(
                &chart,
                start,
                config.step_size,
                config.burn_in,
                config.thinning,
                n,
                &mut rng,
                |pt| (chart.covariance(pt), chart.symplectic(pt)),
            )?;
            (out.points, out.symplectic) = kept.into_iter().unzip();
            Ok(out)
        })
        .collect();
    let outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?;
    let mut records = Vec::new();
    for (c, out) in outputs.iter().enumerate() {
        for (p, s) in out.points.iter().zip(&out.symplectic) {
            let cov = CovarianceMatrix::new(p.clone())?;
            let r = residuals_of(&cov, s, &c_hat, spec)?;
            records.push((c, cov, s.clone(), r));
        }
    }
    let failed: usize = outputs.iter().map(|o| o.failed).sum();
    let attempted = outputs.iter().map(|o| o.proposed).sum::<usize>() + config.burn_in * config.chains;
    finish_batch(config, None, &outputs, records, failed, attempted)
}

/// Softened-constraint HMC at every width in the schedule.
pub fn sample_ambient(config: &SamplerConfig) -> Result<AmbientRun> {
    config.validate()?;
    let spec = &config.spec;
    let chart = Chart::new(spec);
    let c_hat = build_constraint_matrix(spec);
    let sizes = config.chain_sizes();
    let mut batches = Vec::new();
    for (k, &eps) in config.epsilon_schedule.iter().enumerate() {
        let pot = ambient::Potential::new(spec, eps);
        let outputs: Vec<Result<ChainOutput>> = sizes
            .par_iter()
            .enumerate()
            .map(|(c, &n)| {
                let mut rng = chain_rng(config.seed ^ ((k as u64 + 1) << 32), c);
                let start = feasible_start(&chart, spec, &mut rng)?;
                let s0 = chart.symplectic(&start);
                Ok(ambient::run_chain(
                    &pot,
                    s0,
                    config.step_size * eps,
                    config.trajectory_length,
                    config.burn_in,
                    config.thinning,
                    n,
                    &mut rng,
                ))
            })
            .collect();
        let outputs = outputs.into_iter().collect::<Result<Vec<_>>>()?;
        let (lo, hi) = AMBIENT_ACCEPTANCE_RANGE;
        for (c, out) in outputs.iter().enumerate() {
            let rate = out.acceptance();
            if !(lo..=hi).contains(&rate) {
                return Err(Error::Tuning(format!(
                    "ambient chain {c} at eps = {eps}: acceptance {rate:.3} outside [{lo}, {hi}] (final step {:.3e})",
                    out.step_size
                )));
            }
        }
        let mut records = Vec::new();
        let mut discarded = 0;
        let mut attempted = 0;
        for (c, out) in outputs.iter().enumerate() {
            for s_raw in &out.symplectic {
                attempted += 1;
                let (raw_symplectic, raw_constraint) = pot.raw_residuals(s_raw);
                let projected = chart
                    .coords_of(&(s_raw * s_raw.transpose()))
                    .and_then(|z| chart.solve_feasible(&z, PROJECTION_TOL, 200));
                let Ok(pt) = projected else {
                    discarded += 1;
                    continue;
                };
                let cov = CovarianceMatrix::new(chart.covariance(&pt))?;
                let s = chart.symplectic(&pt);
                let mut r = residuals_of(&cov, &s, &c_hat, spec)?;
                r.raw_constraint = Some(raw_constraint);
                r.raw_symplectic = Some(raw_symplectic);
                records.push((c, cov, s, r));
            }
        }
        batches.push(finish_batch(
            config,
            Some(eps),
            &outputs,
            records,
            discarded,
            attempted,
        )?);
    }
    Ok(AmbientRun {
        batches,
        extrapolation_order: config.extrapolation_order,
    })
}
