//! Sampler configuration files and batch persistence.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Method, SampleBatch, SamplerConfig};
use crate::constraints::ConstraintFile;
use crate::error::{Error, Result};

/// TOML sampler configuration; the `[constraints]` table uses the constraint file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerFile {
    pub method: Method,
    pub seed: u64,
    pub n_samples: usize,
    #[serde(default)]
    pub burn_in: Option<usize>,
    #[serde(default)]
    pub thinning: Option<usize>,
    #[serde(default)]
    pub chains: Option<usize>,
    #[serde(default)]
    pub step_size: Option<f64>,
    #[serde(default)]
    pub trajectory_length: Option<f64>,
    #[serde(default)]
    pub epsilon_schedule: Option<Vec<f64>>,
    #[serde(default)]
    pub extrapolation_order: Option<f64>,
    pub constraints: ConstraintFile,
    #[serde(default)]
    pub observables: ObservableSelection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSelection {
    #[serde(default = "default_subsystem")]
    pub subsystem: Vec<usize>,
    #[serde(default = "default_orders")]
    pub orders: Vec<u32>,
    #[serde(default)]
    pub pairs: Vec<[usize; 2]>,
}

fn default_subsystem() -> Vec<usize> {
    vec![0]
}

fn default_orders() -> Vec<u32> {
    vec![2]
}

impl Default for ObservableSelection {
    fn default() -> Self {
        Self {
            subsystem: default_subsystem(),
            orders: default_orders(),
            pairs: Vec::new(),
        }
    }
}

impl SamplerFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_config(&self) -> Result<SamplerConfig> {
        let spec = self.constraints.to_spec()?;
        let mut cfg = SamplerConfig::new(spec, self.method);
        cfg.seed = self.seed;
        cfg.n_samples = self.n_samples;
        if let Some(v) = self.burn_in {
            cfg.burn_in = v;
        }
        if let Some(v) = self.thinning {
            cfg.thinning = v;
        }
        if let Some(v) = self.chains {
            cfg.chains = v;
        }
        if let Some(v) = self.step_size {
            cfg.step_size = v;
        }
        if let Some(v) = self.trajectory_length {
            cfg.trajectory_length = v;
        }
        if let Some(v) = self.extrapolation_order {
            cfg.extrapolation_order = v;
        }
        if let Some(v) = &self.epsilon_schedule {
            cfg.epsilon_schedule = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Writes `<stem>.json` (metadata and residuals) and `<stem>_samples.csv`.
pub fn write_batch(dir: &Path, stem: &str, batch: &SampleBatch) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let meta_path = dir.join(format!("{stem}.json"));
    let doc = serde_json::json!({
        "metadata": batch.metadata,
        "residuals": batch.residuals,
        "weights": batch.weights,
        "chain": batch.chain,
    });
    fs::write(&meta_path, serde_json::to_string_pretty(&doc)?)?;
    let csv_path = dir.join(format!("{stem}_samples.csv"));
    fs::write(&csv_path, samples_csv(batch))?;
    Ok(vec![meta_path, csv_path])
}

/// One row per sample; the covariance matrix follows in row-major order.
pub fn samples_csv(batch: &SampleBatch) -> String {
    let dim = batch.samples.first().map_or(0, |c| c.matrix().nrows());
    let mut out = format!("# covariance samples: {dim}x{dim} matrices, row-major, interleaved (q0,p0,q1,p1,...)\n");
    out.push_str("sample,chain,weight");
    for a in 0..dim {
        for b in 0..dim {
            out.push_str(&format!(",c_{a}_{b}"));
        }
    }
    out.push('\n');
    for (k, c) in batch.samples.iter().enumerate() {
        out.push_str(&format!("{k},{},{}", batch.chain[k], batch.weights[k]));
        let m = c.matrix();
        for a in 0..dim {
            for b in 0..dim {
                out.push_str(&format!(",{}", m[(a, b)]));
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
method = "manifold-walk"
seed = 7
n_samples = 50
burn_in = 20

[constraints]
format_version = 1
scenario = "I"
windows = [[2.0], [2.0], [2.0]]

[observables]
subsystem = [0]
orders = [2, 3]
pairs = [[0, 1]]
"#;

    #[test]
    fn parses_example() {
        let f = SamplerFile::parse(EXAMPLE).unwrap();
        let cfg = f.to_config().unwrap();
        assert_eq!(cfg.method, Method::ManifoldWalk);
        assert_eq!(cfg.spec.n_modes(), 3);
        assert_eq!(cfg.burn_in, 20);
        assert_eq!(f.observables.orders, vec![2, 3]);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lambda() {
        assert!(SamplerFile::parse(&format!("{EXAMPLE}\nbogus = 1")).is_err());
        let bad = EXAMPLE.replace("[2.0], [2.0], [2.0]", "[0.5], [2.0], [2.0]");
        assert!(SamplerFile::parse(&bad).unwrap().to_config().is_err());
    }

    #[test]
    fn writes_batch_files() {
        let cfg = SamplerFile::parse(EXAMPLE).unwrap().to_config().unwrap();
        let batch = super::super::sample_manifold(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = write_batch(dir.path(), "batch", &batch).unwrap();
        let csv = fs::read_to_string(&paths[1]).unwrap();
        assert!(csv.starts_with("# covariance samples: 6x6"));
        assert_eq!(csv.lines().count(), 2 + 50);
        let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&paths[0]).unwrap()).unwrap();
        assert_eq!(json["metadata"]["seed"], 7);
    }
}
