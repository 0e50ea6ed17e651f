//! TOML schema for constraint specs.
//!
//! ```toml
//! format_version = 1
//! scenario = "II"
//! windows = [[1.5, 2.0], [3.0]]
//!
//! # Optional. When `windows` is absent the windows are generated from this preset.
//! [hawking]
//! mass_in_planck_units = 3.0
//! k = 1.0
//! window_range = [0, 2]
//! prescription = "exp"   # or "coth"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{hawking_constraints, ConstraintSpec, HawkingModel, LambdaPrescription, Scenario};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HawkingPreset {
    pub mass_in_planck_units: f64,
    pub k: f64,
    pub window_range: [usize; 2],
    #[serde(default)]
    pub prescription: LambdaPrescription,
}

impl HawkingPreset {
    pub fn model(&self) -> Result<HawkingModel> {
        Ok(HawkingModel::new(self.mass_in_planck_units, self.k)?.with_prescription(self.prescription))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintFile {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub windows: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hawking: Option<HawkingPreset>,
}

impl ConstraintFile {
    pub fn from_spec(spec: &ConstraintSpec, hawking: Option<HawkingPreset>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            scenario: Some(spec.scenario()),
            windows: Some(spec.windows().to_vec()),
            hawking,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let file: ConstraintFile = toml::from_str(text).map_err(|e| Error::Config(format!("constraint file: {e}")))?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                file.format_version
            )));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("constraint file serializes")
    }

    pub fn to_spec(&self) -> Result<ConstraintSpec> {
        match (&self.windows, &self.hawking) {
            (Some(windows), _) => {
                let scenario = self.scenario.unwrap_or(if windows.iter().all(|w| w.len() == 1) {
                    Scenario::I
                } else {
                    Scenario::II
                });
                ConstraintSpec::new(scenario, windows.clone())
            }
            (None, Some(preset)) => {
                let [lo, hi] = preset.window_range;
                let spec = hawking_constraints(&preset.model()?, lo..hi)?;
                if self.scenario == Some(Scenario::I) && spec.windows().iter().any(|w| w.len() != 1) {
                    return Err(Error::Config(
                        "Hawking preset produces multi-mode windows; scenario must be II".into(),
                    ));
                }
                Ok(spec)
            }
            (None, None) => Err(Error::Config(
                "constraint file needs `windows` or a [hawking] table".into(),
            )),
        }
    }
}
