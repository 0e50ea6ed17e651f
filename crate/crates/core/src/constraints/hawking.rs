//! Constraint matrices for an evaporating black hole, in Planck units with O(1) constants dropped.
//!
//! Window t has remaining mass M_t = M(0) − t·k, temperature T_t = 1/M_t, frequency spacing
//! Δω_t = 1/M_t² and about M_t excited modes. Mode j = 1, 2, ... of window t carries the marginal
//! λ = exp(j Δω_t / T_t) = exp(j / M_t), or the standard thermal coth(j Δω_t / 2T_t).

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{ConstraintSpec, Scenario};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaPrescription {
    #[default]
    Exp,
    Coth,
}

impl LambdaPrescription {
    pub fn lambda(self, energy_over_temperature: f64) -> f64 {
        match self {
            LambdaPrescription::Exp => energy_over_temperature.exp(),
            LambdaPrescription::Coth => 1.0 / (0.5 * energy_over_temperature).tanh(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HawkingModel {
    /// M(0) in Planck masses.
    pub initial_mass: f64,
    /// Mass radiated per window, in Planck masses.
    pub k: f64,
    #[serde(default)]
    pub prescription: LambdaPrescription,
}

impl HawkingModel {
    pub fn new(initial_mass: f64, k: f64) -> Result<Self> {
        if !(initial_mass > 0.0 && initial_mass.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "initial mass must be positive, got {initial_mass}"
            )));
        }
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidParameter(format!("k must be positive, got {k}")));
        }
        Ok(Self {
            initial_mass,
            k,
            prescription: LambdaPrescription::Exp,
        })
    }

    pub fn with_prescription(mut self, prescription: LambdaPrescription) -> Self {
        self.prescription = prescription;
        self
    }

    /// Number of windows before the mass is exhausted.
    pub fn n_windows(&self) -> usize {
        (self.initial_mass / self.k).ceil() as usize
    }

    pub fn mass_at(&self, window: usize) -> f64 {
        self.initial_mass - window as f64 * self.k
    }

    pub fn temperature(&self, window: usize) -> f64 {
        1.0 / self.mass_at(window)
    }

    pub fn frequency_spacing(&self, window: usize) -> f64 {
        let m = self.mass_at(window);
        1.0 / (m * m)
    }

    pub fn modes_in_window(&self, window: usize) -> usize {
        (self.mass_at(window).round() as usize).max(1)
    }

    pub fn window_lambdas(&self, window: usize) -> Vec<f64> {
        let ratio = self.frequency_spacing(window) / self.temperature(window);
        (1..=self.modes_in_window(window))
            .map(|j| self.prescription.lambda(j as f64 * ratio))
            .collect()
    }

    /// Modes that a window range would materialize.
    pub fn materialized_modes(&self, range: Range<usize>) -> usize {
        range.map(|t| self.modes_in_window(t)).sum()
    }
}

/// M(0)² / (2k) in Planck units.
pub fn hawking_mode_count(model: &HawkingModel) -> f64 {
    model.initial_mass * model.initial_mass / (2.0 * model.k)
}

pub fn hawking_constraints(model: &HawkingModel, window_range: Range<usize>) -> Result<ConstraintSpec> {
    if window_range.is_empty() {
        return Err(Error::InvalidParameter("window range is empty".into()));
    }
    if window_range.end > model.n_windows() {
        return Err(Error::InvalidParameter(format!(
            "window range ends at {} but the black hole evaporates after {} windows",
            window_range.end,
            model.n_windows()
        )));
    }
    let windows = window_range.map(|t| model.window_lambdas(t)).collect();
    ConstraintSpec::new(Scenario::II, windows)
}
