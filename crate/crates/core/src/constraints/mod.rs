//! Marginal constraint matrices Ĉ and their window structure.
//!
//! Modes are numbered by concatenating windows in order. Under Scenario I every window holds a
//! single mode. Under Scenario II a window may hold several modes whose mutual correlations are
//! constrained to vanish, so the whole window-diagonal block of C is fixed.

mod file;
mod hawking;

pub use file::{ConstraintFile, HawkingPreset, FORMAT_VERSION};
pub use hawking::{hawking_constraints, hawking_mode_count, HawkingModel, LambdaPrescription};

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::max_abs;
use crate::symplectic::CovarianceMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "I")]
    I,
    #[serde(rename = "II")]
    II,
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scenario::I => write!(f, "I"),
            Scenario::II => write!(f, "II"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    scenario: Scenario,
    windows: Vec<Vec<f64>>,
}

impl ConstraintSpec {
    pub fn new(scenario: Scenario, windows: Vec<Vec<f64>>) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::InvalidParameter("constraint spec has no windows".into()));
        }
        for (w, win) in windows.iter().enumerate() {
            if win.is_empty() {
                return Err(Error::InvalidParameter(format!("window {w} is empty")));
            }
            if let Some(&l) = win.iter().find(|&&l| !(l >= 1.0) || !l.is_finite()) {
                return Err(Error::Unphysical(format!(
                    "window {w} has lambda {l} < 1 (below the vacuum)"
                )));
            }
        }
        if scenario == Scenario::I && windows.iter().any(|w| w.len() != 1) {
            return Err(Error::InvalidParameter(
                "Scenario I requires every window to hold exactly one mode".into(),
            ));
        }
        Ok(Self { scenario, windows })
    }

    /// Scenario I spec with one mode per window.
    pub fn scenario_one(lambdas: &[f64]) -> Result<Self> {
        Self::new(Scenario::I, lambdas.iter().map(|&l| vec![l]).collect())
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn windows(&self) -> &[Vec<f64>] {
        &self.windows
    }

    pub fn n_modes(&self) -> usize {
        self.windows.iter().map(Vec::len).sum()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.windows.iter().flatten().copied().collect()
    }

    /// Mode ranges of each window.
    pub fn window_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.windows
            .iter()
            .map(|w| {
                let r = start..start + w.len();
                start += w.len();
                r
            })
            .collect()
    }

    /// Window index of every mode.
    pub fn window_of_mode(&self) -> Vec<usize> {
        self.windows
            .iter()
            .enumerate()
            .flat_map(|(w, win)| std::iter::repeat_n(w, win.len()))
            .collect()
    }

    /// Quadrature index pairs (a, b), a ≤ b, fixed by the constraints.
    pub fn constrained_entries(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for r in self.window_ranges() {
            let lo = 2 * r.start;
            let hi = 2 * r.end;
            for a in lo..hi {
                for b in a..hi {
                    out.push((a, b));
                }
            }
        }
        out
    }

    pub fn min_lambda(&self) -> f64 {
        self.lambdas().into_iter().fold(f64::INFINITY, f64::min)
    }
}

pub fn build_constraint_matrix(spec: &ConstraintSpec) -> CovarianceMatrix {
    let lambdas = spec.lambdas();
    let n = lambdas.len();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for (k, l) in lambdas.iter().enumerate() {
        m[(2 * k, 2 * k)] = *l;
        m[(2 * k + 1, 2 * k + 1)] = *l;
    }
    CovarianceMatrix::new(m).expect("block-diagonal constraint matrix is symmetric")
}

fn check_dims(c: &CovarianceMatrix, spec: &ConstraintSpec) -> Result<()> {
    if c.n_modes() != spec.n_modes() {
        return Err(Error::Dimension(format!(
            "C has {} modes but the spec has {}",
            c.n_modes(),
            spec.n_modes()
        )));
    }
    Ok(())
}

pub(crate) fn hat_matrix(m: &DMatrix<f64>, spec: &ConstraintSpec) -> DMatrix<f64> {
    let win = spec.window_of_mode();
    DMatrix::from_fn(m.nrows(), m.ncols(), |a, b| {
        if win[a / 2] == win[b / 2] {
            m[(a, b)]
        } else {
            0.0
        }
    })
}

/// Keeps only the window-diagonal blocks of C.
pub fn hat_projection(c: &CovarianceMatrix, spec: &ConstraintSpec) -> Result<CovarianceMatrix> {
    check_dims(c, spec)?;
    CovarianceMatrix::new(hat_matrix(c.matrix(), spec))
}

/// Max-abs entry of hat(C) − Ĉ.
pub fn constraint_residual(c: &CovarianceMatrix, c_hat: &CovarianceMatrix, spec: &ConstraintSpec) -> Result<f64> {
    check_dims(c, spec)?;
    check_dims(c_hat, spec)?;
    Ok(max_abs(&(hat_matrix(c.matrix(), spec) - c_hat.matrix())))
}

/// Largest intra-window entry between distinct modes.
pub fn intra_window_offdiag(c: &DMatrix<f64>, spec: &ConstraintSpec) -> f64 {
    let mut worst = 0.0_f64;
    for r in spec.window_ranges() {
        for i in r.clone() {
            for j in r.clone() {
                if i != j {
                    for a in 0..2 {
                        for b in 0..2 {
                            worst = worst.max(c[(2 * i + a, 2 * j + b)].abs());
                        }
                    }
                }
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::{covariance_from_symplectic, two_mode_squeezer};

    #[test]
    fn build_examples() {
        let one = build_constraint_matrix(&ConstraintSpec::scenario_one(&[1.0]).unwrap());
        assert_eq!(one.matrix(), &DMatrix::<f64>::identity(2, 2));
        let two = build_constraint_matrix(&ConstraintSpec::scenario_one(&[3.0, 2.0]).unwrap());
        assert_eq!(
            two.matrix(),
            &DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 3.0, 2.0, 2.0]))
        );
        let spec = ConstraintSpec::new(Scenario::II, vec![vec![2.0, 2.0], vec![3.0]]).unwrap();
        let c = build_constraint_matrix(&spec);
        assert_eq!(c.n_modes(), 3);
        assert_eq!(c.block(0, 1), nalgebra::Matrix2::zeros());
        assert_eq!(c.block(2, 2), nalgebra::Matrix2::identity() * 3.0);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(ConstraintSpec::scenario_one(&[0.5]).is_err());
        assert!(ConstraintSpec::new(Scenario::I, vec![vec![2.0, 2.0]]).is_err());
        assert!(ConstraintSpec::new(Scenario::II, vec![]).is_err());
        assert!(ConstraintSpec::new(Scenario::II, vec![vec![]]).is_err());
    }

    #[test]
    fn hat_is_idempotent_projector() {
        let spec = ConstraintSpec::new(Scenario::II, vec![vec![2.0, 2.0], vec![3.0]]).unwrap();
        let m = DMatrix::from_fn(6, 6, |i, j| 1.0 + (i + j) as f64);
        let c = CovarianceMatrix::new(m).unwrap();
        let h = hat_projection(&c, &spec).unwrap();
        let hh = hat_projection(&h, &spec).unwrap();
        assert_eq!(h, hh);
        assert_eq!(h.matrix()[(0, 3)], c.matrix()[(0, 3)]);
        assert_eq!(h.matrix()[(0, 4)], 0.0);
        let b = build_constraint_matrix(&spec);
        assert_eq!(hat_projection(&b, &spec).unwrap(), b);

        let s1 = ConstraintSpec::scenario_one(&[2.0, 2.0, 3.0]).unwrap();
        let h1 = hat_projection(&c, &s1).unwrap();
        assert_eq!(h1.matrix()[(0, 3)], 0.0);
        assert_eq!(h1.matrix()[(0, 1)], c.matrix()[(0, 1)]);
    }

    #[test]
    fn residual_examples() {
        let r = 0.5_f64;
        let l = (2.0 * r).cosh();
        let spec = ConstraintSpec::scenario_one(&[l, l]).unwrap();
        let c_hat = build_constraint_matrix(&spec);
        assert_eq!(constraint_residual(&c_hat, &c_hat, &spec).unwrap(), 0.0);
        let c = covariance_from_symplectic(&two_mode_squeezer(r));
        assert!(constraint_residual(&c, &c_hat, &spec).unwrap() < 1e-14);
        let spec2 = ConstraintSpec::scenario_one(&[2.0, 2.0]).unwrap();
        let vac = CovarianceMatrix::identity(2);
        let res = constraint_residual(&vac, &build_constraint_matrix(&spec2), &spec2).unwrap();
        assert_eq!(res, 1.0);
    }

    #[test]
    fn constrained_entries_count() {
        let spec = ConstraintSpec::new(Scenario::II, vec![vec![2.0, 2.0], vec![3.0]]).unwrap();
        // 4x4 block: 10 entries, 2x2 block: 3 entries.
        assert_eq!(spec.constrained_entries().len(), 13);
    }
}
