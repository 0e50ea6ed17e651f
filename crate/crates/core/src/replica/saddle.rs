//! Mean-field saddle point of the multiplier integrals for the average purity.
//!
//! The saddle equations read
//!   Ω    = (N/2) [(ε − iA + B)⁻¹ − (ε − iA − B)⁻¹]
//!   Ĉ_w  = (N/2) [(ε − iA + B)⁻¹ + (ε − iA − B)⁻¹]_w     for every window block w
//! and are solved at ε → 0 by
//!   B₀ = (N/2)[(τ − Ĉ)⁻¹ + (τ + Ĉ)⁻¹],   A₀ = (N/2i)[(τ − Ĉ)⁻¹ − (τ + Ĉ)⁻¹]
//! with τ = Ω, so that −iA₀ + B₀ = N(Ω + Ĉ)⁻¹ and −iA₀ − B₀ = N(Ĉ − Ω)⁻¹.
//! The solution is reachable only when the Hermitian matrix Ĉ + iΩ is positive definite.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constraints::{hat_matrix, ConstraintSpec};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, max_abs_c, to_complex};
use crate::symplectic::{omega, CovarianceMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleSolution {
    pub n: usize,
    /// Purely imaginary, symmetric.
    pub a0: DMatrix<Complex64>,
    /// Real, antisymmetric.
    pub b0: DMatrix<f64>,
}

fn invert(m: DMatrix<Complex64>, what: &str) -> Result<DMatrix<Complex64>> {
    m.try_inverse()
        .ok_or_else(|| Error::Spectral(format!("{what} is singular")))
}

pub fn saddle_point_solution(c_hat: &CovarianceMatrix, n: usize) -> Result<SaddleSolution> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be positive".into()));
    }
    let dim = c_hat.matrix().nrows();
    let om = omega(c_hat.n_modes());
    let herm = DMatrix::from_fn(dim, dim, |i, j| Complex64::new(c_hat.matrix()[(i, j)], om[(i, j)]));
    let min_eig = herm
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    if min_eig <= 1e-12 * max_abs(c_hat.matrix()).max(1.0) {
        return Err(Error::SaddleUnreachable(format!(
            "Ĉ + iΩ is not positive definite (smallest eigenvalue {min_eig:.3e}); \
             every marginal needs lambda > 1"
        )));
    }
    let c = to_complex(c_hat.matrix());
    let oc = to_complex(&om);
    let tau_minus = invert(&oc - &c, "Ω − Ĉ")?;
    let tau_plus = invert(&oc + &c, "Ω + Ĉ")?;
    let half_n = n as f64 / 2.0;
    let b0c = (&tau_minus + &tau_plus) * Complex64::new(half_n, 0.0);
    let a0 = (&tau_minus - &tau_plus) * (Complex64::new(half_n, 0.0) / Complex64::new(0.0, 1.0));
    Ok(SaddleSolution {
        n,
        a0,
        b0: b0c.map(|z| z.re),
    })
}

impl SaddleSolution {
    fn shifted(&self, eps: f64, sign: f64) -> DMatrix<Complex64> {
        let dim = self.b0.nrows();
        let id = DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(eps, 0.0);
        id - &self.a0 * Complex64::new(0.0, 1.0) + to_complex(&self.b0) * Complex64::new(sign, 0.0)
    }

    fn inverses(&self, eps: f64) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
        Ok((
            invert(self.shifted(eps, 1.0), "ε − iA + B")?,
            invert(self.shifted(eps, -1.0), "ε − iA − B")?,
        ))
    }

    /// Max-abs residuals of the two saddle equations at softening ε.
    pub fn residuals(&self, c_hat: &CovarianceMatrix, spec: &ConstraintSpec, eps: f64) -> Result<(f64, f64)> {
        let (p, m) = self.inverses(eps)?;
        let half_n = Complex64::new(self.n as f64 / 2.0, 0.0);
        let om = to_complex(&omega(c_hat.n_modes()));
        let r1 = max_abs_c(&(om - (&p - &m) * half_n));
        let sum = (&p + &m) * half_n;
        let re = sum.map(|z| z.re);
        let im = sum.map(|z| z.im);
        let r2 = max_abs(&(hat_matrix(&re, spec) - c_hat.matrix())).max(max_abs(&hat_matrix(&im, spec)));
        Ok((r1, r2))
    }

    /// Ã₀ = (ε − iA₀ + B₀)⁻¹ + (ε − iA₀ − B₀)⁻¹.
    pub fn a_tilde(&self, eps: f64) -> Result<DMatrix<Complex64>> {
        let (p, m) = self.inverses(eps)?;
        Ok(p + m)
    }

    /// max|Ã₀ − (2/N)Ĉ| / max|(2/N)Ĉ|.
    pub fn a_tilde_deviation(&self, c_hat: &CovarianceMatrix, eps: f64) -> Result<f64> {
        let target = c_hat.matrix() * (2.0 / self.n as f64);
        let diff = self.a_tilde(eps)? - to_complex(&target);
        Ok(max_abs_c(&diff) / max_abs(&target))
    }

    /// Largest entry of A₀ or B₀ outside the window-diagonal pattern.
    pub fn block_leakage(&self, spec: &ConstraintSpec) -> f64 {
        let a_im = self.a0.map(|z| z.im);
        let a_re = self.a0.map(|z| z.re);
        let outside = |m: &DMatrix<f64>| max_abs(&(m - hat_matrix(m, spec)));
        outside(&a_im).max(outside(&a_re)).max(outside(&self.b0))
    }

    /// Deviation of A₀ from purely imaginary symmetric and of B₀ from antisymmetric.
    pub fn symmetry_defect(&self) -> f64 {
        let re = max_abs(&self.a0.map(|z| z.re));
        let im = self.a0.map(|z| z.im);
        re.max(max_abs(&(&im - im.transpose())))
            .max(max_abs(&(&self.b0 + self.b0.transpose())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleCheck {
    pub n_modes: usize,
    /// Residuals at ε = 0 of the equation for Ω and of the equation for the window blocks of Ĉ.
    pub form_residual: f64,
    pub marginal_residual: f64,
    /// Residuals at the working softening, which are O(ε).
    pub form_residual_at_eps: f64,
    pub marginal_residual_at_eps: f64,
    pub eps: f64,
    /// Relative deviation of Ã₀ from (2/N)Ĉ at ε and at 100ε.
    pub a_tilde_deviation: f64,
    pub a_tilde_deviation_coarse: f64,
    pub block_leakage: f64,
    pub symmetry_defect: f64,
}

impl SaddleCheck {
    pub fn run(spec: &ConstraintSpec, eps: f64) -> Result<Self> {
        let c_hat = crate::constraints::build_constraint_matrix(spec);
        let n = spec.n_modes();
        let sol = saddle_point_solution(&c_hat, n)?;
        let (r1, r2) = sol.residuals(&c_hat, spec, 0.0)?;
        let (e1, e2) = sol.residuals(&c_hat, spec, eps)?;
        Ok(Self {
            n_modes: n,
            form_residual: r1,
            marginal_residual: r2,
            form_residual_at_eps: e1,
            marginal_residual_at_eps: e2,
            eps,
            a_tilde_deviation: sol.a_tilde_deviation(&c_hat, eps)?,
            a_tilde_deviation_coarse: sol.a_tilde_deviation(&c_hat, 100.0 * eps)?,
            block_leakage: sol.block_leakage(spec),
            symmetry_defect: sol.symmetry_defect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{build_constraint_matrix, Scenario};

    #[test]
    fn single_mode_closed_form() {
        // Per block: A₀ = iNλ/(λ²+1) 𝟙, B₀ = −NΩ/(λ²+1).
        let spec = ConstraintSpec::scenario_one(&[3.0]).unwrap();
        let c = build_constraint_matrix(&spec);
        let sol = saddle_point_solution(&c, 4).unwrap();
        assert!((sol.a0[(0, 0)] - Complex64::new(0.0, 1.2)).norm() < 1e-14);
        assert!(sol.a0[(0, 1)].norm() < 1e-14);
        assert!((sol.b0[(0, 1)] + 0.4).abs() < 1e-14);
    }

    #[test]
    fn residuals_vanish() {
        let spec = ConstraintSpec::new(Scenario::II, vec![vec![2.0, 3.5], vec![1.2], vec![7.0, 1.01]]).unwrap();
        let chk = SaddleCheck::run(&spec, 1e-8).unwrap();
        assert!(chk.form_residual <= 1e-10, "{chk:?}");
        assert!(chk.marginal_residual <= 1e-10, "{chk:?}");
        assert!(chk.a_tilde_deviation <= 10.0 * 1e-8, "{chk:?}");
        assert!(chk.block_leakage == 0.0 && chk.symmetry_defect < 1e-14);
        let ratio = chk.a_tilde_deviation_coarse / chk.a_tilde_deviation;
        assert!((ratio - 100.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn pure_marginal_is_unreachable() {
        let spec = ConstraintSpec::scenario_one(&[2.0, 1.0]).unwrap();
        let c = build_constraint_matrix(&spec);
        assert!(matches!(saddle_point_solution(&c, 2), Err(Error::SaddleUnreachable(_))));
    }
}
