//! Replica-space matrices and the determinant chain for Tr ρ_A^x.
//!
//! For integer x ≥ 2 the x-th moment of a Gaussian state is a Gaussian integral over x−1
//! displacement vectors. Its value is the master determinant
//! 2^{N_A(x−1)} det[C_A ⊗ M − iΩ ⊗ J]^{−1/2}, which for isotropic blocks μ𝟙₂ reduces mode by mode
//! to 2^{x−1} x^{−1/2} Δ^{−1/2} and finally to 2^x / ((μ+1)^x − (μ−1)^x).

mod prefactor;
mod saddle;

pub use prefactor::{prefactor_integral, prefactor_monte_carlo, Prefactor, PrefactorEstimate};
pub use saddle::{saddle_point_solution, SaddleCheck, SaddleSolution};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::{renyi_trace_single, PURE_CLAMP};
use crate::error::{Error, Result};
use crate::linalg::{complex_log_det, kron, max_abs, tridiagonal_toeplitz_det};
use crate::symplectic::{omega, symplectic_spectrum, CovarianceMatrix};

/// Largest tolerated |arg det| of the replica matrix.
pub const PHASE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaMatrices {
    pub x: usize,
    /// Antiperiodic shift, T^{x−1} = −1.
    pub t: DMatrix<f64>,
    /// +1 above the diagonal, −1 below.
    pub j: DMatrix<f64>,
    /// 1 + eeᵀ.
    pub m: DMatrix<f64>,
    pub e: nalgebra::DVector<f64>,
}

pub fn build_replica_matrices(x: usize) -> Result<ReplicaMatrices> {
    if x < 2 {
        return Err(Error::InvalidParameter(format!("replica order must be >= 2, got {x}")));
    }
    let d = x - 1;
    let mut t = DMatrix::zeros(d, d);
    for i in 0..d - 1 {
        t[(i, i + 1)] = 1.0;
    }
    t[(d - 1, 0)] -= 1.0;
    let j = DMatrix::from_fn(d, d, |r, c| match r.cmp(&c) {
        std::cmp::Ordering::Less => 1.0,
        std::cmp::Ordering::Greater => -1.0,
        std::cmp::Ordering::Equal => 0.0,
    });
    let e = nalgebra::DVector::from_element(d, 1.0);
    let m = DMatrix::identity(d, d) + &e * e.transpose();
    Ok(ReplicaMatrices { x, t, j, m, e })
}

impl ReplicaMatrices {
    pub fn dim(&self) -> usize {
        self.x - 1
    }

    /// Expected spectrum of T: exp(iπ(2l−1)/(x−1)), l = 1..x−1.
    pub fn t_eigenvalues(&self) -> Vec<Complex64> {
        let d = self.dim() as f64;
        (1..=self.dim())
            .map(|l| Complex64::from_polar(1.0, std::f64::consts::PI * (2.0 * l as f64 - 1.0) / d))
            .collect()
    }
}

/// Max-abs entry of J − (1+T)(1−T)⁻¹.
pub fn j_geometric_identity_check(x: usize) -> Result<f64> {
    let r = build_replica_matrices(x)?;
    let id = DMatrix::<f64>::identity(r.dim(), r.dim());
    let inv = (&id - &r.t)
        .try_inverse()
        .ok_or_else(|| Error::Spectral("1 − T is singular".into()))?;
    Ok(max_abs(&(&r.j - (&id + &r.t) * inv)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaProblem {
    pub x: usize,
    pub constraint_block: CovarianceMatrix,
    pub n_a: usize,
}

impl ReplicaProblem {
    /// Requires Ĉ_A to be block diagonal with isotropic blocks μ𝟙₂.
    pub fn new(x: usize, constraint_block: CovarianceMatrix) -> Result<Self> {
        if x < 2 {
            return Err(Error::InvalidParameter(format!("replica order must be >= 2, got {x}")));
        }
        let n_a = constraint_block.n_modes();
        let m = constraint_block.matrix();
        let off_diagonal = (0..2 * n_a).any(|a| (0..2 * n_a).any(|b| a != b && m[(a, b)] != 0.0));
        let anisotropic = (0..n_a).any(|k| m[(2 * k, 2 * k)] != m[(2 * k + 1, 2 * k + 1)]);
        if off_diagonal || anisotropic {
            return Err(Error::InvalidParameter(
                "Ĉ_A must be block diagonal with isotropic 2x2 blocks".into(),
            ));
        }
        Ok(Self {
            x,
            constraint_block,
            n_a,
        })
    }

    pub fn from_mus(x: usize, mus: &[f64]) -> Result<Self> {
        let mut m = DMatrix::zeros(2 * mus.len(), 2 * mus.len());
        for (k, mu) in mus.iter().enumerate() {
            m[(2 * k, 2 * k)] = *mu;
            m[(2 * k + 1, 2 * k + 1)] = *mu;
        }
        Self::new(x, CovarianceMatrix::new(m)?)
    }

    pub fn mus(&self) -> Vec<f64> {
        (0..self.n_a)
            .map(|k| self.constraint_block.matrix()[(2 * k, 2 * k)])
            .collect()
    }
}

pub fn master_determinant(problem: &ReplicaProblem) -> Result<f64> {
    master_determinant_general(&problem.constraint_block, problem.x)
}

/// 2^{N_A(x−1)} det[C_A ⊗ M − iΩ ⊗ J]^{−1/2} for any covariance C_A.
pub fn master_determinant_general(c_a: &CovarianceMatrix, x: usize) -> Result<f64> {
    let r = build_replica_matrices(x)?;
    let spectrum = symplectic_spectrum(c_a)?;
    if !spectrum.is_physical(PURE_CLAMP) {
        return Err(Error::Unphysical(format!(
            "C_A violates the uncertainty principle: symplectic spectrum {:?}",
            spectrum.values
        )));
    }
    let n_a = c_a.n_modes();
    let real = kron(c_a.matrix(), &r.m);
    let imag = -kron(&omega(n_a), &r.j);
    let k = DMatrix::from_fn(real.nrows(), real.ncols(), |i, j| {
        Complex64::new(real[(i, j)], imag[(i, j)])
    });
    let log_det = complex_log_det(&k).ok_or_else(|| Error::Unphysical("replica matrix is singular".into()))?;
    if log_det.im.abs() > PHASE_TOL {
        return Err(Error::Unphysical(format!(
            "replica determinant has phase {:.3e}; C_A is not a physical covariance",
            log_det.im
        )));
    }
    let log_val = (n_a * (x - 1)) as f64 * std::f64::consts::LN_2 - 0.5 * log_det.re;
    Ok(log_val.exp())
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu >= 1.0 && mu.is_finite()) {
        return Err(Error::Unphysical(format!("mu = {mu} is below 1")));
    }
    Ok(())
}

/// Closed form (−1)^x ((μ+1)^{2x−2} − (μ−1)^{2x−2}) / (4μ) of the (x−2)-dimensional cofactor.
pub fn toeplitz_cofactor(mu: f64, x: usize) -> Result<f64> {
    check_mu(mu)?;
    if x < 2 {
        return Err(Error::InvalidParameter(format!("replica order must be >= 2, got {x}")));
    }
    let p = 2 * x as i32 - 2;
    let sign = if x % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * ((mu + 1.0).powi(p) - (mu - 1.0).powi(p)) / (4.0 * mu))
}

/// Tridiagonal determinant with diagonal −2(μ²+1) and off-diagonal μ²−1.
pub fn toeplitz_cofactor_direct(mu: f64, x: usize) -> Result<f64> {
    check_mu(mu)?;
    if x < 2 {
        return Err(Error::InvalidParameter(format!("replica order must be >= 2, got {x}")));
    }
    let mu2 = mu * mu;
    Ok(tridiagonal_toeplitz_det(x - 2, -2.0 * (mu2 + 1.0), mu2 - 1.0))
}

fn delta_a(mu: f64, x: usize) -> f64 {
    let k = x as i32 - 1;
    (mu + 1.0).powi(k) + (mu - 1.0).powi(k)
}

/// Closed form [2(μ²−1)^{x−1} + (μ+1)^{2x−1} − (μ−1)^{2x−1}]² / (4x a²),
/// a = (μ+1)^{x−1} + (μ−1)^{x−1}.
pub fn delta_j(mu: f64, x: usize) -> Result<f64> {
    check_mu(mu)?;
    if x < 2 {
        return Err(Error::InvalidParameter(format!("replica order must be >= 2, got {x}")));
    }
    let k = x as i32;
    let num = 2.0 * (mu * mu - 1.0).powi(k - 1) + (mu + 1.0).powi(2 * k - 1) - (mu - 1.0).powi(2 * k - 1);
    let a = delta_a(mu, x);
    Ok(num * num / (4.0 * x as f64 * a * a))
}

/// X = (−1)^x 4 det Σ' / a², with det Σ' the tridiagonal cofactor.
pub fn x_from_cofactor(mu: f64, x: usize) -> Result<f64> {
    let sign = if x % 2 == 0 { 1.0 } else { -1.0 };
    let a = delta_a(mu, x);
    Ok(sign * 4.0 * toeplitz_cofactor_direct(mu, x)? / (a * a))
}

/// Δ = a²/(4x) (1 + μ² X)².
pub fn delta_j_intermediate(mu: f64, x: usize) -> Result<f64> {
    let a = delta_a(mu, x);
    let y = 1.0 + mu * mu * x_from_cofactor(mu, x)?;
    Ok(a * a / (4.0 * x as f64) * y * y)
}

/// X = eᵀ(1−T) Σ⁻¹ (1−T) e with Σ = μ²(1−T)² − (1+T)².
pub fn x_direct(mu: f64, x: usize) -> Result<f64> {
    check_mu(mu)?;
    let r = build_replica_matrices(x)?;
    let id = DMatrix::<f64>::identity(r.dim(), r.dim());
    let a = &id - &r.t;
    let b = &id + &r.t;
    let sigma = &a * &a * (mu * mu) - &b * &b;
    let left = a.transpose() * &r.e;
    let w = sigma
        .lu()
        .solve(&(&a * &r.e))
        .ok_or_else(|| Error::Spectral("Σ is singular".into()))?;
    Ok(left.dot(&w))
}

/// det(μ² M − J M⁻¹ J).
pub fn delta_j_direct(mu: f64, x: usize) -> Result<f64> {
    check_mu(mu)?;
    let r = build_replica_matrices(x)?;
    let m_inv =
        r.m.clone()
            .try_inverse()
            .ok_or_else(|| Error::Spectral("M is singular".into()))?;
    Ok((&r.m * (mu * mu) - &r.j * m_inv * &r.j).determinant())
}

/// Per-mode moment 2^{x−1} x^{−1/2} Δ^{−1/2}.
pub fn trace_from_delta(delta: f64, x: usize) -> f64 {
    2f64.powi(x as i32 - 1) / (x as f64 * delta).sqrt()
}

pub fn closed_form_product(mus: &[f64], x: usize) -> Result<f64> {
    mus.iter().map(|&mu| renyi_trace_single(mu, x as u32)).product()
}

/// Max relative error between the master determinant and the product closed form.
pub fn final_identity_check(mus: &[f64], xs: impl IntoIterator<Item = usize>) -> Result<f64> {
    let mut worst = 0.0_f64;
    for x in xs {
        let got = master_determinant(&ReplicaProblem::from_mus(x, mus)?)?;
        let want = closed_form_product(mus, x)?;
        worst = worst.max(((got - want) / want).abs());
    }
    Ok(worst)
}

pub(crate) fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }
}
