//! Brute-force checks in truncated Fock space and by phase-space quadrature.
//!
//! Quadratures are q̂ = (a + a†)/√2 and p̂ = (a − a†)/(i√2), so the vacuum has C = 𝟙.

use nalgebra::{DMatrix, Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symplectic::{omega, CovarianceMatrix};

/// Geometric tail bound used to choose cutoffs.
pub const TAIL_TOL: f64 = 1e-12;
/// Hard cap on automatically chosen cutoffs.
pub const MAX_CUTOFF: usize = 2000;

type CMat = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FockOperator {
    pub cutoff: usize,
    pub modes: usize,
    pub matrix: CMat,
    /// Probability weight discarded by the truncation.
    pub tail: f64,
}

impl FockOperator {
    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }
}

/// Annihilation operator on levels 0..=cutoff.
pub fn annihilation(cutoff: usize) -> CMat {
    let d = cutoff + 1;
    let mut a = CMat::zeros(d, d);
    for n in 1..d {
        a[(n - 1, n)] = c((n as f64).sqrt());
    }
    a
}

/// a² with exact matrix elements ⟨n−2|a²|n⟩ = √(n(n−1)).
fn a_squared(cutoff: usize) -> CMat {
    let d = cutoff + 1;
    let mut m = CMat::zeros(d, d);
    for n in 2..d {
        m[(n - 2, n)] = c(((n * (n - 1)) as f64).sqrt());
    }
    m
}

fn number(cutoff: usize) -> CMat {
    CMat::from_diagonal(&nalgebra::DVector::from_fn(cutoff + 1, |n, _| c(n as f64)))
}

/// q̂², p̂² and q̂p̂ + p̂q̂ built from exact a², a†² and n̂ elements.
fn quadratic_operators(cutoff: usize) -> (CMat, CMat, CMat) {
    let a2 = a_squared(cutoff);
    let ad2 = a2.adjoint();
    let n = number(cutoff);
    let id = CMat::identity(cutoff + 1, cutoff + 1);
    let two_n_one = &n * c(2.0) + &id;
    let qq = (&a2 + &ad2 + &two_n_one) * c(0.5);
    let pp = (-&a2 - &ad2 + &two_n_one) * c(0.5);
    let qp = (&a2 - &ad2) * Complex64::new(0.0, -1.0);
    (qq, pp, qp)
}

/// Smallest cutoff whose geometric tail q^{cutoff+1} is below TAIL_TOL.
pub fn required_cutoff(lambda: f64) -> usize {
    if lambda <= 1.0 {
        return 0;
    }
    let q = (lambda - 1.0) / (lambda + 1.0);
    let n = (TAIL_TOL.ln() / q.ln()).ceil() as usize;
    n.saturating_sub(1)
}

/// Thermal state with covariance λ𝟙₂, renormalized over the truncation.
pub fn thermal_state(lambda: f64, cutoff: Option<usize>) -> Result<FockOperator> {
    if !(lambda >= 1.0 && lambda.is_finite()) {
        return Err(Error::Unphysical(format!("lambda = {lambda} is below 1")));
    }
    let required = required_cutoff(lambda);
    let cutoff = match cutoff {
        Some(k) if k < required => {
            let q = (lambda - 1.0) / (lambda + 1.0);
            return Err(Error::InsufficientCutoff {
                cutoff: k,
                tail: q.powi(k as i32 + 1),
                required,
            });
        }
        Some(k) => k,
        None if required > MAX_CUTOFF => {
            let q = (lambda - 1.0) / (lambda + 1.0);
            return Err(Error::InsufficientCutoff {
                cutoff: MAX_CUTOFF,
                tail: q.powi(MAX_CUTOFF as i32 + 1),
                required,
            });
        }
        None => required,
    };
    let q = (lambda - 1.0) / (lambda + 1.0);
    let weights: Vec<f64> = (0..=cutoff).map(|n| (1.0 - q) * q.powi(n as i32)).collect();
    let total: f64 = weights.iter().sum();
    let matrix = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        cutoff + 1,
        weights.iter().map(|w| c(w / total)),
    ));
    Ok(FockOperator {
        cutoff,
        modes: 1,
        matrix,
        tail: 1.0 - total,
    })
}

/// Tr ρ^x by repeated multiplication.
pub fn trace_power(rho: &FockOperator, x: u32) -> Result<f64> {
    if x < 1 {
        return Err(Error::InvalidParameter("power must be at least 1".into()));
    }
    let mut p = rho.matrix.clone();
    for _ in 1..x {
        p = &p * &rho.matrix;
    }
    Ok(p.trace().re)
}

/// Tr ρ² = Σ|ρ_ij|² for Hermitian ρ, without forming ρ².
pub fn purity(rho: &FockOperator) -> f64 {
    rho.matrix.iter().map(|z| z.norm_sqr()).sum()
}

/// Covariance matrix of a one-mode Fock-space state.
pub fn covariance_of(rho: &FockOperator) -> Result<Matrix2<f64>> {
    if rho.modes != 1 {
        return Err(Error::Dimension("covariance_of takes a one-mode state".into()));
    }
    let (qq, pp, qp) = quadratic_operators(rho.cutoff);
    let ev = |op: &CMat| (&rho.matrix * op).trace().re;
    let cqp = ev(&qp);
    Ok(Matrix2::new(2.0 * ev(&qq), cqp, cqp, 2.0 * ev(&pp)))
}

fn hermitian_exp(h: &CMat, scale: Complex64) -> CMat {
    let eig = h.clone().symmetric_eigen();
    let v = &eig.eigenvectors;
    let d = CMat::from_diagonal(&eig.eigenvalues.map(|l| (scale * l).exp()));
    v * d * v.adjoint()
}

/// Normalized exp(−ξᵀqξ) for a one-mode quadratic form q.
pub fn gaussian_from_hamiltonian(q: &Matrix2<f64>, cutoff: usize) -> Result<FockOperator> {
    let (qq, pp, qp) = quadratic_operators(cutoff);
    let sym = 0.5 * (q[(0, 1)] + q[(1, 0)]);
    let h = &qq * c(q[(0, 0)]) + &pp * c(q[(1, 1)]) + &qp * c(sym);
    let eig = h.symmetric_eigen();
    let shift = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let v = &eig.eigenvectors;
    let d = CMat::from_diagonal(&eig.eigenvalues.map(|l| c((-(l - shift)).exp())));
    let mut rho = v * d * v.adjoint();
    let tr = rho.trace();
    rho /= tr;
    let edge = rho[(cutoff, cutoff)].re.abs();
    Ok(FockOperator {
        cutoff,
        modes: 1,
        matrix: rho,
        tail: edge,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Displacement {
    pub operator: FockOperator,
    /// False once |r|² exceeds the cutoff, where truncation distorts D_r on low levels.
    pub within_validity: bool,
}

/// |r|² below which truncated displacements are trusted.
pub fn validity_radius_sq(cutoff: usize) -> f64 {
    cutoff as f64 / 4.0
}

/// D_r = exp(−i rᵀΩξ̂) = exp(−i(r_q p̂ − r_p q̂)), via the eigendecomposition of the truncated generator.
pub fn displacement(r: &Vector2<f64>, cutoff: usize) -> Displacement {
    let a = annihilation(cutoff);
    let ad = a.adjoint();
    let s2 = std::f64::consts::SQRT_2;
    let q = (&a + &ad) / c(s2);
    let p = (&a - &ad) / Complex64::new(0.0, s2);
    let g = &p * c(r[0]) - &q * c(r[1]);
    let within = r.norm_squared() <= validity_radius_sq(cutoff);
    if !within {
        log::warn!(
            "displacement |r|^2 = {:.3} exceeds the validity radius {:.3} at cutoff {cutoff}",
            r.norm_squared(),
            validity_radius_sq(cutoff)
        );
    }
    Displacement {
        operator: FockOperator {
            cutoff,
            modes: 1,
            matrix: hermitian_exp(&g, Complex64::new(0.0, -1.0)),
            tail: 0.0,
        },
        within_validity: within,
    }
}

fn symplectic_product(r: &Vector2<f64>, s: &Vector2<f64>) -> f64 {
    r[0] * s[1] - r[1] * s[0]
}

/// Max deviation of D_r D_s from e^{iφ/2 · rᵀΩs} D_{r+s} on the lowest `block` levels.
///
/// `phase_sign` selects φ = ±1; the canonical commutator gives φ = −1.
pub fn group_law_residual(r: &Vector2<f64>, s: &Vector2<f64>, cutoff: usize, block: usize, phase_sign: f64) -> f64 {
    let dr = displacement(r, cutoff).operator.matrix;
    let ds = displacement(s, cutoff).operator.matrix;
    let drs = displacement(&(r + s), cutoff).operator.matrix;
    let phase = Complex64::from_polar(1.0, phase_sign * 0.5 * symplectic_product(r, s));
    let diff = &dr * &ds - drs * phase;
    let b = block.min(cutoff + 1);
    diff.view((0, 0), (b, b)).iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// χ(r) = exp(−¼ rᵀΩᵀCΩr).
pub fn characteristic_function(c_a: &CovarianceMatrix, r: &[f64]) -> Result<f64> {
    let n = c_a.n_modes();
    if r.len() != 2 * n {
        return Err(Error::Dimension(format!("r has length {} for {n} modes", r.len())));
    }
    let rv = nalgebra::DVector::from_row_slice(r);
    let om = omega(n);
    let v = &om * &rv;
    Ok((-0.25 * v.dot(&(c_a.matrix() * &v))).exp())
}

/// Tr[ρ D_r] in Fock space.
pub fn characteristic_function_fock(rho: &FockOperator, r: &Vector2<f64>) -> Complex64 {
    (&rho.matrix * displacement(r, rho.cutoff).operator.matrix).trace()
}

/// Pure two-mode squeezed state Σ tanh(r)ⁿ/cosh(r) |n,n⟩ as a density matrix on (cutoff+1)² levels.
pub fn two_mode_squeezed_state(r: f64, cutoff: usize) -> FockOperator {
    let d = cutoff + 1;
    let t = r.tanh();
    let mut psi = nalgebra::DVector::<Complex64>::zeros(d * d);
    let mut norm = 0.0;
    for n in 0..d {
        let amp = t.powi(n as i32) / r.cosh();
        psi[n * d + n] = c(amp);
        norm += amp * amp;
    }
    psi /= c(norm.sqrt());
    FockOperator {
        cutoff,
        modes: 2,
        matrix: &psi * psi.adjoint(),
        tail: 1.0 - norm,
    }
}

/// Reduced state of one mode of a two-mode operator.
pub fn partial_trace(rho: &FockOperator, keep: usize) -> Result<FockOperator> {
    if rho.modes != 2 || keep > 1 {
        return Err(Error::Dimension(
            "partial_trace takes a two-mode state and keep in {0, 1}".into(),
        ));
    }
    let d = rho.cutoff + 1;
    let mut out = CMat::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut acc = c(0.0);
            for k in 0..d {
                let (a, b) = if keep == 0 {
                    (i * d + k, j * d + k)
                } else {
                    (k * d + i, k * d + j)
                };
                acc += rho.matrix[(a, b)];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(FockOperator {
        cutoff: rho.cutoff,
        modes: 1,
        matrix: out,
        tail: rho.tail,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    pub points_per_axis: usize,
    /// |last − previous| at convergence.
    pub change: f64,
}

/// Trapezoid rule on a tensor grid over [−L s_a, L s_a], doubling the density until two successive
/// estimates agree to `tol`/2.
fn tensor_trapezoid<F: Fn(&[f64]) -> f64>(
    scales: &[f64],
    half_width: f64,
    tol: f64,
    max_points: usize,
    f: F,
) -> Result<QuadratureResult> {
    let d = scales.len();
    let mut points = 8usize;
    let mut prev: Option<f64> = None;
    loop {
        let m = points + 1;
        let h: Vec<f64> = scales.iter().map(|s| 2.0 * half_width * s / points as f64).collect();
        let vol: f64 = h.iter().product();
        let total = m.pow(d as u32);
        let mut r = vec![0.0; d];
        let mut acc = 0.0;
        for idx in 0..total {
            let mut rem = idx;
            let mut w = 1.0;
            for a in 0..d {
                let k = rem % m;
                rem /= m;
                r[a] = -half_width * scales[a] + k as f64 * h[a];
                if k == 0 || k == points {
                    w *= 0.5;
                }
            }
            acc += w * f(&r);
        }
        let value = acc * vol;
        if let Some(p) = prev {
            let change = (value - p).abs();
            if change <= 0.5 * tol {
                return Ok(QuadratureResult {
                    value,
                    points_per_axis: m,
                    change,
                });
            }
        }
        if points * 2 > max_points {
            return Err(Error::Divergence(format!(
                "quadrature did not converge with {m} points per axis"
            )));
        }
        prev = Some(value);
        points *= 2;
    }
}

/// ∫ d^{2N_A}r/(2π)^{N_A} χ(r)² by adaptive tensor quadrature, for one or two modes.
pub fn purity_by_quadrature(c_a: &CovarianceMatrix, tol: f64) -> Result<QuadratureResult> {
    let n = c_a.n_modes();
    if n > 2 {
        return Err(Error::Dimension(format!(
            "quadrature purity supports at most two modes, got {n}"
        )));
    }
    let om = omega(n);
    // χ² = exp(−½ rᵀKr) with K = ΩᵀCΩ; axis a has marginal width sqrt((K⁻¹)_aa).
    let k = om.transpose() * c_a.matrix() * &om;
    let k_inv = k
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Spectral("C_A is singular".into()))?;
    let scales: Vec<f64> = (0..2 * n).map(|a| k_inv[(a, a)].sqrt()).collect();
    let norm = (2.0 * std::f64::consts::PI).powi(n as i32);
    let res = tensor_trapezoid(&scales, 9.0, tol * norm, 512, |r| {
        let mut s = 0.0;
        for a in 0..r.len() {
            for b in 0..r.len() {
                s += r[a] * k[(a, b)] * r[b];
            }
        }
        (-0.5 * s).exp()
    })?;
    Ok(QuadratureResult {
        value: res.value / norm,
        change: res.change / norm,
        ..res
    })
}

/// (1/(2π)²) ∫ dr₁ dr₂ χ(r₁) χ(r₂) χ(−r₁−r₂) cos(½ r₁ᵀΩr₂) for one mode, x = 3.
///
/// With `with_phase = false` the cosine is dropped, which gives a wrong value and serves as a
/// negative control.
pub fn coherent_rep_trace(c_a: &CovarianceMatrix, x: u32, with_phase: bool, tol: f64) -> Result<QuadratureResult> {
    if c_a.n_modes() != 1 {
        return Err(Error::Dimension("coherent-state quadrature supports one mode".into()));
    }
    if x != 3 {
        return Err(Error::InvalidParameter(format!(
            "coherent-state quadrature supports x = 3 only, got {x}"
        )));
    }
    let om = omega(1);
    let k = om.transpose() * c_a.matrix() * &om;
    let quad = |u: f64, v: f64| k[(0, 0)] * u * u + 2.0 * k[(0, 1)] * u * v + k[(1, 1)] * v * v;
    // Total exponent −¼ r̃ᵀ (K ⊗ [[2,1],[1,2]]) r̃; marginal widths from its inverse.
    let k_inv = k
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Spectral("C_A is singular".into()))?;
    let w = (2.0 * 2.0 / 3.0_f64).sqrt();
    let scales = vec![
        w * k_inv[(0, 0)].sqrt(),
        w * k_inv[(1, 1)].sqrt(),
        w * k_inv[(0, 0)].sqrt(),
        w * k_inv[(1, 1)].sqrt(),
    ];
    let norm = (2.0 * std::f64::consts::PI).powi(2);
    let res = tensor_trapezoid(&scales, 9.0, tol * norm, 256, |r| {
        let (q1, p1, q2, p2) = (r[0], r[1], r[2], r[3]);
        let e = quad(q1, p1) + quad(q2, p2) + quad(q1 + q2, p1 + p2);
        let g = (-0.25 * e).exp();
        if with_phase {
            g * (0.5 * (q1 * p2 - p1 * q2)).cos()
        } else {
            g
        }
    })?;
    Ok(QuadratureResult {
        value: res.value / norm,
        change: res.change / norm,
        ..res
    })
}
