//! Symplectic form, symplectic and covariance matrices, restrictions and spectra.
//!
//! Quadratures are interleaved as (q1, p1, q2, p2, ...). The vacuum has C = 1.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::max_abs;

pub const SYMPLECTIC_TOL: f64 = 1e-10;
pub const PURITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticForm {
    n_modes: usize,
    matrix: DMatrix<f64>,
}

impl SymplecticForm {
    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }
}

pub fn build_omega(n_modes: usize) -> Result<SymplecticForm> {
    if n_modes == 0 {
        return Err(Error::InvalidParameter("n_modes must be at least 1".into()));
    }
    Ok(SymplecticForm {
        n_modes,
        matrix: omega(n_modes),
    })
}

/// Unchecked Ω for internal use.
pub(crate) fn omega(n_modes: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        m[(2 * k, 2 * k + 1)] = 1.0;
        m[(2 * k + 1, 2 * k)] = -1.0;
    }
    m
}

fn modes_of(dim: usize, what: &str) -> Result<usize> {
    if dim == 0 || dim % 2 != 0 {
        return Err(Error::Dimension(format!(
            "{what} must have positive even dimension, got {dim}"
        )));
    }
    Ok(dim / 2)
}

/// Max-abs entry of SΩSᵀ − Ω.
pub fn symplectic_residual(s: &DMatrix<f64>) -> Result<f64> {
    if !s.is_square() {
        return Err(Error::Dimension(format!("S is {}x{}", s.nrows(), s.ncols())));
    }
    let n = modes_of(s.nrows(), "S")?;
    let om = omega(n);
    Ok(max_abs(&(s * &om * s.transpose() - &om)))
}

pub fn is_symplectic(s: &DMatrix<f64>, tol: f64) -> Result<bool> {
    Ok(symplectic_residual(s)? <= tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymplecticMatrix {
    n_modes: usize,
    matrix: DMatrix<f64>,
}

impl SymplecticMatrix {
    /// Validates SΩSᵀ = Ω at `tol` and det S = +1.
    pub fn new(matrix: DMatrix<f64>, tol: f64) -> Result<Self> {
        let residual = symplectic_residual(&matrix)?;
        if residual > tol {
            return Err(Error::NotSymplectic { residual, tol });
        }
        let det = matrix.determinant();
        if (det - 1.0).abs() > 1e-6 * det.abs().max(1.0) {
            return Err(Error::NotSymplectic {
                residual: (det - 1.0).abs(),
                tol,
            });
        }
        let n_modes = matrix.nrows() / 2;
        Ok(Self { n_modes, matrix })
    }

    pub fn new_unchecked(matrix: DMatrix<f64>) -> Self {
        let n_modes = matrix.nrows() / 2;
        Self { n_modes, matrix }
    }

    pub fn identity(n_modes: usize) -> Self {
        Self::new_unchecked(DMatrix::identity(2 * n_modes, 2 * n_modes))
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn residual(&self) -> f64 {
        symplectic_residual(&self.matrix).unwrap_or(f64::INFINITY)
    }

    pub fn compose(&self, other: &SymplecticMatrix) -> SymplecticMatrix {
        Self::new_unchecked(&self.matrix * &other.matrix)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix {
    n_modes: usize,
    matrix: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Accepts a square, even-dimensional, symmetric matrix. Entries are symmetrized.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension(format!("C is {}x{}", matrix.nrows(), matrix.ncols())));
        }
        let n_modes = modes_of(matrix.nrows(), "C")?;
        let scale = max_abs(&matrix).max(1.0);
        let asym = max_abs(&(&matrix - matrix.transpose()));
        if asym > 1e-9 * scale {
            return Err(Error::InvalidParameter(format!(
                "C is not symmetric (max asymmetry {asym:.3e})"
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("C has non-finite entries".into()));
        }
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        Ok(Self { n_modes, matrix })
    }

    pub fn identity(n_modes: usize) -> Self {
        Self {
            n_modes,
            matrix: DMatrix::identity(2 * n_modes, 2 * n_modes),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    /// 2×2 block for modes (i, j).
    pub fn block(&self, i: usize, j: usize) -> Matrix2<f64> {
        self.matrix.fixed_view::<2, 2>(2 * i, 2 * j).into_owned()
    }

    /// Max-abs entry of (CΩ)² + 1.
    pub fn purity_residual(&self) -> f64 {
        let om = omega(self.n_modes);
        let co = &self.matrix * om;
        let id = DMatrix::<f64>::identity(2 * self.n_modes, 2 * self.n_modes);
        max_abs(&(&co * &co + id))
    }

    pub fn is_pure(&self, tol: f64) -> bool {
        self.purity_residual() <= tol
    }
}

pub fn covariance_from_symplectic(s: &SymplecticMatrix) -> CovarianceMatrix {
    let m = s.matrix();
    let c = m * m.transpose();
    CovarianceMatrix {
        n_modes: s.n_modes(),
        matrix: (&c + c.transpose()) * 0.5,
    }
}

/// Same as [`covariance_from_symplectic`] but validating S first.
pub fn covariance_from_symplectic_checked(s: &SymplecticMatrix, tol: f64) -> Result<CovarianceMatrix> {
    let residual = s.residual();
    if residual > tol {
        return Err(Error::NotSymplectic { residual, tol });
    }
    Ok(covariance_from_symplectic(s))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModeSubset {
    parent_modes: usize,
    selected: Vec<usize>,
}

impl ModeSubset {
    pub fn new(parent_modes: usize, selected: Vec<usize>) -> Result<Self> {
        if selected.is_empty() {
            return Err(Error::InvalidParameter("mode subset is empty".into()));
        }
        if selected.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(format!(
                "mode indices must be strictly increasing: {selected:?}"
            )));
        }
        if let Some(&bad) = selected.iter().find(|&&i| i >= parent_modes) {
            return Err(Error::InvalidParameter(format!(
                "mode index {bad} out of range for {parent_modes} modes"
            )));
        }
        Ok(Self { parent_modes, selected })
    }

    pub fn first(parent_modes: usize, n_a: usize) -> Result<Self> {
        Self::new(parent_modes, (0..n_a).collect())
    }

    pub fn parent_modes(&self) -> usize {
        self.parent_modes
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    /// Row/column indices of the selected quadratures.
    pub fn quadrature_indices(&self) -> Vec<usize> {
        self.selected.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect()
    }
}

pub fn restrict(c: &CovarianceMatrix, a: &ModeSubset) -> Result<CovarianceMatrix> {
    if a.parent_modes() != c.n_modes() {
        return Err(Error::Dimension(format!(
            "subset is over {} modes but C has {}",
            a.parent_modes(),
            c.n_modes()
        )));
    }
    Ok(CovarianceMatrix {
        n_modes: a.len(),
        matrix: restrict_matrix(c.matrix(), &a.quadrature_indices()),
    })
}

pub(crate) fn restrict_matrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymplecticSpectrum {
    pub values: Vec<f64>,
}

impl SymplecticSpectrum {
    pub fn is_physical(&self, tol: f64) -> bool {
        self.values.iter().all(|&v| v >= 1.0 - tol)
    }

    pub fn is_pure(&self, tol: f64) -> bool {
        self.values.iter().all(|&v| (v - 1.0).abs() <= tol)
    }
}

/// Symplectic eigenvalues, descending.
///
/// With C = LLᵀ, LᵀΩL is antisymmetric and similar to ΩC, so its singular values are the
/// symplectic eigenvalues, each appearing twice.
pub fn symplectic_spectrum(c: &CovarianceMatrix) -> Result<SymplecticSpectrum> {
    let m = c.matrix();
    if c.n_modes() == 1 {
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        if m[(0, 0)] <= 0.0 || det <= 0.0 {
            return Err(Error::Spectral("C is not positive definite".into()));
        }
        return Ok(SymplecticSpectrum {
            values: vec![det.sqrt()],
        });
    }
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Spectral("C is not positive definite".into()))?;
    let l = chol.l();
    let k = l.transpose() * omega(c.n_modes()) * &l;
    let mut sv: Vec<f64> = k.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(SymplecticSpectrum {
        values: sv.iter().step_by(2).copied().collect(),
    })
}

/// Quadratic form q with ρ ∝ exp(−ξᵀqξ) reproducing a one-mode covariance.
///
/// q = Ω⁻¹ g(−CΩ⁻¹) with g(z) = (i/2) ln((z+i)/(z−i)), the arccot branch that makes q positive
/// definite. Since (CΩ⁻¹)² = −ν² on one mode, g(M) = (arccoth ν / ν) M and q = ν arccoth(ν) C⁻¹.
pub fn state_hamiltonian(c_i: &CovarianceMatrix) -> Result<Matrix2<f64>> {
    if c_i.n_modes() != 1 {
        return Err(Error::Dimension(format!(
            "state_hamiltonian takes one mode, got {}",
            c_i.n_modes()
        )));
    }
    let nu = symplectic_spectrum(c_i)?.values[0];
    if nu < 1.0 + 1e-8 {
        return Err(Error::Divergence(format!(
            "symplectic eigenvalue {nu} is too close to 1; the marginal is pure"
        )));
    }
    let arccoth = 0.5 * ((nu + 1.0) / (nu - 1.0)).ln();
    let c = c_i.block(0, 0);
    let inv = c.try_inverse().ok_or_else(|| Error::Spectral("C is singular".into()))?;
    let q = inv * (nu * arccoth);
    Ok((q + q.transpose()) * 0.5)
}

pub(crate) fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re, im)
    });
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Real 2N×2N orthogonal symplectic matrix of a passive unitary on the mode operators.
pub fn passive_from_unitary(u: &DMatrix<Complex64>) -> DMatrix<f64> {
    let n = u.nrows();
    let mut o = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        for k in 0..n {
            let (a, b) = (u[(j, k)].re, u[(j, k)].im);
            o[(2 * j, 2 * k)] = a;
            o[(2 * j, 2 * k + 1)] = -b;
            o[(2 * j + 1, 2 * k)] = b;
            o[(2 * j + 1, 2 * k + 1)] = a;
        }
    }
    o
}

pub(crate) fn random_passive_with<R: Rng + ?Sized>(n_modes: usize, rng: &mut R) -> DMatrix<f64> {
    passive_from_unitary(&haar_unitary(n_modes, rng))
}

/// Haar-random orthogonal symplectic matrix.
pub fn random_passive(n_modes: usize, seed: u64) -> SymplecticMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SymplecticMatrix::new_unchecked(random_passive_with(n_modes, &mut rng))
}

pub(crate) fn random_symplectic_with<R: Rng + ?Sized>(n_modes: usize, squeeze_bound: f64, rng: &mut R) -> DMatrix<f64> {
    let o1 = random_passive_with(n_modes, rng);
    let o2 = random_passive_with(n_modes, rng);
    let mut d = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        let r = if squeeze_bound > 0.0 {
            rng.random_range(-squeeze_bound..=squeeze_bound)
        } else {
            0.0
        };
        d[(2 * k, 2 * k)] = r.exp();
        d[(2 * k + 1, 2 * k + 1)] = (-r).exp();
    }
    o1 * d * o2
}

/// Passive × single-mode squeezers × passive, squeezing parameters uniform in [−b, b].
pub fn random_symplectic(n_modes: usize, squeeze_bound: f64, seed: u64) -> Result<SymplecticMatrix> {
    if n_modes == 0 {
        return Err(Error::InvalidParameter("n_modes must be at least 1".into()));
    }
    if !(squeeze_bound >= 0.0 && squeeze_bound.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "squeeze_bound must be finite and nonnegative, got {squeeze_bound}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(SymplecticMatrix::new_unchecked(random_symplectic_with(
        n_modes,
        squeeze_bound,
        &mut rng,
    )))
}

/// Two-mode squeezer on modes (0, 1) with squeezing r.
pub fn two_mode_squeezer(r: f64) -> SymplecticMatrix {
    let (ch, sh) = (r.cosh(), r.sinh());
    let mut s = DMatrix::zeros(4, 4);
    s[(0, 0)] = ch;
    s[(1, 1)] = ch;
    s[(2, 2)] = ch;
    s[(3, 3)] = ch;
    s[(0, 2)] = sh;
    s[(2, 0)] = sh;
    s[(1, 3)] = -sh;
    s[(3, 1)] = -sh;
    SymplecticMatrix::new_unchecked(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn omega_single_mode() {
        let om = build_omega(1).unwrap();
        assert_eq!(om.matrix(), &DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        assert!(build_omega(0).is_err());
    }

    #[test]
    fn omega_squares_to_minus_identity() {
        for n in 1..6 {
            let om = build_omega(n).unwrap().into_matrix();
            let id = DMatrix::<f64>::identity(2 * n, 2 * n);
            assert_eq!(&om * &om, -id);
            assert_eq!(om.transpose(), -&om);
        }
        let om2 = build_omega(2).unwrap().into_matrix();
        assert_eq!(om2[(0, 2)], 0.0);
        assert_eq!(om2[(2, 3)], 1.0);
    }

    #[test]
    fn symplectic_membership() {
        assert!(is_symplectic(&DMatrix::identity(4, 4), 1e-12).unwrap());
        let t: f64 = 0.7;
        let rot = DMatrix::from_row_slice(2, 2, &[t.cos(), t.sin(), -t.sin(), t.cos()]);
        assert!(is_symplectic(&rot, 1e-12).unwrap());
        let bad = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!(!is_symplectic(&bad, 1e-12).unwrap());
        assert!(is_symplectic(&DMatrix::identity(3, 3), 1e-12).is_err());
    }

    #[test]
    fn squeezer_covariance() {
        let r: f64 = 0.4;
        let s = DMatrix::from_row_slice(2, 2, &[r.exp(), 0.0, 0.0, (-r).exp()]);
        let c = covariance_from_symplectic(&SymplecticMatrix::new(s, 1e-12).unwrap());
        assert_relative_eq!(c.matrix()[(0, 0)], (2.0 * r).exp(), epsilon = 1e-14);
        assert_relative_eq!(c.matrix()[(1, 1)], (-2.0 * r).exp(), epsilon = 1e-14);
    }

    #[test]
    fn two_mode_squeezed_marginal() {
        let r = 0.6_f64;
        let c = covariance_from_symplectic(&two_mode_squeezer(r));
        assert!(c.is_pure(1e-12));
        let c0 = restrict(&c, &ModeSubset::new(2, vec![0]).unwrap()).unwrap();
        let expect = DMatrix::<f64>::identity(2, 2) * (2.0 * r).cosh();
        assert!(max_abs(&(c0.matrix() - expect)) < 1e-13);
        let sp = symplectic_spectrum(&c).unwrap();
        assert!(sp.is_pure(1e-10));
    }

    #[test]
    fn restrict_edge_cases() {
        let c = CovarianceMatrix::identity(2);
        let r = restrict(&c, &ModeSubset::new(2, vec![0]).unwrap()).unwrap();
        assert_eq!(r.matrix(), &DMatrix::<f64>::identity(2, 2));
        let all = restrict(&c, &ModeSubset::new(2, vec![0, 1]).unwrap()).unwrap();
        assert_eq!(all.matrix(), c.matrix());
        assert!(ModeSubset::new(2, vec![]).is_err());
        assert!(ModeSubset::new(2, vec![1, 0]).is_err());
        assert!(ModeSubset::new(2, vec![2]).is_err());
    }

    #[test]
    fn spectrum_examples() {
        let c = CovarianceMatrix::new(DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0])).unwrap();
        assert_relative_eq!(symplectic_spectrum(&c).unwrap().values[0], 2.0, epsilon = 1e-14);
        // The same value via the multi-mode route on a block-diagonal embedding.
        let mut big = DMatrix::identity(4, 4);
        big[(0, 0)] = 4.0;
        big[(1, 1)] = 1.0;
        big[(2, 2)] = 3.0;
        big[(3, 3)] = 3.0;
        let sp = symplectic_spectrum(&CovarianceMatrix::new(big).unwrap()).unwrap();
        assert_relative_eq!(sp.values[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(sp.values[1], 2.0, epsilon = 1e-12);
        let neg = CovarianceMatrix::new(DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0])).unwrap();
        assert!(symplectic_spectrum(&neg).is_err());
    }

    #[test]
    fn spectrum_is_invariant_under_symplectic_congruence() {
        let mut base = DMatrix::zeros(6, 6);
        for (k, l) in [3.0, 2.0, 1.5].iter().enumerate() {
            base[(2 * k, 2 * k)] = *l;
            base[(2 * k + 1, 2 * k + 1)] = *l;
        }
        let s = random_symplectic(3, 0.5, 11).unwrap();
        let c = CovarianceMatrix::new(s.matrix() * base * s.matrix().transpose()).unwrap();
        let sp = symplectic_spectrum(&c).unwrap();
        for (got, want) in sp.values.iter().zip([3.0, 2.0, 1.5]) {
            assert_relative_eq!(*got, want, max_relative = 1e-10);
        }
    }

    #[test]
    fn hamiltonian_isotropic_and_divergent() {
        let c = CovarianceMatrix::new(DMatrix::identity(2, 2) * 3.0).unwrap();
        let q = state_hamiltonian(&c).unwrap();
        let expect = 0.5 * 2.0_f64.ln();
        assert_relative_eq!(q[(0, 0)], expect, epsilon = 1e-14);
        assert_relative_eq!(q[(1, 1)], expect, epsilon = 1e-14);
        assert_eq!(q[(0, 1)], q[(1, 0)]);
        let pure = CovarianceMatrix::identity(1);
        assert!(matches!(state_hamiltonian(&pure), Err(Error::Divergence(_))));
        let q_near =
            state_hamiltonian(&CovarianceMatrix::new(DMatrix::identity(2, 2) * (1.0 + 1e-6)).unwrap()).unwrap();
        assert!(q_near[(0, 0)] > 7.0);
    }

    #[test]
    fn random_symplectic_contract() {
        let a = random_symplectic(3, 0.8, 5).unwrap();
        let b = random_symplectic(3, 0.8, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.residual() < 1e-10);
        let o = random_symplectic(3, 0.0, 9).unwrap();
        let c = covariance_from_symplectic(&o);
        assert!(max_abs(&(c.matrix() - DMatrix::<f64>::identity(6, 6))) < 1e-12);
        assert!(random_symplectic(3, -1.0, 0).is_err());
    }

    #[test]
    fn validated_constructor_rejects() {
        let bad = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            SymplecticMatrix::new(bad, 1e-10),
            Err(Error::NotSymplectic { .. })
        ));
        let bad_c = SymplecticMatrix::new_unchecked(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]));
        assert!(covariance_from_symplectic_checked(&bad_c, 1e-10).is_err());
    }
}
