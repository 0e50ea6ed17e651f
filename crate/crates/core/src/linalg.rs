//! Small dense helpers shared across modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_c(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.norm()))
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Log-determinant of a complex matrix from a partially pivoted LU factorization.
///
/// The imaginary part is reduced to (-pi, pi].
pub fn complex_log_det(m: &DMatrix<Complex64>) -> Option<Complex64> {
    let n = m.nrows();
    let lu = m.clone().lu();
    let u = lu.u();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        let d = u[(i, i)];
        if d.norm() == 0.0 || !d.is_finite() {
            return None;
        }
        acc += d.ln();
    }
    let sign: Complex64 = lu.p().determinant();
    if sign.re < 0.0 {
        acc += Complex64::new(0.0, std::f64::consts::PI);
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut im = acc.im.rem_euclid(two_pi);
    if im > std::f64::consts::PI {
        im -= two_pi;
    }
    Some(Complex64::new(acc.re, im))
}

/// Determinant of a symmetric tridiagonal Toeplitz matrix by the three-term recurrence.
pub fn tridiagonal_toeplitz_det(n: usize, diag: f64, off: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (mut prev, mut cur) = (1.0, diag);
    for _ in 1..n {
        let next = diag * cur - off * off * prev;
        prev = cur;
        cur = next;
    }
    cur
}
