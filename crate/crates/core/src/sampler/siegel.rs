//! Siegel upper-half-space chart for pure covariance matrices.
//!
//! A pure N-mode covariance is C = S_Z S_Zᵀ with Z = X + iY, X symmetric and Y positive definite.
//! In (q-block, p-block) ordering, with G = Y⁻¹ and H = GX,
//!   C_qq = G,   C_qp = H,   C_pq = Hᵀ,   C_pp = Y + XGX.
//! Coordinates z stack the upper triangles of X and Y, so dim z = N(N+1). The symplectic-invariant
//! measure is det(Y)^{−(N+1)} dX dY.

use nalgebra::{DMatrix, DVector};

use crate::constraints::ConstraintSpec;
use crate::error::{Error, Result};

/// Which block of C an interleaved entry lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Block {
    Qq,
    Qp,
    Pq,
    Pp,
}

#[derive(Debug, Clone)]
struct Entry {
    block: Block,
    i: usize,
    j: usize,
    target: f64,
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub n: usize,
    pairs: Vec<(usize, usize)>,
    entries: Vec<Entry>,
}

#[derive(Debug, Clone)]
pub struct Point {
    pub z: DVector<f64>,
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub log_det_y: f64,
}

impl Chart {
    pub fn new(spec: &ConstraintSpec) -> Self {
        let n = spec.n_modes();
        let pairs = (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect();
        let lambdas = spec.lambdas();
        let entries = spec
            .constrained_entries()
            .into_iter()
            .map(|(a, b)| {
                let (i, j) = (a / 2, b / 2);
                let block = match (a % 2, b % 2) {
                    (0, 0) => Block::Qq,
                    (0, 1) => Block::Qp,
                    (1, 0) => Block::Pq,
                    _ => Block::Pp,
                };
                let target = if a == b { lambdas[i] } else { 0.0 };
                Entry { block, i, j, target }
            })
            .collect();
        Self { n, pairs, entries }
    }

    pub fn dim(&self) -> usize {
        2 * self.pairs.len()
    }

    pub fn n_constraints(&self) -> usize {
        self.entries.len()
    }

    fn unpack(&self, z: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let p = self.pairs.len();
        let mut x = DMatrix::zeros(self.n, self.n);
        let mut y = DMatrix::zeros(self.n, self.n);
        for (k, &(a, b)) in self.pairs.iter().enumerate() {
            x[(a, b)] = z[k];
            x[(b, a)] = z[k];
            y[(a, b)] = z[p + k];
            y[(b, a)] = z[p + k];
        }
        (x, y)
    }

    /// None when Y is not positive definite.
    pub fn point(&self, z: &DVector<f64>) -> Option<Point> {
        let (x, y) = self.unpack(z);
        let chol = y.clone().cholesky()?;
        let log_det_y = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let g = chol.inverse();
        let g = (&g + g.transpose()) * 0.5;
        let h = &g * &x;
        Some(Point {
            z: z.clone(),
            x,
            y,
            g,
            h,
            log_det_y,
        })
    }

    /// Coordinates of a pure covariance matrix (interleaved layout).
    pub fn coords_of(&self, c: &DMatrix<f64>) -> Result<DVector<f64>> {
        let n = self.n;
        if c.nrows() != 2 * n {
            return Err(Error::Dimension(format!("C has dimension {} for {n} modes", c.nrows())));
        }
        let cqq = DMatrix::from_fn(n, n, |i, j| c[(2 * i, 2 * j)]);
        let cpq = DMatrix::from_fn(n, n, |i, j| c[(2 * i + 1, 2 * j)]);
        let y = cqq
            .cholesky()
            .ok_or_else(|| Error::Spectral("C_qq is not positive definite".into()))?
            .inverse();
        let x = &cpq * &y;
        let x = (&x + x.transpose()) * 0.5;
        let y = (&y + y.transpose()) * 0.5;
        let p = self.pairs.len();
        let mut z = DVector::zeros(2 * p);
        for (k, &(a, b)) in self.pairs.iter().enumerate() {
            z[k] = x[(a, b)];
            z[p + k] = y[(a, b)];
        }
        Ok(z)
    }

    /// Full covariance matrix, interleaved layout.
    pub fn covariance(&self, pt: &Point) -> DMatrix<f64> {
        let n = self.n;
        let pp = &pt.y + &pt.x * &pt.h;
        let mut c = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                c[(2 * i, 2 * j)] = pt.g[(i, j)];
                c[(2 * i, 2 * j + 1)] = pt.h[(i, j)];
                c[(2 * i + 1, 2 * j)] = pt.h[(j, i)];
                c[(2 * i + 1, 2 * j + 1)] = pp[(i, j)];
            }
        }
        (&c + c.transpose()) * 0.5
    }

    /// Gauge-fixed symplectic matrix S_Z with S_Z S_Zᵀ = C, interleaved layout.
    pub fn symplectic(&self, pt: &Point) -> DMatrix<f64> {
        let n = self.n;
        let eig = pt.y.clone().symmetric_eigen();
        let v = &eig.eigenvectors;
        let sqrt_y = v * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * v.transpose();
        let inv_sqrt_y = v * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt())) * v.transpose();
        let lower = &pt.x * &inv_sqrt_y;
        let mut s = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                s[(2 * i, 2 * j)] = inv_sqrt_y[(i, j)];
                s[(2 * i + 1, 2 * j)] = lower[(i, j)];
                s[(2 * i + 1, 2 * j + 1)] = sqrt_y[(i, j)];
            }
        }
        s
    }

    fn entry_value(&self, pt: &Point, e: &Entry) -> f64 {
        match e.block {
            Block::Qq => pt.g[(e.i, e.j)],
            Block::Qp => pt.h[(e.i, e.j)],
            Block::Pq => pt.h[(e.j, e.i)],
            Block::Pp => {
                let xh: f64 = (0..self.n).map(|k| pt.x[(e.i, k)] * pt.h[(k, e.j)]).sum();
                pt.y[(e.i, e.j)] + xh
            }
        }
    }

    /// Constraint map F(z) = constrained entries of C minus their targets.
    pub fn residual(&self, pt: &Point) -> DVector<f64> {
        DVector::from_iterator(
            self.entries.len(),
            self.entries.iter().map(|e| self.entry_value(pt, e) - e.target),
        )
    }

    /// Jacobian DF (constraints × coordinates).
    pub fn jacobian(&self, pt: &Point) -> DMatrix<f64> {
        let p = self.pairs.len();
        let (g, h) = (&pt.g, &pt.h);
        let d = |u: usize, v: usize| if u == v { 1.0 } else { 0.0 };
        let mut jac = DMatrix::zeros(self.entries.len(), 2 * p);
        for (row, e) in self.entries.iter().enumerate() {
            let (i, j) = (e.i, e.j);
            for (k, &(a, b)) in self.pairs.iter().enumerate() {
                // S_ab[f] = f(a, b) + f(b, a), or f(a, a) on the diagonal.
                let sym = |f: &dyn Fn(usize, usize) -> f64| if a == b { f(a, a) } else { f(a, b) + f(b, a) };
                let (dx, dy) = match e.block {
                    Block::Qq => (0.0, -sym(&|a, b| g[(i, a)] * g[(b, j)])),
                    Block::Qp => (sym(&|a, b| g[(i, a)] * d(b, j)), -sym(&|a, b| g[(i, a)] * h[(b, j)])),
                    Block::Pq => (sym(&|a, b| g[(j, a)] * d(b, i)), -sym(&|a, b| g[(j, a)] * h[(b, i)])),
                    Block::Pp => (
                        sym(&|a, b| d(i, a) * h[(b, j)] + h[(a, i)] * d(b, j)),
                        sym(&|a, b| d(i, a) * d(b, j) - h[(a, i)] * h[(b, j)]),
                    ),
                };
                jac[(row, k)] = dx;
                jac[(row, p + k)] = dy;
            }
        }
        jac
    }

    /// log of the invariant density det(Y)^{−(N+1)}.
    pub fn log_invariant_density(&self, pt: &Point) -> f64 {
        -((self.n + 1) as f64) * pt.log_det_y
    }

    /// Damped Gauss–Newton (Levenberg–Marquardt) to a point with F = 0, minimum-norm steps.
    ///
    /// Tolerates rank-deficient Jacobians.
    pub fn solve_feasible(&self, z0: &DVector<f64>, tol: f64, max_iter: usize) -> Result<Point> {
        let mut pt = self
            .point(z0)
            .ok_or_else(|| Error::Infeasible("start point has Y not positive definite".into()))?;
        let mut f = self.residual(&pt);
        let mut cost = f.norm_squared();
        let mut mu = 1e-3;
        for _ in 0..max_iter {
            if f.amax() <= tol {
                return Ok(pt);
            }
            let jac = self.jacobian(&pt);
            let gram = &jac * jac.transpose();
            let scale = gram.diagonal().amax().max(1.0);
            loop {
                let damped = &gram + DMatrix::identity(gram.nrows(), gram.nrows()) * (mu * scale);
                let a = match damped.cholesky() {
                    Some(ch) => ch.solve(&f),
                    None => {
                        mu *= 10.0;
                        continue;
                    }
                };
                let z_new = &pt.z - jac.transpose() * a;
                if let Some(cand) = self.point(&z_new) {
                    let f_new = self.residual(&cand);
                    let c_new = f_new.norm_squared();
                    if c_new < cost {
                        pt = cand;
                        f = f_new;
                        cost = c_new;
                        mu = (mu / 5.0).max(1e-15);
                        break;
                    }
                }
                mu *= 4.0;
                if mu > 1e12 {
                    return Err(Error::Infeasible(format!(
                        "constraint solve stalled at residual {:.3e}",
                        f.amax()
                    )));
                }
            }
        }
        if f.amax() <= tol {
            Ok(pt)
        } else {
            Err(Error::Infeasible(format!(
                "constraint solve did not converge (residual {:.3e})",
                f.amax()
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{build_constraint_matrix, Scenario};
    use crate::linalg::max_abs;
    use crate::symplectic::{random_symplectic, symplectic_residual};

    fn random_point(chart: &Chart, seed: u64) -> Point {
        let s = random_symplectic(chart.n, 0.6, seed).unwrap();
        let c = s.matrix() * s.matrix().transpose();
        chart.point(&chart.coords_of(&c).unwrap()).unwrap()
    }

    #[test]
    fn chart_roundtrip() {
        let spec = ConstraintSpec::scenario_one(&[2.0, 2.0, 3.0]).unwrap();
        let chart = Chart::new(&spec);
        assert_eq!(chart.dim(), 12);
        assert_eq!(chart.n_constraints(), 9);
        let s = random_symplectic(3, 0.7, 4).unwrap();
        let c = s.matrix() * s.matrix().transpose();
        let pt = chart.point(&chart.coords_of(&c).unwrap()).unwrap();
        assert!(max_abs(&(chart.covariance(&pt) - &c)) < 1e-10);
        let sz = chart.symplectic(&pt);
        assert!(symplectic_residual(&sz).unwrap() < 1e-10);
        assert!(max_abs(&(&sz * sz.transpose() - &c)) < 1e-10);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let spec = ConstraintSpec::new(Scenario::II, vec![vec![2.0, 1.5], vec![3.0]]).unwrap();
        let chart = Chart::new(&spec);
        let pt = random_point(&chart, 8);
        let jac = chart.jacobian(&pt);
        let h = 1e-6;
        for k in 0..chart.dim() {
            let mut zp = pt.z.clone();
            zp[k] += h;
            let mut zm = pt.z.clone();
            zm[k] -= h;
            let fd =
                (chart.residual(&chart.point(&zp).unwrap()) - chart.residual(&chart.point(&zm).unwrap())) / (2.0 * h);
            for r in 0..chart.n_constraints() {
                assert!(
                    (fd[r] - jac[(r, k)]).abs() < 1e-6,
                    "row {r} col {k}: {} vs {}",
                    fd[r],
                    jac[(r, k)]
                );
            }
        }
    }

    #[test]
    fn invariant_measure_exponent() {
        // Under C → gCgᵀ the density det(Y)^{−(N+1)} must pick up exactly the Jacobian of z → z'.
        for n in [1usize, 2, 3] {
            let spec = ConstraintSpec::scenario_one(&vec![2.0; n]).unwrap();
            let chart = Chart::new(&spec);
            let g = random_symplectic(n, 0.4, 100 + n as u64).unwrap();
            let gm = g.matrix();
            let pt = random_point(&chart, 200 + n as u64);
            let map = |z: &DVector<f64>| {
                let c = chart.covariance(&chart.point(z).unwrap());
                chart.coords_of(&(gm * c * gm.transpose())).unwrap()
            };
            let d = chart.dim();
            let h = 1e-6;
            let mut jac = DMatrix::zeros(d, d);
            for k in 0..d {
                let mut zp = pt.z.clone();
                zp[k] += h;
                let mut zm = pt.z.clone();
                zm[k] -= h;
                jac.set_column(k, &((map(&zp) - map(&zm)) / (2.0 * h)));
            }
            let image = chart.point(&map(&pt.z)).unwrap();
            let lhs = chart.log_invariant_density(&image) + jac.determinant().abs().ln();
            let rhs = chart.log_invariant_density(&pt);
            assert!((lhs - rhs).abs() < 1e-6, "n = {n}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn feasibility_solve() {
        let spec = ConstraintSpec::scenario_one(&[2.0, 2.5, 3.0]).unwrap();
        let chart = Chart::new(&spec);
        let start = random_point(&chart, 3);
        let pt = chart.solve_feasible(&start.z, 1e-12, 500).unwrap();
        let c = chart.covariance(&pt);
        let c_hat = build_constraint_matrix(&spec);
        let hat = crate::constraints::hat_matrix(&c, &spec);
        assert!(max_abs(&(hat - c_hat.matrix())) < 1e-11);
    }
}
