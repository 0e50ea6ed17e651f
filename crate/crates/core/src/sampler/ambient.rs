//! Softened-constraint sampler over the raw entries of S.
//!
//! Target exp(−Φ(S)/(2ε²)) dS with Φ = Σ_{a<b} (SΩSᵀ − Ω)_ab² + Σ_{constrained a≤b} (SSᵀ − Ĉ)_ab²,
//! sampled with Hamiltonian Monte Carlo. Each recorded S is pushed onto the constraint manifold
//! before C is stored; the raw residuals are kept alongside.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{ChainOutput, DualAveraging};
use crate::constraints::{build_constraint_matrix, ConstraintSpec};
use crate::symplectic::omega;

const TARGET_ACCEPTANCE: f64 = 0.55;
const MAX_LEAPFROG: usize = 4000;

pub(crate) struct Potential {
    omega: DMatrix<f64>,
    c_hat: DMatrix<f64>,
    mask: DMatrix<f64>,
    /// Gradient weight per entry: 0 unconstrained, 1 off-diagonal, 2 diagonal.
    weight: DMatrix<f64>,
    eps2: f64,
}

impl Potential {
    pub(crate) fn new(spec: &ConstraintSpec, eps: f64) -> Self {
        let n = spec.n_modes();
        let win = spec.window_of_mode();
        let weight: DMatrix<f64> = DMatrix::from_fn(2 * n, 2 * n, |a, b| {
            if win[a / 2] != win[b / 2] {
                0.0
            } else if a == b {
                2.0
            } else {
                1.0
            }
        });
        Self {
            mask: weight.map(|w: f64| w.min(1.0)),
            omega: omega(n),
            c_hat: build_constraint_matrix(spec).into_matrix(),
            weight,
            eps2: eps * eps,
        }
    }

    fn residuals(&self, s: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        let so = s * &self.omega;
        let p = &so * s.transpose() - &self.omega;
        let q = (s * s.transpose() - &self.c_hat).component_mul(&self.mask);
        (p, q)
    }

    /// Max-abs symplectic and constraint residuals of S.
    pub(crate) fn raw_residuals(&self, s: &DMatrix<f64>) -> (f64, f64) {
        let (p, q) = self.residuals(s);
        (p.amax(), q.amax())
    }

    pub(crate) fn value(&self, s: &DMatrix<f64>) -> f64 {
        let (p, q) = self.residuals(s);
        let phi = 0.5 * p.norm_squared() + 0.5 * (q.norm_squared() + q.diagonal().norm_squared());
        phi / (2.0 * self.eps2)
    }

    pub(crate) fn gradient(&self, s: &DMatrix<f64>) -> DMatrix<f64> {
        let (p, q) = self.residuals(s);
        let y = q.component_mul(&self.weight);
        (&y * s - &p * s * &self.omega) / self.eps2
    }
}

pub(crate) fn run_chain<R: Rng>(
    pot: &Potential,
    start: DMatrix<f64>,
    step_size: f64,
    trajectory_length: f64,
    burn_in: usize,
    thinning: usize,
    n_samples: usize,
    rng: &mut R,
) -> ChainOutput {
    let dim = start.nrows();
    let mut s = start;
    let mut u_cur = pot.value(&s);
    let mut grad = pot.gradient(&s);
    let mut h = step_size;
    let mut adapt = DualAveraging::new(step_size, TARGET_ACCEPTANCE);
    let mut out = ChainOutput::default();
    let total = burn_in + n_samples * thinning;
    for step in 0..total {
        let jitter: f64 = rng.random_range(0.6..1.4);
        let h_eff = h * jitter;
        let n_leap = ((trajectory_length / h_eff).round() as usize).clamp(1, MAX_LEAPFROG);
        let p0 = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut p = &p0 - &grad * (0.5 * h_eff);
        let mut s_new = s.clone();
        let mut g_new = grad.clone();
        for k in 0..n_leap {
            s_new += &p * h_eff;
            g_new = pot.gradient(&s_new);
            if k + 1 < n_leap {
                p -= &g_new * h_eff;
            }
        }
        p -= &g_new * (0.5 * h_eff);
        let u_new = pot.value(&s_new);
        let log_ratio = u_cur - u_new + 0.5 * (p0.norm_squared() - p.norm_squared());
        let uniform: f64 = rng.random();
        let accepted = log_ratio.is_finite() && uniform.ln() < log_ratio;
        if accepted {
            s = s_new;
            u_cur = u_new;
            grad = g_new;
        }
        if step < burn_in {
            let prob = if log_ratio.is_finite() {
                log_ratio.min(0.0).exp()
            } else {
                0.0
            };
            h = adapt.update(prob);
            if step + 1 == burn_in {
                h = adapt.final_step();
            }
            continue;
        }
        out.proposed += 1;
        out.accepted += accepted as usize;
        if (step - burn_in + 1) % thinning == 0 {
            out.symplectic.push(s.clone());
        }
    }
    out.step_size = h;
    out
}
