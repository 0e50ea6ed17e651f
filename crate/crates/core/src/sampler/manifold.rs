//! Constrained random walk on {F(z) = 0} in Siegel coordinates.
//!
//! Tangent Gaussian proposal, projection back to the manifold along the normal space at the
//! current point, and a reverse-move check so the Metropolis ratio is exact for the target
//! det(Y)^{−(N+1)} / sqrt(det(DF DFᵀ)) with respect to surface measure.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use super::siegel::{Chart, Point};
use super::{ChainOutput, DualAveraging};
use crate::error::{Error, Result};

/// A level set {F(z) = 0} carrying a density with respect to Lebesgue measure in z.
///
/// The walk targets density · δ(F), i.e. density / sqrt(det(DF DFᵀ)) on surface measure.
pub(crate) trait LevelSet {
    type Point: Clone;
    fn dim(&self) -> usize;
    fn point(&self, z: &DVector<f64>) -> Option<Self::Point>;
    fn coords<'a>(&self, p: &'a Self::Point) -> &'a DVector<f64>;
    fn residual(&self, p: &Self::Point) -> DVector<f64>;
    fn jacobian(&self, p: &Self::Point) -> DMatrix<f64>;
    fn log_density(&self, p: &Self::Point) -> f64;
}

impl LevelSet for Chart {
    type Point = Point;

    fn dim(&self) -> usize {
        Chart::dim(self)
    }

    fn point(&self, z: &DVector<f64>) -> Option<Point> {
        Chart::point(self, z)
    }

    fn coords<'a>(&self, p: &'a Point) -> &'a DVector<f64> {
        &p.z
    }

    fn residual(&self, p: &Point) -> DVector<f64> {
        Chart::residual(self, p)
    }

    fn jacobian(&self, p: &Point) -> DMatrix<f64> {
        Chart::jacobian(self, p)
    }

    fn log_density(&self, p: &Point) -> f64 {
        self.log_invariant_density(p)
    }
}

/// Residual accepted by the projection.
pub const PROJECTION_TOL: f64 = 1e-11;
pub const MAX_PROJECTION_ITERS: usize = 60;
/// Tolerance for the reverse projection landing back on the start point.
const REVERSE_TOL: f64 = 1e-8;
/// Relative size of the smallest Cholesky pivot below which the Gram matrix counts as singular.
const RANK_TOL: f64 = 1e-6;
const TARGET_ACCEPTANCE: f64 = 0.35;

struct State<P> {
    pt: P,
    jac: DMatrix<f64>,
    gram: Cholesky<f64, Dyn>,
    log_target: f64,
}

fn state_at<M: LevelSet>(chart: &M, pt: M::Point) -> Option<State<M::Point>> {
    let jac = chart.jacobian(&pt);
    let gram = (&jac * jac.transpose()).cholesky()?;
    let diag = gram.l().diagonal();
    if diag.min() < RANK_TOL * diag.max() {
        return None;
    }
    let log_det_gram = 2.0 * gram.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    if !log_det_gram.is_finite() {
        return None;
    }
    let log_target = chart.log_density(&pt) - 0.5 * log_det_gram;
    Some(State {
        pt,
        jac,
        gram,
        log_target,
    })
}

fn tangent_part<P>(s: &State<P>, w: &DVector<f64>) -> DVector<f64> {
    let coeff = s.gram.solve(&(&s.jac * w));
    w - s.jac.transpose() * coeff
}

/// Solves F(base + Qᵀa) = 0 by simplified Newton with the Gram matrix at the base state.
fn project<M: LevelSet>(chart: &M, s: &State<M::Point>, base: &DVector<f64>) -> Option<M::Point> {
    let qt = s.jac.transpose();
    let mut a = DVector::zeros(s.jac.nrows());
    for _ in 0..MAX_PROJECTION_ITERS {
        let pt = chart.point(&(base + &qt * &a))?;
        let f = chart.residual(&pt);
        let err = f.amax();
        if !err.is_finite() || err > 1e6 {
            return None;
        }
        if err <= PROJECTION_TOL {
            return Some(pt);
        }
        a -= s.gram.solve(&f);
    }
    None
}

/// Runs one chain; `record` maps the current point to whatever the caller stores.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_chain<M: LevelSet, R: Rng, T>(
    chart: &M,
    start: M::Point,
    step_size: f64,
    burn_in: usize,
    thinning: usize,
    n_samples: usize,
    rng: &mut R,
    mut record: impl FnMut(&M::Point) -> T,
) -> Result<(ChainOutput, Vec<T>)> {
    let mut cur = state_at(chart, start).ok_or_else(|| {
        Error::Infeasible("constraint Jacobian is rank deficient on this manifold; use the ambient sampler".into())
    })?;
    let d = chart.dim();
    let mut sigma = step_size;
    let mut adapt = DualAveraging::new(step_size, TARGET_ACCEPTANCE);
    let mut out = ChainOutput::default();
    let mut kept = Vec::with_capacity(n_samples);
    let total = burn_in + n_samples * thinning;
    for step in 0..total {
        let xi = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = tangent_part(&cur, &xi) * sigma;
        let u: f64 = rng.random();
        let (accepted, prob) = match propose(chart, &cur, &v, sigma, u) {
            Proposal::Accept(next, prob) => {
                cur = next;
                (true, prob)
            }
            Proposal::Reject(prob) => (false, prob),
            Proposal::Failed => {
                out.failed += 1;
                (false, 0.0)
            }
        };
        if step < burn_in {
            sigma = adapt.update(prob);
            if step + 1 == burn_in {
                sigma = adapt.final_step();
            }
            continue;
        }
        out.proposed += 1;
        out.accepted += accepted as usize;
        if (step - burn_in + 1) % thinning == 0 {
            kept.push(record(&cur.pt));
        }
    }
    out.step_size = sigma;
    Ok((out, kept))
}

/// Outcomes carry the Metropolis probability for step-size adaptation.
enum Proposal<P> {
    Accept(State<P>, f64),
    Reject(f64),
    Failed,
}

fn propose<M: LevelSet>(chart: &M, cur: &State<M::Point>, v: &DVector<f64>, sigma: f64, u: f64) -> Proposal<M::Point> {
    let Some(y_pt) = project(chart, cur, &(chart.coords(&cur.pt) + v)) else {
        return Proposal::Failed;
    };
    let Some(next) = state_at(chart, y_pt) else {
        return Proposal::Failed;
    };
    let (z_cur, z_next) = (chart.coords(&cur.pt), chart.coords(&next.pt));
    let v_rev = tangent_part(&next, &(z_cur - z_next));
    let log_ratio =
        next.log_target - cur.log_target - (v_rev.norm_squared() - v.norm_squared()) / (2.0 * sigma * sigma);
    let prob = log_ratio.min(0.0).exp();
    if u.ln() >= log_ratio {
        return Proposal::Reject(prob);
    }
    match project(chart, &next, &(z_next + &v_rev)) {
        Some(back) if (chart.coords(&back) - z_cur).amax() <= REVERSE_TOL => Proposal::Accept(next, prob),
        _ => Proposal::Reject(0.0),
    }
}
