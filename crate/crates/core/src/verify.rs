//! Identity-verification suites: each identity is computed by two independent routes and the
//! worst discrepancy over a parameter sweep is compared with a tolerance.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::{entropy_single, renyi_trace_continued, renyi_trace_mixed, renyi_trace_single};
use crate::constraints::{ConstraintSpec, Scenario};
use crate::error::{Error, Result};
use crate::fock::{self, purity_by_quadrature, thermal_state, trace_power};
use crate::replica::{
    self, closed_form_product, delta_j, delta_j_direct, delta_j_intermediate, j_geometric_identity_check,
    master_determinant, master_determinant_general, prefactor_integral, prefactor_monte_carlo, toeplitz_cofactor,
    toeplitz_cofactor_direct, ReplicaProblem, SaddleCheck,
};
use crate::symplectic::{covariance_from_symplectic, random_symplectic, restrict, symplectic_spectrum, ModeSubset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    All,
    Replica,
    Saddle,
    Fock,
    Analytic,
}

impl Suite {
    fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::All => "all",
            Suite::Replica => "replica",
            Suite::Saddle => "saddle",
            Suite::Fock => "fock",
            Suite::Analytic => "analytic",
        };
        f.write_str(s)
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Suite::All),
            "replica" => Ok(Suite::Replica),
            "saddle" => Ok(Suite::Saddle),
            "fock" => Ok(Suite::Fock),
            "analytic" => Ok(Suite::Analytic),
            _ => Err(Error::Config(format!("unknown suite '{s}'"))),
        }
    }
}

/// How `residual` is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Relative,
    Absolute,
    /// |estimate − exact| in units of the Monte Carlo standard error.
    Sigma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Overrides keyed by identity name.
    pub tolerances: BTreeMap<String, f64>,
    pub prefactor_samples: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            tolerances: BTreeMap::new(),
            prefactor_samples: 1_000_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityResult {
    pub name: String,
    pub suite: Suite,
    pub description: String,
    pub metric: Metric,
    pub residual: f64,
    pub tolerance: f64,
    pub cases: usize,
    /// Parameters of the case that produced `residual`.
    pub worst_case: String,
    pub passed: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub passed: bool,
    pub results: Vec<IdentityResult>,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &IdentityResult> {
        self.results.iter().filter(|r| !r.passed)
    }
}

/// Running maximum of a residual over a sweep.
#[derive(Debug, Default)]
struct Sweep {
    worst: f64,
    case: String,
    cases: usize,
}

impl Sweep {
    fn add(&mut self, residual: f64, case: impl FnOnce() -> String) {
        self.cases += 1;
        // NaN must surface as a failure, so it always replaces the current worst.
        if residual.is_nan() || !(residual <= self.worst) {
            self.worst = residual;
            self.case = case();
        }
    }
}

struct Identity {
    name: &'static str,
    suite: Suite,
    description: &'static str,
    metric: Metric,
    tolerance: f64,
    run: fn(&VerifyOptions) -> Result<Sweep>,
}

const REPLICA_MUS: [f64; 5] = [1.0 + 1e-6, 1.5, 2.0, 5.0, 10.0];
const REPLICA_ORDERS: std::ops::RangeInclusive<usize> = 2..=8;

const IDENTITIES: &[Identity] = &[
    Identity {
        name: "replica.master_determinant",
        suite: Suite::Replica,
        description: "replica-space determinant vs product of single-mode Rényi traces",
        metric: Metric::Relative,
        tolerance: 1e-9,
        run: master_identity,
    },
    Identity {
        name: "replica.master_determinant_anisotropic",
        suite: Suite::Replica,
        description: "determinant for random correlated C_A vs closed form at its symplectic eigenvalues",
        metric: Metric::Relative,
        tolerance: 1e-9,
        run: master_anisotropic,
    },
    Identity {
        name: "replica.toeplitz_cofactor",
        suite: Suite::Replica,
        description: "tridiagonal cofactor closed form vs direct determinant",
        metric: Metric::Relative,
        tolerance: 1e-10,
        run: toeplitz_identity,
    },
    Identity {
        name: "replica.delta_j_reduction",
        suite: Suite::Replica,
        description: "Δ_j final form vs intermediate form built from the cofactor",
        metric: Metric::Relative,
        tolerance: 1e-10,
        run: delta_j_identity,
    },
    Identity {
        name: "replica.delta_j_direct",
        suite: Suite::Replica,
        description: "Δ_j final form vs explicit block determinant",
        metric: Metric::Relative,
        tolerance: 1e-9,
        run: delta_j_direct_identity,
    },
    Identity {
        name: "replica.shift_geometric_series",
        suite: Suite::Replica,
        description: "geometric series in the antiperiodic shift vs its closed form",
        metric: Metric::Absolute,
        tolerance: 1e-12,
        run: shift_identity,
    },
    Identity {
        name: "replica.radial_prefactor",
        suite: Suite::Replica,
        description: "Monte Carlo radial integral ratio vs (N-N_A-1)!/(N-1)!",
        metric: Metric::Sigma,
        tolerance: 3.0,
        run: prefactor_identity,
    },
    Identity {
        name: "saddle.equations",
        suite: Suite::Saddle,
        description: "stationarity residuals of the multiplier saddle at eps = 0",
        metric: Metric::Absolute,
        tolerance: 1e-10,
        run: saddle_equations,
    },
    Identity {
        name: "saddle.a_tilde_limit",
        suite: Suite::Saddle,
        description: "relative deviation of the rescaled saddle from (2/N) C_hat at eps = 1e-8",
        metric: Metric::Relative,
        tolerance: 1e-7,
        run: saddle_a_tilde,
    },
    Identity {
        name: "fock.thermal_trace_power",
        suite: Suite::Fock,
        description: "Tr ρ^x of a truncated thermal density matrix vs closed form",
        metric: Metric::Absolute,
        tolerance: 1e-8,
        run: fock_thermal,
    },
    Identity {
        name: "fock.quadrature_purity",
        suite: Suite::Fock,
        description: "phase-space integral of χ² vs det(C_A)^(-1/2) on random 1-2 mode marginals",
        metric: Metric::Absolute,
        tolerance: 1e-6,
        run: fock_quadrature,
    },
    Identity {
        name: "fock.displacement_group_law",
        suite: Suite::Fock,
        description: "D(r)D(s) vs phase times D(r+s) on the low-photon block",
        metric: Metric::Absolute,
        tolerance: 1e-6,
        run: fock_group_law,
    },
    Identity {
        name: "fock.characteristic_function",
        suite: Suite::Fock,
        description: "Tr[ρ D(r)] in Fock space vs exp(-rᵀCr/4)",
        metric: Metric::Absolute,
        tolerance: 1e-6,
        run: fock_characteristic,
    },
    Identity {
        name: "analytic.entropy_continuation",
        suite: Suite::Analytic,
        description: "central difference of the continued Rényi trace at x = 1 vs entropy closed form",
        metric: Metric::Absolute,
        tolerance: 1e-6,
        run: entropy_continuation,
    },
    Identity {
        name: "analytic.mixed_purity",
        suite: Suite::Analytic,
        description: "purity via symplectic spectrum vs det(C_A)^(-1/2)",
        metric: Metric::Relative,
        tolerance: 1e-10,
        run: mixed_purity,
    },
];

/// Names of all identities with their default tolerances.
pub fn default_tolerances() -> BTreeMap<String, f64> {
    IDENTITIES.iter().map(|i| (i.name.to_string(), i.tolerance)).collect()
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> Result<VerifyReport> {
    for (key, tol) in &opts.tolerances {
        if !IDENTITIES.iter().any(|i| i.name == key) {
            return Err(Error::Config(format!("unknown identity '{key}' in tolerance override")));
        }
        if !(tol.is_finite() && *tol >= 0.0) {
            return Err(Error::Config(format!(
                "tolerance for '{key}' must be finite and non-negative, got {tol}"
            )));
        }
    }
    let mut results = Vec::new();
    for id in IDENTITIES.iter().filter(|i| suite.includes(i.suite)) {
        let tolerance = opts.tolerances.get(id.name).copied().unwrap_or(id.tolerance);
        log::info!("verifying {}", id.name);
        let (residual, cases, worst_case, error) = match (id.run)(opts) {
            Ok(s) => (s.worst, s.cases, s.case, None),
            Err(e) => (f64::NAN, 0, String::new(), Some(e.to_string())),
        };
        results.push(IdentityResult {
            name: id.name.to_string(),
            suite: id.suite,
            description: id.description.to_string(),
            metric: id.metric,
            residual,
            tolerance,
            cases,
            worst_case,
            passed: error.is_none() && residual <= tolerance,
            error,
        });
    }
    Ok(VerifyReport {
        suite,
        passed: results.iter().all(|r| r.passed),
        results,
    })
}

fn master_identity(_: &VerifyOptions) -> Result<Sweep> {
    let mut sweep = Sweep::default();
    for n_a in 1..=3 {
        for (k, &mu) in REPLICA_MUS.iter().enumerate() {
            let uniform = vec![mu; n_a];
            let mixed: Vec<f64> = (0..n_a).map(|m| REPLICA_MUS[(k + 2 * m) % REPLICA_MUS.len()]).collect();
            for mus in [uniform, mixed] {
                for x in REPLICA_ORDERS {
                    let got = master_determinant(&ReplicaProblem::from_mus(x, &mus)?)?;
                    let want = closed_form_product(&mus, x)?;
                    sweep.add(replica::rel_err(got, want), || format!("mus={mus:?} x={x}"));
                }
            }
        }
    }
    Ok(sweep)
}

fn master_anisotropic(opts: &VerifyOptions) -> Result<Sweep> {
    let mut sweep = Sweep::default();
    for k in 0..12 {
        let n_a = 1 + k % 2;
        let s = random_symplectic(n_a + 2, 0.6, opts.seed.wrapping_add(k as u64))?;
        let c_a = restrict(&covariance_from_symplectic(&s), &ModeSubset::first(n_a + 2, n_a)?)?;
        let nus = symplectic_spectrum(&c_a)?.values;
        for x in 2..=5 {
            let got = master_determinant_general(&c_a, x)?;
            let want = closed_form_product(&nus, x)?;
            sweep.add(replica::rel_err(got, want), || format!("state={k} n_a={n_a} x={x}"));
        }
    }
    Ok(sweep)
}

fn toeplitz_identity(_: &VerifyOptions) -> Result<Sweep> {
    let mut sweep = Sweep::default();
    for &mu in &REPLICA_MUS {
        for x in REPLICA_ORDERS {
            let err = replica::rel_err(toeplitz_cofactor(mu, x)?, toeplitz_cofactor_direct(mu, x)?);
            sweep.add(err, || format!("mu={mu} x={x}"));
        }
    }
    Ok(sweep)
}

fn delta_j_identity(_: &VerifyOptions) -> Result<Sweep> {
    let mut sweep = Sweep::default();
    for &mu in &REPLICA_MUS {
        for x in REPLICA_ORDERS {
            let err = replica::rel_err(delta_j(mu, x)?, delta_j_intermediate(mu, x)?);
            sweep.add(err, || format!("mu={mu} x={x}"));
        }
    }
    Ok(sweep)
}

fn delta_j_direct_identity(_: &VerifyOptions) -> Result<Sweep> {
    let mut sweep = Sweep::default();
    for &mu in &REPLICA_MUS {
        for x in REPLICA_ORDERS {
            let err = replica::rel_err(delta_j(mu, x)?, delta_j_direct(mu, x)?);
            sweep.add(err, || format!("mu={mu} x={x}"));
        }
    }
    Ok(sweep)
}

fn shift_identity(_: &VerifyOptions) -> Result<Sweep> {
    let mut sweep = Sweep::default();
    for x in 2..=12 {
        sweep.add(j_geometric_identity_check(x)?, || format!("x={x}"));
    }
    Ok(sweep)
}

fn prefactor_identity(opts: &VerifyOptions) -> Result<Sweep> {
    let mut sweep = Sweep::default();
    for (k, (n, n_a)) in [(4, 1), (4, 2), (6, 2)].into_iter().enumerate() {
        let est = prefactor_monte_carlo(n, n_a, opts.prefactor_samples, opts.seed.wrapping_add(k as u64))?;
        let exact = prefactor_integral(n, n_a)?.value;
        let z = (est.mean - exact).abs() / est.stderr;
        sweep.add(z, || {
            format!(
                "N={n} N_A={n_a} estimate={:.6}±{:.2e} exact={exact:.6}",
                est.mean, est.stderr
            )
        });
    }
    Ok(sweep)
}

/// Seeded Scenario I and II specs with N ≤ 8 and λ ∈ [1.05, 6].
fn random_specs(seed: u64) -> Result<Vec<ConstraintSpec>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut specs = Vec::new();
    for n in 1..=8 {
        let lambdas: Vec<f64> = (0..n).map(|_| rng.random_range(1.05..6.0)).collect();
        specs.push(ConstraintSpec::scenario_one(&lambdas)?);
        let mut windows: Vec<Vec<f64>> = Vec::new();
        for l in lambdas {
            match windows.last_mut() {
                Some(w) if rng.random_bool(0.5) => w.push(l),
                _ => windows.push(vec![l]),
            }
        }
        specs.push(ConstraintSpec::new(Scenario::II, windows)?);
    }
    Ok(specs)
}

const SADDLE_EPS: f64 = 1e-8;

fn saddle_equations(opts: &VerifyOptions) -> Result<Sweep> {
    let mut sweep = Sweep::default();
    for spec in random_specs(opts.seed)? {
        let chk = SaddleCheck::run(&spec, SADDLE_EPS)?;
        let r = chk.form_residual.max(chk.marginal_residual);
        sweep.add(r, || format!("{:?} windows={:?}", spec.scenario(), spec.windows()));
    }
    Ok(sweep)
}

fn saddle_a_tilde(opts: &VerifyOptions) -> Result<Sweep> {
    let mut sweep = Sweep::default();
    for spec in random_specs(opts.seed)? {
        let chk = SaddleCheck::run(&spec, SADDLE_EPS)?;
        sweep.add(chk.a_tilde_deviation, || {
            format!("{:?} windows={:?}", spec.scenario(), spec.windows())
        });
    }
    Ok(sweep)
}

const FOCK_LAMBDAS: [f64; 5] = [1.0, 1.5, 2.0, 3.0, 5.0];

fn fock_thermal(_: &VerifyOptions) -> Result<Sweep> {
    let mut sweep = Sweep::default();
    for &lambda in &FOCK_LAMBDAS {
        let rho = thermal_state(lambda, None)?;
        for x in 2..=6 {
            let err = (trace_power(&rho, x)? - renyi_trace_single(lambda, x)?).abs();
            sweep.add(err, || format!("lambda={lambda} x={x}"));
        }
    }
    Ok(sweep)
}

fn fock_quadrature(opts: &VerifyOptions) -> Result<Sweep> {
    let mut sweep = Sweep::default();
    for k in 0..20u64 {
        let n_a = 1 + (k % 2) as usize;
        let s = random_symplectic(3, 0.4, opts.seed.wrapping_add(100 + k))?;
        let c_a = restrict(&covariance_from_symplectic(&s), &ModeSubset::first(3, n_a)?)?;
        let exact = c_a.matrix().determinant().powf(-0.5);
        let quad = purity_by_quadrature(&c_a, 1e-8)?;
        sweep.add((quad.value - exact).abs(), || {
            format!("state={k} n_a={n_a} exact={exact:.8}")
        });
    }
    Ok(sweep)
}

fn fock_group_law(_: &VerifyOptions) -> Result<Sweep> {
    let mut sweep = Sweep::default();
    let pairs = [
        (Vector2::new(0.3, -0.2), Vector2::new(-0.1, 0.4)),
        (Vector2::new(0.5, 0.1), Vector2::new(0.2, -0.3)),
        (Vector2::new(-0.2, -0.4), Vector2::new(0.35, 0.15)),
    ];
    for (r, s) in pairs {
        let res = fock::group_law_residual(&r, &s, 40, 10, -1.0);
        sweep.add(res, || format!("r={:?} s={:?}", r.as_slice(), s.as_slice()));
    }
    Ok(sweep)
}

fn fock_characteristic(_: &VerifyOptions) -> Result<Sweep> {
    let mut sweep = Sweep::default();
    for &lambda in &FOCK_LAMBDAS {
        // The displacement needs room above the occupied levels, even for the vacuum.
        let rho = thermal_state(lambda, Some(fock::required_cutoff(lambda).max(60)))?;
        let c = crate::symplectic::CovarianceMatrix::new(nalgebra::DMatrix::identity(2, 2) * lambda)?;
        for r in [Vector2::new(0.5, 0.2), Vector2::new(-0.3, 1.0), Vector2::new(0.0, -0.7)] {
            let got = fock::characteristic_function_fock(&rho, &r);
            let want = fock::characteristic_function(&c, r.as_slice())?;
            let err = (got - num_complex::Complex64::new(want, 0.0)).norm();
            sweep.add(err, || format!("lambda={lambda} r={:?}", r.as_slice()));
        }
    }
    Ok(sweep)
}

fn entropy_continuation(_: &VerifyOptions) -> Result<Sweep> {
    let mut sweep = Sweep::default();
    let h = 1e-5;
    for lambda in [1.1, 2.0, 3.0, 10.0] {
        let fd = -(renyi_trace_continued(lambda, 1.0 + h)? - renyi_trace_continued(lambda, 1.0 - h)?) / (2.0 * h);
        let err = (fd - entropy_single(lambda)?).abs();
        sweep.add(err, || format!("lambda={lambda}"));
    }
    Ok(sweep)
}

fn mixed_purity(opts: &VerifyOptions) -> Result<Sweep> {
    let mut sweep = Sweep::default();
    for k in 0..20u64 {
        let n_a = 1 + (k % 3) as usize;
        let s = random_symplectic(4, 0.8, opts.seed.wrapping_add(200 + k))?;
        let c_a = restrict(&covariance_from_symplectic(&s), &ModeSubset::first(4, n_a)?)?;
        let exact = c_a.matrix().determinant().powf(-0.5);
        sweep.add(replica::rel_err(renyi_trace_mixed(&c_a, 2)?, exact), || {
            format!("state={k} n_a={n_a}")
        });
    }
    Ok(sweep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast() -> VerifyOptions {
        VerifyOptions {
            prefactor_samples: 20_000,
            ..VerifyOptions::default()
        }
    }

    #[test]
    fn identity_names_are_unique_and_suites_cover_all() {
        let names = default_tolerances();
        assert_eq!(names.len(), IDENTITIES.len());
        for suite in [Suite::Replica, Suite::Saddle, Suite::Fock, Suite::Analytic] {
            assert!(IDENTITIES.iter().any(|i| i.suite == suite), "{suite}");
            assert_eq!(suite.to_string().parse::<Suite>().unwrap(), suite);
        }
    }

    #[test]
    fn analytic_suite_passes() {
        let report = run_suite(Suite::Analytic, &fast()).unwrap();
        assert!(report.passed, "{report:#?}");
        assert!(report.results.iter().all(|r| r.suite == Suite::Analytic && r.cases > 0));
    }

    #[test]
    fn tight_tolerance_fails_with_listing() {
        let mut opts = fast();
        opts.tolerances.insert("analytic.entropy_continuation".into(), 1e-15);
        let report = run_suite(Suite::Analytic, &opts).unwrap();
        assert!(!report.passed);
        let failed: Vec<_> = report.failures().collect();
        assert_eq!(failed.len(), 1);
        assert!(failed[0].residual > 1e-15 && !failed[0].worst_case.is_empty());
    }

    #[test]
    fn unknown_override_is_a_config_error() {
        let mut opts = fast();
        opts.tolerances.insert("replica.nope".into(), 1.0);
        assert!(matches!(run_suite(Suite::All, &opts), Err(Error::Config(_))));
    }
}
