use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::Path;

use anyhow::{anyhow, bail, Result};
use gaussmarg::analytic::{self, page_csv};
use gaussmarg::constants::solar_to_planck;
use gaussmarg::constraints::{
    hawking_constraints, hawking_mode_count, ConstraintFile, HawkingModel, HawkingPreset, LambdaPrescription,
};
use gaussmarg::sampler::{
    estimate_observables, mode_pair_correlation, sample_ambient, sample_manifold, write_batch, Method, SamplerFile,
    StatisticsTable,
};
use gaussmarg::symplectic::ModeSubset;
use gaussmarg::verify::{run_suite, Suite, VerifyOptions};

use crate::manifest::Run;
use crate::{HawkingArgs, PageSlopeArgs, PrescriptionArg, SampleArgs, SuiteArg, VerifyArgs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// Bad input that should exit with the usage code.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct Usage(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

pub fn exit_code_for(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<Usage>() || cause.is::<std::io::Error>() {
            return EXIT_USAGE;
        }
        if let Some(err) = cause.downcast_ref::<gaussmarg::Error>() {
            use gaussmarg::Error::*;
            return match err {
                Config(_) | InvalidParameter(_) | Unphysical(_) | Infeasible(_) | Dimension(_) | Io(_) | Json(_) => {
                    EXIT_USAGE
                }
                _ => EXIT_FAILED,
            };
        }
    }
    EXIT_FAILED
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

pub fn verify(args: &VerifyArgs, out_dir: &Path) -> Result<u8> {
    let suite = match args.suite {
        SuiteArg::All => Suite::All,
        SuiteArg::Replica => Suite::Replica,
        SuiteArg::Saddle => Suite::Saddle,
        SuiteArg::Fock => Suite::Fock,
        SuiteArg::Analytic => Suite::Analytic,
    };
    let mut opts = VerifyOptions {
        prefactor_samples: args.prefactor_samples,
        seed: args.seed,
        ..VerifyOptions::default()
    };
    for t in &args.tolerances {
        let (name, value) = t
            .split_once('=')
            .ok_or_else(|| usage(format!("tolerance '{t}' is not NAME=VALUE")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| usage(format!("tolerance '{t}' has a non-numeric value")))?;
        opts.tolerances.insert(name.trim().to_string(), value);
    }
    let mut run = Run::start(
        "verify",
        out_dir,
        None,
        &serde_json::to_vec(&(suite, &opts))?,
        Some(args.seed),
    )?;
    let report = run_suite(suite, &opts)?;
    for r in &report.results {
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!(
            "[{status}] {:<40} residual {:.3e} <= {:.1e} ({} cases)",
            r.name, r.residual, r.tolerance, r.cases
        );
        if !r.passed {
            match &r.error {
                Some(e) => println!("       error: {e}"),
                None => println!("       worst case: {}", r.worst_case),
            }
        }
    }
    run.write(
        "verify_report.json",
        (serde_json::to_string_pretty(&report)? + "\n").as_bytes(),
    )?;
    run.finish()?;
    let failed = report.failures().count();
    println!(
        "{} of {} identities passed",
        report.results.len() - failed,
        report.results.len()
    );
    Ok(if report.passed { EXIT_OK } else { EXIT_FAILED })
}

fn stats_header() -> String {
    "observable,x,epsilon,mean,stderr,ess,n\n".to_string()
}

fn push_table(out: &mut String, table: &StatisticsTable, epsilon: Option<f64>) {
    let eps = epsilon.map(|e| e.to_string()).unwrap_or_default();
    for r in &table.rows {
        let x = r.x.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{x},{eps},{},{},{},{}",
            r.observable, r.mean, r.stderr, r.ess, r.n
        );
    }
}

pub fn sample(args: &SampleArgs, out_dir: &Path) -> Result<u8> {
    let bytes = read_input(&args.config)?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| usage("config is not UTF-8"))?;
    let file = SamplerFile::parse(&text)?;
    let config = file.to_config()?;
    let n = config.spec.n_modes();
    let subsystem = ModeSubset::new(n, file.observables.subsystem.clone())?;
    let windows = config.spec.window_of_mode();
    for &[i, j] in &file.observables.pairs {
        if i == j || i >= n || j >= n || windows[i] == windows[j] {
            bail!(usage(format!(
                "pair ({i}, {j}) is not a pair of modes in different windows"
            )));
        }
    }
    let mut run = Run::start("sample", out_dir, Some(&args.config), &bytes, Some(config.seed))?;
    let orders = &file.observables.orders;
    let mut csv = stats_header();
    match config.method {
        Method::ManifoldWalk => {
            let batch = sample_manifold(&config)?;
            for p in write_batch(run.out_dir(), "batch", &batch)? {
                run.record(p);
            }
            let table = estimate_observables(&batch, &subsystem, orders)?;
            push_table(&mut csv, &table, None);
            for &[i, j] in &file.observables.pairs {
                let s = mode_pair_correlation(&batch, i, j)?;
                let _ = writeln!(csv, "pair_norm[{i}+{j}],,,{},{},{},{}", s.mean, s.stderr, s.ess, s.n);
            }
            println!(
                "{} samples, acceptance {:.3}, max constraint residual {:.2e}",
                batch.len(),
                batch.metadata.acceptance_rate,
                batch.max_constraint_residual()
            );
        }
        Method::AmbientSoft => {
            let amb = sample_ambient(&config)?;
            for (k, batch) in amb.batches.iter().enumerate() {
                for p in write_batch(run.out_dir(), &format!("batch_eps{k}"), batch)? {
                    run.record(p);
                }
            }
            let (tables, extrapolated) = amb.estimate_observables(&subsystem, orders)?;
            for (batch, table) in amb.batches.iter().zip(&tables) {
                push_table(&mut csv, table, batch.metadata.epsilon);
            }
            push_table(&mut csv, &extrapolated, Some(0.0));
            for &[i, j] in &file.observables.pairs {
                for batch in &amb.batches {
                    let s = mode_pair_correlation(batch, i, j)?;
                    let eps = batch.metadata.epsilon.unwrap_or_default();
                    let _ = writeln!(
                        csv,
                        "pair_norm[{i}+{j}],,{eps},{},{},{},{}",
                        s.mean, s.stderr, s.ess, s.n
                    );
                }
                let e = amb.pair_correlation(i, j)?;
                let _ = writeln!(csv, "pair_norm[{i}+{j}],,0,{},{},{},{}", e.mean, e.stderr, e.ess, e.n);
            }
            for b in &amb.batches {
                println!(
                    "eps {}: {} samples, acceptance {:.3}, discarded {}",
                    b.metadata.epsilon.unwrap_or_default(),
                    b.len(),
                    b.metadata.acceptance_rate,
                    b.metadata.discarded
                );
            }
        }
    }
    let path = run.write("statistics.csv", csv.as_bytes())?;
    run.finish()?;
    println!("statistics written to {}", path.display());
    Ok(EXIT_OK)
}

pub fn page_slope(args: &PageSlopeArgs, out_dir: &Path) -> Result<u8> {
    let bytes = read_input(&args.spec)?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| usage("spec is not UTF-8"))?;
    let spec = ConstraintFile::parse(&text)?.to_spec()?;
    let ordering = args.ordering.clone().unwrap_or_else(|| (0..spec.n_modes()).collect());
    let curve = analytic::page_slope(&spec, &ordering)?;
    let mut run = Run::start("page_slope", out_dir, Some(&args.spec), &bytes, None)?;
    let path = run.write(&args.out, page_csv(&curve).as_bytes())?;
    run.finish()?;
    if let [_, (_, s1), ..] = curve.as_slice() {
        println!("initial slope {s1:.12} nats per mode");
    }
    println!("{} rows written to {}", curve.len(), path.display());
    Ok(EXIT_OK)
}

fn parse_range(s: &str) -> Result<Range<usize>> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| usage(format!("window range '{s}' is not a..b")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|_| usage(format!("bad window bound in '{s}'")))
    };
    Ok(parse(a)?..parse(b)?)
}

pub fn hawking(args: &HawkingArgs, out_dir: &Path) -> Result<u8> {
    let mass = match (args.mass, args.mass_planck) {
        (Some(m), None) => {
            if !(m > 0.0 && m.is_finite()) {
                bail!(usage(format!("mass must be positive, got {m}")));
            }
            solar_to_planck(m)
        }
        (None, Some(m)) => m,
        _ => return Err(anyhow!(usage("give exactly one of --mass and --mass-planck"))),
    };
    let prescription = match args.prescription {
        PrescriptionArg::Exp => LambdaPrescription::Exp,
        PrescriptionArg::Coth => LambdaPrescription::Coth,
    };
    let model = HawkingModel::new(mass, args.k)?.with_prescription(prescription);
    let count = hawking_mode_count(&model);
    let n_windows = model.n_windows();
    let range = match &args.windows {
        Some(s) => parse_range(s)?,
        None => 0..n_windows,
    };
    if range.is_empty() || range.end > n_windows {
        bail!(usage(format!(
            "window range {range:?} must be non-empty and end at most at {n_windows}"
        )));
    }
    // Summing window sizes one by one is itself infeasible for astrophysical masses.
    let materialized = if range.len() > args.mode_cap {
        None
    } else {
        Some(model.materialized_modes(range.clone()))
    };
    let args_json = serde_json::json!({
        "mass_in_planck_units": mass,
        "k": args.k,
        "window_range": [range.start, range.end],
        "prescription": prescription,
        "count_only": args.count_only,
        "mode_cap": args.mode_cap,
    });
    let mut run = Run::start("hawking", out_dir, None, &serde_json::to_vec(&args_json)?, None)?;
    // n_windows saturates for astrophysical masses, so report the float count.
    let window_count = (mass / args.k).ceil();
    println!("mass {mass:.6e} Planck masses, {window_count:.6e} windows");
    println!("total mode count {count:.6e}");
    let report = serde_json::json!({
        "mass_in_planck_units": mass,
        "k": args.k,
        "n_windows": window_count,
        "mode_count": count,
        "window_range": [range.start, range.end],
        "materialized_modes": materialized,
    });
    run.write(
        "hawking_report.json",
        (serde_json::to_string_pretty(&report)? + "\n").as_bytes(),
    )?;
    if args.count_only {
        run.finish()?;
        return Ok(EXIT_OK);
    }
    let modes = match materialized {
        Some(m) if m <= args.mode_cap => m,
        _ => {
            run.finish()?;
            bail!(usage(format!(
                "windows {range:?} exceed the mode cap of {}; total mode count {count:.6e} (use --count-only or --windows)",
                args.mode_cap
            )));
        }
    };
    let spec = hawking_constraints(&model, range.clone())?;
    let preset = HawkingPreset {
        mass_in_planck_units: mass,
        k: args.k,
        window_range: [range.start, range.end],
        prescription,
    };
    let file = ConstraintFile::from_spec(&spec, Some(preset));
    let path = run.write(&args.out, file.to_toml().as_bytes())?;
    run.finish()?;
    println!("{modes} modes in windows {range:?} written to {}", path.display());
    Ok(EXIT_OK)
}
