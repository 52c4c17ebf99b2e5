use std::collections::HashSet;
use std::path::PathBuf;

use anyhow::Context;
use rayon::prelude::*;
use serde::Serialize;

use sdcam::diagnostics::{rate_bound_check, rate_constants, RateConstants, RateReport, Regime};
use sdcam::solver::{solve, InitialInfo, SolveError, SolveStatus};
use sdcam::{SolverConfig, TraceRow};

use crate::config::{Resolved, RunConfig};
use crate::error::{Classify, CmdResult, Failure, Kind};
use crate::gen::sha256_hex;
use crate::trace::write_trace_file;

#[derive(Debug, Serialize)]
pub struct Summary<'a> {
    pub family: &'static str,
    pub seed: u64,
    pub instance_sha256: String,
    pub config: &'a SolverConfig,
    pub status: SolveStatus,
    pub total_trials: usize,
    pub total_successful: usize,
    pub total_unsuccessful: usize,
    pub initial: InitialInfo,
    #[serde(rename = "final")]
    pub final_row: Option<&'a TraceRow>,
    pub rate_constants: RateConstants,
    /// Present when at least one rate inequality could be evaluated.
    pub rate_bound_check: Option<RateReport>,
    pub rate_violations: Option<usize>,
}

fn classify_solve(e: SolveError) -> Failure {
    let kind = match e {
        SolveError::NonFinite { .. } | SolveError::AssertionFailed { .. } => Kind::Numerical,
        _ => Kind::Usage,
    };
    Failure::new(kind, e)
}

fn execute(r: &Resolved) -> CmdResult<String> {
    let p = r.instance.problem();
    let (x0, y0) = (r.instance.x0(), r.instance.y0());
    log::info!("{}: solving {} (seed {})", r.source.display(), r.instance.family(), r.instance.seed());
    let out = solve(&p, &r.solver, &x0, &y0).map_err(classify_solve)?;
    write_trace_file(&r.trace, &out.trace).usage()?;

    let consts = rate_constants(&p, &r.solver, &out.initial, &out.trace);
    let report = rate_bound_check(&out.trace, &consts, Regime::for_problem(&p));
    let checked = report.inequalities.iter().any(|i| i.is_checked());
    let violations = checked.then(|| report.total_violations());
    let summary = Summary {
        family: r.instance.family(),
        seed: r.instance.seed(),
        instance_sha256: sha256_hex(r.instance.to_json().as_bytes()),
        config: &r.solver,
        status: out.status,
        total_trials: out.total_trials(),
        total_successful: out.trace.len(),
        total_unsuccessful: out.total_unsuccessful(),
        initial: out.initial,
        final_row: out.trace.last(),
        rate_constants: consts,
        rate_bound_check: checked.then_some(report),
        rate_violations: violations,
    };
    let json = serde_json::to_string_pretty(&summary).context("serializing summary").usage()?;
    std::fs::write(&r.summary, json + "\n")
        .with_context(|| format!("writing {}", r.summary.display()))
        .usage()?;

    let last = out.trace.last();
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3e}"));
    Ok(format!(
        "{}: {:?} rows={} trials={} scaled_step={} gap={} rel_feas={} rate_violations={}",
        r.trace.display(),
        out.status,
        out.trace.len(),
        out.total_trials(),
        fmt(last.map(|r| r.scaled_step)),
        fmt(last.map(|r| r.gap)),
        fmt(last.and_then(|r| r.rel_feas)),
        violations.map_or("-".to_string(), |v| v.to_string()),
    ))
}

/// Runs every config; with more than one they share a worker pool. All
/// configs are validated before any solve starts.
pub fn cmd_run(configs: &[PathBuf]) -> CmdResult {
    let mut resolved = Vec::with_capacity(configs.len());
    for c in configs {
        resolved.push(RunConfig::load(c).usage()?);
    }
    let mut seen = HashSet::new();
    for r in &resolved {
        for p in [&r.trace, &r.summary] {
            if !seen.insert(p.clone()) {
                return Err(Failure::usage(format!("output path {} is used twice", p.display())));
            }
        }
    }
    let results: Vec<CmdResult<String>> = if resolved.len() == 1 {
        vec![execute(&resolved[0])]
    } else {
        resolved.par_iter().map(execute).collect()
    };
    let mut worst: Option<Failure> = None;
    for (r, res) in resolved.iter().zip(results) {
        match res {
            Ok(line) => println!("{line}"),
            Err(f) => {
                if configs.len() > 1 {
                    eprintln!("error: {}: {:#}", r.source.display(), f.error);
                }
                if worst.as_ref().is_none_or(|w| f.kind > w.kind) {
                    worst = Some(f);
                }
            }
        }
    }
    match worst {
        None => Ok(()),
        Some(f) if configs.len() == 1 => Err(f),
        Some(f) => Err(Failure::new(f.kind, anyhow::anyhow!("some runs failed"))),
    }
}
