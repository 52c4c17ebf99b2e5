//! JSON run configuration.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde::Deserialize;
use serde_json::Value;

use sdcam::problems::{mimo, mlp, qcqp, Instance};
use sdcam::solver::AssertLevel;
use sdcam::{ScheduleFamily, ScheduleSpec, SolverConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Successful-iteration budget when the config gives none.
pub const DEFAULT_MAX_ITERS: usize = 3000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Qcqp,
    Mimo,
    Mlp,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub problem: ProblemSection,
    /// Generator seed; only valid together with `problem.family`.
    pub seed: Option<u64>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub assert_level: AssertLevel,
    pub output: OutputSection,
}

/// Either a family with generator parameters or an instance file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub family: Option<Family>,
    pub params: Option<Value>,
    pub instance: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub mu_max: Option<f64>,
    pub mu_init: Option<f64>,
    pub rho: Option<f64>,
    pub eta: Option<f64>,
    pub max_iters: Option<usize>,
    pub max_total_trials: Option<usize>,
    pub stop_residual: Option<f64>,
    pub stop_gap: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub family: Option<ScheduleFamily>,
    pub beta0: Option<f64>,
    pub delta: Option<f64>,
    pub k: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub trace: PathBuf,
    /// Defaults to the trace path with extension `summary.json`.
    pub summary: Option<PathBuf>,
}

/// A validated config with its instance materialized.
#[derive(Debug)]
pub struct Resolved {
    pub source: PathBuf,
    pub instance: Instance,
    pub solver: SolverConfig,
    pub trace: PathBuf,
    pub summary: PathBuf,
}

/// Default `beta0` per family. The MLP value is tuned for the synthetic
/// 20-8-4-1 network; much smaller values stall at the zero network.
pub fn default_beta0(family: Family) -> f64 {
    match family {
        Family::Qcqp | Family::Mimo => 1.0,
        Family::Mlp => 0.1,
    }
}

fn family_of(inst: &Instance) -> Family {
    match inst {
        Instance::Qcqp(_) => Family::Qcqp,
        Instance::Mimo(_) => Family::Mimo,
        Instance::Mlp(_) => Family::Mlp,
    }
}

fn base_config(family: Family, beta0: f64, iters: usize) -> SolverConfig {
    match family {
        Family::Qcqp => qcqp::default_config(beta0, iters),
        Family::Mimo => mimo::default_config(beta0, iters),
        Family::Mlp => mlp::default_config(beta0, iters),
    }
}

fn params<T: serde::de::DeserializeOwned + Default>(v: &Option<Value>) -> anyhow::Result<T> {
    match v {
        None => Ok(T::default()),
        Some(v) => serde_json::from_value(v.clone()).context("problem.params"),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let raw: Value = serde_json::from_str(text).context("config is not valid JSON")?;
        match raw.get("schema_version").and_then(Value::as_u64) {
            Some(v) if v == SCHEMA_VERSION as u64 => {}
            Some(v) => bail!("unsupported schema_version {v} (expected {SCHEMA_VERSION})"),
            None => bail!("schema_version missing (expected {SCHEMA_VERSION})"),
        }
        serde_json::from_value(raw).context("invalid config")
    }

    /// Reads, validates and resolves `path`. Relative paths inside the config
    /// are taken relative to its directory.
    pub fn load(path: &Path) -> anyhow::Result<Resolved> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg = Self::parse(&text).with_context(|| path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(path, base)
    }

    pub fn resolve(self, source: &Path, base: &Path) -> anyhow::Result<Resolved> {
        if self.schema_version != SCHEMA_VERSION {
            bail!("unsupported schema_version {}", self.schema_version);
        }
        let join = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let p = &self.problem;
        let instance = match (&p.family, &p.instance) {
            (Some(_), Some(_)) => bail!("problem: give either family or instance, not both"),
            (None, None) => bail!("problem: one of family or instance is required"),
            (None, Some(file)) => {
                if self.seed.is_some() || p.params.is_some() {
                    bail!("seed and problem.params apply only to generated problems");
                }
                Instance::read(join(file))?
            }
            (Some(fam), None) => {
                let seed = self.seed.unwrap_or(0);
                match fam {
                    Family::Qcqp => Instance::Qcqp(qcqp::QcqpInstance::generate(seed, &params(&p.params)?)?),
                    Family::Mimo => Instance::Mimo(mimo::MimoInstance::generate(seed, &params(&p.params)?)?),
                    Family::Mlp => Instance::Mlp(mlp::MlpInstance::generate(seed, &params(&p.params)?)?),
                }
            }
        };
        let family = family_of(&instance);

        let s = &self.solver;
        let iters = s.max_iters.unwrap_or(DEFAULT_MAX_ITERS);
        let mut solver = base_config(family, default_beta0(family), iters);
        let sc = &self.schedule;
        let spec = ScheduleSpec {
            family: sc.family.unwrap_or(solver.schedule.family),
            beta0: sc.beta0.unwrap_or(solver.schedule.beta0),
            delta: sc.delta.unwrap_or(solver.schedule.delta),
            k: sc.k.unwrap_or(solver.schedule.k),
        };
        solver.schedule = spec;
        solver.mu_max = s.mu_max.unwrap_or(solver.mu_max);
        solver.mu_init = s.mu_init.unwrap_or(solver.mu_init);
        solver.rho = s.rho.unwrap_or(solver.rho);
        solver.eta = s.eta.unwrap_or(solver.eta);
        solver.max_total_trials = s.max_total_trials.unwrap_or(solver.max_total_trials);
        solver.stop_residual = s.stop_residual;
        solver.stop_gap = s.stop_gap;
        solver.assert_level = self.assert_level;
        solver.validate().map_err(|e| anyhow!("solver: {e}"))?;

        let trace = join(&self.output.trace);
        let summary = match &self.output.summary {
            Some(s) => join(s),
            None => trace.with_extension("summary.json"),
        };
        if summary == trace {
            bail!("output.summary must differ from output.trace");
        }
        Ok(Resolved {
            source: source.to_path_buf(),
            instance,
            solver,
            trace,
            summary,
        })
    }
}
