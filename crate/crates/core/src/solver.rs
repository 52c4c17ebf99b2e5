//! The single-loop iteration with backtracking on the step size `mu`.
//!
//! One *trial* forms a prox-gradient candidate
//!
//! ```text
//! x~ = prox_{(mu/2) g}( x^t - (mu/2) [grad f(x^t) + beta_t J_c(x^t)^T (c(x^t) - y^t)] )
//! ```
//!
//! and accepts it when both
//!
//! * (i)  `|c(x~) - c(x^t)| <= sqrt(1 / (mu beta_t)) |x~ - x^t|`, and
//! * (ii) `P(x~) <= P(x^t) - |x~ - x^t|^2 / (2 mu)` with
//!   `P(x) = f(x) + g(x) + (beta_t / 2) |c(x) - y^t|^2`
//!
//! hold. An accepted trial sets `y^{t+1} = prox_{h / beta_t}(c(x^{t+1}))`,
//! advances `t` and enlarges `mu` by `eta` (capped at `mu_max`); a rejected
//! trial shrinks `mu` by `rho` and changes nothing else.

use log::{debug, trace};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{self, ResidualInputs};
use crate::linalg::{axpy, dist, norm_sq, sub};
use crate::oracle::{ExtReal, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleFamily {
    /// `beta_t = beta0 (t + 1)^delta`.
    Power,
    /// `beta0 (t + 1)^delta` on multiples of `k`, held constant in between.
    Blocked,
}

/// A nondecreasing, divergent penalty sequence `beta_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub family: ScheduleFamily,
    pub beta0: f64,
    pub delta: f64,
    #[serde(default = "one")]
    pub k: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("beta0 must be positive and finite, got {0}")]
    Beta0(f64),
    #[error("delta must lie in (0, 1), got {0}")]
    Delta(f64),
    #[error("block size k must be at least 1")]
    BlockSize,
    #[error("need 0 < mu_init < mu_max (mu_init = {mu_init}, mu_max = {mu_max})")]
    StepBounds { mu_init: f64, mu_max: f64 },
    #[error("rho must lie in (0, 1), got {0}")]
    Rho(f64),
    #[error("eta must be at least 1, got {0}")]
    Eta(f64),
    #[error("iteration budget must be positive")]
    ZeroBudget,
    #[error("stopping threshold must be positive")]
    StopThreshold,
}

impl ScheduleSpec {
    pub fn power(beta0: f64, delta: f64) -> Self {
        Self {
            family: ScheduleFamily::Power,
            beta0,
            delta,
            k: 1,
        }
    }

    pub fn blocked(beta0: f64, delta: f64, k: usize) -> Self {
        Self {
            family: ScheduleFamily::Blocked,
            beta0,
            delta,
            k,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.beta0 > 0.0 && self.beta0.is_finite()) {
            return Err(ConfigError::Beta0(self.beta0));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(ConfigError::Delta(self.delta));
        }
        if self.k == 0 {
            return Err(ConfigError::BlockSize);
        }
        Ok(())
    }

    fn block(&self) -> usize {
        match self.family {
            ScheduleFamily::Power => 1,
            ScheduleFamily::Blocked => self.k,
        }
    }

    pub fn beta_at(&self, t: usize) -> f64 {
        let k = self.block();
        let anchor = (t / k) * k;
        self.beta0 * ((anchor + 1) as f64).powf(self.delta)
    }

    /// Lower growth constant: `beta_t >= alpha0 (t + 1)^delta`.
    pub fn alpha0(&self) -> f64 {
        self.beta0 * (self.block() as f64).powf(-self.delta)
    }

    /// Upper growth constant: `beta_t <= gamma0 (t + 1)^delta`.
    pub fn gamma0(&self) -> f64 {
        self.beta0
    }

    /// Increment constant: `beta_t - beta_{t-1} <= eta0 t^(delta - 1)`.
    pub fn eta0(&self) -> f64 {
        self.beta0 * self.delta * (self.block() as f64).powf(2.0 - self.delta)
    }
}

/// Free-function form of [`ScheduleSpec::beta_at`].
pub fn beta_at(s: &ScheduleSpec, t: usize) -> f64 {
    s.beta_at(t)
}

/// How much runtime self-checking [`solve`] performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssertLevel {
    Off,
    /// Re-verify the acceptance margins of every accepted row.
    #[default]
    Cheap,
    /// Also verify merit monotonicity, pseudo-descent and y-prox optimality.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub mu_max: f64,
    pub mu_init: f64,
    pub rho: f64,
    pub eta: f64,
    pub schedule: ScheduleSpec,
    pub max_successful_iters: usize,
    pub max_total_trials: usize,
    pub stop_residual: Option<f64>,
    pub stop_gap: Option<f64>,
    pub assert_level: AssertLevel,
}

impl SolverConfig {
    /// A config with no stopping thresholds and a trial budget of
    /// `100 * max_successful_iters`.
    pub fn new(
        schedule: ScheduleSpec,
        mu_max: f64,
        mu_init: f64,
        rho: f64,
        eta: f64,
        max_successful_iters: usize,
    ) -> Self {
        Self {
            mu_max,
            mu_init,
            rho,
            eta,
            schedule,
            max_successful_iters,
            max_total_trials: max_successful_iters.saturating_mul(100),
            stop_residual: None,
            stop_gap: None,
            assert_level: AssertLevel::Cheap,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.schedule.validate()?;
        if !(self.mu_init > 0.0 && self.mu_init < self.mu_max) {
            return Err(ConfigError::StepBounds {
                mu_init: self.mu_init,
                mu_max: self.mu_max,
            });
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(ConfigError::Rho(self.rho));
        }
        if !(self.eta >= 1.0 && self.eta.is_finite()) {
            return Err(ConfigError::Eta(self.eta));
        }
        if self.max_successful_iters == 0 || self.max_total_trials == 0 {
            return Err(ConfigError::ZeroBudget);
        }
        let bad = |v: Option<f64>| v.is_some_and(|s| !(s > 0.0));
        if bad(self.stop_residual) || bad(self.stop_gap) {
            return Err(ConfigError::StopThreshold);
        }
        Ok(())
    }
}

/// Iterate and cached quantities that depend only on `x^t` and `y^t`.
#[derive(Debug, Clone)]
pub struct SolverState {
    /// Number of accepted steps so far.
    pub t: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub mu: f64,
    /// `c(x^t)`.
    pub cx: Vec<f64>,
    /// `grad f(x^t)`.
    pub grad: Vec<f64>,
    /// `f(x^t) + g(x^t)`.
    pub fg: f64,
    /// `h(y^t)`.
    pub h_y: f64,
    /// `J_c(x^t)^T (c(x^t) - y^t)`.
    pub jtw: Vec<f64>,
    pub trial_count: usize,
    pub unsuccessful_count: usize,
    unsuccessful_streak: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{what} has length {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("starting point is infeasible: {0}")]
    InfeasibleStart(&'static str),
    #[error("non-finite {what} at iteration {t}")]
    NonFinite { t: usize, what: &'static str },
    #[error("check '{check}' failed at iteration {t} (slack {slack:e})")]
    AssertionFailed {
        t: usize,
        check: &'static str,
        slack: f64,
    },
}

impl SolverState {
    pub fn new(p: &Problem, x0: &[f64], y0: &[f64], mu_init: f64) -> Result<Self, SolveError> {
        if x0.len() != p.n() {
            return Err(SolveError::DimensionMismatch {
                what: "x0",
                got: x0.len(),
                expected: p.n(),
            });
        }
        if y0.len() != p.m() {
            return Err(SolveError::DimensionMismatch {
                what: "y0",
                got: y0.len(),
                expected: p.m(),
            });
        }
        let fg = p
            .fg(x0)
            .finite()
            .ok_or(SolveError::InfeasibleStart("x0 is outside dom g"))?;
        let h_y = p
            .h
            .eval(y0)
            .finite()
            .ok_or(SolveError::InfeasibleStart("y0 is outside dom h"))?;
        let mut st = Self {
            t: 0,
            x: x0.to_vec(),
            y: y0.to_vec(),
            mu: mu_init,
            cx: Vec::new(),
            grad: Vec::new(),
            fg,
            h_y,
            jtw: Vec::new(),
            trial_count: 0,
            unsuccessful_count: 0,
            unsuccessful_streak: 0,
        };
        st.refresh(p);
        if !fg.is_finite() || st.grad.iter().any(|v| !v.is_finite()) {
            return Err(SolveError::NonFinite { t: 0, what: "f or grad f at x0" });
        }
        Ok(st)
    }

    fn refresh(&mut self, p: &Problem) {
        self.cx = p.c.eval(&self.x);
        self.grad = p.f.grad(&self.x);
        self.jtw = p.c.vjp(&self.x, &sub(&self.cx, &self.y));
    }

    /// `|c(x^t) - y^t|`.
    pub fn gap(&self) -> f64 {
        dist(&self.cx, &self.y)
    }
}

/// Candidate point for step size `mu` at the current state.
pub fn trial_step(p: &Problem, st: &SolverState, beta_t: f64, mu: f64) -> Vec<f64> {
    assert!(mu > 0.0, "trial_step: mu must be positive");
    let half = 0.5 * mu;
    let mut z = st.x.clone();
    axpy(-half, &st.grad, &mut z);
    axpy(-half * beta_t, &st.jtw, &mut z);
    p.g.prox(&z, half)
}

/// Outcome of the two-part acceptance test.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub pass: bool,
    pub margin_i: f64,
    pub margin_ii: f64,
    pub tol_cond: f64,
    /// Set when the candidate left `dom g`.
    pub failure: Option<String>,
}

/// Relative slack on both acceptance margins.
pub const COND_REL_TOL: f64 = 1e-12;

struct TrialEval {
    report: ConditionReport,
    c_trial: Vec<f64>,
    fg_trial: f64,
}

fn evaluate_trial(
    p: &Problem,
    x_t: &[f64],
    cx_t: &[f64],
    fg_t: f64,
    x_trial: &[f64],
    y_t: &[f64],
    beta_t: f64,
    mu: f64,
) -> TrialEval {
    let tol_cond = COND_REL_TOL * (1.0 + fg_t.abs());
    let step = dist(x_trial, x_t);
    let c_trial = p.c.eval(x_trial);
    let margin_i = (1.0 / (mu * beta_t)).sqrt() * step - dist(&c_trial, cx_t);
    let fg_trial = match p.fg(x_trial) {
        ExtReal::Finite(v) => v,
        ExtReal::PosInf => {
            return TrialEval {
                report: ConditionReport {
                    pass: false,
                    margin_i,
                    margin_ii: f64::NEG_INFINITY,
                    tol_cond,
                    failure: Some("candidate lies outside dom g".into()),
                },
                c_trial,
                fg_trial: f64::INFINITY,
            }
        }
    };
    let lhs = fg_t + 0.5 * beta_t * norm_sq(&sub(cx_t, y_t));
    let rhs = fg_trial + 0.5 * beta_t * norm_sq(&sub(&c_trial, y_t));
    let margin_ii = lhs - rhs - step * step / (2.0 * mu);
    TrialEval {
        report: ConditionReport {
            pass: margin_i >= -tol_cond && margin_ii >= -tol_cond,
            margin_i,
            margin_ii,
            tol_cond,
            failure: None,
        },
        c_trial,
        fg_trial,
    }
}

/// Evaluates both acceptance margins for a candidate `x_trial`.
pub fn condition_check(
    p: &Problem,
    x_t: &[f64],
    x_trial: &[f64],
    y_t: &[f64],
    beta_t: f64,
    mu: f64,
) -> ConditionReport {
    let fg_t = p.fg(x_t).to_f64();
    evaluate_trial(p, x_t, &p.c.eval(x_t), fg_t, x_trial, y_t, beta_t, mu).report
}

/// Quantities logged for one accepted step `x^t -> x^{t+1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: usize,
    pub mu_t: f64,
    pub beta_t: f64,
    /// `|x^{t+1} - x^t|`.
    pub step_norm: f64,
    /// `|x^{t+1} - x^t| / mu_t`.
    pub scaled_step: f64,
    /// `|c(x^{t+1}) - y^{t+1}|`.
    pub gap: f64,
    /// `|c(x^{t+1}) - y^t|`.
    pub prev_gap: f64,
    /// Stationarity residual at `(x^{t+1}, y^t)` with the Jacobian at `x^t`.
    pub residual: f64,
    /// `f(x^{t+1}) + g(x^{t+1})`.
    pub fg_value: f64,
    /// `h(y^{t+1})`.
    pub h_at_y: f64,
    /// `H(x^{t+1}, beta_t, y^t)`.
    pub h_value: f64,
    /// `Theta(x^{t+1}, beta_t, y^t)`; absent without a lower bound on `f + g`.
    pub theta_value: Option<f64>,
    pub unsuccessful_this_iter: usize,
    pub rel_feas: Option<f64>,
    /// Acceptance margins of the accepted trial.
    #[serde(skip)]
    pub margin_i: f64,
    #[serde(skip)]
    pub margin_ii: f64,
    #[serde(skip)]
    pub tol_cond: f64,
    /// `|c(x^t) - y^t|`, the gap before the step.
    #[serde(skip)]
    pub gap_before: f64,
    /// As `residual`, with the Jacobian evaluated at `x^{t+1}`.
    #[serde(skip)]
    pub residual_next_anchor: f64,
}

/// Result of one call to [`step`].
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Accepted(Box<TraceRow>),
    Rejected { mu_tried: f64, report: ConditionReport },
}

/// Runs a single trial and updates `st` in place.
pub fn step(p: &Problem, st: &mut SolverState, cfg: &SolverConfig) -> Result<StepOutcome, SolveError> {
    let t = st.t;
    let beta_t = cfg.schedule.beta_at(t);
    let beta_prev = if t == 0 { beta_t } else { cfg.schedule.beta_at(t - 1) };
    let mu = st.mu;
    st.trial_count += 1;

    let x_trial = trial_step(p, st, beta_t, mu);
    let eval = evaluate_trial(p, &st.x, &st.cx, st.fg, &x_trial, &st.y, beta_t, mu);
    if !eval.report.pass {
        trace!("t={t} rejected mu={mu:e} margins=({:e}, {:e})", eval.report.margin_i, eval.report.margin_ii);
        st.mu *= cfg.rho;
        st.unsuccessful_count += 1;
        st.unsuccessful_streak += 1;
        return Ok(StepOutcome::Rejected {
            mu_tried: mu,
            report: eval.report,
        });
    }

    let grad_next = p.f.grad(&x_trial);
    let y_next = p.h.prox(&eval.c_trial, 1.0 / beta_t);
    let h_next = p
        .h
        .eval(&y_next)
        .finite()
        .ok_or(SolveError::NonFinite { t, what: "h at the new y" })?;

    let inputs = ResidualInputs {
        x_t: &st.x,
        x_next: &x_trial,
        cx_t: &st.cx,
        y_t: &st.y,
        grad_t: &st.grad,
        grad_next: &grad_next,
        jtw_t: &st.jtw,
        mu_t: mu,
        beta_t,
        beta_prev,
    };
    let parts = diagnostics::residual_parts(p, &inputs);
    let residual_next_anchor = diagnostics::residual_with_anchor(p, &inputs, &parts, &x_trial);

    let step_norm = dist(&x_trial, &st.x);
    let prev_gap = dist(&eval.c_trial, &st.y);
    let h_value = eval.fg_trial + 0.5 * beta_t * prev_gap * prev_gap + st.h_y;
    let theta_value = p
        .inf_fg_lower_bound
        .map(|inf| (eval.fg_trial - inf + st.h_y) / beta_t + 0.5 * prev_gap * prev_gap);
    let row = TraceRow {
        t,
        mu_t: mu,
        beta_t,
        step_norm,
        scaled_step: step_norm / mu,
        gap: dist(&eval.c_trial, &y_next),
        prev_gap,
        residual: parts.residual,
        fg_value: eval.fg_trial,
        h_at_y: h_next,
        h_value,
        theta_value,
        unsuccessful_this_iter: st.unsuccessful_streak,
        rel_feas: p.feasibility.as_ref().map(|m| m(&eval.c_trial)),
        margin_i: eval.report.margin_i,
        margin_ii: eval.report.margin_ii,
        tol_cond: eval.report.tol_cond,
        gap_before: st.gap(),
        residual_next_anchor,
    };
    let finite = [
        row.step_norm,
        row.gap,
        row.prev_gap,
        row.residual,
        row.fg_value,
        row.h_value,
    ]
    .iter()
    .all(|v| v.is_finite());
    if !finite {
        return Err(SolveError::NonFinite { t, what: "trace row" });
    }

    st.x = x_trial;
    st.y = y_next;
    st.cx = eval.c_trial;
    st.grad = grad_next;
    st.fg = eval.fg_trial;
    st.h_y = h_next;
    st.jtw = p.c.vjp(&st.x, &sub(&st.cx, &st.y));
    st.t += 1;
    st.mu = cfg.mu_max.min(cfg.eta * mu);
    st.unsuccessful_streak = 0;
    Ok(StepOutcome::Accepted(Box::new(row)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    IterationBudget,
    TrialBudget,
    Converged,
}

/// Values at the starting point needed by the rate constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitialInfo {
    /// `f(x^0) + g(x^0)`.
    pub fg0: f64,
    /// `|c(x^0) - y^0|`.
    pub gap0: f64,
    /// `h(y^0)`.
    pub h_y0: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub state: SolverState,
    pub trace: Vec<TraceRow>,
    pub status: SolveStatus,
    pub initial: InitialInfo,
}

impl SolveOutput {
    pub fn total_trials(&self) -> usize {
        self.state.trial_count
    }

    pub fn total_unsuccessful(&self) -> usize {
        self.state.unsuccessful_count
    }
}

/// Relative tolerance of the merit-function checks under [`AssertLevel::Full`].
pub const MERIT_REL_TOL: f64 = 1e-7;

/// Runs trials until a budget is exhausted or the stopping thresholds hold.
pub fn solve(
    p: &Problem,
    cfg: &SolverConfig,
    x0: &[f64],
    y0: &[f64],
) -> Result<SolveOutput, SolveError> {
    cfg.validate()?;
    let mut st = SolverState::new(p, x0, y0, cfg.mu_init)?;
    let initial = InitialInfo {
        fg0: st.fg,
        gap0: st.gap(),
        h_y0: st.h_y,
    };
    let mut trace: Vec<TraceRow> = Vec::with_capacity(cfg.max_successful_iters.min(1 << 16));
    let status = loop {
        if trace.len() >= cfg.max_successful_iters {
            break SolveStatus::IterationBudget;
        }
        if st.trial_count >= cfg.max_total_trials {
            break SolveStatus::TrialBudget;
        }
        let before = (cfg.assert_level == AssertLevel::Full).then(|| st.clone());
        match step(p, &mut st, cfg)? {
            StepOutcome::Rejected { .. } => {}
            StepOutcome::Accepted(row) => {
                if cfg.assert_level != AssertLevel::Off {
                    check_margins(&row)?;
                }
                if let Some(prev_state) = before {
                    check_merits(cfg, &prev_state, &st, &row, trace.last())?;
                }
                if row.t % 500 == 0 {
                    debug!(
                        "t={} mu={:e} beta={:e} scaled_step={:e} gap={:e}",
                        row.t, row.mu_t, row.beta_t, row.scaled_step, row.gap
                    );
                }
                let done = stop_reached(cfg, &row);
                trace.push(*row);
                if done {
                    break SolveStatus::Converged;
                }
            }
        }
    };
    Ok(SolveOutput {
        state: st,
        trace,
        status,
        initial,
    })
}

fn stop_reached(cfg: &SolverConfig, row: &TraceRow) -> bool {
    match (cfg.stop_residual, cfg.stop_gap) {
        (None, None) => false,
        (r, g) => {
            r.is_none_or(|r| row.scaled_step <= r) && g.is_none_or(|g| row.gap <= g)
        }
    }
}

fn check_margins(row: &TraceRow) -> Result<(), SolveError> {
    for (check, m) in [("margin (i)", row.margin_i), ("margin (ii)", row.margin_ii)] {
        if !(m >= -row.tol_cond) {
            return Err(SolveError::AssertionFailed { t: row.t, check, slack: m });
        }
    }
    Ok(())
}

fn check_merits(
    cfg: &SolverConfig,
    before: &SolverState,
    after: &SolverState,
    row: &TraceRow,
    prev_row: Option<&TraceRow>,
) -> Result<(), SolveError> {
    let t = row.t;
    let fail = |check, slack| Err(SolveError::AssertionFailed { t, check, slack });

    if let (Some(theta), Some(prev)) = (row.theta_value, prev_row.and_then(|r| r.theta_value)) {
        let slack = prev + MERIT_REL_TOL * (1.0 + prev.abs()) - theta;
        if slack < 0.0 {
            return fail("merit monotonicity", slack);
        }
    }

    if t >= 1 {
        let beta_prev = cfg.schedule.beta_at(t - 1);
        let g2 = before.gap().powi(2);
        let rhs = before.fg + 0.5 * beta_prev * g2 + before.h_y
            - row.step_norm * row.step_norm / (2.0 * row.mu_t)
            + 0.5 * (row.beta_t - beta_prev) * g2;
        let slack = rhs + MERIT_REL_TOL * (1.0 + rhs.abs()) - row.h_value;
        if slack < 0.0 {
            return fail("pseudo-descent", slack);
        }
    }

    // y^{t+1} must do at least as well as y^t in the y-subproblem.
    let at_new = 0.5 * row.beta_t * row.gap * row.gap + after.h_y;
    let at_old = 0.5 * row.beta_t * row.prev_gap * row.prev_gap + before.h_y;
    let slack = at_old + MERIT_REL_TOL * (1.0 + at_old.abs()) - at_new;
    if slack < 0.0 {
        return fail("y-prox optimality", slack);
    }
    Ok(())
}
