//! Stationarity residuals, approximate-stationarity certificates, the
//! running-average subsequence selector, and checks of the rate inequalities
//! against a recorded trace.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{dist, sub};
use crate::oracle::{ExtReal, Problem};
use crate::solver::{InitialInfo, SolverConfig, TraceRow};

/// Inputs describing one accepted step `x^t -> x^{t+1}`.
#[derive(Debug, Clone, Copy)]
pub struct ResidualInputs<'a> {
    pub x_t: &'a [f64],
    pub x_next: &'a [f64],
    /// `c(x^t)`.
    pub cx_t: &'a [f64],
    pub y_t: &'a [f64],
    /// `grad f(x^t)`.
    pub grad_t: &'a [f64],
    /// `grad f(x^{t+1})`.
    pub grad_next: &'a [f64],
    /// `J_c(x^t)^T (c(x^t) - y^t)`.
    pub jtw_t: &'a [f64],
    pub mu_t: f64,
    pub beta_t: f64,
    pub beta_prev: f64,
}

/// Subgradient witnesses read off the optimality conditions of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualParts {
    /// An element of `partial g(x^{t+1})`.
    pub psi: Vec<f64>,
    /// An element of `partial h(y^t)`.
    pub xi: Vec<f64>,
    /// `|grad f(x^{t+1}) + psi + J_c(x^t)^T xi|`.
    pub residual: f64,
}

/// Builds `psi`, `xi` and the residual from precomputed step data.
pub fn residual_parts(p: &Problem, s: &ResidualInputs<'_>) -> ResidualParts {
    let scale = 2.0 / s.mu_t;
    let psi: Vec<f64> = (0..s.x_t.len())
        .map(|i| -s.grad_t[i] - s.beta_t * s.jtw_t[i] - scale * (s.x_next[i] - s.x_t[i]))
        .collect();
    let xi: Vec<f64> = s
        .cx_t
        .iter()
        .zip(s.y_t)
        .map(|(c, y)| s.beta_prev * (c - y))
        .collect();
    let residual = residual_norm(s.grad_next, &psi, &p.c.vjp(s.x_t, &xi));
    ResidualParts { psi, xi, residual }
}

/// The residual with the Jacobian evaluated at `anchor` instead of `x^t`.
pub fn residual_with_anchor(
    p: &Problem,
    s: &ResidualInputs<'_>,
    parts: &ResidualParts,
    anchor: &[f64],
) -> f64 {
    residual_norm(s.grad_next, &parts.psi, &p.c.vjp(anchor, &parts.xi))
}

fn residual_norm(grad: &[f64], psi: &[f64], jt_xi: &[f64]) -> f64 {
    grad.iter()
        .zip(psi)
        .zip(jt_xi)
        .map(|((g, s), j)| {
            let v = g + s + j;
            v * v
        })
        .sum::<f64>()
        .sqrt()
}

/// `|grad f(x^{t+1}) + psi + J_c(x^t)^T xi|` with `psi`, `xi` taken from the
/// optimality conditions of the x- and y-subproblems.
pub fn stationarity_residual(
    p: &Problem,
    x_t: &[f64],
    x_next: &[f64],
    y_t: &[f64],
    mu_t: f64,
    beta_t: f64,
    beta_prev: f64,
) -> f64 {
    let cx_t = p.c.eval(x_t);
    let grad_t = p.f.grad(x_t);
    let grad_next = p.f.grad(x_next);
    let jtw_t = p.c.vjp(x_t, &sub(&cx_t, y_t));
    let inputs = ResidualInputs {
        x_t,
        x_next,
        cx_t: &cx_t,
        y_t,
        grad_t: &grad_t,
        grad_next: &grad_next,
        jtw_t: &jtw_t,
        mu_t,
        beta_t,
        beta_prev,
    };
    residual_parts(p, &inputs).residual
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Certificate {
    pub pass: bool,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

/// Attained tolerances `(d1, d2, d3)` of an approximate stationary triple
/// `(x, y, z)` with witnesses `psi` in `partial g(x)` and `xi` in `partial h(y)`.
#[allow(clippy::too_many_arguments)]
pub fn certificate(
    p: &Problem,
    x: &[f64],
    y: &[f64],
    z: &[f64],
    psi: &[f64],
    xi: &[f64],
    eps1: f64,
    eps2: f64,
    eps3: f64,
) -> Certificate {
    let d1 = residual_norm(&p.f.grad(x), psi, &p.c.vjp(z, xi));
    let d2 = dist(&p.c.eval(x), y);
    let d3 = dist(x, z);
    Certificate {
        pass: d1 <= eps1 && d2 <= eps2 && d3 <= eps3,
        d1,
        d2,
        d3,
    }
}

/// One selected index with the values certifying `a_T <= b_{T-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubsequenceEntry {
    /// One-based index `T`.
    pub t: usize,
    pub a_t: f64,
    /// Running average of the first `T - 1` entries.
    pub b_prev: f64,
}

/// All `T > 1` (one-based) whose running average does not exceed the previous
/// one, with their certifying values.
///
/// `b_T <= b_{T-1}` is equivalent to `a_T <= b_{T-1}`; the latter is tested
/// directly so the returned entries satisfy it exactly in floating point.
pub fn select_subsequence_detailed(a: &[f64]) -> Vec<SubsequenceEntry> {
    let mut out = Vec::new();
    let mut sum = 0.0;
    for (k, &ak) in a.iter().enumerate() {
        if k >= 1 {
            let b_prev = sum / k as f64;
            if ak <= b_prev {
                out.push(SubsequenceEntry {
                    t: k + 1,
                    a_t: ak,
                    b_prev,
                });
            }
        }
        sum += ak;
    }
    out
}

/// One-based indices from [`select_subsequence_detailed`].
pub fn select_subsequence(a: &[f64]) -> Vec<usize> {
    select_subsequence_detailed(a).into_iter().map(|e| e.t).collect()
}

#[derive(Debug, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("tolerances must lie in (0, 1), got eps1 = {0}, eps2 = {1}")]
    ToleranceRange(f64, f64),
    #[error("{0} is outside the domain")]
    Infeasible(&'static str),
}

/// `delta = ln(1/eps2) / (2 ln(1/eps1) + ln(1/eps2))`.
pub fn suggest_delta(eps1: f64, eps2: f64) -> Result<f64, DiagnosticsError> {
    if !(eps1 > 0.0 && eps1 < 1.0 && eps2 > 0.0 && eps2 < 1.0) {
        return Err(DiagnosticsError::ToleranceRange(eps1, eps2));
    }
    // Written as 1 / (2 r + 1) so equal tolerances give exactly 1/3.
    let r = eps1.ln() / eps2.ln();
    Ok(1.0 / (2.0 * r + 1.0))
}

fn fg_and_h(p: &Problem, x: &[f64], y: &[f64]) -> Result<(f64, f64), DiagnosticsError> {
    let fg = p.fg(x).finite().ok_or(DiagnosticsError::Infeasible("x"))?;
    let h = match p.h.eval(y) {
        ExtReal::Finite(v) => v,
        ExtReal::PosInf => return Err(DiagnosticsError::Infeasible("y")),
    };
    Ok((fg, h))
}

/// `H(x, beta, y) = f(x) + g(x) + (beta/2) |c(x) - y|^2 + h(y)`.
pub fn h_value(p: &Problem, x: &[f64], beta: f64, y: &[f64]) -> Result<f64, DiagnosticsError> {
    let (fg, h) = fg_and_h(p, x, y)?;
    let gap = dist(&p.c.eval(x), y);
    Ok(fg + 0.5 * beta * gap * gap + h)
}

/// `Theta(x, beta, y) = (f(x) + g(x) - inf_fg) / beta + |c(x) - y|^2 / 2 + h(y) / beta`.
pub fn theta_value(
    p: &Problem,
    x: &[f64],
    beta: f64,
    y: &[f64],
    inf_fg: f64,
) -> Result<f64, DiagnosticsError> {
    let (fg, h) = fg_and_h(p, x, y)?;
    let gap = dist(&p.c.eval(x), y);
    Ok((fg - inf_fg + h) / beta + 0.5 * gap * gap)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    UserSupplied,
    Computed,
    Unavailable,
}

/// A constant together with where it came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tagged {
    pub value: Option<f64>,
    pub provenance: Provenance,
}

impl Tagged {
    fn user(v: Option<f64>) -> Self {
        Self {
            value: v,
            provenance: if v.is_some() {
                Provenance::UserSupplied
            } else {
                Provenance::Unavailable
            },
        }
    }

    fn computed(v: Option<f64>) -> Self {
        Self {
            value: v,
            provenance: if v.is_some() {
                Provenance::Computed
            } else {
                Provenance::Unavailable
            },
        }
    }
}

impl fmt::Display for Tagged {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value {
            Some(v) => write!(f, "{v:e} ({:?})", self.provenance),
            None => f.write_str("unavailable"),
        }
    }
}

/// Constants entering the rate inequalities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateConstants {
    pub m0: Tagged,
    pub k0: Tagged,
    pub m1: Tagged,
    pub m2: Tagged,
    pub m3: Tagged,
    pub lambda1: Tagged,
    pub lambda2: Tagged,
    pub lambda3: Tagged,
    pub lambda4: Tagged,
    pub lambda5: Tagged,
    pub lambda6: Tagged,
    pub lambda7: Tagged,
    pub lambda8: Tagged,
    pub l: Tagged,
    pub l_c: Tagged,
    pub m_c: Tagged,
    pub m_h: Tagged,
    pub inf_fg: Tagged,
    pub alpha0: Tagged,
    pub gamma0: Tagged,
    pub eta0: Tagged,
    pub delta: Tagged,
    pub rho: Tagged,
    pub mu_max: Tagged,
}

fn lift2(a: Option<f64>, b: Option<f64>, f: impl Fn(f64, f64) -> f64) -> Option<f64> {
    Some(f(a?, b?))
}

/// Fills every constant whose inputs are available.
///
/// Uses `f(x^1) + g(x^1)`, `|c(x^1) - y^0|` from the first trace row and
/// `|c(x^0) - y^0|`, `h(y^0)` from `initial`. Returns all computed constants
/// as unavailable when the trace is empty.
pub fn rate_constants(
    p: &Problem,
    cfg: &SolverConfig,
    initial: &InitialInfo,
    trace: &[TraceRow],
) -> RateConstants {
    let s = &cfg.schedule;
    let (beta0, delta) = (s.beta0, s.delta);
    let (alpha0, gamma0, eta0) = (s.alpha0(), s.gamma0(), s.eta0());
    let rho = cfg.rho;
    let mu_max = cfg.mu_max;

    let l = p.f.lipschitz_bound();
    let l_c = p.c.jac_lipschitz_bound();
    let m_c = p.c.jac_norm_bound();
    let m_h = p.h_lipschitz_bound;
    let inf = p.inf_fg_lower_bound;

    let first = trace.first();
    let fg1 = first.map(|r| r.fg_value);
    let pg1 = first.map(|r| r.prev_gap);
    let h0 = initial.h_y0;

    // f(x^1) + g(x^1) + beta0/2 |c(x^1) - y^0|^2 + h(y^0) - inf
    let m1 = (|| Some(fg1? + 0.5 * beta0 * pg1?.powi(2) + h0 - inf?))();
    let m0 = (|| {
        let inner = 4.0 / beta0 * (fg1? - inf?) + 2.0 * pg1?.powi(2) + 4.0 / beta0 * h0;
        Some(initial.gap0.max(inner.max(0.0).sqrt()))
    })();
    let k0 = lift2(m1, m_h, |m1, mh| {
        m1 + gamma0 * (1.0 + delta) * mh * mh / (2.0 * alpha0 * beta0)
    });
    let m3 = lift2(p.fg_abs_sup_bound, p.h_sup_on_image_bound, |a, b| 2.0 * a + b);
    let m2 = m3.map(|m3| m3 * eta0 / alpha0);
    let lambda1 = (|| Some(l? + 2f64.powf(delta) * gamma0 / alpha0 * m_h? * l_c?))();
    // L_c M0 + M_c^2
    let curv = (|| Some(l_c? * m0? + m_c?.powi(2)))();
    let lambda2 = (|| {
        let (l, m1) = (l?, m1?);
        Some(
            32.0 / rho * l * m1 + 32.0 * m1 + 8.0 * mu_max * m1 * l * l
                + 16.0 * eta0 * m_c?.powi(2) * m2? / (1.0 - delta)
                + 4.0 * mu_max * m1,
        )
    })();
    let lambda3 = lift2(l, m2, |l, m2| {
        32.0 / rho * l * m2 + 32.0 * m2 + 8.0 * mu_max * m2 * l * l + 4.0 * mu_max * m2
    });
    let lambda4 = curv.map(|k| 32.0 / rho * k * gamma0);
    let lambda5 = lift2(l, curv, |l, k| l / rho + k * gamma0 / rho);
    let bounded_delta = delta < 0.5;
    let lambda6 = (|| {
        if !bounded_delta {
            return None;
        }
        let (l, m1) = (l?, m1?);
        Some(
            (8.0 * l * l + 4.0) * mu_max * m1
                + 32.0 * m1
                + 8.0 * eta0 * eta0 * m_c?.powi(2) * m0?.powi(2) / (1.0 - 2.0 * delta),
        )
    })();
    let lambda7 = (|| {
        let (l, m0) = (l?, m0?);
        Some(
            (8.0 * l * l + 4.0) * mu_max * m0 * m0 * gamma0
                + 32.0 * m0 * m0 * gamma0
                + 32.0 * lambda5? * m1?,
        )
    })();
    let lambda8 = lift2(lambda5, m0, |l5, m0| 32.0 * l5 * m0 * m0 * gamma0);

    let fixed = |v: f64| Tagged {
        value: Some(v),
        provenance: Provenance::Computed,
    };
    let given = |v: f64| Tagged {
        value: Some(v),
        provenance: Provenance::UserSupplied,
    };
    RateConstants {
        m0: Tagged::computed(m0),
        k0: Tagged::computed(k0),
        m1: Tagged::computed(m1),
        m2: Tagged::computed(m2),
        m3: Tagged::computed(m3),
        lambda1: Tagged::computed(lambda1),
        lambda2: Tagged::computed(lambda2),
        lambda3: Tagged::computed(lambda3),
        lambda4: Tagged::computed(lambda4),
        lambda5: Tagged::computed(lambda5),
        lambda6: Tagged::computed(lambda6),
        lambda7: Tagged::computed(lambda7),
        lambda8: Tagged::computed(lambda8),
        l: Tagged::user(l),
        l_c: Tagged::user(l_c),
        m_c: Tagged::user(m_c),
        m_h: Tagged::user(m_h),
        inf_fg: Tagged::user(inf),
        alpha0: fixed(alpha0),
        gamma0: fixed(gamma0),
        eta0: fixed(eta0),
        delta: given(delta),
        rho: given(rho),
        mu_max: given(mu_max),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `h` globally Lipschitz.
    LipschitzH,
    /// `dom h` is the whole space and `dom g` bounded.
    FullDomainH,
    /// `dom g` bounded, `h` an indicator-like function; needs `delta < 1/2`.
    BoundedDomains,
}

impl Regime {
    /// Picks the regime whose constants `p` can supply: a Lipschitz `h` when
    /// `M_h` is known, then full-domain `h` when both sup bounds are known.
    pub fn for_problem(p: &Problem) -> Regime {
        if p.h_lipschitz_bound.is_some() {
            Regime::LipschitzH
        } else if p.h_sup_on_image_bound.is_some() && p.fg_abs_sup_bound.is_some() {
            Regime::FullDomainH
        } else {
            Regime::BoundedDomains
        }
    }
}

/// A single failed instance of an inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Violation {
    /// Horizon `T` for averaged bounds, iteration `t` for pointwise ones.
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CheckOutcome {
    Checked {
        instances: usize,
        /// Largest `lhs / rhs` seen (`0` when every right side is infinite).
        max_ratio: f64,
        violations: Vec<Violation>,
    },
    NotCheckable {
        missing: Vec<&'static str>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub name: &'static str,
    pub outcome: CheckOutcome,
}

impl InequalityReport {
    pub fn violation_count(&self) -> usize {
        match &self.outcome {
            CheckOutcome::Checked { violations, .. } => violations.len(),
            CheckOutcome::NotCheckable { .. } => 0,
        }
    }

    pub fn is_checked(&self) -> bool {
        matches!(self.outcome, CheckOutcome::Checked { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub regime: Regime,
    pub inequalities: Vec<InequalityReport>,
}

impl RateReport {
    pub fn total_violations(&self) -> usize {
        self.inequalities.iter().map(|r| r.violation_count()).sum()
    }

    pub fn get(&self, name: &str) -> Option<&InequalityReport> {
        self.inequalities.iter().find(|r| r.name == name)
    }
}

/// Relative and absolute slack granted to every right-hand side.
pub const RATE_REL_SLACK: f64 = 1e-9;
pub const RATE_ABS_SLACK: f64 = 1e-12;

struct Needs<'a> {
    consts: &'a RateConstants,
    missing: Vec<&'static str>,
}

impl<'a> Needs<'a> {
    fn new(consts: &'a RateConstants) -> Self {
        Self {
            consts,
            missing: Vec::new(),
        }
    }

    fn get(&mut self, name: &'static str) -> f64 {
        let c = self.consts;
        let tagged = match name {
            "M0" => c.m0,
            "K0" => c.k0,
            "M1" => c.m1,
            "M2" => c.m2,
            "M3" => c.m3,
            "lambda1" => c.lambda1,
            "lambda2" => c.lambda2,
            "lambda3" => c.lambda3,
            "lambda4" => c.lambda4,
            "lambda5" => c.lambda5,
            "lambda6" => c.lambda6,
            "lambda7" => c.lambda7,
            "lambda8" => c.lambda8,
            "L" => c.l,
            "L_c" => c.l_c,
            "M_c" => c.m_c,
            "M_h" => c.m_h,
            "alpha0" => c.alpha0,
            "gamma0" => c.gamma0,
            "eta0" => c.eta0,
            "delta" => c.delta,
            "rho" => c.rho,
            "mu_max" => c.mu_max,
            other => panic!("unknown constant {other}"),
        };
        match tagged.value {
            Some(v) => v,
            None => {
                if !self.missing.contains(&name) {
                    self.missing.push(name);
                }
                f64::NAN
            }
        }
    }
}

fn within(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs * (1.0 + RATE_REL_SLACK) + RATE_ABS_SLACK
}

/// Evaluates `lhs(i) <= rhs(i)` over `indices` once all named constants are
/// present.
fn run_check(
    name: &'static str,
    consts: &RateConstants,
    needed: &[&'static str],
    indices: impl Iterator<Item = usize>,
    mut lhs: impl FnMut(usize) -> f64,
    rhs: impl Fn(usize, &mut Needs<'_>) -> f64,
) -> InequalityReport {
    let mut needs = Needs::new(consts);
    for n in needed {
        needs.get(n);
    }
    if !needs.missing.is_empty() {
        return InequalityReport {
            name,
            outcome: CheckOutcome::NotCheckable {
                missing: needs.missing,
            },
        };
    }
    let mut violations = Vec::new();
    let mut max_ratio = 0.0f64;
    let mut instances = 0;
    for i in indices {
        instances += 1;
        let (l, r) = (lhs(i), rhs(i, &mut needs));
        if r.is_finite() && r > 0.0 {
            max_ratio = max_ratio.max(l / r);
        }
        if !within(l, r) {
            violations.push(Violation { index: i, lhs: l, rhs: r });
        }
    }
    InequalityReport {
        name,
        outcome: CheckOutcome::Checked {
            instances,
            max_ratio,
            violations,
        },
    }
}

/// Running sums over rows with `t >= 1`; `avg(k)` divides by the horizon.
struct Running {
    sums: Vec<f64>,
}

impl Running {
    fn new(values: impl Iterator<Item = f64>) -> Self {
        let mut acc = 0.0;
        let sums = values
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        Self { sums }
    }

    fn avg(&self, big_t: usize) -> f64 {
        self.sums[big_t - 1] / big_t as f64
    }
}

/// Checks the rate inequalities of `regime` at every horizon `T` covered by
/// `trace`, plus the step-size lower bound.
///
/// The averaged inequalities sum over iterations `t = 1..T`, so the row with
/// `t = 0` (whose step starts at `x^0`) enters only the pointwise checks.
pub fn rate_bound_check(trace: &[TraceRow], consts: &RateConstants, regime: Regime) -> RateReport {
    let rows: Vec<&TraceRow> = trace.iter().filter(|r| r.t >= 1).collect();
    let n = rows.len();
    let horizons = || 1..=n;
    let sq = |v: f64| v * v;
    let inv_mu2 = Running::new(rows.iter().map(|r| sq(r.scaled_step)));
    let inv_mu = Running::new(rows.iter().map(|r| sq(r.step_norm) / r.mu_t));
    let plain = Running::new(rows.iter().map(|r| sq(r.step_norm)));
    let tp1 = |t: usize| (t + 1) as f64;

    let mut out = Vec::new();
    out.push(run_check(
        "step_size_lower_bound",
        consts,
        &["L", "L_c", "M_c", "M0", "rho"],
        0..trace.len(),
        |i| 1.0 / trace[i].mu_t,
        |i, c| {
            let rho = c.get("rho");
            c.get("L") / rho + (c.get("L_c") * c.get("M0") + c.get("M_c").powi(2)) * trace[i].beta_t / rho
        },
    ));

    match regime {
        Regime::LipschitzH => {
            let lip_1_rhs = |t: usize, c: &mut Needs<'_>| {
                let rho = c.get("rho");
                let k0 = c.get("K0");
                let curv = c.get("L_c") * c.get("M0") + c.get("M_c").powi(2);
                4.0 / rho * c.get("L") * k0 / tp1(t)
                    + 4.0 / rho * curv * k0 * c.get("gamma0") / tp1(t).powf(1.0 - c.get("delta"))
            };
            let lip_3_rhs = |t: usize, c: &mut Needs<'_>| {
                let (a0, d) = (c.get("alpha0"), c.get("delta"));
                2.0 * c.get("M_h") / (a0 * (1.0 - d)) / tp1(t).powf(d)
                    + (8.0 * c.get("K0") / (a0 * (1.0 - d)) / tp1(t).powf(1.0 + d)).sqrt()
            };
            let upsilon = |t: usize, c: &mut Needs<'_>| {
                let rho = c.get("rho");
                let k0 = c.get("K0");
                let curv = c.get("L_c") * c.get("M0") + c.get("M_c").powi(2);
                let a0 = c.get("alpha0");
                6.0 * c.get("mu_max") * k0 * c.get("lambda1").powi(2) / t as f64
                    + 48.0 / rho * c.get("L") * k0 / tp1(t)
                    + 48.0 / rho * curv * k0 * c.get("gamma0") / tp1(t).powf(1.0 - c.get("delta"))
                    + 12.0 * sq(c.get("M_h") * c.get("M_c") * c.get("eta0") / a0) / tp1(t)
            };
            let lip1_needs = ["rho", "K0", "L", "L_c", "M0", "M_c", "gamma0", "delta"];
            out.push(run_check("lip_scaled_step_sq", consts, &lip1_needs, horizons(), |t| inv_mu2.avg(t), lip_1_rhs));
            out.push(run_check("lip_step_sq_over_mu", consts, &["K0"], horizons(), |t| inv_mu.avg(t), |t, c| {
                2.0 * c.get("K0") / t as f64
            }));
            out.push(run_check("lip_step_sq", consts, &["K0", "mu_max"], horizons(), |t| plain.avg(t), |t, c| {
                2.0 * c.get("mu_max") * c.get("K0") / t as f64
            }));
            let prev_gap = Running::new(rows.iter().map(|r| r.prev_gap));
            let lip3_needs = ["M_h", "K0", "alpha0", "delta"];
            out.push(run_check("lip_prev_gap", consts, &lip3_needs, horizons(), |t| prev_gap.avg(t), lip_3_rhs));
            let resid = Running::new(rows.iter().map(|r| sq(r.residual_next_anchor)));
            let ups_needs = ["mu_max", "K0", "lambda1", "rho", "L", "L_c", "M0", "M_c", "gamma0", "delta", "M_h", "eta0", "alpha0"];
            out.push(run_check("lip_residual_average", consts, &ups_needs, horizons(), |t| resid.avg(t), upsilon));
            let mut best = f64::INFINITY;
            let mins: Vec<f64> = rows
                .iter()
                .map(|r| {
                    best = best.min(sq(r.residual_next_anchor) + r.prev_gap);
                    best
                })
                .collect();
            let mut both: Vec<&'static str> = ups_needs.to_vec();
            both.extend(lip3_needs);
            out.push(run_check("lip_residual_min", consts, &both, horizons(), |t| mins[t - 1], |t, c| {
                upsilon(t, c) + lip_3_rhs(t, c)
            }));
        }
        Regime::FullDomainH => {
            let omega = |t: usize, c: &mut Needs<'_>| c.get("M1") + c.get("M2") * ((t as f64).ln() + 1.0);
            let needs1 = ["rho", "L", "L_c", "M0", "M_c", "gamma0", "delta", "M1", "M2"];
            out.push(run_check("full_scaled_step_sq", consts, &needs1, horizons(), |t| inv_mu2.avg(t), |t, c| {
                let rho = c.get("rho");
                let curv = c.get("L_c") * c.get("M0") + c.get("M_c").powi(2);
                let om = omega(t, c);
                4.0 / rho * c.get("L") * om / tp1(t)
                    + 4.0 / rho * curv * c.get("gamma0") * om / tp1(t).powf(1.0 - c.get("delta"))
            }));
            out.push(run_check("full_step_sq_over_mu", consts, &["M1", "M2"], horizons(), |t| inv_mu.avg(t), |t, c| {
                4.0 * omega(t, c) / tp1(t)
            }));
            out.push(run_check("full_step_sq", consts, &["M1", "M2", "mu_max"], horizons(), |t| plain.avg(t), |t, c| {
                4.0 * c.get("mu_max") * omega(t, c) / tp1(t)
            }));
            out.push(run_check(
                "full_prev_gap_sq",
                consts,
                &["M3", "M0", "eta0", "alpha0", "delta"],
                0..n,
                |i| sq(rows[i].prev_gap),
                |i, c| {
                    let t = rows[i].t;
                    let a0 = c.get("alpha0");
                    c.get("M3") / (a0 * tp1(t).powf(c.get("delta")))
                        + 2.0 * sq(c.get("M0")) * c.get("eta0") / (a0 * tp1(t))
                },
            ));
            // Row t holds |c(x^{t+1}) - y^{t+1}| and beta_t, i.e. the bound at t + 1.
            out.push(run_check(
                "full_gap_sq",
                consts,
                &["M3"],
                0..trace.len(),
                |i| sq(trace[i].gap),
                |i, c| 2.0 * c.get("M3") / trace[i].beta_t,
            ));
            let mut best = f64::INFINITY;
            let mins: Vec<f64> = rows
                .iter()
                .map(|r| {
                    best = best.min(sq(r.residual) + sq(r.step_norm) + sq(r.prev_gap));
                    best
                })
                .collect();
            let needs = ["lambda2", "lambda3", "lambda4", "M1", "M2", "M3", "M0", "eta0", "alpha0", "delta"];
            out.push(run_check("full_residual_min", consts, &needs, horizons(), |t| mins[t - 1], |t, c| {
                let lg = (t as f64).ln() + 1.0;
                let a0 = c.get("alpha0");
                let d = c.get("delta");
                (c.get("lambda2") + c.get("lambda3") * lg) / tp1(t)
                    + c.get("lambda4") * (c.get("M1") + c.get("M2") * lg) / tp1(t).powf(1.0 - d)
                    + c.get("M3") / (a0 * tp1(t).powf(d))
                    + 2.0 * sq(c.get("M0")) * c.get("eta0") / (a0 * tp1(t))
            }));
        }
        Regime::BoundedDomains => {
            let needs1 = ["lambda5", "M1", "M0", "gamma0", "delta"];
            out.push(run_check("bounded_scaled_step_sq", consts, &needs1, horizons(), |t| inv_mu2.avg(t), |t, c| {
                let d = c.get("delta");
                let l5 = c.get("lambda5");
                4.0 * l5 * c.get("M1") / tp1(t).powf(1.0 - d)
                    + 4.0 * l5 * sq(c.get("M0")) * c.get("gamma0") / tp1(t).powf(1.0 - 2.0 * d)
            }));
            let needs2 = ["M1", "M0", "gamma0", "delta"];
            out.push(run_check("bounded_step_sq_over_mu", consts, &needs2, horizons(), |t| inv_mu.avg(t), |t, c| {
                4.0 * c.get("M1") / tp1(t)
                    + 4.0 * sq(c.get("M0")) * c.get("gamma0") / tp1(t).powf(1.0 - c.get("delta"))
            }));
            let needs3 = ["M1", "M0", "gamma0", "delta", "mu_max"];
            out.push(run_check("bounded_step_sq", consts, &needs3, horizons(), |t| plain.avg(t), |t, c| {
                let mm = c.get("mu_max");
                4.0 * mm * c.get("M1") / tp1(t)
                    + 4.0 * mm * sq(c.get("M0")) * c.get("gamma0") / tp1(t).powf(1.0 - c.get("delta"))
            }));
            let mut best = f64::INFINITY;
            let mins: Vec<f64> = rows
                .iter()
                .map(|r| {
                    best = best.min(sq(r.residual) + sq(r.step_norm));
                    best
                })
                .collect();
            let needs4 = ["lambda6", "lambda7", "lambda8", "delta"];
            out.push(run_check("bounded_residual_min", consts, &needs4, horizons(), |t| mins[t - 1], |t, c| {
                let d = c.get("delta");
                c.get("lambda6") / tp1(t)
                    + c.get("lambda7") / tp1(t).powf(1.0 - d)
                    + c.get("lambda8") / tp1(t).powf(1.0 - 2.0 * d)
            }));
        }
    }
    RateReport {
        regime,
        inequalities: out,
    }
}
