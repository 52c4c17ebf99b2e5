#![allow(dead_code)]

use sdcam::problems::{mimo, mlp, qcqp};
use sdcam::solver::{step, InitialInfo, SolveError, SolverConfig, SolverState, StepOutcome};
use sdcam::{ExtReal, Problem, ProxOracle, TraceRow};

/// Brute-force minimizer of `q` on `[lo, hi]`: a uniform grid followed by
/// four rounds of local refinement around the best point. The endpoints and
/// `extra` are always evaluated. Returns `(u, q(u))`.
pub fn grid_min(q: impl Fn(f64) -> f64, lo: f64, hi: f64, extra: &[f64]) -> (f64, f64) {
    let mut best = (f64::NAN, f64::INFINITY);
    let consider = |u: f64, best: &mut (f64, f64)| {
        let v = q(u);
        if v < best.1 {
            *best = (u, v);
        }
    };
    for &u in extra.iter().chain([lo, hi].iter()) {
        if u >= lo && u <= hi {
            consider(u, &mut best);
        }
    }
    let coarse = 20_000;
    let mut h = (hi - lo) / coarse as f64;
    for k in 0..=coarse {
        consider(lo + h * k as f64, &mut best);
    }
    for _ in 0..4 {
        let centre = best.0;
        let (a, b) = ((centre - h).max(lo), (centre + h).min(hi));
        let fine = 2_000;
        h = (b - a) / fine as f64;
        for k in 0..=fine {
            consider(a + h * k as f64, &mut best);
        }
    }
    best
}

/// `(u - z)^2 / (2 gamma) + phi(u)` for a scalar prox, `+inf` outside `dom phi`.
pub fn prox_objective(phi: &dyn ProxOracle, z: f64, gamma: f64, u: f64) -> f64 {
    match phi.eval(&[u]) {
        ExtReal::Finite(v) => (u - z).powi(2) / (2.0 * gamma) + v,
        ExtReal::PosInf => f64::INFINITY,
    }
}

/// One accepted step with the iterates on both sides.
#[derive(Debug, Clone)]
pub struct Accepted {
    pub x_t: Vec<f64>,
    pub y_t: Vec<f64>,
    pub x_next: Vec<f64>,
    pub y_next: Vec<f64>,
    pub row: TraceRow,
}

#[derive(Debug, Clone)]
pub struct Recorded {
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub initial: InitialInfo,
    pub steps: Vec<Accepted>,
}

impl Recorded {
    pub fn trace(&self) -> Vec<TraceRow> {
        self.steps.iter().map(|s| s.row.clone()).collect()
    }
}

/// Drives [`step`] directly so every accepted transition is kept.
pub fn record_run(p: &Problem, cfg: &SolverConfig, x0: &[f64], y0: &[f64]) -> Result<Recorded, SolveError> {
    cfg.validate()?;
    let mut st = SolverState::new(p, x0, y0, cfg.mu_init)?;
    let initial = InitialInfo {
        fg0: st.fg,
        gap0: st.gap(),
        h_y0: st.h_y,
    };
    let mut steps = Vec::new();
    while steps.len() < cfg.max_successful_iters && st.trial_count < cfg.max_total_trials {
        let (x_t, y_t) = (st.x.clone(), st.y.clone());
        if let StepOutcome::Accepted(row) = step(p, &mut st, cfg)? {
            steps.push(Accepted {
                x_t,
                y_t,
                x_next: st.x.clone(),
                y_next: st.y.clone(),
                row: *row,
            });
        }
    }
    Ok(Recorded {
        x0: x0.to_vec(),
        y0: y0.to_vec(),
        initial,
        steps,
    })
}

pub struct Case {
    pub name: String,
    pub problem: Problem,
    pub cfg: SolverConfig,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
}

/// Tuned base `beta0` for the synthetic MLP.
pub const MLP_BETA0: f64 = 0.1;

pub fn mimo_case(seed: u64, iters: usize) -> Case {
    let inst = mimo::MimoInstance::generate(seed, &mimo::MimoParams::default()).unwrap();
    Case {
        name: format!("mimo seed {seed}"),
        problem: inst.problem(),
        cfg: mimo::default_config(1.0, iters),
        x0: inst.x0(),
        y0: inst.y0(),
    }
}

pub fn qcqp_case(seed: u64, params: &qcqp::QcqpParams, beta0: f64, iters: usize) -> Case {
    let inst = qcqp::QcqpInstance::generate(seed, params).unwrap();
    Case {
        name: format!("qcqp n={} m={} seed {seed} beta0 {beta0:e}", params.n, params.m),
        problem: inst.problem(),
        cfg: qcqp::default_config(beta0, iters),
        x0: inst.x0(),
        y0: inst.y0(),
    }
}

pub fn mlp_case(seed: u64, beta0: f64, iters: usize) -> Case {
    let inst = mlp::MlpInstance::generate(seed, &mlp::MlpParams::default()).unwrap();
    Case {
        name: format!("mlp seed {seed} beta0 {beta0:e}"),
        problem: inst.problem(),
        cfg: mlp::default_config(beta0, iters),
        x0: inst.x0(),
        y0: inst.y0(),
    }
}

/// `|x|^2 / 2`.
pub struct HalfSquare(pub usize);

impl sdcam::SmoothOracle for HalfSquare {
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, x: &[f64]) -> f64 {
        0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }
    fn grad(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
    fn lipschitz_bound(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// `b'x`.
pub struct LinearFn(pub Vec<f64>);

impl sdcam::SmoothOracle for LinearFn {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        sdcam::linalg::dot(&self.0, x)
    }
    fn grad(&self, _x: &[f64]) -> Vec<f64> {
        self.0.clone()
    }
}

/// `x -> A x` with `A` given by rows.
pub struct LinearMap(pub Vec<Vec<f64>>);

impl sdcam::MapOracle for LinearMap {
    fn dim_in(&self) -> usize {
        self.0[0].len()
    }
    fn dim_out(&self) -> usize {
        self.0.len()
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.0.iter().map(|r| sdcam::linalg::dot(r, x)).collect()
    }
    fn vjp(&self, _x: &[f64], w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_in()];
        for (r, wi) in self.0.iter().zip(w) {
            for (o, a) in out.iter_mut().zip(r) {
                *o += wi * a;
            }
        }
        out
    }
    fn jac_lipschitz_bound(&self) -> Option<f64> {
        Some(0.0)
    }
    /// Frobenius norm.
    fn jac_norm_bound(&self) -> Option<f64> {
        Some(self.0.iter().flatten().map(|v| v * v).sum::<f64>().sqrt())
    }
}

pub fn identity_map(n: usize) -> LinearMap {
    LinearMap((0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect())
}

/// `x -> (x_i^2)_i`.
pub struct SquareMap(pub usize);

impl sdcam::MapOracle for SquareMap {
    fn dim_in(&self) -> usize {
        self.0
    }
    fn dim_out(&self) -> usize {
        self.0
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v * v).collect()
    }
    fn vjp(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        x.iter().zip(w).map(|(v, w)| 2.0 * v * w).collect()
    }
}
