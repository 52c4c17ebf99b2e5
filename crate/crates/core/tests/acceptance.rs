//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when
//! any criterion fails.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use common::{grid_min, mimo_case, mlp_case, prox_objective, qcqp_case, record_run, Case, Recorded, MLP_BETA0};
use sdcam::diagnostics::{rate_constants, select_subsequence, suggest_delta, theta_value};
use sdcam::oracle::{check_gradient, check_vjp, default_fd_step, FD_TOLERANCE};
use sdcam::problems::{mimo, mlp, qcqp};
use sdcam::prox::{BoxIndicator, L1Box, L1Norm, LpPenalty, NonpositiveIndicator, Zero};
use sdcam::solver::{condition_check, solve, AssertLevel, ScheduleSpec};
use sdcam::{ProxOracle, Problem};

const ORACLE_POINTS: usize = 10;
const ORACLE_TIME: Duration = Duration::from_secs(10);
const PROX_INSTANCES: usize = 1000;
const PROX_TOL: f64 = 1e-8;
const PROX_TIME: Duration = Duration::from_secs(30);
const THETA_REL_TOL: f64 = 1e-7;
const MERIT_RUN_ITERS: usize = 1000;
const MERIT_RUN_TIME: Duration = Duration::from_secs(60);
/// One more accepted step than the horizon, since the averages start at t = 1.
const MIMO_RATE_ITERS: usize = 1001;
const MIMO_RATE_HORIZON: usize = 1000;
/// Slack on the right side of the pointwise and averaged bounds.
const BOUND_REL_SLACK: f64 = 1e-9;
const SUBSEQ_SEQUENCES: usize = 1000;
const QCQP_SWEEP_ITERS: usize = 3000;
const QCQP_SWEEP_TIME: Duration = Duration::from_secs(600);
const MLP_SWEEP_ITERS: usize = 3000;
const SCHEDULE_HORIZON: usize = 100_000;
const SCHEDULE_REL_TOL: f64 = 1e-12;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

struct Run {
    case: Case,
    rec: Recorded,
    elapsed: Duration,
}

fn run_case(case: Case) -> Run {
    let t0 = Instant::now();
    let rec = record_run(&case.problem, &case.cfg, &case.x0, &case.y0)
        .unwrap_or_else(|e| panic!("{}: {e}", case.name));
    Run {
        case,
        rec,
        elapsed: t0.elapsed(),
    }
}

fn within(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs * (1.0 + BOUND_REL_SLACK)
}

// 1
fn oracle_soundness() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    let mut tally = |name: &str, p: &Problem, points: Vec<Vec<f64>>| {
        for x in points {
            let g = check_gradient(p.f.as_ref(), &x, default_fd_step(&x));
            let v = check_vjp(p.c.as_ref(), &x, 5).expect("dimensions match");
            worst = worst.max(g.max_rel_error).max(v.max_rel_error);
            if !g.pass || !v.pass {
                failures.push(format!("{name}: grad {:.2e} vjp {:.2e}", g.max_rel_error, v.max_rel_error));
            }
        }
    };

    let q = qcqp::QcqpInstance::generate(0, &qcqp::QcqpParams::default()).unwrap();
    let r = q.data.r;
    let pts = (0..ORACLE_POINTS)
        .map(|_| (0..q.params.n).map(|_| rng.random_range(-r..r)).collect())
        .collect();
    tally("qcqp", &q.problem(), pts);

    let m = mimo::MimoInstance::generate(0, &mimo::MimoParams::default()).unwrap();
    let (n, r_lo) = (m.params.n, m.params.r_lo);
    let pts = (0..ORACLE_POINTS)
        .map(|_| {
            let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(r_lo..1.0)).collect();
            x.extend((0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)));
            x
        })
        .collect();
    tally("mimo", &m.problem(), pts);

    let l = mlp::MlpInstance::generate(0, &mlp::MlpParams::default()).unwrap();
    let pts = (0..ORACLE_POINTS)
        .map(|_| (0..l.params.n_params()).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    tally("mlp", &l.problem(), pts);

    let el = t0.elapsed();
    let pass = failures.is_empty() && el < ORACLE_TIME;
    verdict(
        pass,
        format!(
            "{} points per family, worst rel err {worst:.2e} (limit {FD_TOLERANCE:e}), {:.2?}{}",
            ORACLE_POINTS,
            el,
            if failures.is_empty() { String::new() } else { format!("; failures: {failures:?}") }
        ),
    )
}

// 2
fn prox_correctness() -> Verdict {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_excess = f64::NEG_INFINITY;
    let mut failures: Vec<String> = Vec::new();
    let ops = ["lp", "lp_box", "l1", "l1_box", "box", "nonpositive", "zero"];
    for op in ops {
        for k in 0..PROX_INSTANCES {
            let p = if k % 2 == 0 { 0.5 } else { 0.8 };
            let gamma = 10f64.powf(rng.random_range(-3.0..3.0));
            let z: f64 = rng.random_range(-20.0..20.0);
            let weight: f64 = rng.random_range(0.05..2.0);
            let radius: f64 = rng.random_range(0.1..25.0);
            let (phi, lo, hi): (Box<dyn ProxOracle>, f64, f64) = match op {
                "lp" => (Box::new(LpPenalty::unbounded(weight, p)), -21.0, 21.0),
                "lp_box" => (Box::new(LpPenalty { weight, p, radius }), -radius, radius),
                "l1" => (Box::new(L1Norm { lambda: weight }), -21.0, 21.0),
                "l1_box" => (Box::new(L1Box { lambda: weight, radius }), -radius, radius),
                "box" => {
                    let a: f64 = rng.random_range(-20.0..20.0);
                    let b = a + rng.random_range(0.0..10.0);
                    (Box::new(BoxIndicator::new(vec![a], vec![b]).unwrap()), a, b)
                }
                "nonpositive" => (Box::new(NonpositiveIndicator), -21.0, 0.0),
                _ => (Box::new(Zero), -21.0, 21.0),
            };
            let u = phi.prox(&[z], gamma)[0];
            let qu = prox_objective(phi.as_ref(), z, gamma, u);
            let (_, qg) = grid_min(|v| prox_objective(phi.as_ref(), z, gamma, v), lo, hi, &[0.0, z]);
            let excess = qu - qg;
            worst_excess = worst_excess.max(excess);
            if !(excess <= PROX_TOL) {
                failures.push(format!("{op} z={z} gamma={gamma:e} p={p}: excess {excess:e}"));
            }
        }
    }
    let el = t0.elapsed();
    let pass = failures.is_empty() && el < PROX_TIME;
    verdict(
        pass,
        format!(
            "{} operators x {PROX_INSTANCES} instances, worst q(prox) - q(grid) = {worst_excess:.2e} (tol {PROX_TOL:e}), {el:.2?}{}",
            ops.len(),
            if failures.is_empty() { String::new() } else { format!("; {} failures, first {:?}", failures.len(), &failures[..failures.len().min(3)]) }
        ),
    )
}

// 3
fn condition_enforcement(runs: &[&Run]) -> Verdict {
    let mut rows = 0;
    let mut bad = Vec::new();
    for run in runs {
        for s in &run.rec.steps {
            rows += 1;
            let rep = condition_check(&run.case.problem, &s.x_t, &s.x_next, &s.y_t, s.row.beta_t, s.row.mu_t);
            if !(rep.margin_i >= -rep.tol_cond && rep.margin_ii >= -rep.tol_cond) {
                bad.push(format!("{} t={}", run.case.name, s.row.t));
            }
        }
    }
    verdict(
        bad.is_empty(),
        format!("{rows} accepted rows over {} runs re-verified, {} violations {:?}", runs.len(), bad.len(), &bad[..bad.len().min(3)]),
    )
}

// 4
fn theta_monotone(runs: &[&Run]) -> Verdict {
    let mut lines = Vec::new();
    let mut pass = true;
    for run in runs {
        let p = &run.case.problem;
        let inf = p.inf_fg_lower_bound.expect("every family supplies a lower bound");
        let beta0 = run.case.cfg.schedule.beta_at(0);
        let mut prev = theta_value(p, &run.rec.x0, beta0, &run.rec.y0, inf).unwrap();
        let mut violations = 0;
        let mut worst = f64::NEG_INFINITY;
        for s in &run.rec.steps {
            let th = theta_value(p, &s.x_next, s.row.beta_t, &s.y_t, inf).unwrap();
            let excess = (th - prev) / prev.abs().max(f64::MIN_POSITIVE);
            worst = worst.max(excess);
            if excess > THETA_REL_TOL {
                violations += 1;
            }
            prev = th;
        }
        // The solver's own full assertion pass must agree with the recorded run.
        let mut cfg = run.case.cfg.clone();
        cfg.assert_level = AssertLevel::Full;
        let solved = solve(p, &cfg, &run.case.x0, &run.case.y0);
        let same = match &solved {
            Ok(out) => out.trace.len() == run.rec.steps.len()
                && out.trace.iter().zip(&run.rec.steps).all(|(a, b)| *a == b.row),
            Err(_) => false,
        };
        let ok = violations == 0 && same && run.elapsed < MERIT_RUN_TIME && run.rec.steps.len() >= MERIT_RUN_ITERS;
        pass &= ok;
        lines.push(format!(
            "{}: {} rows, worst rel increase {worst:.1e}, {violations} violations, full asserts {}, {:.2?}",
            run.case.name,
            run.rec.steps.len(),
            if same { "ok" } else { "FAILED" },
            run.elapsed
        ));
    }
    verdict(pass, format!("tol {THETA_REL_TOL:e}; {}", lines.join("; ")))
}

// 5
fn lipschitz_rate(run: &Run) -> Verdict {
    let trace = run.rec.trace();
    let consts = rate_constants(&run.case.problem, &run.case.cfg, &run.rec.initial, &trace);
    let Some(k0) = consts.k0.value else {
        return verdict(false, "K0 unavailable");
    };
    let delta = run.case.cfg.schedule.delta;
    let rows: Vec<_> = run.rec.steps.iter().filter(|s| s.row.t >= 1).collect();
    if rows.len() < MIMO_RATE_HORIZON {
        return verdict(false, format!("only {} rows with t >= 1", rows.len()));
    }
    let mut sum = 0.0;
    let mut violations = 0;
    let mut max_ratio = 0.0f64;
    for (k, s) in rows.iter().take(MIMO_RATE_HORIZON).enumerate() {
        let big_t = (k + 1) as f64;
        let d = sdcam::linalg::dist(&s.x_next, &s.x_t);
        sum += d * d / s.row.mu_t;
        let (lhs, rhs) = (sum / big_t, 2.0 * k0 / big_t);
        max_ratio = max_ratio.max(lhs / rhs);
        if !within(lhs, rhs) {
            violations += 1;
        }
    }
    verdict(
        violations == 0 && delta == 1.0 / 3.0,
        format!("delta {delta:.6}, K0 {k0:.4e}, T = 1..{MIMO_RATE_HORIZON}, max lhs/rhs {max_ratio:.3e}, {violations} violations"),
    )
}

// 6
fn full_domain_gap(run: &Run) -> Verdict {
    let trace = run.rec.trace();
    let consts = rate_constants(&run.case.problem, &run.case.cfg, &run.rec.initial, &trace);
    let Some(m3) = consts.m3.value else {
        return verdict(false, "M3 unavailable");
    };
    let p = &run.case.problem;
    let beta0 = run.case.cfg.schedule.beta_at(0);
    let mut violations = 0;
    let mut max_ratio = 0.0f64;
    let mut check = |gap: f64, beta: f64| {
        let (lhs, rhs) = (gap * gap, 2.0 * m3 / beta);
        max_ratio = max_ratio.max(lhs / rhs);
        if !within(lhs, rhs) {
            violations += 1;
        }
    };
    // t = 0 uses beta_{-1} = beta_0.
    check(sdcam::linalg::dist(&p.c.eval(&run.rec.x0), &run.rec.y0), beta0);
    for s in &run.rec.steps {
        check(sdcam::linalg::dist(&p.c.eval(&s.x_next), &s.y_next), s.row.beta_t);
    }
    verdict(
        violations == 0,
        format!("{} iterates, M3 {m3:.4e}, max lhs/rhs {max_ratio:.3e}, {violations} violations", run.rec.steps.len() + 1),
    )
}

// 7
fn step_size_bound(run: &Run) -> Verdict {
    let trace = run.rec.trace();
    let c = rate_constants(&run.case.problem, &run.case.cfg, &run.rec.initial, &trace);
    let (Some(l), Some(l_c), Some(m_c), Some(m0)) = (c.l.value, c.l_c.value, c.m_c.value, c.m0.value) else {
        return verdict(false, "L, L_c, M_c or M0 unavailable");
    };
    let rho = run.case.cfg.rho;
    let mut violations = 0;
    let mut min_ratio = f64::INFINITY;
    for s in &run.rec.steps {
        let bound = rho / (l + (l_c * m0 + m_c * m_c) * s.row.beta_t);
        min_ratio = min_ratio.min(s.row.mu_t / bound);
        if !within(bound, s.row.mu_t) {
            violations += 1;
        }
    }
    verdict(
        violations == 0,
        format!("L {l:.3}, L_c {l_c:.3}, M_c {m_c:.3}, M0 {m0:.3}, min mu_t/bound {min_ratio:.3e}, {violations} violations"),
    )
}

/// Independently confirms that `picked` is exactly the set of `T > 1` with
/// `a_T <= mean(a_1..a_{T-1})`.
fn subsequence_errors(a: &[f64]) -> usize {
    let picked = select_subsequence(a);
    let mut errors = 0;
    let mut sum = 0.0;
    let mut expected = Vec::new();
    for (k, &v) in a.iter().enumerate() {
        if k >= 1 && v <= sum / k as f64 {
            expected.push(k + 1);
        }
        sum += v;
    }
    if picked != expected {
        errors += 1;
    }
    for &t in &picked {
        let b_prev = a[..t - 1].iter().sum::<f64>() / (t - 1) as f64;
        if !(a[t - 1] <= b_prev) {
            errors += 1;
        }
    }
    errors
}

// 8
fn subsequence(runs: &[&Run]) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut errors = 0;
    let mut selected = 0;
    for k in 0..SUBSEQ_SEQUENCES {
        let len = rng.random_range(2..400);
        let a: Vec<f64> = (0..len)
            .map(|i| {
                let u: f64 = rng.random();
                match k % 3 {
                    0 => u,
                    1 => (-u.ln()).powi(3),
                    _ => u / (i as f64 + 1.0),
                }
            })
            .collect();
        errors += subsequence_errors(&a);
        selected += select_subsequence(&a).len();
    }
    for run in runs {
        let a: Vec<f64> = run.rec.steps.iter().map(|s| s.row.scaled_step.powi(2)).collect();
        errors += subsequence_errors(&a);
        selected += select_subsequence(&a).len();
    }
    verdict(
        errors == 0,
        format!("{SUBSEQ_SEQUENCES} random sequences + {} run traces, {selected} indices selected, {errors} violations", runs.len()),
    )
}

// 9
fn qcqp_beta_sweep(runs: &[Run], elapsed: Duration) -> Verdict {
    let mut wins = 0;
    let mut lines = Vec::new();
    for pair in runs.chunks(2) {
        let (big, small) = (&pair[0], &pair[1]);
        let last = |r: &Run| r.rec.steps.last().expect("non-empty run").row.clone();
        let (lb, ls) = (last(big), last(small));
        let (fb, fs) = (lb.rel_feas.unwrap(), ls.rel_feas.unwrap());
        let ok = fb < fs && ls.scaled_step < lb.scaled_step;
        wins += ok as usize;
        lines.push(format!(
            "{}: feas {fb:.2e} vs {fs:.2e}, scaled step {:.2e} vs {:.2e} {}",
            big.case.name,
            lb.scaled_step,
            ls.scaled_step,
            if ok { "holds" } else { "fails" }
        ));
    }
    verdict(
        wins >= 2 && elapsed < QCQP_SWEEP_TIME,
        format!("beta0 1 vs 1e-4, {wins}/3 seeds, {elapsed:.2?}; {}", lines.join("; ")),
    )
}

// 10
fn mlp_beta_sweep(runs: &[Run]) -> Verdict {
    let mut wins = 0;
    let mut lines = Vec::new();
    for trio in runs.chunks(3) {
        let finals: Vec<f64> = trio
            .iter()
            .map(|r| r.rec.steps.last().expect("non-empty run").row.scaled_step)
            .collect();
        let ok = finals[0] < finals[1] && finals[0] < finals[2];
        wins += ok as usize;
        lines.push(format!("{}: {:.3e} / {:.3e} / {:.3e}", trio[0].case.name, finals[0], finals[1], finals[2]));
    }
    verdict(
        wins >= 2,
        format!("base beta0 {MLP_BETA0}, ratios 0.5/1/1.5, {wins}/3 seeds; {}", lines.join("; ")),
    )
}

// 11
fn delta_choice() -> Verdict {
    let eps = [0.5, 1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-9, 1e-12];
    let bad: Vec<f64> = eps.iter().copied().filter(|&e| suggest_delta(e, e) != Ok(1.0 / 3.0)).collect();
    verdict(bad.is_empty(), format!("{} tolerances, exact mismatches {bad:?}", eps.len()))
}

// 12
fn blocked_schedule() -> Verdict {
    let mut violations = 0;
    let mut checked = 0;
    for k in [1usize, 3, 10] {
        for (beta0, delta) in [(1.0, 0.5), (2.5, 0.3), (1e-3, 1.0 / 3.0), (10.0, 0.9)] {
            let s = ScheduleSpec::blocked(beta0, delta, k);
            let (a0, g0) = (s.alpha0(), s.gamma0());
            let mut prev = 0.0;
            for t in 0..=SCHEDULE_HORIZON {
                let b = s.beta_at(t);
                let base = ((t + 1) as f64).powf(delta);
                let lo_ok = a0 * base <= b * (1.0 + SCHEDULE_REL_TOL);
                let hi_ok = b <= g0 * base * (1.0 + SCHEDULE_REL_TOL);
                if !(lo_ok && hi_ok && b >= prev) {
                    violations += 1;
                }
                prev = b;
                checked += 1;
            }
        }
    }
    verdict(
        violations == 0,
        format!("{checked} values over K in {{1,3,10}}, rel tol {SCHEDULE_REL_TOL:e}, {violations} violations"),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    results.push((1, "oracle soundness", oracle_soundness()));
    results.push((2, "prox correctness", prox_correctness()));

    let merit_cases = vec![
        mimo_case(0, MIMO_RATE_ITERS),
        mlp_case(1, MLP_BETA0, MERIT_RUN_ITERS),
        qcqp_case(1, &qcqp::QcqpParams::default(), 1.0, MERIT_RUN_ITERS),
    ];
    let merit_runs: Vec<Run> = merit_cases.into_iter().map(run_case).collect();

    let t9 = Instant::now();
    let big = qcqp::QcqpParams {
        n: 200,
        m: 20,
        ..Default::default()
    };
    let qcqp_cases: Vec<Case> = (1..=3)
        .flat_map(|seed| [1.0, 1e-4].map(|b| qcqp_case(seed, &big, b, QCQP_SWEEP_ITERS)))
        .collect();
    let qcqp_runs: Vec<Run> = qcqp_cases.into_par_iter().map(run_case).collect();
    let qcqp_elapsed = t9.elapsed();

    let mlp_cases: Vec<Case> = (1..=3)
        .flat_map(|seed| [0.5, 1.0, 1.5].map(|r| mlp_case(seed, r * MLP_BETA0, MLP_SWEEP_ITERS)))
        .collect();
    let mlp_runs: Vec<Run> = mlp_cases.into_par_iter().map(run_case).collect();

    let all: Vec<&Run> = merit_runs.iter().chain(&qcqp_runs).chain(&mlp_runs).collect();
    results.push((3, "sufficient-decrease enforcement", condition_enforcement(&all)));
    results.push((4, "merit monotonicity", theta_monotone(&merit_runs.iter().collect::<Vec<_>>())));
    results.push((5, "Lipschitz-h rate bound", lipschitz_rate(&merit_runs[0])));
    results.push((6, "full-domain gap bound", full_domain_gap(&merit_runs[1])));
    results.push((7, "step-size lower bound", step_size_bound(&merit_runs[2])));
    results.push((8, "subsequence selection", subsequence(&all)));
    results.push((9, "QCQP beta0 comparison", qcqp_beta_sweep(&qcqp_runs, qcqp_elapsed)));
    results.push((10, "MLP beta0 comparison", mlp_beta_sweep(&mlp_runs)));
    results.push((11, "delta for equal tolerances", delta_choice()));
    results.push((12, "blocked schedule sandwich", blocked_schedule()));

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (id, name, v) in &results {
        println!("criterion {id:>2} {} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += !v.pass as usize;
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
