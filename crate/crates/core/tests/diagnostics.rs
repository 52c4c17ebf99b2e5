mod common;

use common::{identity_map, qcqp_case, record_run, HalfSquare};
use sdcam::diagnostics::*;
use sdcam::problems::qcqp::{QcqpInstance, QcqpParams};
use sdcam::prox::{SingletonIndicator, Zero};
use sdcam::solver::{solve, InitialInfo, ScheduleSpec, SolverConfig};
use sdcam::Problem;

fn quadratic_identity(h_zero: bool) -> Problem {
    let h: Box<dyn sdcam::ProxOracle> = if h_zero {
        Box::new(Zero)
    } else {
        Box::new(SingletonIndicator { b: vec![0.0] })
    };
    Problem::new(Box::new(HalfSquare(1)), Box::new(Zero), h, Box::new(identity_map(1)))
        .unwrap()
        .with_inf_fg_lower_bound(0.0)
}

#[test]
fn residual_hand_example() {
    // psi = -1 - 2 - 2(-0.75) = -1.5, xi = 1, residual = |0.25 - 1.5 + 1|.
    let p = quadratic_identity(true);
    let r = stationarity_residual(&p, &[1.0], &[0.25], &[0.0], 1.0, 2.0, 1.0);
    assert!((r - 0.25).abs() < 1e-15);
}

fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(x).map(|(u, v)| u * v).sum()).collect()
}

#[test]
fn qcqp_residual_matches_scalar_recomputation() {
    let params = QcqpParams { n: 6, m: 3, ..Default::default() };
    let inst = QcqpInstance::generate(4, &params).unwrap();
    let p = inst.problem();
    let cfg = sdcam::problems::qcqp::default_config(1.0, 40);
    let rec = record_run(&p, &cfg, &inst.x0(), &inst.y0()).unwrap();
    let d = &inst.data;
    for s in &rec.steps {
        let (x, xn, y) = (&s.x_t, &s.x_next, &s.y_t);
        let t = s.row.t;
        let beta = s.row.beta_t;
        let beta_prev = if t == 0 { cfg.schedule.beta0 } else { cfg.schedule.beta_at(t - 1) };
        let c: Vec<f64> = (0..params.m)
            .map(|i| {
                let qx = mat_vec(&d.q[i], x);
                0.5 * qx.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                    + d.b[i].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                    + d.r_i[i]
            })
            .collect();
        let jt = |w: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; params.n];
            for i in 0..params.m {
                let qx = mat_vec(&d.q[i], x);
                for k in 0..params.n {
                    out[k] += w[i] * (qx[k] + d.b[i][k]);
                }
            }
            out
        };
        let grad = |z: &[f64]| -> Vec<f64> { mat_vec(&d.q0, z).iter().zip(&d.b0).map(|(a, b)| a + b).collect() };
        let diff: Vec<f64> = c.iter().zip(y).map(|(a, b)| a - b).collect();
        let jd = jt(&diff);
        let xi: Vec<f64> = diff.iter().map(|v| beta_prev * v).collect();
        let jxi = jt(&xi);
        let (gt, gn) = (grad(x), grad(xn));
        let mut sq = 0.0;
        for k in 0..params.n {
            let psi = -gt[k] - beta * jd[k] - 2.0 / s.row.mu_t * (xn[k] - x[k]);
            sq += (gn[k] + psi + jxi[k]).powi(2);
        }
        let expect = sq.sqrt();
        assert!(
            (s.row.residual - expect).abs() <= 1e-9 * (1.0 + expect),
            "t={t}: {} vs {expect}",
            s.row.residual
        );
    }
}

#[test]
fn certificate_examples() {
    let p = quadratic_identity(true);
    let c = certificate(&p, &[1.0], &[1.0], &[1.0], &[-1.0], &[0.0], 1e-9, 1e-9, 1e-9);
    assert_eq!((c.d1, c.d2, c.d3), (0.0, 0.0, 0.0));
    assert!(c.pass);
    let c = certificate(&p, &[1.0], &[0.5], &[0.0], &[0.0], &[0.0], 2.0, 0.4, 2.0);
    assert_eq!((c.d1, c.d2, c.d3), (1.0, 0.5, 1.0));
    assert!(!c.pass);
}

#[test]
fn certificate_reproduces_trace_quantities() {
    let case = qcqp_case(2, &QcqpParams::default(), 1.0, 30);
    let rec = record_run(&case.problem, &case.cfg, &case.x0, &case.y0).unwrap();
    let p = &case.problem;
    for s in rec.steps.iter().skip(1) {
        let beta_prev = case.cfg.schedule.beta_at(s.row.t - 1);
        let cx = p.c.eval(&s.x_t);
        let grad_t = p.f.grad(&s.x_t);
        let diff: Vec<f64> = cx.iter().zip(&s.y_t).map(|(a, b)| a - b).collect();
        let jd = p.c.vjp(&s.x_t, &diff);
        let psi: Vec<f64> = (0..grad_t.len())
            .map(|k| -grad_t[k] - s.row.beta_t * jd[k] - 2.0 / s.row.mu_t * (s.x_next[k] - s.x_t[k]))
            .collect();
        let xi: Vec<f64> = diff.iter().map(|v| beta_prev * v).collect();
        let cert = certificate(p, &s.x_next, &s.y_t, &s.x_t, &psi, &xi, 1.0, 1.0, 1.0);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + b);
        assert!(close(cert.d1, s.row.residual));
        assert!(close(cert.d2, s.row.prev_gap));
        assert!(close(cert.d3, s.row.step_norm));
    }
}

fn contraction_cfg(iters: usize) -> SolverConfig {
    SolverConfig::new(ScheduleSpec::power(0.7, 0.5), 50.0, 1.0, 0.6, 1.3, iters)
}

#[test]
fn rate_constants_examples() {
    let p = quadratic_identity(false);
    let cfg = contraction_cfg(20);
    let out = solve(&p, &cfg, &[1.0], &[0.0]).unwrap();
    let k = rate_constants(&p, &cfg, &out.initial, &out.trace);
    // The first step lands at 0.15, so the square-root branch is below gap0 = 1.
    assert_eq!(k.m0.value, Some(1.0));
    assert_eq!(k.m0.provenance, Provenance::Computed);
    let m1 = 0.5 * 0.15f64.powi(2) + 0.5 * 0.7 * 0.15f64.powi(2);
    assert!((k.m1.value.unwrap() - m1).abs() < 1e-14);
    for t in [k.k0, k.lambda1, k.m3, k.m2] {
        assert_eq!(t.value, None);
        assert_eq!(t.provenance, Provenance::Unavailable);
    }
    assert_eq!(k.l.provenance, Provenance::UserSupplied);
    assert_eq!(k.alpha0.value, Some(0.7));

    let empty = rate_constants(&p, &cfg, &out.initial, &[]);
    assert_eq!(empty.m0.value, None);
    assert_eq!(empty.lambda5.value, None);

    // With M_h given the Lipschitz-regime constants appear.
    let p = quadratic_identity(true).with_h_lipschitz_bound(2.0);
    let init = InitialInfo { fg0: 0.5, gap0: 1.0, h_y0: 0.0 };
    let k = rate_constants(&p, &cfg, &init, &out.trace);
    let mh_term = 0.7 * 1.5 * 4.0 / (2.0 * 0.7 * 0.7);
    assert!((k.k0.value.unwrap() - (k.m1.value.unwrap() + mh_term)).abs() < 1e-14);
    let l1 = 1.0 + 2f64.powf(0.5) * 2.0 * 0.0;
    assert_eq!(k.lambda1.value, Some(l1));
}

fn power_iteration_sym(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
    let mut lam = 0.0;
    for _ in 0..5000 {
        let w = mat_vec(a, &v);
        let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nw == 0.0 {
            return 0.0;
        }
        lam = nw / v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.iter().map(|x| x / nw).collect();
    }
    lam
}

#[test]
fn qcqp_constants_agree_with_power_iteration() {
    let params = QcqpParams { n: 8, m: 3, ..Default::default() };
    let inst = QcqpInstance::generate(5, &params).unwrap();
    let p = inst.problem();
    let cfg = sdcam::problems::qcqp::default_config(1.0, 5);
    let out = solve(&p, &cfg, &inst.x0(), &inst.y0()).unwrap();
    let k = rate_constants(&p, &cfg, &out.initial, &out.trace);
    let d = &inst.data;
    let norms: Vec<f64> = d.q.iter().map(|q| power_iteration_sym(q)).collect();
    let l = power_iteration_sym(&d.q0);
    let l_c = norms.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = d.r * (params.n as f64).sqrt();
    let m_c = norms
        .iter()
        .zip(&d.b)
        .map(|(q, b)| (q * scale + b.iter().map(|v| v * v).sum::<f64>().sqrt()).powi(2))
        .sum::<f64>()
        .sqrt();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * b.max(1.0);
    assert!(close(k.l.value.unwrap(), l));
    assert!(close(k.l_c.value.unwrap(), l_c));
    assert!(close(k.m_c.value.unwrap(), m_c));
    // h is an indicator, so h o c has no finite bound and M3 stays unavailable.
    assert_eq!(k.m3.value, None);
    assert!(k.lambda5.value.is_some());
}

#[test]
fn rate_check_edges() {
    let p = quadratic_identity(false);
    let cfg = contraction_cfg(2);
    let out = solve(&p, &cfg, &[1.0], &[0.0]).unwrap();
    let k = rate_constants(&p, &cfg, &out.initial, &out.trace);

    let rep = rate_bound_check(&out.trace, &k, Regime::LipschitzH);
    let lip = rep.get("lip_step_sq_over_mu").unwrap();
    assert_eq!(lip.outcome, CheckOutcome::NotCheckable { missing: vec!["K0"] });
    assert!(!lip.is_checked());
    let step = rep.get("step_size_lower_bound").unwrap();
    match &step.outcome {
        CheckOutcome::Checked { instances, violations, .. } => {
            assert_eq!(*instances, 2);
            assert!(violations.is_empty());
        }
        o => panic!("{o:?}"),
    }

    // Only the row with t = 1 enters the averages, so T = 1 is the sole horizon.
    let p = quadratic_identity(true).with_h_lipschitz_bound(1.0);
    let k = rate_constants(&p, &cfg, &out.initial, &out.trace);
    let rep = rate_bound_check(&out.trace, &k, Regime::LipschitzH);
    for name in ["lip_scaled_step_sq", "lip_step_sq_over_mu", "lip_prev_gap", "lip_residual_min"] {
        match &rep.get(name).unwrap().outcome {
            CheckOutcome::Checked { instances, .. } => assert_eq!(*instances, 1, "{name}"),
            o => panic!("{name}: {o:?}"),
        }
    }
    assert_eq!(rep.total_violations(), 0);

    // A doctored row with an enormous step is flagged.
    let mut bad = out.trace.clone();
    bad[1].step_norm = 1e6;
    let rep = rate_bound_check(&bad, &k, Regime::LipschitzH);
    let r = rep.get("lip_step_sq_over_mu").unwrap();
    assert_eq!(r.violation_count(), 1);
}

#[test]
fn subsequence_examples() {
    assert_eq!(select_subsequence(&[4.0, 2.0, 3.0, 1.0]), vec![2, 3, 4]);
    assert_eq!(select_subsequence(&[5.0; 4]), vec![2, 3, 4]);
    assert!(select_subsequence(&[1.0, 2.0, 3.0, 4.0]).is_empty());
    assert!(select_subsequence(&[]).is_empty());
    let det = select_subsequence_detailed(&[4.0, 2.0, 3.0, 1.0]);
    assert_eq!(det[1].t, 3);
    assert_eq!(det[1].a_t, 3.0);
    assert_eq!(det[1].b_prev, 3.0);
}

#[test]
fn suggest_delta_cases() {
    assert_eq!(suggest_delta(0.1, 0.1).unwrap(), 1.0 / 3.0);
    assert!((suggest_delta(1e-2, 1e-4).unwrap() - 0.5).abs() < 1e-15);
    assert!((suggest_delta(1e-4, 1e-2).unwrap() - 0.2).abs() < 1e-15);
    for (a, b) in [(0.0, 0.1), (1.0, 0.1), (0.1, -1.0), (f64::NAN, 0.1)] {
        assert!(matches!(suggest_delta(a, b), Err(DiagnosticsError::ToleranceRange(..))));
    }
}

#[test]
fn merit_function_examples() {
    let p = quadratic_identity(false);
    assert_eq!(h_value(&p, &[2.0], 2.0, &[0.0]).unwrap(), 6.0);
    assert_eq!(theta_value(&p, &[2.0], 2.0, &[0.0], 0.0).unwrap(), 3.0);
    assert_eq!(theta_value(&p, &[2.0], 2.0, &[0.0], -2.0).unwrap(), 4.0);
    assert!(matches!(h_value(&p, &[2.0], 2.0, &[1.0]), Err(DiagnosticsError::Infeasible("y"))));
    let boxed = Problem::new(
        Box::new(HalfSquare(1)),
        Box::new(sdcam::prox::BoxIndicator::new(vec![-1.0], vec![1.0]).unwrap()),
        Box::new(Zero),
        Box::new(identity_map(1)),
    )
    .unwrap();
    assert!(matches!(theta_value(&boxed, &[2.0], 1.0, &[0.0], 0.0), Err(DiagnosticsError::Infeasible("x"))));
}

#[test]
fn regime_follows_available_constants() {
    use sdcam::problems::{mimo, mlp};
    let mimo = mimo::MimoInstance::generate(0, &Default::default()).unwrap().problem();
    let mlp = mlp::MlpInstance::generate(0, &Default::default()).unwrap().problem();
    let qcqp = QcqpInstance::generate(0, &Default::default()).unwrap().problem();
    assert_eq!(Regime::for_problem(&mimo), Regime::LipschitzH);
    assert_eq!(Regime::for_problem(&mlp), Regime::FullDomainH);
    assert_eq!(Regime::for_problem(&qcqp), Regime::BoundedDomains);
}
