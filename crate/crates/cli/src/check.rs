//! Self-verification of an instance: derivative oracles, prox operators,
//! schedules and family-specific structure.

use sdcam::problems::Instance;
use sdcam::{check_gradient, check_vjp, ExtReal, ProxOracle, ScheduleSpec, SmoothOracle};

use crate::error::{CmdResult, Failure};

pub const FD_LIMIT: f64 = 1e-5;
pub const PROX_TOL: f64 = 1e-8;
const POINTS: usize = 10;

/// Deterministic pseudo-noise in `[-1, 1]`.
fn wiggle(i: usize, k: usize) -> f64 {
    ((i as f64 + 1.0) * 12.9898 + (k as f64 + 1.0) * 78.233).sin()
}

/// Adds a fixed offset to one gradient coordinate; a negative control.
struct Corrupted<'a> {
    f: &'a dyn SmoothOracle,
    index: usize,
}

impl SmoothOracle for Corrupted<'_> {
    fn dim(&self) -> usize {
        self.f.dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.f.eval(x)
    }
    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.f.grad(x);
        g[self.index] += 1e-2 * (1.0 + g[self.index].abs());
        g
    }
}

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, ok: bool, name: &str, detail: impl std::fmt::Display) {
        println!("{} {name:<14} {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failures += 1;
        }
    }
}

fn finite(v: ExtReal) -> f64 {
    v.finite().unwrap_or(f64::INFINITY)
}

/// Coordinatewise optimality of `prox(z, gamma)` against a grid over each
/// probed coordinate with the others held fixed. Returns the worst excess.
fn prox_grid_excess(phi: &dyn ProxOracle, z: &[f64], gamma: f64, coords: &[usize]) -> f64 {
    let out = phi.prox(z, gamma);
    let base = finite(phi.eval(&out));
    if !base.is_finite() {
        return f64::INFINITY;
    }
    let mut worst = 0.0f64;
    let mut v = out.clone();
    for &i in coords {
        let q = |u: f64, v: &mut Vec<f64>| {
            v[i] = u;
            let val = (u - z[i]).powi(2) / (2.0 * gamma) + finite(phi.eval(v)) - base;
            v[i] = out[i];
            val
        };
        let at_out = q(out[i], &mut v);
        let lo = 0f64.min(z[i]).min(out[i]) - 1.0;
        let hi = 0f64.max(z[i]).max(out[i]) + 1.0;
        let mut best = (out[i], at_out);
        for u in [0.0, z[i], lo, hi] {
            let val = q(u, &mut v);
            if val < best.1 {
                best = (u, val);
            }
        }
        let mut h = (hi - lo) / 2000.0;
        for k in 0..=2000 {
            let u = lo + h * k as f64;
            let val = q(u, &mut v);
            if val < best.1 {
                best = (u, val);
            }
        }
        for _ in 0..4 {
            let (a, b) = ((best.0 - h).max(lo), (best.0 + h).min(hi));
            h = (b - a) / 400.0;
            for k in 0..=400 {
                let u = a + h * k as f64;
                let val = q(u, &mut v);
                if val < best.1 {
                    best = (u, val);
                }
            }
        }
        let excess = (at_out - best.1) / (1.0 + base.abs());
        worst = worst.max(excess);
    }
    worst
}

fn sandwich_ok(s: &ScheduleSpec) -> bool {
    (0..=100_000usize).all(|t| {
        let base = ((t + 1) as f64).powf(s.delta);
        let b = s.beta_at(t);
        s.alpha0() * base <= b * (1.0 + 1e-12) && b <= s.gamma0() * base * (1.0 + 1e-12) && s.beta_at(t + 1) >= b
    })
}

fn family_report(inst: &Instance, rep: &mut Report) {
    let p = inst.problem();
    let show = |v: Option<f64>| v.map_or("unavailable".to_string(), |v| format!("{v:.6e}"));
    println!(
        "info constants     L={} L_c={} M_c={} M_h={} inf_fg>={} sup|f+g|<={} sup h(c)<={}",
        show(p.f.lipschitz_bound()),
        show(p.c.jac_lipschitz_bound()),
        show(p.c.jac_norm_bound()),
        show(p.h_lipschitz_bound),
        show(p.inf_fg_lower_bound),
        show(p.fg_abs_sup_bound),
        show(p.h_sup_on_image_bound),
    );
    match inst {
        Instance::Qcqp(q) => {
            let mins = q.min_eigenvalues();
            let worst = mins.iter().copied().fold(f64::INFINITY, f64::min);
            rep.line(worst >= -1e-10, "psd", format!("{} blocks, smallest eigenvalue {worst:.3e}", mins.len()));
            let n = q.params.n;
            let identity = (0..n).all(|i| (0..n).all(|j| q.data.q0[i][j] == if i == j { 1.0 } else { 0.0 }));
            rep.line(identity, "q0_identity", format!("n = {n}"));
            let fx = q.relative_feasibility(&q.x0());
            println!("info start         relative feasibility {fx:.6e}");
        }
        Instance::Mimo(m) => {
            let p_psk = m.params.p_psk as f64;
            let on_grid = m.data.theta_star.iter().all(|t| {
                let k = t * p_psk / std::f64::consts::TAU;
                (k - k.round()).abs() < 1e-9
            });
            rep.line(on_grid, "constellation", format!("{} symbols", m.data.theta_star.len()));
        }
        Instance::Mlp(m) => {
            let x0 = m.x0();
            let inside = x0.iter().all(|v| v.abs() <= m.data.c_radius);
            rep.line(inside, "start_in_box", format!("radius {:.6e}", m.data.c_radius));
        }
    }
}

pub fn cmd_check(inst: &Instance, corrupt_gradient: bool) -> CmdResult {
    inst.validate().map_err(|e| Failure::usage(format!("invalid instance: {e}")))?;
    let p = inst.problem();
    let n = p.n();
    println!("info instance      {} seed {} (dim x = {n}, dim c = {})", inst.family(), inst.seed(), p.m());
    let mut rep = Report { failures: 0 };
    family_report(inst, &mut rep);

    // Points in dom g near the start.
    let x0 = inst.x0();
    let spread = 0.1 * (1.0 + x0.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    let points: Vec<Vec<f64>> = (0..POINTS)
        .map(|k| {
            if k == 0 {
                return x0.clone();
            }
            let z: Vec<f64> = x0.iter().enumerate().map(|(i, v)| v + spread * wiggle(i, k)).collect();
            p.g.prox(&z, 1e-12)
        })
        .collect();

    let corrupted = Corrupted { f: p.f.as_ref(), index: n / 2 };
    let f: &dyn SmoothOracle = if corrupt_gradient { &corrupted } else { p.f.as_ref() };
    let mut worst = (0.0f64, 0usize, None);
    let mut note = None;
    for (k, x) in points.iter().enumerate() {
        let h = sdcam::oracle::default_fd_step(x).clamp(1e-8, 1e-2);
        let g = check_gradient(f, x, h);
        if let Some(msg) = g.failure {
            note = Some(format!("point {k}: {msg}"));
        }
        if g.max_rel_error >= worst.0 {
            worst = (g.max_rel_error, k, g.worst);
        }
    }
    let what = if n <= 32 { "coordinate" } else { "direction" };
    let location = worst.2.map_or(String::new(), |i| format!(" at {what} {i} of point {}", worst.1));
    rep.line(
        note.is_none() && worst.0 <= FD_LIMIT,
        "gradient",
        format!("{POINTS} points, max rel err {:.3e}{location} (limit {FD_LIMIT:e}){}", worst.0, note.map_or(String::new(), |m| format!("; {m}"))),
    );

    let mut vjp_worst = (0.0f64, 0.0f64);
    let mut vjp_pass = true;
    for x in &points {
        match check_vjp(p.c.as_ref(), x, 3) {
            Ok(r) => {
                vjp_pass &= r.pass;
                vjp_worst.0 = vjp_worst.0.max(r.max_rel_error);
                vjp_worst.1 = vjp_worst.1.max(r.linearity_error);
            }
            Err(e) => {
                rep.line(false, "vjp", e);
                return finish(rep);
            }
        }
    }
    rep.line(
        vjp_pass,
        "vjp",
        format!("{POINTS} points, max rel err {:.3e}, linearity {:.3e}", vjp_worst.0, vjp_worst.1),
    );

    for (name, phi, center) in [("prox_g", p.g.as_ref(), x0.clone()), ("prox_h", p.h.as_ref(), p.c.eval(&x0))] {
        let dim = center.len();
        let coords: Vec<usize> = (0..dim.min(4)).map(|j| j * dim / dim.min(4)).collect();
        let mut excess = 0.0f64;
        let mut cases = 0;
        for (k, gamma) in [1e-3, 1e-1, 1.0, 10.0, 1e3].into_iter().enumerate() {
            for scale in [0.5, 3.0] {
                let z: Vec<f64> = center.iter().enumerate().map(|(i, v)| v + scale * wiggle(i, k + 20)).collect();
                excess = excess.max(prox_grid_excess(phi, &z, gamma, &coords));
                cases += 1;
            }
        }
        rep.line(excess <= PROX_TOL, name, format!("{cases} cases, worst excess over grid {excess:.3e} (limit {PROX_TOL:e})"));
    }

    let s = inst_schedule(inst);
    let mut all = vec![ScheduleSpec::power(s.beta0, s.delta)];
    all.extend([1, 3, 10].map(|k| ScheduleSpec::blocked(s.beta0, s.delta, k)));
    let ok = all.iter().all(sandwich_ok);
    rep.line(ok, "schedule", format!("power and blocked K in {{1, 3, 10}}, delta {}, t <= 1e5", s.delta));
    finish(rep)
}

fn inst_schedule(inst: &Instance) -> ScheduleSpec {
    use crate::config::{default_beta0, Family};
    use sdcam::problems::{mimo, mlp, qcqp};
    match inst {
        Instance::Qcqp(_) => qcqp::default_config(default_beta0(Family::Qcqp), 1).schedule,
        Instance::Mimo(_) => mimo::default_config(default_beta0(Family::Mimo), 1).schedule,
        Instance::Mlp(_) => mlp::default_config(default_beta0(Family::Mlp), 1).schedule,
    }
}

fn finish(rep: Report) -> CmdResult {
    if rep.failures == 0 {
        println!("all checks passed");
        Ok(())
    } else {
        Err(Failure::verification(format!("{} check(s) failed", rep.failures)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sdcam::prox::{L1Norm, LpPenalty, NonpositiveIndicator};

    #[test]
    fn grid_accepts_exact_prox_and_rejects_a_wrong_one() {
        let z = [2.0, -0.3, 0.7];
        assert!(prox_grid_excess(&L1Norm { lambda: 0.5 }, &z, 1.0, &[0, 1, 2]) <= 1e-12);
        assert!(prox_grid_excess(&LpPenalty::unbounded(0.4, 0.5), &z, 2.0, &[0, 2]) <= PROX_TOL);
        assert!(prox_grid_excess(&NonpositiveIndicator, &z, 1.0, &[0]) <= 1e-12);

        struct Identity;
        impl ProxOracle for Identity {
            fn eval(&self, x: &[f64]) -> ExtReal {
                ExtReal::Finite(x.iter().map(|v| v.abs()).sum())
            }
            fn prox(&self, z: &[f64], _gamma: f64) -> Vec<f64> {
                z.to_vec()
            }
            fn domain(&self) -> sdcam::DomainTag {
                sdcam::DomainTag::Full
            }
        }
        assert!(prox_grid_excess(&Identity, &z, 1.0, &[0]) > 0.1);
    }
}
