//! Oracle abstractions for composite problems `f(x) + g(x) + h(c(x))`.
//!
//! A [`Problem`] bundles four oracles:
//!
//! * a smooth function `f` with its gradient ([`SmoothOracle`]),
//! * a prox-friendly function `g` on the decision variable ([`ProxOracle`]),
//! * a prox-friendly function `h` on the image of `c` ([`ProxOracle`]),
//! * a smooth map `c: R^n -> R^m` exposing only vector-Jacobian products
//!   ([`MapOracle`]).
//!
//! The finite-difference checkers [`check_gradient`] and [`check_vjp`] verify
//! hand-coded derivatives against central differences.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg::{dot, norm, norm_inf};

/// Relative error bound used by both finite-difference checkers.
pub const FD_TOLERANCE: f64 = 1e-5;

/// Relative error bound for the linearity of `vjp` in its second argument.
pub const LINEARITY_TOLERANCE: f64 = 1e-10;

/// A value in `(-inf, +inf]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    /// The finite value, if any.
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInf => None,
        }
    }

    /// Lossy conversion for logging; `+inf` maps to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::Finite(v) => v,
            ExtReal::PosInf => f64::INFINITY,
        }
    }
}

impl std::ops::Add for ExtReal {
    type Output = ExtReal;

    fn add(self, rhs: ExtReal) -> ExtReal {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b),
            _ => ExtReal::PosInf,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInf => f.write_str("+inf"),
        }
    }
}

/// Coarse description of the effective domain of a [`ProxOracle`].
#[derive(Debug, Clone, PartialEq)]
pub enum DomainTag {
    /// Finite everywhere.
    Full,
    /// A box `[lo, hi]` (entries may be infinite).
    Box,
    /// The nonpositive orthant.
    NonpositiveOrthant,
    /// A single point.
    Singleton,
    Other(String),
}

/// A Lipschitz-differentiable function `f: R^n -> R`.
///
/// Implementations must be pure: the solver and the checkers may call them
/// from several threads.
pub trait SmoothOracle: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
    fn grad(&self, x: &[f64]) -> Vec<f64>;
    /// Lipschitz constant `L` of the gradient, when known.
    fn lipschitz_bound(&self) -> Option<f64> {
        None
    }
}

/// `f = 0` on `R^n`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroSmooth(pub usize);

impl SmoothOracle for ZeroSmooth {
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn grad(&self, _x: &[f64]) -> Vec<f64> {
        vec![0.0; self.0]
    }
    fn lipschitz_bound(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// A proper closed function with an easy proximal mapping.
pub trait ProxOracle: Send + Sync {
    fn eval(&self, z: &[f64]) -> ExtReal;
    /// A minimizer of `u -> |z - u|^2 / (2 gamma) + self(u)`.
    fn prox(&self, z: &[f64], gamma: f64) -> Vec<f64>;
    fn domain(&self) -> DomainTag;
    /// Fixed dimension, or `None` for separable functions of any length.
    fn dim(&self) -> Option<usize> {
        None
    }
}

/// A continuously differentiable map `c: R^n -> R^m`.
pub trait MapOracle: Send + Sync {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Vec<f64>;
    /// `J_c(x)^T w`.
    fn vjp(&self, x: &[f64], w: &[f64]) -> Vec<f64>;
    /// Lipschitz constant `L_c` of the Jacobian, when known.
    fn jac_lipschitz_bound(&self) -> Option<f64> {
        None
    }
    /// Bound `M_c` on the Jacobian norm, when known.
    fn jac_norm_bound(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ProblemError {
    #[error("dimension must be positive (n = {n}, m = {m})")]
    EmptyDimension { n: usize, m: usize },
    #[error("{what} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
}

/// Maps `c(x)` to a scalar feasibility measure logged with every trace row.
pub type FeasibilityMetric = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// The composite problem `min f(x) + g(x) + h(c(x))`.
///
/// Optional constants are user inputs: nothing in the crate estimates them.
pub struct Problem {
    pub f: Box<dyn SmoothOracle>,
    pub g: Box<dyn ProxOracle>,
    pub h: Box<dyn ProxOracle>,
    pub c: Box<dyn MapOracle>,
    n: usize,
    m: usize,
    /// Lower bound on `inf {f + g}`.
    pub inf_fg_lower_bound: Option<f64>,
    /// Lipschitz constant `M_h` of `h`.
    pub h_lipschitz_bound: Option<f64>,
    /// Bound on `sup { h(c(x)) : x in dom g }`.
    pub h_sup_on_image_bound: Option<f64>,
    /// Bound on `sup { |f(x) + g(x)| : x in dom g }`.
    pub fg_abs_sup_bound: Option<f64>,
    pub feasibility: Option<FeasibilityMetric>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("inf_fg_lower_bound", &self.inf_fg_lower_bound)
            .field("h_lipschitz_bound", &self.h_lipschitz_bound)
            .field("h_sup_on_image_bound", &self.h_sup_on_image_bound)
            .field("fg_abs_sup_bound", &self.fg_abs_sup_bound)
            .finish_non_exhaustive()
    }
}

impl Problem {
    pub fn new(
        f: Box<dyn SmoothOracle>,
        g: Box<dyn ProxOracle>,
        h: Box<dyn ProxOracle>,
        c: Box<dyn MapOracle>,
    ) -> Result<Self, ProblemError> {
        let n = c.dim_in();
        let m = c.dim_out();
        if n == 0 || m == 0 {
            return Err(ProblemError::EmptyDimension { n, m });
        }
        if f.dim() != n {
            return Err(ProblemError::DimensionMismatch {
                what: "f",
                got: f.dim(),
                expected: n,
            });
        }
        if let Some(d) = g.dim().filter(|&d| d != n) {
            return Err(ProblemError::DimensionMismatch {
                what: "g",
                got: d,
                expected: n,
            });
        }
        if let Some(d) = h.dim().filter(|&d| d != m) {
            return Err(ProblemError::DimensionMismatch {
                what: "h",
                got: d,
                expected: m,
            });
        }
        Ok(Self {
            f,
            g,
            h,
            c,
            n,
            m,
            inf_fg_lower_bound: None,
            h_lipschitz_bound: None,
            h_sup_on_image_bound: None,
            fg_abs_sup_bound: None,
            feasibility: None,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn with_inf_fg_lower_bound(mut self, v: f64) -> Self {
        self.inf_fg_lower_bound = Some(v);
        self
    }

    pub fn with_h_lipschitz_bound(mut self, v: f64) -> Self {
        self.h_lipschitz_bound = Some(v);
        self
    }

    pub fn with_h_sup_on_image_bound(mut self, v: f64) -> Self {
        self.h_sup_on_image_bound = Some(v);
        self
    }

    pub fn with_fg_abs_sup_bound(mut self, v: f64) -> Self {
        self.fg_abs_sup_bound = Some(v);
        self
    }

    pub fn with_feasibility(mut self, metric: FeasibilityMetric) -> Self {
        self.feasibility = Some(metric);
        self
    }

    /// `f(x) + g(x)`, infinite outside `dom g`.
    pub fn fg(&self, x: &[f64]) -> ExtReal {
        match self.g.eval(x) {
            ExtReal::Finite(gv) => ExtReal::Finite(self.f.eval(x) + gv),
            ExtReal::PosInf => ExtReal::PosInf,
        }
    }
}

/// `f(x) + g(x) + h(c(x))`.
pub fn objective(p: &Problem, x: &[f64]) -> ExtReal {
    assert_eq!(x.len(), p.n(), "objective: x has wrong length");
    match p.fg(x) {
        ExtReal::PosInf => ExtReal::PosInf,
        fg => fg + p.h.eval(&p.c.eval(x)),
    }
}

/// Default central-difference step: `1e-6 * (1 + |x|_inf)`.
pub fn default_fd_step(x: &[f64]) -> f64 {
    1e-6 * (1.0 + norm_inf(x))
}

fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}

/// Maximum number of probe directions used when `n` is large.
const MAX_DIRECTIONS: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub max_rel_error: f64,
    pub pass: bool,
    /// Coordinate (or probe direction, when `n > 32`) with the largest error.
    pub worst: Option<usize>,
    /// Set when `f` was not finite near `x`.
    pub failure: Option<String>,
}

/// Compares `f.grad(x)` with central differences of `f.eval`.
///
/// Errors are measured as `|a - b| / max(1, |a|, |b|)`. All coordinates are
/// probed when `n <= 32`; otherwise 32 seeded random unit directions.
pub fn check_gradient(f: &dyn SmoothOracle, x: &[f64], h_step: f64) -> GradientReport {
    assert!(
        (1e-8..=1e-2).contains(&h_step),
        "check_gradient: h_step {h_step} outside [1e-8, 1e-2]"
    );
    let n = x.len();
    let grad = f.grad(x);
    let directions: Vec<Vec<f64>> = if n <= MAX_DIRECTIONS {
        (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect()
    } else {
        let mut rng = ChaCha20Rng::seed_from_u64(0x6772_6164);
        (0..MAX_DIRECTIONS)
            .map(|_| unit_direction(&mut rng, n))
            .collect()
    };

    let mut report = GradientReport {
        max_rel_error: 0.0,
        pass: true,
        worst: None,
        failure: None,
    };
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for (k, d) in directions.iter().enumerate() {
        for i in 0..n {
            xp[i] = x[i] + h_step * d[i];
            xm[i] = x[i] - h_step * d[i];
        }
        let (fp, fm) = (f.eval(&xp), f.eval(&xm));
        if !fp.is_finite() || !fm.is_finite() {
            report.pass = false;
            report.worst = Some(k);
            report.failure = Some(format!("non-finite f along direction {k}"));
            return report;
        }
        let fd = (fp - fm) / (2.0 * h_step);
        let err = rel_error(fd, dot(&grad, d));
        if report.worst.is_none() || err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst = Some(k);
        }
    }
    report.pass = report.max_rel_error <= FD_TOLERANCE;
    report
}

#[derive(Debug, Clone, PartialEq)]
pub struct VjpReport {
    pub max_rel_error: f64,
    pub linearity_error: f64,
    pub pass: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum CheckError {
    #[error("x has length {got}, map expects {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("trials must be at least 1")]
    NoTrials,
}

/// Compares `<vjp(x, w), d>` with the central difference of `<w, c(.)>` along
/// `d` for seeded random `w`, `d`, and checks linearity of `vjp` in `w`.
pub fn check_vjp(c: &dyn MapOracle, x: &[f64], trials: usize) -> Result<VjpReport, CheckError> {
    let (n, m) = (c.dim_in(), c.dim_out());
    if x.len() != n {
        return Err(CheckError::DimensionMismatch {
            got: x.len(),
            expected: n,
        });
    }
    if trials == 0 {
        return Err(CheckError::NoTrials);
    }
    let h = default_fd_step(x);
    let mut rng = ChaCha20Rng::seed_from_u64(0x766a_70);
    let mut max_err = 0.0f64;
    let mut lin_err = 0.0f64;
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for _ in 0..trials {
        let w = gaussian(&mut rng, m);
        let w2 = gaussian(&mut rng, m);
        let d = unit_direction(&mut rng, n);
        for i in 0..n {
            xp[i] = x[i] + h * d[i];
            xm[i] = x[i] - h * d[i];
        }
        let cp = c.eval(&xp);
        let cm = c.eval(&xm);
        let fd: f64 = w
            .iter()
            .zip(cp.iter().zip(&cm))
            .map(|(wi, (a, b))| wi * (a - b) / (2.0 * h))
            .sum();
        let v = c.vjp(x, &w);
        max_err = max_err.max(rel_error(fd, dot(&v, &d)));

        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let combo: Vec<f64> = w.iter().zip(&w2).map(|(p, q)| a * p + b * q).collect();
        let lhs = c.vjp(x, &combo);
        let v2 = c.vjp(x, &w2);
        let rhs: Vec<f64> = v.iter().zip(&v2).map(|(p, q)| a * p + b * q).collect();
        let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(p, q)| p - q).collect();
        let scale = norm(&rhs).max(norm(&lhs)).max(1e-300);
        let e = if norm(&diff) == 0.0 { 0.0 } else { norm(&diff) / scale };
        lin_err = lin_err.max(e);
    }
    Ok(VjpReport {
        max_rel_error: max_err,
        linearity_error: lin_err,
        pass: max_err <= FD_TOLERANCE && lin_err <= LINEARITY_TOLERANCE,
    })
}

fn gaussian(rng: &mut ChaCha20Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn unit_direction(rng: &mut ChaCha20Rng, len: usize) -> Vec<f64> {
    let mut d = gaussian(rng, len);
    let s = norm(&d);
    d.iter_mut().for_each(|v| *v /= s);
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    struct HalfSquare(usize);
    impl SmoothOracle for HalfSquare {
        fn dim(&self) -> usize {
            self.0
        }
        fn eval(&self, x: &[f64]) -> f64 {
            0.5 * dot(x, x)
        }
        fn grad(&self, x: &[f64]) -> Vec<f64> {
            x.to_vec()
        }
    }

    struct Constant;
    impl SmoothOracle for Constant {
        fn dim(&self) -> usize {
            3
        }
        fn eval(&self, _x: &[f64]) -> f64 {
            4.2
        }
        fn grad(&self, _x: &[f64]) -> Vec<f64> {
            vec![0.0; 3]
        }
    }

    struct WrongGrad;
    impl SmoothOracle for WrongGrad {
        fn dim(&self) -> usize {
            2
        }
        fn eval(&self, x: &[f64]) -> f64 {
            x[0] * x[0] + x[1]
        }
        fn grad(&self, x: &[f64]) -> Vec<f64> {
            vec![2.0 * x[0], 1.5]
        }
    }

    struct Squares;
    impl MapOracle for Squares {
        fn dim_in(&self) -> usize {
            2
        }
        fn dim_out(&self) -> usize {
            2
        }
        fn eval(&self, x: &[f64]) -> Vec<f64> {
            x.iter().map(|v| v * v).collect()
        }
        fn vjp(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
            x.iter().zip(w).map(|(xi, wi)| 2.0 * xi * wi).collect()
        }
    }

    struct Linear;
    impl MapOracle for Linear {
        fn dim_in(&self) -> usize {
            3
        }
        fn dim_out(&self) -> usize {
            2
        }
        fn eval(&self, x: &[f64]) -> Vec<f64> {
            vec![x[0] + 2.0 * x[1] - x[2], 3.0 * x[2] - 0.5 * x[0]]
        }
        fn vjp(&self, _x: &[f64], w: &[f64]) -> Vec<f64> {
            vec![w[0] - 0.5 * w[1], 2.0 * w[0], -w[0] + 3.0 * w[1]]
        }
    }

    #[test]
    fn quadratic_gradient_passes() {
        let r = check_gradient(&HalfSquare(2), &[1.0, 2.0], 1e-5);
        assert!(r.pass);
        assert!(r.max_rel_error < 1e-9, "{r:?}");
    }

    #[test]
    fn constant_gradient_passes() {
        let r = check_gradient(&Constant, &[0.3, -1.0, 7.0], 1e-6);
        assert!(r.pass);
        assert_eq!(r.max_rel_error, 0.0);
    }

    #[test]
    fn wrong_gradient_reports_coordinate() {
        let r = check_gradient(&WrongGrad, &[0.5, 0.5], 1e-6);
        assert!(!r.pass);
        assert_eq!(r.worst, Some(1));
        assert!(r.max_rel_error > 0.1);
    }

    #[test]
    fn large_dimension_uses_directions() {
        let f = HalfSquare(100);
        let x: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let r = check_gradient(&f, &x, default_fd_step(&x));
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn squares_vjp_direction() {
        let v = Squares.vjp(&[1.0, 2.0], &[1.0, 1.0]);
        assert_eq!(dot(&v, &[1.0, 0.0]), 2.0);
        assert!(check_vjp(&Squares, &[1.0, 2.0], 5).unwrap().pass);
    }

    #[test]
    fn linear_vjp_is_exact() {
        let r = check_vjp(&Linear, &[0.1, -0.4, 2.0], 10).unwrap();
        assert!(r.pass);
        assert!(r.max_rel_error < 1e-8, "{r:?}");
    }

    #[test]
    fn vjp_dimension_mismatch() {
        assert_eq!(
            check_vjp(&Linear, &[0.0; 2], 1),
            Err(CheckError::DimensionMismatch { got: 2, expected: 3 })
        );
        assert_eq!(check_vjp(&Linear, &[0.0; 3], 0), Err(CheckError::NoTrials));
    }

    #[test]
    fn ext_real_addition() {
        assert_eq!(ExtReal::Finite(1.0) + ExtReal::Finite(2.0), ExtReal::Finite(3.0));
        assert_eq!(ExtReal::Finite(1.0) + ExtReal::PosInf, ExtReal::PosInf);
        assert!(!ExtReal::PosInf.is_finite());
    }
}
