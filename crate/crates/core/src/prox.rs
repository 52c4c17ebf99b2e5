//! Proximal operators and projections.
//!
//! Scalar and vector operators are plain functions; the structs at the end of
//! the module wrap them as [`ProxOracle`]s for use in a [`crate::Problem`].

use thiserror::Error;

use crate::oracle::{DomainTag, ExtReal, ProxOracle};

#[derive(Debug, Error, PartialEq)]
pub enum ProxError {
    #[error("p must lie in (0, 1), got {0}")]
    BadExponent(f64),
    #[error("alpha and gamma must be positive (alpha = {alpha}, gamma = {gamma})")]
    BadWeight { alpha: f64, gamma: f64 },
    #[error("newton_tol must be positive and newton_max_iter at least 1")]
    BadNewtonSettings,
    #[error("lower bound {lo} exceeds upper bound {hi} at index {index}")]
    InvertedBounds { index: usize, lo: f64, hi: f64 },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Parameters of the scalar problem `min_u (u - z)^2 / (2 gamma) + alpha |u|^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpProxParams {
    pub p: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl LpProxParams {
    pub const DEFAULT_TOL: f64 = 1e-12;
    pub const DEFAULT_MAX_ITER: usize = 100;

    pub fn new(p: f64, alpha: f64, gamma: f64) -> Result<Self, ProxError> {
        let params = Self {
            p,
            alpha,
            gamma,
            newton_tol: Self::DEFAULT_TOL,
            newton_max_iter: Self::DEFAULT_MAX_ITER,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ProxError> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(ProxError::BadExponent(self.p));
        }
        if !(self.alpha > 0.0 && self.gamma > 0.0 && (self.alpha * self.gamma).is_finite()) {
            return Err(ProxError::BadWeight {
                alpha: self.alpha,
                gamma: self.gamma,
            });
        }
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return Err(ProxError::BadNewtonSettings);
        }
        Ok(())
    }

    /// Same parameters with a different prox step.
    pub fn with_gamma(self, gamma: f64) -> Self {
        Self { gamma, ..self }
    }

    /// `q(u) = (u - z)^2 / (2 gamma) + alpha |u|^p`.
    pub fn objective(&self, z: f64, u: f64) -> f64 {
        (u - z) * (u - z) / (2.0 * self.gamma) + self.alpha * u.abs().powf(self.p)
    }

    /// Smallest `|z|` for which the prox can be nonzero.
    pub fn threshold(&self) -> f64 {
        let (p, ga) = (self.p, self.gamma * self.alpha);
        let base = 2.0 * ga * (1.0 - p);
        base.powf(1.0 / (2.0 - p)) + ga * p * base.powf((p - 1.0) / (2.0 - p))
    }
}

/// Which branch of [`prox_lp_power_path`] produced the result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpProxPath {
    Zero,
    Newton,
    GoldenSection,
}

/// Component-wise `sign(z) max(|z| - tau, 0)`.
pub fn soft_threshold(z: &[f64], tau: f64) -> Vec<f64> {
    assert!(tau >= 0.0, "soft_threshold: tau must be nonnegative");
    z.iter().map(|&v| soft_scalar(v, tau)).collect()
}

fn soft_scalar(v: f64, tau: f64) -> f64 {
    v.signum() * (v.abs() - tau).max(0.0)
}

/// Global minimizer of `(u - z)^2 / (2 gamma) + alpha |u|^p`.
pub fn prox_lp_power(z: f64, params: &LpProxParams) -> f64 {
    prox_lp_power_path(z, params).0
}

/// As [`prox_lp_power`], also reporting which branch produced the value.
///
/// `|z|` at or below the closed-form threshold maps to zero. Otherwise Newton's
/// method runs on `phi(u) = u - |z| + gamma alpha p u^(p-1)` from `u = |z|`;
/// `phi` is convex on `u > 0`, so the iterates decrease monotonically to the
/// largest root. If Newton stalls, golden-section search on the convex part of
/// `[0, |z|]` takes over. The result is compared against `u = 0`, with ties
/// (relative `1e-12`) resolved in favour of zero.
pub fn prox_lp_power_path(z: f64, params: &LpProxParams) -> (f64, LpProxPath) {
    let a = z.abs();
    if a == 0.0 || a <= params.threshold() {
        return (0.0, LpProxPath::Zero);
    }
    let c = params.gamma * params.alpha * params.p;
    let p = params.p;
    let phi = |u: f64| u - a + c * u.powf(p - 1.0);
    let dphi = |u: f64| 1.0 + c * (p - 1.0) * u.powf(p - 2.0);

    let mut u = a;
    let mut path = LpProxPath::GoldenSection;
    for _ in 0..params.newton_max_iter {
        let (f, d) = (phi(u), dphi(u));
        if f.abs() <= params.newton_tol * (1.0 + a) {
            path = LpProxPath::Newton;
            break;
        }
        if !(d > 0.0) {
            break;
        }
        let next = u - f / d;
        if !(next > 0.0 && next.is_finite()) {
            break;
        }
        if next == u {
            path = LpProxPath::Newton;
            break;
        }
        u = next;
    }
    if path == LpProxPath::GoldenSection {
        // q is convex for u >= u_c, which contains every local minimizer on (0, a].
        let u_c = (c * (1.0 - p)).powf(1.0 / (2.0 - p)).min(a);
        u = golden_section(|t| params.objective(a, t), u_c, a, params.newton_tol);
    }

    let q0 = a * a / (2.0 * params.gamma);
    let qu = params.objective(a, u);
    if qu < q0 - 1e-12 * (1.0 + q0) {
        (z.signum() * u, path)
    } else {
        (0.0, LpProxPath::Zero)
    }
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo <= tol * (1.0 + hi.abs()) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Per coordinate, minimizes `(z_i - u)^2 / (2 gamma) + alpha |u|^p` over
/// `|u| <= r` by comparing `0`, `sign(z_i) r` and the clamped unconstrained
/// prox. `r` may be infinite.
pub fn prox_lp_box(z: &[f64], params: &LpProxParams, r: f64) -> Vec<f64> {
    assert!(r > 0.0, "prox_lp_box: r must be positive");
    z.iter().map(|&zi| prox_lp_box_scalar(zi, params, r)).collect()
}

fn prox_lp_box_scalar(z: f64, params: &LpProxParams, r: f64) -> f64 {
    let inner = prox_lp_power(z, params).clamp(-r, r);
    let mut best = inner;
    let mut best_q = params.objective(z, inner);
    let mut consider = |u: f64| {
        let q = params.objective(z, u);
        if q < best_q {
            best = u;
            best_q = q;
        }
    };
    if r.is_finite() {
        consider(z.signum() * r);
    }
    consider(0.0);
    best
}

/// Component-wise `clamp(soft_threshold(z_i, gamma_lambda), -radius, radius)`.
pub fn prox_l1_box(z: &[f64], gamma_lambda: f64, radius: f64) -> Vec<f64> {
    assert!(gamma_lambda >= 0.0, "prox_l1_box: gamma_lambda must be nonnegative");
    assert!(radius > 0.0, "prox_l1_box: radius must be positive");
    z.iter()
        .map(|&v| soft_scalar(v, gamma_lambda).clamp(-radius, radius))
        .collect()
}

/// Component-wise clamp to `[lo_i, hi_i]`; bounds may be infinite.
pub fn project_box(z: &[f64], lo: &[f64], hi: &[f64]) -> Result<Vec<f64>, ProxError> {
    if z.len() != lo.len() || z.len() != hi.len() {
        return Err(ProxError::LengthMismatch(z.len(), lo.len().min(hi.len())));
    }
    z.iter()
        .zip(lo.iter().zip(hi))
        .enumerate()
        .map(|(index, (&v, (&l, &h)))| {
            if l > h {
                Err(ProxError::InvertedBounds { index, lo: l, hi: h })
            } else {
                Ok(v.max(l).min(h))
            }
        })
        .collect()
}

pub fn project_nonpositive(y: &[f64]) -> Vec<f64> {
    y.iter().map(|&v| v.min(0.0)).collect()
}

/// The prox of the indicator of `{b}`: always `b`.
pub fn prox_singleton(y: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(y.len(), b.len(), "prox_singleton: length mismatch");
    b.to_vec()
}

/// The zero function.
#[derive(Debug, Clone, Copy, Default)]
pub struct Zero;

impl ProxOracle for Zero {
    fn eval(&self, _z: &[f64]) -> ExtReal {
        ExtReal::Finite(0.0)
    }
    fn prox(&self, z: &[f64], _gamma: f64) -> Vec<f64> {
        z.to_vec()
    }
    fn domain(&self) -> DomainTag {
        DomainTag::Full
    }
}

/// Indicator of the box `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct BoxIndicator {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxIndicator {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, ProxError> {
        project_box(&lo.iter().map(|_| 0.0).collect::<Vec<_>>(), &lo, &hi)?;
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }
}

impl ProxOracle for BoxIndicator {
    fn eval(&self, z: &[f64]) -> ExtReal {
        let inside = z
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (l, h))| v >= l && v <= h);
        if inside && z.len() == self.lo.len() {
            ExtReal::Finite(0.0)
        } else {
            ExtReal::PosInf
        }
    }
    fn prox(&self, z: &[f64], _gamma: f64) -> Vec<f64> {
        project_box(z, &self.lo, &self.hi).expect("bounds validated at construction")
    }
    fn domain(&self) -> DomainTag {
        DomainTag::Box
    }
    fn dim(&self) -> Option<usize> {
        Some(self.lo.len())
    }
}

/// Indicator of the nonpositive orthant.
#[derive(Debug, Clone, Copy, Default)]
pub struct NonpositiveIndicator;

impl ProxOracle for NonpositiveIndicator {
    fn eval(&self, z: &[f64]) -> ExtReal {
        if z.iter().all(|&v| v <= 0.0) {
            ExtReal::Finite(0.0)
        } else {
            ExtReal::PosInf
        }
    }
    fn prox(&self, z: &[f64], _gamma: f64) -> Vec<f64> {
        project_nonpositive(z)
    }
    fn domain(&self) -> DomainTag {
        DomainTag::NonpositiveOrthant
    }
}

/// Indicator of a single point `{b}`.
#[derive(Debug, Clone)]
pub struct SingletonIndicator {
    pub b: Vec<f64>,
}

impl ProxOracle for SingletonIndicator {
    fn eval(&self, z: &[f64]) -> ExtReal {
        if z == self.b.as_slice() {
            ExtReal::Finite(0.0)
        } else {
            ExtReal::PosInf
        }
    }
    fn prox(&self, z: &[f64], _gamma: f64) -> Vec<f64> {
        prox_singleton(z, &self.b)
    }
    fn domain(&self) -> DomainTag {
        DomainTag::Singleton
    }
    fn dim(&self) -> Option<usize> {
        Some(self.b.len())
    }
}

/// `lambda |z|_1`.
#[derive(Debug, Clone, Copy)]
pub struct L1Norm {
    pub lambda: f64,
}

impl ProxOracle for L1Norm {
    fn eval(&self, z: &[f64]) -> ExtReal {
        ExtReal::Finite(self.lambda * z.iter().map(|v| v.abs()).sum::<f64>())
    }
    fn prox(&self, z: &[f64], gamma: f64) -> Vec<f64> {
        soft_threshold(z, gamma * self.lambda)
    }
    fn domain(&self) -> DomainTag {
        DomainTag::Full
    }
}

/// `lambda |z|_1` restricted to `|z|_inf <= radius`.
#[derive(Debug, Clone, Copy)]
pub struct L1Box {
    pub lambda: f64,
    pub radius: f64,
}

impl ProxOracle for L1Box {
    fn eval(&self, z: &[f64]) -> ExtReal {
        if z.iter().all(|v| v.abs() <= self.radius) {
            ExtReal::Finite(self.lambda * z.iter().map(|v| v.abs()).sum::<f64>())
        } else {
            ExtReal::PosInf
        }
    }
    fn prox(&self, z: &[f64], gamma: f64) -> Vec<f64> {
        prox_l1_box(z, gamma * self.lambda, self.radius)
    }
    fn domain(&self) -> DomainTag {
        DomainTag::Box
    }
}

/// `weight * sum |z_i|^p`, optionally restricted to `|z|_inf <= radius`.
#[derive(Debug, Clone, Copy)]
pub struct LpPenalty {
    pub weight: f64,
    pub p: f64,
    pub radius: f64,
}

impl LpPenalty {
    pub fn unbounded(weight: f64, p: f64) -> Self {
        Self {
            weight,
            p,
            radius: f64::INFINITY,
        }
    }

    fn params(&self, gamma: f64) -> LpProxParams {
        LpProxParams::new(self.p, self.weight, gamma).expect("valid lp penalty parameters")
    }
}

impl ProxOracle for LpPenalty {
    fn eval(&self, z: &[f64]) -> ExtReal {
        if z.iter().all(|v| v.abs() <= self.radius) {
            ExtReal::Finite(self.weight * z.iter().map(|v| v.abs().powf(self.p)).sum::<f64>())
        } else {
            ExtReal::PosInf
        }
    }
    fn prox(&self, z: &[f64], gamma: f64) -> Vec<f64> {
        let params = self.params(gamma);
        if self.radius.is_finite() {
            prox_lp_box(z, &params, self.radius)
        } else {
            z.iter().map(|&v| prox_lp_power(v, &params)).collect()
        }
    }
    fn domain(&self) -> DomainTag {
        if self.radius.is_finite() {
            DomainTag::Box
        } else {
            DomainTag::Full
        }
    }
}
