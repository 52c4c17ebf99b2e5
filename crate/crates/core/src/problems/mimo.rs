//! Phase-shift-keying signal detection in polar coordinates.
//!
//! The variable is `x = (r, theta)` with `r, theta` in `R^n`, and
//! `phi(r, theta) = [r cos(theta); r sin(theta)]`:
//!
//! ```text
//! f(r, theta) = |yhat - A phi(r, theta)|^2 / 2 + lambda1 sum gamma(r_i)
//! g           = indicator of [r_lo, 1]^n x R^n
//! c(r, theta) = sin(p theta / 2)
//! h           = lambda2 |.|_1
//! ```

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::qcqp::{from_rows, to_rows};
use super::rng::{normals, stream, Field};
use super::GenerateError;
use crate::oracle::{MapOracle, Problem, SmoothOracle};
use crate::prox::{BoxIndicator, L1Norm};
use crate::solver::{ScheduleSpec, SolverConfig};

/// Standard deviation of the observation noise.
pub const NOISE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MimoParams {
    pub n: usize,
    pub m: usize,
    pub p_psk: u32,
    pub lambda1: f64,
    pub lambda2: f64,
    pub r_lo: f64,
}

impl Default for MimoParams {
    fn default() -> Self {
        Self {
            n: 8,
            m: 16,
            p_psk: 4,
            lambda1: 0.01,
            lambda2: 0.1,
            r_lo: 0.5,
        }
    }
}

impl MimoParams {
    pub fn validate(&self) -> Result<(), GenerateError> {
        if self.n < 1 || self.m < 1 {
            return Err(GenerateError::InvalidParams("n, m >= 1 required".into()));
        }
        if self.p_psk < 2 {
            return Err(GenerateError::InvalidParams("p_psk >= 2 required".into()));
        }
        if !(self.r_lo > 0.0 && self.r_lo <= 1.0) {
            return Err(GenerateError::InvalidParams("r_lo must lie in (0, 1]".into()));
        }
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(GenerateError::InvalidParams("lambda1, lambda2 must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MimoData {
    /// `2m x 2n`, row-major.
    pub a: Vec<Vec<f64>>,
    pub yhat: Vec<f64>,
    /// Transmitted phases, on the grid `2 pi k / p_psk`.
    pub theta_star: Vec<f64>,
    /// Starting point `(r, theta)`.
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MimoInstance {
    pub seed: u64,
    pub params: MimoParams,
    pub data: MimoData,
}

/// `[r cos(theta); r sin(theta)]`.
pub fn phi(r: &[f64], theta: &[f64]) -> Vec<f64> {
    let cos = r.iter().zip(theta).map(|(r, t)| r * t.cos());
    let sin = r.iter().zip(theta).map(|(r, t)| r * t.sin());
    cos.chain(sin).collect()
}

/// `1/t` for `t >= r_lo`, continued by its tangent line below `r_lo`.
pub fn gamma(t: f64, r_lo: f64) -> f64 {
    if t >= r_lo {
        1.0 / t
    } else {
        -(t - r_lo) / (r_lo * r_lo) + 1.0 / r_lo
    }
}

pub fn gamma_prime(t: f64, r_lo: f64) -> f64 {
    if t >= r_lo {
        -1.0 / (t * t)
    } else {
        -1.0 / (r_lo * r_lo)
    }
}

impl MimoInstance {
    pub fn generate(seed: u64, params: &MimoParams) -> Result<Self, GenerateError> {
        params.validate()?;
        let (n, m) = (params.n, params.m);
        let scale = 1.0 / ((2 * m) as f64).sqrt();
        let a = DMatrix::from_row_slice(
            2 * m,
            2 * n,
            &normals(&mut stream(seed, 0, Field::MimoChannel, 0), 4 * m * n),
        ) * scale;
        let mut sym = stream(seed, 0, Field::MimoSymbols, 0);
        let p = params.p_psk as f64;
        let theta_star: Vec<f64> = (0..n)
            .map(|_| 2.0 * PI * sym.random_range(0..params.p_psk) as f64 / p)
            .collect();
        let clean = &a * DVector::from_vec(phi(&vec![1.0; n], &theta_star));
        let noise = normals(&mut stream(seed, 0, Field::MimoNoise, 0), 2 * m);
        let yhat: Vec<f64> = clean.iter().zip(&noise).map(|(c, e)| c + NOISE_LEVEL * e).collect();
        let mut start = stream(seed, 0, Field::MimoStart, 0);
        let x0 = std::iter::repeat_n(1.0, n)
            .chain((0..n).map(|_| start.random_range(0.0..2.0 * PI)))
            .collect();
        Ok(Self {
            seed,
            params: params.clone(),
            data: MimoData {
                a: to_rows(&a),
                yhat,
                theta_star,
                x0,
            },
        })
    }

    pub fn validate(&self) -> Result<(), GenerateError> {
        self.params.validate()?;
        let (n, m) = (self.params.n, self.params.m);
        let d = &self.data;
        let ok = d.a.len() == 2 * m
            && d.a.iter().all(|r| r.len() == 2 * n)
            && d.yhat.len() == 2 * m
            && d.theta_star.len() == n
            && d.x0.len() == 2 * n;
        if ok {
            Ok(())
        } else {
            Err(GenerateError::InvalidParams("array shapes disagree with n, m".into()))
        }
    }

    pub fn x0(&self) -> Vec<f64> {
        self.data.x0.clone()
    }

    /// Zero, which lies in dom h.
    pub fn y0(&self) -> Vec<f64> {
        vec![0.0; self.params.n]
    }

    pub fn objective(&self) -> MimoObjective {
        let a = from_rows(&self.data.a);
        let a_norm = a.clone().singular_values().max();
        MimoObjective {
            a,
            a_norm,
            yhat: DVector::from_column_slice(&self.data.yhat),
            lambda1: self.params.lambda1,
            r_lo: self.params.r_lo,
            n: self.params.n,
        }
    }

    pub fn problem(&self) -> Problem {
        let n = self.params.n;
        let f = self.objective();
        let yhat_norm = f.yhat.norm();
        let nf = n as f64;
        let lo = std::iter::repeat_n(self.params.r_lo, n)
            .chain(std::iter::repeat_n(f64::NEG_INFINITY, n))
            .collect();
        let hi = std::iter::repeat_n(1.0, n)
            .chain(std::iter::repeat_n(f64::INFINITY, n))
            .collect();
        // |phi| <= sqrt(n) on the box and 1 <= gamma <= 1/r_lo there.
        let fg_sup = 0.5 * (yhat_norm + f.a_norm * nf.sqrt()).powi(2)
            + self.params.lambda1 * nf / self.params.r_lo;
        let lambda2 = self.params.lambda2;
        Problem::new(
            Box::new(f),
            Box::new(BoxIndicator::new(lo, hi).expect("r_lo <= 1")),
            Box::new(L1Norm { lambda: lambda2 }),
            Box::new(SineMap {
                n,
                half_p: self.params.p_psk as f64 / 2.0,
            }),
        )
        .expect("generated dimensions are consistent")
        .with_inf_fg_lower_bound(self.params.lambda1 * nf)
        .with_h_lipschitz_bound(lambda2 * nf.sqrt())
        .with_h_sup_on_image_bound(lambda2 * nf)
        .with_fg_abs_sup_bound(fg_sup)
    }
}

/// Solver settings for this family; `delta = 1/3` is the suggested choice for
/// equal stationarity tolerances.
pub fn default_config(beta0: f64, iters: usize) -> SolverConfig {
    SolverConfig::new(ScheduleSpec::power(beta0, 1.0 / 3.0), 1e7, 1.0, 0.8, 1.2, iters)
}

#[derive(Debug, Clone)]
pub struct MimoObjective {
    a: DMatrix<f64>,
    a_norm: f64,
    yhat: DVector<f64>,
    lambda1: f64,
    r_lo: f64,
    n: usize,
}

impl MimoObjective {
    fn residual(&self, x: &[f64]) -> DVector<f64> {
        let (r, theta) = x.split_at(self.n);
        &self.a * DVector::from_vec(phi(r, theta)) - &self.yhat
    }
}

impl SmoothOracle for MimoObjective {
    fn dim(&self) -> usize {
        2 * self.n
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let pen: f64 = x[..self.n].iter().map(|&t| gamma(t, self.r_lo)).sum();
        0.5 * self.residual(x).norm_squared() + self.lambda1 * pen
    }

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let (r, theta) = x.split_at(n);
        let u = self.a.tr_mul(&self.residual(x));
        let mut g = vec![0.0; 2 * n];
        for i in 0..n {
            let (c, s) = (theta[i].cos(), theta[i].sin());
            let (uc, us) = (u[i], u[n + i]);
            g[i] = uc * c + us * s + self.lambda1 * gamma_prime(r[i], self.r_lo);
            g[n + i] = r[i] * (us * c - uc * s);
        }
        g
    }

    /// Valid on `[r_lo, 1]^n x R^n`: there `|J_phi| <= 1`, each 2x2 block of
    /// the curvature of `phi` is at most golden-ratio times the matching
    /// gradient pair, and `gamma'' <= 2 / r_lo^3`.
    fn lipschitz_bound(&self) -> Option<f64> {
        let a = self.a_norm;
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        let grad_bound = a * (a * (self.n as f64).sqrt() + self.yhat.norm());
        Some(a * a + golden * grad_bound + 2.0 * self.lambda1 / self.r_lo.powi(3))
    }
}

/// `c(r, theta) = sin(half_p * theta)`.
#[derive(Debug, Clone, Copy)]
pub struct SineMap {
    n: usize,
    half_p: f64,
}

impl MapOracle for SineMap {
    fn dim_in(&self) -> usize {
        2 * self.n
    }
    fn dim_out(&self) -> usize {
        self.n
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        x[self.n..].iter().map(|t| (self.half_p * t).sin()).collect()
    }
    fn vjp(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; 2 * self.n];
        for (i, (t, wi)) in x[self.n..].iter().zip(w).enumerate() {
            out[self.n + i] = wi * self.half_p * (self.half_p * t).cos();
        }
        out
    }
    fn jac_lipschitz_bound(&self) -> Option<f64> {
        Some(self.half_p * self.half_p)
    }
    fn jac_norm_bound(&self) -> Option<f64> {
        Some(self.half_p)
    }
}
