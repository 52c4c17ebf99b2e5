//! Quadratically constrained quadratic program with an `l_p` penalty:
//!
//! ```text
//! minimize   x'Q_0 x / 2 + b_0'x + alpha |x|_p^p
//! subject to x'Q_i x / 2 + b_i'x + r_i <= 0,   i = 1..m
//!            |x|_inf <= r
//! ```
//!
//! The constraints become `h = indicator of the nonpositive orthant` composed
//! with `c(x) = (x'Q_i x / 2 + b_i'x + r_i)_i`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::rng::{normals, stream, uniforms, Field};
use super::GenerateError;
use crate::oracle::{MapOracle, Problem, SmoothOracle};
use crate::prox::{prox_lp_power, LpPenalty, LpProxParams, NonpositiveIndicator};
use crate::solver::{ScheduleSpec, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QcqpParams {
    pub n: usize,
    pub m: usize,
    pub alpha: f64,
    pub p: f64,
    pub scale0: f64,
}

impl Default for QcqpParams {
    fn default() -> Self {
        Self {
            n: 20,
            m: 5,
            alpha: 0.05,
            p: 0.8,
            scale0: 5.0,
        }
    }
}

impl QcqpParams {
    pub fn validate(&self) -> Result<(), GenerateError> {
        if self.n < 2 {
            return Err(GenerateError::InvalidParams("n >= 2 required".into()));
        }
        if self.m < 1 {
            return Err(GenerateError::InvalidParams("m >= 1 required".into()));
        }
        if !(self.alpha > 0.0) || !(self.scale0 > 0.0) {
            return Err(GenerateError::InvalidParams(
                "alpha and scale0 must be positive".into(),
            ));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(GenerateError::InvalidParams("p must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Generated problem data. Matrices are stored row-major as nested lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QcqpData {
    /// Regeneration attempt that produced this instance.
    pub attempt: u32,
    pub q0: Vec<Vec<f64>>,
    pub b0: Vec<f64>,
    pub q: Vec<Vec<Vec<f64>>>,
    pub b: Vec<Vec<f64>>,
    pub r_i: Vec<f64>,
    pub r: f64,
    /// Minimizer of `|x + b0|^2 / 2 + alpha |x|_p^p` used to set `r_i` and `r`.
    pub xbar: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QcqpInstance {
    pub seed: u64,
    pub params: QcqpParams,
    pub data: QcqpData,
}

const MAX_ATTEMPTS: u32 = 10;

pub(crate) fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn from_rows(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    DMatrix::from_fn(nr, nc, |i, j| rows[i][j])
}

fn spectral_norm_sym(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
}

impl QcqpInstance {
    /// Deterministic in `(seed, params)`.
    pub fn generate(seed: u64, params: &QcqpParams) -> Result<Self, GenerateError> {
        params.validate()?;
        let (n, m) = (params.n, params.m);
        let lp = LpProxParams::new(params.p, params.alpha, 1.0).expect("validated above");
        for attempt in 0..MAX_ATTEMPTS {
            let b0: Vec<f64> = normals(&mut stream(seed, attempt, Field::QcqpLinear, 0), n)
                .into_iter()
                .map(|v| params.scale0 * v)
                .collect();
            let xbar: Vec<f64> = b0.iter().map(|&b| prox_lp_power(-b, &lp)).collect();
            if xbar.iter().all(|&v| v == 0.0) {
                continue;
            }
            let xv = DVector::from_column_slice(&xbar);
            let mut q = Vec::with_capacity(m);
            let mut r_i = Vec::with_capacity(m);
            for i in 0..m as u32 {
                let w = normals(&mut stream(seed, attempt, Field::QcqpRotation, i), n * n);
                let u = DMatrix::from_row_slice(n, n, &w).qr().q();
                let d = uniforms(&mut stream(seed, attempt, Field::QcqpSpectrum, i), n, 0.0, 5.0);
                let qi = &u * DMatrix::from_diagonal(&DVector::from_vec(d)) * u.transpose();
                let qi = (&qi + qi.transpose()) * 0.5;
                r_i.push(-0.25 * xv.dot(&(&qi * &xv)));
                q.push(to_rows(&qi));
            }
            if r_i.iter().any(|&v| !(v < 0.0)) {
                continue;
            }
            let r = xbar.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            return Ok(Self {
                seed,
                params: params.clone(),
                data: QcqpData {
                    attempt,
                    q0: to_rows(&DMatrix::identity(n, n)),
                    b0,
                    q,
                    b: vec![vec![0.0; n]; m],
                    r_i,
                    r,
                    xbar,
                },
            });
        }
        Err(GenerateError::Degenerate {
            attempts: MAX_ATTEMPTS,
            reason: "every reference minimizer was zero",
        })
    }

    /// Structural checks for instances read from disk.
    pub fn validate(&self) -> Result<(), GenerateError> {
        self.params.validate()?;
        let (n, m) = (self.params.n, self.params.m);
        let d = &self.data;
        let square = |a: &Vec<Vec<f64>>| a.len() == n && a.iter().all(|r| r.len() == n);
        let ok = square(&d.q0)
            && d.b0.len() == n
            && d.q.len() == m
            && d.q.iter().all(square)
            && d.b.len() == m
            && d.b.iter().all(|b| b.len() == n)
            && d.r_i.len() == m
            && d.xbar.len() == n;
        if !ok {
            return Err(GenerateError::InvalidParams("array shapes disagree with n, m".into()));
        }
        if d.r_i.iter().any(|&v| !(v < 0.0)) || !(d.r > 0.0) {
            return Err(GenerateError::InvalidParams("need r_i < 0 and r > 0".into()));
        }
        Ok(())
    }

    /// Clamp of `-b0` onto the box.
    pub fn x0(&self) -> Vec<f64> {
        let r = self.data.r;
        self.data.b0.iter().map(|&b| (-b).clamp(-r, r)).collect()
    }

    pub fn y0(&self) -> Vec<f64> {
        vec![0.0; self.params.m]
    }

    pub fn constraints(&self) -> QuadraticConstraints {
        let n = self.params.n;
        let q: Vec<DMatrix<f64>> = self.data.q.iter().map(|m| from_rows(m)).collect();
        let norms: Vec<f64> = q.iter().map(spectral_norm_sym).collect();
        QuadraticConstraints {
            q,
            b: self.data.b.iter().map(|b| DVector::from_column_slice(b)).collect(),
            r_i: self.data.r_i.clone(),
            norms,
            radius: self.data.r,
            n,
        }
    }

    pub fn objective(&self) -> QuadraticObjective {
        let q0 = from_rows(&self.data.q0);
        let norm = spectral_norm_sym(&q0);
        QuadraticObjective {
            q0,
            b0: DVector::from_column_slice(&self.data.b0),
            norm,
        }
    }

    /// `min over |x|_inf <= r` of `x'Q_0 x / 2 + b_0'x` when `Q_0` is diagonal
    /// (the generator uses the identity), else the cruder `-r |b_0|_1`; minus
    /// `alpha n r^p`.
    pub fn inf_fg_lower_bound(&self) -> f64 {
        let d = &self.data;
        let r = d.r;
        let n = self.params.n;
        let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || d.q0[i][j] == 0.0));
        let quad = if diagonal {
            (0..n)
                .map(|j| {
                    let (a, b) = (d.q0[j][j], d.b0[j]);
                    let u = if a > 0.0 { (-b / a).clamp(-r, r) } else { -r * b.signum() };
                    0.5 * a * u * u + b * u
                })
                .sum::<f64>()
        } else {
            -r * d.b0.iter().map(|v| v.abs()).sum::<f64>()
        };
        quad - self.params.alpha * n as f64 * r.powf(self.params.p)
    }

    /// `sup |f + g|` over the box: `|Q_0| n r^2 / 2 + r |b_0|_1 + alpha n r^p`.
    pub fn fg_abs_sup_bound(&self) -> f64 {
        let (n, r) = (self.params.n as f64, self.data.r);
        let q0 = spectral_norm_sym(&from_rows(&self.data.q0));
        0.5 * q0 * n * r * r
            + r * self.data.b0.iter().map(|v| v.abs()).sum::<f64>()
            + self.params.alpha * n * r.powf(self.params.p)
    }

    pub fn problem(&self) -> Problem {
        let c = self.constraints();
        let scale: Vec<f64> = self.data.r_i.iter().map(|v| v.abs().max(1.0)).collect();
        Problem::new(
            Box::new(self.objective()),
            Box::new(LpPenalty {
                weight: self.params.alpha,
                p: self.params.p,
                radius: self.data.r,
            }),
            Box::new(NonpositiveIndicator),
            Box::new(c),
        )
        .expect("generated dimensions are consistent")
        .with_inf_fg_lower_bound(self.inf_fg_lower_bound())
        .with_fg_abs_sup_bound(self.fg_abs_sup_bound())
        .with_feasibility(Box::new(move |cx: &[f64]| scaled_violation(cx, &scale)))
    }

    /// Smallest eigenvalue of each `Q_i`.
    pub fn min_eigenvalues(&self) -> Vec<f64> {
        self.data
            .q
            .iter()
            .map(|m| from_rows(m).symmetric_eigenvalues().min())
            .collect()
    }

    /// `|max(c(x), 0) / max(|r_i|, 1)|`.
    pub fn relative_feasibility(&self, x: &[f64]) -> f64 {
        let scale: Vec<f64> = self.data.r_i.iter().map(|v| v.abs().max(1.0)).collect();
        scaled_violation(&self.constraints().eval(x), &scale)
    }
}

fn scaled_violation(cx: &[f64], scale: &[f64]) -> f64 {
    cx.iter()
        .zip(scale)
        .map(|(c, s)| (c.max(0.0) / s).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Feasibility measure from a constraint vector and reference levels `r_ref`:
/// `|max(c, 0) / max(r_ref, 1)|`.
pub fn relative_feasibility(cx: &[f64], r_ref: &[f64]) -> f64 {
    let scale: Vec<f64> = r_ref.iter().map(|v| v.abs().max(1.0)).collect();
    scaled_violation(cx, &scale)
}

/// Solver settings used in the reference experiments.
pub fn default_config(beta0: f64, iters: usize) -> SolverConfig {
    SolverConfig::new(ScheduleSpec::power(beta0, 0.3), 1e7, 1.0, 0.8, 1.2, iters)
}

/// `x'Q_0 x / 2 + b_0'x`.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    q0: DMatrix<f64>,
    b0: DVector<f64>,
    norm: f64,
}

impl SmoothOracle for QuadraticObjective {
    fn dim(&self) -> usize {
        self.b0.len()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        0.5 * xv.dot(&(&self.q0 * &xv)) + self.b0.dot(&xv)
    }
    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let xv = DVector::from_column_slice(x);
        (&self.q0 * &xv + &self.b0).as_slice().to_vec()
    }
    fn lipschitz_bound(&self) -> Option<f64> {
        Some(self.norm)
    }
}

/// `c_i(x) = x'Q_i x / 2 + b_i'x + r_i`.
#[derive(Debug, Clone)]
pub struct QuadraticConstraints {
    q: Vec<DMatrix<f64>>,
    b: Vec<DVector<f64>>,
    r_i: Vec<f64>,
    norms: Vec<f64>,
    radius: f64,
    n: usize,
}

impl QuadraticConstraints {
    /// Spectral norms `|Q_i|`.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }
}

impl MapOracle for QuadraticConstraints {
    fn dim_in(&self) -> usize {
        self.n
    }
    fn dim_out(&self) -> usize {
        self.q.len()
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let xv = DVector::from_column_slice(x);
        self.q
            .iter()
            .zip(&self.b)
            .zip(&self.r_i)
            .map(|((qi, bi), ri)| 0.5 * xv.dot(&(qi * &xv)) + bi.dot(&xv) + ri)
            .collect()
    }
    fn vjp(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        let xv = DVector::from_column_slice(x);
        let mut out = DVector::zeros(self.n);
        for ((qi, bi), &wi) in self.q.iter().zip(&self.b).zip(w) {
            if wi != 0.0 {
                out += (qi * &xv + bi) * wi;
            }
        }
        out.as_slice().to_vec()
    }
    /// `sqrt(sum |Q_i|^2)`.
    fn jac_lipschitz_bound(&self) -> Option<f64> {
        Some(self.norms.iter().map(|v| v * v).sum::<f64>().sqrt())
    }
    /// `sqrt(sum (|Q_i| r sqrt(n) + |b_i|)^2)` over the box.
    fn jac_norm_bound(&self) -> Option<f64> {
        let scale = self.radius * (self.n as f64).sqrt();
        let bnorm = |b: &DVector<f64>| b.norm();
        Some(
            self.norms
                .iter()
                .zip(&self.b)
                .map(|(q, b)| (q * scale + bnorm(b)).powi(2))
                .sum::<f64>()
                .sqrt(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn feasibility_formula() {
        assert!((relative_feasibility(&[-1.0, 2.0], &[0.5, 3.0]) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(relative_feasibility(&[-1.0, -2.0], &[0.5, 3.0]), 0.0);
    }

    #[test]
    fn rejects_small_n() {
        let p = QcqpParams { n: 1, ..Default::default() };
        assert!(matches!(QcqpInstance::generate(0, &p), Err(GenerateError::InvalidParams(m)) if m.contains("n >= 2")));
    }
}
