//! Sparse `l_p`-loss regression with a multilayer perceptron.
//!
//! ```text
//! minimize (1/m) sum_i |MLP(a_i; v) - y_i|^p / p + lambda |v|_1   s.t.  v in C
//! ```
//!
//! with `C = {v : |v|_inf <= R}` and `R = (lambda m)^{-1} sum_i |MLP(a_i; 0) - y_i|^p / p`,
//! a box that contains every minimizer. In composite form `f = 0`,
//! `g = lambda |.|_1 + indicator of C`, `c(v)_i = MLP(a_i; v) - y_i` and
//! `h(u) = (1/(p m)) sum |u_i|^p`.
//!
//! Parameters are packed layer by layer: `W_l` (row-major, `n_{l+1} x n_l`)
//! followed by `b_l`. Hidden layers apply the activation; the output layer is
//! linear.

use std::path::PathBuf;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::idx::read_idx;
use super::rng::{normals, stream, uniforms, Field};
use super::GenerateError;
use crate::oracle::{MapOracle, Problem, ZeroSmooth};
use crate::prox::{L1Box, LpPenalty};
use crate::solver::{ScheduleSpec, SolverConfig};

/// Standard deviation of the noise added to synthetic teacher outputs.
pub const NOISE_LEVEL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed through the activation value `a`.
    fn slope(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MlpSource {
    /// Uniform features labelled by a random teacher network.
    #[default]
    Synthetic,
    /// MNIST-style IDX image and label files.
    Idx { images: PathBuf, labels: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpParams {
    pub layer_dims: Vec<usize>,
    pub n_samples: usize,
    pub p: f64,
    pub lambda: f64,
    pub activation: Activation,
    pub source: MlpSource,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            layer_dims: vec![20, 8, 4, 1],
            n_samples: 100,
            p: 0.5,
            lambda: 0.05,
            activation: Activation::Tanh,
            source: MlpSource::Synthetic,
        }
    }
}

impl MlpParams {
    pub fn validate(&self) -> Result<(), GenerateError> {
        let d = &self.layer_dims;
        if d.len() < 2 || d.last() != Some(&1) || d.contains(&0) {
            return Err(GenerateError::InvalidParams(
                "layer_dims needs at least two positive entries and must end in 1".into(),
            ));
        }
        if self.n_samples < 1 {
            return Err(GenerateError::InvalidParams("n_samples >= 1 required".into()));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(GenerateError::InvalidParams("p must lie in (0, 1)".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(GenerateError::InvalidParams("lambda must be positive".into()));
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        n_params(&self.layer_dims)
    }
}

fn n_params(dims: &[usize]) -> usize {
    dims.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpData {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub c_radius: f64,
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpInstance {
    pub seed: u64,
    pub params: MlpParams,
    pub data: MlpData,
}

/// The network evaluated on a fixed sample set, as `v -> (MLP(a_i; v) - y_i)_i`.
#[derive(Debug, Clone)]
pub struct MlpResidual {
    dims: Vec<usize>,
    activation: Activation,
    features: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl MlpResidual {
    pub fn new(
        dims: Vec<usize>,
        activation: Activation,
        features: Vec<Vec<f64>>,
        targets: Vec<f64>,
    ) -> Self {
        Self {
            dims,
            activation,
            features,
            targets,
        }
    }

    /// Layer outputs for one sample; the last entry holds the scalar output.
    fn forward(&self, v: &[f64], a: &[f64]) -> Vec<Vec<f64>> {
        let layers = self.dims.len() - 1;
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(a.to_vec());
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let w = &v[off..off + n_in * n_out];
            let b = &v[off + n_in * n_out..off + (n_in + 1) * n_out];
            off += (n_in + 1) * n_out;
            let input = &acts[l];
            let out: Vec<f64> = (0..n_out)
                .map(|j| {
                    let z = crate::linalg::dot(&w[j * n_in..(j + 1) * n_in], input) + b[j];
                    if l + 1 < layers {
                        self.activation.apply(z)
                    } else {
                        z
                    }
                })
                .collect();
            acts.push(out);
        }
        acts
    }

    pub fn predict(&self, v: &[f64], a: &[f64]) -> f64 {
        self.forward(v, a).last().expect("at least one layer")[0]
    }

    /// Adds `weight * grad_v MLP(a; v)` into `out`.
    fn backward(&self, v: &[f64], acts: &[Vec<f64>], weight: f64, out: &mut [f64]) {
        let layers = self.dims.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut off = 0;
        for l in 0..layers {
            offsets.push(off);
            off += (self.dims[l] + 1) * self.dims[l + 1];
        }
        let mut delta = vec![weight];
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let o = offsets[l];
            let input = &acts[l];
            for j in 0..n_out {
                let dj = delta[j];
                if dj == 0.0 {
                    continue;
                }
                for k in 0..n_in {
                    out[o + j * n_in + k] += dj * input[k];
                }
                out[o + n_in * n_out + j] += dj;
            }
            if l > 0 {
                let w = &v[o..o + n_in * n_out];
                delta = (0..n_in)
                    .map(|k| {
                        let s: f64 = (0..n_out).map(|j| w[j * n_in + k] * delta[j]).sum();
                        s * self.activation.slope(input[k])
                    })
                    .collect();
            }
        }
    }
}

impl MapOracle for MlpResidual {
    fn dim_in(&self) -> usize {
        n_params(&self.dims)
    }
    fn dim_out(&self) -> usize {
        self.targets.len()
    }
    fn eval(&self, v: &[f64]) -> Vec<f64> {
        self.features
            .iter()
            .zip(&self.targets)
            .map(|(a, y)| self.predict(v, a) - y)
            .collect()
    }
    fn vjp(&self, v: &[f64], w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_in()];
        for (a, &wi) in self.features.iter().zip(w) {
            if wi != 0.0 {
                let acts = self.forward(v, a);
                self.backward(v, &acts, wi, &mut out);
            }
        }
        out
    }
}

/// `(lambda m)^{-1} sum_i |MLP(a_i; 0) - y_i|^p / p`.
pub fn c_radius(net: &MlpResidual, p: f64, lambda: f64) -> f64 {
    let zero = vec![0.0; net.dim_in()];
    let m = net.dim_out() as f64;
    net.eval(&zero).iter().map(|u| u.abs().powf(p) / p).sum::<f64>() / (lambda * m)
}

fn xavier(seed: u64, dims: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_params(dims));
    for (l, w) in dims.windows(2).enumerate() {
        let bound = (6.0 / (w[0] + w[1]) as f64).sqrt();
        out.extend(uniforms(&mut stream(seed, 0, Field::MlpStart, l as u32), w[0] * w[1], -bound, bound));
        out.extend(std::iter::repeat_n(0.0, w[1]));
    }
    out
}

fn synthetic(seed: u64, params: &MlpParams) -> (Vec<Vec<f64>>, Vec<f64>) {
    let dims = &params.layer_dims;
    let mut feat = stream(seed, 0, Field::MlpFeatures, 0);
    let features: Vec<Vec<f64>> = (0..params.n_samples)
        .map(|_| (0..dims[0]).map(|_| feat.random::<f64>()).collect())
        .collect();
    let mut teacher = Vec::with_capacity(params.n_params());
    for (l, w) in dims.windows(2).enumerate() {
        let s = 1.0 / (w[0] as f64).sqrt();
        let draws = normals(&mut stream(seed, 0, Field::MlpTeacher, l as u32), w[0] * w[1]);
        teacher.extend(draws.into_iter().map(|v| v * s));
        teacher.extend(std::iter::repeat_n(0.0, w[1]));
    }
    let net = MlpResidual::new(dims.clone(), params.activation, Vec::new(), Vec::new());
    let noise = normals(&mut stream(seed, 0, Field::MlpNoise, 0), params.n_samples);
    let targets = features
        .iter()
        .zip(&noise)
        .map(|(a, e)| (net.predict(&teacher, a) + NOISE_LEVEL * e).clamp(-1.0, 1.0))
        .collect();
    (features, targets)
}

fn from_idx(
    seed: u64,
    params: &MlpParams,
    images: &PathBuf,
    labels: &PathBuf,
) -> Result<(Vec<Vec<f64>>, Vec<f64>), GenerateError> {
    let img = read_idx(images)?;
    let lab = read_idx(labels)?;
    if img.dims.len() < 2 || lab.dims.len() != 1 || img.dims[0] != lab.dims[0] {
        return Err(GenerateError::InvalidParams(format!(
            "image dims {:?} and label dims {:?} do not pair up",
            img.dims, lab.dims
        )));
    }
    let width: usize = img.dims[1..].iter().product();
    if width != params.layer_dims[0] {
        return Err(GenerateError::InvalidParams(format!(
            "images have {width} pixels but layer_dims starts with {}",
            params.layer_dims[0]
        )));
    }
    let total = img.dims[0];
    if params.n_samples > total {
        return Err(GenerateError::InvalidParams(format!(
            "n_samples {} exceeds the {total} available images",
            params.n_samples
        )));
    }
    let mut pick = sample(
        &mut stream(seed, 0, Field::MlpSubsample, 0),
        total,
        params.n_samples,
    )
    .into_vec();
    pick.sort_unstable();
    let features = pick
        .iter()
        .map(|&i| img.data[i * width..(i + 1) * width].iter().map(|&b| b as f64 / 255.0).collect())
        .collect();
    let targets = pick.iter().map(|&i| (lab.data[i] as f64 - 4.5) / 4.5).collect();
    Ok((features, targets))
}

impl MlpInstance {
    pub fn generate(seed: u64, params: &MlpParams) -> Result<Self, GenerateError> {
        params.validate()?;
        let (features, targets) = match &params.source {
            MlpSource::Synthetic => synthetic(seed, params),
            MlpSource::Idx { images, labels } => from_idx(seed, params, images, labels)?,
        };
        let net = MlpResidual::new(params.layer_dims.clone(), params.activation, features, targets);
        let radius = c_radius(&net, params.p, params.lambda);
        if !(radius > 0.0) {
            return Err(GenerateError::Degenerate {
                attempts: 1,
                reason: "every target is zero, so the box C collapses",
            });
        }
        let x0 = xavier(seed, &params.layer_dims)
            .into_iter()
            .map(|v| v.clamp(-radius, radius))
            .collect();
        Ok(Self {
            seed,
            params: params.clone(),
            data: MlpData {
                features: net.features,
                targets: net.targets,
                c_radius: radius,
                x0,
            },
        })
    }

    pub fn validate(&self) -> Result<(), GenerateError> {
        self.params.validate()?;
        let d = &self.data;
        let n0 = self.params.layer_dims[0];
        let ok = d.features.len() == self.params.n_samples
            && d.features.iter().all(|a| a.len() == n0)
            && d.targets.len() == self.params.n_samples
            && d.x0.len() == self.params.n_params();
        if !ok {
            return Err(GenerateError::InvalidParams("array shapes disagree with params".into()));
        }
        if !(d.c_radius > 0.0) {
            return Err(GenerateError::InvalidParams("c_radius must be positive".into()));
        }
        Ok(())
    }

    pub fn residual_map(&self) -> MlpResidual {
        MlpResidual::new(
            self.params.layer_dims.clone(),
            self.params.activation,
            self.data.features.clone(),
            self.data.targets.clone(),
        )
    }

    pub fn x0(&self) -> Vec<f64> {
        self.data.x0.clone()
    }

    pub fn y0(&self) -> Vec<f64> {
        vec![0.0; self.params.n_samples]
    }

    /// Bound on `h(c(v))` over `C`: hidden activations lie in `[-1, 1]`, so
    /// `|MLP(a; v)| <= R (width + 1)` where `width` is the input size of the
    /// output layer (the largest `|a_i|_1` when there is no hidden layer).
    pub fn h_sup_on_image_bound(&self) -> f64 {
        let d = &self.params.layer_dims;
        let r = self.data.c_radius;
        let width = if d.len() > 2 {
            d[d.len() - 2] as f64
        } else {
            self.data
                .features
                .iter()
                .map(|a| a.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        let (p, m) = (self.params.p, self.params.n_samples as f64);
        self.data
            .targets
            .iter()
            .map(|y| (r * (width + 1.0) + y.abs()).powf(p))
            .sum::<f64>()
            / (p * m)
    }

    pub fn problem(&self) -> Problem {
        let n = self.params.n_params();
        let (p, lambda, r) = (self.params.p, self.params.lambda, self.data.c_radius);
        let m = self.params.n_samples as f64;
        Problem::new(
            Box::new(ZeroSmooth(n)),
            Box::new(L1Box { lambda, radius: r }),
            Box::new(LpPenalty::unbounded(1.0 / (p * m), p)),
            Box::new(self.residual_map()),
        )
        .expect("generated dimensions are consistent")
        .with_inf_fg_lower_bound(0.0)
        .with_fg_abs_sup_bound(lambda * n as f64 * r)
        .with_h_sup_on_image_bound(self.h_sup_on_image_bound())
    }
}

/// Reference step-size settings with a caller-chosen `beta0`.
pub fn default_config(beta0: f64, iters: usize) -> SolverConfig {
    SolverConfig::new(ScheduleSpec::power(beta0, 0.5), 1e7, 0.01, 0.5, 2.0, iters)
}
