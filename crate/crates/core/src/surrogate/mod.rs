//! The physics-informed denoising surrogate: a dual-branch (GRU over the
//! parameter trajectory + feedforward over the current noisy cost),
//! dual-head (denoised cost + next parameters) network trained with a
//! composite data + gradient-consistency loss.
//!
//! All weights live in one flat `Vec<f64>` with a fixed tensor layout, so
//! Adam, gradient checking, and bitwise checkpoint round-trips stay
//! simple. Reverse-mode gradients are hand-written in `train.rs`.

mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;

pub use train::{loss_gradient, train, LossBreakdown, TrainOutcome};

/// One optimization step of reference data: the surrogate's training row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub theta: Vec<f64>,
    pub c_noisy: f64,
    pub c_zne: f64,
    pub g_zne: Vec<f64>,
    pub theta_next: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Physics-loss weight.
    pub beta: f64,
    pub epochs: usize,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Finite-difference step for the input gradient, in normalized units.
    pub fd_step: f64,
    pub seed: u64,
    pub gru_hidden: usize,
    pub scalar_width: usize,
    pub fusion_width: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            beta: 1.0,
            epochs: 3000,
            lr: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            fd_step: 1e-3,
            seed: 0,
            gru_hidden: 64,
            scalar_width: 64,
            fusion_width: 64,
        }
    }
}

/// How Stage III turns a surrogate evaluation into a parameter update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepMode {
    /// theta - eta * input_gradient (default).
    Gradient,
    /// Take the next-parameter head verbatim.
    Head,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub n_params: usize,
    pub gru_hidden: usize,
    pub scalar_width: usize,
    pub fusion_width: usize,
}

impl ModelDims {
    /// GRU input width: theta plus the noisy cost.
    pub fn input(&self) -> usize {
        self.n_params + 1
    }
}

/// Affine maps taking raw theta / cost values into [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub theta_mid: Vec<f64>,
    pub theta_scale: Vec<f64>,
    pub c_mid: f64,
    pub c_scale: f64,
}

impl Normalization {
    pub fn identity(n_params: usize) -> Self {
        Normalization {
            theta_mid: vec![0.0; n_params],
            theta_scale: vec![1.0; n_params],
            c_mid: 0.0,
            c_scale: 1.0,
        }
    }

    /// Fit from dataset extrema with a 10% margin on each side.
    pub fn fit(dataset: &[TrajectoryRecord]) -> Result<Self> {
        let n_params = dataset
            .first()
            .ok_or_else(|| Error::invalid("empty dataset"))?
            .theta
            .len();
        let mut t_lo = vec![f64::INFINITY; n_params];
        let mut t_hi = vec![f64::NEG_INFINITY; n_params];
        let mut c_lo = f64::INFINITY;
        let mut c_hi = f64::NEG_INFINITY;
        for r in dataset {
            for (i, &t) in r.theta.iter().chain(r.theta_next.iter()).enumerate() {
                let i = i % n_params;
                t_lo[i] = t_lo[i].min(t);
                t_hi[i] = t_hi[i].max(t);
            }
            for &c in &[r.c_noisy, r.c_zne] {
                c_lo = c_lo.min(c);
                c_hi = c_hi.max(c);
            }
        }
        let widen = |lo: f64, hi: f64| {
            let mid = (lo + hi) / 2.0;
            let half = (hi - lo) / 2.0;
            let scale = if half > 0.0 { 1.1 * half } else { 1.0 };
            (mid, scale)
        };
        let mut theta_mid = Vec::with_capacity(n_params);
        let mut theta_scale = Vec::with_capacity(n_params);
        for i in 0..n_params {
            let (m, s) = widen(t_lo[i], t_hi[i]);
            theta_mid.push(m);
            theta_scale.push(s);
        }
        let (c_mid, c_scale) = widen(c_lo, c_hi);
        Ok(Normalization { theta_mid, theta_scale, c_mid, c_scale })
    }

    pub fn norm_theta(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .enumerate()
            .map(|(i, t)| (t - self.theta_mid[i]) / self.theta_scale[i])
            .collect()
    }

    pub fn denorm_theta(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, v)| self.theta_mid[i] + self.theta_scale[i] * v)
            .collect()
    }

    pub fn norm_c(&self, c: f64) -> f64 {
        (c - self.c_mid) / self.c_scale
    }

    pub fn denorm_c(&self, v: f64) -> f64 {
        self.c_mid + self.c_scale * v
    }
}

/// Tensor indices into the flat weight vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Tensor {
    Wz,
    Uz,
    Bz,
    Wr,
    Ur,
    Br,
    Wn,
    Un,
    Bn,
    A1,
    B1,
    A2,
    B2,
    Wf,
    Bf,
    Wv,
    Bv,
    Wt,
    Bt,
}

pub(crate) const TENSORS: [Tensor; 19] = [
    Tensor::Wz,
    Tensor::Uz,
    Tensor::Bz,
    Tensor::Wr,
    Tensor::Ur,
    Tensor::Br,
    Tensor::Wn,
    Tensor::Un,
    Tensor::Bn,
    Tensor::A1,
    Tensor::B1,
    Tensor::A2,
    Tensor::B2,
    Tensor::Wf,
    Tensor::Bf,
    Tensor::Wv,
    Tensor::Bv,
    Tensor::Wt,
    Tensor::Bt,
];

impl Tensor {
    /// (rows, cols); biases are (rows, 1).
    pub(crate) fn shape(self, d: &ModelDims) -> (usize, usize) {
        let (h, w, f, p) = (d.gru_hidden, d.scalar_width, d.fusion_width, d.n_params);
        match self {
            Tensor::Wz | Tensor::Wr | Tensor::Wn => (h, d.input()),
            Tensor::Uz | Tensor::Ur | Tensor::Un => (h, h),
            Tensor::Bz | Tensor::Br | Tensor::Bn => (h, 1),
            Tensor::A1 => (w, 1),
            Tensor::B1 => (w, 1),
            Tensor::A2 => (w, w),
            Tensor::B2 => (w, 1),
            Tensor::Wf => (f, h + w),
            Tensor::Bf => (f, 1),
            Tensor::Wv => (1, f),
            Tensor::Bv => (1, 1),
            Tensor::Wt => (p, f),
            Tensor::Bt => (p, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateModel {
    pub dims: ModelDims,
    pub norm: Normalization,
    pub fd_step: f64,
    pub norm_frozen: bool,
    weights: Vec<f64>,
}

impl SurrogateModel {
    pub fn new(n_params: usize, cfg: &TrainConfig) -> Result<Self> {
        if n_params == 0 {
            return Err(Error::invalid("surrogate needs at least one parameter"));
        }
        let dims = ModelDims {
            n_params,
            gru_hidden: cfg.gru_hidden,
            scalar_width: cfg.scalar_width,
            fusion_width: cfg.fusion_width,
        };
        let mut weights = vec![0.0; Self::total_len(&dims)];
        let mut rng = Stream::new(cfg.seed, &[Stream::tag("weights")]);
        let mut offset = 0;
        for t in TENSORS {
            let (r, c) = t.shape(&dims);
            let len = r * c;
            if c > 1 || matches!(t, Tensor::A1) {
                // Xavier-uniform on weight matrices; biases stay zero.
                let a = (6.0 / (r + c) as f64).sqrt();
                for w in &mut weights[offset..offset + len] {
                    *w = rng.uniform_in(-a, a);
                }
            }
            offset += len;
        }
        Ok(SurrogateModel {
            dims,
            norm: Normalization::identity(n_params),
            fd_step: cfg.fd_step,
            norm_frozen: false,
            weights,
        })
    }

    pub(crate) fn total_len(dims: &ModelDims) -> usize {
        TENSORS
            .iter()
            .map(|t| {
                let (r, c) = t.shape(dims);
                r * c
            })
            .sum()
    }

    pub(crate) fn offset(&self, t: Tensor) -> usize {
        let mut off = 0;
        for u in TENSORS {
            if u == t {
                return off;
            }
            let (r, c) = u.shape(&self.dims);
            off += r * c;
        }
        unreachable!()
    }

    pub(crate) fn tensor(&self, t: Tensor) -> &[f64] {
        let (r, c) = t.shape(&self.dims);
        let off = self.offset(t);
        &self.weights[off..off + r * c]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn n_weights(&self) -> usize {
        self.weights.len()
    }

    /// Save all weights, sizes and normalization constants. JSON floats
    /// use shortest-exact formatting, so round-trips are bitwise.
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let doc = serde_json::json!({
            "format": "surrogate-checkpoint",
            "version": 1,
            "model": self,
        });
        std::fs::write(path, serde_json::to_string(&doc).map_err(to_numeric)?)?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let doc: serde_json::Value = serde_json::from_str(&text).map_err(to_numeric)?;
        if doc["format"] != "surrogate-checkpoint" || doc["version"] != 1 {
            return Err(Error::invalid("unrecognized checkpoint format"));
        }
        let model: SurrogateModel = serde_json::from_value(doc["model"].clone()).map_err(to_numeric)?;
        if model.weights.len() != Self::total_len(&model.dims) {
            return Err(Error::invalid("checkpoint weight count mismatch"));
        }
        Ok(model)
    }
}

fn to_numeric(e: serde_json::Error) -> Error {
    Error::Numeric(e.to_string())
}

/// Intermediate activations of one GRU step, kept for backprop.
#[derive(Debug, Clone)]
pub(crate) struct GruCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub n: Vec<f64>,
    pub h: Vec<f64>,
}

/// Scalar-branch and head activations for one record.
#[derive(Debug, Clone)]
pub(crate) struct HeadCache {
    pub c_norm: f64,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub fused_in: Vec<f64>,
    pub fused: Vec<f64>,
    /// Normalized value-head output.
    pub v: f64,
    /// Normalized theta-head output.
    pub t: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub(crate) fn matvec(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(out.len(), rows);
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        out[r] = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

impl SurrogateModel {
    /// h_t = (1 - z) h_{t-1} + z tanh(Wn x + Un (r . h_{t-1}) + bn)
    pub(crate) fn gru_step(&self, x: &[f64], h_prev: &[f64]) -> GruCache {
        let h = self.dims.gru_hidden;
        let d = self.dims.input();
        let mut z = vec![0.0; h];
        let mut r = vec![0.0; h];
        let mut n = vec![0.0; h];
        let mut tmp = vec![0.0; h];
        matvec(self.tensor(Tensor::Wz), h, d, x, &mut z);
        matvec(self.tensor(Tensor::Uz), h, h, h_prev, &mut tmp);
        let bz = self.tensor(Tensor::Bz);
        for i in 0..h {
            z[i] = sigmoid(z[i] + tmp[i] + bz[i]);
        }
        matvec(self.tensor(Tensor::Wr), h, d, x, &mut r);
        matvec(self.tensor(Tensor::Ur), h, h, h_prev, &mut tmp);
        let br = self.tensor(Tensor::Br);
        for i in 0..h {
            r[i] = sigmoid(r[i] + tmp[i] + br[i]);
        }
        let gated: Vec<f64> = r.iter().zip(h_prev).map(|(ri, hi)| ri * hi).collect();
        matvec(self.tensor(Tensor::Wn), h, d, x, &mut n);
        matvec(self.tensor(Tensor::Un), h, h, &gated, &mut tmp);
        let bn = self.tensor(Tensor::Bn);
        for i in 0..h {
            n[i] = (n[i] + tmp[i] + bn[i]).tanh();
        }
        let h_new: Vec<f64> = (0..h).map(|i| (1.0 - z[i]) * h_prev[i] + z[i] * n[i]).collect();
        GruCache { x: x.to_vec(), h_prev: h_prev.to_vec(), z, r, n, h: h_new }
    }

    /// Scalar branch, fusion and both heads from (h_t, normalized c_t).
    pub(crate) fn heads(&self, h_t: &[f64], c_norm: f64) -> HeadCache {
        let d = &self.dims;
        let (w, f, p, h) = (d.scalar_width, d.fusion_width, d.n_params, d.gru_hidden);
        let a1 = self.tensor(Tensor::A1);
        let b1 = self.tensor(Tensor::B1);
        let u1: Vec<f64> = (0..w).map(|i| (a1[i] * c_norm + b1[i]).tanh()).collect();
        let mut u2 = vec![0.0; w];
        matvec(self.tensor(Tensor::A2), w, w, &u1, &mut u2);
        let b2 = self.tensor(Tensor::B2);
        for i in 0..w {
            u2[i] = (u2[i] + b2[i]).tanh();
        }
        let mut fused_in = Vec::with_capacity(h + w);
        fused_in.extend_from_slice(h_t);
        fused_in.extend_from_slice(&u2);
        let mut fused = vec![0.0; f];
        matvec(self.tensor(Tensor::Wf), f, h + w, &fused_in, &mut fused);
        let bf = self.tensor(Tensor::Bf);
        for i in 0..f {
            fused[i] = (fused[i] + bf[i]).tanh();
        }
        let wv = self.tensor(Tensor::Wv);
        let v = wv.iter().zip(&fused).map(|(a, b)| a * b).sum::<f64>() + self.tensor(Tensor::Bv)[0];
        let mut t = vec![0.0; p];
        matvec(self.tensor(Tensor::Wt), p, f, &fused, &mut t);
        let bt = self.tensor(Tensor::Bt);
        for i in 0..p {
            t[i] += bt[i];
        }
        HeadCache { c_norm, u1, u2, fused_in, fused, v, t }
    }

    /// Normalized GRU inputs for a trajectory prefix.
    pub(crate) fn normalize_prefix(&self, prefix: &[(Vec<f64>, f64)]) -> Result<Vec<Vec<f64>>> {
        if prefix.is_empty() {
            return Err(Error::invalid("trajectory prefix must be non-empty"));
        }
        prefix
            .iter()
            .map(|(theta, c)| {
                if theta.len() != self.dims.n_params {
                    return Err(Error::DimensionMismatch("prefix theta length".into()));
                }
                let mut x = self.norm.norm_theta(theta);
                x.push(self.norm.norm_c(*c));
                Ok(x)
            })
            .collect()
    }

    /// Run the GRU over a normalized prefix, returning all hidden states.
    pub(crate) fn run_gru(&self, xs: &[Vec<f64>]) -> Vec<GruCache> {
        let mut h_prev = vec![0.0; self.dims.gru_hidden];
        let mut caches = Vec::with_capacity(xs.len());
        for x in xs {
            let c = self.gru_step(x, &h_prev);
            h_prev = c.h.clone();
            caches.push(c);
        }
        caches
    }

    /// Denoised cost and next-parameter prediction from a trajectory
    /// prefix of (theta_s, c_noisy_s) pairs ending at the current step.
    pub fn forward(&self, prefix: &[(Vec<f64>, f64)]) -> Result<(f64, Vec<f64>)> {
        let xs = self.normalize_prefix(prefix)?;
        let caches = self.run_gru(&xs);
        let h_t = &caches.last().unwrap().h;
        let c_norm = self.norm.norm_c(prefix.last().unwrap().1);
        let hc = self.heads(h_t, c_norm);
        if !hc.v.is_finite() || hc.t.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite surrogate activation".into()));
        }
        Ok((self.norm.denorm_c(hc.v), self.norm.denorm_theta(&hc.t)))
    }

    /// d C_hat / d theta_t by symmetric finite differences on the
    /// network's normalized input, 2 * n_params forward passes sharing
    /// the GRU prefix below the final step.
    pub fn input_gradient(&self, prefix: &[(Vec<f64>, f64)]) -> Result<Vec<f64>> {
        let xs = self.normalize_prefix(prefix)?;
        let (last_x, head) = xs.split_last_two();
        let mut h_prev = vec![0.0; self.dims.gru_hidden];
        for x in head {
            h_prev = self.gru_step(x, &h_prev).h;
        }
        let c_norm = *last_x.last().unwrap();
        let h = self.fd_step;
        let mut grad = Vec::with_capacity(self.dims.n_params);
        for i in 0..self.dims.n_params {
            let mut xp = last_x.to_vec();
            xp[i] += h;
            let vp = self.heads(&self.gru_step(&xp, &h_prev).h, c_norm).v;
            let mut xm = last_x.to_vec();
            xm[i] -= h;
            let vm = self.heads(&self.gru_step(&xm, &h_prev).h, c_norm).v;
            // physical-units gradient: value scale over parameter scale
            grad.push(self.norm.c_scale * (vp - vm) / (2.0 * h * self.norm.theta_scale[i]));
        }
        Ok(grad)
    }

    /// Stage III update rule.
    pub fn step(&self, prefix: &[(Vec<f64>, f64)], eta: f64, mode: StepMode) -> Result<Vec<f64>> {
        match mode {
            StepMode::Gradient => {
                let g = self.input_gradient(prefix)?;
                crate::estimators::gd_step(&prefix.last().unwrap().0, &g, eta)
            }
            StepMode::Head => Ok(self.forward(prefix)?.1),
        }
    }
}

trait SplitLastTwo<T> {
    fn split_last_two(&self) -> (&T, &[T]);
}

impl<T> SplitLastTwo<T> for [T] {
    fn split_last_two(&self) -> (&T, &[T]) {
        let (last, head) = self.split_last().expect("non-empty");
        (last, head)
    }
}

/// Composite loss of a model over a Stage I dataset, in physical units:
/// L_data averages squared cost and next-parameter errors, L_phys
/// averages squared input-gradient mismatch, total = L_data + beta L_phys.
pub fn loss(model: &SurrogateModel, dataset: &[TrajectoryRecord], beta: f64) -> Result<LossBreakdown> {
    train::loss_only(model, dataset, beta)
}
