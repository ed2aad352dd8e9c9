//! Exact reverse-mode gradients of the composite surrogate loss and the
//! full-batch Adam loop.
//!
//! The physics term differentiates *through* the finite-difference input
//! gradient, so every perturbed forward pass gets its own backward pass.
//! All training records are prefixes of one trajectory, so the base GRU
//! hidden sequence is computed once per epoch; perturbed passes re-run
//! only the final step, and their hidden adjoints join the shared
//! backpropagation through time.

use crate::error::{Error, Result};

use super::{GruCache, HeadCache, Normalization, SurrogateModel, Tensor, TrainConfig, TrajectoryRecord};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub data: f64,
    pub phys: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Total loss at the start of each epoch, before that epoch's update.
    pub loss_curve: Vec<f64>,
    /// Loss after the final update.
    pub final_loss: LossBreakdown,
}

/// y += W^T d for a (rows x cols) matrix.
fn matvec_t_acc(w: &[f64], rows: usize, cols: usize, d: &[f64], y: &mut [f64]) {
    for r in 0..rows {
        let row = &w[r * cols..(r + 1) * cols];
        let dr = d[r];
        for (yc, wc) in y.iter_mut().zip(row) {
            *yc += dr * wc;
        }
    }
}

/// grads += d x^T (outer product) plus bias accumulation elsewhere.
fn outer_acc(grads: &mut [f64], d: &[f64], x: &[f64]) {
    let cols = x.len();
    for (r, dr) in d.iter().enumerate() {
        if *dr == 0.0 {
            continue;
        }
        let row = &mut grads[r * cols..(r + 1) * cols];
        for (g, xc) in row.iter_mut().zip(x) {
            *g += dr * xc;
        }
    }
}

fn axpy(y: &mut [f64], x: &[f64]) {
    for (a, b) in y.iter_mut().zip(x) {
        *a += b;
    }
}

struct Grads {
    v: Vec<f64>,
}

impl Grads {
    fn new(model: &SurrogateModel) -> Self {
        Grads { v: vec![0.0; model.n_weights()] }
    }

    fn at<'a>(&'a mut self, model: &SurrogateModel, t: Tensor) -> &'a mut [f64] {
        let (r, c) = t.shape(&model.dims);
        let off = model.offset(t);
        &mut self.v[off..off + r * c]
    }
}

/// Backward through scalar branch, fusion and heads. `dv` and `dtheta`
/// are adjoints on the normalized head outputs. Returns d loss / d h_t.
fn backward_heads(
    model: &SurrogateModel,
    hc: &HeadCache,
    dv: f64,
    dtheta: Option<&[f64]>,
    grads: &mut Grads,
) -> Vec<f64> {
    let d = &model.dims;
    let (h, w, f) = (d.gru_hidden, d.scalar_width, d.fusion_width);
    let mut dfused = vec![0.0; f];
    if dv != 0.0 {
        let wv = model.tensor(Tensor::Wv);
        for j in 0..f {
            dfused[j] += dv * wv[j];
        }
        let gwv = grads.at(model, Tensor::Wv);
        for j in 0..f {
            gwv[j] += dv * hc.fused[j];
        }
        grads.at(model, Tensor::Bv)[0] += dv;
    }
    if let Some(dt) = dtheta {
        let wt = model.tensor(Tensor::Wt);
        matvec_t_acc(wt, d.n_params, f, dt, &mut dfused);
        outer_acc(grads.at(model, Tensor::Wt), dt, &hc.fused);
        axpy(grads.at(model, Tensor::Bt), dt);
    }
    let dfpre: Vec<f64> = dfused
        .iter()
        .zip(&hc.fused)
        .map(|(dy, y)| dy * (1.0 - y * y))
        .collect();
    outer_acc(grads.at(model, Tensor::Wf), &dfpre, &hc.fused_in);
    axpy(grads.at(model, Tensor::Bf), &dfpre);
    let mut dfin = vec![0.0; h + w];
    matvec_t_acc(model.tensor(Tensor::Wf), f, h + w, &dfpre, &mut dfin);
    let dh = dfin[..h].to_vec();
    let du2 = &dfin[h..];
    let du2pre: Vec<f64> = du2.iter().zip(&hc.u2).map(|(dy, y)| dy * (1.0 - y * y)).collect();
    outer_acc(grads.at(model, Tensor::A2), &du2pre, &hc.u1);
    axpy(grads.at(model, Tensor::B2), &du2pre);
    let mut du1 = vec![0.0; w];
    matvec_t_acc(model.tensor(Tensor::A2), w, w, &du2pre, &mut du1);
    let du1pre: Vec<f64> = du1.iter().zip(&hc.u1).map(|(dy, y)| dy * (1.0 - y * y)).collect();
    let ga1 = grads.at(model, Tensor::A1);
    for i in 0..w {
        ga1[i] += du1pre[i] * hc.c_norm;
    }
    axpy(grads.at(model, Tensor::B1), &du1pre);
    dh
}

/// Backward through one GRU step. Returns d loss / d h_{t-1}.
fn backward_gru(model: &SurrogateModel, c: &GruCache, dh: &[f64], grads: &mut Grads) -> Vec<f64> {
    let d = &model.dims;
    let (h, di) = (d.gru_hidden, d.input());
    let mut dh_prev = vec![0.0; h];
    let mut dzpre = vec![0.0; h];
    let mut dnpre = vec![0.0; h];
    for i in 0..h {
        let dn = dh[i] * c.z[i];
        dh_prev[i] = dh[i] * (1.0 - c.z[i]);
        let dz = dh[i] * (c.n[i] - c.h_prev[i]);
        dzpre[i] = dz * c.z[i] * (1.0 - c.z[i]);
        dnpre[i] = dn * (1.0 - c.n[i] * c.n[i]);
    }
    let gated: Vec<f64> = c.r.iter().zip(&c.h_prev).map(|(r, hp)| r * hp).collect();
    outer_acc(grads.at(model, Tensor::Wn), &dnpre, &c.x);
    outer_acc(grads.at(model, Tensor::Un), &dnpre, &gated);
    axpy(grads.at(model, Tensor::Bn), &dnpre);
    let mut dgated = vec![0.0; h];
    matvec_t_acc(model.tensor(Tensor::Un), h, h, &dnpre, &mut dgated);
    let mut drpre = vec![0.0; h];
    for i in 0..h {
        dh_prev[i] += dgated[i] * c.r[i];
        let dr = dgated[i] * c.h_prev[i];
        drpre[i] = dr * c.r[i] * (1.0 - c.r[i]);
    }
    outer_acc(grads.at(model, Tensor::Wz), &dzpre, &c.x);
    outer_acc(grads.at(model, Tensor::Uz), &dzpre, &c.h_prev);
    axpy(grads.at(model, Tensor::Bz), &dzpre);
    outer_acc(grads.at(model, Tensor::Wr), &drpre, &c.x);
    outer_acc(grads.at(model, Tensor::Ur), &drpre, &c.h_prev);
    axpy(grads.at(model, Tensor::Br), &drpre);
    matvec_t_acc(model.tensor(Tensor::Uz), h, h, &dzpre, &mut dh_prev);
    matvec_t_acc(model.tensor(Tensor::Ur), h, h, &drpre, &mut dh_prev);
    debug_assert_eq!(c.x.len(), di);
    dh_prev
}

fn normalized_inputs(model: &SurrogateModel, dataset: &[TrajectoryRecord]) -> Result<Vec<Vec<f64>>> {
    if dataset.is_empty() {
        return Err(Error::invalid("empty training dataset"));
    }
    dataset
        .iter()
        .map(|r| {
            if r.theta.len() != model.dims.n_params
                || r.theta_next.len() != model.dims.n_params
                || r.g_zne.len() != model.dims.n_params
            {
                return Err(Error::DimensionMismatch("training record width".into()));
            }
            let mut x = model.norm.norm_theta(&r.theta);
            x.push(model.norm.norm_c(r.c_noisy));
            Ok(x)
        })
        .collect()
}

/// Loss and its exact weight gradient over the whole dataset.
pub(crate) fn epoch_gradient(
    model: &SurrogateModel,
    xs: &[Vec<f64>],
    dataset: &[TrajectoryRecord],
    beta: f64,
) -> (Vec<f64>, LossBreakdown) {
    let n = &model.norm;
    let p = model.dims.n_params;
    let t_count = dataset.len() as f64;
    let fd = model.fd_step;
    let caches = model.run_gru(xs);
    let zeros = vec![0.0; model.dims.gru_hidden];
    let mut grads = Grads::new(model);
    let mut delta_h: Vec<Vec<f64>> = vec![vec![0.0; model.dims.gru_hidden]; dataset.len()];
    let (mut l_data, mut l_phys) = (0.0, 0.0);
    for (t, rec) in dataset.iter().enumerate() {
        let c_norm = *xs[t].last().unwrap();
        let hc = model.heads(&caches[t].h, c_norm);
        let c_hat = n.denorm_c(hc.v);
        let theta_hat = n.denorm_theta(&hc.t);
        let ec = c_hat - rec.c_zne;
        l_data += ec * ec;
        let mut dtheta = vec![0.0; p];
        for j in 0..p {
            let ej = theta_hat[j] - rec.theta_next[j];
            l_data += ej * ej;
            dtheta[j] = 2.0 * ej / t_count * n.theta_scale[j];
        }
        let dv = 2.0 * ec / t_count * n.c_scale;
        let dh = backward_heads(model, &hc, dv, Some(&dtheta), &mut grads);
        axpy(&mut delta_h[t], &dh);

        // physics term: backprop through the symmetric FD probe pairs
        let h_prev: &[f64] = if t == 0 { &zeros } else { &caches[t - 1].h };
        for i in 0..p {
            let mut xp = xs[t].clone();
            xp[i] += fd;
            let gp = model.gru_step(&xp, h_prev);
            let hp = model.heads(&gp.h, c_norm);
            let mut xm = xs[t].clone();
            xm[i] -= fd;
            let gm = model.gru_step(&xm, h_prev);
            let hm = model.heads(&gm.h, c_norm);
            let coeff = n.c_scale / (2.0 * fd * n.theta_scale[i]);
            let fd_grad = coeff * (hp.v - hm.v);
            let e = fd_grad - rec.g_zne[i];
            l_phys += e * e;
            let dv_mag = beta * 2.0 * e / t_count * coeff;
            for (sign, gc, hcp) in [(1.0, &gp, &hp), (-1.0, &gm, &hm)] {
                let dh = backward_heads(model, hcp, sign * dv_mag, None, &mut grads);
                let dhp = backward_gru(model, gc, &dh, &mut grads);
                if t > 0 {
                    axpy(&mut delta_h[t - 1], &dhp);
                }
            }
        }
    }
    // shared backpropagation through time over the base sequence
    for s in (0..dataset.len()).rev() {
        let dh = std::mem::take(&mut delta_h[s]);
        let dhp = backward_gru(model, &caches[s], &dh, &mut grads);
        if s > 0 {
            axpy(&mut delta_h[s - 1], &dhp);
        }
    }
    l_data /= t_count;
    l_phys /= t_count;
    let breakdown = LossBreakdown { total: l_data + beta * l_phys, data: l_data, phys: l_phys };
    (grads.v, breakdown)
}

/// Loss and its analytic full-batch weight gradient, preparing the model
/// (normalization fit-and-freeze, probe step width) exactly as `train` would
/// before its first epoch. Useful for optimizer-level diagnostics and for
/// cross-checking the gradient against finite differences.
pub fn loss_gradient(
    model: &mut SurrogateModel,
    dataset: &[TrajectoryRecord],
    cfg: &TrainConfig,
) -> Result<(Vec<f64>, LossBreakdown)> {
    if !model.norm_frozen {
        model.norm = Normalization::fit(dataset)?;
        model.norm_frozen = true;
    }
    model.fd_step = cfg.fd_step;
    let xs = normalized_inputs(model, dataset)?;
    Ok(epoch_gradient(model, &xs, dataset, cfg.beta))
}

pub(crate) fn loss_only(
    model: &SurrogateModel,
    dataset: &[TrajectoryRecord],
    beta: f64,
) -> Result<LossBreakdown> {
    let xs = normalized_inputs(model, dataset)?;
    Ok(epoch_gradient(model, &xs, dataset, beta).1)
}

/// Full-batch Adam on the composite loss. Fits (and then freezes)
/// normalization constants from the dataset on first call; with zero
/// epochs the model is returned untouched.
pub fn train(
    model: &mut SurrogateModel,
    dataset: &[TrajectoryRecord],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if cfg.epochs == 0 {
        let final_loss = loss_only(model, dataset, cfg.beta)?;
        return Ok(TrainOutcome { loss_curve: Vec::new(), final_loss });
    }
    if !model.norm_frozen {
        model.norm = Normalization::fit(dataset)?;
        model.norm_frozen = true;
    }
    model.fd_step = cfg.fd_step;
    let xs = normalized_inputs(model, dataset)?;
    let nw = model.n_weights();
    let mut m = vec![0.0; nw];
    let mut v = vec![0.0; nw];
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let (g, loss) = epoch_gradient(model, &xs, dataset, cfg.beta);
        if !loss.total.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss at epoch {epoch}")));
        }
        curve.push(loss.total);
        let b1t = 1.0 - cfg.adam_beta1.powi(epoch as i32);
        let b2t = 1.0 - cfg.adam_beta2.powi(epoch as i32);
        let w = model.weights_mut();
        for i in 0..nw {
            m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
            v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
            let mh = m[i] / b1t;
            let vh = v[i] / b2t;
            w[i] -= cfg.lr * mh / (vh.sqrt() + cfg.adam_eps);
        }
    }
    let final_loss = loss_only(model, dataset, cfg.beta)?;
    Ok(TrainOutcome { loss_curve: curve, final_loss })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::{loss, SurrogateModel};

    fn tiny_model(seed: u64) -> (SurrogateModel, TrainConfig) {
        let cfg = TrainConfig {
            gru_hidden: 4,
            scalar_width: 4,
            fusion_width: 4,
            seed,
            beta: 0.7,
            ..TrainConfig::default()
        };
        (SurrogateModel::new(3, &cfg).unwrap(), cfg)
    }

    fn toy_dataset() -> Vec<TrajectoryRecord> {
        // small synthetic trajectory, smooth and in a bounded range
        let mut recs = Vec::new();
        let mut theta: Vec<f64> = vec![0.3, -0.2, 0.5];
        for step in 0..4 {
            let c_zne: f64 = theta.iter().map(|t| t.cos()).sum::<f64>() * -0.5;
            let c_noisy = 0.8 * c_zne + 0.05;
            let g: Vec<f64> = theta.iter().map(|t: &f64| 0.5 * t.sin()).collect();
            let next: Vec<f64> = theta.iter().zip(&g).map(|(t, gi)| t - 0.2 * gi).collect();
            recs.push(TrajectoryRecord {
                step,
                theta: theta.clone(),
                c_noisy,
                c_zne,
                g_zne: g,
                theta_next: next.clone(),
            });
            theta = next;
        }
        recs
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let (mut model, _cfg) = tiny_model(7);
        // fit normalization the same way train() would
        model.norm = Normalization::fit(&toy_dataset()).unwrap();
        model.norm_frozen = true;
        let dataset = toy_dataset();
        let beta = 0.7;
        let xs = normalized_inputs(&model, &dataset).unwrap();
        let (g, _) = epoch_gradient(&model, &xs, &dataset, beta);
        // h much below 1e-3 exposes roundoff noise that the gradient
        // penalty's 1/fd_step factor amplifies; truncation at this h is
        // well under the tolerance
        let h = 1e-3;
        let mut central = |i: usize, h: f64| {
            let orig = model.weights()[i];
            model.weights_mut()[i] = orig + h;
            let lp = loss(&model, &dataset, beta).unwrap().total;
            model.weights_mut()[i] = orig - h;
            let lm = loss(&model, &dataset, beta).unwrap().total;
            model.weights_mut()[i] = orig;
            (lp - lm) / (2.0 * h)
        };
        for i in 0..g.len() {
            let fd = central(i, h);
            let denom = fd.abs().max(g[i].abs()).max(1e-6);
            assert!(
                (g[i] - fd).abs() / denom < 1e-4,
                "weight {i}: analytic {} vs fd {fd}",
                g[i]
            );
        }
    }

    #[test]
    fn adam_first_step_moves_by_signed_learning_rate() {
        let (mut model, mut cfg) = tiny_model(11);
        cfg.epochs = 1;
        let dataset = toy_dataset();
        let before = model.weights().to_vec();
        // grads need frozen normalization to compare against
        let mut probe = model.clone();
        probe.norm = Normalization::fit(&dataset).unwrap();
        probe.norm_frozen = true;
        probe.fd_step = cfg.fd_step;
        let xs = normalized_inputs(&probe, &dataset).unwrap();
        let (g, _) = epoch_gradient(&probe, &xs, &dataset, cfg.beta);
        train(&mut model, &dataset, &cfg).unwrap();
        for i in 0..before.len() {
            let delta = model.weights()[i] - before[i];
            // bias correction makes step one exactly -lr g / (|g| + eps)
            let expected = -cfg.lr * g[i] / (g[i].abs() + cfg.adam_eps);
            assert!(
                (delta - expected).abs() < 1e-9,
                "weight {i}: delta {delta}, expected {expected}"
            );
        }
    }

    #[test]
    fn zero_epochs_leave_weights_untouched() {
        let (mut model, mut cfg) = tiny_model(3);
        cfg.epochs = 0;
        let snapshot = model.clone();
        let out = train(&mut model, &toy_dataset(), &cfg).unwrap();
        assert_eq!(model, snapshot);
        assert!(out.loss_curve.is_empty());
    }

    #[test]
    fn training_reduces_loss() {
        let (mut model, mut cfg) = tiny_model(5);
        cfg.epochs = 300;
        cfg.lr = 5e-3;
        let dataset = toy_dataset();
        let out = train(&mut model, &dataset, &cfg).unwrap();
        assert!(out.final_loss.total < out.loss_curve[0] * 0.2,
            "loss {} -> {}", out.loss_curve[0], out.final_loss.total);
        assert!(out.final_loss.total.is_finite());
    }

    #[test]
    fn training_is_deterministic() {
        let dataset = toy_dataset();
        let run = || {
            let (mut model, mut cfg) = tiny_model(9);
            cfg.epochs = 50;
            train(&mut model, &dataset, &cfg).unwrap();
            model
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }
}

