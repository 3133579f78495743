//! Reference classifiers: one-vs-rest elastic-net logistic regression, a
//! two-layer feed-forward network, and a white-noise control.
//!
//! All three consume the flattened T×P sequence input (row-major, oldest
//! lag first — 320 entries at the default T=10, P=32).

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Label, SequenceSample};
use crate::eval::confusion;
use crate::math::{dot, relu, sigmoid, softmax_inplace, Mat};
use crate::rnn::{decide, DenseLayer, EpochStats, RnnModel, TrainHistory};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

// ---------------------------------------------------------------------------
// One-vs-rest elastic-net logistic regression
// ---------------------------------------------------------------------------

/// Elastic-net penalty λ_en·(α‖w‖₁ + (1−α)‖w‖²/2) and proximal-SGD knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub alpha: f64,
    pub lambda_en: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub lr_decay: f64,
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig {
            alpha: 0.5,
            lambda_en: 1e-3,
            epochs: 200,
            batch_size: 100,
            lr0: 0.05,
            lr_decay: 0.999,
            seed: 0,
        }
    }
}

/// Three binary classifiers over the flattened input, in class order
/// (down, stationary, up). Intercepts are unpenalized.
#[derive(Debug, Clone, PartialEq)]
pub struct OvrLogistic {
    pub n_inputs: usize,
    pub t_steps: usize,
    pub weights: [Vec<f64>; 3],
    pub intercepts: [f64; 3],
    pub alpha: f64,
    pub lambda_en: f64,
}

impl OvrLogistic {
    /// Per-class sigmoid scores (not normalized across classes).
    pub fn predict_proba(&self, x: &Mat) -> [f64; 3] {
        let flat = &x.data;
        let mut out = [0.0; 3];
        for k in 0..3 {
            out[k] = sigmoid(dot(&self.weights[k], flat) + self.intercepts[k]);
        }
        out
    }

    /// Hard OvR decision at threshold 0.5 per class: conflicts resolve to
    /// the highest score, no positive resolves to Stationary.
    pub fn predict(&self, x: &Mat) -> Label {
        decide(&self.predict_proba(x), Some(&[0.5, 0.5, 0.5]))
    }
}

/// Gradient of the smooth part of the objective — mean logistic loss plus
/// the quadratic elastic-net term — at (w, b) over the given batch.
fn smooth_grad(
    w: &[f64],
    b: f64,
    xs: &[&[f64]],
    ys: &[f64],
    l2_part: f64,
) -> (Vec<f64>, f64) {
    let inv_n = 1.0 / xs.len() as f64;
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        let err = (sigmoid(dot(w, x) + b) - y) * inv_n;
        for (g, xv) in gw.iter_mut().zip(x.iter()) {
            *g += err * xv;
        }
        gb += err;
    }
    for (g, wv) in gw.iter_mut().zip(w.iter()) {
        *g += l2_part * wv;
    }
    (gw, gb)
}

fn smooth_loss(w: &[f64], b: f64, xs: &[&[f64]], ys: &[f64], l2_part: f64) -> f64 {
    let inv_n = 1.0 / xs.len() as f64;
    let mut total = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        let p = sigmoid(dot(w, x) + b).clamp(1e-12, 1.0 - 1e-12);
        total -= inv_n * (y * p.ln() + (1.0 - y) * (1.0 - p).ln());
    }
    total + 0.5 * l2_part * dot(w, w)
}

/// Fit one binary classifier by proximal SGD: a gradient step on the smooth
/// part followed by soft-thresholding for the L1 part.
pub fn fit_binary(
    xs: &[&[f64]],
    ys: &[f64],
    config: &LogisticConfig,
    seed: u64,
) -> Result<(Vec<f64>, f64), BaselineError> {
    assert_eq!(xs.len(), ys.len());
    let n_inputs = xs[0].len();
    let mut w = vec![0.0; n_inputs];
    let mut b = 0.0;
    let l1 = config.lambda_en * config.alpha;
    let l2_part = config.lambda_en * (1.0 - config.alpha);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    for epoch in 0..config.epochs {
        let lr = config.lr0 * config.lr_decay.powi(epoch as i32);
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let bx: Vec<&[f64]> = chunk.iter().map(|&i| xs[i]).collect();
            let by: Vec<f64> = chunk.iter().map(|&i| ys[i]).collect();
            let (gw, gb) = smooth_grad(&w, b, &bx, &by, l2_part);
            for (wv, g) in w.iter_mut().zip(gw.iter()) {
                let stepped = *wv - lr * g;
                // Soft threshold: shrink toward zero by lr·λ_en·α.
                *wv = stepped.signum() * (stepped.abs() - lr * l1).max(0.0);
            }
            b -= lr * gb;
            if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
                return Err(BaselineError::Diverged { epoch });
            }
        }
    }
    Ok((w, b))
}

/// Train the three one-vs-rest binary models. Each class uses an
/// independent seed stream (`seed + class index`), so the fits may run in
/// any order with identical results.
pub fn train_ovr_logistic(
    train: &[SequenceSample],
    config: &LogisticConfig,
) -> Result<OvrLogistic, BaselineError> {
    assert!(!train.is_empty());
    let t_steps = train[0].x.rows;
    let n_inputs = train[0].x.data.len();
    let xs: Vec<&[f64]> = train.iter().map(|s| s.x.data.as_slice()).collect();
    let mut weights: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut intercepts = [0.0; 3];
    for k in 0..3 {
        let ys: Vec<f64> = train
            .iter()
            .map(|s| if s.y.index() == k { 1.0 } else { 0.0 })
            .collect();
        let (w, b) = fit_binary(&xs, &ys, config, config.seed + k as u64)?;
        weights[k] = w;
        intercepts[k] = b;
    }
    Ok(OvrLogistic {
        n_inputs,
        t_steps,
        weights,
        intercepts,
        alpha: config.alpha,
        lambda_en: config.lambda_en,
    })
}

/// Mean validation logistic loss summed over the three binary problems —
/// the criterion for the λ_en grid search.
pub fn ovr_validation_loss(model: &OvrLogistic, val: &[SequenceSample]) -> f64 {
    let mut total = 0.0;
    for k in 0..3 {
        let xs: Vec<&[f64]> = val.iter().map(|s| s.x.data.as_slice()).collect();
        let ys: Vec<f64> = val
            .iter()
            .map(|s| if s.y.index() == k { 1.0 } else { 0.0 })
            .collect();
        total += smooth_loss(&model.weights[k], model.intercepts[k], &xs, &ys, 0.0);
    }
    total
}

/// Grid-search λ_en on validation loss; returns the winning model and λ.
pub fn select_lambda(
    train: &[SequenceSample],
    val: &[SequenceSample],
    grid: &[f64],
    config: &LogisticConfig,
) -> Result<(OvrLogistic, f64), BaselineError> {
    assert!(!grid.is_empty());
    let mut best: Option<(f64, OvrLogistic, f64)> = None;
    for &lambda_en in grid {
        let cfg = LogisticConfig { lambda_en, ..config.clone() };
        let model = train_ovr_logistic(train, &cfg)?;
        let vl = ovr_validation_loss(&model, val);
        if best.as_ref().map_or(true, |(b, _, _)| vl < *b) {
            best = Some((vl, model, lambda_en));
        }
    }
    let (_, model, lambda) = best.expect("nonempty grid");
    Ok((model, lambda))
}

// ---------------------------------------------------------------------------
// Feed-forward network
// ---------------------------------------------------------------------------

/// Feed-forward architecture and SGD knobs. Defaults follow the reference
/// comparison: hidden layers of 200 and 100 ReLU units over the flattened
/// 320-entry input, initial learning rate 0.01, λ = 0.1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FfwdConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    pub lr_decay: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for FfwdConfig {
    fn default() -> Self {
        FfwdConfig {
            hidden: vec![200, 100],
            epochs: 1000,
            batch_size: 500,
            lr0: 0.01,
            lr_decay: 0.995,
            l2: 0.1,
            seed: 0,
        }
    }
}

/// Multi-layer perceptron with ReLU hidden layers and a softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct FfwdNet {
    pub n_inputs: usize,
    pub t_steps: usize,
    pub layers: Vec<DenseLayer>,
}

impl FfwdNet {
    pub fn glorot_init(n_inputs: usize, hidden: &[usize], n_classes: usize, seed: u64) -> FfwdNet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![n_inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(n_classes);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let mut m = Mat::zeros(fan_out, fan_in);
                for v in &mut m.data {
                    *v = rng.random_range(-limit..limit);
                }
                DenseLayer { w: m, b: vec![0.0; fan_out] }
            })
            .collect();
        FfwdNet { n_inputs, t_steps: 1, layers }
    }

    /// View an Elman model as the equivalent single-hidden-layer network.
    /// At T = 1 the recurrent term never fires (h_0 = 0), so predictions
    /// coincide exactly.
    pub fn from_rnn(model: &RnnModel) -> FfwdNet {
        FfwdNet {
            n_inputs: model.dims.p,
            t_steps: 1,
            layers: vec![
                DenseLayer { w: model.w_h.clone(), b: model.b_h.clone() },
                DenseLayer { w: model.w_y.clone(), b: model.b_y.clone() },
            ],
        }
    }

    /// Activations per layer (input first); the last entry is the softmax.
    fn activations(&self, flat: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![flat.to_vec()];
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.b.clone();
            layer.w.matvec_add(acts.last().expect("nonempty"), &mut z);
            if i + 1 < self.layers.len() {
                for v in &mut z {
                    *v = relu(*v);
                }
            } else {
                softmax_inplace(&mut z);
            }
            acts.push(z);
        }
        acts
    }

    pub fn predict_proba(&self, x: &Mat) -> [f64; 3] {
        let acts = self.activations(&x.data);
        let probs = acts.last().expect("nonempty");
        [probs[0], probs[1], probs[2]]
    }

    pub fn predict(&self, x: &Mat) -> Label {
        decide(&self.predict_proba(x), None)
    }

    fn penalty(&self) -> f64 {
        0.5 * self.layers.iter().map(|l| l.w.norm_sq()).sum::<f64>()
    }
}

/// Mean cross-entropy of a set under the network, plus the L2 penalty.
pub fn ffwd_mean_loss(net: &FfwdNet, samples: &[SequenceSample], lambda: f64) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    let mut total = 0.0;
    for s in samples {
        let p = net.predict_proba(&s.x);
        total -= p[s.y.index()].max(1e-12).ln();
    }
    total / samples.len() as f64 + lambda * net.penalty()
}

/// Same SGD/loss machinery as the recurrent trainer with the recurrence
/// absent: seeded per-epoch shuffle, exponential learning-rate decay, and
/// best-validation-loss model selection.
pub fn train_ffwd(
    train: &[SequenceSample],
    val: &[SequenceSample],
    config: &FfwdConfig,
) -> Result<(FfwdNet, TrainHistory), BaselineError> {
    if train.is_empty() {
        return Err(BaselineError::Dimension("empty training set".into()));
    }
    let n_inputs = train[0].x.data.len();
    for s in train.iter().chain(val) {
        if s.x.data.len() != n_inputs {
            return Err(BaselineError::Dimension("ragged sample shapes".into()));
        }
    }
    let mut net = FfwdNet::glorot_init(n_inputs, &config.hidden, 3, config.seed);
    net.t_steps = train[0].x.rows;
    let mut history = TrainHistory::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(f64, FfwdNet)> = None;
    for epoch in 0..config.epochs {
        let lr = config.lr0 * config.lr_decay.powi(epoch as i32);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let (loss, grads) = ffwd_batch_grads(&net, chunk, train, config.l2);
            if !loss.is_finite() {
                return Err(BaselineError::Diverged { epoch });
            }
            epoch_loss += loss * chunk.len() as f64;
            for (layer, (gw, gb)) in net.layers.iter_mut().zip(grads.into_iter()) {
                layer.w.add_scaled(-lr, &gw);
                for (b, g) in layer.b.iter_mut().zip(gb.iter()) {
                    *b -= lr * g;
                }
            }
        }
        let train_loss = epoch_loss / train.len() as f64;
        let val_loss = ffwd_mean_loss(&net, val, config.l2);
        let f1 = if val.is_empty() {
            [0.0; 3]
        } else {
            let preds: Vec<Label> = val.iter().map(|s| net.predict(&s.x)).collect();
            let labels: Vec<Label> = val.iter().map(|s| s.y).collect();
            let summary = confusion(&preds, &labels);
            [
                summary.per_class[0].f1,
                summary.per_class[1].f1,
                summary.per_class[2].f1,
            ]
        };
        history.epochs.push(EpochStats { epoch, train_loss, val_loss, f1, lr });
        let tracked = if val_loss.is_nan() { train_loss } else { val_loss };
        if best.as_ref().map_or(true, |(b, _)| tracked < *b) {
            best = Some((tracked, net.clone()));
        }
    }
    Ok((best.map(|(_, n)| n).unwrap_or(net), history))
}

type LayerGrads = Vec<(Mat, Vec<f64>)>;

fn ffwd_batch_grads(
    net: &FfwdNet,
    chunk: &[usize],
    train: &[SequenceSample],
    lambda: f64,
) -> (f64, LayerGrads) {
    let inv_n = 1.0 / chunk.len() as f64;
    let mut grads: LayerGrads = net
        .layers
        .iter()
        .map(|l| (Mat::zeros(l.w.rows, l.w.cols), vec![0.0; l.b.len()]))
        .collect();
    let mut mean_loss = 0.0;
    for &i in chunk {
        let s = &train[i];
        let acts = net.activations(&s.x.data);
        let probs = acts.last().expect("nonempty");
        mean_loss -= inv_n * probs[s.y.index()].max(1e-12).ln();
        // Softmax + CE head.
        let mut delta: Vec<f64> = probs.clone();
        delta[s.y.index()] -= 1.0;
        for d in &mut delta {
            *d *= inv_n;
        }
        for li in (0..net.layers.len()).rev() {
            let input = &acts[li];
            grads[li].0.add_outer(1.0, &delta, input);
            for (g, d) in grads[li].1.iter_mut().zip(delta.iter()) {
                *g += d;
            }
            if li == 0 {
                break;
            }
            let mut back = vec![0.0; input.len()];
            net.layers[li].w.matvec_t_add(&delta, &mut back);
            // ReLU subgradient via the stored activation (0 at exactly 0).
            for (b, a) in back.iter_mut().zip(input.iter()) {
                if *a <= 0.0 {
                    *b = 0.0;
                }
            }
            delta = back;
        }
    }
    for (layer, (gw, _)) in net.layers.iter().zip(grads.iter_mut()) {
        gw.add_scaled(lambda, &layer.w);
    }
    (mean_loss + lambda * net.penalty(), grads)
}

// ---------------------------------------------------------------------------
// White-noise control
// ---------------------------------------------------------------------------

/// Label-free control: probabilities drawn uniformly on the simplex
/// (symmetric Dirichlet via normalized exponentials), prediction = argmax,
/// so each class is predicted with probability exactly 1/3.
pub fn white_noise_predict(seed: u64, n: usize) -> Vec<(Label, [f64; 3])> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let mut e = [0.0; 3];
            for v in &mut e {
                *v = -(1.0 - rng.random::<f64>()).ln();
            }
            let sum: f64 = e.iter().sum();
            let probs = [e[0] / sum, e[1] / sum, e[2] / sum];
            let argmax = (0..3)
                .max_by(|&a, &b| probs[a].partial_cmp(&probs[b]).expect("finite"))
                .expect("nonempty");
            (Label::from_index(argmax).expect("in range"), probs)
        })
        .collect()
}
