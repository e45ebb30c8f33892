//! One-hidden-layer tanh network with a linear output for water-level
//! regression.
//!
//! Targets are z-scored for training. The optimizer is full-batch gradient
//! descent with heavy-ball momentum on the mean squared error plus an L2
//! penalty on the weights (biases are not penalized). The step adapts: a
//! step that raises the objective is rejected, the velocity cleared and the
//! rate halved; an accepted step grows the rate by 5%. Early stopping keeps
//! the best-validation snapshot and counts only accepted steps towards
//! `patience` (with `patience = 0` the first non-improving epoch stops
//! training). All reductions run sequentially in row order, so training is
//! bitwise deterministic for a given seed and data set.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{schema_hash, StandardizationStats};

pub const DEFAULT_HIDDEN: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub grow: f64,
    pub shrink: f64,
    pub momentum: f64,
    /// L2 penalty on the weights (not biases), added to the scaled MSE.
    pub weight_decay: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN,
            learning_rate: 0.01,
            grow: 1.05,
            shrink: 0.5,
            momentum: 0.9,
            weight_decay: 3e-3,
            patience: 50,
            max_epochs: 5000,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FineTuneConfig {
    /// Multiplier on the training learning rate.
    pub lr_scale: f64,
    pub epochs: usize,
}

impl Default for FineTuneConfig {
    fn default() -> Self {
        Self { lr_scale: 0.1, epochs: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub epochs: usize,
    pub best_epoch: usize,
    pub learning_rate: f64,
    pub final_learning_rate: f64,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub fine_tune_epochs: usize,
}

/// Network weights plus the metadata needed to apply it.
///
/// Parameters are stored flat as `[W_h (hidden x input, row-major), b_h,
/// w_out, b_out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorModel {
    input_dim: usize,
    hidden: usize,
    params: Vec<f64>,
    input_columns: Vec<String>,
    pub target: TargetStats,
    pub feature_stats: Option<StandardizationStats>,
    pub metadata: TrainingMetadata,
}

fn param_count(input_dim: usize, hidden: usize) -> usize {
    hidden * input_dim + 2 * hidden + 1
}

/// Glorot-uniform weights, zero biases.
pub fn init_model(input_columns: &[String], hidden: usize, seed: u64) -> Result<RegressorModel> {
    let input_dim = input_columns.len();
    if input_dim < 1 || hidden < 1 {
        return Err(Error::invalid(format!("network needs input_dim >= 1 and hidden >= 1, got {input_dim} and {hidden}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = vec![0.0; param_count(input_dim, hidden)];
    let lim_h = (6.0 / (input_dim + hidden) as f64).sqrt();
    for w in params[..hidden * input_dim].iter_mut() {
        *w = rng.random_range(-lim_h..=lim_h);
    }
    let lim_o = (6.0 / (hidden + 1) as f64).sqrt();
    let off = hidden * input_dim + hidden;
    for w in params[off..off + hidden].iter_mut() {
        *w = rng.random_range(-lim_o..=lim_o);
    }
    Ok(RegressorModel {
        input_dim,
        hidden,
        params,
        input_columns: input_columns.to_vec(),
        target: TargetStats { mean: 0.0, std: 1.0 },
        feature_stats: None,
        metadata: TrainingMetadata { seed, ..Default::default() },
    })
}

impl RegressorModel {
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }
    pub fn hidden(&self) -> usize {
        self.hidden
    }
    pub fn params(&self) -> &[f64] {
        &self.params
    }
    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }
    pub fn input_columns(&self) -> &[String] {
        &self.input_columns
    }
    pub fn schema_hash(&self) -> String {
        schema_hash(&self.input_columns)
    }

    /// Refuses feature columns that differ from the training schema.
    pub fn check_schema(&self, columns: &[String]) -> Result<()> {
        if schema_hash(columns) != self.schema_hash() {
            return Err(Error::Schema(format!(
                "model expects {} columns [{}], got {} [{}]",
                self.input_dim,
                self.input_columns.join(","),
                columns.len(),
                columns.join(",")
            )));
        }
        Ok(())
    }

    /// Hidden weights, row-major `hidden x input_dim`.
    pub fn w_h(&self) -> &[f64] {
        &self.params[..self.hidden * self.input_dim]
    }
    pub fn b_h(&self) -> &[f64] {
        let o = self.hidden * self.input_dim;
        &self.params[o..o + self.hidden]
    }
    pub fn w_o(&self) -> &[f64] {
        let o = self.hidden * self.input_dim + self.hidden;
        &self.params[o..o + self.hidden]
    }
    pub fn b_o(&self) -> f64 {
        self.params[self.params.len() - 1]
    }

    fn check_row(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::invalid(format!("feature row has {} values, model expects {}", x.len(), self.input_dim)));
        }
        Ok(())
    }

    fn hidden_activations(&self, x: &[f64], out: &mut [f64]) {
        let (w, b) = (self.w_h(), self.b_h());
        for (j, h) in out.iter_mut().enumerate() {
            let row = &w[j * self.input_dim..(j + 1) * self.input_dim];
            let a: f64 = row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b[j];
            *h = a.tanh();
        }
    }

    /// Network output before target de-scaling.
    pub fn forward_scaled(&self, x: &[f64]) -> Result<f64> {
        self.check_row(x)?;
        let mut h = vec![0.0; self.hidden];
        self.hidden_activations(x, &mut h);
        Ok(self.w_o().iter().zip(&h).map(|(w, h)| w * h).sum::<f64>() + self.b_o())
    }

    /// Predicted water level, metres.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        Ok(self.forward_scaled(x)? * self.target.std + self.target.mean)
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        x.iter().map(|r| self.forward(r)).collect()
    }

    /// Mean squared error against scaled targets `z` and its gradient with
    /// respect to the flat parameter vector.
    pub fn loss_gradient(&self, x: &[Vec<f64>], z: &[f64]) -> Result<(f64, Vec<f64>)> {
        if x.len() != z.len() || x.is_empty() {
            return Err(Error::invalid(format!("{} feature rows for {} targets", x.len(), z.len())));
        }
        let (ni, nh) = (self.input_dim, self.hidden);
        let mut grad = vec![0.0; self.params.len()];
        let mut h = vec![0.0; nh];
        let mut loss = 0.0;
        let scale = 2.0 / x.len() as f64;
        let (o_bh, o_wo) = (nh * ni, nh * ni + nh);
        let last = grad.len() - 1;
        for (row, &target) in x.iter().zip(z) {
            self.check_row(row)?;
            self.hidden_activations(row, &mut h);
            let y: f64 = self.w_o().iter().zip(&h).map(|(w, h)| w * h).sum::<f64>() + self.b_o();
            let r = y - target;
            loss += r * r;
            let g = scale * r;
            grad[last] += g;
            for j in 0..nh {
                grad[o_wo + j] += g * h[j];
                let delta = g * self.w_o()[j] * (1.0 - h[j] * h[j]);
                grad[o_bh + j] += delta;
                for (gw, xi) in grad[j * ni..(j + 1) * ni].iter_mut().zip(row) {
                    *gw += delta * xi;
                }
            }
        }
        Ok((loss / x.len() as f64, grad))
    }

    fn loss_only(&self, x: &[Vec<f64>], z: &[f64]) -> Result<f64> {
        let mut loss = 0.0;
        for (row, &target) in x.iter().zip(z) {
            let r = self.forward_scaled(row)? - target;
            loss += r * r;
        }
        Ok(loss / x.len().max(1) as f64)
    }

    /// Training objective: scaled MSE plus the weight penalty.
    fn objective(&self, x: &[Vec<f64>], z: &[f64], decay: f64) -> Result<(f64, Vec<f64>)> {
        let (mut loss, mut grad) = self.loss_gradient(x, z)?;
        if decay > 0.0 {
            let n_w = self.hidden * self.input_dim;
            let o_wo = n_w + self.hidden;
            for j in (0..n_w).chain(o_wo..o_wo + self.hidden) {
                loss += decay * self.params[j] * self.params[j];
                grad[j] += 2.0 * decay * self.params[j];
            }
        }
        Ok((loss, grad))
    }

    /// Targets in the network's z-scored output units.
    pub fn scale_targets(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.target.mean) / self.target.std).collect()
    }
}

fn finite_or_abort(loss: f64, epoch: usize) -> Result<f64> {
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::Numerical(format!("training loss became {loss} at epoch {epoch}; check feature scaling and learning rate")))
    }
}

struct DescentState {
    lr: f64,
    velocity: Vec<f64>,
    loss: f64,
    grad: Vec<f64>,
}

/// One adaptive-step epoch. Returns whether the step was accepted.
fn descent_step(model: &mut RegressorModel, x: &[Vec<f64>], z: &[f64], st: &mut DescentState, cfg: &TrainConfig) -> Result<bool> {
    let old = model.params.clone();
    for ((p, v), g) in model.params.iter_mut().zip(st.velocity.iter_mut()).zip(&st.grad) {
        *v = cfg.momentum * *v - st.lr * g;
        *p += *v;
    }
    let (loss, grad) = model.objective(x, z, cfg.weight_decay)?;
    if loss.is_finite() && loss <= st.loss {
        st.loss = loss;
        st.grad = grad;
        st.lr *= cfg.grow;
        Ok(true)
    } else {
        model.params = old;
        st.velocity.iter_mut().for_each(|v| *v = 0.0);
        st.lr *= cfg.shrink;
        if !(st.lr > 0.0) {
            return Err(Error::Numerical("learning rate underflowed to zero".into()));
        }
        Ok(false)
    }
}

fn check_config(cfg: &TrainConfig) -> Result<()> {
    let ok = cfg.learning_rate > 0.0
        && cfg.grow >= 1.0
        && cfg.shrink > 0.0
        && cfg.shrink < 1.0
        && (0.0..1.0).contains(&cfg.momentum)
        && cfg.weight_decay >= 0.0
        && cfg.hidden >= 1;
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!("invalid trainer configuration {cfg:?}")))
    }
}

/// Trains from the model's current weights and returns the
/// best-validation snapshot. Without validation rows, the training loss
/// selects the snapshot.
pub fn train(
    mut model: RegressorModel,
    x_train: &[Vec<f64>],
    y_train: &[f64],
    x_val: &[Vec<f64>],
    y_val: &[f64],
    cfg: &TrainConfig,
) -> Result<RegressorModel> {
    check_config(cfg)?;
    if x_train.len() < 2 || x_train.len() != y_train.len() || x_val.len() != y_val.len() {
        return Err(Error::invalid(format!(
            "training needs >= 2 rows and matching targets (train {}/{}, val {}/{})",
            x_train.len(),
            y_train.len(),
            x_val.len(),
            y_val.len()
        )));
    }
    let n = y_train.len() as f64;
    let mean = y_train.iter().sum::<f64>() / n;
    let std = (y_train.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    model.target = TargetStats { mean, std: if std > 0.0 { std } else { 1.0 } };
    let z = model.scale_targets(y_train);
    let zv = model.scale_targets(y_val);

    let (loss, grad) = model.objective(x_train, &z, cfg.weight_decay)?;
    let mut st = DescentState { lr: cfg.learning_rate, velocity: vec![0.0; grad.len()], loss: finite_or_abort(loss, 0)?, grad };
    let val_loss = |m: &RegressorModel, train_loss: f64| -> Result<f64> {
        if x_val.is_empty() {
            Ok(train_loss)
        } else {
            m.loss_only(x_val, &zv)
        }
    };
    let mut best = (val_loss(&model, st.loss)?, model.params.clone(), 0usize);
    let (mut train_curve, mut val_curve) = (Vec::new(), Vec::new());
    let mut stale = 0usize;
    let mut epoch = 0usize;
    while epoch < cfg.max_epochs {
        epoch += 1;
        let accepted = descent_step(&mut model, x_train, &z, &mut st, cfg)?;
        finite_or_abort(st.loss, epoch)?;
        let v = finite_or_abort(val_loss(&model, st.loss)?, epoch)?;
        train_curve.push(st.loss);
        val_curve.push(v);
        if !accepted && cfg.patience > 0 {
            // Parameters did not move, so neither did the validation loss.
            continue;
        }
        if v < best.0 {
            best = (v, model.params.clone(), epoch);
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience.max(1) {
                break;
            }
        }
    }
    model.params = best.1;
    model.metadata = TrainingMetadata {
        seed: model.metadata.seed,
        epochs: epoch,
        best_epoch: best.2,
        learning_rate: cfg.learning_rate,
        final_learning_rate: st.lr,
        train_loss: train_curve,
        val_loss: val_curve,
        fine_tune_epochs: 0,
    };
    Ok(model)
}

/// Continues descent on adaptation rows at a reduced step for a fixed
/// number of epochs. The step never grows above its reduced starting value
/// (it may still shrink on rejected steps). Architecture and target scaling
/// are unchanged.
pub fn fine_tune(
    mut model: RegressorModel,
    columns: &[String],
    x: &[Vec<f64>],
    y: &[f64],
    train_cfg: &TrainConfig,
    cfg: &FineTuneConfig,
) -> Result<RegressorModel> {
    model.check_schema(columns)?;
    if x.len() < 10 || x.len() != y.len() {
        return Err(Error::invalid(format!("fine-tuning needs >= 10 rows with targets, got {}/{}", x.len(), y.len())));
    }
    if cfg.epochs == 0 {
        return Ok(model);
    }
    let tcfg = TrainConfig { learning_rate: train_cfg.learning_rate * cfg.lr_scale, grow: 1.0, ..*train_cfg };
    check_config(&tcfg)?;
    let z = model.scale_targets(y);
    let (loss, grad) = model.objective(x, &z, tcfg.weight_decay)?;
    let mut st = DescentState { lr: tcfg.learning_rate, velocity: vec![0.0; grad.len()], loss: finite_or_abort(loss, 0)?, grad };
    for epoch in 1..=cfg.epochs {
        descent_step(&mut model, x, &z, &mut st, &tcfg)?;
        finite_or_abort(st.loss, epoch)?;
    }
    model.metadata.fine_tune_epochs += cfg.epochs;
    Ok(model)
}

// ---------------------------------------------------------------------------
// Evaluation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub name: String,
    pub rmse_cm: f64,
    pub mae_cm: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rmse_cm: f64,
    pub mae_cm: f64,
    pub n_samples: usize,
    pub segments: Vec<SegmentReport>,
}

fn errors_cm(y_hat: &[f64], y_true: &[f64]) -> (f64, f64, usize) {
    let errs: Vec<f64> = y_hat
        .iter()
        .zip(y_true)
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .map(|(a, b)| 100.0 * (a - b))
        .collect();
    let n = errs.len();
    let nf = n.max(1) as f64;
    let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / nf).sqrt();
    let mae = errs.iter().map(|e| e.abs()).sum::<f64>() / nf;
    // Guard the Cauchy-Schwarz ordering against last-ulp rounding.
    (rmse.max(mae), mae, n)
}

/// RMSE and MAE in centimetres over finite pairs; predictions and truth in
/// metres.
pub fn evaluate(y_hat: &[f64], y_true: &[f64]) -> Result<EvalReport> {
    evaluate_segments(y_hat, y_true, &[])
}

/// As [`evaluate`], with an extra breakdown over named index ranges.
pub fn evaluate_segments(y_hat: &[f64], y_true: &[f64], segments: &[(String, std::ops::Range<usize>)]) -> Result<EvalReport> {
    if y_hat.len() != y_true.len() {
        return Err(Error::invalid(format!("{} predictions for {} targets", y_hat.len(), y_true.len())));
    }
    let (rmse_cm, mae_cm, n_samples) = errors_cm(y_hat, y_true);
    if n_samples == 0 {
        return Err(Error::invalid("no finite prediction/target pairs to evaluate"));
    }
    let segments = segments
        .iter()
        .filter(|(_, r)| r.end <= y_hat.len())
        .map(|(name, r)| {
            let (rmse_cm, mae_cm, n_samples) = errors_cm(&y_hat[r.clone()], &y_true[r.clone()]);
            SegmentReport { name: name.clone(), rmse_cm, mae_cm, n_samples }
        })
        .collect();
    Ok(EvalReport { rmse_cm, mae_cm, n_samples, segments })
}

// ---------------------------------------------------------------------------
// Persistence

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    schema_hash: String,
    input_columns: Vec<String>,
    weights: Weights,
    biases: Biases,
    target_stats: TargetStats,
    feature_stats: Option<StandardizationStats>,
    metadata: TrainingMetadata,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Weights {
    hidden: Vec<Vec<f64>>,
    output: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Biases {
    hidden: Vec<f64>,
    output: f64,
}

impl RegressorModel {
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            schema_hash: self.schema_hash(),
            input_columns: self.input_columns.clone(),
            weights: Weights {
                hidden: self.w_h().chunks(self.input_dim).map(<[f64]>::to_vec).collect(),
                output: self.w_o().to_vec(),
            },
            biases: Biases { hidden: self.b_h().to_vec(), output: self.b_o() },
            target_stats: self.target,
            feature_stats: self.feature_stats.clone(),
            metadata: self.metadata.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text)?;
        let input_dim = f.input_columns.len();
        let hidden = f.weights.output.len();
        let hash = schema_hash(&f.input_columns);
        if hash != f.schema_hash {
            return Err(Error::Schema(format!("model schema hash {} does not match its columns ({hash})", f.schema_hash)));
        }
        let dims_ok = input_dim >= 1
            && hidden >= 1
            && f.weights.hidden.len() == hidden
            && f.weights.hidden.iter().all(|r| r.len() == input_dim)
            && f.biases.hidden.len() == hidden;
        if !dims_ok {
            return Err(Error::Schema("model weight dimensions are inconsistent".into()));
        }
        let mut params: Vec<f64> = f.weights.hidden.into_iter().flatten().collect();
        params.extend(f.biases.hidden);
        params.extend(f.weights.output);
        params.push(f.biases.output);
        if params.iter().any(|p| !p.is_finite()) || !(f.target_stats.std > 0.0) {
            return Err(Error::Schema("model contains non-finite weights or target scale".into()));
        }
        if let Some(stats) = &f.feature_stats {
            if stats.columns != f.input_columns {
                return Err(Error::Schema("feature statistics do not match the model columns".into()));
            }
        }
        Ok(Self {
            input_dim,
            hidden,
            params,
            input_columns: f.input_columns,
            target: f.target_stats,
            feature_stats: f.feature_stats,
            metadata: f.metadata,
        })
    }
}

pub fn save_model(model: &RegressorModel, path: &Path) -> Result<()> {
    std::fs::write(path, model.to_json()? + "\n")?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<RegressorModel> {
    RegressorModel::from_json(&std::fs::read_to_string(path)?)
}
