//! Per-vertex dimensional-error regressor.
//!
//! A fully connected 10→128→128→64→1 network with ReLU on every layer,
//! including the output, so predictions are never negative. Inputs are
//! z-scored with statistics taken from the training split and stored with
//! the weights. Training is Adam on mean squared error and runs on a single
//! thread so a seed fully determines the result.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{features_for, FeatureError, FeatureRow, FEATURE_NAMES};
use crate::mesh::TriangleMesh;
use crate::par;
use crate::util::{mean_std, pearson};

pub const MODEL_VERSION: u32 = 1;
pub const LAYER_SIZES: [usize; 5] = [10, 128, 128, 64, 1];
pub const INITIAL_BIAS: f64 = 0.1;
pub const DEFAULT_REPEATS: usize = 30;
const PREDICT_CHUNK: usize = 1024;
const OUTPUT_INIT_SCALE: f64 = 0.01;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("split ratio must lie in (0, 1), got {0}")]
    InvalidSplit(f64),
    #[error("split leaves the {0} set empty")]
    EmptySplit(&'static str),
    #[error("invalid training setting: {0}")]
    InvalidConfig(String),
    #[error("sample {index}: {message}")]
    InvalidSample { index: usize, message: String },
    #[error("non-finite loss at epoch {epoch} (batch {batch})")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("row {0} has non-finite features")]
    NonFiniteInput(usize),
    #[error("vertex subset is empty")]
    EmptySubset,
    #[error("model file: {0}")]
    Model(String),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
}

/// One feature row with its measured absolute error (mm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub features: FeatureRow,
    pub target: f64,
}

impl TrainingSample {
    pub fn new(features: FeatureRow, target: f64) -> Self {
        TrainingSample { features, target }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `outputs × inputs`, row-major.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: [f64; 10],
    pub std: [f64; 10],
}

impl Normalization {
    /// Z-score statistics; a constant column gets std 1 and a warning.
    pub fn fit(rows: &[FeatureRow]) -> Self {
        let mut mean = [0.0; 10];
        let mut std = [1.0; 10];
        for f in 0..10 {
            let col: Vec<f64> = rows.iter().map(|r| r.to_array()[f]).collect();
            let (m, s) = mean_std(&col);
            mean[f] = m;
            if s > 0.0 {
                std[f] = s;
            } else {
                log::warn!("feature {} is constant over the training set; using std 1", FEATURE_NAMES[f]);
            }
        }
        Normalization { mean, std }
    }

    pub fn apply(&self, row: &FeatureRow) -> [f64; 10] {
        let mut a = row.to_array();
        for f in 0..10 {
            a[f] = (a[f] - self.mean[f]) / self.std[f];
        }
        a
    }

    pub fn invert(&self, z: &[f64; 10]) -> FeatureRow {
        let mut a = *z;
        for f in 0..10 {
            a[f] = a[f] * self.std[f] + self.mean[f];
        }
        FeatureRow::from_array(a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Fraction of samples used for training; the rest validates.
    pub split: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { epochs: 50, batch_size: 256, learning_rate: 1e-3, split: 0.8, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_mse: f64,
    pub validation_mse: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Weights from the epoch with the lowest validation MSE.
    pub net: ErrorNet,
    pub history: Vec<EpochLoss>,
    pub best_epoch: usize,
}

/// Trained network plus its input normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorNet {
    pub version: u32,
    pub layer_sizes: Vec<usize>,
    pub layers: Vec<Layer>,
    pub normalization: Normalization,
    pub seed: u64,
    pub epochs: usize,
    pub optimizer: String,
}

/// Gradients in the same shape as the parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

impl Gradients {
    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }
}

struct Params {
    weights: Vec<DMatrix<f64>>,
    biases: Vec<DVector<f64>>,
}

impl Params {
    fn he_uniform(rng: &mut ChaCha8Rng) -> Self {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..LAYER_SIZES.len() - 1 {
            let (fan_in, fan_out) = (LAYER_SIZES[l], LAYER_SIZES[l + 1]);
            let limit = (6.0 / fan_in as f64).sqrt();
            // output weights start small so the rectified output is not
            // pushed below zero for part of the data before training starts
            let limit = if l + 2 == LAYER_SIZES.len() { OUTPUT_INIT_SCALE * limit } else { limit };
            let low = -limit;
            // fill row by row so the draw order does not depend on storage layout
            let mut w = DMatrix::zeros(fan_out, fan_in);
            for r in 0..fan_out {
                for c in 0..fan_in {
                    w[(r, c)] = rng.random_range(low..limit);
                }
            }
            weights.push(w);
            biases.push(DVector::from_element(fan_out, INITIAL_BIAS));
        }
        Params { weights, biases }
    }

    fn from_layers(layers: &[Layer]) -> Self {
        let weights = layers
            .iter()
            .map(|l| DMatrix::from_fn(l.weights.len(), l.weights[0].len(), |r, c| l.weights[r][c]))
            .collect();
        let biases = layers.iter().map(|l| DVector::from_vec(l.biases.clone())).collect();
        Params { weights, biases }
    }

    fn to_layers(&self) -> Vec<Layer> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| Layer {
                weights: (0..w.nrows()).map(|r| w.row(r).iter().copied().collect()).collect(),
                biases: b.iter().copied().collect(),
            })
            .collect()
    }

    /// Forward pass on a `10 × batch` input; returns every post-activation
    /// matrix (input first).
    fn forward(&self, x: DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut acts = vec![x];
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let mut z = w * acts.last().unwrap();
            for mut col in z.column_iter_mut() {
                col += b;
            }
            z.apply(|v| *v = v.max(0.0));
            acts.push(z);
        }
        acts
    }

    /// MSE and its gradient on one batch.
    fn loss_and_gradient(&self, x: DMatrix<f64>, y: &[f64]) -> (f64, Gradients) {
        let n = y.len() as f64;
        let acts = self.forward(x);
        let out = acts.last().unwrap();
        let mut loss = 0.0;
        let mut delta = DMatrix::zeros(1, y.len());
        for (i, &t) in y.iter().enumerate() {
            let e = out[(0, i)] - t;
            loss += e * e;
            delta[(0, i)] = 2.0 * e / n;
        }
        loss /= n;
        let layers = self.weights.len();
        let mut gw = vec![DMatrix::zeros(0, 0); layers];
        let mut gb = vec![DVector::zeros(0); layers];
        for l in (0..layers).rev() {
            // ReLU derivative, zero at the kink
            delta.zip_apply(&acts[l + 1], |d, a| {
                if a <= 0.0 {
                    *d = 0.0
                }
            });
            gw[l] = &delta * acts[l].transpose();
            gb[l] = delta.column_sum();
            if l > 0 {
                delta = self.weights[l].transpose() * &delta;
            }
        }
        (loss, Gradients { weights: gw, biases: gb })
    }

    fn mse(&self, x: &DMatrix<f64>, y: &[f64]) -> f64 {
        if y.is_empty() {
            return 0.0;
        }
        let out = self.forward(x.clone()).pop().unwrap();
        y.iter().enumerate().map(|(i, t)| (out[(0, i)] - t).powi(2)).sum::<f64>() / y.len() as f64
    }
}

struct Adam {
    lr: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(lr: f64, n: usize) -> Self {
        Adam { lr, t: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    fn step(&mut self, params: &mut Params, grads: &Gradients) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let mut k = 0;
        let mut update = |p: &mut f64, g: f64| {
            self.m[k] = Self::BETA1 * self.m[k] + (1.0 - Self::BETA1) * g;
            self.v[k] = Self::BETA2 * self.v[k] + (1.0 - Self::BETA2) * g * g;
            *p -= self.lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + Self::EPS);
            k += 1;
        };
        for l in 0..params.weights.len() {
            for (p, g) in params.weights[l].iter_mut().zip(grads.weights[l].iter()) {
                update(p, *g);
            }
            for (p, g) in params.biases[l].iter_mut().zip(grads.biases[l].iter()) {
                update(p, *g);
            }
        }
    }
}

fn input_matrix(norm: &Normalization, rows: &[FeatureRow]) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(10, rows.len());
    for (c, r) in rows.iter().enumerate() {
        let z = norm.apply(r);
        for f in 0..10 {
            x[(f, c)] = z[f];
        }
    }
    x
}

fn validate_samples(samples: &[TrainingSample]) -> Result<(), NetError> {
    for (index, s) in samples.iter().enumerate() {
        if !s.features.is_finite() {
            return Err(NetError::InvalidSample { index, message: "non-finite features".into() });
        }
        if !(s.target >= 0.0 && s.target.is_finite()) {
            return Err(NetError::InvalidSample { index, message: format!("target must be finite and >= 0, got {}", s.target) });
        }
    }
    Ok(())
}

/// Deterministic seeded split into (training, validation) indices.
pub fn split_indices(n: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), NetError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(NetError::InvalidSplit(ratio));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (n as f64 * ratio).round() as usize;
    if n_train == 0 {
        return Err(NetError::EmptySplit("training"));
    }
    if n_train == n {
        return Err(NetError::EmptySplit("validation"));
    }
    let val = idx.split_off(n_train);
    Ok((idx, val))
}

/// Trains a fresh network and returns the best-validation checkpoint with
/// per-epoch losses.
pub fn train(samples: &[TrainingSample], config: &TrainConfig) -> Result<TrainOutcome, NetError> {
    if samples.len() < 2 {
        return Err(NetError::TooFewSamples { needed: 2, got: samples.len() });
    }
    if config.epochs == 0 || config.batch_size == 0 || !(config.learning_rate > 0.0) {
        return Err(NetError::InvalidConfig(format!(
            "epochs {}, batch size {}, learning rate {}",
            config.epochs, config.batch_size, config.learning_rate
        )));
    }
    validate_samples(samples)?;
    let (train_idx, val_idx) = split_indices(samples.len(), config.split, config.seed)?;
    let train_rows: Vec<FeatureRow> = train_idx.iter().map(|&i| samples[i].features).collect();
    let train_y: Vec<f64> = train_idx.iter().map(|&i| samples[i].target).collect();
    let val_rows: Vec<FeatureRow> = val_idx.iter().map(|&i| samples[i].features).collect();
    let val_y: Vec<f64> = val_idx.iter().map(|&i| samples[i].target).collect();

    let normalization = Normalization::fit(&train_rows);
    let x_train = input_matrix(&normalization, &train_rows);
    let x_val = input_matrix(&normalization, &val_rows);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut params = Params::he_uniform(&mut rng);
    // start the output at the mean target
    let mean_target = mean_std(&train_y).0;
    if mean_target > 0.0 {
        params.biases.last_mut().unwrap()[0] = mean_target;
    }
    let n_params: usize = params.weights.iter().map(|w| w.len()).sum::<usize>()
        + params.biases.iter().map(|b| b.len()).sum::<usize>();
    let mut adam = Adam::new(config.learning_rate, n_params);

    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, Vec<Layer>)> = None;
    let mut order: Vec<usize> = (0..train_y.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            let x = x_train.select_columns(chunk.iter());
            let y: Vec<f64> = chunk.iter().map(|&i| train_y[i]).collect();
            let (loss, grads) = params.loss_and_gradient(x, &y);
            if !loss.is_finite() {
                return Err(NetError::NonFiniteLoss { epoch, batch });
            }
            adam.step(&mut params, &grads);
        }
        let train_mse = params.mse(&x_train, &train_y);
        let validation_mse = params.mse(&x_val, &val_y);
        if !train_mse.is_finite() || !validation_mse.is_finite() {
            return Err(NetError::NonFiniteLoss { epoch, batch: usize::MAX });
        }
        log::debug!("epoch {epoch}: train mse {train_mse:.6e}, validation mse {validation_mse:.6e}");
        history.push(EpochLoss { epoch, train_mse, validation_mse });
        if best.as_ref().is_none_or(|b| validation_mse < b.1) {
            best = Some((epoch, validation_mse, params.to_layers()));
        }
    }
    let (best_epoch, _, layers) = best.expect("at least one epoch");
    let net = ErrorNet {
        version: MODEL_VERSION,
        layer_sizes: LAYER_SIZES.to_vec(),
        layers,
        normalization,
        seed: config.seed,
        epochs: config.epochs,
        optimizer: format!("adam(lr={}, batch={})", config.learning_rate, config.batch_size),
    };
    Ok(TrainOutcome { net, history, best_epoch })
}

impl ErrorNet {
    /// Untrained network with He-uniform weights and identity normalization.
    pub fn initialized(seed: u64) -> Self {
        let params = Params::he_uniform(&mut ChaCha8Rng::seed_from_u64(seed));
        ErrorNet {
            version: MODEL_VERSION,
            layer_sizes: LAYER_SIZES.to_vec(),
            layers: params.to_layers(),
            normalization: Normalization { mean: [0.0; 10], std: [1.0; 10] },
            seed,
            epochs: 0,
            optimizer: "none".into(),
        }
    }

    fn params(&self) -> Params {
        Params::from_layers(&self.layers)
    }

    /// Per-row predicted absolute error (mm); always ≥ 0.
    pub fn predict(&self, rows: &[FeatureRow]) -> Result<Vec<f64>, NetError> {
        if let Some(i) = rows.iter().position(|r| !r.is_finite()) {
            return Err(NetError::NonFiniteInput(i));
        }
        Ok(self.predict_unchecked(rows))
    }

    fn predict_unchecked(&self, rows: &[FeatureRow]) -> Vec<f64> {
        let params = self.params();
        let chunks = rows.len().div_ceil(PREDICT_CHUNK);
        par::map_range(chunks, |c| {
            let part = &rows[c * PREDICT_CHUNK..((c + 1) * PREDICT_CHUNK).min(rows.len())];
            let out = params.forward(input_matrix(&self.normalization, part)).pop().unwrap();
            out.iter().copied().collect::<Vec<f64>>()
        })
        .concat()
    }

    pub fn mse(&self, samples: &[TrainingSample]) -> Result<f64, NetError> {
        let rows: Vec<FeatureRow> = samples.iter().map(|s| s.features).collect();
        let pred = self.predict(&rows)?;
        Ok(pred.iter().zip(samples).map(|(p, s)| (p - s.target).powi(2)).sum::<f64>() / samples.len().max(1) as f64)
    }

    /// MSE and analytic gradient on already-normalized inputs.
    pub fn loss_and_gradient(&self, normalized: &[[f64; 10]], targets: &[f64]) -> (f64, Gradients) {
        let x = DMatrix::from_fn(10, normalized.len(), |f, c| normalized[c][f]);
        self.params().loss_and_gradient(x, targets)
    }

    /// Relative difference `‖g − g_fd‖ / max(‖g‖ + ‖g_fd‖, tiny)` between the
    /// backprop gradient and central finite differences with step `h` over
    /// every parameter.
    pub fn gradient_check(&self, normalized: &[[f64; 10]], targets: &[f64], h: f64) -> f64 {
        let x = DMatrix::from_fn(10, normalized.len(), |f, c| normalized[c][f]);
        let base = self.params();
        let analytic = base.loss_and_gradient(x.clone(), targets).1.flatten();
        let mut numeric = Vec::with_capacity(analytic.len());
        let mut p = self.params();
        for l in 0..p.weights.len() {
            for k in 0..p.weights[l].len() {
                let orig = p.weights[l][k];
                p.weights[l][k] = orig + h;
                let up = p.mse(&x, targets);
                p.weights[l][k] = orig - h;
                let down = p.mse(&x, targets);
                p.weights[l][k] = orig;
                numeric.push((up - down) / (2.0 * h));
            }
            for k in 0..p.biases[l].len() {
                let orig = p.biases[l][k];
                p.biases[l][k] = orig + h;
                let up = p.mse(&x, targets);
                p.biases[l][k] = orig - h;
                let down = p.mse(&x, targets);
                p.biases[l][k] = orig;
                numeric.push((up - down) / (2.0 * h));
            }
        }
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let na: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nb: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        diff / (na + nb).max(f64::MIN_POSITIVE)
    }

    pub fn to_json(&self) -> Result<String, NetError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, NetError> {
        let net: ErrorNet = serde_json::from_str(text)?;
        net.check_shape()?;
        Ok(net)
    }

    fn check_shape(&self) -> Result<(), NetError> {
        if self.version != MODEL_VERSION {
            return Err(NetError::Model(format!("unsupported model version {}", self.version)));
        }
        if self.layer_sizes != LAYER_SIZES || self.layers.len() != LAYER_SIZES.len() - 1 {
            return Err(NetError::Model(format!("expected layer sizes {:?}, got {:?}", LAYER_SIZES, self.layer_sizes)));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let (fan_in, fan_out) = (LAYER_SIZES[l], LAYER_SIZES[l + 1]);
            if layer.biases.len() != fan_out
                || layer.weights.len() != fan_out
                || layer.weights.iter().any(|r| r.len() != fan_in)
            {
                return Err(NetError::Model(format!("layer {l} is not {fan_out}x{fan_in}")));
            }
        }
        if self.normalization.std.iter().any(|s| !(*s > 0.0)) {
            return Err(NetError::Model("normalization std must be > 0".into()));
        }
        Ok(())
    }
}

/// Mean prediction over the features of a vertex subset.
pub fn part_epsilon(net: &ErrorNet, mesh: &TriangleMesh, vertices: &[usize]) -> Result<f64, NetError> {
    if vertices.is_empty() {
        return Err(NetError::EmptySubset);
    }
    let rows = features_for(mesh, vertices)?;
    let pred = net.predict(&rows)?;
    Ok(pred.iter().sum::<f64>() / pred.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    /// `mean(ΔMSE) / std(ΔMSE)`; infinite when the spread is zero.
    pub score: f64,
    pub mean_delta: f64,
    pub std_delta: f64,
    /// Set when `std_delta` is zero and `score` is not a ratio.
    pub zero_spread: bool,
}

/// Permutation importance for any predictor. Each feature column is shuffled
/// `repeats` times with its own seeded stream; scores are the mean MSE
/// increase over its (population) standard deviation.
pub fn permutation_importance_with<F>(
    predict: F,
    samples: &[TrainingSample],
    repeats: usize,
    seed: u64,
) -> Result<Vec<FeatureImportance>, NetError>
where
    F: Fn(&[FeatureRow]) -> Vec<f64> + Sync + Send,
{
    if samples.len() < DEFAULT_REPEATS {
        return Err(NetError::TooFewSamples { needed: DEFAULT_REPEATS, got: samples.len() });
    }
    if repeats == 0 {
        return Err(NetError::InvalidConfig("repeats must be >= 1".into()));
    }
    validate_samples(samples)?;
    let rows: Vec<FeatureRow> = samples.iter().map(|s| s.features).collect();
    let targets: Vec<f64> = samples.iter().map(|s| s.target).collect();
    let mse = |pred: &[f64]| pred.iter().zip(&targets).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / targets.len() as f64;
    let base = mse(&predict(&rows));
    Ok(par::map_range(10, |f| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (f as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let column: Vec<f64> = rows.iter().map(|r| r.to_array()[f]).collect();
        let deltas: Vec<f64> = (0..repeats)
            .map(|_| {
                let mut col = column.clone();
                col.shuffle(&mut rng);
                let shuffled: Vec<FeatureRow> = rows
                    .iter()
                    .zip(&col)
                    .map(|(r, v)| {
                        let mut a = r.to_array();
                        a[f] = *v;
                        FeatureRow::from_array(a)
                    })
                    .collect();
                mse(&predict(&shuffled)) - base
            })
            .collect();
        let (mean_delta, std_delta) = mean_std(&deltas);
        let zero_spread = std_delta == 0.0;
        let score = if !zero_spread {
            mean_delta / std_delta
        } else if mean_delta == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(mean_delta)
        };
        FeatureImportance { feature: FEATURE_NAMES[f].to_string(), score, mean_delta, std_delta, zero_spread }
    }))
}

pub fn permutation_importance(
    net: &ErrorNet,
    samples: &[TrainingSample],
    repeats: usize,
    seed: u64,
) -> Result<Vec<FeatureImportance>, NetError> {
    permutation_importance_with(|rows| net.predict_unchecked(rows), samples, repeats, seed)
}

/// Error summary of predictions against measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub count: usize,
    /// Mean absolute difference between predicted and actual error.
    pub mae: f64,
    /// Standard deviation of the absolute difference.
    pub std: f64,
    pub mean_predicted: f64,
    pub mean_actual: f64,
    pub pearson: Option<f64>,
}

pub fn evaluate(predicted: &[f64], actual: &[f64]) -> EvalReport {
    assert_eq!(predicted.len(), actual.len());
    let diffs: Vec<f64> = predicted.iter().zip(actual).map(|(p, a)| (p - a).abs()).collect();
    let (mae, std) = mean_std(&diffs);
    EvalReport {
        count: predicted.len(),
        mae,
        std,
        mean_predicted: mean_std(predicted).0,
        mean_actual: mean_std(actual).0,
        pearson: pearson(predicted, actual),
    }
}
