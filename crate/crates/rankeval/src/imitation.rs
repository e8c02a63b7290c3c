//! The imitation ranker: a small feed-forward scorer trained to reproduce
//! logged impressions, via either a pairwise log-loss over all within-list
//! pairs or a list-likelihood (Plackett-Luce) objective. Gradients are exact
//! and checked against finite differences in the tests.
//!
//! Training is single-threaded and deterministic for a given seed; the
//! trained parameters are immutable and scoring is pure.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{shuffle, LabeledPool};
use crate::model::{kendall_tau, FeatureStore, FeatureVector, LoggedDataset, LoggedRecord};

/// Salt separating the epoch-shuffle stream from the init stream.
const SHUFFLE_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Error, PartialEq)]
pub enum ImitationError {
    #[error("input has dim {got}, network expects {want}")]
    DimMismatch { got: usize, want: usize },

    #[error("no feature vector for ({query}, {doc})")]
    MissingFeature { query: String, doc: u32 },

    #[error("dataset has no records")]
    EmptyDataset,

    #[error("no ranked pairs available")]
    NoPairs,

    #[error("pool is empty or has no query with an ordering signal")]
    EmptyPool,

    #[error("invalid training config: {0}")]
    BadConfig(String),

    #[error("bad model file: {0}")]
    BadFormat(String),
}

/// One dense layer. Weights are row-major, `out_dim` rows of `in_dim`
/// columns; hidden layers apply tanh, the final layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Layer {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }
}

/// Feed-forward scorer parameters: tanh hidden layers, linear scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

impl MlpParams {
    /// Layer dimensions including the input: `[F, h1, ..., 1]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].in_dim];
        dims.extend(self.layers.iter().map(|l| l.out_dim));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    /// A same-shaped parameter set with every value zero, used to hold
    /// gradients.
    pub fn zeros_like(&self) -> MlpParams {
        MlpParams {
            layers: self
                .layers
                .iter()
                .map(|l| Layer::zeros(l.in_dim, l.out_dim))
                .collect(),
        }
    }

    /// Seeded initialization: weights uniform in
    /// `±sqrt(6 / (fan_in + fan_out))` per layer, biases zero.
    pub fn init(dims: &[usize], seed: u64) -> Result<MlpParams, ImitationError> {
        if dims.len() < 2 {
            return Err(ImitationError::BadConfig(
                "need at least input and output dims".into(),
            ));
        }
        if *dims.last().unwrap() != 1 {
            return Err(ImitationError::BadConfig("output dim must be 1".into()));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(ImitationError::BadConfig("layer dims must be > 0".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-bound..bound))
                .collect();
            layers.push(Layer {
                in_dim: fan_in,
                out_dim: fan_out,
                weights,
                bias: vec![0.0; fan_out],
            });
        }
        Ok(MlpParams { layers })
    }

    fn axpy(&mut self, alpha: f64, other: &MlpParams) {
        for (layer, o) in self.layers.iter_mut().zip(&other.layers) {
            for (w, ow) in layer.weights.iter_mut().zip(&o.weights) {
                *w += alpha * ow;
            }
            for (b, ob) in layer.bias.iter_mut().zip(&o.bias) {
                *b += alpha * ob;
            }
        }
    }

    fn zero(&mut self) {
        for layer in &mut self.layers {
            layer.weights.iter_mut().for_each(|w| *w = 0.0);
            layer.bias.iter_mut().for_each(|b| *b = 0.0);
        }
    }
}

/// Training objective for the imitation ranker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Pairwise log-loss over all within-impression ordered pairs.
    Pairwise,
    /// Negative Plackett-Luce list likelihood of the logged order.
    ListMle,
}

/// Model capacity presets; hidden widths are fixed, the input width follows
/// the dataset's feature dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSize {
    /// `[F -> 1]`, a linear scorer.
    Small,
    /// `[F -> 32 -> 1]`.
    Medium,
    /// `[F -> 128 -> 32 -> 1]`.
    Big,
}

impl ModelSize {
    pub fn dims(&self, feature_dim: usize) -> Vec<usize> {
        match self {
            ModelSize::Small => vec![feature_dim, 1],
            ModelSize::Medium => vec![feature_dim, 32, 1],
            ModelSize::Big => vec![feature_dim, 128, 32, 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImitationTrainConfig {
    pub objective: Objective,
    pub size: ModelSize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size_impressions: usize,
    pub seed: u64,
}

impl Default for ImitationTrainConfig {
    fn default() -> Self {
        ImitationTrainConfig {
            objective: Objective::Pairwise,
            size: ModelSize::Medium,
            epochs: 100,
            learning_rate: 1e-2,
            batch_size_impressions: 50,
            seed: 0,
        }
    }
}

/// Diagnostics from one training run. `validation_tau` is filled by callers
/// that hold a labeled validation pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    /// Mean per-impression loss observed during each epoch.
    pub loss_per_epoch: Vec<f64>,
    /// Percentage of logged pairs the final model orders incorrectly.
    pub swap_percent: f64,
    pub validation_tau: Option<f64>,
}

/// Scores a single feature vector. Deterministic and finite for finite
/// inputs.
pub fn mlp_forward(params: &MlpParams, x: &FeatureVector) -> Result<f64, ImitationError> {
    if x.dim() != params.input_dim() {
        return Err(ImitationError::DimMismatch {
            got: x.dim(),
            want: params.input_dim(),
        });
    }
    let mut current = x.0.clone();
    let last = params.layers.len() - 1;
    for (li, layer) in params.layers.iter().enumerate() {
        let mut next = vec![0.0; layer.out_dim];
        for o in 0..layer.out_dim {
            let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            let mut z = layer.bias[o];
            for (w, v) in row.iter().zip(&current) {
                z += w * v;
            }
            next[o] = if li == last { z } else { z.tanh() };
        }
        current = next;
    }
    Ok(current[0])
}

/// Reusable forward/backward buffers for one impression of K docs.
struct Workspace {
    /// Post-activation values per layer boundary; `acts[0]` holds inputs.
    /// Each buffer covers `K * dim` for the current impression.
    acts: Vec<Vec<f64>>,
    /// One-doc backprop deltas per layer.
    delta: Vec<Vec<f64>>,
    scores: Vec<f64>,
    score_grad: Vec<f64>,
    suffix_lse: Vec<f64>,
}

impl Workspace {
    fn new(params: &MlpParams) -> Self {
        let dims = params.dims();
        Workspace {
            acts: dims.iter().map(|_| Vec::new()).collect(),
            delta: dims[1..].iter().map(|&d| vec![0.0; d]).collect(),
            scores: Vec::new(),
            score_grad: Vec::new(),
            suffix_lse: Vec::new(),
        }
    }

    fn reset(&mut self, params: &MlpParams, k: usize) {
        let dims = params.dims();
        for (buf, &d) in self.acts.iter_mut().zip(&dims) {
            buf.clear();
            buf.resize(k * d, 0.0);
        }
        self.scores.clear();
        self.scores.resize(k, 0.0);
        self.score_grad.clear();
        self.score_grad.resize(k, 0.0);
        self.suffix_lse.clear();
        self.suffix_lse.resize(k, 0.0);
    }
}

/// Forward one document, caching activations at slot `doc` of the workspace.
fn forward_cached(params: &MlpParams, ws: &mut Workspace, doc: usize, x: &[f64]) {
    let in_dim = params.input_dim();
    ws.acts[0][doc * in_dim..(doc + 1) * in_dim].copy_from_slice(x);
    let last = params.layers.len() - 1;
    for (li, layer) in params.layers.iter().enumerate() {
        let (before, after) = ws.acts.split_at_mut(li + 1);
        let input = &before[li][doc * layer.in_dim..(doc + 1) * layer.in_dim];
        let output = &mut after[0][doc * layer.out_dim..(doc + 1) * layer.out_dim];
        for o in 0..layer.out_dim {
            let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            let mut z = layer.bias[o];
            for (w, v) in row.iter().zip(input) {
                z += w * v;
            }
            output[o] = if li == last { z } else { z.tanh() };
        }
    }
    ws.scores[doc] = ws.acts[params.layers.len()][doc];
}

/// Backpropagates a scalar score gradient for one cached document,
/// accumulating parameter gradients into `grad`.
fn backward_cached(
    params: &MlpParams,
    ws: &mut Workspace,
    doc: usize,
    dscore: f64,
    grad: &mut MlpParams,
) {
    let n_layers = params.layers.len();
    ws.delta[n_layers - 1][0] = dscore;
    for li in (0..n_layers).rev() {
        let layer = &params.layers[li];
        let input = &ws.acts[li][doc * layer.in_dim..(doc + 1) * layer.in_dim];
        // Hidden layers carry tanh: convert the post-activation gradient to
        // pre-activation with a' = 1 - a^2. The final layer is linear.
        if li != n_layers - 1 {
            let out = &ws.acts[li + 1][doc * layer.out_dim..(doc + 1) * layer.out_dim];
            for (d, a) in ws.delta[li].iter_mut().zip(out) {
                *d *= 1.0 - a * a;
            }
        }
        let glayer = &mut grad.layers[li];
        for o in 0..layer.out_dim {
            let d = ws.delta[li][o];
            if d != 0.0 {
                let grow = &mut glayer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (g, v) in grow.iter_mut().zip(input) {
                    *g += d * v;
                }
                glayer.bias[o] += d;
            }
        }
        if li > 0 {
            let (lower, upper) = ws.delta.split_at_mut(li);
            let prev = &mut lower[li - 1];
            prev.iter_mut().for_each(|d| *d = 0.0);
            for o in 0..layer.out_dim {
                let d = upper[0][o];
                if d != 0.0 {
                    let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += d * w;
                    }
                }
            }
        }
    }
}

/// `ln(1 + exp(x))` without overflow.
fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Per-impression score gradients for the pairwise objective. The loss over
/// an impression is `sum over pairs (d above z) of ln(1 + exp(-(s_d - s_z)))`.
fn pairwise_score_grad(scores: &[f64], grad: &mut [f64]) -> f64 {
    let k = scores.len();
    let mut loss = 0.0;
    grad.iter_mut().for_each(|g| *g = 0.0);
    for i in 0..k {
        for j in (i + 1)..k {
            let delta = scores[i] - scores[j];
            loss += log1p_exp(-delta);
            // d/d(delta) of ln(1 + exp(-delta)) is -sigmoid(-delta).
            let g = -1.0 / (1.0 + delta.exp());
            grad[i] += g;
            grad[j] -= g;
        }
    }
    loss
}

/// Per-impression score gradients for the list-likelihood objective:
/// `sum over positions i of (lse_i - s_i)` with `lse_i = ln sum_{j>=i} exp(s_j)`.
fn listmle_score_grad(scores: &[f64], grad: &mut [f64], suffix_lse: &mut [f64]) -> f64 {
    let k = scores.len();
    suffix_lse[k - 1] = scores[k - 1];
    for i in (0..k - 1).rev() {
        suffix_lse[i] = log_add_exp(scores[i], suffix_lse[i + 1]);
    }
    let mut loss = 0.0;
    for i in 0..k {
        loss += suffix_lse[i] - scores[i];
    }
    for (j, g) in grad.iter_mut().enumerate() {
        let mut soft_sum = 0.0;
        for i in 0..=j {
            soft_sum += (scores[j] - suffix_lse[i]).exp();
        }
        *g = soft_sum - 1.0;
    }
    loss
}

fn record_loss_grad(
    params: &MlpParams,
    records: &[LoggedRecord],
    features: &FeatureStore,
    objective: Objective,
    ws: &mut Workspace,
    grad: &mut MlpParams,
) -> Result<f64, ImitationError> {
    let mut total = 0.0;
    for rec in records {
        let k = rec.impression.len();
        if k == 0 {
            continue;
        }
        ws.reset(params, k);
        for (di, doc) in rec.impression.docs.iter().enumerate() {
            let fv = features.get(&rec.query, *doc).ok_or_else(|| {
                ImitationError::MissingFeature {
                    query: rec.query.to_string(),
                    doc: doc.0,
                }
            })?;
            if fv.dim() != params.input_dim() {
                return Err(ImitationError::DimMismatch {
                    got: fv.dim(),
                    want: params.input_dim(),
                });
            }
            forward_cached(params, ws, di, &fv.0);
        }
        let scores = std::mem::take(&mut ws.scores);
        let mut score_grad = std::mem::take(&mut ws.score_grad);
        let mut suffix = std::mem::take(&mut ws.suffix_lse);
        total += match objective {
            Objective::Pairwise => pairwise_score_grad(&scores, &mut score_grad),
            Objective::ListMle => listmle_score_grad(&scores, &mut score_grad, &mut suffix),
        };
        for (di, &g) in score_grad.iter().enumerate() {
            if g != 0.0 {
                backward_cached(params, ws, di, g, grad);
            }
        }
        ws.scores = scores;
        ws.score_grad = score_grad;
        ws.suffix_lse = suffix;
    }
    Ok(total)
}

/// Loss and exact gradient of the pairwise objective over a batch of logged
/// records. The gradient has the same layer shapes as `params`.
pub fn pairwise_loss_grad(
    params: &MlpParams,
    records: &[LoggedRecord],
    features: &FeatureStore,
) -> Result<(f64, MlpParams), ImitationError> {
    let mut ws = Workspace::new(params);
    let mut grad = params.zeros_like();
    let loss =
        record_loss_grad(params, records, features, Objective::Pairwise, &mut ws, &mut grad)?;
    Ok((loss, grad))
}

/// Loss and exact gradient of the list-likelihood objective over a batch.
pub fn listmle_loss_grad(
    params: &MlpParams,
    records: &[LoggedRecord],
    features: &FeatureStore,
) -> Result<(f64, MlpParams), ImitationError> {
    let mut ws = Workspace::new(params);
    let mut grad = params.zeros_like();
    let loss =
        record_loss_grad(params, records, features, Objective::ListMle, &mut ws, &mut grad)?;
    Ok((loss, grad))
}

/// Trains the imitation scorer with seeded minibatch gradient descent over
/// impressions. Deterministic for a given config and dataset.
pub fn train_imitation(
    ds: &LoggedDataset,
    cfg: &ImitationTrainConfig,
) -> Result<(MlpParams, TrainingReport), ImitationError> {
    if ds.is_empty() {
        return Err(ImitationError::EmptyDataset);
    }
    if cfg.epochs == 0 {
        return Err(ImitationError::BadConfig("epochs must be > 0".into()));
    }
    if cfg.learning_rate <= 0.0 {
        return Err(ImitationError::BadConfig("learning rate must be > 0".into()));
    }
    if cfg.batch_size_impressions == 0 {
        return Err(ImitationError::BadConfig("batch size must be > 0".into()));
    }

    let dims = cfg.size.dims(ds.features.dim());
    let mut params = MlpParams::init(&dims, cfg.seed)?;
    let mut ws = Workspace::new(&params);
    let mut grad = params.zeros_like();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_SALT);

    let n = ds.records.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut batch: Vec<LoggedRecord> = Vec::with_capacity(cfg.batch_size_impressions);
    let mut loss_per_epoch = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        shuffle(&mut order, &mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size_impressions) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| ds.records[i].clone()));
            grad.zero();
            epoch_loss += record_loss_grad(
                &params,
                &batch,
                &ds.features,
                cfg.objective,
                &mut ws,
                &mut grad,
            )?;
            params.axpy(-cfg.learning_rate / chunk.len() as f64, &grad);
        }
        loss_per_epoch.push(epoch_loss / n as f64);
    }

    let swap = swap_percent(&params, ds)?;
    Ok((
        params,
        TrainingReport {
            loss_per_epoch,
            swap_percent: swap,
            validation_tau: None,
        },
    ))
}

/// Percentage of logged ordered pairs the model scores in the wrong order,
/// with ties counting as swapped.
pub fn swap_percent(params: &MlpParams, ds: &LoggedDataset) -> Result<f64, ImitationError> {
    let mut swapped = 0usize;
    let mut total = 0usize;
    let mut scores: Vec<f64> = Vec::new();
    for rec in &ds.records {
        scores.clear();
        for doc in &rec.impression.docs {
            let fv = ds.features.get(&rec.query, *doc).ok_or_else(|| {
                ImitationError::MissingFeature {
                    query: rec.query.to_string(),
                    doc: doc.0,
                }
            })?;
            scores.push(mlp_forward(params, fv)?);
        }
        let k = scores.len();
        for i in 0..k {
            for j in (i + 1)..k {
                total += 1;
                if scores[i] <= scores[j] {
                    swapped += 1;
                }
            }
        }
    }
    if total == 0 {
        return Err(ImitationError::NoPairs);
    }
    Ok(100.0 * swapped as f64 / total as f64)
}

/// Mean per-query Kendall tau between model scores and the pool's labels.
/// Queries without an ordering signal (a single doc, or all labels tied)
/// are skipped.
pub fn validation_tau(params: &MlpParams, pool: &LabeledPool) -> Result<f64, ImitationError> {
    if pool.num_queries() == 0 {
        return Err(ImitationError::EmptyPool);
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for query in &pool.queries {
        if query.docs.len() < 2 {
            continue;
        }
        let labels: Vec<f64> = query.docs.iter().map(|d| d.label as f64).collect();
        if labels.windows(2).all(|w| w[0] == w[1]) {
            continue;
        }
        let mut scores = Vec::with_capacity(query.docs.len());
        for doc in &query.docs {
            scores.push(mlp_forward(params, &doc.features)?);
        }
        let tau = kendall_tau(&scores, &labels).map_err(|_| ImitationError::EmptyPool)?;
        sum += tau;
        count += 1;
    }
    if count == 0 {
        return Err(ImitationError::EmptyPool);
    }
    Ok(sum / count as f64)
}

const MLP_FORMAT_TAG: &str = "rankeval.mlp.v1";

/// Serializes model parameters to a versioned text format: explicit layer
/// dims, then per-layer row-major weights and biases. Values round-trip
/// exactly through the shortest decimal representation.
pub fn mlp_to_text(params: &MlpParams) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MLP_FORMAT_TAG}");
    let dims: Vec<String> = params.dims().iter().map(|d| d.to_string()).collect();
    let _ = writeln!(out, "dims={}", dims.join(","));
    for (i, layer) in params.layers.iter().enumerate() {
        let _ = writeln!(out, "layer={i}");
        let w: Vec<String> = layer.weights.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "weights={}", w.join(","));
        let b: Vec<String> = layer.bias.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "bias={}", b.join(","));
    }
    out
}

/// Parses the format written by [`mlp_to_text`].
pub fn mlp_from_text(text: &str) -> Result<MlpParams, ImitationError> {
    let mut lines = text.lines();
    let tag = lines.next().unwrap_or("").trim();
    if tag != MLP_FORMAT_TAG {
        return Err(ImitationError::BadFormat(format!(
            "expected header '{MLP_FORMAT_TAG}', got '{tag}'"
        )));
    }
    let dims_line = lines
        .next()
        .and_then(|l| l.trim().strip_prefix("dims="))
        .ok_or_else(|| ImitationError::BadFormat("missing dims line".into()))?;
    let dims: Vec<usize> = dims_line
        .split(',')
        .map(|d| d.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| ImitationError::BadFormat(format!("bad dims: {e}")))?;
    if dims.len() < 2 {
        return Err(ImitationError::BadFormat("need at least two dims".into()));
    }

    let parse_list = |line: Option<&str>, prefix: &str| -> Result<Vec<f64>, ImitationError> {
        let body = line
            .and_then(|l| l.trim().strip_prefix(prefix))
            .ok_or_else(|| ImitationError::BadFormat(format!("missing {prefix} line")))?;
        body.split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| ImitationError::BadFormat(format!("bad float: {e}")))
    };

    let mut layers = Vec::with_capacity(dims.len() - 1);
    for (i, w) in dims.windows(2).enumerate() {
        let header = lines.next().map(str::trim);
        if header != Some(&format!("layer={i}")[..]) {
            return Err(ImitationError::BadFormat(format!(
                "expected 'layer={i}', got {header:?}"
            )));
        }
        let weights = parse_list(lines.next(), "weights=")?;
        let bias = parse_list(lines.next(), "bias=")?;
        if weights.len() != w[0] * w[1] || bias.len() != w[1] {
            return Err(ImitationError::BadFormat(format!(
                "layer {i} size mismatch for dims {}x{}",
                w[0], w[1]
            )));
        }
        layers.push(Layer {
            in_dim: w[0],
            out_dim: w[1],
            weights,
            bias,
        });
    }
    Ok(MlpParams { layers })
}
