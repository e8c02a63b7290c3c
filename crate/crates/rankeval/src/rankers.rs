//! Observation and measurement rankers: regularized linear pairwise models
//! trained by deterministic subgradient descent, top-K list production, and
//! ranker-difference diagnostics.
//!
//! The trained model minimizes `(1/2)·||w||² + C · Σ max(0, 1 − w·(x_d − x_z))`
//! over all within-query pairs with `label_d > label_z`, restricted to a
//! seeded query-level sample of the pool. The regularization constant `C`
//! plays its usual role: small values shrink the weights and make models
//! trained on different samples behave alike.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{shuffle, LabeledPool, PoolQuery};
use crate::model::{kendall_tau, FeatureVector, Impression};

#[derive(Debug, Error, PartialEq)]
pub enum RankerError {
    #[error("no valid training pairs in the sampled queries")]
    NoTrainingPairs,

    #[error("query has {got} candidates, need at least {need}")]
    NotEnoughCandidates { got: usize, need: usize },

    #[error("validation pool is empty")]
    EmptyPool,

    #[error("feature dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bad ranker file: {0}")]
    BadFormat(String),
}

/// A trained linear scorer together with the settings that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRankerParams {
    pub weights: Vec<f64>,
    pub c: f64,
    pub training_fraction: f64,
    pub seed: u64,
}

impl LinearRankerParams {
    pub fn score(&self, x: &FeatureVector) -> f64 {
        self.weights.iter().zip(&x.0).map(|(w, v)| w * v).sum()
    }
}

/// Score- and order-level differences between two rankers on a validation
/// pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankerDiffReport {
    pub rmse: f64,
    pub mae: f64,
    pub kendall_tau: f64,
}

/// Optimizer settings; the defaults match the documented training contract.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    /// Base step size; epoch `e` uses `base_learning_rate / sqrt(e)`.
    pub base_learning_rate: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            epochs: 200,
            base_learning_rate: 0.5,
        }
    }
}

/// Trains a linear pairwise ranker on a seeded query-level sample of size
/// `fraction` of the pool, with default optimizer settings.
pub fn train_linear_ranker(
    pool: &LabeledPool,
    c: f64,
    fraction: f64,
    seed: u64,
) -> Result<LinearRankerParams, RankerError> {
    train_linear_ranker_with(pool, c, fraction, seed, &TrainOptions::default())
}

/// As [`train_linear_ranker`] with explicit optimizer settings.
pub fn train_linear_ranker_with(
    pool: &LabeledPool,
    c: f64,
    fraction: f64,
    seed: u64,
    options: &TrainOptions,
) -> Result<LinearRankerParams, RankerError> {
    if c <= 0.0 {
        return Err(RankerError::InvalidParameter("C must be > 0".into()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(RankerError::InvalidParameter(
            "training fraction must lie in (0, 1]".into(),
        ));
    }
    if options.epochs == 0 {
        return Err(RankerError::InvalidParameter("epochs must be > 0".into()));
    }
    if options.base_learning_rate <= 0.0 || options.base_learning_rate >= 1.0 {
        return Err(RankerError::InvalidParameter(
            "base learning rate must lie in (0, 1)".into(),
        ));
    }

    let mut order: Vec<usize> = (0..pool.num_queries()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffle(&mut order, &mut rng);
    let n_sample = ((fraction * pool.num_queries() as f64).round() as usize)
        .clamp(1, pool.num_queries());
    let mut sampled = order[..n_sample].to_vec();
    sampled.sort_unstable();

    // Pair list is fixed up front: (positive doc, negative doc) per query.
    let dim = pool.feature_dim;
    let mut pairs: Vec<(&[f64], &[f64])> = Vec::new();
    for &qi in &sampled {
        let query = &pool.queries[qi];
        for d in &query.docs {
            for z in &query.docs {
                if d.label > z.label {
                    pairs.push((&d.features.0, &z.features.0));
                }
            }
        }
    }
    if pairs.is_empty() {
        return Err(RankerError::NoTrainingPairs);
    }

    let mut weights = vec![0.0f64; dim];
    for epoch in 1..=options.epochs {
        let lr = options.base_learning_rate / (epoch as f64).sqrt();
        let mut data_grad = vec![0.0f64; dim];
        for (pos, neg) in &pairs {
            let mut margin = 0.0;
            for j in 0..dim {
                margin += weights[j] * (pos[j] - neg[j]);
            }
            if margin < 1.0 {
                for j in 0..dim {
                    data_grad[j] += pos[j] - neg[j];
                }
            }
        }
        for j in 0..dim {
            weights[j] = (1.0 - lr) * weights[j] + lr * c * data_grad[j];
        }
    }

    Ok(LinearRankerParams {
        weights,
        c,
        training_fraction: fraction,
        seed,
    })
}

/// Top-K impression for one query: documents sorted by `w·x` descending,
/// score ties broken by ascending document id.
pub fn rank_top_k(
    params: &LinearRankerParams,
    query: &PoolQuery,
    k: usize,
) -> Result<Impression, RankerError> {
    if query.docs.len() < k {
        return Err(RankerError::NotEnoughCandidates {
            got: query.docs.len(),
            need: k,
        });
    }
    let mut scored: Vec<(f64, u32)> = query
        .docs
        .iter()
        .map(|d| (params.score(&d.features), d.id.0))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(Impression::new(
        query.id.clone(),
        scored[..k]
            .iter()
            .map(|&(_, id)| crate::model::DocId(id))
            .collect(),
    ))
}

/// Compares two rankers on a validation pool: RMSE and MAE over per-document
/// score differences, and the mean per-query Kendall tau between the two
/// score-induced orderings.
pub fn compare_rankers(
    pi: &LinearRankerParams,
    mu: &LinearRankerParams,
    pool: &LabeledPool,
) -> Result<RankerDiffReport, RankerError> {
    if pi.weights.len() != mu.weights.len() {
        return Err(RankerError::DimMismatch(pi.weights.len(), mu.weights.len()));
    }
    if pool.num_queries() == 0 {
        return Err(RankerError::EmptyPool);
    }

    let mut sq_sum = 0.0;
    let mut abs_sum = 0.0;
    let mut n_docs = 0usize;
    let mut tau_sum = 0.0;
    let mut tau_count = 0usize;
    for query in &pool.queries {
        let s_pi: Vec<f64> = query.docs.iter().map(|d| pi.score(&d.features)).collect();
        let s_mu: Vec<f64> = query.docs.iter().map(|d| mu.score(&d.features)).collect();
        for (a, b) in s_pi.iter().zip(&s_mu) {
            let diff = a - b;
            sq_sum += diff * diff;
            abs_sum += diff.abs();
            n_docs += 1;
        }
        if query.docs.len() >= 2 {
            if let Ok(tau) = kendall_tau(&s_pi, &s_mu) {
                tau_sum += tau;
                tau_count += 1;
            }
        }
    }
    if n_docs == 0 {
        return Err(RankerError::EmptyPool);
    }

    Ok(RankerDiffReport {
        rmse: (sq_sum / n_docs as f64).sqrt(),
        mae: abs_sum / n_docs as f64,
        kendall_tau: if tau_count > 0 {
            tau_sum / tau_count as f64
        } else {
            // No query had two candidates; identical scores by definition.
            1.0
        },
    })
}

const RANKER_FORMAT_TAG: &str = "rankeval.linear-ranker.v1";

/// Serializes ranker parameters to the versioned key-value text format.
pub fn ranker_to_text(params: &LinearRankerParams) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{RANKER_FORMAT_TAG}");
    let _ = writeln!(out, "dim={}", params.weights.len());
    let _ = writeln!(out, "C={}", params.c);
    let _ = writeln!(out, "t={}", params.training_fraction);
    let _ = writeln!(out, "seed={}", params.seed);
    let joined: Vec<String> = params.weights.iter().map(|w| w.to_string()).collect();
    let _ = writeln!(out, "weights={}", joined.join(","));
    out
}

/// Parses the format written by [`ranker_to_text`].
pub fn ranker_from_text(text: &str) -> Result<LinearRankerParams, RankerError> {
    let mut lines = text.lines();
    let tag = lines.next().unwrap_or("");
    if tag.trim() != RANKER_FORMAT_TAG {
        return Err(RankerError::BadFormat(format!(
            "expected header '{RANKER_FORMAT_TAG}', got '{tag}'"
        )));
    }

    let mut dim = None;
    let mut c = None;
    let mut t = None;
    let mut seed = None;
    let mut weights: Option<Vec<f64>> = None;
    for line in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| RankerError::BadFormat(format!("bad line '{line}'")))?;
        match key {
            "dim" => dim = Some(parse_field::<usize>(key, value)?),
            "C" => c = Some(parse_field::<f64>(key, value)?),
            "t" => t = Some(parse_field::<f64>(key, value)?),
            "seed" => seed = Some(parse_field::<u64>(key, value)?),
            "weights" => {
                let parsed: Result<Vec<f64>, _> =
                    value.split(',').map(|v| v.trim().parse::<f64>()).collect();
                weights = Some(parsed.map_err(|e| {
                    RankerError::BadFormat(format!("bad weights list: {e}"))
                })?);
            }
            other => {
                return Err(RankerError::BadFormat(format!("unknown field '{other}'")));
            }
        }
    }

    let dim = dim.ok_or_else(|| RankerError::BadFormat("missing dim".into()))?;
    let weights = weights.ok_or_else(|| RankerError::BadFormat("missing weights".into()))?;
    if weights.len() != dim {
        return Err(RankerError::BadFormat(format!(
            "dim={} but {} weights",
            dim,
            weights.len()
        )));
    }
    Ok(LinearRankerParams {
        weights,
        c: c.ok_or_else(|| RankerError::BadFormat("missing C".into()))?,
        training_fraction: t.ok_or_else(|| RankerError::BadFormat("missing t".into()))?,
        seed: seed.ok_or_else(|| RankerError::BadFormat("missing seed".into()))?,
    })
}

fn parse_field<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, RankerError> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| RankerError::BadFormat(format!("bad value for '{key}': '{value}'")))
}
