//! The end-to-end experiment pipeline: build pools, train the observation
//! and measurement rankers, log swapped/clicked impressions, fit the
//! imitation ranker and σ, and compute ground truth plus every requested
//! estimator, averaged over seeded runs.

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::clicks::{apply_randpair, simulate_clicks, ClickModelConfig, SwapConfig};
use crate::data::{
    binarize_labels, build_observation_queries, generate_synthetic, parse_letor, split_pool,
    LabeledPool, SplitSpec, SyntheticConfig,
};
use crate::estimators::{
    empirical_propensities, estimate_item_ipw, estimate_list_ipw, estimate_naive,
    ground_truth_value, EstimatorReport, MetricKind, PropensitySource,
};
use crate::imitation::{
    mlp_forward, train_imitation, validation_tau, ImitationTrainConfig, TrainingReport,
};
use crate::model::{
    validate_dataset, DocId, FeatureStore, Impression, LoggedDataset, LoggedRecord,
    MeasurementSet, QueryId,
};
use crate::rankdist::{infer_sigma_with_bounds, ParametricPropensities, SigmaEstimate};
use crate::rankers::{
    compare_rankers, rank_top_k, train_linear_ranker_with, LinearRankerParams, RankerDiffReport,
    TrainOptions,
};

use super::config::{DataSource, EstimatorKind, ExperimentConfig, MetricName};
use super::derive_seed;

pub const MANIFEST_SCHEMA_VERSION: &str = "rankeval.manifest.v1";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),

    #[error("stage '{stage}' failed: {message}")]
    Stage { stage: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn stage_err(stage: &str, err: impl std::fmt::Display) -> PipelineError {
    PipelineError::Stage {
        stage: stage.to_string(),
        message: err.to_string(),
    }
}

/// The graded (pre-binarization) train/validate/test pools.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: LabeledPool,
    pub validate: LabeledPool,
    pub test: LabeledPool,
}

/// Loads or generates the labeled pool and splits it at the query level.
/// The pool and split are derived from the master seed only, so all runs of
/// one experiment share them.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData, PipelineError> {
    let pool = match cfg.data_source {
        DataSource::Synthetic => generate_synthetic(&SyntheticConfig {
            num_queries: cfg.synthetic_num_queries,
            candidates_per_query: cfg.synthetic_candidates_per_query,
            feature_dim: cfg.synthetic_feature_dim,
            hidden_dim: cfg.synthetic_hidden_dim,
            relevance_noise: cfg.synthetic_relevance_noise,
            seed: derive_seed(cfg.master_seed, "pool"),
        })
        .map_err(|e| stage_err("generate", e))?,
        DataSource::Letor => {
            let file = std::fs::File::open(&cfg.letor_path)?;
            parse_letor(std::io::BufReader::new(file)).map_err(|e| stage_err("parse", e))?
        }
    };
    let (train, validate, test) = split_pool(
        &pool,
        &SplitSpec {
            train: cfg.split_train,
            validate: cfg.split_validate,
            test: cfg.split_test,
            seed: derive_seed(cfg.master_seed, "split"),
        },
    )
    .map_err(|e| stage_err("split", e))?;
    Ok(PreparedData {
        train,
        validate,
        test,
    })
}

/// Trains the observation ranker π and measurement ranker μ for one run and
/// compares them on the validation split.
pub fn train_rankers(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    run_index: usize,
) -> Result<(LinearRankerParams, LinearRankerParams, RankerDiffReport), PipelineError> {
    let run_seed = derive_seed(cfg.master_seed, &format!("run{run_index}"));
    let btrain = binarize_labels(&data.train, cfg.label_threshold);
    let bval = binarize_labels(&data.validate, cfg.label_threshold);
    let options = TrainOptions {
        epochs: cfg.ranker_epochs,
        base_learning_rate: cfg.ranker_learning_rate,
    };
    let pi = train_linear_ranker_with(
        &btrain,
        cfg.ranker_c,
        cfg.ranker_t_pi,
        derive_seed(run_seed, "ranker-pi"),
        &options,
    )
    .map_err(|e| stage_err("train-pi", e))?;
    let mu = train_linear_ranker_with(
        &btrain,
        cfg.ranker_c,
        cfg.ranker_t_mu,
        derive_seed(run_seed, "ranker-mu"),
        &options,
    )
    .map_err(|e| stage_err("train-mu", e))?;
    let diff = compare_rankers(&pi, &mu, &bval).map_err(|e| stage_err("compare-rankers", e))?;
    Ok((pi, mu, diff))
}

/// Builds one run's logged dataset (observation multiset resampled, ranked
/// by π, swapped, clicked) and the measurement impressions produced by μ.
pub fn build_observation(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    run_index: usize,
) -> Result<(LoggedDataset, MeasurementSet), PipelineError> {
    let run_seed = derive_seed(cfg.master_seed, &format!("run{run_index}"));
    let (pi, mu, _) = train_rankers(cfg, data, run_index)?;
    let btest = binarize_labels(&data.test, cfg.label_threshold);

    let by_query: HashMap<&QueryId, usize> = btest
        .queries
        .iter()
        .enumerate()
        .map(|(i, q)| (&q.id, i))
        .collect();

    let observation_queries = build_observation_queries(
        &btest,
        cfg.observation_count,
        derive_seed(run_seed, "observation"),
    )
    .map_err(|e| stage_err("observation", e))?;

    let mut impressions = Vec::with_capacity(observation_queries.len());
    for qid in &observation_queries {
        let query = &btest.queries[by_query[qid]];
        impressions.push(rank_top_k(&pi, query, cfg.k).map_err(|e| stage_err("rank-pi", e))?);
    }

    let mut swap_rng = ChaCha8Rng::seed_from_u64(derive_seed(run_seed, "swap"));
    let swapped = apply_randpair(
        &impressions,
        &SwapConfig {
            percent: cfg.swap_b,
            seed: derive_seed(run_seed, "swap"),
        },
        &mut swap_rng,
    )
    .map_err(|e| stage_err("swap", e))?;

    let click_cfg = ClickModelConfig {
        eta: cfg.click_eta,
        eps_plus: cfg.click_eps_plus,
        eps_minus: cfg.click_eps_minus,
        seed: derive_seed(run_seed, "clicks-obs"),
    };
    let labels: HashMap<&QueryId, HashMap<DocId, u8>> = btest
        .queries
        .iter()
        .map(|q| {
            (
                &q.id,
                q.docs
                    .iter()
                    .map(|d| (d.id, u8::from(d.label > 0)))
                    .collect(),
            )
        })
        .collect();
    let label_slice = |imp: &Impression| -> Vec<u8> {
        let per_doc = &labels[&imp.query];
        imp.docs.iter().map(|d| per_doc[d]).collect()
    };

    let mut click_rng = ChaCha8Rng::seed_from_u64(click_cfg.seed);
    let mut records = Vec::with_capacity(swapped.len());
    for imp in swapped {
        let doc_labels = label_slice(&imp);
        let clicks = simulate_clicks(&imp, &doc_labels, &click_cfg, &mut click_rng)
            .map_err(|e| stage_err("clicks-obs", e))?;
        records.push(LoggedRecord {
            query: imp.query.clone(),
            impression: imp,
            clicks,
        });
    }

    let mut features = FeatureStore::new(btest.feature_dim);
    for query in &btest.queries {
        for doc in &query.docs {
            features.insert(query.id.clone(), doc.id, doc.features.clone());
        }
    }
    let logged = LoggedDataset::new(records, features, cfg.k);
    let report = validate_dataset(&logged);
    if !report.is_clean() {
        return Err(stage_err(
            "validate",
            format!("{} violations, first: {:?}", report.violations.len(), report.violations[0]),
        ));
    }

    // Measurement impressions: one per unique test query, in pool order.
    let mut measurement = Vec::with_capacity(btest.queries.len());
    for query in &btest.queries {
        measurement.push(rank_top_k(&mu, query, cfg.k).map_err(|e| stage_err("rank-mu", e))?);
    }

    Ok((logged, MeasurementSet::new(measurement)))
}

/// One run's outputs: seeds, diagnostics, ground truth, and every requested
/// estimator per metric.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    pub run_index: usize,
    pub run_seed: u64,
    pub stage_seeds: BTreeMap<String, u64>,
    pub ranker_diff: RankerDiffReport,
    pub training: TrainingReport,
    pub sigma: f64,
    pub sigma_log_likelihood: f64,
    /// Metric label -> ground-truth value.
    pub ground_truth: BTreeMap<String, f64>,
    /// Metric label -> estimator label -> report.
    pub estimates: BTreeMap<String, BTreeMap<String, EstimatorReport>>,
}

/// Executes one seeded run of the full pipeline.
pub fn run_once(
    cfg: &ExperimentConfig,
    data: &PreparedData,
    run_index: usize,
) -> Result<RunResult, PipelineError> {
    let run_seed = derive_seed(cfg.master_seed, &format!("run{run_index}"));
    let stage_seeds: BTreeMap<String, u64> = [
        "ranker-pi",
        "ranker-mu",
        "observation",
        "swap",
        "clicks-obs",
        "imitation",
        "clicks-msmt",
    ]
    .iter()
    .map(|name| (name.to_string(), derive_seed(run_seed, name)))
    .collect();

    let (_, _, ranker_diff) = train_rankers(cfg, data, run_index)?;
    let (logged, measurement) = build_observation(cfg, data, run_index)?;
    let bval = binarize_labels(&data.validate, cfg.label_threshold);
    let btest = binarize_labels(&data.test, cfg.label_threshold);

    // Imitation ranker and score-uncertainty fit.
    let imitation_cfg = ImitationTrainConfig {
        objective: cfg.imitation_objective,
        size: cfg.imitation_size,
        epochs: cfg.imitation_epochs,
        learning_rate: cfg.imitation_learning_rate,
        batch_size_impressions: cfg.imitation_batch_size,
        seed: stage_seeds["imitation"],
    };
    let (mlp, mut training) =
        train_imitation(&logged, &imitation_cfg).map_err(|e| stage_err("train-ir", e))?;
    training.validation_tau = Some(
        validation_tau(&mlp, &bval).map_err(|e| stage_err("validation-tau", e))?,
    );

    let score_fn = |q: &QueryId, d: DocId| {
        logged
            .features
            .get(q, d)
            .and_then(|fv| mlp_forward(&mlp, fv).ok())
    };
    let SigmaEstimate {
        sigma,
        log_likelihood,
        ..
    } = infer_sigma_with_bounds(&logged, score_fn, cfg.sigma_log_lo, cfg.sigma_log_hi)
        .map_err(|e| stage_err("infer-sigma", e))?;

    // Held-out measurement clicks for ground truth.
    let click_cfg = ClickModelConfig {
        eta: cfg.click_eta,
        eps_plus: cfg.click_eps_plus,
        eps_minus: cfg.click_eps_minus,
        seed: stage_seeds["clicks-msmt"],
    };
    let labels: HashMap<&QueryId, HashMap<DocId, u8>> = btest
        .queries
        .iter()
        .map(|q| {
            (
                &q.id,
                q.docs
                    .iter()
                    .map(|d| (d.id, u8::from(d.label > 0)))
                    .collect(),
            )
        })
        .collect();
    let mut msmt_rng = ChaCha8Rng::seed_from_u64(click_cfg.seed);
    let mut msmt_clicks = Vec::with_capacity(measurement.impressions.len());
    for imp in &measurement.impressions {
        let per_doc = &labels[&imp.query];
        let doc_labels: Vec<u8> = imp.docs.iter().map(|d| per_doc[d]).collect();
        msmt_clicks.push(
            simulate_clicks(imp, &doc_labels, &click_cfg, &mut msmt_rng)
                .map_err(|e| stage_err("clicks-msmt", e))?,
        );
    }
    let measurement = MeasurementSet::with_clicks(measurement.impressions, msmt_clicks);

    // Propensity sources shared across metrics.
    let table = empirical_propensities(&logged);
    let needs_parametric = cfg.estimators.iter().any(|e| {
        matches!(
            e,
            EstimatorKind::ImitationIpw | EstimatorKind::ImitationIpwTruncated
        )
    });
    let parametric = if needs_parametric {
        Some(
            ParametricPropensities::compute(&measurement.impressions, score_fn, sigma)
                .map_err(|e| stage_err("propensities", e))?,
        )
    } else {
        None
    };

    let mut ground_truth = BTreeMap::new();
    let mut estimates = BTreeMap::new();
    for metric in &cfg.metrics {
        let kind = match metric {
            MetricName::NoC => MetricKind::NoC,
            MetricName::Mrr => MetricKind::Mrr {
                normalize: cfg.mrr_normalize,
            },
        };
        let gt = ground_truth_value(&measurement, kind).map_err(|e| stage_err("ground-truth", e))?;
        ground_truth.insert(metric.label().to_string(), gt);

        let mut per_estimator = BTreeMap::new();
        for est in &cfg.estimators {
            let report = match est {
                EstimatorKind::Naive => estimate_naive(&logged, &measurement, kind),
                EstimatorKind::ListIpw => estimate_list_ipw(&logged, &measurement, kind),
                EstimatorKind::EmpiricalIpw => estimate_item_ipw(
                    &logged,
                    &measurement,
                    PropensitySource::Empirical(&table),
                    kind,
                    f64::INFINITY,
                )
                .map_err(|e| stage_err("estimate-ep", e))?,
                EstimatorKind::ImitationIpw => estimate_item_ipw(
                    &logged,
                    &measurement,
                    PropensitySource::Parametric(parametric.as_ref().expect("computed above")),
                    kind,
                    f64::INFINITY,
                )
                .map_err(|e| stage_err("estimate-ir", e))?,
                EstimatorKind::ImitationIpwTruncated => estimate_item_ipw(
                    &logged,
                    &measurement,
                    PropensitySource::Parametric(parametric.as_ref().expect("computed above")),
                    kind,
                    cfg.truncation_m,
                )
                .map_err(|e| stage_err("estimate-ir-t", e))?,
            };
            per_estimator.insert(est.label().to_string(), report);
        }
        estimates.insert(metric.label().to_string(), per_estimator);
    }

    Ok(RunResult {
        run_index,
        run_seed,
        stage_seeds,
        ranker_diff,
        training,
        sigma,
        sigma_log_likelihood: log_likelihood,
        ground_truth,
        estimates,
    })
}

/// Aggregated outputs of all runs of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub runs: Vec<RunResult>,
    /// Metric label -> mean ground truth across runs.
    pub mean_ground_truth: BTreeMap<String, f64>,
    /// Metric label -> estimator label -> mean value across runs.
    pub mean_estimates: BTreeMap<String, BTreeMap<String, f64>>,
    pub mean_sigma: f64,
    pub mean_swap_percent: f64,
    pub mean_validation_tau: f64,
    pub mean_ranker_diff: RankerDiffReport,
}

/// Runs the full pipeline `cfg.runs` times with per-run seed streams and
/// aggregates the results. Runs execute in parallel on a pool sized by
/// `cfg.threads` (0 = all cores); per-run seeding keeps results identical
/// across thread counts.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<ExperimentResult, PipelineError> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| stage_err("thread-pool", e))?;
    let outcomes: Vec<Result<RunResult, PipelineError>> = pool.install(|| {
        (0..cfg.runs)
            .into_par_iter()
            .map(|r| run_once(cfg, &data, r))
            .collect()
    });

    let mut runs = Vec::with_capacity(cfg.runs);
    for outcome in outcomes {
        runs.push(outcome?);
    }

    let n = runs.len() as f64;
    let mut mean_ground_truth = BTreeMap::new();
    let mut mean_estimates: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for metric in &cfg.metrics {
        let label = metric.label().to_string();
        let gt = runs.iter().map(|r| r.ground_truth[&label]).sum::<f64>() / n;
        mean_ground_truth.insert(label.clone(), gt);
        let mut per_est = BTreeMap::new();
        for est in &cfg.estimators {
            let est_label = est.label().to_string();
            let mean = runs
                .iter()
                .map(|r| r.estimates[&label][&est_label].value)
                .sum::<f64>()
                / n;
            per_est.insert(est_label, mean);
        }
        mean_estimates.insert(label, per_est);
    }

    let mean_sigma = runs.iter().map(|r| r.sigma).sum::<f64>() / n;
    let mean_swap_percent = runs.iter().map(|r| r.training.swap_percent).sum::<f64>() / n;
    let mean_validation_tau = runs
        .iter()
        .map(|r| r.training.validation_tau.unwrap_or(0.0))
        .sum::<f64>()
        / n;
    let mean_ranker_diff = RankerDiffReport {
        rmse: runs.iter().map(|r| r.ranker_diff.rmse).sum::<f64>() / n,
        mae: runs.iter().map(|r| r.ranker_diff.mae).sum::<f64>() / n,
        kendall_tau: runs.iter().map(|r| r.ranker_diff.kendall_tau).sum::<f64>() / n,
    };

    Ok(ExperimentResult {
        runs,
        mean_ground_truth,
        mean_estimates,
        mean_sigma,
        mean_swap_percent,
        mean_validation_tau,
        mean_ranker_diff,
    })
}

/// The evaluate command's CSV: one row per metric, mean values over runs,
/// estimator columns in the configured order.
pub fn evaluate_csv(cfg: &ExperimentConfig, result: &ExperimentResult) -> String {
    let mut out = String::from("metric,GT");
    for est in &cfg.estimators {
        out.push(',');
        out.push_str(est.label());
    }
    out.push('\n');
    for metric in &cfg.metrics {
        let label = metric.label();
        out.push_str(label);
        out.push_str(&format!(",{:.6}", result.mean_ground_truth[label]));
        for est in &cfg.estimators {
            out.push_str(&format!(",{:.6}", result.mean_estimates[label][est.label()]));
        }
        out.push('\n');
    }
    out
}

/// The versioned JSON manifest written next to every CSV output.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<T: Serialize> {
    pub schema_version: String,
    pub config: BTreeMap<String, String>,
    pub result: T,
}

impl<T: Serialize> Manifest<T> {
    pub fn new(cfg: &ExperimentConfig, result: T) -> Self {
        Manifest {
            schema_version: MANIFEST_SCHEMA_VERSION.to_string(),
            config: cfg.resolved_entries(),
            result,
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        text
    }
}
