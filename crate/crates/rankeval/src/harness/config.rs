//! Experiment configuration: a flat key-value text format with dotted keys
//! (`click.eta=0.0`). Unknown keys are errors; `--set key=value` overrides
//! reuse the same setter.

use std::collections::BTreeMap;

use crate::imitation::{ModelSize, Objective};

use super::PipelineError;

/// Where the labeled pool comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSource {
    Synthetic,
    Letor,
}

/// Estimators the pipeline can report, in canonical output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Naive,
    ListIpw,
    EmpiricalIpw,
    ImitationIpw,
    ImitationIpwTruncated,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::Naive,
        EstimatorKind::ListIpw,
        EstimatorKind::EmpiricalIpw,
        EstimatorKind::ImitationIpw,
        EstimatorKind::ImitationIpwTruncated,
    ];

    /// Column label, matching the usual result-table naming.
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::Naive => "Naive",
            EstimatorKind::ListIpw => "List",
            EstimatorKind::EmpiricalIpw => "EP",
            EstimatorKind::ImitationIpw => "IR",
            EstimatorKind::ImitationIpwTruncated => "IR(T)",
        }
    }

    fn config_name(&self) -> &'static str {
        match self {
            EstimatorKind::Naive => "naive",
            EstimatorKind::ListIpw => "list",
            EstimatorKind::EmpiricalIpw => "ep",
            EstimatorKind::ImitationIpw => "ir",
            EstimatorKind::ImitationIpwTruncated => "ir_t",
        }
    }

    fn parse(name: &str) -> Option<EstimatorKind> {
        Self::ALL
            .iter()
            .copied()
            .find(|e| e.config_name() == name.trim().to_ascii_lowercase())
    }
}

/// Metrics the pipeline can report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricName {
    NoC,
    Mrr,
}

impl MetricName {
    pub fn label(&self) -> &'static str {
        match self {
            MetricName::NoC => "NoC",
            MetricName::Mrr => "MRR",
        }
    }
}

/// Full experiment configuration with desk-scale defaults. Field groups
/// mirror the pipeline stages.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data_source: DataSource,
    pub letor_path: String,

    pub synthetic_num_queries: usize,
    pub synthetic_candidates_per_query: usize,
    pub synthetic_feature_dim: usize,
    pub synthetic_hidden_dim: usize,
    pub synthetic_relevance_noise: f64,

    pub split_train: f64,
    pub split_validate: f64,
    pub split_test: f64,

    pub label_threshold: i32,
    pub k: usize,

    pub ranker_c: f64,
    pub ranker_t_pi: f64,
    pub ranker_t_mu: f64,
    pub ranker_epochs: usize,
    pub ranker_learning_rate: f64,

    pub observation_count: usize,

    pub click_eta: f64,
    pub click_eps_plus: f64,
    pub click_eps_minus: f64,

    pub swap_b: f64,

    pub imitation_objective: Objective,
    pub imitation_size: ModelSize,
    pub imitation_epochs: usize,
    pub imitation_learning_rate: f64,
    pub imitation_batch_size: usize,

    pub truncation_m: f64,
    pub sigma_log_lo: f64,
    pub sigma_log_hi: f64,

    pub estimators: Vec<EstimatorKind>,
    pub metrics: Vec<MetricName>,
    pub mrr_normalize: bool,

    pub runs: usize,
    pub master_seed: u64,
    pub threads: usize,

    pub sweep_axis: Option<String>,
    pub sweep_values: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data_source: DataSource::Synthetic,
            letor_path: String::new(),
            synthetic_num_queries: 500,
            synthetic_candidates_per_query: 15,
            synthetic_feature_dim: 20,
            synthetic_hidden_dim: 0,
            synthetic_relevance_noise: 0.1,
            split_train: 0.5,
            split_validate: 0.1,
            split_test: 0.4,
            label_threshold: 3,
            k: 10,
            ranker_c: 0.1,
            ranker_t_pi: 0.5,
            ranker_t_mu: 0.5,
            ranker_epochs: 200,
            ranker_learning_rate: 0.5,
            observation_count: 2000,
            click_eta: 0.0,
            click_eps_plus: 1.0,
            click_eps_minus: 0.1,
            swap_b: 0.0,
            imitation_objective: Objective::Pairwise,
            imitation_size: ModelSize::Medium,
            imitation_epochs: 100,
            imitation_learning_rate: 0.01,
            imitation_batch_size: 50,
            truncation_m: 100.0,
            sigma_log_lo: -10.0,
            sigma_log_hi: 3.0,
            estimators: EstimatorKind::ALL.to_vec(),
            metrics: vec![MetricName::NoC, MetricName::Mrr],
            mrr_normalize: true,
            runs: 5,
            master_seed: 17,
            threads: 0,
            sweep_axis: None,
            sweep_values: Vec::new(),
        }
    }
}

fn bad_value(key: &str, value: &str) -> PipelineError {
    PipelineError::Config(format!("bad value '{value}' for key '{key}'"))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, PipelineError> {
    value.trim().parse::<T>().map_err(|_| bad_value(key, value))
}

impl ExperimentConfig {
    /// Applies one `key=value` assignment. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), PipelineError> {
        let v = value.trim();
        match key.trim() {
            "data.source" => {
                self.data_source = match v.to_ascii_lowercase().as_str() {
                    "synthetic" => DataSource::Synthetic,
                    "letor" => DataSource::Letor,
                    _ => return Err(bad_value(key, value)),
                }
            }
            "data.letor_path" => self.letor_path = v.to_string(),
            "synthetic.num_queries" => self.synthetic_num_queries = parse_num(key, v)?,
            "synthetic.candidates_per_query" => {
                self.synthetic_candidates_per_query = parse_num(key, v)?
            }
            "synthetic.feature_dim" => self.synthetic_feature_dim = parse_num(key, v)?,
            "synthetic.hidden_dim" => self.synthetic_hidden_dim = parse_num(key, v)?,
            "synthetic.relevance_noise" => self.synthetic_relevance_noise = parse_num(key, v)?,
            "split.train" => self.split_train = parse_num(key, v)?,
            "split.validate" => self.split_validate = parse_num(key, v)?,
            "split.test" => self.split_test = parse_num(key, v)?,
            "label.threshold" => self.label_threshold = parse_num(key, v)?,
            "k" => self.k = parse_num(key, v)?,
            "ranker.c" => self.ranker_c = parse_num(key, v)?,
            "ranker.t_pi" => self.ranker_t_pi = parse_num(key, v)?,
            "ranker.t_mu" => self.ranker_t_mu = parse_num(key, v)?,
            "ranker.epochs" => self.ranker_epochs = parse_num(key, v)?,
            "ranker.learning_rate" => self.ranker_learning_rate = parse_num(key, v)?,
            "observation.count" => self.observation_count = parse_num(key, v)?,
            "click.eta" => self.click_eta = parse_num(key, v)?,
            "click.eps_plus" => self.click_eps_plus = parse_num(key, v)?,
            "click.eps_minus" => self.click_eps_minus = parse_num(key, v)?,
            "swap.b" => self.swap_b = parse_num(key, v)?,
            "imitation.objective" => {
                self.imitation_objective = match v.to_ascii_lowercase().as_str() {
                    "pairwise" => Objective::Pairwise,
                    "listmle" => Objective::ListMle,
                    _ => return Err(bad_value(key, value)),
                }
            }
            "imitation.size" => {
                self.imitation_size = match v.to_ascii_lowercase().as_str() {
                    "small" => ModelSize::Small,
                    "medium" => ModelSize::Medium,
                    "big" => ModelSize::Big,
                    _ => return Err(bad_value(key, value)),
                }
            }
            "imitation.epochs" => self.imitation_epochs = parse_num(key, v)?,
            "imitation.learning_rate" => self.imitation_learning_rate = parse_num(key, v)?,
            "imitation.batch_size" => self.imitation_batch_size = parse_num(key, v)?,
            "truncation.m" => {
                self.truncation_m = match v.to_ascii_lowercase().as_str() {
                    "inf" | "infinity" => f64::INFINITY,
                    _ => parse_num(key, v)?,
                }
            }
            "sigma.log_lo" => self.sigma_log_lo = parse_num(key, v)?,
            "sigma.log_hi" => self.sigma_log_hi = parse_num(key, v)?,
            "estimators" => {
                let parsed: Option<Vec<EstimatorKind>> =
                    v.split(',').map(EstimatorKind::parse).collect();
                let parsed = parsed.ok_or_else(|| bad_value(key, value))?;
                if parsed.is_empty() {
                    return Err(bad_value(key, value));
                }
                self.estimators = parsed;
            }
            "metrics" => {
                let mut metrics = Vec::new();
                for name in v.split(',') {
                    match name.trim().to_ascii_lowercase().as_str() {
                        "noc" => metrics.push(MetricName::NoC),
                        "mrr" => metrics.push(MetricName::Mrr),
                        _ => return Err(bad_value(key, value)),
                    }
                }
                if metrics.is_empty() {
                    return Err(bad_value(key, value));
                }
                self.metrics = metrics;
            }
            "mrr.normalize" => self.mrr_normalize = parse_num(key, v)?,
            "runs" => self.runs = parse_num(key, v)?,
            "master_seed" => self.master_seed = parse_num(key, v)?,
            "threads" => self.threads = parse_num(key, v)?,
            "sweep.axis" => {
                self.sweep_axis = if v.is_empty() { None } else { Some(v.to_string()) }
            }
            "sweep.values" => {
                self.sweep_values = if v.is_empty() {
                    Vec::new()
                } else {
                    v.split(',').map(|s| s.trim().to_string()).collect()
                }
            }
            other => {
                return Err(PipelineError::Config(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }

    /// Parses the flat key-value text format. Lines are `key=value`; blank
    /// lines and `#` comments are skipped.
    pub fn from_text(text: &str) -> Result<ExperimentConfig, PipelineError> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Applies assignments from config text on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<(), PipelineError> {
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                PipelineError::Config(format!("line {}: expected key=value", line_no + 1))
            })?;
            self.set(key, value)?;
        }
        Ok(())
    }

    /// Sanity checks beyond per-key parsing.
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.runs == 0 {
            return Err(PipelineError::Config("runs must be >= 1".into()));
        }
        if self.k == 0 {
            return Err(PipelineError::Config("k must be >= 1".into()));
        }
        if self.data_source == DataSource::Letor && self.letor_path.is_empty() {
            return Err(PipelineError::Config(
                "data.letor_path required when data.source=letor".into(),
            ));
        }
        if self.data_source == DataSource::Synthetic
            && self.synthetic_candidates_per_query < self.k
        {
            return Err(PipelineError::Config(
                "synthetic.candidates_per_query must be >= k".into(),
            ));
        }
        if self.sigma_log_lo >= self.sigma_log_hi {
            return Err(PipelineError::Config(
                "sigma.log_lo must be below sigma.log_hi".into(),
            ));
        }
        Ok(())
    }

    /// Every key with its resolved value, for embedding in the manifest and
    /// for byte-stable re-serialization.
    pub fn resolved_entries(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        put(
            "data.source",
            match self.data_source {
                DataSource::Synthetic => "synthetic".into(),
                DataSource::Letor => "letor".into(),
            },
        );
        put("data.letor_path", self.letor_path.clone());
        put("synthetic.num_queries", self.synthetic_num_queries.to_string());
        put(
            "synthetic.candidates_per_query",
            self.synthetic_candidates_per_query.to_string(),
        );
        put("synthetic.feature_dim", self.synthetic_feature_dim.to_string());
        put("synthetic.hidden_dim", self.synthetic_hidden_dim.to_string());
        put(
            "synthetic.relevance_noise",
            self.synthetic_relevance_noise.to_string(),
        );
        put("split.train", self.split_train.to_string());
        put("split.validate", self.split_validate.to_string());
        put("split.test", self.split_test.to_string());
        put("label.threshold", self.label_threshold.to_string());
        put("k", self.k.to_string());
        put("ranker.c", self.ranker_c.to_string());
        put("ranker.t_pi", self.ranker_t_pi.to_string());
        put("ranker.t_mu", self.ranker_t_mu.to_string());
        put("ranker.epochs", self.ranker_epochs.to_string());
        put("ranker.learning_rate", self.ranker_learning_rate.to_string());
        put("observation.count", self.observation_count.to_string());
        put("click.eta", self.click_eta.to_string());
        put("click.eps_plus", self.click_eps_plus.to_string());
        put("click.eps_minus", self.click_eps_minus.to_string());
        put("swap.b", self.swap_b.to_string());
        put(
            "imitation.objective",
            match self.imitation_objective {
                Objective::Pairwise => "pairwise".into(),
                Objective::ListMle => "listmle".into(),
            },
        );
        put(
            "imitation.size",
            match self.imitation_size {
                ModelSize::Small => "small".into(),
                ModelSize::Medium => "medium".into(),
                ModelSize::Big => "big".into(),
            },
        );
        put("imitation.epochs", self.imitation_epochs.to_string());
        put(
            "imitation.learning_rate",
            self.imitation_learning_rate.to_string(),
        );
        put("imitation.batch_size", self.imitation_batch_size.to_string());
        put("truncation.m", self.truncation_m.to_string());
        put("sigma.log_lo", self.sigma_log_lo.to_string());
        put("sigma.log_hi", self.sigma_log_hi.to_string());
        put(
            "estimators",
            self.estimators
                .iter()
                .map(|e| e.config_name())
                .collect::<Vec<_>>()
                .join(","),
        );
        put(
            "metrics",
            self.metrics
                .iter()
                .map(|m| match m {
                    MetricName::NoC => "noc",
                    MetricName::Mrr => "mrr",
                })
                .collect::<Vec<_>>()
                .join(","),
        );
        put("mrr.normalize", self.mrr_normalize.to_string());
        put("runs", self.runs.to_string());
        put("master_seed", self.master_seed.to_string());
        put("threads", self.threads.to_string());
        put("sweep.axis", self.sweep_axis.clone().unwrap_or_default());
        put("sweep.values", self.sweep_values.join(","));
        map
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_dotted_keys_and_comments() {
        let cfg = ExperimentConfig::from_text(
            "# experiment\nclick.eta=1.5\nswap.b=25 # brackets\n\nk=5\n",
        )
        .unwrap();
        assert_eq!(cfg.click_eta, 1.5);
        assert_eq!(cfg.swap_b, 25.0);
        assert_eq!(cfg.k, 5);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = ExperimentConfig::from_text("clicks.eta=1.0").unwrap_err();
        assert!(err.to_string().contains("unknown config key"));
    }

    #[test]
    fn bad_value_is_an_error() {
        assert!(ExperimentConfig::from_text("k=abc").is_err());
        assert!(ExperimentConfig::from_text("imitation.size=huge").is_err());
    }

    #[test]
    fn truncation_accepts_inf() {
        let cfg = ExperimentConfig::from_text("truncation.m=inf").unwrap();
        assert!(cfg.truncation_m.is_infinite());
    }

    #[test]
    fn estimator_list_parses_in_order() {
        let cfg = ExperimentConfig::from_text("estimators=ep,ir_t").unwrap();
        assert_eq!(
            cfg.estimators,
            vec![EstimatorKind::EmpiricalIpw, EstimatorKind::ImitationIpwTruncated]
        );
    }

    #[test]
    fn resolved_entries_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("click.eta", "0.5").unwrap();
        cfg.set("imitation.objective", "listmle").unwrap();
        let entries = cfg.resolved_entries();
        let mut rebuilt = ExperimentConfig::default();
        for (k, v) in &entries {
            rebuilt.set(k, v).unwrap();
        }
        assert_eq!(rebuilt, cfg);
    }

    #[test]
    fn validate_catches_cross_field_problems() {
        let mut cfg = ExperimentConfig::default();
        cfg.k = 50; // more than candidates_per_query
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.data_source = DataSource::Letor;
        assert!(cfg.validate().is_err());
    }
}
