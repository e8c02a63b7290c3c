//! Axis sweeps: repeat the experiment across a list of values for one
//! configuration axis and tabulate the mean results as CSV. A failing cell
//! is recorded and marked rather than aborting the sweep.

use serde::Serialize;

use super::config::ExperimentConfig;
use super::pipeline::{run_pipeline, ExperimentResult, PipelineError};

/// Sweepable axes and the config keys they set.
const AXES: [(&str, &str); 8] = [
    ("t_pi", "ranker.t_pi"),
    ("c", "ranker.c"),
    ("eta", "click.eta"),
    ("eps_minus", "click.eps_minus"),
    ("b", "swap.b"),
    ("size", "imitation.size"),
    ("epochs", "imitation.epochs"),
    ("objective", "imitation.objective"),
];

fn axis_key(axis: &str) -> Option<&'static str> {
    AXES.iter()
        .find(|(name, _)| *name == axis)
        .map(|(_, key)| *key)
}

/// One axis value's outcome.
#[derive(Debug, Clone, Serialize)]
pub struct SweepCell {
    pub value: String,
    pub result: Option<ExperimentResult>,
    pub error: Option<String>,
}

/// A completed sweep over one axis.
#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub axis: String,
    pub cells: Vec<SweepCell>,
}

/// Runs the pipeline once per axis value. Cell errors are captured in the
/// row; config-level errors (unknown axis, empty values) abort.
pub fn sweep(
    base: &ExperimentConfig,
    axis: &str,
    values: &[String],
) -> Result<SweepResult, PipelineError> {
    let key = axis_key(axis).ok_or_else(|| {
        PipelineError::Config(format!(
            "unknown sweep axis '{axis}' (expected one of {})",
            AXES.map(|(name, _)| name).join(", ")
        ))
    })?;
    if values.is_empty() {
        return Err(PipelineError::Config("sweep needs at least one value".into()));
    }

    let mut cells = Vec::with_capacity(values.len());
    for value in values {
        let mut cfg = base.clone();
        cfg.set(key, value)?;
        match run_pipeline(&cfg) {
            Ok(result) => cells.push(SweepCell {
                value: value.clone(),
                result: Some(result),
                error: None,
            }),
            Err(err) => cells.push(SweepCell {
                value: value.clone(),
                result: None,
                error: Some(err.to_string()),
            }),
        }
    }
    Ok(SweepResult {
        axis: axis.to_string(),
        cells,
    })
}

/// CSV table: one row per axis value, `metric.estimator` mean columns, and a
/// trailing status column (`ok` or the failed stage).
pub fn sweep_csv(cfg: &ExperimentConfig, result: &SweepResult) -> String {
    let mut out = String::new();
    out.push_str(&result.axis);
    for metric in &cfg.metrics {
        out.push_str(&format!(",{}.GT", metric.label()));
        for est in &cfg.estimators {
            out.push_str(&format!(",{}.{}", metric.label(), est.label()));
        }
    }
    out.push_str(",status\n");

    for cell in &result.cells {
        out.push_str(&cell.value);
        match &cell.result {
            Some(res) => {
                for metric in &cfg.metrics {
                    let label = metric.label();
                    out.push_str(&format!(",{:.6}", res.mean_ground_truth[label]));
                    for est in &cfg.estimators {
                        out.push_str(&format!(",{:.6}", res.mean_estimates[label][est.label()]));
                    }
                }
                out.push_str(",ok\n");
            }
            None => {
                for metric in &cfg.metrics {
                    out.push_str(",nan");
                    for _ in &cfg.estimators {
                        out.push_str(",nan");
                    }
                    let _ = metric;
                }
                let reason = cell
                    .error
                    .clone()
                    .unwrap_or_else(|| "unknown".into())
                    .replace([',', '\n'], ";");
                out.push_str(&format!(",failed: {reason}\n"));
            }
        }
    }
    out
}
