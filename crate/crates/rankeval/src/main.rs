//! Command-line harness for the offline evaluation pipeline. Subcommands
//! mirror the pipeline stages; every stage re-derives what it needs from the
//! config and the seed ladder, so artifacts are reproducible in isolation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rankeval::data::{binarize_labels, serialize_letor};
use rankeval::harness::{
    build_observation, evaluate_csv, prepare_data, run_pipeline, sweep, sweep_csv, train_rankers,
    ExperimentConfig, Manifest, PipelineError,
};
use rankeval::imitation::{
    mlp_forward, mlp_to_text, train_imitation, validation_tau, ImitationTrainConfig,
};
use rankeval::model::{validate_dataset, DocId, QueryId};
use rankeval::rankdist::infer_sigma_with_bounds;
use rankeval::rankers::ranker_to_text;

#[derive(Parser)]
#[command(
    name = "rankeval",
    about = "Counterfactual offline evaluation of ranked lists from logged clicks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic pool and write the LETOR-format splits.
    Generate(CommonArgs),
    /// Train the observation and measurement rankers and write their
    /// parameters plus a difference report.
    TrainRankers(CommonArgs),
    /// Build the logged observation set (impressions, swaps, clicks) and the
    /// measurement impressions, written as JSON lines.
    Simulate(CommonArgs),
    /// Train the imitation ranker on the logged data and write its
    /// parameters, training report, and inferred sigma.
    TrainIr(CommonArgs),
    /// Run the full pipeline and write the result CSV and JSON manifest.
    Evaluate(CommonArgs),
    /// Run the pipeline across the configured sweep axis values.
    Sweep(CommonArgs),
    /// Validate the configuration and the logged dataset it produces.
    Validate(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to a key-value config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Config overrides, e.g. --set click.eta=0.5 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig, PipelineError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            ExperimentConfig::from_text(&text)?
        }
        None => ExperimentConfig::default(),
    };
    for assignment in &args.set {
        let (key, value) = assignment.split_once('=').ok_or_else(|| {
            PipelineError::Config(format!("--set expects KEY=VALUE, got '{assignment}'"))
        })?;
        cfg.set(key, value)?;
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), PipelineError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct LoggedLine<'a> {
    query: &'a str,
    docs: Vec<u32>,
    clicks: Vec<u8>,
}

#[derive(Serialize)]
struct ImpressionLine<'a> {
    query: &'a str,
    docs: Vec<u32>,
}

fn cmd_generate(args: &CommonArgs) -> Result<(), PipelineError> {
    let cfg = load_config(args)?;
    let data = prepare_data(&cfg)?;
    for (name, pool) in [
        ("train.letor", &data.train),
        ("validate.letor", &data.validate),
        ("test.letor", &data.test),
    ] {
        let mut buf = Vec::new();
        serialize_letor(pool, &mut buf)?;
        write_file(&args.out, name, &String::from_utf8_lossy(&buf))?;
    }
    Ok(())
}

fn cmd_train_rankers(args: &CommonArgs) -> Result<(), PipelineError> {
    let cfg = load_config(args)?;
    let data = prepare_data(&cfg)?;
    let (pi, mu, diff) = train_rankers(&cfg, &data, 0)?;
    write_file(&args.out, "ranker_pi.txt", &ranker_to_text(&pi))?;
    write_file(&args.out, "ranker_mu.txt", &ranker_to_text(&mu))?;
    let csv = format!(
        "rmse,mae,kendallTau\n{:.6},{:.6},{:.6}\n",
        diff.rmse, diff.mae, diff.kendall_tau
    );
    write_file(&args.out, "ranker_diff.csv", &csv)?;
    Ok(())
}

fn cmd_simulate(args: &CommonArgs) -> Result<(), PipelineError> {
    let cfg = load_config(args)?;
    let data = prepare_data(&cfg)?;
    let (logged, measurement) = build_observation(&cfg, &data, 0)?;

    let mut lines = String::new();
    for rec in &logged.records {
        let line = LoggedLine {
            query: &rec.query.0,
            docs: rec.impression.docs.iter().map(|d| d.0).collect(),
            clicks: rec.clicks.0.clone(),
        };
        lines.push_str(&serde_json::to_string(&line).expect("serializes"));
        lines.push('\n');
    }
    write_file(&args.out, "logged.jsonl", &lines)?;

    let mut lines = String::new();
    for imp in &measurement.impressions {
        let line = ImpressionLine {
            query: &imp.query.0,
            docs: imp.docs.iter().map(|d| d.0).collect(),
        };
        lines.push_str(&serde_json::to_string(&line).expect("serializes"));
        lines.push('\n');
    }
    write_file(&args.out, "measurement.jsonl", &lines)?;
    Ok(())
}

fn cmd_train_ir(args: &CommonArgs) -> Result<(), PipelineError> {
    let cfg = load_config(args)?;
    let data = prepare_data(&cfg)?;
    let (logged, _) = build_observation(&cfg, &data, 0)?;

    let imitation_cfg = ImitationTrainConfig {
        objective: cfg.imitation_objective,
        size: cfg.imitation_size,
        epochs: cfg.imitation_epochs,
        learning_rate: cfg.imitation_learning_rate,
        batch_size_impressions: cfg.imitation_batch_size,
        seed: rankeval::harness::derive_seed(
            rankeval::harness::derive_seed(cfg.master_seed, "run0"),
            "imitation",
        ),
    };
    let (mlp, mut report) = train_imitation(&logged, &imitation_cfg)
        .map_err(|e| PipelineError::Config(format!("train-ir failed: {e}")))?;
    let bval = binarize_labels(&data.validate, cfg.label_threshold);
    report.validation_tau = validation_tau(&mlp, &bval).ok();

    let sigma = infer_sigma_with_bounds(
        &logged,
        |q: &QueryId, d: DocId| {
            logged
                .features
                .get(q, d)
                .and_then(|fv| mlp_forward(&mlp, fv).ok())
        },
        cfg.sigma_log_lo,
        cfg.sigma_log_hi,
    )
    .map_err(|e| PipelineError::Config(format!("infer-sigma failed: {e}")))?;

    write_file(&args.out, "imitation.txt", &mlp_to_text(&mlp))?;

    #[derive(Serialize)]
    struct TrainingOutput {
        loss_per_epoch: Vec<f64>,
        swap_percent: f64,
        validation_tau: Option<f64>,
        sigma: f64,
        sigma_log_likelihood: f64,
    }
    let output = TrainingOutput {
        loss_per_epoch: report.loss_per_epoch.clone(),
        swap_percent: report.swap_percent,
        validation_tau: report.validation_tau,
        sigma: sigma.sigma,
        sigma_log_likelihood: sigma.log_likelihood,
    };
    let mut json = serde_json::to_string_pretty(&output).expect("serializes");
    json.push('\n');
    write_file(&args.out, "training.json", &json)?;
    Ok(())
}

fn cmd_evaluate(args: &CommonArgs) -> Result<(), PipelineError> {
    let cfg = load_config(args)?;
    let result = run_pipeline(&cfg)?;
    write_file(&args.out, "evaluate.csv", &evaluate_csv(&cfg, &result))?;
    let manifest = Manifest::new(&cfg, &result);
    write_file(&args.out, "manifest.json", &manifest.to_json())?;
    Ok(())
}

fn cmd_sweep(args: &CommonArgs) -> Result<(), PipelineError> {
    let cfg = load_config(args)?;
    let axis = cfg
        .sweep_axis
        .clone()
        .ok_or_else(|| PipelineError::Config("sweep.axis must be set".into()))?;
    let result = sweep(&cfg, &axis, &cfg.sweep_values)?;
    write_file(&args.out, "sweep.csv", &sweep_csv(&cfg, &result))?;
    let manifest = Manifest::new(&cfg, &result);
    write_file(&args.out, "manifest.json", &manifest.to_json())?;
    Ok(())
}

fn cmd_validate(args: &CommonArgs) -> Result<(), PipelineError> {
    let cfg = load_config(args)?;
    let data = prepare_data(&cfg)?;
    let (logged, _) = build_observation(&cfg, &data, 0)?;
    let report = validate_dataset(&logged);
    if report.is_clean() {
        println!(
            "ok: {} records over {} queries, K={}",
            logged.records.len(),
            data.test.num_queries(),
            logged.k
        );
        Ok(())
    } else {
        for violation in &report.violations {
            match violation.record_index {
                Some(i) => eprintln!("record {}: {}: {}", i, violation.rule, violation.detail),
                None => eprintln!("dataset: {}: {}", violation.rule, violation.detail),
            }
        }
        Err(PipelineError::Config(format!(
            "{} validation violations",
            report.violations.len()
        )))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::TrainRankers(args) => cmd_train_rankers(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::TrainIr(args) => cmd_train_ir(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Validate(args) => cmd_validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
