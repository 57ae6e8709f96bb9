//! Subcommand bodies. Each reads its inputs, runs the library and writes
//! its outputs under the directory given by `--out`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use trendgram::classify::train;
use trendgram::ingest::{
    build_cohort, load_labels, load_observations, write_labels, write_observations, Cohort,
    IngestError,
};
use trendgram::pipeline::{
    feature_file, featurize as featurize_cohort, run_experiment_with, FeatureFile, Featurized,
    PipelineConfig, PipelineError,
};
use trendgram::select::FeatureSpace;
use trendgram::synth::{generate_cohort, PlantSpec};
use trendgram::{Label, MetricId};

use crate::{CliError, DataArgs};

fn ingest_error(path: &Path, e: IngestError) -> CliError {
    match e {
        IngestError::Io { .. } => CliError::Data(e.to_string()),
        other => CliError::Data(format!("{}: {other}", path.display())),
    }
}

fn pipeline_error(e: PipelineError) -> CliError {
    match e {
        PipelineError::Config(_) => CliError::Config(e.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

fn load_cohort(data: &DataArgs, config: &PipelineConfig) -> Result<Cohort, CliError> {
    let obs =
        load_observations(&data.observations).map_err(|e| ingest_error(&data.observations, e))?;
    let labels = load_labels(&data.labels, config.false_anchor)
        .map_err(|e| ingest_error(&data.labels, e))?;
    let cohort = build_cohort(&obs, &labels, config.window_length)
        .map_err(|e| CliError::Data(e.to_string()))?;
    if cohort.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no labeled entity has observations",
            data.labels.display()
        )));
    }
    if cohort.skipped_unlabeled > 0 {
        eprintln!(
            "warning: skipped {} entities with observations but no label",
            cohort.skipped_unlabeled
        );
    }
    Ok(cohort)
}

fn prepare(data: &DataArgs, config: &PipelineConfig) -> Result<Featurized, CliError> {
    featurize_cohort(load_cohort(data, config)?, config).map_err(pipeline_error)
}

fn create_dir(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))
}

fn write_text(path: PathBuf, text: &str) -> Result<(), CliError> {
    fs::write(&path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: PathBuf, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("outputs serialize");
    text.push('\n');
    write_text(path, &text)
}

/// Either a full features.json or a bare feature-space document.
#[derive(Deserialize)]
#[serde(untagged)]
enum SpaceSource {
    File(Box<FeatureFile>),
    Space(FeatureSpace),
}

fn read_space(path: &Path) -> Result<FeatureSpace, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(SpaceSource::File(f)) => Ok(f.feature_space),
        Ok(SpaceSource::Space(s)) => Ok(s),
        Err(e) => Err(CliError::Data(format!(
            "{}: not a features.json or feature space: {e}",
            path.display()
        ))),
    }
}

pub fn validate(data: &DataArgs, config: &PipelineConfig) -> Result<(), CliError> {
    let cohort = load_cohort(data, config)?;
    let n_true = cohort
        .entities
        .iter()
        .filter(|e| e.label == Label::True)
        .count();
    let first = cohort
        .entities
        .iter()
        .map(|e| e.anchor_year)
        .min()
        .unwrap_or_default();
    let last = cohort
        .entities
        .iter()
        .map(|e| e.anchor_year)
        .max()
        .unwrap_or_default();
    println!(
        "entities: {} ({} TRUE, {} FALSE)",
        cohort.len(),
        n_true,
        cohort.len() - n_true
    );
    println!("window: {} years", cohort.window_length);
    println!("anchor years: {first}..={last}");
    println!("skipped unlabeled: {}", cohort.skipped_unlabeled);
    println!("ok");
    Ok(())
}

fn featurize_to(
    data: &Featurized,
    config: &PipelineConfig,
    space: Option<FeatureSpace>,
    out: &Path,
) -> Result<FeatureFile, CliError> {
    let file = feature_file(data, config, space).map_err(pipeline_error)?;
    write_json(out.join("features.json"), &file)?;
    Ok(file)
}

pub fn featurize(
    data: &DataArgs,
    config: &PipelineConfig,
    space: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let space = space.map(read_space).transpose()?;
    let prepared = prepare(data, config)?;
    create_dir(out)?;
    featurize_to(&prepared, config, space, out).map(|_| ())
}

fn evaluate_to(
    data: &Featurized,
    config: &PipelineConfig,
    space: Option<&FeatureSpace>,
    out: &Path,
) -> Result<(), CliError> {
    let experiment = run_experiment_with(data, config, space).map_err(pipeline_error)?;
    let report = experiment.report(config);
    write_json(out.join("report.json"), &report)?;
    write_text(out.join("report.md"), &report.to_markdown())
}

pub fn evaluate(
    data: &DataArgs,
    config: &PipelineConfig,
    space: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let space = space.map(read_space).transpose()?;
    let prepared = prepare(data, config)?;
    create_dir(out)?;
    evaluate_to(&prepared, config, space.as_ref(), out)
}

pub fn pipeline(data: &DataArgs, config: &PipelineConfig, out: &Path) -> Result<(), CliError> {
    let prepared = prepare(data, config)?;
    create_dir(out)?;
    let file = featurize_to(&prepared, config, None, out)?;
    let tree =
        train(&file.matrix, &config.tree_params()).map_err(|e| CliError::Data(e.to_string()))?;
    write_json(
        out.join("tree.json"),
        &tree.to_named_json(&file.matrix.columns),
    )?;
    evaluate_to(&prepared, config, None, out)
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Number of TRUE entities.
    #[arg(long, default_value_t = 40)]
    pub n_true: usize,
    /// Number of FALSE entities.
    #[arg(long, default_value_t = 40)]
    pub n_false: usize,
    /// Years of observations per entity.
    #[arg(long, default_value_t = 10)]
    pub window_length: usize,
    /// Metric that receives the planted shape.
    #[arg(long, default_value = "international_papers")]
    pub metric: MetricId,
    /// Symbols to plant in TRUE entities, from U, u, S, d, D.
    #[arg(long, default_value = "Uu")]
    pub shape: String,
    /// Symbols between the end of the plant and the end of the window.
    #[arg(long, default_value_t = 3)]
    pub years_before_anchor: usize,
    /// Probability that each planted transition is left unplanted.
    #[arg(long, default_value_t = 0.2)]
    pub noise: f64,
    /// Seed for the generator; equal seeds give identical files.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let spec = PlantSpec {
        metric: args.metric,
        shape: args.shape.clone(),
        years_before_anchor: args.years_before_anchor,
        noise: args.noise,
    };
    let cohort = generate_cohort(
        args.n_true,
        args.n_false,
        args.window_length,
        &spec,
        args.seed,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;
    create_dir(&args.out)?;
    let obs_path = args.out.join("observations.csv");
    let labels_path = args.out.join("labels.csv");
    let fail =
        |path: &Path, e: &dyn std::fmt::Display| CliError::Data(format!("{}: {e}", path.display()));
    let obs = fs::File::create(&obs_path).map_err(|e| fail(&obs_path, &e))?;
    write_observations(&cohort, obs).map_err(|e| fail(&obs_path, &e))?;
    let labels = fs::File::create(&labels_path).map_err(|e| fail(&labels_path, &e))?;
    write_labels(&cohort, labels).map_err(|e| fail(&labels_path, &e))?;
    println!("wrote {} entities to {}", cohort.len(), args.out.display());
    Ok(())
}
