//! Effective configuration: built-in defaults, overlaid by an optional flat
//! JSON file, overlaid by command-line flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use trendgram::pipeline::{PipelineConfig, SelectionScope};
use trendgram::select::FeatureMode;

use crate::CliError;

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Counts,
    Binary,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScopeArg {
    #[value(alias = "per_fold")]
    PerFold,
    Global,
}

/// Flags mirroring every `PipelineConfig` field. Unset flags leave the file
/// or default value in place. Boolean flags accept `--flag`, `--flag true`
/// and `--flag false`.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// Flat JSON config file; flags given on the command line win over it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Years per entity window, ending the year before the anchor [default: 10].
    #[arg(long)]
    pub window_length: Option<usize>,
    /// Anchor year for FALSE rows with an empty anchor_year.
    #[arg(long)]
    pub false_anchor: Option<i32>,
    /// Scaled change above which a step reads U (below its negative, D) [default: 30].
    #[arg(long)]
    pub big_threshold: Option<f64>,
    /// Scaled change above which a step reads u (below its negative, d) [default: 5].
    #[arg(long)]
    pub small_threshold: Option<f64>,
    /// Shortest gram length [default: 1].
    #[arg(long)]
    pub k_min: Option<usize>,
    /// Longest gram length [default: 4].
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Keep single-metric grams as features alongside combined ones [default: true].
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub include_singles: Option<bool>,
    /// Patterns kept per entity [default: 10].
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Pattern feature values: occurrence counts or presence [default: counts].
    #[arg(long, value_enum)]
    pub feature_mode: Option<ModeArg>,
    /// Add selected pattern features to the quantity features [default: true].
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub with_patterns: Option<bool>,
    /// Shorthand for `--with-patterns false` (quantity features only).
    #[arg(long, conflicts_with = "with_patterns")]
    pub no_patterns: bool,
    /// Select patterns on each training fold or once on all entities (leaky) [default: per-fold].
    #[arg(long, value_enum)]
    pub selection_scope: Option<ScopeArg>,
    /// Cross-validation folds [default: 10].
    #[arg(long)]
    pub folds: Option<usize>,
    /// Keep class proportions in every fold [default: true].
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub stratified: Option<bool>,
    /// Seed for fold assignment [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Minimum rows in each child of a split [default: 2].
    #[arg(long)]
    pub min_leaf: Option<usize>,
    /// Confidence for pessimistic pruning [default: 0.25].
    #[arg(long)]
    pub pruning_confidence: Option<f64>,
    /// Maximum tree depth [default: unlimited].
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Prune the grown tree [default: true].
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub prune: Option<bool>,
    /// Apply the Yates continuity correction to the chi-squared test [default: false].
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub yates: Option<bool>,
}

fn load_file(path: &Path) -> Result<PipelineConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => load_file(path)?,
            None => PipelineConfig::default(),
        };
        macro_rules! overlay {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { c.$field = v; })*
            };
        }
        overlay!(
            window_length,
            false_anchor,
            big_threshold,
            small_threshold,
            k_min,
            k_max,
            include_singles,
            top_k,
            with_patterns,
            folds,
            stratified,
            seed,
            min_leaf,
            pruning_confidence,
            prune,
            yates
        );
        if self.max_depth.is_some() {
            c.max_depth = self.max_depth;
        }
        if self.no_patterns {
            c.with_patterns = false;
        }
        if let Some(m) = self.feature_mode {
            c.feature_mode = match m {
                ModeArg::Counts => FeatureMode::Counts,
                ModeArg::Binary => FeatureMode::Binary,
            };
        }
        if let Some(s) = self.selection_scope {
            c.selection_scope = match s {
                ScopeArg::PerFold => SelectionScope::PerFold,
                ScopeArg::Global => SelectionScope::Global,
            };
        }
        c.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(c)
    }
}
