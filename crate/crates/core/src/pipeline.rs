//! End-to-end orchestration: cohort -> symbols -> pattern counts ->
//! selection -> cross-validated trees -> report.
//!
//! Two configurations are evaluated on the same folds: the five quantity
//! features alone, and selected pattern features plus the quantity
//! features. Their correct/incorrect tallies are compared with a 2x2
//! chi-squared test.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{
    cross_validate, ClassifyError, CvConfig, FixedFeatures, FoldFeatures, Prediction, TreeParams,
};
use crate::eval::{chi_squared_2x2, report, ChiSquareResult, EvalError, Report, RunResult};
use crate::ingest::{Cohort, IngestError, MetricId, DEFAULT_FALSE_ANCHOR, DEFAULT_WINDOW_LENGTH};
use crate::patterns::{count_patterns, PatternConfig, PatternCounts, PatternError};
use crate::select::{
    build_matrix, score_patterns, select_top_k, FeatureMatrix, FeatureMode, FeatureSpace,
    SelectError,
};
use crate::symbolize::{symbolize_series, SymbolAlphabet, SymbolSequence, SymbolizeError};

/// Offset added to `seed` for fold assignment.
pub const CV_SEED_OFFSET: u64 = 1;

pub const BASELINE_RUN: &str = "quantity";
pub const COMBINED_RUN: &str = "time_series_and_quantity";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Symbolize(#[from] SymbolizeError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionScope {
    /// Scores and top-k are recomputed from each fold's training rows.
    #[default]
    PerFold,
    /// One selection over every entity, shared by all folds.
    Global,
}

/// Every tunable of a run. Serialized flat, with snake_case keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub window_length: usize,
    pub false_anchor: i32,
    pub big_threshold: f64,
    pub small_threshold: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub include_singles: bool,
    pub top_k: usize,
    pub feature_mode: FeatureMode,
    pub with_patterns: bool,
    pub selection_scope: SelectionScope,
    pub folds: usize,
    pub stratified: bool,
    pub seed: u64,
    pub min_leaf: usize,
    pub pruning_confidence: f64,
    pub max_depth: Option<usize>,
    pub prune: bool,
    pub yates: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window_length: DEFAULT_WINDOW_LENGTH,
            false_anchor: DEFAULT_FALSE_ANCHOR,
            big_threshold: 30.0,
            small_threshold: 5.0,
            k_min: 1,
            k_max: 4,
            include_singles: true,
            top_k: 10,
            feature_mode: FeatureMode::Counts,
            with_patterns: true,
            selection_scope: SelectionScope::PerFold,
            folds: 10,
            stratified: true,
            seed: 0,
            min_leaf: 2,
            pruning_confidence: 0.25,
            max_depth: None,
            prune: true,
            yates: false,
        }
    }
}

impl PipelineConfig {
    pub fn alphabet(&self) -> SymbolAlphabet {
        SymbolAlphabet {
            big_threshold: self.big_threshold,
            small_threshold: self.small_threshold,
        }
    }

    pub fn pattern_config(&self) -> PatternConfig {
        PatternConfig {
            k_min: self.k_min,
            k_max: self.k_max,
            include_singles: self.include_singles,
        }
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            min_leaf: self.min_leaf,
            pruning_confidence: self.pruning_confidence,
            max_depth: self.max_depth,
            prune: self.prune,
        }
    }

    pub fn cv_config(&self) -> CvConfig {
        CvConfig {
            folds: self.folds,
            stratified: self.stratified,
            seed: self.seed.wrapping_add(CV_SEED_OFFSET),
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: &str| Err(PipelineError::Config(msg.to_string()));
        if self.window_length < 2 {
            return bad("window_length must be at least 2");
        }
        if self.alphabet().validate().is_err() {
            return bad("thresholds must satisfy 0 < small_threshold < big_threshold <= 100");
        }
        if self.k_min == 0 || self.k_min > self.k_max {
            return bad("need 1 <= k_min <= k_max");
        }
        if self.top_k == 0 {
            return bad("top_k must be at least 1");
        }
        if self.folds < 2 {
            return bad("folds must be at least 2");
        }
        if let Err(e) = self.tree_params().validate() {
            return Err(PipelineError::Config(e.to_string()));
        }
        Ok(())
    }
}

/// A cohort with its symbol sequences and pattern counts, entity-aligned.
#[derive(Debug, Clone)]
pub struct Featurized {
    pub cohort: Cohort,
    pub sequences: Vec<Vec<SymbolSequence>>,
    pub counts: Vec<PatternCounts>,
}

/// Symbolizes every series and counts patterns, one entity per task.
pub fn featurize(cohort: Cohort, config: &PipelineConfig) -> Result<Featurized, PipelineError> {
    config.validate()?;
    let alphabet = config.alphabet();
    let pattern_config = config.pattern_config();
    let per_entity: Vec<(Vec<SymbolSequence>, PatternCounts)> = cohort
        .entities
        .par_iter()
        .map(|e| {
            let sequences = MetricId::ALL
                .iter()
                .map(|&m| symbolize_series(m, e.series(m), &alphabet))
                .collect::<Result<Vec<_>, _>>()?;
            let counts = count_patterns(&e.id, &sequences, &pattern_config)?;
            Ok::<_, PipelineError>((sequences, counts))
        })
        .collect::<Result<_, _>>()?;
    let (sequences, counts) = per_entity.into_iter().unzip();
    Ok(Featurized {
        cohort,
        sequences,
        counts,
    })
}

/// Top-k selection over the entities at `rows`.
pub fn select_on(
    counts: &[PatternCounts],
    rows: &[usize],
    top_k: usize,
) -> Result<FeatureSpace, SelectError> {
    let subset: Vec<PatternCounts> = rows.iter().map(|&i| counts[i].clone()).collect();
    select_top_k(&score_patterns(&subset), top_k)
}

pub fn matrix_for(
    data: &Featurized,
    space: &FeatureSpace,
    config: &PipelineConfig,
    with_patterns: bool,
) -> Result<FeatureMatrix, SelectError> {
    build_matrix(
        &data.cohort,
        &data.counts,
        space,
        config.feature_mode,
        with_patterns,
    )
}

/// Fold features that re-run selection on each training split.
struct PerFoldSelection<'a> {
    data: &'a Featurized,
    config: &'a PipelineConfig,
}

impl FoldFeatures for PerFoldSelection<'_> {
    type Error = PipelineError;

    fn matrices(
        &self,
        train: &[usize],
        test: &[usize],
    ) -> Result<(FeatureMatrix, FeatureMatrix), PipelineError> {
        let space = select_on(&self.data.counts, train, self.config.top_k)?;
        let full = matrix_for(self.data, &space, self.config, true)?;
        Ok((full.subset(train), full.subset(test)))
    }
}

/// Out-of-fold predictions for one configuration.
pub fn run_cv(
    data: &Featurized,
    config: &PipelineConfig,
    with_patterns: bool,
) -> Result<Vec<Prediction>, PipelineError> {
    run_cv_with(data, config, with_patterns, None)
}

/// Like [`run_cv`], but a supplied feature space replaces selection.
pub fn run_cv_with(
    data: &Featurized,
    config: &PipelineConfig,
    with_patterns: bool,
    fixed_space: Option<&FeatureSpace>,
) -> Result<Vec<Prediction>, PipelineError> {
    config.validate()?;
    let labels = data.cohort.labels();
    let cv = config.cv_config();
    let params = config.tree_params();
    if !with_patterns {
        let m = matrix_for(data, &FeatureSpace::quantity_only(), config, false)?;
        return Ok(cross_validate(&labels, &FixedFeatures(&m), &cv, &params)?);
    }
    if let Some(space) = fixed_space {
        let m = matrix_for(data, space, config, true)?;
        return Ok(cross_validate(&labels, &FixedFeatures(&m), &cv, &params)?);
    }
    match config.selection_scope {
        SelectionScope::Global => {
            let all: Vec<usize> = (0..data.counts.len()).collect();
            let space = select_on(&data.counts, &all, config.top_k)?;
            let m = matrix_for(data, &space, config, true)?;
            Ok(cross_validate(&labels, &FixedFeatures(&m), &cv, &params)?)
        }
        SelectionScope::PerFold => {
            cross_validate(&labels, &PerFoldSelection { data, config }, &cv, &params)
        }
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub runs: Vec<RunResult>,
    pub test: Option<ChiSquareResult>,
}

/// Quantity baseline, and when `with_patterns` is set also the combined
/// run and their chi-squared comparison. A comparison with a zero marginal
/// (both runs perfect, say) is omitted.
pub fn run_experiment(
    data: &Featurized,
    config: &PipelineConfig,
) -> Result<Experiment, PipelineError> {
    run_experiment_with(data, config, None)
}

/// Like [`run_experiment`], with an optional fixed space for the combined
/// run.
pub fn run_experiment_with(
    data: &Featurized,
    config: &PipelineConfig,
    fixed_space: Option<&FeatureSpace>,
) -> Result<Experiment, PipelineError> {
    let baseline = RunResult {
        name: BASELINE_RUN.to_string(),
        predictions: run_cv(data, config, false)?,
    };
    if !config.with_patterns {
        return Ok(Experiment {
            runs: vec![baseline],
            test: None,
        });
    }
    let combined = RunResult {
        name: COMBINED_RUN.to_string(),
        predictions: run_cv_with(data, config, true, fixed_space)?,
    };
    let test = match chi_squared_2x2(
        baseline.correct_incorrect(),
        combined.correct_incorrect(),
        config.yates,
    ) {
        Ok(t) => Some(t),
        Err(EvalError::ZeroMarginal) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(Experiment {
        runs: vec![baseline, combined],
        test,
    })
}

impl Experiment {
    pub fn report(&self, config: &PipelineConfig) -> Report {
        let tests: Vec<_> = self
            .test
            .iter()
            .map(|t| ([BASELINE_RUN.to_string(), COMBINED_RUN.to_string()], *t))
            .collect();
        report(
            &self.runs,
            &tests,
            Some(serde_json::to_value(config).expect("config serializes")),
        )
    }
}

/// Feature file contents: the selected space and the matrix built on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFile {
    pub config: PipelineConfig,
    pub feature_space: FeatureSpace,
    pub matrix: FeatureMatrix,
}

/// Selection over all entities (or a supplied space) and the resulting
/// matrix.
pub fn feature_file(
    data: &Featurized,
    config: &PipelineConfig,
    space: Option<FeatureSpace>,
) -> Result<FeatureFile, PipelineError> {
    let space = match (space, config.with_patterns) {
        (Some(s), _) => s,
        (None, false) => FeatureSpace::quantity_only(),
        (None, true) => {
            let all: Vec<usize> = (0..data.counts.len()).collect();
            select_on(&data.counts, &all, config.top_k)?
        }
    };
    let matrix = matrix_for(data, &space, config, config.with_patterns)?;
    Ok(FeatureFile {
        config: config.clone(),
        feature_space: space,
        matrix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_cohort, PlantSpec};

    fn cohort(noise: f64, seed: u64) -> Cohort {
        generate_cohort(
            15,
            15,
            10,
            &PlantSpec {
                metric: MetricId::InternationalPapers,
                shape: "Uu".into(),
                years_before_anchor: 3,
                noise,
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(PipelineConfig::default().validate().is_ok());
        let bad = [
            PipelineConfig {
                window_length: 1,
                ..Default::default()
            },
            PipelineConfig {
                small_threshold: 40.0,
                ..Default::default()
            },
            PipelineConfig {
                k_min: 3,
                k_max: 2,
                ..Default::default()
            },
            PipelineConfig {
                top_k: 0,
                ..Default::default()
            },
            PipelineConfig {
                folds: 1,
                ..Default::default()
            },
            PipelineConfig {
                min_leaf: 0,
                ..Default::default()
            },
            PipelineConfig {
                pruning_confidence: 1.5,
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(
                matches!(c.validate(), Err(PipelineError::Config(_))),
                "{c:?}"
            );
        }
    }

    #[test]
    fn config_json_is_flat_with_defaults() {
        let c: PipelineConfig =
            serde_json::from_str(r#"{"top_k": 5, "selection_scope": "global"}"#).unwrap();
        assert_eq!(c.top_k, 5);
        assert_eq!(c.selection_scope, SelectionScope::Global);
        assert_eq!(c.k_max, 4);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"topk": 5}"#).is_err());
    }

    #[test]
    fn featurize_aligns_entities() {
        let data = featurize(cohort(0.0, 1), &PipelineConfig::default()).unwrap();
        assert_eq!(data.counts.len(), 30);
        for (e, c) in data.cohort.entities.iter().zip(&data.counts) {
            assert_eq!(e.id, c.entity_id);
        }
        assert!(data
            .sequences
            .iter()
            .all(|s| s.len() == 5 && s[0].len() == 9));
    }

    #[test]
    fn experiment_shapes() {
        let data = featurize(cohort(0.0, 2), &PipelineConfig::default()).unwrap();
        let config = PipelineConfig::default();
        let exp = run_experiment(&data, &config).unwrap();
        assert_eq!(exp.runs.len(), 2);
        assert!(exp.runs.iter().all(|r| r.predictions.len() == 30));
        let rep = exp.report(&config);
        assert_eq!(rep.runs.len(), 4);

        let baseline_only = PipelineConfig {
            with_patterns: false,
            ..config.clone()
        };
        let exp2 = run_experiment(&data, &baseline_only).unwrap();
        assert_eq!(exp2.runs.len(), 1);
        assert_eq!(exp2.runs[0], exp.runs[0]);
    }

    #[test]
    fn feature_file_respects_bound() {
        let config = PipelineConfig::default();
        let data = featurize(cohort(0.2, 3), &config).unwrap();
        let file = feature_file(&data, &config, None).unwrap();
        assert!(file.feature_space.pattern_features.len() <= 10 * 30);
        assert_eq!(file.matrix.width(), file.feature_space.width());
        let reused = feature_file(&data, &config, Some(file.feature_space.clone())).unwrap();
        assert_eq!(reused, file);
    }
}
