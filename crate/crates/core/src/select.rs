//! Pattern scoring, per-entity top-k selection and feature-matrix assembly.
//!
//! A pattern's score for one entity is `paf * ln(N / pef)`: its occurrence
//! count in that entity, damped by how many of the `N` entities contain it
//! at all. Patterns shared by every entity score zero.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Cohort, Label, MetricId};
use crate::patterns::{PatternCounts, PatternKey};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SelectError {
    #[error("top_k must be at least 1")]
    ZeroK,
    #[error("counts for {found:?} do not line up with cohort entity {expected:?}")]
    Misaligned { expected: String, found: String },
    #[error("{counts} pattern count sets for {entities} entities")]
    CountMismatch { counts: usize, entities: usize },
}

pub const QUANTITY_FEATURES: [&str; 5] = [
    "sum_domestic_papers",
    "sum_international_papers",
    "sum_domestic_citations",
    "sum_international_citations",
    "mean_first_author_ratio",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternScore {
    pub entity_id: String,
    pub pattern: PatternKey,
    pub paf: u64,
    pub pef: u64,
    pub n_total: u64,
    pub score: f64,
}

/// Scores every (entity, pattern) pair present in `all_counts`. Output is
/// ordered by entity (input order) and then pattern key.
pub fn score_patterns(all_counts: &[PatternCounts]) -> Vec<PatternScore> {
    let n_total = all_counts.len() as u64;
    let mut pef: BTreeMap<&PatternKey, u64> = BTreeMap::new();
    for counts in all_counts {
        for key in counts.counts.keys() {
            *pef.entry(key).or_default() += 1;
        }
    }
    all_counts
        .iter()
        .flat_map(|counts| {
            let pef = &pef;
            counts.counts.iter().map(move |(key, &paf)| {
                let pef = pef[key];
                PatternScore {
                    entity_id: counts.entity_id.clone(),
                    pattern: key.clone(),
                    paf,
                    pef,
                    n_total,
                    score: pattern_score(paf, pef, n_total),
                }
            })
        })
        .collect()
}

pub fn pattern_score(paf: u64, pef: u64, n_total: u64) -> f64 {
    if pef == n_total {
        return 0.0;
    }
    paf as f64 * (n_total as f64 / pef as f64).ln()
}

/// Pattern columns (sorted, unique) plus the fixed quantity columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpace {
    pub pattern_features: Vec<PatternKey>,
    pub quantity_features: Vec<String>,
}

impl FeatureSpace {
    pub fn new(pattern_features: impl IntoIterator<Item = PatternKey>) -> Self {
        let unique: BTreeSet<PatternKey> = pattern_features.into_iter().collect();
        Self {
            pattern_features: unique.into_iter().collect(),
            quantity_features: QUANTITY_FEATURES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn quantity_only() -> Self {
        Self::new([])
    }

    pub fn width(&self) -> usize {
        self.pattern_features.len() + self.quantity_features.len()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.pattern_features
            .iter()
            .map(|k| k.to_string())
            .chain(self.quantity_features.iter().cloned())
            .collect()
    }
}

/// Scores on a 1e-9 grid, so patterns whose scores agree mathematically
/// (2 ln 5 and ln 25, say) tie on the key rather than on rounding noise.
fn ranking_score(score: f64) -> i64 {
    (score * 1e9).round() as i64
}

/// Keeps each entity's `k` best patterns (score descending, key ascending)
/// and returns their union.
pub fn select_top_k(scores: &[PatternScore], k: usize) -> Result<FeatureSpace, SelectError> {
    if k == 0 {
        return Err(SelectError::ZeroK);
    }
    let mut per_entity: BTreeMap<&str, Vec<&PatternScore>> = BTreeMap::new();
    for s in scores {
        per_entity.entry(&s.entity_id).or_default().push(s);
    }
    let mut chosen = BTreeSet::new();
    for mut list in per_entity.into_values() {
        list.sort_by(|a, b| {
            ranking_score(b.score)
                .cmp(&ranking_score(a.score))
                .then_with(|| a.pattern.cmp(&b.pattern))
        });
        chosen.extend(list.into_iter().take(k).map(|s| s.pattern.clone()));
    }
    Ok(FeatureSpace::new(chosen))
}

/// Window sums of the four count metrics and the mean first-author ratio.
pub fn quantity_features(cohort: &Cohort) -> Vec<[f64; 5]> {
    cohort
        .entities
        .iter()
        .map(|e| {
            let sum = |m: MetricId| e.series(m).values.iter().sum::<f64>();
            let ratio = &e.series(MetricId::FirstAuthorRatio).values;
            let mean = if ratio.is_empty() {
                0.0
            } else {
                ratio.iter().sum::<f64>() / ratio.len() as f64
            };
            [
                sum(MetricId::DomesticPapers),
                sum(MetricId::InternationalPapers),
                sum(MetricId::DomesticCitations),
                sum(MetricId::InternationalCitations),
                mean,
            ]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    #[default]
    Counts,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub entity_ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

impl FeatureMatrix {
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            columns: self.columns.clone(),
            entity_ids: indices
                .iter()
                .map(|&i| self.entity_ids[i].clone())
                .collect(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Builds one row per cohort entity. `counts[i]` must belong to
/// `cohort.entities[i]`. Pattern columns are dropped when `with_patterns`
/// is false.
pub fn build_matrix(
    cohort: &Cohort,
    counts: &[PatternCounts],
    space: &FeatureSpace,
    mode: FeatureMode,
    with_patterns: bool,
) -> Result<FeatureMatrix, SelectError> {
    if counts.len() != cohort.len() {
        return Err(SelectError::CountMismatch {
            counts: counts.len(),
            entities: cohort.len(),
        });
    }
    for (entity, c) in cohort.entities.iter().zip(counts) {
        if entity.id != c.entity_id {
            return Err(SelectError::Misaligned {
                expected: entity.id.clone(),
                found: c.entity_id.clone(),
            });
        }
    }
    let patterns: &[PatternKey] = if with_patterns {
        &space.pattern_features
    } else {
        &[]
    };
    let quantities = quantity_features(cohort);
    let rows = counts
        .iter()
        .zip(&quantities)
        .map(|(c, q)| {
            patterns
                .iter()
                .map(|key| {
                    let n = c.get(key);
                    match mode {
                        FeatureMode::Counts => n as f64,
                        FeatureMode::Binary => f64::from(u8::from(n > 0)),
                    }
                })
                .chain(q.iter().copied())
                .collect()
        })
        .collect();
    Ok(FeatureMatrix {
        columns: patterns
            .iter()
            .map(|k| k.to_string())
            .chain(space.quantity_features.iter().cloned())
            .collect(),
        entity_ids: cohort.entities.iter().map(|e| e.id.clone()).collect(),
        rows,
        labels: cohort.labels(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Entity, MetricSeries};

    fn key(s: &str) -> PatternKey {
        s.parse().unwrap()
    }

    fn counts(id: &str, pairs: &[(&str, u64)]) -> PatternCounts {
        PatternCounts {
            entity_id: id.into(),
            counts: pairs.iter().map(|(k, v)| (key(k), *v)).collect(),
        }
    }

    fn entity(id: &str, label: Label, series: [Vec<f64>; 5]) -> Entity {
        Entity {
            id: id.into(),
            label,
            anchor_year: 2010,
            series: series.map(|v| MetricSeries::new(2010 - v.len() as i32, v)),
        }
    }

    #[test]
    fn shared_pattern_scores_zero() {
        let all: Vec<_> = (0..4)
            .map(|i| counts(&format!("e{i}"), &[("m1:U", 2)]))
            .collect();
        assert!(score_patterns(&all)
            .iter()
            .all(|s| s.score == 0.0 && s.pef == 4));
    }

    #[test]
    fn score_formula() {
        assert!((pattern_score(3, 2, 8) - 4.158883083359672).abs() < 1e-12);
        assert_eq!(pattern_score(1, 1, 1), 0.0);
    }

    #[test]
    fn pef_counts_entities() {
        let all = vec![
            counts("a", &[("m1:U", 3), ("m1:u", 1)]),
            counts("b", &[("m1:U", 1)]),
            counts("c", &[]),
        ];
        let scores = score_patterns(&all);
        assert_eq!(scores.len(), 3);
        let u = &scores[0];
        assert_eq!(
            (u.pattern.as_str(), u.paf, u.pef, u.n_total),
            ("m1:U", 3, 2, 3)
        );
        assert!((u.score - 3.0 * 1.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn fewer_candidates_than_k() {
        let all = vec![
            counts("a", &[("m1:U", 3), ("m1:u", 1), ("m2:S", 2)]),
            counts("b", &[]),
        ];
        let space = select_top_k(&score_patterns(&all), 10).unwrap();
        assert_eq!(space.pattern_features.len(), 3);
        assert_eq!(select_top_k(&[], 0), Err(SelectError::ZeroK));
    }

    #[test]
    fn ties_at_cut_break_lexicographically() {
        let all = vec![
            counts("a", &[("m1:d", 1), ("m1:S", 1), ("m1:u", 1), ("m1:D", 1)]),
            counts("b", &[]),
        ];
        let space = select_top_k(&score_patterns(&all), 2).unwrap();
        assert_eq!(space.pattern_features, vec![key("m1:D"), key("m1:S")]);
    }

    #[test]
    fn shared_top_pattern_union() {
        // each entity: one shared high-count pattern plus 10 private ones
        let mut all = Vec::new();
        for id in ["a", "b"] {
            let mut pairs: Vec<(String, u64)> = vec![("m1:UUUU".into(), 50)];
            for i in 0..10 {
                let sym = ["U", "u", "S", "d", "D"][i % 5];
                let metric = if id == "a" { 2 } else { 3 };
                pairs.push((format!("m{metric}:{}", sym.repeat(1 + i / 5)), 1));
            }
            let refs: Vec<(&str, u64)> = pairs.iter().map(|(k, v)| (k.as_str(), *v)).collect();
            all.push(counts(id, &refs));
        }
        all.push(counts("c", &[]));
        let space = select_top_k(&score_patterns(&all), 10).unwrap();
        assert!((19..=20).contains(&space.pattern_features.len()));
        assert!(space.pattern_features.contains(&key("m1:UUUU")));
    }

    #[test]
    fn quantity_examples() {
        let zero = Cohort {
            window_length: 10,
            entities: vec![entity(
                "z",
                Label::False,
                std::array::from_fn(|_| vec![0.0; 10]),
            )],
            skipped_unlabeled: 0,
        };
        assert_eq!(quantity_features(&zero), vec![[0.0; 5]]);

        let ramp: Vec<f64> = (1..=10).map(f64::from).collect();
        let fixture = Cohort {
            window_length: 10,
            entities: vec![entity(
                "r",
                Label::True,
                [
                    vec![0.0; 10],
                    ramp,
                    vec![0.0; 10],
                    vec![0.0; 10],
                    vec![40.0; 10],
                ],
            )],
            skipped_unlabeled: 0,
        };
        assert_eq!(
            quantity_features(&fixture),
            vec![[0.0, 55.0, 0.0, 0.0, 40.0]]
        );

        let two = Cohort {
            window_length: 2,
            entities: vec![entity(
                "t",
                Label::True,
                [
                    vec![0.0; 2],
                    vec![0.0; 2],
                    vec![0.0; 2],
                    vec![0.0; 2],
                    vec![100.0, 0.0],
                ],
            )],
            skipped_unlabeled: 0,
        };
        assert_eq!(quantity_features(&two)[0][4], 50.0);
    }

    #[test]
    fn matrix_layout() {
        let cohort = Cohort {
            window_length: 2,
            entities: vec![
                entity("a", Label::True, std::array::from_fn(|_| vec![1.0, 2.0])),
                entity("b", Label::False, std::array::from_fn(|_| vec![0.0, 0.0])),
            ],
            skipped_unlabeled: 0,
        };
        let c = vec![counts("a", &[("m1:U", 3)]), counts("b", &[("m1:u", 1)])];
        let space = FeatureSpace::new([key("m1:U"), key("m1:u")]);

        let m = build_matrix(&cohort, &c, &space, FeatureMode::Counts, true).unwrap();
        assert_eq!(m.width(), 7);
        assert_eq!(m.columns[..2], ["m1:U".to_string(), "m1:u".to_string()]);
        assert_eq!(m.rows[0], vec![3.0, 0.0, 3.0, 3.0, 3.0, 3.0, 1.5]);
        assert_eq!(m.rows[1][..2], [0.0, 1.0]);
        assert_eq!(m.labels, vec![Label::True, Label::False]);

        let b = build_matrix(&cohort, &c, &space, FeatureMode::Binary, true).unwrap();
        assert_eq!(b.rows[0][..2], [1.0, 0.0]);

        let q = build_matrix(&cohort, &c, &space, FeatureMode::Counts, false).unwrap();
        assert_eq!(q.width(), 5);
        assert_eq!(q.columns, QUANTITY_FEATURES.map(String::from).to_vec());

        let swapped = vec![c[1].clone(), c[0].clone()];
        assert!(matches!(
            build_matrix(&cohort, &swapped, &space, FeatureMode::Counts, true),
            Err(SelectError::Misaligned { .. })
        ));
    }
}
