//! Pattern scoring and top-k selection.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trendgram::patterns::{PatternCounts, PatternKey};
use trendgram::pipeline::{featurize, PipelineConfig};
use trendgram::select::{pattern_score, score_patterns, select_top_k};
use trendgram::synth::{generate_cohort, PlantSpec};
use trendgram::MetricId;

fn cohort_counts(n_each: usize, seed: u64) -> Vec<PatternCounts> {
    let spec = PlantSpec {
        metric: MetricId::InternationalPapers,
        shape: "Uu".into(),
        years_before_anchor: 3,
        noise: 0.5,
    };
    let cohort = generate_cohort(n_each, n_each, 10, &spec, seed).unwrap();
    featurize(cohort, &PipelineConfig::default())
        .unwrap()
        .counts
}

fn counts(id: &str, entries: &[(&str, u64)]) -> PatternCounts {
    PatternCounts {
        entity_id: id.into(),
        counts: entries
            .iter()
            .map(|(k, v)| (k.parse().unwrap(), *v))
            .collect(),
    }
}

#[test]
fn scores_match_direct_evaluation() {
    let all = cohort_counts(10, 3);
    let n = all.len() as f64;
    let mut pef: BTreeMap<&PatternKey, u64> = BTreeMap::new();
    for c in &all {
        for k in c.counts.keys() {
            *pef.entry(k).or_default() += 1;
        }
    }
    let scores = score_patterns(&all);
    assert_eq!(
        scores.len(),
        all.iter().map(|c| c.counts.len()).sum::<usize>()
    );
    for s in &scores {
        let paf = all
            .iter()
            .find(|c| c.entity_id == s.entity_id)
            .unwrap()
            .get(&s.pattern);
        let direct = paf as f64 * (n / pef[&s.pattern] as f64).ln();
        assert_eq!(s.paf, paf);
        assert_eq!(s.pef, pef[&s.pattern]);
        assert!((s.score - direct).abs() <= 1e-12, "{s:?} vs {direct}");
    }
}

#[test]
fn patterns_everyone_has_score_exactly_zero() {
    let all = vec![
        counts("a", &[("m1:U", 3), ("m2:S", 1)]),
        counts("b", &[("m1:U", 1)]),
        counts("c", &[("m1:U", 7), ("m2:S", 2)]),
    ];
    for s in score_patterns(&all) {
        if s.pattern.as_str() == "m1:U" {
            assert_eq!(s.score, 0.0);
        } else {
            assert!((s.score - s.paf as f64 * 1.5f64.ln()).abs() < 1e-12);
        }
    }
    assert_eq!(pattern_score(5, 4, 4), 0.0);
}

#[test]
fn fifty_entities_with_k_ten_stay_within_five_hundred_patterns() {
    for seed in 0..5 {
        let all = cohort_counts(25, seed);
        assert_eq!(all.len(), 50);
        let space = select_top_k(&score_patterns(&all), 10).unwrap();
        assert!(
            space.pattern_features.len() <= 500,
            "{}",
            space.pattern_features.len()
        );
        assert!(!space.pattern_features.is_empty());
    }
}

/// Top-k computed independently with base-2 logarithms: the base only
/// rescales every score by the same factor, so the choice cannot change.
fn top_k_log2(all: &[PatternCounts], k: usize) -> BTreeSet<PatternKey> {
    let n = all.len() as f64;
    let mut pef: BTreeMap<&PatternKey, u64> = BTreeMap::new();
    for c in all {
        for key in c.counts.keys() {
            *pef.entry(key).or_default() += 1;
        }
    }
    let mut chosen = BTreeSet::new();
    for c in all {
        let mut list: Vec<(i64, &PatternKey)> = c
            .counts
            .iter()
            .map(|(key, &paf)| {
                let s = paf as f64 * (n / pef[key] as f64).log2();
                ((s * 1e9).round() as i64, key)
            })
            .collect();
        list.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
        chosen.extend(list.into_iter().take(k).map(|(_, key)| key.clone()));
    }
    chosen
}

#[test]
fn selection_does_not_depend_on_log_base() {
    for seed in 10..13 {
        let all = cohort_counts(15, seed);
        let ours: BTreeSet<PatternKey> = select_top_k(&score_patterns(&all), 10)
            .unwrap()
            .pattern_features
            .into_iter()
            .collect();
        assert_eq!(ours, top_k_log2(&all, 10));
    }
}

#[test]
fn selection_does_not_depend_on_entity_order() {
    let mut all = cohort_counts(15, 21);
    let reference = select_top_k(&score_patterns(&all), 10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..5 {
        all.shuffle(&mut rng);
        assert_eq!(select_top_k(&score_patterns(&all), 10).unwrap(), reference);
    }
}

#[test]
fn ties_break_on_key_ascending() {
    let all = vec![
        counts("a", &[("m1:u", 1), ("m1:U", 1), ("m1:S", 1)]),
        counts("b", &[("m2:d", 1)]),
    ];
    let space = select_top_k(&score_patterns(&all), 2).unwrap();
    let keys: Vec<&str> = space.pattern_features.iter().map(|k| k.as_str()).collect();
    // Byte order puts "S" before "U" before "u".
    assert_eq!(keys, ["m1:S", "m1:U", "m2:d"]);
}
