//! k-gram enumeration and cross-metric pattern counting.
//!
//! A single-metric pattern is a k-gram of one metric's symbol sequence,
//! keyed `m<i>:<symbols>`. A combined pattern pairs k-grams from two
//! different metrics together with the sign of their start-offset
//! difference, keyed `m<i>:<symbols><rel>m<j>:<symbols>` with `i < j`.
//! `rel` is `+` when the second gram starts later, `=` when both start
//! together and `-` when the second starts earlier.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::ingest::MetricId;
use crate::symbolize::{Symbol, SymbolSequence};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatternError {
    #[error("invalid k range {k_min}..={k_max}")]
    KRange { k_min: usize, k_max: usize },
    #[error("k_max {k_max} exceeds sequence length {len}")]
    KTooLarge { k_max: usize, len: usize },
    #[error("cannot combine two grams of metric {0}")]
    SameMetric(MetricId),
    #[error("metric {0} supplied more than once")]
    DuplicateMetric(MetricId),
    #[error("invalid pattern key {0:?}")]
    InvalidKey(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KGram {
    pub metric: MetricId,
    pub symbols: Vec<Symbol>,
    pub start: usize,
}

impl KGram {
    fn symbol_text(&self) -> String {
        self.symbols.iter().map(|s| s.as_char()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relation {
    After,
    Same,
    Before,
}

impl Relation {
    /// Relation of a gram starting at `second` to one starting at `first`.
    pub fn between(first: usize, second: usize) -> Relation {
        match second.cmp(&first) {
            std::cmp::Ordering::Greater => Relation::After,
            std::cmp::Ordering::Equal => Relation::Same,
            std::cmp::Ordering::Less => Relation::Before,
        }
    }

    pub fn reversed(self) -> Relation {
        match self {
            Relation::After => Relation::Before,
            Relation::Same => Relation::Same,
            Relation::Before => Relation::After,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Relation::After => '+',
            Relation::Same => '=',
            Relation::Before => '-',
        }
    }

    fn from_char(c: char) -> Option<Relation> {
        match c {
            '+' => Some(Relation::After),
            '=' => Some(Relation::Same),
            '-' => Some(Relation::Before),
            _ => None,
        }
    }
}

/// Canonical textual identity of a pattern. Ordering is lexicographic on
/// the key text.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PatternKey(String);

impl PatternKey {
    pub fn single(metric: MetricId, symbols: &[Symbol]) -> PatternKey {
        let mut key = String::with_capacity(3 + symbols.len());
        push_part(&mut key, metric, symbols);
        PatternKey(key)
    }

    fn combined_raw(
        first: (MetricId, &[Symbol]),
        relation: Relation,
        second: (MetricId, &[Symbol]),
    ) -> PatternKey {
        let mut key = String::with_capacity(7 + first.1.len() + second.1.len());
        push_part(&mut key, first.0, first.1);
        key.push(relation.as_char());
        push_part(&mut key, second.0, second.1);
        PatternKey(key)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_combined(&self) -> bool {
        self.0.len() > 3 && self.0[3..].contains(['+', '=', '-'])
    }
}

fn push_part(key: &mut String, metric: MetricId, symbols: &[Symbol]) {
    key.push('m');
    key.push(char::from(b'0' + metric.number() as u8));
    key.push(':');
    key.extend(symbols.iter().map(|s| s.as_char()));
}

/// Parses `m<digit>:<symbols>` and returns the remainder.
fn parse_part(text: &str) -> Option<(MetricId, usize, &str)> {
    let rest = text.strip_prefix('m')?;
    let digit = rest.chars().next()?.to_digit(10)? as usize;
    let metric = MetricId::from_number(digit)?;
    let rest = rest[1..].strip_prefix(':')?;
    let len = rest
        .chars()
        .take_while(|&c| Symbol::try_from(c).is_ok())
        .count();
    if len == 0 {
        return None;
    }
    Some((metric, len, &rest[len..]))
}

impl FromStr for PatternKey {
    type Err = PatternError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let invalid = || PatternError::InvalidKey(s.to_string());
        let (first, _, rest) = parse_part(s).ok_or_else(invalid)?;
        if rest.is_empty() {
            return Ok(PatternKey(s.to_string()));
        }
        let mut chars = rest.chars();
        Relation::from_char(chars.next().ok_or_else(invalid)?).ok_or_else(invalid)?;
        let (second, _, tail) = parse_part(chars.as_str()).ok_or_else(invalid)?;
        if !tail.is_empty() || first >= second {
            return Err(invalid());
        }
        Ok(PatternKey(s.to_string()))
    }
}

impl fmt::Display for PatternKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for PatternKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for PatternKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Occurrence counts of each pattern for one entity. Only keys with a
/// positive count are stored.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PatternCounts {
    pub entity_id: String,
    pub counts: BTreeMap<PatternKey, u64>,
}

impl PatternCounts {
    pub fn get(&self, key: &PatternKey) -> u64 {
        self.counts.get(key).copied().unwrap_or(0)
    }
}

/// All contiguous substrings with length in `k_min..=k_max`, grouped by
/// length and then by start.
pub fn extract_kgrams(
    seq: &SymbolSequence,
    k_min: usize,
    k_max: usize,
) -> Result<Vec<KGram>, PatternError> {
    if k_min == 0 || k_min > k_max {
        return Err(PatternError::KRange { k_min, k_max });
    }
    if k_max > seq.len() {
        return Err(PatternError::KTooLarge {
            k_max,
            len: seq.len(),
        });
    }
    Ok((k_min..=k_max)
        .flat_map(|k| {
            seq.symbols
                .windows(k)
                .enumerate()
                .map(move |(start, w)| KGram {
                    metric: seq.metric,
                    symbols: w.to_vec(),
                    start,
                })
        })
        .collect())
}

/// Canonical key for a pair of grams from different metrics.
pub fn combine_pair(a: &KGram, b: &KGram) -> Result<PatternKey, PatternError> {
    if a.metric == b.metric {
        return Err(PatternError::SameMetric(a.metric));
    }
    let (first, second) = if a.metric < b.metric { (a, b) } else { (b, a) };
    Ok(PatternKey::combined_raw(
        (first.metric, &first.symbols),
        Relation::between(first.start, second.start),
        (second.metric, &second.symbols),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub include_singles: bool,
}

impl Default for PatternConfig {
    fn default() -> Self {
        Self {
            k_min: 1,
            k_max: 4,
            include_singles: true,
        }
    }
}

/// Counts single-metric k-grams and every cross-metric gram pair for one
/// entity. `k_max` is capped at each sequence's length.
pub fn count_patterns(
    entity_id: &str,
    sequences: &[SymbolSequence],
    config: &PatternConfig,
) -> Result<PatternCounts, PatternError> {
    if config.k_min == 0 || config.k_min > config.k_max {
        return Err(PatternError::KRange {
            k_min: config.k_min,
            k_max: config.k_max,
        });
    }
    let mut ordered: Vec<&SymbolSequence> = sequences.iter().collect();
    ordered.sort_by_key(|s| s.metric);
    for pair in ordered.windows(2) {
        if pair[0].metric == pair[1].metric {
            return Err(PatternError::DuplicateMetric(pair[0].metric));
        }
    }

    let mut counts = PatternCounts {
        entity_id: entity_id.to_string(),
        counts: BTreeMap::new(),
    };
    let grams = ordered
        .iter()
        .map(|s| {
            if s.len() < config.k_min {
                Ok(Vec::new())
            } else {
                extract_kgrams(s, config.k_min, config.k_max.min(s.len()))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let texts: Vec<Vec<String>> = grams
        .iter()
        .map(|gs| gs.iter().map(KGram::symbol_text).collect())
        .collect();

    let mut bump = |key: String| *counts.counts.entry(PatternKey(key)).or_insert(0) += 1;

    if config.include_singles {
        for (seq, text) in ordered.iter().zip(&texts) {
            for t in text {
                bump(format!("m{}:{t}", seq.metric.number()));
            }
        }
    }
    for i in 0..ordered.len() {
        for j in i + 1..ordered.len() {
            let (mi, mj) = (ordered[i].metric.number(), ordered[j].metric.number());
            for (ga, ta) in grams[i].iter().zip(&texts[i]) {
                for (gb, tb) in grams[j].iter().zip(&texts[j]) {
                    let rel = Relation::between(ga.start, gb.start).as_char();
                    bump(format!("m{mi}:{ta}{rel}m{mj}:{tb}"));
                }
            }
        }
    }
    Ok(counts)
}
