//! Loading observations and labels from CSV and aligning them into a
//! fixed-length yearly window per entity.
//!
//! Each labeled entity contributes five series (one per [`MetricId`]) that
//! cover the `window_length` years strictly before its anchor year. Years
//! without an observation are zero-filled.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Anchor year assigned to FALSE entities whose labels row leaves it blank.
pub const DEFAULT_FALSE_ANCHOR: i32 = 2014;

/// Default analysis window, in years.
pub const DEFAULT_WINDOW_LENGTH: usize = 10;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV at line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error("unexpected header {found:?}, expected {expected:?}")]
    Header { found: String, expected: String },
    #[error("negative value at line {line}")]
    NegativeValue { line: u64 },
    #[error("first_author_ratio above 100 at line {line}")]
    RatioOutOfRange { line: u64 },
    #[error("unknown metric {name:?} at line {line}")]
    UnknownMetric { line: u64, name: String },
    #[error("duplicate observation for ({entity}, {metric}, {year}) at lines {first_line} and {second_line}")]
    DuplicateObservation {
        entity: String,
        metric: String,
        year: i32,
        first_line: u64,
        second_line: u64,
    },
    #[error("unknown label {token:?} at line {line}")]
    UnknownLabel { line: u64, token: String },
    #[error("duplicate entity {entity:?} in labels at lines {first_line} and {second_line}")]
    DuplicateLabel {
        entity: String,
        first_line: u64,
        second_line: u64,
    },
    #[error("TRUE row missing anchor_year at line {line}")]
    MissingAnchor { line: u64 },
    #[error("window_length must be at least 2, got {0}")]
    WindowTooShort(usize),
    #[error("entity {0:?} supplies both first_author_ratio and first_author_papers")]
    AmbiguousRatio(String),
    #[error("series lengths differ: {first} vs {total}")]
    LengthMismatch { first: usize, total: usize },
    #[error("first-author count {first} exceeds total {total} at position {index}")]
    FirstExceedsTotal {
        index: usize,
        first: f64,
        total: f64,
    },
}

/// The five yearly metrics, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    DomesticPapers,
    InternationalPapers,
    DomesticCitations,
    InternationalCitations,
    FirstAuthorRatio,
}

impl MetricId {
    pub const ALL: [MetricId; 5] = [
        MetricId::DomesticPapers,
        MetricId::InternationalPapers,
        MetricId::DomesticCitations,
        MetricId::InternationalCitations,
        MetricId::FirstAuthorRatio,
    ];

    /// Zero-based position in the canonical order.
    pub fn index(self) -> usize {
        self as usize
    }

    /// One-based number used in pattern keys (`m1` .. `m5`).
    pub fn number(self) -> usize {
        self.index() + 1
    }

    pub fn from_number(n: usize) -> Option<MetricId> {
        n.checked_sub(1).and_then(|i| Self::ALL.get(i).copied())
    }

    pub fn token(self) -> &'static str {
        match self {
            MetricId::DomesticPapers => "domestic_papers",
            MetricId::InternationalPapers => "international_papers",
            MetricId::DomesticCitations => "domestic_citations",
            MetricId::InternationalCitations => "international_citations",
            MetricId::FirstAuthorRatio => "first_author_ratio",
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for MetricId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|m| m.token() == s)
            .ok_or_else(|| s.to_string())
    }
}

/// Token for raw first-author paper counts. When present, the ratio metric
/// is derived from it and the two paper-count metrics.
pub const FIRST_AUTHOR_PAPERS: &str = "first_author_papers";

/// What an observations row measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Measure {
    Metric(MetricId),
    FirstAuthorPapers,
}

impl Measure {
    fn parse(s: &str) -> Option<Measure> {
        if s == FIRST_AUTHOR_PAPERS {
            return Some(Measure::FirstAuthorPapers);
        }
        s.parse().ok().map(Measure::Metric)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measure::Metric(m) => m.fmt(f),
            Measure::FirstAuthorPapers => f.write_str(FIRST_AUTHOR_PAPERS),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub entity_id: String,
    pub metric: Measure,
    pub year: i32,
    pub value: f64,
    /// 1-based line in the source file (0 when built in memory).
    pub line: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "FALSE")]
    False,
    #[serde(rename = "TRUE")]
    True,
}

impl Label {
    pub const BOTH: [Label; 2] = [Label::True, Label::False];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::True => "TRUE",
            Label::False => "FALSE",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRecord {
    pub entity_id: String,
    pub label: Label,
    pub anchor_year: i32,
}

/// Raw yearly values of one (entity, metric) pair, oldest year first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub first_year: i32,
    pub values: Vec<f64>,
}

impl MetricSeries {
    pub fn new(first_year: i32, values: Vec<f64>) -> Self {
        Self { first_year, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn years(&self) -> std::ops::Range<i32> {
        self.first_year..self.first_year + self.values.len() as i32
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub id: String,
    pub label: Label,
    pub anchor_year: i32,
    /// Indexed by [`MetricId::index`].
    pub series: [MetricSeries; 5],
}

impl Entity {
    pub fn series(&self, metric: MetricId) -> &MetricSeries {
        &self.series[metric.index()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub window_length: usize,
    /// Sorted by entity id.
    pub entities: Vec<Entity>,
    /// Entities that had observations but no label.
    pub skipped_unlabeled: usize,
}

impl Cohort {
    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.entities.iter().map(|e| e.label).collect()
    }
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>, IngestError> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => IngestError::Io {
                path: path.display().to_string(),
                source,
            },
            other => IngestError::Malformed {
                line: 1,
                reason: format!("{other:?}"),
            },
        })
}

fn check_header<R: std::io::Read>(
    reader: &mut csv::Reader<R>,
    expected: &[&str],
) -> Result<(), IngestError> {
    let header = reader.headers().map_err(|e| IngestError::Malformed {
        line: 1,
        reason: e.to_string(),
    })?;
    let found: Vec<&str> = header.iter().collect();
    if found != expected {
        return Err(IngestError::Header {
            found: found.join(","),
            expected: expected.join(","),
        });
    }
    Ok(())
}

fn records<R: std::io::Read>(
    reader: &mut csv::Reader<R>,
    width: usize,
) -> impl Iterator<Item = Result<(u64, csv::StringRecord), IngestError>> + '_ {
    reader.records().map(move |rec| {
        let rec = rec.map_err(|e| IngestError::Malformed {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != width {
            return Err(IngestError::Malformed {
                line,
                reason: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        Ok((line, rec))
    })
}

/// Reads an observations CSV (`entity_id,metric,year,value`).
pub fn load_observations(path: impl AsRef<Path>) -> Result<Vec<Observation>, IngestError> {
    let mut reader = open_csv(path.as_ref())?;
    parse_observations(&mut reader)
}

/// Same as [`load_observations`] but over any reader.
pub fn read_observations<R: std::io::Read>(input: R) -> Result<Vec<Observation>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    parse_observations(&mut reader)
}

fn parse_observations<R: std::io::Read>(
    reader: &mut csv::Reader<R>,
) -> Result<Vec<Observation>, IngestError> {
    check_header(reader, &["entity_id", "metric", "year", "value"])?;
    let mut seen: HashMap<(String, Measure, i32), u64> = HashMap::new();
    let mut out = Vec::new();
    for row in records(reader, 4) {
        let (line, rec) = row?;
        let entity_id = rec[0].to_string();
        if entity_id.is_empty() {
            return Err(IngestError::Malformed {
                line,
                reason: "empty entity_id".into(),
            });
        }
        let metric = Measure::parse(&rec[1]).ok_or_else(|| IngestError::UnknownMetric {
            line,
            name: rec[1].to_string(),
        })?;
        let year: i32 = rec[2].parse().map_err(|_| IngestError::Malformed {
            line,
            reason: format!("year {:?} is not an integer", &rec[2]),
        })?;
        let value: f64 = rec[3].parse().map_err(|_| IngestError::Malformed {
            line,
            reason: format!("value {:?} is not a number", &rec[3]),
        })?;
        if !value.is_finite() {
            return Err(IngestError::Malformed {
                line,
                reason: "value is not finite".into(),
            });
        }
        if value < 0.0 {
            return Err(IngestError::NegativeValue { line });
        }
        if metric == Measure::Metric(MetricId::FirstAuthorRatio) && value > 100.0 {
            return Err(IngestError::RatioOutOfRange { line });
        }
        let key = (entity_id.clone(), metric, year);
        if let Some(&first_line) = seen.get(&key) {
            return Err(IngestError::DuplicateObservation {
                entity: entity_id,
                metric: metric.to_string(),
                year,
                first_line,
                second_line: line,
            });
        }
        seen.insert(key, line);
        out.push(Observation {
            entity_id,
            metric,
            year,
            value,
            line,
        });
    }
    Ok(out)
}

/// Reads a labels CSV (`entity_id,label,anchor_year`). FALSE rows with an
/// empty anchor receive `default_false_anchor`.
pub fn load_labels(
    path: impl AsRef<Path>,
    default_false_anchor: i32,
) -> Result<Vec<LabelRecord>, IngestError> {
    let mut reader = open_csv(path.as_ref())?;
    parse_labels(&mut reader, default_false_anchor)
}

pub fn read_labels<R: std::io::Read>(
    input: R,
    default_false_anchor: i32,
) -> Result<Vec<LabelRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    parse_labels(&mut reader, default_false_anchor)
}

fn parse_labels<R: std::io::Read>(
    reader: &mut csv::Reader<R>,
    default_false_anchor: i32,
) -> Result<Vec<LabelRecord>, IngestError> {
    check_header(reader, &["entity_id", "label", "anchor_year"])?;
    let mut seen: HashMap<String, u64> = HashMap::new();
    let mut out = Vec::new();
    for row in records(reader, 3) {
        let (line, rec) = row?;
        let entity_id = rec[0].to_string();
        if entity_id.is_empty() {
            return Err(IngestError::Malformed {
                line,
                reason: "empty entity_id".into(),
            });
        }
        let label = match &rec[1] {
            "TRUE" => Label::True,
            "FALSE" => Label::False,
            other => {
                return Err(IngestError::UnknownLabel {
                    line,
                    token: other.to_string(),
                })
            }
        };
        let anchor_year = match (&rec[2], label) {
            ("", Label::True) => return Err(IngestError::MissingAnchor { line }),
            ("", Label::False) => default_false_anchor,
            (raw, _) => raw.parse().map_err(|_| IngestError::Malformed {
                line,
                reason: format!("anchor_year {raw:?} is not an integer"),
            })?,
        };
        if let Some(&first_line) = seen.get(&entity_id) {
            return Err(IngestError::DuplicateLabel {
                entity: entity_id,
                first_line,
                second_line: line,
            });
        }
        seen.insert(entity_id.clone(), line);
        out.push(LabelRecord {
            entity_id,
            label,
            anchor_year,
        });
    }
    Ok(out)
}

/// Per-year first-author percentage: `100 * first / total`, 0 where the
/// total is 0.
pub fn derive_ratio_metric(
    first_author_counts: &MetricSeries,
    total_counts: &MetricSeries,
) -> Result<MetricSeries, IngestError> {
    if first_author_counts.len() != total_counts.len() {
        return Err(IngestError::LengthMismatch {
            first: first_author_counts.len(),
            total: total_counts.len(),
        });
    }
    let values = first_author_counts
        .values
        .iter()
        .zip(&total_counts.values)
        .enumerate()
        .map(|(index, (&first, &total))| {
            if first > total {
                Err(IngestError::FirstExceedsTotal {
                    index,
                    first,
                    total,
                })
            } else if total == 0.0 {
                Ok(0.0)
            } else {
                Ok(100.0 * first / total)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MetricSeries::new(first_author_counts.first_year, values))
}

/// Aligns observations onto each labeled entity's window
/// `[anchor - window_length, anchor - 1]`.
pub fn build_cohort(
    observations: &[Observation],
    labels: &[LabelRecord],
    window_length: usize,
) -> Result<Cohort, IngestError> {
    if window_length < 2 {
        return Err(IngestError::WindowTooShort(window_length));
    }

    let mut by_entity: BTreeMap<&str, Vec<&Observation>> = BTreeMap::new();
    for obs in observations {
        by_entity
            .entry(obs.entity_id.as_str())
            .or_default()
            .push(obs);
    }
    let labeled: HashSet<&str> = labels.iter().map(|l| l.entity_id.as_str()).collect();
    let skipped_unlabeled = by_entity.keys().filter(|id| !labeled.contains(*id)).count();

    let mut entities = Vec::with_capacity(labels.len());
    for record in labels {
        let first_year = record.anchor_year - window_length as i32;
        let zeros = || MetricSeries::new(first_year, vec![0.0; window_length]);
        let mut series: [MetricSeries; 5] = std::array::from_fn(|_| zeros());
        let mut first_author = None::<MetricSeries>;
        let mut has_ratio = false;

        for obs in by_entity
            .get(record.entity_id.as_str())
            .into_iter()
            .flatten()
        {
            let offset = obs.year - first_year;
            let in_window = (0..window_length as i32).contains(&offset);
            let slot = match obs.metric {
                Measure::Metric(m) => {
                    has_ratio |= m == MetricId::FirstAuthorRatio;
                    &mut series[m.index()]
                }
                Measure::FirstAuthorPapers => first_author.get_or_insert_with(zeros),
            };
            if in_window {
                slot.values[offset as usize] = obs.value;
            }
        }

        if let Some(first) = first_author {
            if has_ratio {
                return Err(IngestError::AmbiguousRatio(record.entity_id.clone()));
            }
            let total = MetricSeries::new(
                first_year,
                series[MetricId::DomesticPapers.index()]
                    .values
                    .iter()
                    .zip(&series[MetricId::InternationalPapers.index()].values)
                    .map(|(a, b)| a + b)
                    .collect(),
            );
            series[MetricId::FirstAuthorRatio.index()] = derive_ratio_metric(&first, &total)?;
        }

        entities.push(Entity {
            id: record.entity_id.clone(),
            label: record.label,
            anchor_year: record.anchor_year,
            series,
        });
    }
    entities.sort_by(|a, b| a.id.cmp(&b.id));

    Ok(Cohort {
        window_length,
        entities,
        skipped_unlabeled,
    })
}

/// Writes every window value of every entity as an observations CSV.
pub fn write_observations<W: std::io::Write>(cohort: &Cohort, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["entity_id", "metric", "year", "value"])?;
    for e in &cohort.entities {
        for metric in MetricId::ALL {
            let series = e.series(metric);
            for (year, value) in series.years().zip(&series.values) {
                w.write_record([
                    e.id.as_str(),
                    metric.token(),
                    &year.to_string(),
                    &value.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_labels<W: std::io::Write>(cohort: &Cohort, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["entity_id", "label", "anchor_year"])?;
    for e in &cohort.entities {
        w.write_record([e.id.as_str(), e.label.as_str(), &e.anchor_year.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
