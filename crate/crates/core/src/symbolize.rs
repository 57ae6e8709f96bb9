//! Difference-based symbolization of yearly series.
//!
//! A raw series is min-max scaled to `[0, 100]` per (entity, metric); each
//! year-over-year change of the scaled series is then mapped to one of six
//! symbols:
//!
//! | symbol | condition on the change `d` (points)        |
//! |--------|---------------------------------------------|
//! | `U`    | `d > big`                                   |
//! | `u`    | `small < d <= big`                          |
//! | `S`    | `-small <= d <= small`                      |
//! | `d`    | `-big <= d < -small`                        |
//! | `D`    | `d < -big`                                  |
//! | `0`    | raw value is zero in both years (overrides) |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{MetricId, MetricSeries};

#[derive(Debug, Error, PartialEq)]
pub enum SymbolizeError {
    #[error("thresholds must satisfy 0 < small < big <= 100 (small={small}, big={big})")]
    Thresholds { small: f64, big: f64 },
    #[error("series too short: {0} values, need at least 2")]
    TooShort(usize),
    #[error("normalized and raw series differ in length ({normalized} vs {raw})")]
    LengthMismatch { normalized: usize, raw: usize },
    #[error("invalid symbol {0:?}")]
    InvalidSymbol(char),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    BigRise,
    SmallRise,
    Steady,
    SmallFall,
    BigFall,
    Zero,
}

impl Symbol {
    pub const ALL: [Symbol; 6] = [
        Symbol::BigRise,
        Symbol::SmallRise,
        Symbol::Steady,
        Symbol::SmallFall,
        Symbol::BigFall,
        Symbol::Zero,
    ];

    pub fn as_char(self) -> char {
        match self {
            Symbol::BigRise => 'U',
            Symbol::SmallRise => 'u',
            Symbol::Steady => 'S',
            Symbol::SmallFall => 'd',
            Symbol::BigFall => 'D',
            Symbol::Zero => '0',
        }
    }
}

impl TryFrom<char> for Symbol {
    type Error = SymbolizeError;

    fn try_from(c: char) -> Result<Self, Self::Error> {
        Symbol::ALL
            .into_iter()
            .find(|s| s.as_char() == c)
            .ok_or(SymbolizeError::InvalidSymbol(c))
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Change thresholds, in normalized points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolAlphabet {
    pub big_threshold: f64,
    pub small_threshold: f64,
}

impl Default for SymbolAlphabet {
    fn default() -> Self {
        Self {
            big_threshold: 30.0,
            small_threshold: 5.0,
        }
    }
}

impl SymbolAlphabet {
    pub fn new(big_threshold: f64, small_threshold: f64) -> Result<Self, SymbolizeError> {
        let alphabet = Self {
            big_threshold,
            small_threshold,
        };
        alphabet.validate()?;
        Ok(alphabet)
    }

    pub fn validate(&self) -> Result<(), SymbolizeError> {
        let (small, big) = (self.small_threshold, self.big_threshold);
        if 0.0 < small && small < big && big <= 100.0 {
            Ok(())
        } else {
            Err(SymbolizeError::Thresholds { small, big })
        }
    }

    /// Symbol for a change of `d` points between two years whose raw values
    /// are not both zero.
    pub fn classify(&self, d: f64) -> Symbol {
        let (small, big) = (self.small_threshold, self.big_threshold);
        if d > big {
            Symbol::BigRise
        } else if d > small {
            Symbol::SmallRise
        } else if d >= -small {
            Symbol::Steady
        } else if d >= -big {
            Symbol::SmallFall
        } else {
            Symbol::BigFall
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSeries {
    pub values: Vec<f64>,
}

/// Min-max scales a series to `[0, 100]`. A constant series maps to zeros.
pub fn normalize(raw: &MetricSeries) -> Result<NormalizedSeries, SymbolizeError> {
    normalize_values(&raw.values)
}

pub fn normalize_values(raw: &[f64]) -> Result<NormalizedSeries, SymbolizeError> {
    if raw.len() < 2 {
        return Err(SymbolizeError::TooShort(raw.len()));
    }
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = max - min;
    let values = if span > 0.0 {
        raw.iter().map(|v| 100.0 * (v - min) / span).collect()
    } else {
        vec![0.0; raw.len()]
    };
    Ok(NormalizedSeries { values })
}

/// Symbols for one (entity, metric) series; length is one less than the
/// window.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolSequence {
    pub metric: MetricId,
    pub symbols: Vec<Symbol>,
}

impl SymbolSequence {
    pub fn new(metric: MetricId, symbols: Vec<Symbol>) -> Self {
        Self { metric, symbols }
    }

    pub fn parse(metric: MetricId, text: &str) -> Result<Self, SymbolizeError> {
        let symbols = text
            .chars()
            .map(Symbol::try_from)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { metric, symbols })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

impl fmt::Display for SymbolSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.symbols.iter().try_for_each(|s| s.fmt(f))
    }
}

impl FromStr for SymbolSequence {
    type Err = SymbolizeError;

    /// Parses with a placeholder metric; callers set `metric` afterwards.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(MetricId::DomesticPapers, s)
    }
}

pub fn symbolize_diffs(
    normalized: &NormalizedSeries,
    raw: &[f64],
    alphabet: &SymbolAlphabet,
) -> Result<Vec<Symbol>, SymbolizeError> {
    if normalized.values.len() != raw.len() {
        return Err(SymbolizeError::LengthMismatch {
            normalized: normalized.values.len(),
            raw: raw.len(),
        });
    }
    if raw.len() < 2 {
        return Err(SymbolizeError::TooShort(raw.len()));
    }
    Ok(raw
        .windows(2)
        .zip(normalized.values.windows(2))
        .map(|(r, n)| {
            if r[0] == 0.0 && r[1] == 0.0 {
                Symbol::Zero
            } else {
                alphabet.classify(n[1] - n[0])
            }
        })
        .collect())
}

/// Normalizes and symbolizes one metric series.
pub fn symbolize_series(
    metric: MetricId,
    raw: &MetricSeries,
    alphabet: &SymbolAlphabet,
) -> Result<SymbolSequence, SymbolizeError> {
    let normalized = normalize(raw)?;
    let symbols = symbolize_diffs(&normalized, &raw.values, alphabet)?;
    Ok(SymbolSequence::new(metric, symbols))
}
