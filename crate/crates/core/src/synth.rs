//! Seeded synthetic cohorts with a plantable change-pattern.
//!
//! Every entity gets five non-negative random walks (steps in {-1, +1, +2}
//! times a per-metric scale) starting from a widely spread per-entity
//! level, so window sums overlap across classes. Walks never stand still,
//! so an unplanted series seldom symbolizes as steady.
//! TRUE entities additionally get raw jumps injected into one metric so
//! that its symbol sequence contains the planted shape at a fixed offset.
//! Jumps are sized to dwarf the walk's own steps, so the rest of a planted
//! series reads as steady, and the planted series is lowered back towards
//! its original window sum so the plant shows in shape more than volume.
//! Each planted transition is independently reverted to the baseline step
//! with probability `noise`; at `noise = 1` the classes are exchangeable.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Cohort, Entity, Label, MetricId, MetricSeries, DEFAULT_FALSE_ANCHOR};
use crate::symbolize::{normalize_values, symbolize_diffs, Symbol, SymbolAlphabet};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("need at least one entity per class (got {n_true} TRUE, {n_false} FALSE)")]
    EmptyClass { n_true: usize, n_false: usize },
    #[error("window_length must be at least 2, got {0}")]
    WindowTooShort(usize),
    #[error("plant shape must be non-empty and use only U, u, S, d, D")]
    Shape,
    #[error("noise must lie in [0, 1], got {0}")]
    Noise(f64),
    #[error("shape of length {len} at offset {offset} does not fit {symbols} symbols")]
    DoesNotFit {
        len: usize,
        offset: usize,
        symbols: usize,
    },
    #[error("no jump size reproduces shape {shape:?} for entity {entity}")]
    Infeasible { shape: String, entity: String },
}

/// Pattern to induce in TRUE entities. `years_before_anchor` counts the
/// symbols that follow the planted shape before the window ends, so the
/// shape occupies symbol positions `[L - offset - len, L - offset)` of a
/// length-`L` sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub metric: MetricId,
    pub shape: String,
    pub years_before_anchor: usize,
    pub noise: f64,
}

impl PlantSpec {
    fn symbols(&self) -> Result<Vec<Symbol>, SynthError> {
        let symbols: Vec<Symbol> = self
            .shape
            .chars()
            .map(Symbol::try_from)
            .collect::<Result<_, _>>()
            .map_err(|_| SynthError::Shape)?;
        if symbols.is_empty() || symbols.contains(&Symbol::Zero) {
            return Err(SynthError::Shape);
        }
        Ok(symbols)
    }

    /// First planted symbol position in a sequence of `symbols` symbols.
    pub fn start(&self, symbols: usize) -> Result<usize, SynthError> {
        let len = self.shape.chars().count();
        symbols
            .checked_sub(self.years_before_anchor + len)
            .ok_or(SynthError::DoesNotFit {
                len,
                offset: self.years_before_anchor,
                symbols,
            })
    }
}

/// Step multiplier (in jump units) for each planted symbol.
fn jump_units(symbol: Symbol) -> f64 {
    match symbol {
        Symbol::BigRise => 6.0,
        Symbol::SmallRise => 2.0,
        Symbol::Steady | Symbol::Zero => 0.0,
        Symbol::SmallFall => -2.0,
        Symbol::BigFall => -6.0,
    }
}

struct WalkShape {
    max_start: u32,
    scale: f64,
    cap: Option<f64>,
}

fn walk_shape(metric: MetricId) -> WalkShape {
    match metric {
        MetricId::DomesticPapers | MetricId::InternationalPapers => WalkShape {
            max_start: 120,
            scale: 1.0,
            cap: None,
        },
        MetricId::DomesticCitations | MetricId::InternationalCitations => WalkShape {
            max_start: 120,
            scale: 10.0,
            cap: None,
        },
        MetricId::FirstAuthorRatio => WalkShape {
            max_start: 16,
            scale: 5.0,
            cap: Some(100.0),
        },
    }
}

const STEPS: [f64; 3] = [-1.0, 1.0, 2.0];

/// Walk of `len` values, lifted to stay non-negative and shifted down to
/// stay under the metric's cap rather than clipped, so every step survives.
fn baseline_walk(rng: &mut ChaCha8Rng, metric: MetricId, len: usize) -> Vec<f64> {
    let shape = walk_shape(metric);
    let mut level = f64::from(rng.gen_range(0..=shape.max_start)) * shape.scale;
    if metric == MetricId::FirstAuthorRatio {
        level += 10.0;
    }
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        if i > 0 {
            level += STEPS[rng.gen_range(0..STEPS.len())] * shape.scale;
        }
        out.push(level);
    }
    let min = out.iter().copied().fold(f64::INFINITY, f64::min);
    if min < 0.0 {
        out.iter_mut().for_each(|v| *v -= min);
    }
    fit_cap(out, shape.cap).expect("walk range fits under the cap")
}

/// Baseline with planted jumps of `unit` per jump unit at transitions
/// `start..start + shape.len()`, except where `reverted` is set. Values
/// after the plant keep following the baseline's steps. The series is
/// lifted if it would go negative.
fn planted(base: &[f64], start: usize, shape: &[Symbol], reverted: &[bool], unit: f64) -> Vec<f64> {
    let mut x = base.to_vec();
    for t in start..base.len() - 1 {
        let offset = t - start;
        let step = match shape.get(offset) {
            Some(&sym) if !reverted[offset] => jump_units(sym) * unit,
            _ => base[t + 1] - base[t],
        };
        x[t + 1] = x[t] + step;
    }
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    if min < 0.0 {
        x.iter_mut().for_each(|v| *v -= min);
    }
    x
}

fn shows_shape(x: &[f64], start: usize, shape: &[Symbol], alphabet: &SymbolAlphabet) -> bool {
    let normalized = normalize_values(x).expect("window of at least 2");
    let symbols = symbolize_diffs(&normalized, x, alphabet).expect("equal lengths");
    symbols[start..start + shape.len()] == *shape
}

/// Shifts `x` down so it stays under `cap`, or `None` when its range is too
/// wide to fit between zero and the cap.
fn fit_cap(mut x: Vec<f64>, cap: Option<f64>) -> Option<Vec<f64>> {
    let Some(cap) = cap else { return Some(x) };
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    if max <= cap {
        return Some(x);
    }
    let shift = max - cap;
    if min - shift < 0.0 {
        return None;
    }
    x.iter_mut().for_each(|v| *v -= shift);
    Some(x)
}

const MAX_BASELINE_MULTIPLIER: u32 = 8;

/// Baseline multiplier and jump unit that make the noise-free plant
/// symbolize to `shape`. The baseline is left as is whenever possible,
/// stretched when small moves would otherwise be drowned out, and (for
/// capped percentage walks) compressed when the plant would not fit. Units are
/// multiples of the walk's step `scale`, tried from the baseline's own range
/// upward and then below it.
fn find_plant(
    base: &[f64],
    start: usize,
    shape: &[Symbol],
    walk: &WalkShape,
    alphabet: &SymbolAlphabet,
) -> Option<(f64, f64)> {
    let keep = vec![false; shape.len()];
    // Smallest unit at which one background step (at most two scale units)
    // reads as steady beside even the smallest planted jump, so a partly
    // reverted plant still flattens the rest of the series.
    let smallest = shape
        .iter()
        .map(|&s| jump_units(s).abs())
        .filter(|&j| j > 0.0)
        .fold(f64::INFINITY, f64::min);
    let dominant = if smallest.is_finite() {
        (2.0 * 100.0 / alphabet.small_threshold / smallest)
            .ceil()
            .max(1.0)
    } else {
        1.0
    };
    // Counts stay whole, so only capped percentage walks may be compressed.
    let compress: &[f64] = if walk.cap.is_some() {
        &[0.5, 0.25, 0.125]
    } else {
        &[]
    };
    let multipliers = (1..=MAX_BASELINE_MULTIPLIER)
        .map(f64::from)
        .chain(compress.iter().copied());
    multipliers.into_iter().find_map(|m| {
        let scaled: Vec<f64> = base.iter().map(|v| v * m).collect();
        let min = scaled.iter().copied().fold(f64::INFINITY, f64::min);
        let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let g0 = ((max - min) / walk.scale).round().max(dominant) as u32;
        (g0..=4 * g0)
            .chain((1..g0).rev())
            .map(|g| f64::from(g) * walk.scale)
            .find(|&unit| {
                fit_cap(planted(&scaled, start, shape, &keep, unit), walk.cap)
                    .is_some_and(|x| shows_shape(&x, start, shape, alphabet))
            })
            .map(|unit| (m, unit))
    })
}

/// Shifts a planted series down, in whole steps of `scale`, towards the
/// window sum of the walk it was planted on, so the plant changes the
/// series' shape more than its volume. The series keeps a floor of one
/// `scale` so no planted year can fall into the both-zero rule. A uniform
/// shift leaves the symbols unchanged.
fn lower_towards_volume(x: &mut [f64], base: &[f64], scale: f64) {
    let excess = (x.iter().sum::<f64>() - base.iter().sum::<f64>()) / x.len() as f64;
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let room = min - scale;
    let shift = (excess.min(room) / scale).floor() * scale;
    if shift > 0.0 {
        x.iter_mut().for_each(|v| *v -= shift);
    }
}

pub fn generate_cohort(
    n_true: usize,
    n_false: usize,
    window_length: usize,
    spec: &PlantSpec,
    seed: u64,
) -> Result<Cohort, SynthError> {
    generate_cohort_with(
        n_true,
        n_false,
        window_length,
        spec,
        seed,
        &SymbolAlphabet::default(),
    )
}

pub fn generate_cohort_with(
    n_true: usize,
    n_false: usize,
    window_length: usize,
    spec: &PlantSpec,
    seed: u64,
    alphabet: &SymbolAlphabet,
) -> Result<Cohort, SynthError> {
    if n_true == 0 || n_false == 0 {
        return Err(SynthError::EmptyClass { n_true, n_false });
    }
    if window_length < 2 {
        return Err(SynthError::WindowTooShort(window_length));
    }
    if !(0.0..=1.0).contains(&spec.noise) {
        return Err(SynthError::Noise(spec.noise));
    }
    let shape = spec.symbols()?;
    let start = spec.start(window_length - 1)?;
    let walk = walk_shape(spec.metric);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = n_true + n_false;
    let width = total.to_string().len().max(3);
    let mut entities = Vec::with_capacity(total);
    for i in 0..total {
        let id = format!("r{:0width$}", i + 1);
        let label = if i < n_true {
            Label::True
        } else {
            Label::False
        };
        let anchor_year = match label {
            Label::True => rng.gen_range(DEFAULT_FALSE_ANCHOR - 9..=DEFAULT_FALSE_ANCHOR),
            Label::False => DEFAULT_FALSE_ANCHOR,
        };
        let first_year = anchor_year - window_length as i32;
        let mut series: [MetricSeries; 5] = std::array::from_fn(|m| {
            MetricSeries::new(
                first_year,
                baseline_walk(&mut rng, MetricId::ALL[m], window_length),
            )
        });
        if label == Label::True {
            let reverted: Vec<bool> = shape.iter().map(|_| rng.gen_bool(spec.noise)).collect();
            if reverted.iter().any(|r| !r) {
                let target = &mut series[spec.metric.index()];
                let (multiplier, unit) = find_plant(&target.values, start, &shape, &walk, alphabet)
                    .ok_or_else(|| SynthError::Infeasible {
                        shape: spec.shape.clone(),
                        entity: id.clone(),
                    })?;
                let scaled: Vec<f64> = target.values.iter().map(|v| v * multiplier).collect();
                let mut x = planted(&scaled, start, &shape, &reverted, unit);
                lower_towards_volume(&mut x, &target.values, walk.scale);
                if let Some(cap) = walk.cap {
                    // A partially reverted plant never spans more than the
                    // full one, so the shift only fails through rounding.
                    x = fit_cap(x.clone(), Some(cap)).unwrap_or(x);
                    x.iter_mut().for_each(|v| *v = v.min(cap));
                }
                target.values = x;
            }
        }
        entities.push(Entity {
            id,
            label,
            anchor_year,
            series,
        });
    }
    Ok(Cohort {
        window_length,
        entities,
        skipped_unlabeled: 0,
    })
}
