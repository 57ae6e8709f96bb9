//! Symbolic change-pattern features for multi-metric yearly series.
//!
//! The pipeline turns each entity's five yearly metrics into symbol
//! sequences ([`symbolize`]), counts single-metric k-grams and
//! relation-tagged cross-metric gram pairs ([`patterns`]), keeps the
//! highest-scoring patterns per entity ([`select`]) and classifies entities
//! with a C4.5-style tree under cross-validation ([`classify`], [`eval`]).
//! [`pipeline`] wires the stages together; [`synth`] produces labeled
//! cohorts with planted patterns for end-to-end checks.

pub mod classify;
pub mod eval;
pub mod ingest;
pub mod patterns;
pub mod pipeline;
pub mod select;
pub mod symbolize;
pub mod synth;

pub use ingest::{Cohort, Label, MetricId};
pub use patterns::PatternKey;
