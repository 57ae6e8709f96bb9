//! Per-class precision/recall/F, confusion matrices and the 2x2
//! chi-squared test of independence between two classifiers'
//! correct/incorrect tallies.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::Prediction;
use crate::ingest::Label;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{predictions} predictions but {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("contingency table has a zero marginal total")]
    ZeroMarginal,
    #[error("chi-squared needs dof >= 1")]
    Dof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn correct(&self) -> u64 {
        self.tp + self.tn
    }

    pub fn incorrect(&self) -> u64 {
        self.fp + self.fn_
    }
}

pub fn confusion(
    predictions: &[Label],
    labels: &[Label],
    positive: Label,
) -> Result<ConfusionMatrix, EvalError> {
    if predictions.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &a) in predictions.iter().zip(labels) {
        match (p == positive, a == positive) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// Precision, recall and F-measure as percentages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

fn percent(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

pub fn prf(cm: &ConfusionMatrix) -> Prf {
    let precision = percent(cm.tp, cm.tp + cm.fp);
    let recall = percent(cm.tp, cm.tp + cm.fn_);
    let f_measure = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Prf {
        precision,
        recall,
        f_measure,
    }
}

/// ln Γ(x) for x > 0 (Lanczos, g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let series = COEFFS[1..]
        .iter()
        .enumerate()
        .fold(COEFFS[0], |acc, (i, c)| acc + c / (x + i as f64 + 1.0));
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + series.ln()
}

const GAMMA_EPS: f64 = 1e-15;
const GAMMA_ITERS: usize = 500;

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_continued_fraction(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..GAMMA_ITERS {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

// Modified Lentz evaluation.
fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=GAMMA_ITERS {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Upper-tail probability of the chi-squared distribution.
pub fn chi_squared_sf(statistic: f64, dof: u32) -> Result<f64, EvalError> {
    if dof == 0 {
        return Err(EvalError::Dof);
    }
    Ok(gamma_q(dof as f64 / 2.0, statistic / 2.0).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: u32,
    pub p_value: f64,
    pub yates: bool,
}

/// Pearson test on the table `[[a.0, a.1], [b.0, b.1]]`, rows being the two
/// classifiers and columns (correct, incorrect).
pub fn chi_squared_2x2(
    a: (u64, u64),
    b: (u64, u64),
    yates: bool,
) -> Result<ChiSquareResult, EvalError> {
    let table = [[a.0 as f64, a.1 as f64], [b.0 as f64, b.1 as f64]];
    let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
    let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
    let n = rows[0] + rows[1];
    if rows.contains(&0.0) || cols.contains(&0.0) {
        return Err(EvalError::ZeroMarginal);
    }
    let mut statistic = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &observed) in row.iter().enumerate() {
            let expected = rows[i] * cols[j] / n;
            let mut diff = (observed - expected).abs();
            if yates {
                diff = (diff - 0.5).max(0.0);
            }
            statistic += diff * diff / expected;
        }
    }
    Ok(ChiSquareResult {
        statistic,
        dof: 1,
        p_value: chi_squared_sf(statistic, 1)?,
        yates,
    })
}

/// Evaluation of one classifier configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub name: String,
    pub predictions: Vec<Prediction>,
}

impl RunResult {
    pub fn confusion(&self, positive: Label) -> ConfusionMatrix {
        let predicted: Vec<Label> = self.predictions.iter().map(|p| p.predicted).collect();
        let actual: Vec<Label> = self.predictions.iter().map(|p| p.actual).collect();
        confusion(&predicted, &actual, positive).expect("equal lengths")
    }

    pub fn correct_incorrect(&self) -> (u64, u64) {
        let cm = self.confusion(Label::True);
        (cm.correct(), cm.incorrect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub name: String,
    pub class: Label,
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub pair: [String; 2],
    pub statistic: f64,
    pub dof: u32,
    pub p_value: f64,
    pub yates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    pub runs: Vec<RunRow>,
    pub tests: Vec<TestRow>,
}

/// Table rows for each (run, class), TRUE first.
pub fn run_rows(run: &RunResult) -> Vec<RunRow> {
    Label::BOTH
        .iter()
        .map(|&class| {
            let cm = run.confusion(class);
            let p = prf(&cm);
            RunRow {
                name: run.name.clone(),
                class,
                precision: p.precision,
                recall: p.recall,
                f: p.f_measure,
                confusion: cm,
            }
        })
        .collect()
}

pub fn report(
    runs: &[RunResult],
    tests: &[([String; 2], ChiSquareResult)],
    config: Option<serde_json::Value>,
) -> Report {
    Report {
        config,
        runs: runs.iter().flat_map(run_rows).collect(),
        tests: tests
            .iter()
            .map(|(pair, t)| TestRow {
                pair: pair.clone(),
                statistic: t.statistic,
                dof: t.dof,
                p_value: t.p_value,
                yates: t.yates,
            })
            .collect(),
    }
}

/// Rounds half-up to one decimal (inputs are non-negative percentages).
pub fn one_decimal(x: f64) -> String {
    format!("{:.1}", (x * 10.0 + 0.5).floor() / 10.0)
}

impl Report {
    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        out.push_str("## Classification accuracy (%)\n\n");
        out.push_str("| Run | Class | Precision | Recall | F-measure |\n");
        out.push_str("|---|---|---:|---:|---:|\n");
        for row in &self.runs {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} |",
                row.name,
                row.class,
                one_decimal(row.precision),
                one_decimal(row.recall),
                one_decimal(row.f)
            );
        }
        if !self.tests.is_empty() {
            out.push_str("\n## Significance (chi-squared, correct vs incorrect)\n\n");
            out.push_str("| Pair | Statistic | dof | p | Yates |\n");
            out.push_str("|---|---:|---:|---:|---|\n");
            for t in &self.tests {
                let _ = writeln!(
                    out,
                    "| {} vs {} | {:.4} | {} | {:.6} | {} |",
                    t.pair[0], t.pair[1], t.statistic, t.dof, t.p_value, t.yates
                );
            }
        }
        out
    }
}
