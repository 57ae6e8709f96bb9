//! C4.5-style binary decision tree over numeric features, plus stratified
//! k-fold cross-validation.
//!
//! Splits are `feature <= threshold` with thresholds at midpoints between
//! consecutive distinct values, chosen by gain ratio. After growth the tree
//! is pruned bottom-up by replacing a subtree with a leaf whenever the
//! leaf's pessimistic error estimate does not exceed the subtree's.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Label;
use crate::select::FeatureMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum ClassifyError {
    #[error("empty training matrix")]
    Empty,
    #[error("training matrix needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("training matrix has no feature columns")]
    NoFeatures,
    #[error("row {row} has width {found}, expected {expected}")]
    Width {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("{rows} rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("class counts are all zero")]
    ZeroCounts,
    #[error("invalid tree parameters: {0}")]
    Params(String),
    #[error("invalid fold count {folds} for {rows} rows")]
    Folds { folds: usize, rows: usize },
}

/// Shannon entropy, in bits, of a class-count vector.
pub fn entropy(class_counts: &[u64]) -> Result<f64, ClassifyError> {
    let total: u64 = class_counts.iter().sum();
    if total == 0 {
        return Err(ClassifyError::ZeroCounts);
    }
    Ok(entropy_of(class_counts, total as f64))
}

fn entropy_of(counts: &[u64], total: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum()
}

/// Information gain and gain ratio of partitioning `parent` class counts
/// into `branches`. Gain ratio is 0 when the split information is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitScore {
    pub gain: f64,
    pub gain_ratio: f64,
}

pub fn gain_ratio(branches: &[&[u64]]) -> Result<SplitScore, ClassifyError> {
    let width = branches.iter().map(|b| b.len()).max().unwrap_or(0);
    let mut parent = vec![0u64; width];
    for b in branches {
        for (p, c) in parent.iter_mut().zip(b.iter()) {
            *p += c;
        }
    }
    let total: u64 = parent.iter().sum();
    if total == 0 {
        return Err(ClassifyError::ZeroCounts);
    }
    let n = total as f64;
    let mut remainder = 0.0;
    let mut split_info = 0.0;
    for b in branches {
        let size: u64 = b.iter().sum();
        if size == 0 {
            continue;
        }
        let w = size as f64 / n;
        remainder += w * entropy_of(b, size as f64);
        split_info -= w * w.log2();
    }
    let gain = entropy_of(&parent, n) - remainder;
    let gain_ratio = if split_info > 0.0 {
        gain / split_info
    } else {
        0.0
    };
    Ok(SplitScore { gain, gain_ratio })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub min_leaf: usize,
    pub pruning_confidence: f64,
    /// `None` grows without a depth limit.
    pub max_depth: Option<usize>,
    pub prune: bool,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            min_leaf: 2,
            pruning_confidence: 0.25,
            max_depth: None,
            prune: true,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<(), ClassifyError> {
        if self.min_leaf < 1 {
            return Err(ClassifyError::Params("min_leaf must be >= 1".into()));
        }
        if !(self.pruning_confidence > 0.0 && self.pruning_confidence <= 1.0) {
            return Err(ClassifyError::Params(
                "pruning_confidence must be in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Class counts in `[FALSE, TRUE]` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    #[serde(rename = "FALSE")]
    pub negative: u64,
    #[serde(rename = "TRUE")]
    pub positive: u64,
}

impl ClassCounts {
    fn of(labels: &[Label], rows: &[usize]) -> Self {
        let positive = rows.iter().filter(|&&r| labels[r] == Label::True).count() as u64;
        Self {
            negative: rows.len() as u64 - positive,
            positive,
        }
    }

    pub fn total(&self) -> u64 {
        self.negative + self.positive
    }

    fn as_array(&self) -> [u64; 2] {
        [self.negative, self.positive]
    }

    /// Majority class; ties go to FALSE.
    pub fn majority(&self) -> Label {
        if self.positive > self.negative {
            Label::True
        } else {
            Label::False
        }
    }

    fn errors(&self) -> u64 {
        self.negative.min(self.positive)
    }

    fn is_pure(&self) -> bool {
        self.negative == 0 || self.positive == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        label: Label,
        distribution: ClassCounts,
    },
    Internal {
        feature: usize,
        threshold: f64,
        /// Training distribution reaching this node.
        distribution: ClassCounts,
        /// Rows with `value <= threshold`.
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn distribution(&self) -> ClassCounts {
        match self {
            TreeNode::Leaf { distribution, .. } | TreeNode::Internal { distribution, .. } => {
                *distribution
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn leaf(distribution: ClassCounts) -> TreeNode {
        TreeNode::Leaf {
            label: distribution.majority(),
            distribution,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub width: usize,
    pub root: TreeNode,
}

/// The best `(feature, threshold)` split of `rows`, if any split has
/// positive information gain and leaves at least `min_leaf` rows per side.
/// Ties within 1e-12 keep the lowest feature index, then lowest threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub score: SplitScore,
}

pub const TIE_EPSILON: f64 = 1e-12;

pub fn best_split(
    rows: &[Vec<f64>],
    labels: &[Label],
    subset: &[usize],
    min_leaf: usize,
) -> Option<Split> {
    let width = rows.first().map_or(0, |r| r.len());
    let parent = ClassCounts::of(labels, subset);
    let mut best: Option<Split> = None;
    let mut order: Vec<usize> = subset.to_vec();
    // `feature` indexes the inner row vectors, not a slice being iterated.
    #[allow(clippy::needless_range_loop)]
    for feature in 0..width {
        order.sort_by(|&a, &b| rows[a][feature].total_cmp(&rows[b][feature]));
        let mut left = ClassCounts::default();
        for (i, &r) in order.iter().enumerate().take(order.len().saturating_sub(1)) {
            if labels[r] == Label::True {
                left.positive += 1;
            } else {
                left.negative += 1;
            }
            let (here, next) = (rows[r][feature], rows[order[i + 1]][feature]);
            if here == next {
                continue;
            }
            let n_left = i + 1;
            if n_left < min_leaf || order.len() - n_left < min_leaf {
                continue;
            }
            let right = ClassCounts {
                negative: parent.negative - left.negative,
                positive: parent.positive - left.positive,
            };
            let score =
                gain_ratio(&[&left.as_array(), &right.as_array()]).expect("non-empty split");
            if score.gain <= TIE_EPSILON {
                continue;
            }
            let threshold = here + (next - here) / 2.0;
            if best.is_none_or(|b| score.gain_ratio > b.score.gain_ratio + TIE_EPSILON) {
                best = Some(Split {
                    feature,
                    threshold,
                    score,
                });
            }
        }
    }
    best
}

fn validate_matrix(matrix: &FeatureMatrix) -> Result<(), ClassifyError> {
    if matrix.rows.is_empty() {
        return Err(ClassifyError::Empty);
    }
    if matrix.rows.len() != matrix.labels.len() {
        return Err(ClassifyError::LabelCount {
            rows: matrix.rows.len(),
            labels: matrix.labels.len(),
        });
    }
    let expected = matrix.width();
    if expected == 0 {
        return Err(ClassifyError::NoFeatures);
    }
    for (row, r) in matrix.rows.iter().enumerate() {
        if r.len() != expected {
            return Err(ClassifyError::Width {
                row,
                found: r.len(),
                expected,
            });
        }
    }
    Ok(())
}

/// Grows and (optionally) prunes a tree on the whole matrix.
pub fn train(matrix: &FeatureMatrix, params: &TreeParams) -> Result<DecisionTree, ClassifyError> {
    params.validate()?;
    validate_matrix(matrix)?;
    if matrix.rows.len() < 2 {
        return Err(ClassifyError::TooFewRows(matrix.rows.len()));
    }
    let all: Vec<usize> = (0..matrix.rows.len()).collect();
    let mut root = grow(&matrix.rows, &matrix.labels, &all, params, 0);
    if params.prune {
        prune(&mut root, params.pruning_confidence);
    }
    Ok(DecisionTree {
        width: matrix.width(),
        root,
    })
}

/// Grows an unpruned tree.
pub fn grow_unpruned(
    matrix: &FeatureMatrix,
    params: &TreeParams,
) -> Result<DecisionTree, ClassifyError> {
    train(
        matrix,
        &TreeParams {
            prune: false,
            ..*params
        },
    )
}

fn grow(
    rows: &[Vec<f64>],
    labels: &[Label],
    subset: &[usize],
    params: &TreeParams,
    depth: usize,
) -> TreeNode {
    let distribution = ClassCounts::of(labels, subset);
    let depth_capped = params.max_depth.is_some_and(|d| depth >= d);
    if distribution.is_pure() || depth_capped || subset.len() < 2 * params.min_leaf {
        return TreeNode::leaf(distribution);
    }
    let Some(split) = best_split(rows, labels, subset, params.min_leaf) else {
        return TreeNode::leaf(distribution);
    };
    let (left, right): (Vec<usize>, Vec<usize>) = subset
        .iter()
        .partition(|&&r| rows[r][split.feature] <= split.threshold);
    TreeNode::Internal {
        feature: split.feature,
        threshold: split.threshold,
        distribution,
        left: Box::new(grow(rows, labels, &left, params, depth + 1)),
        right: Box::new(grow(rows, labels, &right, params, depth + 1)),
    }
}

// Normal deviates for upper-tail probabilities, interpolated for the
// confidence level as in the reference C4.5 release.
const CONFIDENCE_LEVELS: [f64; 9] = [0.0, 0.001, 0.005, 0.01, 0.05, 0.10, 0.20, 0.40, 1.00];
const DEVIATES: [f64; 9] = [4.0, 3.09, 2.58, 2.33, 1.65, 1.28, 0.84, 0.25, 0.00];

fn squared_deviate(confidence: f64) -> f64 {
    let i = CONFIDENCE_LEVELS
        .iter()
        .position(|&v| confidence <= v)
        .unwrap_or(CONFIDENCE_LEVELS.len() - 1)
        .max(1);
    let (v0, v1) = (CONFIDENCE_LEVELS[i - 1], CONFIDENCE_LEVELS[i]);
    let (d0, d1) = (DEVIATES[i - 1], DEVIATES[i]);
    let z = d0 + (d1 - d0) * (confidence - v0) / (v1 - v0);
    z * z
}

/// Extra errors to add to `errors` observed among `n` cases so the total is
/// the upper confidence bound of the binomial error rate.
pub fn added_errors(n: f64, errors: f64, confidence: f64) -> f64 {
    if errors < 1e-6 {
        return n * (1.0 - (confidence.ln() / n).exp());
    }
    if errors < 0.9999 {
        let base = n * (1.0 - (confidence.ln() / n).exp());
        return base + errors * (added_errors(n, 1.0, confidence) - base);
    }
    if errors + 0.5 >= n {
        return 0.67 * (n - errors);
    }
    let coeff = squared_deviate(confidence);
    let e = errors + 0.5;
    let upper =
        (e + coeff / 2.0 + (coeff * (e * (1.0 - e / n) + coeff / 4.0)).sqrt()) / (n + coeff);
    n * upper - errors
}

fn leaf_estimate(d: ClassCounts, confidence: f64) -> f64 {
    let n = d.total() as f64;
    let e = d.errors() as f64;
    e + added_errors(n, e, confidence)
}

/// Prunes in place and returns the subtree's estimated error count.
fn prune(node: &mut TreeNode, confidence: f64) -> f64 {
    match node {
        TreeNode::Leaf { distribution, .. } => leaf_estimate(*distribution, confidence),
        TreeNode::Internal {
            left,
            right,
            distribution,
            ..
        } => {
            let subtree = prune(left, confidence) + prune(right, confidence);
            let as_leaf = leaf_estimate(*distribution, confidence);
            if as_leaf <= subtree + 0.1 {
                *node = TreeNode::leaf(*distribution);
                as_leaf
            } else {
                subtree
            }
        }
    }
}

impl DecisionTree {
    /// Predicted label and the majority fraction of the reached leaf.
    pub fn predict(&self, row: &[f64]) -> Result<(Label, f64), ClassifyError> {
        if row.len() != self.width {
            return Err(ClassifyError::Width {
                row: 0,
                found: row.len(),
                expected: self.width,
            });
        }
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf {
                    label,
                    distribution,
                } => {
                    let total = distribution.total();
                    let hits = match label {
                        Label::True => distribution.positive,
                        Label::False => distribution.negative,
                    };
                    let confidence = if total == 0 {
                        0.0
                    } else {
                        hits as f64 / total as f64
                    };
                    return Ok((*label, confidence));
                }
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if row[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.root.node_count()
    }

    pub fn accuracy(&self, matrix: &FeatureMatrix) -> Result<f64, ClassifyError> {
        let mut correct = 0;
        for (row, label) in matrix.rows.iter().zip(&matrix.labels) {
            if self.predict(row)?.0 == *label {
                correct += 1;
            }
        }
        Ok(correct as f64 / matrix.rows.len().max(1) as f64)
    }

    /// Nested JSON view with feature names substituted for indices.
    pub fn to_named_json(&self, names: &[String]) -> serde_json::Value {
        fn node(n: &TreeNode, names: &[String]) -> serde_json::Value {
            match n {
                TreeNode::Leaf {
                    label,
                    distribution,
                } => serde_json::json!({
                    "leaf": label,
                    "distribution": distribution,
                }),
                TreeNode::Internal {
                    feature,
                    threshold,
                    distribution,
                    left,
                    right,
                } => serde_json::json!({
                    "feature": names.get(*feature).cloned().unwrap_or_else(|| format!("#{feature}")),
                    "threshold": threshold,
                    "distribution": distribution,
                    "le": node(left, names),
                    "gt": node(right, names),
                }),
            }
        }
        node(&self.root, names)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub stratified: bool,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            stratified: true,
            seed: 0,
        }
    }
}

/// Fold index for each row. Each class is shuffled with the seed and dealt
/// round-robin, continuing the deal across classes, so per-class and total
/// fold sizes each differ by at most one.
pub fn assign_folds(labels: &[Label], cv: &CvConfig) -> Result<Vec<usize>, ClassifyError> {
    let n = labels.len();
    if cv.folds < 2 || cv.folds > n {
        return Err(ClassifyError::Folds {
            folds: cv.folds,
            rows: n,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cv.seed);
    let groups: Vec<Vec<usize>> = if cv.stratified {
        [Label::True, Label::False]
            .iter()
            .map(|&class| (0..n).filter(|&i| labels[i] == class).collect())
            .collect()
    } else {
        vec![(0..n).collect()]
    };
    let mut folds = vec![0; n];
    let mut next = 0;
    for mut group in groups {
        group.shuffle(&mut rng);
        for row in group {
            folds[row] = next;
            next = (next + 1) % cv.folds;
        }
    }
    Ok(folds)
}

/// One held-out prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub entity_id: String,
    pub fold: usize,
    pub actual: Label,
    pub predicted: Label,
    pub confidence: f64,
}

/// Supplies the train and test matrices for one fold. Implementations that
/// select features per fold must use only `train` rows to do so.
pub trait FoldFeatures: Sync {
    type Error: From<ClassifyError> + Send;

    fn matrices(
        &self,
        train: &[usize],
        test: &[usize],
    ) -> Result<(FeatureMatrix, FeatureMatrix), Self::Error>;
}

/// Features fixed up front: each fold takes row subsets of one matrix.
pub struct FixedFeatures<'a>(pub &'a FeatureMatrix);

impl FoldFeatures for FixedFeatures<'_> {
    type Error = ClassifyError;

    fn matrices(
        &self,
        train: &[usize],
        test: &[usize],
    ) -> Result<(FeatureMatrix, FeatureMatrix), ClassifyError> {
        Ok((self.0.subset(train), self.0.subset(test)))
    }
}

/// Out-of-fold predictions for every row, in row order. Folds are trained
/// in parallel; output does not depend on the number of workers.
pub fn cross_validate<F: FoldFeatures>(
    labels: &[Label],
    features: &F,
    cv: &CvConfig,
    params: &TreeParams,
) -> Result<Vec<Prediction>, F::Error> {
    params.validate()?;
    let assignment = assign_folds(labels, cv)?;
    let per_fold: Vec<Vec<(usize, Prediction)>> = (0..cv.folds)
        .into_par_iter()
        .map(|fold| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..labels.len()).partition(|&i| assignment[i] == fold);
            if test.is_empty() {
                return Ok(Vec::new());
            }
            let (train_m, test_m) = features.matrices(&train, &test)?;
            let tree = train_fold(&train_m, params)?;
            test.iter()
                .zip(&test_m.rows)
                .zip(&test_m.entity_ids)
                .map(|((&row, values), id)| {
                    let (predicted, confidence) = tree.predict(values)?;
                    Ok((
                        row,
                        Prediction {
                            entity_id: id.clone(),
                            fold,
                            actual: labels[row],
                            predicted,
                            confidence,
                        },
                    ))
                })
                .collect::<Result<Vec<_>, ClassifyError>>()
                .map_err(F::Error::from)
        })
        .collect::<Result<_, F::Error>>()?;
    let mut out: Vec<(usize, Prediction)> = per_fold.into_iter().flatten().collect();
    out.sort_by_key(|(row, _)| *row);
    Ok(out.into_iter().map(|(_, p)| p).collect())
}

// A single-row training fold still gets a (constant) tree.
fn train_fold(matrix: &FeatureMatrix, params: &TreeParams) -> Result<DecisionTree, ClassifyError> {
    if matrix.rows.len() == 1 {
        validate_matrix(matrix)?;
        return Ok(DecisionTree {
            width: matrix.width(),
            root: TreeNode::leaf(ClassCounts::of(&matrix.labels, &[0])),
        });
    }
    train(matrix, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: Vec<Vec<f64>>, labels: &[bool]) -> FeatureMatrix {
        let width = rows.first().map_or(0, |r| r.len());
        FeatureMatrix {
            columns: (0..width).map(|i| format!("f{i}")).collect(),
            entity_ids: (0..rows.len()).map(|i| format!("e{i}")).collect(),
            rows,
            labels: labels
                .iter()
                .map(|&b| if b { Label::True } else { Label::False })
                .collect(),
        }
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&[5, 5]).unwrap(), 1.0);
        assert_eq!(entropy(&[10, 0]).unwrap(), 0.0);
        assert!((entropy(&[9, 5]).unwrap() - 0.940285958670631).abs() < 1e-12);
        assert_eq!(entropy(&[0, 0]), Err(ClassifyError::ZeroCounts));
    }

    #[test]
    fn gain_ratio_zero_split_info() {
        let s = gain_ratio(&[&[3, 4], &[0, 0]]).unwrap();
        assert_eq!(s.gain_ratio, 0.0);
        let perfect = gain_ratio(&[&[5, 0], &[0, 5]]).unwrap();
        assert!((perfect.gain - 1.0).abs() < 1e-12);
        assert!((perfect.gain_ratio - 1.0).abs() < 1e-12);
        assert!(gain_ratio(&[&[0, 0]]).is_err());
    }

    #[test]
    fn separable_single_feature() {
        let m = matrix(
            vec![
                vec![0.0],
                vec![0.0],
                vec![0.0],
                vec![10.0],
                vec![10.0],
                vec![10.0],
            ],
            &[false, false, false, true, true, true],
        );
        let tree = train(&m, &TreeParams::default()).unwrap();
        match &tree.root {
            TreeNode::Internal { threshold, .. } => assert!(*threshold > 0.0 && *threshold < 10.0),
            leaf => panic!("expected split, got {leaf:?}"),
        }
        assert_eq!(tree.node_count(), 3);
        assert_eq!(tree.accuracy(&m).unwrap(), 1.0);
        assert_eq!(tree.predict(&[10.0]).unwrap().0, Label::True);
        assert_eq!(tree.predict(&[0.0]).unwrap(), (Label::False, 1.0));
    }

    #[test]
    fn pure_labels_give_single_leaf() {
        let m = matrix(vec![vec![1.0], vec![2.0], vec![3.0]], &[true, true, true]);
        let tree = train(&m, &TreeParams::default()).unwrap();
        assert_eq!(tree.node_count(), 1);
        assert_eq!(tree.predict(&[100.0]).unwrap(), (Label::True, 1.0));
        assert_eq!(tree.predict(&[-5.0]).unwrap(), (Label::True, 1.0));
    }

    #[test]
    fn leaf_confidence_is_majority_fraction() {
        let tree = DecisionTree {
            width: 1,
            root: TreeNode::Leaf {
                label: Label::True,
                distribution: ClassCounts {
                    negative: 1,
                    positive: 9,
                },
            },
        };
        assert_eq!(tree.predict(&[0.0]).unwrap(), (Label::True, 0.9));
        assert!(matches!(
            tree.predict(&[0.0, 1.0]),
            Err(ClassifyError::Width { .. })
        ));
    }

    #[test]
    fn training_errors() {
        let params = TreeParams::default();
        assert_eq!(
            train(&matrix(vec![], &[]), &params),
            Err(ClassifyError::Empty)
        );
        assert_eq!(
            train(&matrix(vec![vec![1.0]], &[true]), &params),
            Err(ClassifyError::TooFewRows(1))
        );
        let mut m = matrix(vec![vec![1.0], vec![2.0]], &[true, false]);
        m.labels.pop();
        assert!(matches!(
            train(&m, &params),
            Err(ClassifyError::LabelCount { .. })
        ));
        let mut m = matrix(vec![vec![1.0], vec![2.0]], &[true, false]);
        m.rows[1].push(3.0);
        assert!(matches!(
            train(&m, &params),
            Err(ClassifyError::Width { row: 1, .. })
        ));
        let bad = TreeParams {
            pruning_confidence: 0.0,
            ..params
        };
        assert!(matches!(bad.validate(), Err(ClassifyError::Params(_))));
    }

    #[test]
    fn added_errors_reference_points() {
        // zero observed errors: n * (1 - cf^(1/n))
        let v = added_errors(6.0, 0.0, 0.25);
        assert!((v - 6.0 * (1.0 - 0.25f64.powf(1.0 / 6.0))).abs() < 1e-12);
        // the interpolated deviate at cf = 0.25 is 0.84 - 0.59 / 4
        assert!((squared_deviate(0.25) - 0.6925f64.powi(2)).abs() < 1e-12);
        assert!(added_errors(10.0, 2.0, 0.25) > 0.0);
        assert!((added_errors(2.0, 1.6, 0.25) - 0.67 * 0.4).abs() < 1e-12);
    }

    #[test]
    fn pruning_collapses_noise_split() {
        // a split that isolates a single minority row is not worth keeping
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            rows.push(vec![i as f64]);
            labels.push(i == 7 || i == 8);
        }
        let m = matrix(rows, &labels);
        let params = TreeParams {
            min_leaf: 1,
            ..TreeParams::default()
        };
        let full = grow_unpruned(&m, &params).unwrap();
        let pruned = train(&m, &params).unwrap();
        assert!(full.node_count() > 1);
        assert!(pruned.node_count() <= full.node_count());
        assert!(pruned.accuracy(&m).unwrap() <= full.accuracy(&m).unwrap());
    }

    #[test]
    fn balanced_stratified_folds() {
        let labels: Vec<Label> = (0..20)
            .map(|i| {
                if i % 2 == 0 {
                    Label::True
                } else {
                    Label::False
                }
            })
            .collect();
        let cv = CvConfig {
            folds: 10,
            stratified: true,
            seed: 7,
        };
        let folds = assign_folds(&labels, &cv).unwrap();
        for f in 0..10 {
            let members: Vec<_> = (0..20).filter(|&i| folds[i] == f).collect();
            assert_eq!(members.len(), 2);
            assert_eq!(
                members
                    .iter()
                    .filter(|&&i| labels[i] == Label::True)
                    .count(),
                1
            );
        }
        assert_eq!(folds, assign_folds(&labels, &cv).unwrap());
        assert!(matches!(
            assign_folds(&labels[..5], &cv),
            Err(ClassifyError::Folds { folds: 10, rows: 5 })
        ));
        assert!(assign_folds(&labels, &CvConfig { folds: 1, ..cv }).is_err());
    }

    #[test]
    fn cross_validation_on_separable_data() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![if i < 10 { 1.0 } else { 9.0 }])
            .collect();
        let labels: Vec<bool> = (0..20).map(|i| i >= 10).collect();
        let m = matrix(rows, &labels);
        let cv = CvConfig {
            folds: 10,
            stratified: true,
            seed: 3,
        };
        let preds =
            cross_validate(&m.labels, &FixedFeatures(&m), &cv, &TreeParams::default()).unwrap();
        assert_eq!(preds.len(), 20);
        assert!(preds.iter().all(|p| p.actual == p.predicted));
        for (i, p) in preds.iter().enumerate() {
            assert_eq!(p.entity_id, format!("e{i}"));
        }
        let again =
            cross_validate(&m.labels, &FixedFeatures(&m), &cv, &TreeParams::default()).unwrap();
        assert_eq!(preds, again);
    }

    #[test]
    fn tree_json_names_features() {
        let m = matrix(
            vec![vec![0.0], vec![0.0], vec![5.0], vec![5.0]],
            &[false, false, true, true],
        );
        let tree = train(
            &m,
            &TreeParams {
                min_leaf: 1,
                ..TreeParams::default()
            },
        )
        .unwrap();
        let json = tree.to_named_json(&["m2:Uu".to_string()]);
        assert_eq!(json["feature"], "m2:Uu");
        assert_eq!(json["threshold"], 2.5);
        assert_eq!(json["le"]["leaf"], "FALSE");
    }
}
