//! Hand-rolled gradient boosting over regression trees, used to attribute
//! predictive contribution to individual alphas.
//!
//! Squared loss throughout: each tree fits the current residuals with exact
//! greedy splits, where a split's quality is the squared-error reduction
//! `SE(node) - SE(left) - SE(right)` and candidate thresholds are midpoints
//! between consecutive distinct sorted feature values. Importance is gain
//! accumulation: every accepted split adds its reduction to its feature's
//! total. Ties on gain resolve to the lowest feature index, then the lowest
//! threshold; the fit is fully deterministic, and the `seed` argument is
//! only echoed into the model for provenance.

use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct BoostConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            n_trees: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 5,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::Invalid("max_depth must be at least 1".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::Invalid("min_samples_leaf must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Invalid(format!(
                "learning_rate must be in (0, 1], got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn predict(&self, row: impl Fn(usize) -> f64 + Copy) -> f64 {
        match self {
            Node::Leaf { value } => *value,
            Node::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                if row(*feature) <= *threshold {
                    left.predict(row)
                } else {
                    right.predict(row)
                }
            }
        }
    }

    fn accumulate_gain(&self, gain: &mut [f64]) {
        if let Node::Split {
            feature,
            gain: g,
            left,
            right,
            ..
        } = self
        {
            gain[*feature] += *g;
            left.accumulate_gain(gain);
            right.accumulate_gain(gain);
        }
    }
}

/// A fitted boosted ensemble. Prediction is
/// `init + learning_rate * sum(tree outputs)`.
#[derive(Debug, Clone)]
pub struct BoostModel {
    pub init: f64,
    pub trees: Vec<Node>,
    pub config: BoostConfig,
    pub seed: u64,
    pub n_features: usize,
    /// Per-feature total split gain, accumulated over all trees.
    pub gain: Vec<f64>,
}

impl BoostModel {
    /// Predicts one row given feature-major columns (the training layout).
    pub fn predict_from_columns(&self, features: &[Vec<f64>], row: usize) -> f64 {
        let lookup = |f: usize| features[f][row];
        self.init
            + self.config.learning_rate
                * self
                    .trees
                    .iter()
                    .map(|t| t.predict(lookup))
                    .sum::<f64>()
    }

    /// Predicts one row given a feature vector.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let lookup = |f: usize| row[f];
        self.init
            + self.config.learning_rate
                * self
                    .trees
                    .iter()
                    .map(|t| t.predict(lookup))
                    .sum::<f64>()
    }
}

/// Gain importance and its normalized form.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct GainReport {
    pub importance: Vec<f64>,
    /// Importance scaled to sum to 1; all zeros when no split was made.
    pub normalized: Vec<f64>,
}

pub fn gain_importance(model: &BoostModel) -> GainReport {
    let importance = model.gain.clone();
    let total: f64 = importance.iter().sum();
    let normalized = if total > 0.0 {
        importance.iter().map(|g| g / total).collect()
    } else {
        vec![0.0; importance.len()]
    };
    GainReport {
        importance,
        normalized,
    }
}

/// Best split found for one feature within one node.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
    left_count: usize,
}

/// Fits a boosted ensemble on feature-major columns (`features[f][row]`).
/// Inputs must be finite and every column the same length as `y`. A constant
/// target yields a model with zero trees and zero importance; boosting also
/// stops early once a tree cannot find any positive-gain split.
pub fn fit(features: &[Vec<f64>], y: &[f64], config: &BoostConfig, seed: u64) -> Result<BoostModel> {
    config.validate()?;
    let n = y.len();
    if features.is_empty() {
        return Err(Error::Invalid("boosting needs at least one feature".into()));
    }
    for (f, col) in features.iter().enumerate() {
        if col.len() != n {
            return Err(Error::Invalid(format!(
                "feature {f} has {} rows, target has {n}",
                col.len()
            )));
        }
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "feature {f} contains a non-finite value"
            )));
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("target contains a non-finite value".into()));
    }
    if n < 2 * config.min_samples_leaf {
        return Err(Error::Invalid(format!(
            "{n} rows cannot satisfy min_samples_leaf {} on both sides of any split",
            config.min_samples_leaf
        )));
    }

    let init = y.iter().sum::<f64>() / n as f64;
    let mut residual: Vec<f64> = y.iter().map(|v| v - init).collect();
    let mut model = BoostModel {
        init,
        trees: Vec::new(),
        config: *config,
        seed,
        n_features: features.len(),
        gain: vec![0.0; features.len()],
    };

    let all_rows: Vec<usize> = (0..n).collect();
    for _ in 0..config.n_trees {
        let tree = grow(features, &residual, &all_rows, 0, config);
        if matches!(tree, Node::Leaf { .. }) {
            // no positive-gain split anywhere; further trees cannot improve
            break;
        }
        for &row in &all_rows {
            let pred = tree.predict(|f| features[f][row]);
            residual[row] -= config.learning_rate * pred;
        }
        tree.accumulate_gain(&mut model.gain);
        model.trees.push(tree);
    }
    Ok(model)
}

fn grow(
    features: &[Vec<f64>],
    residual: &[f64],
    rows: &[usize],
    depth: usize,
    config: &BoostConfig,
) -> Node {
    let mean = rows.iter().map(|&r| residual[r]).sum::<f64>() / rows.len() as f64;
    if depth >= config.max_depth || rows.len() < 2 * config.min_samples_leaf {
        return Node::Leaf { value: mean };
    }
    let best = match best_split(features, residual, rows, config.min_samples_leaf) {
        Some(c) => c,
        None => return Node::Leaf { value: mean },
    };
    let mut left_rows = Vec::with_capacity(best.left_count);
    let mut right_rows = Vec::with_capacity(rows.len() - best.left_count);
    for &r in rows {
        if features[best.feature][r] <= best.threshold {
            left_rows.push(r);
        } else {
            right_rows.push(r);
        }
    }
    let left = grow(features, residual, &left_rows, depth + 1, config);
    let right = grow(features, residual, &right_rows, depth + 1, config);
    Node::Split {
        feature: best.feature,
        threshold: best.threshold,
        gain: best.gain,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// Exact greedy search over all features. Per-feature scans are independent
/// and may run in parallel; the cross-feature reduction is sequential in
/// feature order so equal gains deterministically resolve to the lowest
/// feature index (each scan already keeps its lowest tying threshold).
fn best_split(
    features: &[Vec<f64>],
    residual: &[f64],
    rows: &[usize],
    min_samples_leaf: usize,
) -> Option<Candidate> {
    let per_feature: Vec<Option<Candidate>> = par::map_range(features.len(), |f| {
        best_split_for_feature(&features[f], residual, rows, f, min_samples_leaf)
    });
    let mut best: Option<Candidate> = None;
    for cand in per_feature.into_iter().flatten() {
        match &best {
            Some(b) if cand.gain <= b.gain => {}
            _ => best = Some(cand),
        }
    }
    best
}

fn best_split_for_feature(
    column: &[f64],
    residual: &[f64],
    rows: &[usize],
    feature: usize,
    min_samples_leaf: usize,
) -> Option<Candidate> {
    let mut pairs: Vec<(f64, f64)> = rows.iter().map(|&r| (column[r], residual[r])).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let n = pairs.len();

    let total_sum: f64 = pairs.iter().map(|p| p.1).sum();
    let total_sq: f64 = pairs.iter().map(|p| p.1 * p.1).sum();
    let node_se = total_sq - total_sum * total_sum / n as f64;

    let mut best: Option<Candidate> = None;
    let mut left_sum = 0.0;
    let mut left_sq = 0.0;
    for i in 0..n - 1 {
        left_sum += pairs[i].1;
        left_sq += pairs[i].1 * pairs[i].1;
        // split only between distinct feature values
        if pairs[i].0 == pairs[i + 1].0 {
            continue;
        }
        let left_count = i + 1;
        let right_count = n - left_count;
        if left_count < min_samples_leaf || right_count < min_samples_leaf {
            continue;
        }
        let right_sum = total_sum - left_sum;
        let right_sq = total_sq - left_sq;
        let left_se = left_sq - left_sum * left_sum / left_count as f64;
        let right_se = right_sq - right_sum * right_sum / right_count as f64;
        let gain = node_se - left_se - right_se;
        if gain <= 0.0 {
            continue;
        }
        // ascending scan plus strict improvement keeps the lowest threshold
        // among equal gains
        if best.map_or(true, |b| gain > b.gain) {
            best = Some(Candidate {
                feature,
                threshold: (pairs[i].0 + pairs[i + 1].0) / 2.0,
                gain,
                left_count,
            });
        }
    }
    best
}
