//! Greedy top-down type prediction and evaluation metrics.

mod metrics;

use serde::{Deserialize, Serialize};

use crate::corpus::TypeHierarchy;
use crate::scorer::ScoreVector;

pub use metrics::{evaluate, typewise_report, MetricsReport, TypeRow};

/// A single root-anchored path through the hierarchy, possibly empty.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    /// Label indices from depth 1 downwards.
    pub path: Vec<usize>,
    /// Score of each chosen node, aligned with `path`.
    pub path_scores: Vec<f64>,
}

impl Prediction {
    pub fn labels(&self, h: &TypeHierarchy) -> Vec<String> {
        let mut out: Vec<String> = self.path.iter().map(|&i| h.node(i).to_string()).collect();
        out.sort();
        out
    }
}

/// Descends from the virtual root, taking the best-scoring child at each level
/// while its score is strictly positive. Ties go to the lowest label index.
pub fn predict(scores: &ScoreVector, h: &TypeHierarchy) -> Prediction {
    assert_eq!(scores.len(), h.len(), "one score per hierarchy label");
    let mut path = Vec::new();
    let mut path_scores = Vec::new();
    let mut children = h.roots();
    while let Some(&first) = children.first() {
        let best = children
            .iter()
            .copied()
            .fold(first, |b, c| if scores.0[c] > scores.0[b] { c } else { b });
        let s = scores.0[best];
        if s <= 0.0 {
            break;
        }
        path.push(best);
        path_scores.push(s);
        children = h.children(best);
    }
    Prediction { path, path_scores }
}

/// One line of a predictions file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub mention_id: String,
    pub gold: Vec<String>,
    pub pred: Vec<String>,
    pub path_scores: Vec<f64>,
}
