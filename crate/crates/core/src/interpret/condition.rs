use std::fmt;

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, prune_explainable, DecisionTree};
use super::{epic_indicator, InterpretError, Result};
use crate::data::{ColumnKind, Scaler};
use crate::mixture::MlmModel;
use crate::scalar::Scalar;

/// Column metadata used to render conditions in raw units.
#[derive(Debug, Clone)]
pub struct FeatureView<'a, T> {
    pub names: &'a [String],
    pub kinds: &'a [ColumnKind],
    pub scaler: &'a Scaler<T>,
}

/// A split threshold in standardized and raw units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ConditionBound<T> {
    pub standardized: T,
    pub raw: T,
}

/// `lower < x[var] ≤ upper`; a missing side is unbounded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct VariableCondition<T> {
    pub var: usize,
    pub name: String,
    pub kind: ColumnKind,
    pub lower: Option<ConditionBound<T>>,
    pub upper: Option<ConditionBound<T>>,
}

impl<T: Scalar> VariableCondition<T> {
    pub fn contains(&self, v: T) -> bool {
        self.lower.is_none_or(|b| v > b.standardized)
            && self.upper.is_none_or(|b| v <= b.standardized)
    }

    /// Dummy level selected by the condition, when it pins one.
    fn dummy_value(&self) -> Option<u8> {
        let (zero, one) = (self.contains(T::zero()), self.contains(T::one()));
        match (zero, one) {
            (true, false) => Some(0),
            (false, true) => Some(1),
            _ => None,
        }
    }
}

impl<T: Scalar> fmt::Display for VariableCondition<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.kind == ColumnKind::BinaryDummy {
            if let Some(v) = self.dummy_value() {
                return match (self.name.split_once(':'), v) {
                    (Some((origin, level)), 1) => write!(f, "{origin} = {level}"),
                    (Some((origin, level)), _) => write!(f, "{origin} ≠ {level}"),
                    (None, v) => write!(f, "{} = {v}", self.name),
                };
            }
        }
        let show = |b: &ConditionBound<T>| format!("{:.4}", b.raw.to_f64_lossy());
        match (&self.lower, &self.upper) {
            (Some(lo), Some(hi)) => write!(f, "{} < {} ≤ {}", show(lo), self.name, show(hi)),
            (Some(lo), None) => write!(f, "{} > {}", self.name, show(lo)),
            (None, Some(hi)) => write!(f, "{} ≤ {}", self.name, show(hi)),
            (None, None) => write!(f, "{} any", self.name),
        }
    }
}

/// Conjunction of per-variable intervals read off one pruned tree node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ExplainableCondition<T> {
    pub epic: usize,
    /// Sorted by variable index.
    pub conditions: Vec<VariableCondition<T>>,
    pub covered: usize,
    pub ones: usize,
    pub purity: f64,
    pub depth: usize,
    pub node: usize,
    pub rows: Vec<usize>,
}

impl<T: Scalar> ExplainableCondition<T> {
    /// Whether a standardized row satisfies every interval.
    pub fn matches(&self, row: ArrayView1<T>) -> bool {
        self.conditions.iter().all(|c| c.contains(row[c.var]))
    }
}

impl<T: Scalar> fmt::Display for ExplainableCondition<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.conditions.is_empty() {
            return write!(f, "(all points)");
        }
        for (i, c) in self.conditions.iter().enumerate() {
            if i > 0 {
                write!(f, " and ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Intersects the thresholds on the path from the root to `node`.
pub fn path_to_condition<T: Scalar>(
    tree: &DecisionTree<T>,
    node: usize,
    epic: usize,
    view: &FeatureView<'_, T>,
) -> ExplainableCondition<T> {
    let path = tree.path(node);
    let mut bounds: Vec<(usize, Option<T>, Option<T>)> = Vec::new();
    for w in path.windows(2) {
        let parent = &tree.nodes[w[0]];
        let split = parent.split.expect("inner node on path");
        let went_left = parent.left == Some(w[1]);
        let entry = match bounds.iter_mut().find(|b| b.0 == split.var) {
            Some(e) => e,
            None => {
                bounds.push((split.var, None, None));
                bounds.last_mut().expect("just pushed")
            }
        };
        let t = split.threshold;
        if went_left {
            entry.2 = Some(entry.2.map_or(t, |u| if t < u { t } else { u }));
        } else {
            entry.1 = Some(entry.1.map_or(t, |l| if t > l { t } else { l }));
        }
    }
    bounds.sort_by_key(|b| b.0);
    let bound = |var: usize, v: T| ConditionBound {
        standardized: v,
        raw: view.scaler.unscale_value(var, v),
    };
    let conditions = bounds
        .into_iter()
        .map(|(var, lo, hi)| VariableCondition {
            var,
            name: view.names[var].clone(),
            kind: view.kinds[var],
            lower: lo.map(|v| bound(var, v)),
            upper: hi.map(|v| bound(var, v)),
        })
        .collect();
    let leaf = &tree.nodes[node];
    ExplainableCondition {
        epic,
        conditions,
        covered: leaf.size(),
        ones: leaf.ones,
        purity: leaf.purity(),
        depth: leaf.depth,
        node,
        rows: leaf.rows.clone(),
    }
}

/// Explainable conditions of EPIC `j`, largest first.
///
/// `x` is the standardized training matrix and `labels` its EPIC labels.
pub fn explain_epic_pr<T: Scalar>(
    model: &MlmModel<T>,
    x: ArrayView2<T>,
    labels: &[usize],
    j: usize,
    psi: f64,
    eta: usize,
    view: &FeatureView<'_, T>,
) -> Result<Vec<ExplainableCondition<T>>> {
    if j >= model.n_epics() {
        return Err(InterpretError::UnknownEpic {
            epic: j,
            n_epics: model.n_epics(),
        });
    }
    if labels.len() != x.nrows() {
        return Err(InterpretError::LabelMismatch {
            labels: labels.len(),
            rows: x.nrows(),
        });
    }
    let q = epic_indicator(labels, j);
    let tree = grow_tree(x, &q);
    let mut out: Vec<_> = prune_explainable(&tree, psi, eta)?
        .into_iter()
        .map(|node| path_to_condition(&tree, node, j, view))
        .collect();
    out.sort_by_key(|c| std::cmp::Reverse(c.covered));
    Ok(out)
}
