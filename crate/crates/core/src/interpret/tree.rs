use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{InterpretError, Result};
use crate::scalar::Scalar;

/// `x[var] ≤ threshold` goes left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Split<T> {
    pub var: usize,
    pub threshold: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TreeNode<T> {
    pub depth: usize,
    /// Training rows reaching the node, ascending.
    pub rows: Vec<usize>,
    pub ones: usize,
    pub split: Option<Split<T>>,
    pub left: Option<usize>,
    pub right: Option<usize>,
    pub parent: Option<usize>,
}

impl<T> TreeNode<T> {
    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    pub fn purity(&self) -> f64 {
        self.ones as f64 / self.rows.len() as f64
    }
}

/// Arena of nodes; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DecisionTree<T> {
    pub nodes: Vec<TreeNode<T>>,
}

impl<T: Scalar> DecisionTree<T> {
    pub fn root(&self) -> &TreeNode<T> {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].is_leaf())
            .collect()
    }

    /// Node indices from the root to `node`, inclusive.
    pub fn path(&self, node: usize) -> Vec<usize> {
        let mut path = vec![node];
        let mut cur = node;
        while let Some(p) = self.nodes[cur].parent {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }
}

/// `a_L·b_L/n_L + a_R·b_R/n_R` as an exact fraction, proportional to the
/// weighted Gini impurity of a split.
#[derive(Debug, Clone, Copy)]
struct Impurity {
    num: u128,
    den: u128,
}

impl Impurity {
    fn new(l1: usize, l: usize, r1: usize, r: usize) -> Self {
        let (l1, l, r1, r) = (l1 as u128, l as u128, r1 as u128, r as u128);
        let num = l1 * (l - l1) * r + r1 * (r - r1) * l;
        Impurity { num, den: l * r }
    }

    fn less_than(&self, other: &Impurity) -> bool {
        self.num * other.den < other.num * self.den
    }
}

fn best_split<T: Scalar>(
    x: ArrayView2<T>,
    q: &[bool],
    rows: &[usize],
) -> Option<(Split<T>, Vec<usize>, Vec<usize>)> {
    let n = rows.len();
    let total_ones = rows.iter().filter(|&&i| q[i]).count();
    let mut best: Option<(Impurity, Split<T>)> = None;
    let mut sorted = rows.to_vec();
    for var in 0..x.ncols() {
        sorted.sort_by(|&a, &b| {
            x[[a, var]]
                .partial_cmp(&x[[b, var]])
                .expect("finite inputs")
                .then(a.cmp(&b))
        });
        let mut left_ones = 0;
        for k in 0..n - 1 {
            if q[sorted[k]] {
                left_ones += 1;
            }
            let (lo, hi) = (x[[sorted[k], var]], x[[sorted[k + 1], var]]);
            if lo == hi {
                continue;
            }
            let imp = Impurity::new(left_ones, k + 1, total_ones - left_ones, n - k - 1);
            if best.as_ref().is_none_or(|(b, _)| imp.less_than(b)) {
                let mut t = (lo + hi) / T::lit(2.0);
                if t >= hi {
                    t = lo;
                }
                best = Some((imp, Split { var, threshold: t }));
            }
        }
    }
    let (_, split) = best?;
    let (left, right) = rows
        .iter()
        .partition(|&&i| x[[i, split.var]] <= split.threshold);
    Some((split, left, right))
}

/// Fully grown CART tree on the Gini criterion. Nodes stop splitting when
/// they are pure or all their rows are identical.
pub fn grow_tree<T: Scalar>(x: ArrayView2<T>, q: &[bool]) -> DecisionTree<T> {
    assert_eq!(x.nrows(), q.len(), "one label per row");
    let rows: Vec<usize> = (0..x.nrows()).collect();
    let ones = q.iter().filter(|&&v| v).count();
    let mut nodes = vec![TreeNode {
        depth: 0,
        rows,
        ones,
        split: None,
        left: None,
        right: None,
        parent: None,
    }];
    let mut stack = vec![0];
    while let Some(id) = stack.pop() {
        let node = &nodes[id];
        if node.ones == 0 || node.ones == node.size() {
            continue;
        }
        let Some((split, left, right)) = best_split(x, q, &node.rows) else {
            continue;
        };
        let depth = node.depth + 1;
        let mut child = |rows: Vec<usize>| {
            let ones = rows.iter().filter(|&&i| q[i]).count();
            nodes.push(TreeNode {
                depth,
                rows,
                ones,
                split: None,
                left: None,
                right: None,
                parent: Some(id),
            });
            nodes.len() - 1
        };
        let l = child(left);
        let r = child(right);
        nodes[id].split = Some(split);
        nodes[id].left = Some(l);
        nodes[id].right = Some(r);
        // left subtree first in the arena order
        stack.push(r);
        stack.push(l);
    }
    DecisionTree { nodes }
}

/// Shallowest nodes on every path whose class-1 fraction reaches `psi`,
/// kept when their size exceeds `eta`. Returned in depth-first order.
pub fn prune_explainable<T: Scalar>(
    tree: &DecisionTree<T>,
    psi: f64,
    eta: usize,
) -> Result<Vec<usize>> {
    if !(psi > 0.0 && psi <= 1.0) {
        return Err(InterpretError::BadPsi(psi));
    }
    let mut out = Vec::new();
    let mut stack = vec![0];
    while let Some(id) = stack.pop() {
        let node = &tree.nodes[id];
        if node.purity() >= psi {
            if node.size() > eta {
                out.push(id);
            }
            continue;
        }
        if let (Some(l), Some(r)) = (node.left, node.right) {
            stack.push(r);
            stack.push(l);
        }
    }
    Ok(out)
}
