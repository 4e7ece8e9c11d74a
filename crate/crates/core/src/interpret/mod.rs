//! EPIC interpretation: explainable dimensions from marginal densities and
//! explainable conditions from purity-pruned decision trees.

mod condition;
mod lds;
mod tree;

pub use condition::{
    explain_epic_pr, path_to_condition, ConditionBound, ExplainableCondition, FeatureView,
    VariableCondition,
};
pub use lds::{explainable_dimensions, marginal_map_classify, ExplainableDims, LdsStep};
pub use tree::{grow_tree, prune_explainable, DecisionTree, Split, TreeNode};

use thiserror::Error;

use crate::gmm::GmmError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpretError {
    #[error("EPIC {epic} does not exist; the model has {n_epics}")]
    UnknownEpic { epic: usize, n_epics: usize },
    #[error("EPIC {0} has no training samples")]
    EmptyEpic(usize),
    #[error("variable subset is empty")]
    EmptySubset,
    #[error("threshold must lie in (0, 1), got {0}")]
    BadXi(f64),
    #[error("purity threshold must lie in (0, 1], got {0}")]
    BadPsi(f64),
    #[error("{labels} EPIC labels for {rows} training rows")]
    LabelMismatch { labels: usize, rows: usize },
    #[error(transparent)]
    Density(#[from] GmmError),
}

pub type Result<T> = std::result::Result<T, InterpretError>;

/// Indicator of membership in EPIC `j`.
pub fn epic_indicator(labels: &[usize], j: usize) -> Vec<bool> {
    labels.iter().map(|&l| l == j).collect()
}

#[cfg(test)]
pub(crate) mod testing {
    use ndarray::{Array1, ArrayView2};

    use crate::data::{Scaler, Task};
    use crate::gmm::{fit_labeled, CovarianceKind, Gmm};
    use crate::linmod::LinearModel;
    use crate::mixture::{Epic, MlmModel};

    /// One Gaussian EPIC per label group, fitted directly to `x`.
    pub fn model_from_labels(x: ArrayView2<f64>, labels: &[usize], k: usize) -> MlmModel<f64> {
        let g = fit_labeled(x, labels, k, CovarianceKind::Full).unwrap();
        let p = x.ncols();
        let epics = (0..k)
            .map(|e| Epic {
                local_model: LinearModel::constant(0.0, p, Task::Regression),
                density: Gmm::from_parts(
                    Array1::from_elem(1, 1.0),
                    vec![g.means()[e].clone()],
                    vec![g.covariances()[e].clone()],
                    CovarianceKind::Full,
                )
                .unwrap(),
                prior: g.priors()[e],
                member_cells: vec![e],
                size: labels.iter().filter(|&&l| l == e).count(),
            })
            .collect();
        MlmModel {
            epics,
            scaler: Scaler::identity(p),
            task: Task::Regression,
            cov_kind: CovarianceKind::Full,
            cell_to_epic: (0..k).collect(),
            train_epic_labels: labels.to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::testing::model_from_labels;
    use super::*;
    use crate::data::{ColumnKind, Scaler};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn planted_axis_aligned_epic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200;
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-4.0..4.0));
        let labels: Vec<usize> = (0..n).map(|i| usize::from(x[[i, 0]] > 2.0)).collect();
        let size = labels.iter().filter(|&&l| l == 1).count();
        let model = model_from_labels(x.view(), &labels, 2);
        let names: Vec<String> = ["x1", "x2", "x3"].map(String::from).to_vec();
        let kinds = vec![ColumnKind::Continuous; 3];
        let scaler = Scaler::identity(3);
        let view = FeatureView {
            names: &names,
            kinds: &kinds,
            scaler: &scaler,
        };
        let conds = explain_epic_pr(&model, x.view(), &labels, 1, 1.0, 5, &view).unwrap();
        assert_eq!(conds.len(), 1);
        let c = &conds[0];
        assert_eq!(c.covered, size);
        assert_eq!(c.conditions.len(), 1);
        assert_eq!(c.conditions[0].var, 0);
        assert!(c.conditions[0].upper.is_none());
        let t = c.conditions[0].lower.unwrap().standardized;
        let below = (0..n)
            .map(|i| x[[i, 0]])
            .filter(|&v| v <= 2.0)
            .fold(f64::MIN, f64::max);
        let above = (0..n)
            .map(|i| x[[i, 0]])
            .filter(|&v| v > 2.0)
            .fold(f64::MAX, f64::min);
        assert_eq!(t, (below + above) / 2.0);

        let zero = explain_epic_pr(&model, x.view(), &labels, 0, 1.0, 5, &view).unwrap();
        assert_eq!(zero[0].covered, n - size);
        assert_eq!(
            explain_epic_pr(&model, x.view(), &labels, 2, 1.0, 5, &view).unwrap_err(),
            InterpretError::UnknownEpic {
                epic: 2,
                n_epics: 2
            }
        );
    }
}
