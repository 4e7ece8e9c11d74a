//! End-to-end training: network, layer cells, co-supervision, per-cell fits,
//! merging and the final mixture; plus cross-validation of the per-layer K.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::data::{ColumnKind, DataError, Dataset, Scaler, Task};
use crate::gmm::{CovarianceKind, GmmOptions};
use crate::linmod::{fit_for_task, LinearModel};
use crate::metrics::{auc, rmse, threshold_labels, Confusion};
use crate::mixture::{
    build_mlm, distance_matrix, merge_cells, singleton_memberships, BuildOptions, Merge,
    MixtureError, MlmModel, PredictMode,
};
use crate::mlp::{train_mlp, MlpConfig, MlpError, MlpModel};
use crate::partition::{
    assign_cells, cosupervise_all, layer_cells, CellPartition, CoSupervision, LayerClusterings,
    PartitionError,
};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("data: {0}")]
    Data(#[from] DataError),
    #[error("network: {0}")]
    Mlp(#[from] MlpError),
    #[error("cells: {0}")]
    Partition(#[from] PartitionError),
    #[error("mixture: {0}")]
    Mixture(#[from] MixtureError),
    #[error("cross-validation: fold {fold} has {rows} training rows, fewer than K = {k}")]
    FoldTooSmall { fold: usize, rows: usize, k: usize },
    #[error("cross-validation: fold {0} holds a single class, AUC is undefined")]
    SingleClassFold(usize),
    #[error("cross-validation: {0}")]
    BadGrid(String),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

/// Everything [`fit_pipeline`] needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub mlp: MlpConfig,
    pub k: usize,
    pub layer_cov: CovarianceKind,
    pub em_max_iter: usize,
    pub em_tol: f64,
    pub em_restarts: usize,
    pub m: usize,
    pub epsilon: f64,
    pub perturb_dummies: bool,
    pub j: usize,
    pub alpha: f64,
    pub epic_cov: CovarianceKind,
    pub standardize: bool,
    pub seed: u64,
}

impl PipelineParams {
    pub fn from_config(cfg: &PipelineConfig) -> Self {
        PipelineParams {
            mlp: cfg.mlp_config(),
            k: cfg.cells.k,
            layer_cov: cfg.cells.cov_kind,
            em_max_iter: cfg.cells.em_max_iter,
            em_tol: cfg.cells.em_tol,
            em_restarts: cfg.cells.em_restarts,
            m: cfg.cells.m,
            epsilon: cfg.cells.epsilon,
            perturb_dummies: cfg.cells.perturb_dummies,
            j: cfg.mixture.j,
            alpha: cfg.lasso_alpha(),
            epic_cov: cfg.mixture.cov_kind,
            standardize: cfg.data.standardize,
            seed: cfg.seed,
        }
    }

    /// Defaults for a task: widths [16, 16], K = 2, J̃ = 2, m = 100, ε = 0.1.
    pub fn for_task(task: Task) -> Self {
        PipelineParams {
            mlp: MlpConfig::default(),
            k: 2,
            layer_cov: CovarianceKind::Full,
            em_max_iter: 100,
            em_tol: 1e-6,
            em_restarts: 5,
            m: 100,
            epsilon: 0.1,
            perturb_dummies: true,
            j: 2,
            alpha: if task.is_classification() { 0.01 } else { 0.0 },
            epic_cov: CovarianceKind::Full,
            standardize: true,
            seed: 0,
        }
    }
}

/// A trained pipeline. `mlm` is the merged (EPIC) model and `cell_mlm` the
/// unmerged one with an EPIC per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedPipeline<T> {
    pub scaler: Scaler<T>,
    pub mlp: MlpModel<T>,
    pub layers: LayerClusterings<T>,
    pub partition: CellPartition,
    pub distances: Array2<T>,
    pub merge: Merge,
    pub cell_mlm: MlmModel<T>,
    pub mlm: MlmModel<T>,
    pub j_requested: usize,
}

impl<T: Scalar> FittedPipeline<T> {
    pub fn n_cells(&self) -> usize {
        self.partition.n_cells()
    }

    pub fn cell_models(&self) -> Vec<&LinearModel<T>> {
        self.cell_mlm.epics.iter().map(|e| &e.local_model).collect()
    }
}

/// Trains every stage on a dummy-encoded dataset in raw units.
pub fn fit_pipeline<T: Scalar>(
    train: &Dataset<T>,
    params: &PipelineParams,
) -> Result<FittedPipeline<T>> {
    train.schema()?;
    let scaler = if params.standardize {
        Scaler::fit(train)
    } else {
        Scaler::identity(train.n_features())
    };
    let xs = scaler.transform(&train.x);
    let std_train = Dataset {
        x: xs.clone(),
        ..train.clone()
    };
    let mlp = train_mlp(
        &std_train,
        &MlpConfig {
            seed: params.seed,
            ..params.mlp.clone()
        },
    )?;

    let base = GmmOptions {
        cov_kind: params.layer_cov,
        seed: params.seed,
        max_iter: params.em_max_iter,
        tol: params.em_tol,
        restarts: params.em_restarts,
        ..GmmOptions::new(params.k)
    };
    let ks = vec![params.k; mlp.n_hidden()];
    let layers = layer_cells(&mlp, xs.view(), &ks, &base)?;
    let partition = assign_cells(&layers, &mlp, xs.view())?;
    let n_cells = partition.n_cells();
    log::info!(
        "{} occupied cells out of {} possible",
        n_cells,
        partition.n_possible
    );

    let frozen: Vec<bool> = train
        .column_kinds
        .iter()
        .map(|&k| !params.perturb_dummies && k == ColumnKind::BinaryDummy)
        .collect();
    let cos = CoSupervision {
        m: params.m,
        epsilon: params.epsilon,
        seed: params.seed,
    };
    let cosets = cosupervise_all(&partition, xs.view(), train.y.view(), &mlp, &cos, &frozen)?;

    let opts = BuildOptions {
        task: train.task,
        alpha: params.alpha,
        cov_kind: params.epic_cov,
    };
    let cell_mlm = build_mlm(
        xs.view(),
        &partition,
        &cosets,
        &singleton_memberships(n_cells),
        scaler.clone(),
        &opts,
    )?;

    let models: Vec<LinearModel<T>> = cell_mlm
        .epics
        .iter()
        .map(|e| e.local_model.clone())
        .collect();
    let inputs: Vec<Array2<T>> = cosets.iter().map(|c| c.combined().0).collect();
    let distances = distance_matrix(&models, &inputs, train.task)?;

    let j = if params.j > n_cells {
        log::warn!(
            "J = {} exceeds the {} occupied cells; using J = {}",
            params.j,
            n_cells,
            n_cells
        );
        n_cells
    } else {
        params.j
    };
    let merge = merge_cells(&distances, j)?;
    let mlm = build_mlm(
        xs.view(),
        &partition,
        &cosets,
        &merge.memberships,
        scaler.clone(),
        &opts,
    )?;
    log::info!(
        "{} EPICs with sizes {:?}",
        mlm.n_epics(),
        mlm.epics.iter().map(|e| e.size).collect::<Vec<_>>()
    );

    Ok(FittedPipeline {
        scaler,
        mlp,
        layers,
        partition,
        distances,
        merge,
        cell_mlm,
        mlm,
        j_requested: params.j,
    })
}

/// Accuracy of one predictor on one dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub n: usize,
    pub rmse: Option<f64>,
    pub auc: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
}

impl Evaluation {
    pub fn of<T: Scalar>(pred: &[T], truth: &[T], task: Task) -> Self {
        match task {
            Task::Regression => Evaluation {
                n: pred.len(),
                rmse: Some(rmse(pred, truth)),
                auc: None,
                f1: None,
                accuracy: None,
            },
            Task::BinaryClassification => {
                let labels: Vec<bool> = truth.iter().map(|&t| t == T::one()).collect();
                let c = Confusion::from_labels(&threshold_labels(pred), &labels);
                Evaluation {
                    n: pred.len(),
                    rmse: None,
                    auc: auc(pred, &labels),
                    f1: Some(c.f1()),
                    accuracy: Some((c.tp + c.tn) as f64 / pred.len() as f64),
                }
            }
        }
    }

    /// RMSE for regression, AUC for classification.
    pub fn headline(&self) -> Option<f64> {
        self.rmse.or(self.auc)
    }
}

/// Predictions of an MLM on raw-unit inputs.
pub fn mlm_predict<T: Scalar>(
    model: &MlmModel<T>,
    x_raw: ArrayView2<T>,
    mode: PredictMode,
) -> Result<Array1<T>> {
    let xs = model.scaler.transform(&x_raw.to_owned());
    Ok(model.predict_batch_standardized(xs.view(), mode)?)
}

/// Network predictions on raw-unit inputs.
pub fn mlp_predict<T: Scalar>(
    mlp: &MlpModel<T>,
    scaler: &Scaler<T>,
    x_raw: ArrayView2<T>,
) -> std::result::Result<Array1<T>, MlpError> {
    mlp.predict_batch(scaler.transform(&x_raw.to_owned()).view())
}

/// One cross-validation candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub k: usize,
    pub fold_scores: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub chosen: usize,
    /// RMSE (lower is better) or AUC (higher is better).
    pub metric: String,
    pub rows: Vec<CvRow>,
}

/// K-fold cross-validation of the per-layer K using the unmerged mixture.
/// Ties go to the smaller K.
pub fn cross_validate_k<T: Scalar>(
    train: &Dataset<T>,
    params: &PipelineParams,
    grid: &[usize],
    folds: usize,
) -> Result<CvResult> {
    if grid.is_empty() {
        return Err(PipelineError::BadGrid("empty grid".into()));
    }
    if folds < 2 {
        return Err(PipelineError::BadGrid(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    let splits = crate::data::kfold_indices(train.y.view(), train.task, folds, params.seed)?;
    let classify = train.task.is_classification();
    let mut rows = Vec::with_capacity(grid.len());
    for &k in grid {
        let mut fold_scores = Vec::with_capacity(splits.len());
        for (f, (tr, va)) in splits.iter().enumerate() {
            if tr.len() < k {
                return Err(PipelineError::FoldTooSmall {
                    fold: f,
                    rows: tr.len(),
                    k,
                });
            }
            let fit = fit_pipeline(
                &train.subset(tr),
                &PipelineParams {
                    k,
                    ..params.clone()
                },
            )?;
            let val = train.subset(va);
            let pred = mlm_predict(&fit.cell_mlm, val.x.view(), PredictMode::Soft)?;
            let ev = Evaluation::of(
                pred.as_slice().expect("contiguous"),
                val.y.as_slice().expect("contiguous"),
                train.task,
            );
            let score = if classify {
                ev.auc.ok_or(PipelineError::SingleClassFold(f))?
            } else {
                ev.rmse.expect("regression")
            };
            log::debug!("K = {k}, fold {f}: {score}");
            fold_scores.push(score);
        }
        let mean = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
        rows.push(CvRow {
            k,
            fold_scores,
            mean,
        });
    }
    let better = |a: &CvRow, b: &CvRow| {
        if a.mean == b.mean {
            a.k < b.k
        } else if classify {
            a.mean > b.mean
        } else {
            a.mean < b.mean
        }
    };
    let mut best = &rows[0];
    for r in &rows[1..] {
        if better(r, best) {
            best = r;
        }
    }
    Ok(CvResult {
        chosen: best.k,
        metric: if classify { "auc" } else { "rmse" }.into(),
        rows: rows.clone(),
    })
}

/// Least-squares or logistic fit on the whole training set in standardized
/// units, used as the single-model baseline.
pub fn global_linear_baseline<T: Scalar>(
    train: &Dataset<T>,
    scaler: &Scaler<T>,
    alpha: f64,
) -> Result<LinearModel<T>> {
    let xs = scaler.transform(&train.x);
    fit_for_task(xs.view(), train.y.view(), train.task, alpha)
        .map_err(|source| PipelineError::Mixture(MixtureError::Fit { epic: 0, source }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_region(n: usize, seed: u64) -> Dataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-2.0..2.0));
        let y = Array1::from_shape_fn(n, |i| {
            let (a, b) = (x[[i, 0]], x[[i, 1]]);
            if a > 0.0 {
                1.0 + 2.0 * a - b
            } else {
                -1.0 - a + 0.5 * b
            }
        });
        Dataset::from_arrays(x, y, Task::Regression).unwrap()
    }

    fn quick(task: Task) -> PipelineParams {
        let mut p = PipelineParams::for_task(task);
        p.mlp.epochs = 30;
        p.mlp.widths = vec![8, 8];
        p.m = 20;
        p
    }

    #[test]
    fn two_epics_and_few_cells() {
        let ds = two_region(300, 1);
        let fit = fit_pipeline(&ds, &quick(Task::Regression)).unwrap();
        assert!(fit.n_cells() <= 4);
        assert_eq!(fit.mlm.n_epics(), 2);
        let total: usize = fit.mlm.epics.iter().map(|e| e.size).sum();
        assert_eq!(total, 300);
    }

    #[test]
    fn j_clamped_to_cells() {
        let ds = two_region(200, 2);
        let mut p = quick(Task::Regression);
        p.j = 50;
        let fit = fit_pipeline(&ds, &p).unwrap();
        assert_eq!(fit.mlm.n_epics(), fit.n_cells());
        assert_eq!(fit.j_requested, 50);
        // with no merging the two mixtures predict alike
        let a = fit
            .mlm
            .predict_batch_standardized(fit.scaler.transform(&ds.x).view(), PredictMode::Soft)
            .unwrap();
        let b = fit
            .cell_mlm
            .predict_batch_standardized(fit.scaler.transform(&ds.x).view(), PredictMode::Soft)
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn deterministic_under_seed() {
        let ds = two_region(200, 3);
        let a = fit_pipeline(&ds, &quick(Task::Regression)).unwrap();
        let b = fit_pipeline(&ds, &quick(Task::Regression)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_candidate_grid() {
        let ds = two_region(150, 4);
        let cv = cross_validate_k(&ds, &quick(Task::Regression), &[1], 3).unwrap();
        assert_eq!(cv.chosen, 1);
        assert_eq!(cv.rows.len(), 1);
        assert_eq!(cv.rows[0].fold_scores.len(), 3);
        let cv = cross_validate_k(&ds, &quick(Task::Regression), &[1, 2], 2).unwrap();
        assert_eq!(cv.rows.len(), 2);
        assert!(matches!(
            cross_validate_k(&ds, &quick(Task::Regression), &[], 2),
            Err(PipelineError::BadGrid(_))
        ));
    }

    #[test]
    fn classification_runs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 300;
        let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(-2.0..2.0));
        let y = Array1::from_shape_fn(n, |i| {
            if x[[i, 0]] * x[[i, 1]] > 0.0 {
                1.0
            } else {
                0.0
            }
        });
        let ds = Dataset::from_arrays(x, y, Task::BinaryClassification).unwrap();
        let fit = fit_pipeline(&ds, &quick(Task::BinaryClassification)).unwrap();
        let p = mlm_predict(&fit.mlm, ds.x.view(), PredictMode::Soft).unwrap();
        assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let ev = Evaluation::of(p.as_slice().unwrap(), ds.y.as_slice().unwrap(), ds.task);
        assert!(ev.auc.unwrap() > 0.5);
    }

    #[test]
    fn evaluation_degenerate_cases() {
        let ev = Evaluation::of(&[1.0, 2.0], &[1.0, 2.0], Task::Regression);
        assert_eq!(ev.rmse, Some(0.0));
        let ev = Evaluation::of(&[0.5; 4], &[0.0, 1.0, 0.0, 1.0], Task::BinaryClassification);
        assert_eq!(ev.auc, Some(0.5));
        let ev = Evaluation::of(&[0.1, 0.9], &[0.0, 1.0], Task::BinaryClassification);
        assert_eq!(ev.auc, Some(1.0));
    }
}
