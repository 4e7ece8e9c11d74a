//! Cell distances, Ward merging of cells into EPICs, per-EPIC densities and
//! the hard and soft-weighted mixture predictors.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Scaler, Task};
use crate::gmm::{fit_labeled, CovarianceKind, Gmm, GmmError};
use crate::linmod::{fit_for_task, LinModError, LinearModel};
use crate::partition::{CellPartition, CoSupervisedSet};
use crate::scalar::{argmax, log_sum_exp, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MixtureError {
    #[error("cannot cut {k} cells into {j} clusters")]
    BadJ { j: usize, k: usize },
    #[error("distance matrix must be square and symmetric")]
    BadDistanceMatrix,
    #[error("input has {got} features, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("EPIC {epic}: {source}")]
    Fit { epic: usize, source: LinModError },
    #[error("cell densities: {0}")]
    Density(#[from] GmmError),
    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),
}

pub type Result<T> = std::result::Result<T, MixtureError>;

/// Mean squared disagreement of two regression models over both cells'
/// combined samples.
pub fn cell_distance_regression<T: Scalar>(
    ms: &LinearModel<T>,
    mt: &LinearModel<T>,
    xs: ArrayView2<T>,
    xt: ArrayView2<T>,
) -> Result<T> {
    let mut total = T::zero();
    for x in [xs, xt] {
        let a = ms.predict_batch(x).map_err(dim_error)?;
        let b = mt.predict_batch(x).map_err(dim_error)?;
        total += a
            .iter()
            .zip(b.iter())
            .map(|(&u, &v)| (u - v) * (u - v))
            .sum::<T>();
    }
    Ok(total / T::from_count(xs.nrows() + xt.nrows()))
}

fn dim_error(e: LinModError) -> MixtureError {
    match e {
        LinModError::DimensionMismatch { expected, got } => {
            MixtureError::DimensionMismatch { expected, got }
        }
        other => MixtureError::Inconsistent(other.to_string()),
    }
}

/// Agreement counts of two classifiers thresholded at 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AgreementCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl AgreementCounts {
    /// `(fp + fn) / (2·tp)`; `+∞` when `tp = 0` and the models disagree
    /// somewhere, `0` when they never predict class 1 at all.
    pub fn distance<T: Scalar>(&self) -> T {
        let off = self.fp + self.fn_;
        if self.tp == 0 {
            if off == 0 {
                T::zero()
            } else {
                T::infinity()
            }
        } else {
            T::from_count(off) / T::from_count(2 * self.tp)
        }
    }
}

pub fn agreement_counts<T: Scalar>(
    ms: &LinearModel<T>,
    mt: &LinearModel<T>,
    xs: ArrayView2<T>,
    xt: ArrayView2<T>,
) -> Result<AgreementCounts> {
    let half = T::lit(0.5);
    let mut c = AgreementCounts::default();
    for x in [xs, xt] {
        let a = ms.predict_batch(x).map_err(dim_error)?;
        let b = mt.predict_batch(x).map_err(dim_error)?;
        for (&u, &v) in a.iter().zip(b.iter()) {
            match (u >= half, v >= half) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => {}
            }
        }
    }
    Ok(c)
}

pub fn cell_distance_classification<T: Scalar>(
    ms: &LinearModel<T>,
    mt: &LinearModel<T>,
    xs: ArrayView2<T>,
    xt: ArrayView2<T>,
) -> Result<T> {
    Ok(agreement_counts(ms, mt, xs, xt)?.distance())
}

/// Pairwise cell distances for the task; the diagonal is zero.
pub fn distance_matrix<T: Scalar>(
    models: &[LinearModel<T>],
    inputs: &[Array2<T>],
    task: Task,
) -> Result<Array2<T>> {
    let k = models.len();
    if inputs.len() != k {
        return Err(MixtureError::Inconsistent(
            "one input set per cell model required".into(),
        ));
    }
    let mut d = Array2::<T>::zeros((k, k));
    for s in 0..k {
        for t in (s + 1)..k {
            let v = match task {
                Task::Regression => cell_distance_regression(
                    &models[s],
                    &models[t],
                    inputs[s].view(),
                    inputs[t].view(),
                )?,
                Task::BinaryClassification => cell_distance_classification(
                    &models[s],
                    &models[t],
                    inputs[s].view(),
                    inputs[t].view(),
                )?,
            };
            d[[s, t]] = v;
            d[[t, s]] = v;
        }
    }
    Ok(d)
}

/// One agglomeration step; clusters are named by their smallest cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeStep {
    pub a: usize,
    pub b: usize,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// Clusters sorted by smallest member; members ascending.
    pub memberships: Vec<Vec<usize>>,
    pub steps: Vec<MergeStep>,
}

/// Replaces `+∞` entries by ten times the largest finite off-diagonal
/// entry (or `1` when there is none).
pub fn replace_infinite<T: Scalar>(d: &Array2<T>) -> Array2<T> {
    let max_finite = d
        .iter()
        .filter(|v| v.is_finite())
        .fold(T::zero(), |a, &b| a.max(b));
    let sentinel = if max_finite > T::zero() {
        T::lit(10.0) * max_finite
    } else {
        T::one()
    };
    d.mapv(|v| if v.is_finite() { v } else { sentinel })
}

/// Ward agglomeration with the Lance–Williams update applied directly to
/// `d`, cut at `j` clusters. Ties go to the pair with the lowest names.
pub fn merge_cells<T: Scalar>(d: &Array2<T>, j: usize) -> Result<Merge> {
    let k = d.nrows();
    if d.ncols() != k {
        return Err(MixtureError::BadDistanceMatrix);
    }
    if j == 0 || j > k {
        return Err(MixtureError::BadJ { j, k });
    }
    for s in 0..k {
        for t in 0..k {
            if d[[s, t]] != d[[t, s]] || d[[s, t]].is_nan() {
                return Err(MixtureError::BadDistanceMatrix);
            }
        }
    }
    let mut dist = replace_infinite(d);
    let mut active: Vec<bool> = vec![true; k];
    let mut size: Vec<usize> = vec![1; k];
    let mut members: Vec<Vec<usize>> = (0..k).map(|c| vec![c]).collect();
    let mut steps = Vec::new();
    let mut count = k;
    while count > j {
        let mut best: Option<(usize, usize)> = None;
        for a in 0..k {
            if !active[a] {
                continue;
            }
            for b in (a + 1)..k {
                if !active[b] {
                    continue;
                }
                match best {
                    Some((ba, bb)) if dist[[a, b]] >= dist[[ba, bb]] => {}
                    _ => best = Some((a, b)),
                }
            }
        }
        let (a, b) = best.expect("at least two active clusters");
        steps.push(MergeStep {
            a,
            b,
            height: dist[[a, b]].to_f64_lossy(),
        });
        let (na, nb) = (T::from_count(size[a]), T::from_count(size[b]));
        let dab = dist[[a, b]];
        for c in 0..k {
            if !active[c] || c == a || c == b {
                continue;
            }
            let nc = T::from_count(size[c]);
            let v =
                ((na + nc) * dist[[c, a]] + (nb + nc) * dist[[c, b]] - nc * dab) / (na + nb + nc);
            dist[[a, c]] = v;
            dist[[c, a]] = v;
        }
        active[b] = false;
        size[a] += size[b];
        let moved = std::mem::take(&mut members[b]);
        members[a].extend(moved);
        members[a].sort_unstable();
        count -= 1;
    }
    let memberships = (0..k)
        .filter(|&c| active[c])
        .map(|c| members[c].clone())
        .collect();
    Ok(Merge { memberships, steps })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Epic<T> {
    pub local_model: LinearModel<T>,
    /// One Gaussian per member cell, weighted by relative cell size.
    pub density: Gmm<T>,
    pub prior: T,
    pub member_cells: Vec<usize>,
    /// Training samples in the EPIC.
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MlmModel<T> {
    pub epics: Vec<Epic<T>>,
    pub scaler: Scaler<T>,
    pub task: Task,
    pub cov_kind: CovarianceKind,
    pub cell_to_epic: Vec<usize>,
    /// EPIC of every training sample.
    pub train_epic_labels: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    pub task: Task,
    pub alpha: f64,
    pub cov_kind: CovarianceKind,
}

/// Assembles EPICs from a cell partition and a membership map.
///
/// `x` holds the standardized training inputs the partition was formed on.
pub fn build_mlm<T: Scalar>(
    x: ArrayView2<T>,
    partition: &CellPartition,
    cosets: &[CoSupervisedSet<T>],
    memberships: &[Vec<usize>],
    scaler: Scaler<T>,
    opts: &BuildOptions,
) -> Result<MlmModel<T>> {
    let n_cells = partition.n_cells();
    if cosets.len() != n_cells || partition.n_samples() != x.nrows() {
        return Err(MixtureError::Inconsistent(
            "partition, samples and co-supervised sets disagree".into(),
        ));
    }
    let mut cell_to_epic = vec![usize::MAX; n_cells];
    for (e, cells) in memberships.iter().enumerate() {
        if cells.is_empty() {
            return Err(MixtureError::Inconsistent(format!("EPIC {e} has no cells")));
        }
        for &c in cells {
            if c >= n_cells || cell_to_epic[c] != usize::MAX {
                return Err(MixtureError::Inconsistent(format!(
                    "cell {c} listed twice or out of range"
                )));
            }
            cell_to_epic[c] = e;
        }
    }
    if cell_to_epic.contains(&usize::MAX) {
        return Err(MixtureError::Inconsistent(
            "memberships do not cover every cell".into(),
        ));
    }
    let cells = fit_labeled(x, &partition.cell_of_sample, n_cells, opts.cov_kind)?;
    let sizes = partition.sizes();
    let mut epics = Vec::with_capacity(memberships.len());
    for (e, member_cells) in memberships.iter().enumerate() {
        let pooled_x: Vec<ArrayView2<T>> = member_cells
            .iter()
            .flat_map(|&c| [cosets[c].originals_x.view(), cosets[c].simulated_x.view()])
            .collect();
        let pooled_y: Vec<ArrayView1<T>> = member_cells
            .iter()
            .flat_map(|&c| [cosets[c].originals_y.view(), cosets[c].simulated_y.view()])
            .collect();
        let px = ndarray::concatenate(Axis(0), &pooled_x).expect("equal widths");
        let py = ndarray::concatenate(Axis(0), &pooled_y).expect("vectors");
        let local_model = fit_for_task(px.view(), py.view(), opts.task, opts.alpha)
            .map_err(|source| MixtureError::Fit { epic: e, source })?;
        let priors: Array1<T> = member_cells.iter().map(|&c| cells.priors()[c]).collect();
        let prior = priors.sum();
        let density = Gmm::from_parts(
            priors,
            member_cells
                .iter()
                .map(|&c| cells.means()[c].clone())
                .collect(),
            member_cells
                .iter()
                .map(|&c| cells.covariances()[c].clone())
                .collect(),
            opts.cov_kind,
        )?;
        epics.push(Epic {
            local_model,
            density,
            prior,
            member_cells: member_cells.clone(),
            size: member_cells.iter().map(|&c| sizes[c]).sum(),
        });
    }
    // exact renormalization so the priors sum to one
    let total: T = epics.iter().map(|e| e.prior).sum();
    for e in &mut epics {
        e.prior /= total;
    }
    let train_epic_labels = partition
        .cell_of_sample
        .iter()
        .map(|&c| cell_to_epic[c])
        .collect();
    Ok(MlmModel {
        epics,
        scaler,
        task: opts.task,
        cov_kind: opts.cov_kind,
        cell_to_epic,
        train_epic_labels,
    })
}

impl<T: Scalar> MlmModel<T> {
    pub fn n_epics(&self) -> usize {
        self.epics.len()
    }

    pub fn n_features(&self) -> usize {
        self.scaler.dim()
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.n_features() {
            return Err(MixtureError::DimensionMismatch {
                expected: self.n_features(),
                got: len,
            });
        }
        Ok(())
    }

    /// `ln π̃_j + ln f_j(x)` for standardized `x`.
    pub fn epic_log_weights(&self, x: ArrayView1<T>) -> Result<Vec<T>> {
        self.check(x.len())?;
        self.epics
            .iter()
            .map(|e| Ok(e.prior.ln() + e.density.log_density(x)?))
            .collect()
    }

    /// EPIC posteriors `γ_j(x)` for standardized `x`.
    pub fn epic_posteriors(&self, x: ArrayView1<T>) -> Result<Array1<T>> {
        let w = self.epic_log_weights(x)?;
        let lse = log_sum_exp(w.iter().copied());
        Ok(w.iter().map(|&v| (v - lse).exp()).collect())
    }

    /// MAP EPIC for standardized `x`; ties go to the lowest index.
    pub fn map_epic(&self, x: ArrayView1<T>) -> Result<usize> {
        Ok(argmax(&self.epic_log_weights(x)?))
    }

    fn local_predictions(&self, x: ArrayView1<T>) -> Vec<T> {
        self.epics
            .iter()
            .map(|e| e.local_model.predict(x).expect("dimensions checked"))
            .collect()
    }

    /// `Σ γ_j(x) m_j(x)` for standardized `x`.
    pub fn predict_soft_standardized(&self, x: ArrayView1<T>) -> Result<T> {
        let g = self.epic_posteriors(x)?;
        let m = self.local_predictions(x);
        Ok(g.iter().zip(&m).map(|(&a, &b)| a * b).sum())
    }

    pub fn predict_hard_standardized(&self, x: ArrayView1<T>) -> Result<T> {
        let j = self.map_epic(x)?;
        Ok(self.epics[j]
            .local_model
            .predict(x)
            .expect("dimensions checked"))
    }

    pub fn standardize(&self, x_raw: ArrayView1<T>) -> Result<Array1<T>> {
        self.check(x_raw.len())?;
        Ok(self.scaler.transform_row(x_raw))
    }

    /// Soft-weighted prediction for an input in original units.
    pub fn predict_soft(&self, x_raw: ArrayView1<T>) -> Result<T> {
        self.predict_soft_standardized(self.standardize(x_raw)?.view())
    }

    /// Prediction of the MAP EPIC's local model for an input in original units.
    pub fn predict_hard(&self, x_raw: ArrayView1<T>) -> Result<T> {
        self.predict_hard_standardized(self.standardize(x_raw)?.view())
    }

    pub fn predict_batch_standardized(
        &self,
        x: ArrayView2<T>,
        mode: PredictMode,
    ) -> Result<Array1<T>> {
        x.rows()
            .into_iter()
            .map(|r| match mode {
                PredictMode::Soft => self.predict_soft_standardized(r),
                PredictMode::Hard => self.predict_hard_standardized(r),
            })
            .collect()
    }

    pub fn posteriors_batch_standardized(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        let mut out = Array2::zeros((x.nrows(), self.n_epics()));
        for (i, r) in x.rows().into_iter().enumerate() {
            out.row_mut(i).assign(&self.epic_posteriors(r)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictMode {
    #[default]
    Soft,
    Hard,
}

impl std::str::FromStr for PredictMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "soft" => Ok(PredictMode::Soft),
            "hard" => Ok(PredictMode::Hard),
            other => Err(format!("unknown prediction mode `{other}`")),
        }
    }
}

/// Singleton memberships, i.e. one EPIC per cell.
pub fn singleton_memberships(n_cells: usize) -> Vec<Vec<usize>> {
    (0..n_cells).map(|c| vec![c]).collect()
}
