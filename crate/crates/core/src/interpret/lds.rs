use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{epic_indicator, InterpretError, Result};
use crate::gmm::Gmm;
use crate::metrics::f1;
use crate::mixture::MlmModel;
use crate::scalar::{log_sum_exp, Scalar};

/// One round of the greedy search: the rate of every candidate extension
/// and the accepted set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdsStep {
    pub candidates: Vec<(usize, f64)>,
    pub dims: Vec<usize>,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainableDims {
    pub epic: usize,
    pub dims: Vec<usize>,
    pub rate: f64,
    pub xi: f64,
    pub found: bool,
    pub steps: Vec<LdsStep>,
}

fn check_epic<T: Scalar>(model: &MlmModel<T>, j: usize) -> Result<()> {
    if j >= model.n_epics() {
        return Err(InterpretError::UnknownEpic {
            epic: j,
            n_epics: model.n_epics(),
        });
    }
    Ok(())
}

/// Marginal EPIC densities over `dims`, one per EPIC.
fn marginals<T: Scalar>(model: &MlmModel<T>, dims: &[usize]) -> Result<Vec<Gmm<T>>> {
    if dims.is_empty() {
        return Err(InterpretError::EmptySubset);
    }
    model
        .epics
        .iter()
        .map(|e| Ok(e.density.marginal(dims)?))
        .collect()
}

/// `π̃_j f_{j,s}(x_s) ≥ Σ_{j'≠j} π̃_{j'} f_{j',s}(x_s)` evaluated in log space.
fn classify_with<T: Scalar>(
    model: &MlmModel<T>,
    margs: &[Gmm<T>],
    j: usize,
    xs: &[T],
) -> Result<bool> {
    let xv = ndarray::ArrayView1::from(xs);
    let mut own = T::neg_infinity();
    let mut rest = Vec::with_capacity(margs.len());
    for (k, (g, e)) in margs.iter().zip(&model.epics).enumerate() {
        let v = e.prior.ln() + g.log_density(xv)?;
        if k == j {
            own = v;
        } else {
            rest.push(v);
        }
    }
    Ok(own >= log_sum_exp(rest))
}

/// Membership of `x` (standardized, full length) in EPIC `j` judged from
/// the marginal densities over `dims`; ties count as members.
///
/// EPIC `j` is compared against the sum of all other weighted densities,
/// not the largest of them, so with three or more EPICs this is stricter
/// than a plain MAP assignment.
pub fn marginal_map_classify<T: Scalar>(
    model: &MlmModel<T>,
    j: usize,
    dims: &[usize],
    x: ndarray::ArrayView1<T>,
) -> Result<bool> {
    check_epic(model, j)?;
    let margs = marginals(model, dims)?;
    let sub: Vec<T> = dims.iter().map(|&d| x[d]).collect();
    classify_with(model, &margs, j, &sub)
}

fn rate_for<T: Scalar>(
    model: &MlmModel<T>,
    x: ArrayView2<T>,
    truth: &[bool],
    j: usize,
    dims: &[usize],
) -> Result<f64> {
    let margs = marginals(model, dims)?;
    let mut pred = Vec::with_capacity(x.nrows());
    let mut sub = vec![T::zero(); dims.len()];
    for row in x.rows() {
        for (k, &d) in dims.iter().enumerate() {
            sub[k] = row[d];
        }
        pred.push(classify_with(model, &margs, j, &sub)?);
    }
    Ok(f1(&pred, truth))
}

/// Greedy forward search for a small variable set whose marginal densities
/// single out EPIC `j` with F1 above `xi`.
///
/// `x` is the standardized training matrix and `labels` its EPIC labels.
pub fn explainable_dimensions<T: Scalar>(
    model: &MlmModel<T>,
    x: ArrayView2<T>,
    labels: &[usize],
    j: usize,
    xi: f64,
) -> Result<ExplainableDims> {
    check_epic(model, j)?;
    if !(xi > 0.0 && xi < 1.0) {
        return Err(InterpretError::BadXi(xi));
    }
    if labels.len() != x.nrows() {
        return Err(InterpretError::LabelMismatch {
            labels: labels.len(),
            rows: x.nrows(),
        });
    }
    let truth = epic_indicator(labels, j);
    if !truth.iter().any(|&t| t) {
        return Err(InterpretError::EmptyEpic(j));
    }
    let p = x.ncols();
    let mut dims: Vec<usize> = Vec::new();
    let mut rate = 0.0;
    let mut steps = Vec::new();
    while rate <= xi && dims.len() < p {
        let mut candidates = Vec::new();
        let mut best: Option<(usize, f64)> = None;
        for v in 0..p {
            if dims.contains(&v) {
                continue;
            }
            let mut trial = dims.clone();
            trial.push(v);
            let r = rate_for(model, x, &truth, j, &trial)?;
            candidates.push((v, r));
            if best.is_none_or(|(_, br)| r > br) {
                best = Some((v, r));
            }
        }
        let (v, r) = best.expect("at least one remaining variable");
        dims.push(v);
        rate = r;
        steps.push(LdsStep {
            candidates,
            dims: dims.clone(),
            rate,
        });
    }
    Ok(ExplainableDims {
        epic: j,
        found: rate > xi,
        dims,
        rate,
        xi,
        steps,
    })
}
