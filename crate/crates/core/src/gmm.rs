//! Gaussian mixtures: EM fitting with selectable covariance structure,
//! MAP assignment, log-density and marginalization.
//!
//! Every M-step adds a floor `c·I` to the covariance estimates, with
//! `c = 1e-6 × mean per-coordinate variance` of the data (or `1e-6` for
//! constant data). That update is the exact maximizer of the expected
//! complete-data log-likelihood augmented with a `−½·c·tr(Σₖ⁻¹)` term per
//! point, so EM stays monotone for that penalized objective; the recorded
//! `history` holds it. `log_likelihood` is the plain log-likelihood of the
//! final parameters.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    cholesky, cholesky_inverse, cholesky_log_det, column_means, mahalanobis_sq, scatter,
};
use crate::scalar::{argmax, log_sum_exp, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GmmError {
    #[error("need at least {k} points for {k} components, got {m}")]
    TooFewPoints { m: usize, k: usize },
    #[error("points must have at least one coordinate")]
    ZeroDimension,
    #[error("component {0} has a covariance that is not positive definite after regularization")]
    DegenerateComponent(usize),
    #[error("point has dimension {got}, mixture expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("marginal requested over an empty index set")]
    EmptySubset,
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("invalid mixture parameters: {0}")]
    InvalidParameters(String),
}

pub type Result<T> = std::result::Result<T, GmmError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceKind {
    #[default]
    Full,
    Diagonal,
    Spherical,
    /// One full covariance shared by every component.
    Pooled,
}

impl std::str::FromStr for CovarianceKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(CovarianceKind::Full),
            "diagonal" | "diag" => Ok(CovarianceKind::Diagonal),
            "spherical" => Ok(CovarianceKind::Spherical),
            "pooled" | "tied" => Ok(CovarianceKind::Pooled),
            other => Err(format!("unknown covariance kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmOptions {
    pub k: usize,
    pub cov_kind: CovarianceKind,
    pub seed: u64,
    pub max_iter: usize,
    /// Stop when the per-point objective gain falls below this value.
    pub tol: f64,
    /// Number of k-means++ starts; the run with the highest final objective is kept.
    pub restarts: usize,
}

impl GmmOptions {
    pub fn new(k: usize) -> Self {
        GmmOptions {
            k,
            cov_kind: CovarianceKind::Full,
            seed: 0,
            max_iter: 100,
            tol: 1e-6,
            restarts: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FitDiagnostics<T> {
    pub n_iter: usize,
    pub converged: bool,
    /// Some component ended with fewer than two points' worth of weight,
    /// so its covariance is set by the floor.
    pub floored: bool,
    /// Number of empty-component reinitializations.
    pub reinitialized: usize,
    /// Penalized objective after the initial M-step and after every EM step.
    pub history: Vec<T>,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
struct GmmRepr<T> {
    priors: Array1<T>,
    means: Vec<Array1<T>>,
    covariances: Vec<Array2<T>>,
    cov_kind: CovarianceKind,
    reg_floor: T,
    #[serde(default)]
    log_likelihood: Option<T>,
    #[serde(default)]
    diagnostics: FitDiagnostics<T>,
}

/// Fitted mixture `Σₖ πₖ φ(x | μₖ, Σₖ)` with cached Cholesky factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", try_from = "GmmRepr<T>", into = "GmmRepr<T>")]
pub struct Gmm<T> {
    priors: Array1<T>,
    means: Vec<Array1<T>>,
    covariances: Vec<Array2<T>>,
    cov_kind: CovarianceKind,
    reg_floor: T,
    /// `None` for mixtures assembled from parts.
    pub log_likelihood: Option<T>,
    pub diagnostics: FitDiagnostics<T>,
    chol: Vec<Array2<T>>,
    log_norm: Vec<T>,
    log_priors: Vec<T>,
}

impl<T: Scalar> TryFrom<GmmRepr<T>> for Gmm<T> {
    type Error = GmmError;

    fn try_from(r: GmmRepr<T>) -> Result<Self> {
        let priors = r.priors.clone();
        let mut g = Gmm::from_parts(r.priors, r.means, r.covariances, r.cov_kind)?;
        // keep stored priors bit for bit rather than renormalizing them again
        g.log_priors = priors.iter().map(|p| p.ln()).collect();
        g.priors = priors;
        g.reg_floor = r.reg_floor;
        g.log_likelihood = r.log_likelihood;
        g.diagnostics = r.diagnostics;
        Ok(g)
    }
}

impl<T: Scalar> From<Gmm<T>> for GmmRepr<T> {
    fn from(g: Gmm<T>) -> Self {
        GmmRepr {
            priors: g.priors,
            means: g.means,
            covariances: g.covariances,
            cov_kind: g.cov_kind,
            reg_floor: g.reg_floor,
            log_likelihood: g.log_likelihood,
            diagnostics: g.diagnostics,
        }
    }
}

impl<T: Scalar> Gmm<T> {
    /// Builds a mixture from explicit parameters; priors are renormalized.
    pub fn from_parts(
        priors: Array1<T>,
        means: Vec<Array1<T>>,
        covariances: Vec<Array2<T>>,
        cov_kind: CovarianceKind,
    ) -> Result<Self> {
        let k = priors.len();
        if k == 0 || means.len() != k || covariances.len() != k {
            return Err(GmmError::InvalidParameters(
                "component counts disagree".into(),
            ));
        }
        let d = means[0].len();
        if d == 0 {
            return Err(GmmError::ZeroDimension);
        }
        if means.iter().any(|m| m.len() != d) || covariances.iter().any(|c| c.dim() != (d, d)) {
            return Err(GmmError::InvalidParameters(
                "inconsistent dimensions".into(),
            ));
        }
        if priors.iter().any(|&p| !(p >= T::zero()) || !p.is_finite()) {
            return Err(GmmError::InvalidParameters(
                "priors must be finite and non-negative".into(),
            ));
        }
        let total = priors.sum();
        if !(total > T::zero()) {
            return Err(GmmError::InvalidParameters("priors sum to zero".into()));
        }
        let priors = priors.mapv(|p| p / total);
        let mut chol = Vec::with_capacity(k);
        let mut log_norm = Vec::with_capacity(k);
        let half = T::lit(0.5);
        let dd = T::from_count(d);
        for (i, c) in covariances.iter().enumerate() {
            let l = cholesky(c.view()).ok_or(GmmError::DegenerateComponent(i))?;
            log_norm.push(-half * (dd * T::ln_2pi() + cholesky_log_det(l.view())));
            chol.push(l);
        }
        let log_priors = priors.iter().map(|p| p.ln()).collect();
        Ok(Gmm {
            priors,
            means,
            covariances,
            cov_kind,
            reg_floor: T::zero(),
            log_likelihood: None,
            diagnostics: FitDiagnostics::default(),
            chol,
            log_norm,
            log_priors,
        })
    }

    pub fn k(&self) -> usize {
        self.priors.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn priors(&self) -> &Array1<T> {
        &self.priors
    }

    pub fn means(&self) -> &[Array1<T>] {
        &self.means
    }

    pub fn covariances(&self) -> &[Array2<T>] {
        &self.covariances
    }

    pub fn cov_kind(&self) -> CovarianceKind {
        self.cov_kind
    }

    pub fn reg_floor(&self) -> T {
        self.reg_floor
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(GmmError::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }

    /// `ln φ(x | μₖ, Σₖ)`
    fn component_log_pdf(&self, k: usize, x: ArrayView1<T>) -> T {
        let m = mahalanobis_sq(self.chol[k].view(), x, self.means[k].view());
        self.log_norm[k] - T::lit(0.5) * m
    }

    /// `ln πₖ + ln φ(x | μₖ, Σₖ)` for every component.
    pub fn weighted_log_densities(&self, x: ArrayView1<T>) -> Result<Vec<T>> {
        self.check_dim(x.len())?;
        Ok((0..self.k())
            .map(|k| self.log_priors[k] + self.component_log_pdf(k, x))
            .collect())
    }

    pub fn log_density(&self, x: ArrayView1<T>) -> Result<T> {
        Ok(log_sum_exp(self.weighted_log_densities(x)?))
    }

    /// Posterior component probabilities.
    pub fn responsibilities(&self, x: ArrayView1<T>) -> Result<Array1<T>> {
        let w = self.weighted_log_densities(x)?;
        let lse = log_sum_exp(w.iter().copied());
        Ok(w.iter().map(|&v| (v - lse).exp()).collect())
    }

    /// MAP component; ties go to the lowest index.
    pub fn map_assign(&self, x: ArrayView1<T>) -> Result<usize> {
        Ok(argmax(&self.weighted_log_densities(x)?))
    }

    pub fn map_assign_batch(&self, x: ArrayView2<T>) -> Result<Vec<usize>> {
        x.rows().into_iter().map(|r| self.map_assign(r)).collect()
    }

    /// Plain log-likelihood of a sample.
    pub fn total_log_likelihood(&self, x: ArrayView2<T>) -> Result<T> {
        let mut acc = T::zero();
        for r in x.rows() {
            acc += self.log_density(r)?;
        }
        Ok(acc)
    }

    /// Component-wise marginal over the coordinates in `dims` (0-based, in
    /// the given order).
    pub fn marginal(&self, dims: &[usize]) -> Result<Self> {
        if dims.is_empty() {
            return Err(GmmError::EmptySubset);
        }
        let d = self.dim();
        if let Some(&bad) = dims.iter().find(|&&i| i >= d) {
            return Err(GmmError::IndexOutOfRange { index: bad, dim: d });
        }
        let means = self
            .means
            .iter()
            .map(|m| dims.iter().map(|&i| m[i]).collect())
            .collect();
        let covs = self
            .covariances
            .iter()
            .map(|c| {
                Array2::from_shape_fn((dims.len(), dims.len()), |(a, b)| c[[dims[a], dims[b]]])
            })
            .collect();
        let mut g = Gmm::from_parts(self.priors.clone(), means, covs, self.cov_kind)?;
        g.reg_floor = self.reg_floor;
        Ok(g)
    }
}

/// Covariance floor for a sample: `1e-6 ×` mean per-coordinate variance.
pub fn covariance_floor<T: Scalar>(points: ArrayView2<T>) -> T {
    let mean = column_means(points);
    let m = T::from_count(points.nrows().max(1));
    let d = T::from_count(points.ncols().max(1));
    let mut total = T::zero();
    for r in points.rows() {
        for (v, mu) in r.iter().zip(mean.iter()) {
            total += (*v - *mu) * (*v - *mu);
        }
    }
    let mean_var = total / (m * d);
    let base = if mean_var > T::zero() && mean_var.is_finite() {
        mean_var
    } else {
        T::one()
    };
    T::lit(1e-6) * base
}

/// Weighted M-step. `weights` is `m × k`; returns weighted counts as well.
/// Priors, means, covariances and effective counts.
type MStep<T> = (Array1<T>, Vec<Array1<T>>, Vec<Array2<T>>, Array1<T>);

fn m_step<T: Scalar>(
    points: ArrayView2<T>,
    weights: &Array2<T>,
    kind: CovarianceKind,
    floor: T,
) -> MStep<T> {
    let (m, d) = points.dim();
    let k = weights.ncols();
    let counts: Array1<T> = weights.sum_axis(ndarray::Axis(0));
    let mut means = Vec::with_capacity(k);
    let mut scatters = Vec::with_capacity(k);
    for j in 0..k {
        let nk = counts[j];
        let mut mu = Array1::<T>::zeros(d);
        if nk > T::zero() {
            for i in 0..m {
                let w = weights[[i, j]];
                if w != T::zero() {
                    mu.scaled_add(w, &points.row(i));
                }
            }
            mu /= nk;
        }
        // weighted scatter Σ wᵢ (x−μ)(x−μ)ᵀ
        let mut sc = Array2::<T>::zeros((d, d));
        if nk > T::zero() {
            let mut diff = vec![T::zero(); d];
            for i in 0..m {
                let w = weights[[i, j]];
                if w == T::zero() {
                    continue;
                }
                for a in 0..d {
                    diff[a] = points[[i, a]] - mu[a];
                }
                for a in 0..d {
                    let wa = w * diff[a];
                    for b in a..d {
                        sc[[a, b]] += wa * diff[b];
                    }
                }
            }
            for a in 0..d {
                for b in 0..a {
                    sc[[a, b]] = sc[[b, a]];
                }
            }
        }
        means.push(mu);
        scatters.push(sc);
    }
    let priors = counts.mapv(|c| c / T::from_count(m));
    let covs = build_covariances(&scatters, &counts, kind, floor, m);
    (priors, means, covs, counts)
}

/// Turns per-component scatter matrices into structured covariances plus floor.
fn build_covariances<T: Scalar>(
    scatters: &[Array2<T>],
    counts: &Array1<T>,
    kind: CovarianceKind,
    floor: T,
    m: usize,
) -> Vec<Array2<T>> {
    let k = scatters.len();
    let d = scatters[0].nrows();
    let eye = Array2::<T>::eye(d);
    match kind {
        CovarianceKind::Pooled => {
            let mut pooled = Array2::<T>::zeros((d, d));
            for sc in scatters {
                pooled += sc;
            }
            pooled /= T::from_count(m);
            pooled.scaled_add(floor, &eye);
            vec![pooled; k]
        }
        _ => scatters
            .iter()
            .zip(counts.iter())
            .map(|(sc, &nk)| {
                let cov = if nk > T::zero() {
                    sc / nk
                } else {
                    Array2::zeros((d, d))
                };
                let mut out = match kind {
                    CovarianceKind::Full => cov,
                    CovarianceKind::Diagonal => Array2::from_diag(&cov.diag()),
                    CovarianceKind::Spherical => {
                        let v = cov.diag().sum() / T::from_count(d);
                        &eye * v
                    }
                    CovarianceKind::Pooled => unreachable!(),
                };
                out.scaled_add(floor, &eye);
                out
            })
            .collect(),
    }
}

/// Single Gaussian per labelled group (`labels[i] < k`); priors are the
/// empirical frequencies. Groups must all be non-empty.
pub fn fit_labeled<T: Scalar>(
    points: ArrayView2<T>,
    labels: &[usize],
    k: usize,
    kind: CovarianceKind,
) -> Result<Gmm<T>> {
    let (m, d) = points.dim();
    if d == 0 {
        return Err(GmmError::ZeroDimension);
    }
    if m < k || k == 0 {
        return Err(GmmError::TooFewPoints { m, k });
    }
    let mut w = Array2::<T>::zeros((m, k));
    for (i, &l) in labels.iter().enumerate() {
        w[[i, l]] = T::one();
    }
    let floor = covariance_floor(points);
    let (priors, means, covs, counts) = m_step(points, &w, kind, floor);
    if let Some(empty) = counts.iter().position(|&c| c == T::zero()) {
        return Err(GmmError::InvalidParameters(format!(
            "group {empty} is empty"
        )));
    }
    let mut g = Gmm::from_parts(priors, means, covs, kind)?;
    g.reg_floor = floor;
    g.diagnostics.floored = counts.iter().any(|&c| c < T::lit(2.0));
    g.log_likelihood = Some(g.total_log_likelihood(points)?);
    Ok(g)
}

fn kmeans_pp<T: Scalar>(points: ArrayView2<T>, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let m = points.nrows();
    let sq = |a: ArrayView1<T>, b: ArrayView1<T>| -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (*x - *y).to_f64_lossy().powi(2))
            .sum()
    };
    let mut centers = vec![rng.random_range(0..m)];
    let mut dist: Vec<f64> = (0..m)
        .map(|i| sq(points.row(i), points.row(centers[0])))
        .collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = m - 1;
            for (i, &d) in dist.iter().enumerate() {
                if d > 0.0 && target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            rng.random_range(0..m)
        };
        centers.push(next);
        for (i, dv) in dist.iter_mut().enumerate() {
            let d = sq(points.row(i), points.row(next));
            if d < *dv {
                *dv = d;
            }
        }
    }
    centers
}

/// Fits a `k`-component mixture by EM from k-means++ seeded starts.
pub fn fit_gmm<T: Scalar>(points: ArrayView2<T>, opts: &GmmOptions) -> Result<Gmm<T>> {
    let (m, d) = points.dim();
    let k = opts.k;
    if d == 0 {
        return Err(GmmError::ZeroDimension);
    }
    if k == 0 || m < k {
        return Err(GmmError::TooFewPoints { m, k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(T, Gmm<T>)> = None;
    for _ in 0..opts.restarts.max(1) {
        let model = fit_from_start(points, opts, &mut rng)?;
        let objective = *model
            .diagnostics
            .history
            .last()
            .unwrap_or(&T::neg_infinity());
        if best.as_ref().is_none_or(|(b, _)| objective > *b) {
            best = Some((objective, model));
        }
    }
    Ok(best.expect("at least one start").1)
}

fn fit_from_start<T: Scalar>(
    points: ArrayView2<T>,
    opts: &GmmOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Gmm<T>> {
    let m = points.nrows();
    let k = opts.k;
    let floor = covariance_floor(points);
    let centers = kmeans_pp(points, k, rng);

    // hard assignment to the nearest seed, ties to the lowest index
    let mut resp = Array2::<T>::zeros((m, k));
    for i in 0..m {
        let mut best = 0;
        let mut best_d = T::infinity();
        for (j, &c) in centers.iter().enumerate() {
            let diff = &points.row(i) - &points.row(c);
            let dist = diff.dot(&diff);
            if dist < best_d {
                best_d = dist;
                best = j;
            }
        }
        resp[[i, best]] = T::one();
    }

    let mut diag = FitDiagnostics::default();
    let global_diag: Array1<T> = {
        let mu = column_means(points);
        scatter(points, mu.view())
            .diag()
            .mapv(|v| v / T::from_count(m))
    };
    let mut params = m_step(points, &resp, opts.cov_kind, floor);
    diag.reinitialized += reinit_empty(
        points,
        &resp,
        &mut params,
        &global_diag,
        floor,
        opts.cov_kind,
    );
    let mut model = assemble(&params, opts.cov_kind, floor)?;
    let mut objective = e_step(&model, points, &mut resp);
    diag.history.push(objective);
    let tol = T::lit(opts.tol);
    let mf = T::from_count(m);
    for _ in 0..opts.max_iter {
        params = m_step(points, &resp, opts.cov_kind, floor);
        diag.reinitialized += reinit_empty(
            points,
            &resp,
            &mut params,
            &global_diag,
            floor,
            opts.cov_kind,
        );
        model = assemble(&params, opts.cov_kind, floor)?;
        let next = e_step(&model, points, &mut resp);
        diag.history.push(next);
        diag.n_iter += 1;
        let gain = (next - objective) / mf;
        objective = next;
        if gain.abs() < tol {
            diag.converged = true;
            break;
        }
    }
    let counts = resp.sum_axis(ndarray::Axis(0));
    diag.floored = counts.iter().any(|&c| c < T::lit(2.0));
    model.log_likelihood = Some(model.total_log_likelihood(points)?);
    model.diagnostics = diag;
    Ok(model)
}

fn assemble<T: Scalar>(params: &MStep<T>, kind: CovarianceKind, floor: T) -> Result<Gmm<T>> {
    let (priors, means, covs, _) = params;
    let mut g = Gmm::from_parts(priors.clone(), means.clone(), covs.clone(), kind)?;
    g.reg_floor = floor;
    Ok(g)
}

/// Re-seeds components that received no weight at the point whose largest
/// responsibility is smallest. Returns the number of components re-seeded.
fn reinit_empty<T: Scalar>(
    points: ArrayView2<T>,
    resp: &Array2<T>,
    params: &mut MStep<T>,
    global_diag: &Array1<T>,
    floor: T,
    kind: CovarianceKind,
) -> usize {
    let m = points.nrows();
    let empty_tol = T::epsilon() * T::from_count(m);
    let empties: Vec<usize> = (0..params.3.len())
        .filter(|&j| params.3[j] <= empty_tol)
        .collect();
    if empties.is_empty() {
        return 0;
    }
    let mut used = Vec::new();
    for &j in &empties {
        let mut pick = 0;
        let mut pick_val = T::infinity();
        for i in 0..m {
            if used.contains(&i) {
                continue;
            }
            let mx = resp.row(i).iter().fold(T::neg_infinity(), |a, &b| a.max(b));
            if mx < pick_val {
                pick_val = mx;
                pick = i;
            }
        }
        used.push(pick);
        params.1[j] = points.row(pick).to_owned();
        params.0[j] = T::one() / T::from_count(m);
        if kind != CovarianceKind::Pooled {
            let mut c = Array2::from_diag(global_diag);
            c.scaled_add(floor, &Array2::eye(global_diag.len()));
            params.2[j] = c;
        }
    }
    let total = params.0.sum();
    params.0.mapv_inplace(|p| p / total);
    log::debug!("re-seeded {} empty mixture component(s)", empties.len());
    empties.len()
}

/// Fills `resp` and returns the penalized objective.
fn e_step<T: Scalar>(model: &Gmm<T>, points: ArrayView2<T>, resp: &mut Array2<T>) -> T {
    let k = model.k();
    let half = T::lit(0.5);
    let penalty: Vec<T> = (0..k)
        .map(|j| {
            let inv = cholesky_inverse(model.chol[j].view());
            half * model.reg_floor * inv.diag().sum()
        })
        .collect();
    let mut total = T::zero();
    let mut buf = vec![T::zero(); k];
    for (i, row) in points.rows().into_iter().enumerate() {
        for j in 0..k {
            buf[j] = model.log_priors[j] + model.component_log_pdf(j, row) - penalty[j];
        }
        let lse = log_sum_exp(buf.iter().copied());
        total += lse;
        for j in 0..k {
            resp[[i, j]] = (buf[j] - lse).exp();
        }
    }
    total
}

/// Restriction of a row-major matrix to selected columns.
pub fn select_columns<T: Scalar>(x: ArrayView2<T>, dims: &[usize]) -> Array2<T> {
    Array2::from_shape_fn((x.nrows(), dims.len()), |(i, a)| x[[i, dims[a]]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand_distr::{Distribution, StandardNormal};

    fn blobs(seed: u64, centers: &[[f64; 2]], per: usize, sd: f64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Array2::zeros((centers.len() * per, 2));
        for (c, ctr) in centers.iter().enumerate() {
            for i in 0..per {
                for j in 0..2 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x[[c * per + i, j]] = ctr[j] + sd * z;
                }
            }
        }
        x
    }

    #[test]
    fn standard_normal_log_density() {
        let g: Gmm<f64> = Gmm::from_parts(
            array![1.0],
            vec![array![0.0]],
            vec![array![[1.0]]],
            CovarianceKind::Full,
        )
        .unwrap();
        let v = g.log_density(array![0.0].view()).unwrap();
        assert!((v + 0.918_938_533_204_672_7).abs() < 1e-12);
        // far tail stays finite where exp underflows
        let far = g.log_density(array![40.0].view()).unwrap();
        assert!((far - (-0.918_938_533_204_672_7 - 800.0)).abs() < 1e-9);
    }

    #[test]
    fn duplicate_components_collapse() {
        let one: Gmm<f64> = Gmm::from_parts(
            array![1.0],
            vec![array![1.0, 2.0]],
            vec![array![[2.0, 0.3], [0.3, 1.0]]],
            CovarianceKind::Full,
        )
        .unwrap();
        let two = Gmm::from_parts(
            array![0.5, 0.5],
            vec![array![1.0, 2.0], array![1.0, 2.0]],
            vec![
                array![[2.0, 0.3], [0.3, 1.0]],
                array![[2.0, 0.3], [0.3, 1.0]],
            ],
            CovarianceKind::Full,
        )
        .unwrap();
        for x in [array![0.0, 0.0], array![3.0, -1.0]] {
            let a = one.log_density(x.view()).unwrap();
            let b = two.log_density(x.view()).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn map_assign_rules() {
        let g = Gmm::from_parts(
            array![0.5, 0.5],
            vec![array![-5.0], array![5.0]],
            vec![array![[1.0]], array![[1.0]]],
            CovarianceKind::Full,
        )
        .unwrap();
        assert_eq!(g.map_assign(array![-4.0].view()).unwrap(), 0);
        assert_eq!(g.map_assign(array![0.0].view()).unwrap(), 0);
        assert_eq!(g.map_assign(array![0.1].view()).unwrap(), 1);
        assert!(matches!(
            g.map_assign(array![0.0, 1.0].view()),
            Err(GmmError::DimensionMismatch { .. })
        ));

        // skewed priors move the midpoint to the heavy component
        let skew = Gmm::from_parts(
            array![0.99, 0.01],
            vec![array![-1.0], array![1.0]],
            vec![array![[1.0]], array![[1.0]]],
            CovarianceKind::Full,
        )
        .unwrap();
        let x = 0.5_f64;
        let phi = |mu: f64| (-(x - mu).powi(2) / 2.0).exp();
        let want = if 0.99 * phi(-1.0) >= 0.01 * phi(1.0) {
            0
        } else {
            1
        };
        assert_eq!(want, 0);
        assert_eq!(skew.map_assign(array![x].view()).unwrap(), want);
    }

    #[test]
    fn single_component_matches_closed_form() {
        let x = blobs(4, &[[1.0, -2.0]], 50, 1.5);
        let g = fit_gmm(x.view(), &GmmOptions::new(1)).unwrap();
        let mean = column_means(x.view());
        let mut cov = scatter(x.view(), mean.view()) / 50.0;
        let floor = covariance_floor(x.view());
        cov += &(Array2::eye(2) * floor);
        assert!((g.priors()[0] - 1.0).abs() < 1e-15);
        for j in 0..2 {
            assert!((g.means()[0][j] - mean[j]).abs() < 1e-10);
            for l in 0..2 {
                assert!((g.covariances()[0][[j, l]] - cov[[j, l]]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn separated_blobs_match_two_means() {
        let x = blobs(9, &[[-5.0, 0.0], [5.0, 0.0]], 100, 1.0);
        let g = fit_gmm(
            x.view(),
            &GmmOptions {
                seed: 2,
                ..GmmOptions::new(2)
            },
        )
        .unwrap();
        let labels = g.map_assign_batch(x.view()).unwrap();
        let oracle = two_means_oracle(x.view());
        let agree = labels.iter().zip(&oracle).filter(|(a, b)| a == b).count();
        assert!(agree == 200 || agree == 0, "agreement {agree}");
    }

    // Lloyd iterations from every pair of distinct starting points along the
    // first coordinate extremes; keeps the lowest-SSE partition.
    fn two_means_oracle(x: ArrayView2<f64>) -> Vec<usize> {
        let n = x.nrows();
        let mut best = (f64::INFINITY, vec![0; n]);
        for start in [(0usize, n - 1), (0, n / 2), (n / 3, n - 1)] {
            let mut c = [x.row(start.0).to_owned(), x.row(start.1).to_owned()];
            let mut lab = vec![0; n];
            for _ in 0..100 {
                for i in 0..n {
                    let d0 = (&x.row(i) - &c[0]).mapv(|v| v * v).sum();
                    let d1 = (&x.row(i) - &c[1]).mapv(|v| v * v).sum();
                    lab[i] = usize::from(d1 < d0);
                }
                for (k, ck) in c.iter_mut().enumerate() {
                    let rows: Vec<usize> = (0..n).filter(|&i| lab[i] == k).collect();
                    if !rows.is_empty() {
                        *ck = column_means(x.select(ndarray::Axis(0), &rows).view());
                    }
                }
            }
            let sse: f64 = (0..n)
                .map(|i| (&x.row(i) - &c[lab[i]]).mapv(|v| v * v).sum())
                .sum();
            if sse < best.0 {
                best = (sse, lab);
            }
        }
        best.1
    }

    #[test]
    fn em_objective_is_monotone() {
        for kind in [
            CovarianceKind::Full,
            CovarianceKind::Diagonal,
            CovarianceKind::Spherical,
            CovarianceKind::Pooled,
        ] {
            let x = blobs(17, &[[0.0, 0.0], [2.0, 1.0], [-1.5, 2.0]], 40, 0.8);
            let g = fit_gmm(
                x.view(),
                &GmmOptions {
                    cov_kind: kind,
                    seed: 5,
                    max_iter: 300,
                    tol: 1e-12,
                    k: 3,
                    restarts: 1,
                },
            )
            .unwrap();
            for w in g.diagnostics.history.windows(2) {
                assert!(w[1] >= w[0] - 1e-9, "{kind:?}: {} -> {}", w[0], w[1]);
            }
            let sum: f64 = g.priors().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn restarts_keep_the_best_start() {
        let x = blobs(
            31,
            &[[0.0, 0.0], [3.0, 0.0], [0.0, 3.0], [3.0, 3.0]],
            25,
            0.6,
        );
        let best = fit_gmm(
            x.view(),
            &GmmOptions {
                seed: 3,
                restarts: 6,
                ..GmmOptions::new(4)
            },
        )
        .unwrap();
        let first = fit_gmm(
            x.view(),
            &GmmOptions {
                seed: 3,
                ..GmmOptions::new(4)
            },
        )
        .unwrap();
        assert_eq!(
            first,
            fit_gmm(
                x.view(),
                &GmmOptions {
                    seed: 3,
                    restarts: 1,
                    ..GmmOptions::new(4)
                }
            )
            .unwrap()
        );
        let end = |g: &Gmm<f64>| *g.diagnostics.history.last().unwrap();
        assert!(end(&best) >= end(&first));
    }

    #[test]
    fn pooled_covariances_are_identical() {
        let x = blobs(3, &[[0.0, 0.0], [4.0, 4.0]], 30, 1.0);
        let g = fit_gmm(
            x.view(),
            &GmmOptions {
                cov_kind: CovarianceKind::Pooled,
                ..GmmOptions::new(2)
            },
        )
        .unwrap();
        assert_eq!(g.covariances()[0], g.covariances()[1]);
    }

    #[test]
    fn one_point_per_component_is_floored() {
        let x = array![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let g = fit_gmm(x.view(), &GmmOptions::new(3)).unwrap();
        assert!(g.diagnostics.floored);
        assert_eq!(
            fit_gmm(x.view(), &GmmOptions::new(4)).unwrap_err(),
            GmmError::TooFewPoints { m: 3, k: 4 }
        );
    }

    #[test]
    fn identical_points_collapse_to_first_component() {
        let x = Array2::from_elem((10, 3), 2.5);
        let g = fit_gmm(x.view(), &GmmOptions::new(3)).unwrap();
        let labels = g.map_assign_batch(x.view()).unwrap();
        assert!(labels.iter().all(|&l| l == labels[0]));
    }

    #[test]
    fn responsibilities_sum_to_one() {
        let x = blobs(8, &[[0.0, 0.0], [3.0, 0.0]], 25, 1.0);
        let g = fit_gmm(x.view(), &GmmOptions::new(2)).unwrap();
        for r in x.rows() {
            let s: f64 = g.responsibilities(r).unwrap().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn marginal_rules() {
        let g: Gmm<f64> = Gmm::from_parts(
            array![0.3, 0.7],
            vec![array![1.0, 2.0, 3.0], array![-1.0, 0.0, 1.0]],
            vec![
                Array2::from_diag(&array![1.0, 2.0, 3.0]),
                Array2::from_diag(&array![0.5, 0.5, 4.0]),
            ],
            CovarianceKind::Diagonal,
        )
        .unwrap();
        let all = g.marginal(&[0, 1, 2]).unwrap();
        assert_eq!(all.means(), g.means());
        assert_eq!(all.covariances(), g.covariances());
        let one = g.marginal(&[1]).unwrap();
        assert_eq!(one.means()[0], array![2.0]);
        assert_eq!(one.covariances()[1], array![[0.5]]);
        assert_eq!(g.marginal(&[]).unwrap_err(), GmmError::EmptySubset);
        assert_eq!(
            g.marginal(&[3]).unwrap_err(),
            GmmError::IndexOutOfRange { index: 3, dim: 3 }
        );
        // analytic product form for diagonal components
        let x = array![0.4, -0.2, 2.0];
        let xm = array![x[2]];
        let m2 = g.marginal(&[2]).unwrap();
        let direct: f64 = (0..2)
            .map(|k| {
                let mu = g.means()[k][2];
                let var = g.covariances()[k][[2, 2]];
                g.priors()[k] * (-(x[2] - mu).powi(2) / (2.0 * var)).exp()
                    / (2.0 * std::f64::consts::PI * var).sqrt()
            })
            .sum();
        assert!((m2.log_density(xm.view()).unwrap() - direct.ln()).abs() < 1e-12);
    }

    #[test]
    fn marginal_integrates_to_one() {
        let g = Gmm::from_parts(
            array![0.4, 0.6],
            vec![array![0.0, 1.0], array![2.0, -1.0]],
            vec![
                array![[1.0, 0.6], [0.6, 2.0]],
                array![[0.5, -0.2], [-0.2, 0.8]],
            ],
            CovarianceKind::Full,
        )
        .unwrap();
        let m = g.marginal(&[0]).unwrap();
        let (lo, hi, steps) = (-12.0, 14.0, 20_000);
        let h = (hi - lo) / steps as f64;
        let mut total = 0.0;
        for i in 0..=steps {
            let x = lo + i as f64 * h;
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            total += w * m.log_density(array![x].view()).unwrap().exp() * h;
        }
        assert!((total - 1.0).abs() < 1e-3);
    }

    #[test]
    fn serde_round_trip_preserves_densities() {
        let x = blobs(21, &[[0.0, 0.0], [3.0, 3.0]], 20, 1.0);
        let g = fit_gmm(x.view(), &GmmOptions::new(2)).unwrap();
        let json = serde_json::to_string(&g).unwrap();
        let back: Gmm<f64> = serde_json::from_str(&json).unwrap();
        for r in x.rows() {
            assert_eq!(
                g.log_density(r).unwrap().to_bits(),
                back.log_density(r).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn single_precision_fit() {
        let x = blobs(2, &[[-3.0, 0.0], [3.0, 0.0]], 30, 0.5).mapv(|v| v as f32);
        let g = fit_gmm(x.view(), &GmmOptions::new(2)).unwrap();
        assert_eq!(g.k(), 2);
        assert!(g.log_likelihood.unwrap().is_finite());
    }
}
