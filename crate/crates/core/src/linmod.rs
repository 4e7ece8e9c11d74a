//! Local linear models: least squares, LASSO by coordinate descent and
//! (optionally L1-penalized) logistic regression, with coefficient intervals.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

use crate::data::Task;
use crate::linalg::{cholesky, cholesky_inverse, cholesky_solve, column_means};
use crate::scalar::{sigmoid, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinModError {
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("rows and targets disagree: {rows} rows, {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("input has {got} features, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("penalty weight must be finite and non-negative, got {0}")]
    BadAlpha(f64),
    #[error("targets must be 0 or 1")]
    NonBinaryTarget,
    #[error("classes are separable or only one class is present; set a positive penalty")]
    SeparableDegenerate,
    #[error("coordinate descent stopped after {0} cycles without converging")]
    NotConverged(usize),
    #[error("no standard errors available for this model")]
    NoStderr,
    #[error("confidence level must lie in (0, 1), got {0}")]
    BadLevel(f64),
}

pub type Result<T> = std::result::Result<T, LinModError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LinearModel<T> {
    pub intercept: T,
    pub coefficients: Array1<T>,
    pub task: Task,
    pub lasso_alpha: f64,
    /// Standard errors of an unpenalized fit.
    pub stderr: Option<Array1<T>>,
    pub intercept_stderr: Option<T>,
    /// Standard errors from refitting without penalty on the non-zero support.
    pub support_stderr: Option<Array1<T>>,
    /// Residual degrees of freedom for t intervals; `None` means normal quantiles.
    pub df: Option<usize>,
    /// The normal equations needed a ridge term.
    pub ridge_fallback: bool,
    pub converged: bool,
    pub iterations: usize,
    /// Only one class was present; the model is the smoothed constant.
    pub single_class: bool,
}

impl<T: Scalar> LinearModel<T> {
    pub fn constant(intercept: T, p: usize, task: Task) -> Self {
        LinearModel {
            intercept,
            coefficients: Array1::zeros(p),
            task,
            lasso_alpha: 0.0,
            stderr: None,
            intercept_stderr: None,
            support_stderr: None,
            df: None,
            ridge_fallback: false,
            converged: true,
            iterations: 0,
            single_class: false,
        }
    }

    pub fn n_features(&self) -> usize {
        self.coefficients.len()
    }

    /// `α + xᵀβ`
    pub fn linear_predictor(&self, x: ArrayView1<T>) -> Result<T> {
        if x.len() != self.n_features() {
            return Err(LinModError::DimensionMismatch {
                expected: self.n_features(),
                got: x.len(),
            });
        }
        Ok(self.intercept + x.dot(&self.coefficients))
    }

    /// Regression value or class-1 probability.
    pub fn predict(&self, x: ArrayView1<T>) -> Result<T> {
        let eta = self.linear_predictor(x)?;
        Ok(match self.task {
            Task::Regression => eta,
            Task::BinaryClassification => sigmoid(eta),
        })
    }

    pub fn predict_batch(&self, x: ArrayView2<T>) -> Result<Array1<T>> {
        if x.ncols() != self.n_features() {
            return Err(LinModError::DimensionMismatch {
                expected: self.n_features(),
                got: x.ncols(),
            });
        }
        let eta = x.dot(&self.coefficients) + self.intercept;
        Ok(match self.task {
            Task::Regression => eta,
            Task::BinaryClassification => eta.mapv(sigmoid),
        })
    }

    pub fn ensure_converged(&self) -> Result<&Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(LinModError::NotConverged(self.iterations))
        }
    }
}

pub fn lm_predict<T: Scalar>(model: &LinearModel<T>, x: ArrayView1<T>) -> Result<T> {
    model.predict(x)
}

fn check_inputs<T: Scalar>(xs: ArrayView2<T>, ys: ArrayView1<T>, alpha: f64) -> Result<()> {
    if xs.nrows() != ys.len() {
        return Err(LinModError::LengthMismatch {
            rows: xs.nrows(),
            targets: ys.len(),
        });
    }
    if xs.nrows() < 2 {
        return Err(LinModError::TooFewRows {
            needed: 2,
            got: xs.nrows(),
        });
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(LinModError::BadAlpha(alpha));
    }
    Ok(())
}

struct Centered<T> {
    xc: Array2<T>,
    yc: Array1<T>,
    x_mean: Array1<T>,
    y_mean: T,
}

fn center<T: Scalar>(xs: ArrayView2<T>, ys: ArrayView1<T>) -> Centered<T> {
    let x_mean = column_means(xs);
    let y_mean = ys.sum() / T::from_count(ys.len());
    let xc = &xs - &x_mean;
    let yc = ys.mapv(|v| v - y_mean);
    Centered {
        xc,
        yc,
        x_mean,
        y_mean,
    }
}

/// Solves `G β = b` for a Gram matrix, adding `1e-8·tr(G)/p` to the diagonal
/// when `G` is singular or nearly so.
fn solve_gram<T: Scalar>(g: &Array2<T>, b: &Array1<T>) -> (Array1<T>, Option<Array2<T>>, bool) {
    let p = g.nrows();
    if p == 0 {
        return (Array1::zeros(0), Some(Array2::zeros((0, 0))), false);
    }
    let max_diag = g.diag().iter().fold(T::zero(), |a, &v| a.max(v));
    let well_posed = cholesky(g.view()).filter(|l| {
        let tiny = T::lit(1e-12) * max_diag;
        l.diag().iter().all(|&d| d * d > tiny)
    });
    if let Some(l) = well_posed {
        return (cholesky_solve(l.view(), b.view()), Some(l), false);
    }
    let trace = g.diag().sum();
    let lambda = if trace > T::zero() {
        T::lit(1e-8) * trace / T::from_count(p)
    } else {
        T::one()
    };
    let mut gr = g.clone();
    for j in 0..p {
        gr[[j, j]] += lambda;
    }
    let l = cholesky(gr.view()).expect("ridge-regularized Gram matrix is positive definite");
    (cholesky_solve(l.view(), b.view()), None, true)
}

/// Unpenalized least squares with standard errors when the design has full rank.
pub fn fit_ols<T: Scalar>(xs: ArrayView2<T>, ys: ArrayView1<T>) -> Result<LinearModel<T>> {
    check_inputs(xs, ys, 0.0)?;
    let (n, p) = xs.dim();
    let c = center(xs, ys);
    let g = c.xc.t().dot(&c.xc);
    let b = c.xc.t().dot(&c.yc);
    let (beta, factor, ridge) = solve_gram(&g, &b);
    let intercept = c.y_mean - c.x_mean.dot(&beta);
    let mut model = LinearModel::constant(intercept, p, Task::Regression);
    model.coefficients = beta;
    model.ridge_fallback = ridge;
    if ridge {
        log::debug!("least squares used the ridge fallback ({n}×{p})");
    }
    if let Some(l) = factor {
        if n > p + 1 {
            let resid = &c.yc - &c.xc.dot(&model.coefficients);
            let df = n - p - 1;
            let sigma2 = resid.dot(&resid) / T::from_count(df);
            let inv = cholesky_inverse(l.view());
            model.stderr = Some(inv.diag().mapv(|v| (sigma2 * v).max(T::zero()).sqrt()));
            let quad = c.x_mean.dot(&inv.dot(&c.x_mean));
            model.intercept_stderr = Some(
                (sigma2 * (T::one() / T::from_count(n) + quad))
                    .max(T::zero())
                    .sqrt(),
            );
            model.df = Some(df);
        }
    }
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoOptions {
    pub max_cycles: usize,
    /// Converged when the largest coefficient change in a cycle is below this.
    pub tol: f64,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            max_cycles: 100_000,
            tol: 1e-8,
        }
    }
}

/// `(1/2n)‖y − α − Xβ‖² + alpha·‖β‖₁` on centered data.
pub fn lasso_objective<T: Scalar>(
    xs: ArrayView2<T>,
    ys: ArrayView1<T>,
    model: &LinearModel<T>,
    alpha: f64,
) -> T {
    let r = &ys - &(xs.dot(&model.coefficients) + model.intercept);
    let n = T::from_count(ys.len());
    r.dot(&r) / (T::lit(2.0) * n) + T::lit(alpha) * model.coefficients.mapv(|b| b.abs()).sum()
}

#[inline]
fn soft_threshold<T: Scalar>(z: T, t: T) -> T {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        T::zero()
    }
}

pub fn fit_lasso<T: Scalar>(
    xs: ArrayView2<T>,
    ys: ArrayView1<T>,
    alpha: f64,
) -> Result<LinearModel<T>> {
    fit_lasso_with(xs, ys, alpha, &LassoOptions::default(), |_| {})
}

/// Cyclic coordinate descent; `on_cycle` observes the coefficients after
/// every full cycle. A fit that runs out of cycles is returned with
/// `converged = false`.
pub fn fit_lasso_with<T: Scalar>(
    xs: ArrayView2<T>,
    ys: ArrayView1<T>,
    alpha: f64,
    opts: &LassoOptions,
    mut on_cycle: impl FnMut(&Array1<T>),
) -> Result<LinearModel<T>> {
    check_inputs(xs, ys, alpha)?;
    let (n, p) = xs.dim();
    let c = center(xs, ys);
    let nf = T::from_count(n);
    let a = T::lit(alpha);
    let col_sq: Vec<T> = (0..p)
        .map(|j| c.xc.column(j).dot(&c.xc.column(j)) / nf)
        .collect();
    let mut beta = Array1::<T>::zeros(p);
    let mut resid = c.yc.clone();
    let tol = T::lit(opts.tol);
    let mut converged = p == 0;
    let mut cycles = 0;
    while !converged && cycles < opts.max_cycles {
        cycles += 1;
        let mut max_change = T::zero();
        for j in 0..p {
            if col_sq[j] == T::zero() {
                continue;
            }
            let col = c.xc.column(j);
            let rho = col.dot(&resid) / nf + col_sq[j] * beta[j];
            let next = soft_threshold(rho, a) / col_sq[j];
            let delta = next - beta[j];
            if delta != T::zero() {
                resid.scaled_add(-delta, &col);
                beta[j] = next;
                max_change = max_change.max(delta.abs());
            }
        }
        on_cycle(&beta);
        if max_change < tol {
            converged = true;
        }
    }
    if !converged {
        log::warn!("LASSO did not converge in {cycles} cycles (alpha {alpha})");
    }
    let intercept = c.y_mean - c.x_mean.dot(&beta);
    let mut model = LinearModel::constant(intercept, p, Task::Regression);
    model.coefficients = beta;
    model.lasso_alpha = alpha;
    model.converged = converged;
    model.iterations = cycles;
    if alpha == 0.0 {
        let ols = fit_ols(xs, ys)?;
        model.stderr = ols.stderr;
        model.intercept_stderr = ols.intercept_stderr;
        model.df = ols.df;
        model.ridge_fallback = ols.ridge_fallback;
    } else {
        let support: Vec<usize> = (0..p)
            .filter(|&j| model.coefficients[j] != T::zero())
            .collect();
        let refit = fit_ols(xs.select(Axis(1), &support).view(), ys)?;
        if let Some(se) = refit.stderr {
            let mut full = Array1::zeros(p);
            for (k, &j) in support.iter().enumerate() {
                full[j] = se[k];
            }
            model.support_stderr = Some(full);
            model.intercept_stderr = refit.intercept_stderr;
            model.df = refit.df;
        }
    }
    Ok(model)
}

/// Least squares or LASSO depending on `alpha`.
pub fn fit_regression<T: Scalar>(
    xs: ArrayView2<T>,
    ys: ArrayView1<T>,
    alpha: f64,
) -> Result<LinearModel<T>> {
    if alpha == 0.0 {
        fit_ols(xs, ys)
    } else {
        fit_lasso(xs, ys, alpha)
    }
}

/// Mean negative log-likelihood of a logistic model.
fn logistic_loss<T: Scalar>(
    xs: ArrayView2<T>,
    ys: ArrayView1<T>,
    intercept: T,
    beta: &Array1<T>,
) -> T {
    let eta = xs.dot(beta) + intercept;
    let n = T::from_count(ys.len());
    eta.iter()
        .zip(ys.iter())
        .map(|(&e, &y)| {
            // softplus(e) − y·e
            let sp = if e > T::zero() {
                e + (-e).exp().ln_1p()
            } else {
                e.exp().ln_1p()
            };
            sp - y * e
        })
        .sum::<T>()
        / n
}

/// Augmented Hessian `X̃ᵀWX̃` of the total log-likelihood, intercept first.
fn logistic_hessian<T: Scalar>(xs: ArrayView2<T>, probs: &Array1<T>, cols: &[usize]) -> Array2<T> {
    let q = cols.len() + 1;
    let mut h = Array2::<T>::zeros((q, q));
    for (i, row) in xs.rows().into_iter().enumerate() {
        let w = probs[i] * (T::one() - probs[i]);
        let mut aug = Vec::with_capacity(q);
        aug.push(T::one());
        aug.extend(cols.iter().map(|&j| row[j]));
        for a in 0..q {
            let wa = w * aug[a];
            for b in a..q {
                h[[a, b]] += wa * aug[b];
            }
        }
    }
    for a in 0..q {
        for b in 0..a {
            h[[a, b]] = h[[b, a]];
        }
    }
    h
}

/// Logistic regression. `alpha = 0` uses Newton steps and fails on
/// separation; `alpha > 0` minimizes mean negative log-likelihood plus
/// `alpha·‖β‖₁` by proximal Newton.
pub fn fit_logistic<T: Scalar>(
    xs: ArrayView2<T>,
    ys: ArrayView1<T>,
    alpha: f64,
) -> Result<LinearModel<T>> {
    check_inputs(xs, ys, alpha)?;
    if ys.iter().any(|&y| y != T::zero() && y != T::one()) {
        return Err(LinModError::NonBinaryTarget);
    }
    let (n, p) = xs.dim();
    let n1 = ys.iter().filter(|&&y| y == T::one()).count();
    if n1 == 0 || n1 == n {
        if alpha == 0.0 {
            return Err(LinModError::SeparableDegenerate);
        }
        let rate = (T::from_count(n1) + T::lit(0.5)) / (T::from_count(n) + T::one());
        let mut model = LinearModel::constant(
            (rate / (T::one() - rate)).ln(),
            p,
            Task::BinaryClassification,
        );
        model.lasso_alpha = alpha;
        model.single_class = true;
        return Ok(model);
    }
    let mut model = if alpha == 0.0 {
        logistic_newton(xs, ys)?
    } else {
        logistic_proximal(xs, ys, alpha)
    };
    model.lasso_alpha = alpha;
    // Wald errors from the Hessian on the non-zero support
    let support: Vec<usize> = (0..p)
        .filter(|&j| model.coefficients[j] != T::zero())
        .collect();
    let probs = (xs.dot(&model.coefficients) + model.intercept).mapv(sigmoid);
    let h = logistic_hessian(xs, &probs, &support);
    if let Some(l) = cholesky(h.view()) {
        let inv = cholesky_inverse(l.view());
        let mut se = Array1::zeros(p);
        for (k, &j) in support.iter().enumerate() {
            se[j] = inv[[k + 1, k + 1]].max(T::zero()).sqrt();
        }
        model.intercept_stderr = Some(inv[[0, 0]].max(T::zero()).sqrt());
        if alpha == 0.0 {
            model.stderr = Some(se);
        } else {
            model.support_stderr = Some(se);
        }
    }
    Ok(model)
}

fn logistic_newton<T: Scalar>(xs: ArrayView2<T>, ys: ArrayView1<T>) -> Result<LinearModel<T>> {
    let (n, p) = xs.dim();
    let cols: Vec<usize> = (0..p).collect();
    let mut theta = Array1::<T>::zeros(p + 1);
    let rate = T::from_count(ys.iter().filter(|&&y| y == T::one()).count()) / T::from_count(n);
    theta[0] = (rate / (T::one() - rate)).ln();
    let max_iter = 100;
    let big = T::lit(1e8);
    for iter in 1..=max_iter {
        let beta = theta.slice(ndarray::s![1..]).to_owned();
        let eta = xs.dot(&beta) + theta[0];
        let probs = eta.mapv(sigmoid);
        // near-certain fit of every point signals separation
        let certain = probs
            .iter()
            .zip(ys.iter())
            .all(|(&pr, &y)| (pr - y).abs() < T::lit(1e-8));
        if certain {
            return Err(LinModError::SeparableDegenerate);
        }
        let mut grad = Array1::<T>::zeros(p + 1);
        for i in 0..n {
            let r = ys[i] - probs[i];
            grad[0] += r;
            for j in 0..p {
                grad[j + 1] += r * xs[[i, j]];
            }
        }
        let h = logistic_hessian(xs, &probs, &cols);
        let step = match cholesky(h.view()) {
            Some(l) => cholesky_solve(l.view(), grad.view()),
            None => return Err(LinModError::SeparableDegenerate),
        };
        // step halving keeps the likelihood increasing
        let old = logistic_loss(xs, ys, theta[0], &beta);
        let mut scale = T::one();
        let mut next = &theta + &step;
        for _ in 0..30 {
            let nb = next.slice(ndarray::s![1..]).to_owned();
            if logistic_loss(xs, ys, next[0], &nb) <= old {
                break;
            }
            scale *= T::lit(0.5);
            next = &theta + &(&step * scale);
        }
        let change = (&next - &theta)
            .iter()
            .fold(T::zero(), |a, &v| a.max(v.abs()));
        theta = next;
        if theta.iter().any(|v| !v.is_finite() || v.abs() > big) {
            return Err(LinModError::SeparableDegenerate);
        }
        if change < T::lit(1e-10) {
            let mut model = LinearModel::constant(theta[0], p, Task::BinaryClassification);
            model.coefficients = theta.slice(ndarray::s![1..]).to_owned();
            model.iterations = iter;
            return Ok(model);
        }
    }
    Err(LinModError::SeparableDegenerate)
}

fn logistic_proximal<T: Scalar>(
    xs: ArrayView2<T>,
    ys: ArrayView1<T>,
    alpha: f64,
) -> LinearModel<T> {
    let (n, p) = xs.dim();
    let nf = T::from_count(n);
    let a = T::lit(alpha);
    let objective =
        |b0: T, b: &Array1<T>| logistic_loss(xs, ys, b0, b) + a * b.mapv(|x| x.abs()).sum();
    let col: Vec<ArrayView1<T>> = (0..p).map(|j| xs.column(j)).collect();
    let rate = T::from_count(ys.iter().filter(|&&y| y == T::one()).count()) / nf;
    let mut b0 = (rate / (T::one() - rate)).ln();
    let mut b = Array1::<T>::zeros(p);
    let mut obj = objective(b0, &b);
    let mut converged = false;
    let mut iterations = 0;
    // proximal Newton: coordinate descent on the penalized quadratic model,
    // then a backtracking step along the resulting direction
    for outer in 1..=200 {
        iterations = outer;
        let probs = (xs.dot(&b) + b0).mapv(sigmoid);
        let resid = &ys - &probs;
        let w = probs.mapv(|pr| (pr * (T::one() - pr)).max(T::lit(1e-8)));
        let c0 = w.sum() / nf;
        let cj: Vec<T> = col.iter().map(|c| (c * &w).dot(c) / nf).collect();
        let (mut n0, mut nb) = (b0, b.clone());
        // q = change in the linear predictor relative to the expansion point
        let mut q = Array1::<T>::zeros(n);
        for _ in 0..1000 {
            let mut max_change = T::zero();
            let g0 = (&w * &q - &resid).sum() / nf;
            let d0 = -g0 / c0;
            n0 += d0;
            q.mapv_inplace(|v| v + d0);
            max_change = max_change.max(d0.abs());
            for j in 0..p {
                if cj[j] == T::zero() {
                    continue;
                }
                let g = col[j].dot(&(&w * &q - &resid)) / nf;
                let next = soft_threshold(cj[j] * nb[j] - g, a) / cj[j];
                let delta = next - nb[j];
                if delta != T::zero() {
                    q.scaled_add(delta, &col[j]);
                    nb[j] = next;
                    max_change = max_change.max(delta.abs());
                }
            }
            if max_change < T::lit(1e-13) {
                break;
            }
        }
        let d0 = n0 - b0;
        let db = &nb - &b;
        let grad0 = -resid.sum() / nf;
        let gradb = -xs.t().dot(&resid) / nf;
        let l1 = |v: &Array1<T>| v.mapv(|x| x.abs()).sum();
        let decrease = grad0 * d0 + gradb.dot(&db) + a * (l1(&nb) - l1(&b));
        let mut t = T::one();
        let mut accepted = None;
        for _ in 0..40 {
            let c0 = b0 + t * d0;
            let cb = &b + &(&db * t);
            let cobj = objective(c0, &cb);
            if cobj <= obj + T::lit(0.25) * t * decrease.min(T::zero()) {
                accepted = Some((c0, cb, cobj));
                break;
            }
            t *= T::lit(0.5);
        }
        let Some((c0, cb, cobj)) = accepted else {
            converged = true;
            break;
        };
        let change = (c0 - b0)
            .abs()
            .max((&cb - &b).iter().fold(T::zero(), |m, &d| m.max(d.abs())));
        b0 = c0;
        b = cb;
        obj = cobj;
        if change < T::lit(1e-10) {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("penalized logistic fit did not converge in {iterations} iterations");
    }
    let mut model = LinearModel::constant(b0, p, Task::BinaryClassification);
    model.coefficients = b;
    model.converged = converged;
    model.iterations = iterations;
    model
}

/// Fits the model family that matches `task`.
pub fn fit_for_task<T: Scalar>(
    xs: ArrayView2<T>,
    ys: ArrayView1<T>,
    task: Task,
    alpha: f64,
) -> Result<LinearModel<T>> {
    match task {
        Task::Regression => fit_regression(xs, ys, alpha),
        Task::BinaryClassification => fit_logistic(xs, ys, alpha),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CoefficientInterval<T> {
    pub estimate: T,
    pub stderr: T,
    pub lower: T,
    pub upper: T,
    pub shrunk_to_zero: bool,
}

/// Per-coefficient intervals `β_j ± q·se_j`, with `q` a t quantile when
/// residual degrees of freedom are known and a normal quantile otherwise.
/// Coefficients a penalty set to zero get `[0, 0]`.
pub fn confidence_intervals<T: Scalar>(
    model: &LinearModel<T>,
    level: f64,
) -> Result<Vec<CoefficientInterval<T>>> {
    let se = coefficient_stderr(model).ok_or(LinModError::NoStderr)?;
    let q = T::lit(interval_quantile(model.df, level)?);
    Ok(model
        .coefficients
        .iter()
        .zip(se.iter())
        .map(|(&b, &s)| {
            let shrunk = model.lasso_alpha > 0.0 && b == T::zero();
            if shrunk {
                CoefficientInterval {
                    estimate: b,
                    stderr: T::zero(),
                    lower: T::zero(),
                    upper: T::zero(),
                    shrunk_to_zero: true,
                }
            } else {
                CoefficientInterval {
                    estimate: b,
                    stderr: s,
                    lower: b - q * s,
                    upper: b + q * s,
                    shrunk_to_zero: false,
                }
            }
        })
        .collect())
}

/// Interval for the intercept, if its standard error is known.
pub fn intercept_interval<T: Scalar>(
    model: &LinearModel<T>,
    level: f64,
) -> Result<CoefficientInterval<T>> {
    let s = model.intercept_stderr.ok_or(LinModError::NoStderr)?;
    let q = T::lit(interval_quantile(model.df, level)?);
    let b = model.intercept;
    Ok(CoefficientInterval {
        estimate: b,
        stderr: s,
        lower: b - q * s,
        upper: b + q * s,
        shrunk_to_zero: false,
    })
}

fn coefficient_stderr<T: Scalar>(model: &LinearModel<T>) -> Option<&Array1<T>> {
    model.stderr.as_ref().or(model.support_stderr.as_ref())
}

fn interval_quantile(df: Option<usize>, level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(LinModError::BadLevel(level));
    }
    let p = (1.0 + level) / 2.0;
    Ok(match df {
        Some(df) => StudentsT::new(0.0, 1.0, df as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(p),
        None => Normal::new(0.0, 1.0)
            .expect("standard normal")
            .inverse_cdf(p),
    })
}
