//! Dense Cholesky-based helpers for the small symmetric systems used by the
//! mixture densities and the least-squares fits.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::scalar::Scalar;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
///
/// Returns `None` when a pivot is not strictly positive or not finite.
pub fn cholesky<T: Scalar>(a: ArrayView2<T>) -> Option<Array2<T>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[[j, j]] = djj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / djj;
        }
    }
    Some(l)
}

/// Solves `L y = b` for lower-triangular `L`.
pub fn forward_substitute<T: Scalar>(l: ArrayView2<T>, b: ArrayView1<T>) -> Array1<T> {
    let n = l.nrows();
    let mut y = Array1::<T>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    y
}

/// Solves `Lᵀ x = y` for lower-triangular `L`.
pub fn backward_substitute<T: Scalar>(l: ArrayView2<T>, y: ArrayView1<T>) -> Array1<T> {
    let n = l.nrows();
    let mut x = Array1::<T>::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Solves `A x = b` given the Cholesky factor of `A`.
pub fn cholesky_solve<T: Scalar>(l: ArrayView2<T>, b: ArrayView1<T>) -> Array1<T> {
    let y = forward_substitute(l, b);
    backward_substitute(l, y.view())
}

/// `A⁻¹` from the Cholesky factor of `A`.
pub fn cholesky_inverse<T: Scalar>(l: ArrayView2<T>) -> Array2<T> {
    let n = l.nrows();
    let mut inv = Array2::<T>::zeros((n, n));
    let mut e = Array1::<T>::zeros(n);
    for j in 0..n {
        e.fill(T::zero());
        e[j] = T::one();
        let col = cholesky_solve(l, e.view());
        inv.column_mut(j).assign(&col);
    }
    // symmetrize against round-off
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (inv[[i, j]] + inv[[j, i]]) * T::lit(0.5);
            inv[[i, j]] = v;
            inv[[j, i]] = v;
        }
    }
    inv
}

/// `ln det A` from the Cholesky factor of `A`.
pub fn cholesky_log_det<T: Scalar>(l: ArrayView2<T>) -> T {
    let two = T::lit(2.0);
    l.diag().iter().map(|&d| two * d.ln()).sum()
}

/// Squared Mahalanobis norm `(x-μ)ᵀ A⁻¹ (x-μ)` with `L` the factor of `A`.
pub fn mahalanobis_sq<T: Scalar>(l: ArrayView2<T>, x: ArrayView1<T>, mean: ArrayView1<T>) -> T {
    let n = l.nrows();
    let mut y = vec![T::zero(); n];
    let mut acc = T::zero();
    for i in 0..n {
        let mut s = x[i] - mean[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        let v = s / l[[i, i]];
        y[i] = v;
        acc += v * v;
    }
    acc
}

/// Column means of a row-major sample matrix.
pub fn column_means<T: Scalar>(x: ArrayView2<T>) -> Array1<T> {
    let n = T::from_count(x.nrows().max(1));
    let mut m = Array1::<T>::zeros(x.ncols());
    for row in x.rows() {
        m += &row;
    }
    m / n
}

/// Maximum-likelihood (divide-by-n) scatter matrix about `mean`.
pub fn scatter<T: Scalar>(x: ArrayView2<T>, mean: ArrayView1<T>) -> Array2<T> {
    let d = x.ncols();
    let mut s = Array2::<T>::zeros((d, d));
    for row in x.rows() {
        for i in 0..d {
            let di = row[i] - mean[i];
            for j in i..d {
                s[[i, j]] += di * (row[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            s[[i, j]] = s[[j, i]];
        }
    }
    s
}
