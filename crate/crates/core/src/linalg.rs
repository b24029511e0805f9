//! Small dense symmetric solvers for information and covariance matrices.
//!
//! Matrices here are q×q with q in the single or low double digits, so a
//! straightforward Cholesky factorization is all that is needed.

use ndarray::{Array1, Array2};

use crate::scalar::Real;

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
///
/// Returns `None` when a pivot falls below `rel_tol` times the largest
/// diagonal entry, i.e. when `A` is not numerically positive definite.
pub fn cholesky<T: Real>(a: &Array2<T>, rel_tol: T) -> Option<Array2<T>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let scale = (0..n)
        .map(|i| a[[i, i]].abs())
        .fold(T::zero(), |m, v| if v > m { v } else { m });
    let floor = if scale > T::zero() { scale * rel_tol } else { rel_tol };
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d = d - l[[j, k]] * l[[j, k]];
        }
        if !(d > floor) {
            return None;
        }
        let djj = d.sqrt();
        l[[j, j]] = djj;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s = s - l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / djj;
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` given the Cholesky factor.
pub fn cholesky_solve<T: Real>(l: &Array2<T>, b: &Array1<T>) -> Array1<T> {
    let n = l.nrows();
    let mut y = Array1::<T>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    let mut x = Array1::<T>::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s = s - l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Inverse of an SPD matrix from its Cholesky factor.
pub fn cholesky_inverse<T: Real>(l: &Array2<T>) -> Array2<T> {
    let n = l.nrows();
    let mut inv = Array2::<T>::zeros((n, n));
    let mut e = Array1::<T>::zeros(n);
    for j in 0..n {
        e.fill(T::zero());
        e[j] = T::one();
        let col = cholesky_solve(l, &e);
        for i in 0..n {
            inv[[i, j]] = col[i];
        }
    }
    // symmetrize against rounding
    for i in 0..n {
        for j in (i + 1)..n {
            let m = (inv[[i, j]] + inv[[j, i]]) / T::lit(2.0);
            inv[[i, j]] = m;
            inv[[j, i]] = m;
        }
    }
    inv
}

/// `L z` for a lower-triangular `L`.
pub fn lower_mul<T: Real>(l: &Array2<T>, z: &[T]) -> Vec<T> {
    let n = l.nrows();
    (0..n)
        .map(|i| (0..=i).fold(T::zero(), |s, k| s + l[[i, k]] * z[k]))
        .collect()
}
