//! Householder QR used as an independent reference for the Cholesky-based
//! factorizations. Never called by the distributed algorithms themselves.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// Reduced Householder QR of an `m x n` matrix with `m >= n`.
///
/// Returns `Q` (`m x n`, orthonormal columns) and upper-triangular `R`
/// (`n x n`) with a nonnegative diagonal. Rank-deficient inputs still yield a
/// valid factorization; their `R` carries (near-)zero diagonal entries.
pub fn householder_qr<T: Scalar>(a: &DenseMatrix<T>) -> Result<(DenseMatrix<T>, DenseMatrix<T>)> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::Dimension(format!("householder QR needs m >= n, got {m}x{n}")));
    }
    let mut r = a.clone();
    let mut reflectors: Vec<Vec<T>> = Vec::with_capacity(n);

    for k in 0..n {
        let mut v: Vec<T> = (k..m).map(|i| r[(i, k)]).collect();
        let norm = v.iter().map(|&x| x * x).sum::<T>().sqrt();
        if norm == T::zero() {
            reflectors.push(Vec::new());
            continue;
        }
        let alpha = if v[0] >= T::zero() { -norm } else { norm };
        v[0] = v[0] - alpha;
        let vnorm2 = v.iter().map(|&x| x * x).sum::<T>();
        if vnorm2 == T::zero() {
            reflectors.push(Vec::new());
            continue;
        }
        let two = T::one() + T::one();
        for j in k..n {
            let dot = (k..m).map(|i| v[i - k] * r[(i, j)]).sum::<T>();
            let f = two * dot / vnorm2;
            for i in k..m {
                r[(i, j)] = r[(i, j)] - f * v[i - k];
            }
        }
        reflectors.push(v);
    }

    // Q = H_0 H_1 ... H_{n-1} applied to the first n columns of I.
    let mut q = DenseMatrix::from_fn(m, n, |i, j| if i == j { T::one() } else { T::zero() });
    let two = T::one() + T::one();
    for k in (0..n).rev() {
        let v = &reflectors[k];
        if v.is_empty() {
            continue;
        }
        let vnorm2 = v.iter().map(|&x| x * x).sum::<T>();
        for j in 0..n {
            let dot = (k..m).map(|i| v[i - k] * q[(i, j)]).sum::<T>();
            let f = two * dot / vnorm2;
            for i in k..m {
                q[(i, j)] = q[(i, j)] - f * v[i - k];
            }
        }
    }

    let mut r_out = DenseMatrix::from_fn(n, n, |i, j| if j >= i { r[(i, j)] } else { T::zero() });
    sign_normalize(&mut q, &mut r_out);
    Ok((q, r_out))
}

/// Flips signs so that `R` has a nonnegative diagonal while keeping `QR`
/// unchanged.
pub fn sign_normalize<T: Scalar>(q: &mut DenseMatrix<T>, r: &mut DenseMatrix<T>) {
    let n = r.rows();
    for i in 0..n {
        if r[(i, i)] < T::zero() {
            for j in 0..r.cols() {
                r[(i, j)] = -r[(i, j)];
            }
            for row in 0..q.rows() {
                q[(row, i)] = -q[(row, i)];
            }
        }
    }
}

/// `||Q^T Q - I||_F`.
pub fn orthogonality_error<T: Scalar>(q: &DenseMatrix<T>) -> T {
    let n = q.cols();
    let mut s = T::zero();
    for i in 0..n {
        for j in 0..n {
            let mut d = T::zero();
            for r in 0..q.rows() {
                d = d + q[(r, i)] * q[(r, j)];
            }
            if i == j {
                d = d - T::one();
            }
            s = s + d * d;
        }
    }
    s.sqrt()
}

/// `||A - QR||_F / ||A||_F` (absolute when `A = 0`).
pub fn relative_residual<T: Scalar>(a: &DenseMatrix<T>, q: &DenseMatrix<T>, r: &DenseMatrix<T>) -> T {
    let (m, n) = a.shape();
    let mut s = T::zero();
    for i in 0..m {
        for j in 0..n {
            let mut v = a[(i, j)];
            for k in 0..r.rows() {
                v = v - q[(i, k)] * r[(k, j)];
            }
            s = s + v * v;
        }
    }
    let na = a.frobenius_norm();
    if na == T::zero() {
        s.sqrt()
    } else {
        s.sqrt() / na
    }
}
