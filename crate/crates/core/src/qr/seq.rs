//! Sequential CholeskyQR and CholeskyQR2.

use crate::error::{Error, Result};
use crate::linalg::{cholinv, mm_structured, syrk, DenseMatrix, FlopCounter, Structure};
use crate::scalar::Scalar;

/// One CholeskyQR pass: `W = A^T A`, `R^T, R^{-T} = CholInv(W)`,
/// `Q = A R^{-1}`. Returns `(Q, R)`.
///
/// A Gram matrix whose order is not a power of two is extended with an
/// identity block before `cholinv` and trimmed after.
pub fn cqr<T: Scalar>(a: &DenseMatrix<T>, counter: &mut FlopCounter) -> Result<(DenseMatrix<T>, DenseMatrix<T>)> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::Dimension(format!("CholeskyQR needs m >= n, got {m}x{n}")));
    }
    let w = syrk(a, counter);
    let (l, y) = cholinv_padded(&w, counter)?;
    let q = mm_structured(a, &y.transpose(), Structure::General, Structure::Triangular, counter)?;
    Ok((q, l.transpose()))
}

/// Two CholeskyQR passes and `R = R_2 R_1`.
pub fn cqr2<T: Scalar>(a: &DenseMatrix<T>, counter: &mut FlopCounter) -> Result<(DenseMatrix<T>, DenseMatrix<T>)> {
    let (q1, r1) = cqr(a, counter)?;
    let (q, r2) = cqr(&q1, counter)?;
    let r = mm_structured(&r2, &r1, Structure::Triangular, Structure::Triangular, counter)?;
    Ok((q, r))
}

fn cholinv_padded<T: Scalar>(
    w: &DenseMatrix<T>,
    counter: &mut FlopCounter,
) -> Result<(DenseMatrix<T>, DenseMatrix<T>)> {
    let n = w.rows();
    let np = n.next_power_of_two();
    if np == n {
        return cholinv(w, counter);
    }
    let mut big = DenseMatrix::identity(np);
    big.set_submatrix(0, 0, w);
    let (l, y) = cholinv(&big, counter)?;
    Ok((l.submatrix(0, 0, n, n), y.submatrix(0, 0, n, n)))
}
