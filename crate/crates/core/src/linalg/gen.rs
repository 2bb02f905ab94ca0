//! Seeded test-matrix generation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{householder_qr, DenseMatrix};
use crate::scalar::Scalar;

/// `rows x cols` matrix of independent standard-normal entries.
pub fn standard_normal<T: Scalar>(rows: usize, cols: usize, seed: u64) -> DenseMatrix<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| {
        let v: f64 = StandardNormal.sample(&mut rng);
        T::from_f64_lossy(v)
    })
}

/// `A = U diag(s) V^T` with singular values spaced geometrically from 1 down
/// to `1/cond`, so that `cond_2(A) = cond` up to rounding.
///
/// `U` and `V` are the orthogonal factors of seeded Gaussian matrices. The
/// construction runs in `f64` and is cast to `T` at the end.
pub fn gen_test_matrix<T: Scalar>(m: usize, n: usize, cond: f64, seed: u64) -> Result<DenseMatrix<T>> {
    if !(cond >= 1.0) || !cond.is_finite() {
        return Err(Error::InvalidArgument(format!("condition number must be >= 1, got {cond}")));
    }
    if m < n || n == 0 {
        return Err(Error::Dimension(format!("test matrix needs m >= n >= 1, got {m}x{n}")));
    }
    let (u, _) = householder_qr(&standard_normal::<f64>(m, n, seed))?;
    let (v, _) = householder_qr(&standard_normal::<f64>(n, n, seed ^ 0x9e37_79b9_7f4a_7c15))?;
    let sigma: Vec<f64> = (0..n)
        .map(|i| {
            if n == 1 {
                1.0
            } else {
                cond.powf(-(i as f64) / ((n - 1) as f64))
            }
        })
        .collect();
    let a = DenseMatrix::from_fn(m, n, |i, j| {
        (0..n).map(|k| u[(i, k)] * sigma[k] * v[(j, k)]).sum::<f64>()
    });
    Ok(a.cast())
}
