//! Padding and the gather-to-dense entry point.

use crate::cost::CostLedger;
use crate::error::{Error, Result};
use crate::grid::GridShape;
use crate::layout::{gather, scatter_cyclic, SliceShape};
use crate::linalg::{orthogonality_error, relative_residual, DenseMatrix};
use crate::scalar::Scalar;

use super::dist::{cacqr, cacqr2, cqr2_1d, cqr2_3d, cqr_1d, cqr_3d};
use super::{Algorithm, Diagnostics, QrOptions};

/// Original and padded dimensions of a factorization problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PaddedShape {
    pub m: usize,
    pub n: usize,
    pub m_padded: usize,
    pub n_padded: usize,
}

impl PaddedShape {
    /// `n` grows to the next power of two no smaller than `c`; the new
    /// columns carry an identity block below `A`, and zero rows round the
    /// height up to a multiple of `d`.
    pub fn new(m: usize, n: usize, grid: &GridShape) -> Self {
        let n_padded = n.max(grid.c()).next_power_of_two();
        let rows = m + (n_padded - n);
        let m_padded = rows.div_ceil(grid.d()) * grid.d();
        Self {
            m,
            n,
            m_padded,
            n_padded,
        }
    }

    pub fn is_padded(&self) -> bool {
        self.m != self.m_padded || self.n != self.n_padded
    }
}

/// `[[A, 0], [0, I]]` followed by zero rows. Its QR factors are
/// `diag(Q, I)` and `diag(R, I)` up to the zero rows, so the leading blocks
/// are the factors of `A`.
pub fn pad_for_grid<T: Scalar>(a: &DenseMatrix<T>, grid: &GridShape) -> (DenseMatrix<T>, PaddedShape) {
    let (m, n) = a.shape();
    let shape = PaddedShape::new(m, n, grid);
    if !shape.is_padded() {
        return (a.clone(), shape);
    }
    let mut p = DenseMatrix::zeros(shape.m_padded, shape.n_padded);
    p.set_submatrix(0, 0, a);
    for k in 0..shape.n_padded - n {
        p[(m + k, n + k)] = T::one();
    }
    (p, shape)
}

/// `max(c, n / c^2)`, the base case that balances the CFR3D base-case
/// Allgathers against its matrix multiplications.
pub fn default_n_o(n: usize, c: usize) -> usize {
    c.max(n / (c * c))
}

/// Validates a requested base-case size or supplies the default.
pub fn resolve_n_o(n: usize, c: usize, requested: Option<usize>) -> Result<usize> {
    let n_o = requested.unwrap_or_else(|| default_n_o(n, c));
    if !n_o.is_power_of_two() || n_o < c || n_o > n {
        return Err(Error::InvalidArgument(format!(
            "base case n_o = {n_o} must be a power of two in [c, n] = [{c}, {n}]"
        )));
    }
    Ok(n_o)
}

/// A finished factorization with dense, unpadded factors.
#[derive(Debug, Clone)]
pub struct Factorization<T> {
    pub q: DenseMatrix<T>,
    pub r: DenseMatrix<T>,
    pub ledger: CostLedger,
    pub diagnostics: Diagnostics,
    pub shape: PaddedShape,
    pub grid: GridShape,
    /// CFR3D base case used (the full padded width for 1D algorithms).
    pub n_o: usize,
}

/// Pads `a`, distributes it over `grid`, runs `alg`, gathers and trims.
/// Diagnostics are measured against the unpadded `a`.
pub fn factor<T: Scalar>(
    alg: Algorithm,
    a: &DenseMatrix<T>,
    grid: GridShape,
    opts: QrOptions,
) -> Result<Factorization<T>> {
    let (m, n) = a.shape();
    if m < n || n == 0 {
        return Err(Error::Dimension(format!("need m >= n >= 1, got {m}x{n}")));
    }
    let (padded, shape) = pad_for_grid(a, &grid);
    let n_o = match alg {
        Algorithm::Cqr1d | Algorithm::Cqr2_1d => shape.n_padded,
        _ => resolve_n_o(shape.n_padded, grid.c(), opts.n_o)?,
    };
    let opts = QrOptions {
        n_o: Some(n_o),
        ..opts
    };
    let da = scatter_cyclic(&padded, grid, SliceShape::face(&grid))?;
    let res = match alg {
        Algorithm::Cqr1d => cqr_1d(&da)?,
        Algorithm::Cqr2_1d => cqr2_1d(&da)?,
        Algorithm::Cqr3d => cqr_3d(&da, opts)?,
        Algorithm::Cqr2_3d => cqr2_3d(&da, opts)?,
        Algorithm::Cacqr => cacqr(&da, opts)?,
        Algorithm::Cacqr2 => cacqr2(&da, opts)?,
    };
    let q = gather(&res.q)?.submatrix(0, 0, m, n);
    let r = gather(&res.r)?.submatrix(0, 0, n, n);
    let (a64, q64, r64) = (a.cast::<f64>(), q.cast::<f64>(), r.cast::<f64>());
    let diagnostics = Diagnostics {
        orthogonality: orthogonality_error(&q64),
        residual: relative_residual(&a64, &q64, &r64),
        ..res.diagnostics
    };
    Ok(Factorization {
        q,
        r,
        ledger: res.ledger,
        diagnostics,
        shape,
        grid,
        n_o,
    })
}
