//! Recursive Cholesky factorization with triangular inverse on the subcubes.

use crate::collectives::{allgather_groups, Packing};
use crate::cost::{CostLedger, CostVector};
use crate::error::{Error, Result};
use crate::grid::CommKind;
use crate::layout::{
    assemble_quadrants, cyclic_block, subview, transpose_dist, DistMatrix, Quadrant, SliceShape,
};
use crate::linalg::{axpy, cholinv, DenseMatrix, FlopCounter, Structure};
use crate::scalar::Scalar;

use super::mm3d::mm3d_structured;

/// Factors SPD `A` (on the `c x c` subcube slice) as `A = LL^T` and returns
/// `(L, Y)` with `Y = L^{-1}`, both distributed like `A`.
///
/// Recursion halves `n` until it reaches `n_o`, where each square slice
/// allgathers its block and runs the sequential [`cholinv`]. With
/// `want_inverse = false` the top level skips the off-diagonal block of `Y`,
/// which is then left zero; `Y` holds only its two diagonal blocks.
///
/// A breakdown reports the pivot's index in `A`.
pub fn cfr3d<T: Scalar>(
    a: &DistMatrix<T>,
    n_o: usize,
    want_inverse: bool,
    ledger: &mut CostLedger,
) -> Result<(DistMatrix<T>, DistMatrix<T>)> {
    let grid = *a.grid();
    grid.require_subcubes()?;
    let c = grid.c();
    if a.slice() != SliceShape::subcube(&grid) {
        return Err(Error::GridShape(format!("cfr3d needs A on the {c}x{c} subcube slice")));
    }
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Dimension(format!("cfr3d of non-square {}x{} matrix", n, a.cols())));
    }
    if n_o == 0 || !n_o.is_multiple_of(c) || !n.is_multiple_of(n_o) || !(n / n_o).is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "base case {n_o} must be a multiple of c = {c} with n/n_o a power of two (n = {n})"
        )));
    }
    recurse(a, n_o, want_inverse, 0, ledger)
}

fn recurse<T: Scalar>(
    a: &DistMatrix<T>,
    n_o: usize,
    want_inverse: bool,
    offset: usize,
    ledger: &mut CostLedger,
) -> Result<(DistMatrix<T>, DistMatrix<T>)> {
    let n = a.rows();
    if n == n_o {
        return base_case(a, offset, ledger);
    }
    let h = n / 2;
    let a11 = subview(a, Quadrant::A11)?;
    let a21 = subview(a, Quadrant::A21)?;
    let a22 = subview(a, Quadrant::A22)?;

    let (l11, y11) = recurse(&a11, n_o, true, offset, ledger)?;
    let w = transpose_dist(&y11, Packing::TriangularHalf, ledger, "cfr3d/transpose_y11")?;
    let l21 = mm3d_labelled(&a21, &w, ledger, "cfr3d/mm_l21")?;
    let x = transpose_dist(&l21, Packing::Full, ledger, "cfr3d/transpose_l21")?;
    let u = mm3d_labelled(&l21, &x, ledger, "cfr3d/mm_update")?;

    let mut costs = Vec::new();
    let mut blocks = Vec::new();
    for (ub, ab) in u.blocks().iter().zip(a22.blocks()) {
        let mut fc = FlopCounter::new();
        blocks.push(axpy(-T::one(), ub, ab, &mut fc)?);
        costs.push(CostVector::flops(fc.flops()));
    }
    ledger.charge_concurrent("cfr3d/axpy", costs);
    let z = a22.with_blocks(blocks)?;

    let (l22, y22) = recurse(&z, n_o, true, offset + h, ledger)?;
    let y21 = if want_inverse {
        let u = mm3d_labelled(&l21, &y11, ledger, "cfr3d/mm_y_left")?;
        let w = y22.map_blocks(|b| b.neg())?;
        mm3d_labelled(&w, &u, ledger, "cfr3d/mm_y21")?
    } else {
        DistMatrix::zeros(h, h, *a.grid(), a.slice())?
    };
    Ok((
        assemble_quadrants(&l11, None, &l21, &l22)?,
        assemble_quadrants(&y11, None, &y21, &y22)?,
    ))
}

fn mm3d_labelled<T: Scalar>(
    a: &DistMatrix<T>,
    b: &DistMatrix<T>,
    ledger: &mut CostLedger,
    label: &str,
) -> Result<DistMatrix<T>> {
    mm3d_structured(a, b, Structure::General, Structure::General, ledger, label)
}

/// Allgather over each square slice, then a redundant sequential `cholinv`.
fn base_case<T: Scalar>(
    a: &DistMatrix<T>,
    offset: usize,
    ledger: &mut CostLedger,
) -> Result<(DistMatrix<T>, DistMatrix<T>)> {
    let grid = *a.grid();
    let slice = a.slice();
    let n = a.rows();
    let groups = allgather_groups(&grid, CommKind::SubcubeSlice, a.blocks(), ledger, "cfr3d/base_allgather")?;

    let mut l_blocks = vec![DenseMatrix::zeros(0, 0); grid.p()];
    let mut y_blocks = vec![DenseMatrix::zeros(0, 0); grid.p()];
    let mut costs = Vec::new();
    for (comm, gathered) in groups {
        let y0 = comm.members()[0].y;
        let mut t = DenseMatrix::zeros(n, n);
        for (r, b) in comm.members().iter().zip(&gathered) {
            let (py, px) = (r.y - y0, r.x);
            for i in 0..b.rows() {
                for j in 0..b.cols() {
                    t[(py + i * slice.pr, px + j * slice.pc)] = b[(i, j)];
                }
            }
        }
        let mut fc = FlopCounter::new();
        let (l, y) = cholinv(&t, &mut fc).map_err(|e| match e {
            Error::Breakdown { pivot, value } => Error::Breakdown {
                pivot: pivot + offset,
                value,
            },
            other => other,
        })?;
        costs.push(CostVector::flops(fc.flops()));
        for r in comm.members() {
            let id = grid.rank_id(*r);
            l_blocks[id] = cyclic_block(&l, r.y - y0, r.x, slice);
            y_blocks[id] = cyclic_block(&y, r.y - y0, r.x, slice);
        }
    }
    ledger.charge_concurrent("cfr3d/cholinv", costs);
    Ok((a.with_blocks(l_blocks)?, a.with_blocks(y_blocks)?))
}
