//! Matrix multiplication on the `c x c x c` subcubes.

use crate::collectives::{allreduce_groups, bcast_groups, Packing};
use crate::cost::{CostLedger, CostVector};
use crate::error::{Error, Result};
use crate::grid::{CommKind, RankCoord};
use crate::layout::{DistMatrix, SliceShape};
use crate::linalg::{mm_structured, FlopCounter, Structure};
use crate::scalar::Scalar;

/// `C = AB` on every subcube concurrently.
///
/// `A` is cycled over a `pr x c` slice and `B` over the `c x c` subcube
/// slice; `C` comes back distributed like `A`. When `pr = d > c`, each
/// subcube multiplies the rows of `A` it owns by the full `B`.
///
/// Rank `(x, y, z)` receives the `A` block of column residue `z` along its
/// row, the `B` block of row residue `z` along its subcube column, multiplies
/// locally, and the depth Allreduce sums over the inner residues.
pub fn mm3d<T: Scalar>(a: &DistMatrix<T>, b: &DistMatrix<T>, ledger: &mut CostLedger) -> Result<DistMatrix<T>> {
    mm3d_structured(a, b, Structure::General, Structure::General, ledger, "mm3d")
}

/// [`mm3d`] with declared operand structure (affects the flop charge only).
pub fn mm3d_structured<T: Scalar>(
    a: &DistMatrix<T>,
    b: &DistMatrix<T>,
    sa: Structure,
    sb: Structure,
    ledger: &mut CostLedger,
    label: &str,
) -> Result<DistMatrix<T>> {
    let grid = *a.grid();
    grid.require_subcubes()?;
    let c = grid.c();
    if b.grid() != &grid {
        return Err(Error::GridShape("mm3d operands live on different grids".into()));
    }
    if a.slice().pc != c || b.slice() != SliceShape::subcube(&grid) {
        return Err(Error::GridShape(format!(
            "mm3d needs A over {c} process columns and B over the {c}x{c} subcube slice"
        )));
    }
    if a.cols() != b.rows() {
        return Err(Error::Dimension(format!(
            "mm3d: cannot multiply {}x{} by {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }

    let x = bcast_groups(
        &grid,
        CommKind::Row,
        a.blocks(),
        |comm| {
            let m = comm.members()[0];
            RankCoord::new(m.z, m.y, m.z)
        },
        |_| Packing::Full,
        ledger,
        &format!("{label}/bcast_a"),
    )?;
    let y = bcast_groups(
        &grid,
        CommKind::YContiguous,
        b.blocks(),
        |comm| {
            let m = comm.members()[0];
            RankCoord::new(m.x, m.y + m.z, m.z)
        },
        |_| Packing::Full,
        ledger,
        &format!("{label}/bcast_b"),
    )?;

    let mut costs = Vec::with_capacity(grid.p());
    let mut z = Vec::with_capacity(grid.p());
    for (xb, yb) in x.iter().zip(&y) {
        let mut fc = FlopCounter::new();
        z.push(mm_structured(xb, yb, sa, sb, &mut fc)?);
        costs.push(CostVector::flops(fc.flops()));
    }
    ledger.charge_concurrent(&format!("{label}/local"), costs);

    let sum = allreduce_groups(&grid, CommKind::Depth, &z, |_| Packing::Full, ledger, &format!("{label}/allreduce"))?;
    DistMatrix::from_blocks(a.rows(), b.cols(), grid, a.slice(), sum)
}
