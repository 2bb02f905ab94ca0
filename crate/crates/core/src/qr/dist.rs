//! 1D, 3D and tunable-grid CholeskyQR / CholeskyQR2 over the virtual grid.

use crate::collectives::{allreduce_groups, bcast_groups, reduce_groups, Packing};
use crate::cost::{CostLedger, CostVector};
use crate::error::{Error, Result};
use crate::grid::{CommKind, Communicator, GridShape, RankCoord};
use crate::layout::{
    assemble_columns, column_half, gather, subview, transpose_dist, DistMatrix, Half, Quadrant, SliceShape,
};
use crate::linalg::{
    axpy, cholinv, mm_structured, mm_tn, orthogonality_error, relative_residual, syrk, DenseMatrix, FlopCounter,
    Structure,
};
use crate::scalar::Scalar;

use super::cfr3d::cfr3d;
use super::driver::resolve_n_o;
use super::mm3d::mm3d_structured;
use super::{Diagnostics, QrOptions, QrResult, QrVariant};

use Structure::{General, Triangular};

type Pair<T> = (DistMatrix<T>, DistMatrix<T>);

/// Single CholeskyQR on a `1 x P x 1` grid with row-cyclic `A`.
pub fn cqr_1d<T: Scalar>(a: &DistMatrix<T>) -> Result<QrResult<T>> {
    check_1d(a)?;
    one_pass(a, pass_1d)
}

/// CholeskyQR2 on a `1 x P x 1` grid; `R = R_2 R_1` is formed locally.
pub fn cqr2_1d<T: Scalar>(a: &DistMatrix<T>) -> Result<QrResult<T>> {
    check_1d(a)?;
    two_pass(a, pass_1d, |r2, r1, ledger| {
        let mut fc = FlopCounter::new();
        let r = mm_structured(r2.block(RankCoord::new(0, 0, 0)), r1.block(RankCoord::new(0, 0, 0)), Triangular, Triangular, &mut fc)?;
        ledger.charge("mm_r", CostVector::flops(fc.flops()));
        r2.with_blocks(vec![r; r2.grid().p()])
    })
}

/// Single CholeskyQR on a cubic grid.
pub fn cqr_3d<T: Scalar>(a: &DistMatrix<T>, opts: QrOptions) -> Result<QrResult<T>> {
    check_3d(a)?;
    one_pass(a, |a, l| pass_3d(a, opts, l))
}

/// CholeskyQR2 on a cubic grid; `R = R_2 R_1` by MM3D.
pub fn cqr2_3d<T: Scalar>(a: &DistMatrix<T>, opts: QrOptions) -> Result<QrResult<T>> {
    check_3d(a)?;
    two_pass(a, |a, l| pass_3d(a, opts, l), combine_r_3d)
}

/// Single CholeskyQR on a `c x d x c` grid.
pub fn cacqr<T: Scalar>(a: &DistMatrix<T>, opts: QrOptions) -> Result<QrResult<T>> {
    check_ca(a)?;
    one_pass(a, |a, l| pass_ca(a, opts, l))
}

/// CholeskyQR2 on a `c x d x c` grid; `R = R_2 R_1` by MM3D on every subcube.
pub fn cacqr2<T: Scalar>(a: &DistMatrix<T>, opts: QrOptions) -> Result<QrResult<T>> {
    check_ca(a)?;
    two_pass(a, |a, l| pass_ca(a, opts, l), combine_r_3d)
}

fn combine_r_3d<T: Scalar>(r2: &DistMatrix<T>, r1: &DistMatrix<T>, ledger: &mut CostLedger) -> Result<DistMatrix<T>> {
    mm3d_structured(r2, r1, Triangular, Triangular, ledger, "mm_r")
}

fn one_pass<T: Scalar>(
    a: &DistMatrix<T>,
    pass: impl Fn(&DistMatrix<T>, &mut CostLedger) -> Result<Pair<T>>,
) -> Result<QrResult<T>> {
    let mut ledger = CostLedger::new();
    let (q, r) = pass(a, &mut ledger)?;
    let diagnostics = diagnostics(a, &q, &r, None)?;
    Ok(QrResult {
        q,
        r,
        ledger,
        diagnostics,
    })
}

fn two_pass<T: Scalar>(
    a: &DistMatrix<T>,
    pass: impl Fn(&DistMatrix<T>, &mut CostLedger) -> Result<Pair<T>>,
    combine: impl Fn(&DistMatrix<T>, &DistMatrix<T>, &mut CostLedger) -> Result<DistMatrix<T>>,
) -> Result<QrResult<T>> {
    let mut ledger = CostLedger::new();
    let mut inner = CostLedger::new();
    let (q1, r1) = pass(a, &mut inner)?;
    ledger.absorb("pass1", inner);
    // Recorded before the second pass; never used to abort.
    let first = orthogonality_error(&gather(&q1)?.cast::<f64>());

    let mut inner = CostLedger::new();
    let (q, r2) = pass(&q1, &mut inner)?;
    ledger.absorb("pass2", inner);
    let r = combine(&r2, &r1, &mut ledger)?;
    let diagnostics = diagnostics(a, &q, &r, Some(first))?;
    Ok(QrResult {
        q,
        r,
        ledger,
        diagnostics,
    })
}

fn diagnostics<T: Scalar>(
    a: &DistMatrix<T>,
    q: &DistMatrix<T>,
    r: &DistMatrix<T>,
    first_pass_orthogonality: Option<f64>,
) -> Result<Diagnostics> {
    let a = gather(a)?.cast::<f64>();
    let q = gather(q)?.cast::<f64>();
    let r = gather(r)?.cast::<f64>();
    Ok(Diagnostics {
        orthogonality: orthogonality_error(&q),
        residual: relative_residual(&a, &q, &r),
        first_pass_orthogonality,
    })
}

fn check_common<T: Scalar>(a: &DistMatrix<T>) -> Result<()> {
    let grid = a.grid();
    grid.require_power_of_two()?;
    grid.require_subcubes()?;
    if a.slice() != SliceShape::face(grid) {
        return Err(Error::GridShape(format!(
            "A must be cycled over the full {}x{} face",
            grid.d(),
            grid.c()
        )));
    }
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::Dimension(format!("CholeskyQR needs m >= n, got {m}x{n}")));
    }
    if !n.is_power_of_two() || n < grid.c() {
        return Err(Error::Dimension(format!(
            "n = {n} must be a power of two no smaller than c = {} (pad first)",
            grid.c()
        )));
    }
    Ok(())
}

fn check_1d<T: Scalar>(a: &DistMatrix<T>) -> Result<()> {
    if a.grid().c() != 1 {
        return Err(Error::GridShape(format!("1D algorithms need c = 1, got {}", a.grid())));
    }
    check_common(a)
}

fn check_3d<T: Scalar>(a: &DistMatrix<T>) -> Result<()> {
    if !a.grid().is_cubic() {
        return Err(Error::GridShape(format!("3D algorithms need a cubic grid, got {}", a.grid())));
    }
    check_common(a)
}

fn check_ca<T: Scalar>(a: &DistMatrix<T>) -> Result<()> {
    check_common(a)
}

/// Local Syrk, packed Allreduce, redundant CholInv, local `Q = A R^{-1}`.
fn pass_1d<T: Scalar>(a: &DistMatrix<T>, ledger: &mut CostLedger) -> Result<Pair<T>> {
    let grid = *a.grid();
    let n = a.cols();
    let mut costs = Vec::new();
    let mut x = Vec::new();
    for b in a.blocks() {
        let mut fc = FlopCounter::new();
        x.push(syrk(b, &mut fc));
        costs.push(CostVector::flops(fc.flops()));
    }
    ledger.charge_concurrent("syrk", costs);
    let z = allreduce_groups(&grid, CommKind::Column, &x, |_| Packing::SymmetricUpper, ledger, "allreduce")?;

    // Every rank factors the same Z; one factorization stands in for all.
    let mut fc = FlopCounter::new();
    let (l, y) = cholinv(&z[0], &mut fc)?;
    ledger.charge("cholinv", CostVector::flops(fc.flops()));

    let r_inv = y.transpose();
    let mut costs = Vec::new();
    let mut qb = Vec::new();
    for b in a.blocks() {
        let mut fc = FlopCounter::new();
        qb.push(mm_structured(b, &r_inv, General, Triangular, &mut fc)?);
        costs.push(CostVector::flops(fc.flops()));
    }
    ledger.charge_concurrent("mm_q", costs);
    let r = DistMatrix::from_blocks(n, n, grid, SliceShape::new(1, 1), vec![l.transpose(); grid.p()])?;
    Ok((a.with_blocks(qb)?, r))
}

/// `A^T A` on the `c x c` subcube slice, cubic-grid route: row Bcast, local
/// `W^T A`, Reduce down each column, Bcast along depth.
fn pass_3d<T: Scalar>(a: &DistMatrix<T>, opts: QrOptions, ledger: &mut CostLedger) -> Result<Pair<T>> {
    let grid = *a.grid();
    let x = local_gram(a, ledger)?;
    let y = reduce_groups(
        &grid,
        CommKind::Column,
        &x,
        |comm| {
            let m = first(comm);
            RankCoord::new(m.x, m.z, m.z)
        },
        |comm| diagonal(first(comm).x == first(comm).z),
        ledger,
        "gram/reduce",
    )?;
    let z = bcast_groups(
        &grid,
        CommKind::Depth,
        &y,
        |comm| {
            let m = first(comm);
            RankCoord::new(m.x, m.y, m.y)
        },
        |comm| diagonal(first(comm).x == first(comm).y),
        ledger,
        "gram/bcast_z",
    )?;
    finish_pass(a, gram_matrix(&grid, a.cols(), z)?, opts, ledger)
}

/// `A^T A` on the `c x c` subcube slice, tunable-grid route: row Bcast,
/// local `W^T A`, Reduce within contiguous y-groups onto `y mod c = z`,
/// Allreduce across the strided y-groups, Bcast along depth from
/// `z = y mod c`.
fn pass_ca<T: Scalar>(a: &DistMatrix<T>, opts: QrOptions, ledger: &mut CostLedger) -> Result<Pair<T>> {
    let grid = *a.grid();
    let c = grid.c();
    let x = local_gram(a, ledger)?;
    let y = reduce_groups(
        &grid,
        CommKind::YContiguous,
        &x,
        |comm| {
            let m = first(comm);
            RankCoord::new(m.x, m.y + m.z, m.z)
        },
        |comm| diagonal(first(comm).x == first(comm).z),
        ledger,
        "gram/reduce",
    )?;
    let y = allreduce_groups(
        &grid,
        CommKind::YStrided,
        &y,
        |comm| diagonal(first(comm).x == first(comm).z),
        ledger,
        "gram/allreduce",
    )?;
    let z = bcast_groups(
        &grid,
        CommKind::Depth,
        &y,
        |comm| {
            let m = first(comm);
            RankCoord::new(m.x, m.y, m.y % c)
        },
        |comm| diagonal(first(comm).x == first(comm).y % c),
        ledger,
        "gram/bcast_z",
    )?;
    finish_pass(a, gram_matrix(&grid, a.cols(), z)?, opts, ledger)
}

fn first(comm: &Communicator) -> RankCoord {
    comm.members()[0]
}

/// Gram blocks on the diagonal of the `c x c` block grid are symmetric and
/// travel as their upper triangle.
fn diagonal(on_diagonal: bool) -> Packing {
    if on_diagonal {
        Packing::SymmetricUpper
    } else {
        Packing::Full
    }
}

fn gram_matrix<T: Scalar>(grid: &GridShape, n: usize, blocks: Vec<DenseMatrix<T>>) -> Result<DistMatrix<T>> {
    DistMatrix::from_blocks(n, n, *grid, SliceShape::subcube(grid), blocks)
}

/// Row Bcast of `A` from `x = z`, then `X = W^T A` on every rank. Ranks with
/// `x = z` multiply their own block by itself and use Syrk.
fn local_gram<T: Scalar>(a: &DistMatrix<T>, ledger: &mut CostLedger) -> Result<Vec<DenseMatrix<T>>> {
    let grid = *a.grid();
    let w = bcast_groups(
        &grid,
        CommKind::Row,
        a.blocks(),
        |comm| {
            let m = first(comm);
            RankCoord::new(m.z, m.y, m.z)
        },
        |_| Packing::Full,
        ledger,
        "gram/bcast_a",
    )?;
    let mut costs = Vec::new();
    let mut x = Vec::new();
    for r in grid.ranks() {
        let id = grid.rank_id(r);
        let mut fc = FlopCounter::new();
        x.push(if r.x == r.z {
            syrk(&a.blocks()[id], &mut fc)
        } else {
            mm_tn(&w[id], &a.blocks()[id], &mut fc)?
        });
        costs.push(CostVector::flops(fc.flops()));
    }
    ledger.charge_concurrent("gram/local", costs);
    Ok(x)
}

/// CFR3D on the Gram matrix, then `Q` and `R` on every subcube.
fn finish_pass<T: Scalar>(
    a: &DistMatrix<T>,
    z: DistMatrix<T>,
    opts: QrOptions,
    ledger: &mut CostLedger,
) -> Result<Pair<T>> {
    let n = z.rows();
    let n_o = resolve_n_o(n, a.grid().c(), opts.n_o)?;
    let split = opts.variant == QrVariant::InvertSplit && n > n_o;
    let (l, y) = cfr3d(&z, n_o, !split, ledger)?;

    let q = if split {
        // R = [[L11^T, L21^T], [0, L22^T]], so
        // Q1 = A1 Y11^T and Q2 = (A2 - Q1 L21^T) Y22^T.
        let y11t = transpose_dist(&subview(&y, Quadrant::A11)?, Packing::TriangularHalf, ledger, "q/transpose_y11")?;
        let l21t = transpose_dist(&subview(&l, Quadrant::A21)?, Packing::Full, ledger, "q/transpose_l21")?;
        let y22t = transpose_dist(&subview(&y, Quadrant::A22)?, Packing::TriangularHalf, ledger, "q/transpose_y22")?;
        let a1 = column_half(a, Half::Left)?;
        let a2 = column_half(a, Half::Right)?;
        let q1 = mm3d_structured(&a1, &y11t, General, Triangular, ledger, "q/mm_q1")?;
        let t = mm3d_structured(&q1, &l21t, General, General, ledger, "q/mm_t")?;
        let mut costs = Vec::new();
        let mut blocks = Vec::new();
        for (tb, ab) in t.blocks().iter().zip(a2.blocks()) {
            let mut fc = FlopCounter::new();
            blocks.push(axpy(-T::one(), tb, ab, &mut fc)?);
            costs.push(CostVector::flops(fc.flops()));
        }
        ledger.charge_concurrent("q/axpy", costs);
        let q2 = mm3d_structured(&a2.with_blocks(blocks)?, &y22t, General, Triangular, ledger, "q/mm_q2")?;
        assemble_columns(&q1, &q2)?
    } else {
        let r_inv = transpose_dist(&y, Packing::TriangularHalf, ledger, "q/transpose_y")?;
        mm3d_structured(a, &r_inv, General, Triangular, ledger, "q/mm")?
    };
    let r = transpose_dist(&l, Packing::TriangularHalf, ledger, "r/transpose")?;
    Ok((q, r))
}
