//! Collectives over virtual communicators.
//!
//! Each collective is executed as one deterministic transformation of the
//! members' buffers; only its butterfly cost formula is charged, never a
//! message-by-message schedule. Reductions sum left to right in communicator
//! order.
//!
//! The single-communicator functions ([`bcast`], [`reduce`], ...) charge
//! their own cost. The `*_groups` executors run a collective on every
//! communicator of one kind at once and charge the maximum over the groups.

use crate::cost::{t_allgather, t_allreduce, t_bcast, t_reduce, t_transpose, CostLedger, CostVector};
use crate::error::{Error, Result};
use crate::grid::{CommKind, Communicator, GridShape, RankCoord};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;
use crate::Rational;

/// How a buffer is counted (and, for symmetric buffers, moved).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Packing {
    /// Every stored word travels.
    #[default]
    Full,
    /// A symmetric square buffer travels as its upper triangle,
    /// `n(n+1)/2` words; receivers rebuild the lower triangle by mirroring.
    SymmetricUpper,
    /// Local block of a distributed triangular matrix, charged at half its
    /// stored words.
    TriangularHalf,
}

impl Packing {
    pub fn words<T: Scalar>(self, buf: &DenseMatrix<T>) -> Rational {
        let n = buf.len() as i64;
        match self {
            Packing::Full => Rational::from_integer(n),
            Packing::SymmetricUpper => {
                let k = buf.rows() as i64;
                Rational::from_integer(k * (k + 1) / 2)
            }
            Packing::TriangularHalf => Rational::new(n, 2),
        }
    }

    fn check<T: Scalar>(self, buf: &DenseMatrix<T>) -> Result<()> {
        if self == Packing::SymmetricUpper && !buf.is_square() {
            return Err(Error::Collective(format!(
                "upper-triangle packing needs a square buffer, got {}x{}",
                buf.rows(),
                buf.cols()
            )));
        }
        Ok(())
    }

    /// What arrives at the receiver.
    fn transmit<T: Scalar>(self, buf: &DenseMatrix<T>) -> DenseMatrix<T> {
        match self {
            Packing::SymmetricUpper => DenseMatrix::unpack_symmetric(buf.rows(), &buf.pack_upper())
                .expect("packed length matches by construction"),
            _ => buf.clone(),
        }
    }
}

fn root_index(root: RankCoord, comm: &Communicator) -> Result<usize> {
    comm.index_of(root)
        .ok_or_else(|| Error::Collective(format!("root {root} is not a member of the {:?} communicator", comm.kind())))
}

fn check_member_count<T>(bufs: &[DenseMatrix<T>], comm: &Communicator) -> Result<()> {
    if bufs.len() != comm.size() {
        return Err(Error::Collective(format!(
            "{} buffers supplied for a communicator of size {}",
            bufs.len(),
            comm.size()
        )));
    }
    Ok(())
}

fn check_uniform_shape<T: Scalar>(bufs: &[DenseMatrix<T>]) -> Result<()> {
    if let Some(first) = bufs.first() {
        if let Some(bad) = bufs.iter().find(|b| b.shape() != first.shape()) {
            return Err(Error::Collective(format!(
                "shape mismatch among members: {}x{} vs {}x{}",
                first.rows(),
                first.cols(),
                bad.rows(),
                bad.cols()
            )));
        }
    }
    Ok(())
}

fn sum_in_order<T: Scalar>(bufs: &[DenseMatrix<T>], packing: Packing) -> Result<DenseMatrix<T>> {
    check_uniform_shape(bufs)?;
    let mut acc = packing.transmit(&bufs[0]);
    for b in &bufs[1..] {
        acc.add_assign(&packing.transmit(b))?;
    }
    Ok(acc)
}

fn bcast_raw<T: Scalar>(
    buf: &DenseMatrix<T>,
    root: RankCoord,
    comm: &Communicator,
    packing: Packing,
) -> Result<(Vec<DenseMatrix<T>>, CostVector)> {
    let r = root_index(root, comm)?;
    packing.check(buf)?;
    let cost = t_bcast(packing.words(buf), comm.size())?;
    let received = packing.transmit(buf);
    let out = (0..comm.size())
        .map(|i| if i == r { buf.clone() } else { received.clone() })
        .collect();
    Ok((out, cost))
}

fn reduce_raw<T: Scalar>(
    bufs: &[DenseMatrix<T>],
    root: RankCoord,
    comm: &Communicator,
    packing: Packing,
) -> Result<(DenseMatrix<T>, CostVector)> {
    check_member_count(bufs, comm)?;
    root_index(root, comm)?;
    packing.check(&bufs[0])?;
    let sum = if comm.size() == 1 { bufs[0].clone() } else { sum_in_order(bufs, packing)? };
    let cost = t_reduce(packing.words(&bufs[0]), comm.size())?;
    Ok((sum, cost))
}

fn allreduce_raw<T: Scalar>(
    bufs: &[DenseMatrix<T>],
    comm: &Communicator,
    packing: Packing,
) -> Result<(DenseMatrix<T>, CostVector)> {
    check_member_count(bufs, comm)?;
    packing.check(&bufs[0])?;
    let sum = if comm.size() == 1 { bufs[0].clone() } else { sum_in_order(bufs, packing)? };
    let cost = t_allreduce(packing.words(&bufs[0]), comm.size())?;
    Ok((sum, cost))
}

fn allgather_raw<T: Scalar>(bufs: &[DenseMatrix<T>], comm: &Communicator) -> Result<(Vec<DenseMatrix<T>>, CostVector)> {
    check_member_count(bufs, comm)?;
    let total: usize = bufs.iter().map(|b| b.len()).sum();
    let cost = t_allgather(Rational::from_integer(total as i64), comm.size())?;
    Ok((bufs.to_vec(), cost))
}

/// Root's buffer copied to every member (member order). Charges
/// `T_Bcast(words, |comm|)`.
pub fn bcast<T: Scalar>(
    buf: &DenseMatrix<T>,
    root: RankCoord,
    comm: &Communicator,
    ledger: &mut CostLedger,
) -> Result<Vec<DenseMatrix<T>>> {
    let (out, cost) = bcast_raw(buf, root, comm, Packing::Full)?;
    ledger.charge("bcast", cost);
    Ok(out)
}

/// Element-wise sum of the members' buffers (given in member order),
/// delivered at `root`. Charges `T_Reduce(words, |comm|)`.
pub fn reduce<T: Scalar>(
    bufs: &[DenseMatrix<T>],
    root: RankCoord,
    comm: &Communicator,
    ledger: &mut CostLedger,
) -> Result<DenseMatrix<T>> {
    let (out, cost) = reduce_raw(bufs, root, comm, Packing::Full)?;
    ledger.charge("reduce", cost);
    Ok(out)
}

/// Element-wise sum delivered to every member. Charges
/// `T_Allreduce(words, |comm|)`.
pub fn allreduce<T: Scalar>(
    bufs: &[DenseMatrix<T>],
    comm: &Communicator,
    ledger: &mut CostLedger,
) -> Result<Vec<DenseMatrix<T>>> {
    allreduce_packed(bufs, comm, Packing::Full, ledger)
}

/// [`allreduce`] with an explicit packing mode.
pub fn allreduce_packed<T: Scalar>(
    bufs: &[DenseMatrix<T>],
    comm: &Communicator,
    packing: Packing,
    ledger: &mut CostLedger,
) -> Result<Vec<DenseMatrix<T>>> {
    let (sum, cost) = allreduce_raw(bufs, comm, packing)?;
    ledger.charge("allreduce", cost);
    Ok(vec![sum; comm.size()])
}

/// Concatenation of all members' buffers in member order, as held by every
/// member. Charges `T_Allgather(total words, |comm|)`.
pub fn allgather<T: Scalar>(
    bufs: &[DenseMatrix<T>],
    comm: &Communicator,
    ledger: &mut CostLedger,
) -> Result<Vec<DenseMatrix<T>>> {
    let (out, cost) = allgather_raw(bufs, comm)?;
    ledger.charge("allgather", cost);
    Ok(out)
}

/// Pairwise exchange between `me = (x, y, z)` and its mirror `(y, x, z)`.
///
/// Returns `(new buffer at me, new buffer at partner)`. Diagonal ranks
/// exchange with themselves for free; off-diagonal pairs are charged
/// `T_Transpose(words, 2)`.
pub fn transpose_swap<T: Scalar>(
    me: RankCoord,
    mine: &DenseMatrix<T>,
    partner: RankCoord,
    theirs: &DenseMatrix<T>,
    ledger: &mut CostLedger,
) -> Result<(DenseMatrix<T>, DenseMatrix<T>)> {
    if partner != RankCoord::new(me.y, me.x, me.z) {
        return Err(Error::Collective(format!("{partner} is not the transpose partner of {me}")));
    }
    if me == partner {
        ledger.charge("transpose", CostVector::ZERO);
        return Ok((mine.clone(), mine.clone()));
    }
    if mine.shape() != theirs.shape() {
        return Err(Error::Collective(format!(
            "transpose partners hold {}x{} and {}x{}",
            mine.rows(),
            mine.cols(),
            theirs.rows(),
            theirs.cols()
        )));
    }
    ledger.charge("transpose", t_transpose(Packing::Full.words(mine), 2));
    Ok((theirs.clone(), mine.clone()))
}

/// Per-rank buffers of the whole grid, indexed by linear rank id.
pub type RankBuffers<T> = Vec<DenseMatrix<T>>;

fn gather_members<T: Scalar>(grid: &GridShape, comm: &Communicator, blocks: &[DenseMatrix<T>]) -> Vec<DenseMatrix<T>> {
    comm.members().iter().map(|r| blocks[grid.rank_id(*r)].clone()).collect()
}

fn check_rank_buffers<T>(grid: &GridShape, blocks: &[DenseMatrix<T>]) -> Result<()> {
    if blocks.len() != grid.p() {
        return Err(Error::Collective(format!(
            "{} rank buffers supplied for a grid of {} ranks",
            blocks.len(),
            grid.p()
        )));
    }
    Ok(())
}

/// Broadcast within every communicator of `kind` concurrently.
pub fn bcast_groups<T: Scalar>(
    grid: &GridShape,
    kind: CommKind,
    blocks: &[DenseMatrix<T>],
    root: impl Fn(&Communicator) -> RankCoord,
    packing: impl Fn(&Communicator) -> Packing,
    ledger: &mut CostLedger,
    label: &str,
) -> Result<RankBuffers<T>> {
    check_rank_buffers(grid, blocks)?;
    let mut out = blocks.to_vec();
    let mut costs = Vec::new();
    for comm in grid.communicators(kind)? {
        let r = root(&comm);
        let src = &blocks[grid.rank_id(r)];
        let (recv, cost) = bcast_raw(src, r, &comm, packing(&comm))?;
        for (m, b) in comm.members().iter().zip(recv) {
            out[grid.rank_id(*m)] = b;
        }
        costs.push(cost);
    }
    ledger.charge_concurrent(label, costs);
    Ok(out)
}

/// Reduction onto one root per communicator of `kind`, concurrently.
/// Non-root ranks receive a zero buffer.
pub fn reduce_groups<T: Scalar>(
    grid: &GridShape,
    kind: CommKind,
    blocks: &[DenseMatrix<T>],
    root: impl Fn(&Communicator) -> RankCoord,
    packing: impl Fn(&Communicator) -> Packing,
    ledger: &mut CostLedger,
    label: &str,
) -> Result<RankBuffers<T>> {
    check_rank_buffers(grid, blocks)?;
    let mut out: RankBuffers<T> = blocks.iter().map(|b| DenseMatrix::zeros(b.rows(), b.cols())).collect();
    let mut costs = Vec::new();
    for comm in grid.communicators(kind)? {
        let r = root(&comm);
        let (sum, cost) = reduce_raw(&gather_members(grid, &comm, blocks), r, &comm, packing(&comm))?;
        out[grid.rank_id(r)] = sum;
        costs.push(cost);
    }
    ledger.charge_concurrent(label, costs);
    Ok(out)
}

/// All-reduction within every communicator of `kind`, concurrently.
pub fn allreduce_groups<T: Scalar>(
    grid: &GridShape,
    kind: CommKind,
    blocks: &[DenseMatrix<T>],
    packing: impl Fn(&Communicator) -> Packing,
    ledger: &mut CostLedger,
    label: &str,
) -> Result<RankBuffers<T>> {
    check_rank_buffers(grid, blocks)?;
    let mut out = blocks.to_vec();
    let mut costs = Vec::new();
    for comm in grid.communicators(kind)? {
        let (sum, cost) = allreduce_raw(&gather_members(grid, &comm, blocks), &comm, packing(&comm))?;
        for m in comm.members() {
            out[grid.rank_id(*m)] = sum.clone();
        }
        costs.push(cost);
    }
    ledger.charge_concurrent(label, costs);
    Ok(out)
}

/// All-gather within every communicator of `kind`, concurrently. Returns
/// each communicator with the concatenation its members now hold.
pub fn allgather_groups<T: Scalar>(
    grid: &GridShape,
    kind: CommKind,
    blocks: &[DenseMatrix<T>],
    ledger: &mut CostLedger,
    label: &str,
) -> Result<Vec<(Communicator, Vec<DenseMatrix<T>>)>> {
    check_rank_buffers(grid, blocks)?;
    let mut out = Vec::new();
    let mut costs = Vec::new();
    for comm in grid.communicators(kind)? {
        let (gathered, cost) = allgather_raw(&gather_members(grid, &comm, blocks), &comm)?;
        costs.push(cost);
        out.push((comm, gathered));
    }
    ledger.charge_concurrent(label, costs);
    Ok(out)
}

/// Exchange `(x, y', z) <-> (y', x, z)` inside every square slice of the
/// subcubes, where `y'` is the rank's y-offset within its subcube.
///
/// Each slice is charged `T_Transpose(words, c^2)`; the maximum over slices
/// goes to the ledger.
pub fn transpose_groups<T: Scalar>(
    grid: &GridShape,
    blocks: &[DenseMatrix<T>],
    packing: Packing,
    ledger: &mut CostLedger,
    label: &str,
) -> Result<RankBuffers<T>> {
    check_rank_buffers(grid, blocks)?;
    let c = grid.c();
    let mut out = blocks.to_vec();
    let mut costs = Vec::new();
    for comm in grid.communicators(CommKind::SubcubeSlice)? {
        let y0 = comm.members()[0].y;
        for &r in comm.members() {
            let partner = RankCoord::new(r.y - y0, y0 + r.x, r.z);
            let (a, b) = (&blocks[grid.rank_id(r)], &blocks[grid.rank_id(partner)]);
            if a.shape() != b.shape() {
                return Err(Error::Collective(format!("transpose partners {r} and {partner} disagree on block shape")));
            }
            out[grid.rank_id(r)] = b.clone();
        }
        let words = packing.words(&blocks[grid.rank_id(comm.members()[0])]);
        costs.push(t_transpose(words, c * c));
    }
    ledger.charge_concurrent(label, costs);
    Ok(out)
}
