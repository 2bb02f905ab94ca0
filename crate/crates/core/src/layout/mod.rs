//! Cyclic distribution of matrices over the grid.
//!
//! Within a slice of `pr x pc` ranks, global element `(i, j)` is owned by the
//! ranks with `x mod pc = j mod pc` and `y mod pr = i mod pr`, at local index
//! `(i / pr, j / pc)`. Blocks are replicated across depth (`z`) and, when
//! `pr < d` or `pc < c`, across the repeated slice positions as well. With
//! `(pr, pc) = (d, c)` a matrix spans the whole `d x c` face; with
//! `(pr, pc) = (c, c)` every subcube holds its own copy.

pub mod io;

use crate::collectives::{transpose_groups, Packing};
use crate::cost::CostLedger;
use crate::error::{Error, Result};
use crate::grid::{GridShape, RankCoord};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// Process counts `(pr, pc)` of the slice a matrix is cycled over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SliceShape {
    pub pr: usize,
    pub pc: usize,
}

impl SliceShape {
    pub const fn new(pr: usize, pc: usize) -> Self {
        Self { pr, pc }
    }

    /// The full `d x c` face of the grid.
    pub fn face(grid: &GridShape) -> Self {
        Self::new(grid.d(), grid.c())
    }

    /// The `c x c` face of a subcube.
    pub fn subcube(grid: &GridShape) -> Self {
        Self::new(grid.c(), grid.c())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrant {
    A11,
    A12,
    A21,
    A22,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Half {
    Left,
    Right,
}

/// A matrix cyclically partitioned over a slice and replicated over depth.
#[derive(Debug, Clone, PartialEq)]
pub struct DistMatrix<T> {
    rows: usize,
    cols: usize,
    grid: GridShape,
    slice: SliceShape,
    blocks: Vec<DenseMatrix<T>>,
}

impl<T: Scalar> DistMatrix<T> {
    fn validate_shape(rows: usize, cols: usize, grid: &GridShape, slice: SliceShape) -> Result<()> {
        if slice.pr == 0 || slice.pc == 0 || !grid.d().is_multiple_of(slice.pr) || !grid.c().is_multiple_of(slice.pc) {
            return Err(Error::GridShape(format!(
                "slice {}x{} does not tile grid {grid}",
                slice.pr, slice.pc
            )));
        }
        if !rows.is_multiple_of(slice.pr) || !cols.is_multiple_of(slice.pc) {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix is not divisible by slice {}x{}",
                slice.pr, slice.pc
            )));
        }
        Ok(())
    }

    /// Assembles a distributed matrix from per-rank blocks (indexed by
    /// linear rank id). Block shapes are checked; replication is not.
    pub fn from_blocks(
        rows: usize,
        cols: usize,
        grid: GridShape,
        slice: SliceShape,
        blocks: Vec<DenseMatrix<T>>,
    ) -> Result<Self> {
        Self::validate_shape(rows, cols, &grid, slice)?;
        if blocks.len() != grid.p() {
            return Err(Error::Dimension(format!("{} blocks for {} ranks", blocks.len(), grid.p())));
        }
        let want = (rows / slice.pr, cols / slice.pc);
        if let Some(b) = blocks.iter().find(|b| b.shape() != want) {
            return Err(Error::Dimension(format!(
                "local block is {}x{}, expected {}x{}",
                b.rows(),
                b.cols(),
                want.0,
                want.1
            )));
        }
        Ok(Self {
            rows,
            cols,
            grid,
            slice,
            blocks,
        })
    }

    pub fn zeros(rows: usize, cols: usize, grid: GridShape, slice: SliceShape) -> Result<Self> {
        Self::validate_shape(rows, cols, &grid, slice)?;
        let blocks = vec![DenseMatrix::zeros(rows / slice.pr, cols / slice.pc); grid.p()];
        Ok(Self {
            rows,
            cols,
            grid,
            slice,
            blocks,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn grid(&self) -> &GridShape {
        &self.grid
    }

    pub fn slice(&self) -> SliceShape {
        self.slice
    }

    pub fn local_shape(&self) -> (usize, usize) {
        (self.rows / self.slice.pr, self.cols / self.slice.pc)
    }

    pub fn block(&self, r: RankCoord) -> &DenseMatrix<T> {
        &self.blocks[self.grid.rank_id(r)]
    }

    pub fn block_mut(&mut self, r: RankCoord) -> &mut DenseMatrix<T> {
        let id = self.grid.rank_id(r);
        &mut self.blocks[id]
    }

    pub fn blocks(&self) -> &[DenseMatrix<T>] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<DenseMatrix<T>> {
        self.blocks
    }

    /// Same distribution, new blocks.
    pub fn with_blocks(&self, blocks: Vec<DenseMatrix<T>>) -> Result<Self> {
        Self::from_blocks(self.rows, self.cols, self.grid, self.slice, blocks)
    }

    /// Applies a local operation to every block.
    pub fn map_blocks(&self, f: impl Fn(&DenseMatrix<T>) -> DenseMatrix<T>) -> Result<Self> {
        self.with_blocks(self.blocks.iter().map(f).collect())
    }

    /// Global row/column residues owned by rank `r`.
    pub fn residues(&self, r: RankCoord) -> (usize, usize) {
        (r.y % self.slice.pr, r.x % self.slice.pc)
    }

    /// Checks that every replica of every block is bitwise identical.
    pub fn check_replication(&self) -> Result<()> {
        for r in self.grid.ranks() {
            let (py, px) = self.residues(r);
            let canon = self.grid.rank_id(RankCoord::new(px, py, 0));
            if self.blocks[self.grid.rank_id(r)].as_slice() != self.blocks[canon].as_slice() {
                return Err(Error::Consistency(format!(
                    "rank {r} disagrees with its replica at ({px},{py},0)"
                )));
            }
        }
        Ok(())
    }
}

/// The elements of `a` with row residue `py` and column residue `px`.
pub fn cyclic_block<T: Scalar>(a: &DenseMatrix<T>, py: usize, px: usize, slice: SliceShape) -> DenseMatrix<T> {
    DenseMatrix::from_fn(a.rows() / slice.pr, a.cols() / slice.pc, |i, j| {
        a[(py + i * slice.pr, px + j * slice.pc)]
    })
}

/// Distributes `a` cyclically over `slice` and replicates the blocks.
pub fn scatter_cyclic<T: Scalar>(a: &DenseMatrix<T>, grid: GridShape, slice: SliceShape) -> Result<DistMatrix<T>> {
    let (rows, cols) = a.shape();
    DistMatrix::<T>::validate_shape(rows, cols, &grid, slice)?;
    let blocks = grid
        .ranks()
        .map(|r| cyclic_block(a, r.y % slice.pr, r.x % slice.pc, slice))
        .collect();
    DistMatrix::from_blocks(rows, cols, grid, slice, blocks)
}

/// Reassembles the global matrix, after verifying the replication invariant.
pub fn gather<T: Scalar>(a: &DistMatrix<T>) -> Result<DenseMatrix<T>> {
    a.check_replication()?;
    let s = a.slice;
    let mut out = DenseMatrix::zeros(a.rows, a.cols);
    for py in 0..s.pr {
        for px in 0..s.pc {
            let b = a.block(RankCoord::new(px, py, 0));
            for i in 0..b.rows() {
                for j in 0..b.cols() {
                    out[(py + i * s.pr, px + j * s.pc)] = b[(i, j)];
                }
            }
        }
    }
    Ok(out)
}

/// A quadrant of the global matrix as a distributed matrix over the same
/// slice, taken from each rank's own block without communication.
pub fn subview<T: Scalar>(a: &DistMatrix<T>, q: Quadrant) -> Result<DistMatrix<T>> {
    if !a.rows.is_multiple_of(2) || !a.cols.is_multiple_of(2) {
        return Err(Error::Dimension(format!("cannot split odd {}x{} matrix into quadrants", a.rows, a.cols)));
    }
    let (hr, hc) = (a.rows / 2, a.cols / 2);
    if hr % a.slice.pr != 0 || hc % a.slice.pc != 0 {
        return Err(Error::Dimension(format!(
            "quadrants of {}x{} do not align with slice {}x{}",
            a.rows, a.cols, a.slice.pr, a.slice.pc
        )));
    }
    let (lr, lc) = (hr / a.slice.pr, hc / a.slice.pc);
    let (r0, c0) = match q {
        Quadrant::A11 => (0, 0),
        Quadrant::A12 => (0, lc),
        Quadrant::A21 => (lr, 0),
        Quadrant::A22 => (lr, lc),
    };
    let blocks = a.blocks.iter().map(|b| b.submatrix(r0, c0, lr, lc)).collect();
    DistMatrix::from_blocks(hr, hc, a.grid, a.slice, blocks)
}

/// Left or right column half, taken locally.
pub fn column_half<T: Scalar>(a: &DistMatrix<T>, h: Half) -> Result<DistMatrix<T>> {
    if !a.cols.is_multiple_of(2) || !(a.cols / 2).is_multiple_of(a.slice.pc) {
        return Err(Error::Dimension(format!(
            "cannot split {} columns in halves over {} process columns",
            a.cols, a.slice.pc
        )));
    }
    let hc = a.cols / 2;
    let (lr, lc) = (a.rows / a.slice.pr, hc / a.slice.pc);
    let c0 = if h == Half::Left { 0 } else { lc };
    let blocks = a.blocks.iter().map(|b| b.submatrix(0, c0, lr, lc)).collect();
    DistMatrix::from_blocks(a.rows, hc, a.grid, a.slice, blocks)
}

/// Inverse of [`subview`]: stitches four quadrants back together locally.
/// A missing quadrant is taken as zero.
pub fn assemble_quadrants<T: Scalar>(
    a11: &DistMatrix<T>,
    a12: Option<&DistMatrix<T>>,
    a21: &DistMatrix<T>,
    a22: &DistMatrix<T>,
) -> Result<DistMatrix<T>> {
    let parts = [Some(a11), a12, Some(a21), Some(a22)];
    for p in parts.iter().flatten() {
        if p.shape() != a11.shape() || p.slice != a11.slice || p.grid != a11.grid {
            return Err(Error::Dimension("quadrants disagree in shape or distribution".into()));
        }
    }
    let (lr, lc) = a11.local_shape();
    let blocks = (0..a11.grid.p())
        .map(|id| {
            let mut b = DenseMatrix::zeros(2 * lr, 2 * lc);
            b.set_submatrix(0, 0, &a11.blocks[id]);
            if let Some(a12) = a12 {
                b.set_submatrix(0, lc, &a12.blocks[id]);
            }
            b.set_submatrix(lr, 0, &a21.blocks[id]);
            b.set_submatrix(lr, lc, &a22.blocks[id]);
            b
        })
        .collect();
    DistMatrix::from_blocks(2 * a11.rows, 2 * a11.cols, a11.grid, a11.slice, blocks)
}

/// Inverse of [`column_half`].
pub fn assemble_columns<T: Scalar>(left: &DistMatrix<T>, right: &DistMatrix<T>) -> Result<DistMatrix<T>> {
    if left.shape() != right.shape() || left.slice != right.slice || left.grid != right.grid {
        return Err(Error::Dimension("column halves disagree in shape or distribution".into()));
    }
    let (lr, lc) = left.local_shape();
    let blocks = (0..left.grid.p())
        .map(|id| {
            let mut b = DenseMatrix::zeros(lr, 2 * lc);
            b.set_submatrix(0, 0, &left.blocks[id]);
            b.set_submatrix(0, lc, &right.blocks[id]);
            b
        })
        .collect();
    DistMatrix::from_blocks(left.rows, 2 * left.cols, left.grid, left.slice, blocks)
}

/// Distributed transpose of a square matrix on the `c x c` subcube slices:
/// pairwise exchange `(x, y) <-> (y, x)` followed by a local transpose.
pub fn local_transpose_exchange<T: Scalar>(a: &DistMatrix<T>, ledger: &mut CostLedger) -> Result<DistMatrix<T>> {
    transpose_dist(a, Packing::Full, ledger, "transpose")
}

/// [`local_transpose_exchange`] with an explicit word-count mode.
pub fn transpose_dist<T: Scalar>(
    a: &DistMatrix<T>,
    packing: Packing,
    ledger: &mut CostLedger,
    label: &str,
) -> Result<DistMatrix<T>> {
    if a.slice != SliceShape::subcube(&a.grid) {
        return Err(Error::GridShape(format!(
            "distributed transpose needs the square {}x{} subcube slice, got {}x{}",
            a.grid.c(),
            a.grid.c(),
            a.slice.pr,
            a.slice.pc
        )));
    }
    if a.rows != a.cols {
        return Err(Error::Dimension(format!("transpose of non-square {}x{} matrix", a.rows, a.cols)));
    }
    let swapped = transpose_groups(&a.grid, &a.blocks, packing, ledger, label)?;
    a.with_blocks(swapped.iter().map(|b| b.transpose()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostVector;
    use crate::grid::build_grid;
    use crate::Rational;

    fn distinct(rows: usize, cols: usize) -> DenseMatrix<f64> {
        DenseMatrix::from_fn(rows, cols, |i, j| (i * cols + j) as f64 + 0.5)
    }

    #[test]
    fn scatter_ownership() {
        let g = build_grid(2, 2).unwrap();
        let a = distinct(4, 4);
        let d = scatter_cyclic(&a, g, SliceShape::new(2, 2)).unwrap();
        let b = d.block(RankCoord::new(0, 0, 1));
        assert_eq!(b, &DenseMatrix::from_rows(&[&[a[(0, 0)], a[(0, 2)]], &[a[(2, 0)], a[(2, 2)]]]));
        let b = d.block(RankCoord::new(1, 0, 0));
        assert_eq!(b[(1, 1)], a[(2, 3)]);
    }

    #[test]
    fn trivial_slice_and_round_trip() {
        let g = build_grid(1, 1).unwrap();
        let a = distinct(3, 2);
        let d = scatter_cyclic(&a, g, SliceShape::new(1, 1)).unwrap();
        assert_eq!(d.block(RankCoord::new(0, 0, 0)), &a);

        let g = build_grid(2, 4).unwrap();
        let a = distinct(8, 4);
        let d = scatter_cyclic(&a, g, SliceShape::new(4, 2)).unwrap();
        assert_eq!(gather(&d).unwrap(), a);
        let z = DistMatrix::<f64>::zeros(8, 4, g, SliceShape::new(4, 2)).unwrap();
        assert_eq!(gather(&z).unwrap(), DenseMatrix::zeros(8, 4));
    }

    #[test]
    fn divisibility_errors() {
        let g = build_grid(2, 4).unwrap();
        assert!(scatter_cyclic(&distinct(6, 4), g, SliceShape::new(4, 2)).is_err());
        assert!(scatter_cyclic(&distinct(8, 4), g, SliceShape::new(3, 2)).is_err());
    }

    #[test]
    fn corrupted_replica_detected() {
        let g = build_grid(2, 2).unwrap();
        let mut d = scatter_cyclic(&distinct(4, 4), g, SliceShape::new(2, 2)).unwrap();
        d.block_mut(RankCoord::new(1, 0, 1))[(0, 0)] += 1.0;
        assert!(matches!(gather(&d), Err(Error::Consistency(_))));
    }

    #[test]
    fn quadrant_examples() {
        let g = build_grid(2, 2).unwrap();
        let a = distinct(4, 4);
        let d = scatter_cyclic(&a, g, SliceShape::new(2, 2)).unwrap();
        let q = subview(&d, Quadrant::A11).unwrap();
        assert_eq!(q.local_shape(), (1, 1));
        assert_eq!(q.block(RankCoord::new(1, 1, 0))[(0, 0)], a[(1, 1)]);

        let diag = DenseMatrix::diag(&[1.0, 2.0, 3.0, 4.0]);
        let d = scatter_cyclic(&diag, g, SliceShape::new(2, 2)).unwrap();
        assert_eq!(gather(&subview(&d, Quadrant::A22).unwrap()).unwrap(), DenseMatrix::diag(&[3.0, 4.0]));

        let odd = scatter_cyclic(&distinct(2, 2), build_grid(1, 1).unwrap(), SliceShape::new(1, 1)).unwrap();
        let odd = subview(&odd, Quadrant::A11).unwrap();
        assert!(subview(&odd, Quadrant::A11).is_err());
    }

    #[test]
    fn quadrants_reassemble() {
        let g = build_grid(2, 4).unwrap();
        let a = distinct(8, 8);
        let d = scatter_cyclic(&a, g, SliceShape::new(2, 2)).unwrap();
        let q: Vec<_> = [Quadrant::A11, Quadrant::A12, Quadrant::A21, Quadrant::A22]
            .iter()
            .map(|&q| subview(&d, q).unwrap())
            .collect();
        assert_eq!(assemble_quadrants(&q[0], Some(&q[1]), &q[2], &q[3]).unwrap(), d);
        let l = column_half(&d, Half::Left).unwrap();
        let r = column_half(&d, Half::Right).unwrap();
        assert_eq!(gather(&l).unwrap(), a.submatrix(0, 0, 8, 4));
        assert_eq!(assemble_columns(&l, &r).unwrap(), d);
    }

    #[test]
    fn transpose_exchange() {
        let g = build_grid(2, 2).unwrap();
        let s = DenseMatrix::from_fn(4, 4, |i, j| (i + j) as f64);
        let d = scatter_cyclic(&s, g, SliceShape::new(2, 2)).unwrap();
        let mut l = CostLedger::new();
        assert_eq!(local_transpose_exchange(&d, &mut l).unwrap(), d);
        // One message of one 2x2 block per off-diagonal rank.
        assert_eq!(l.total(), CostVector::new(Rational::ONE, Rational::from_integer(4), Rational::ZERO));

        let a = distinct(8, 8);
        let d = scatter_cyclic(&a, g, SliceShape::new(2, 2)).unwrap();
        let t = local_transpose_exchange(&d, &mut l).unwrap();
        assert_eq!(gather(&t).unwrap(), a.transpose());

        let g1 = build_grid(1, 1).unwrap();
        let d1 = scatter_cyclic(&a, g1, SliceShape::new(1, 1)).unwrap();
        let mut l = CostLedger::new();
        local_transpose_exchange(&d1, &mut l).unwrap();
        assert_eq!(l.total(), CostVector::ZERO);

        let rect = scatter_cyclic(&distinct(8, 4), build_grid(2, 4).unwrap(), SliceShape::new(4, 2)).unwrap();
        assert!(local_transpose_exchange(&rect, &mut l).is_err());
    }
}
