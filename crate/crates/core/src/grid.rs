//! Virtual `c x d x c` processor grid and its communicator subgroups.
//!
//! Ranks are addressed by coordinates `(x, y, z)` with `x, z in [0, c)` and
//! `y in [0, d)`. The linear rank id is `x + c * (y + d * z)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A validated `c x d x c` grid with `P = c^2 d` ranks and `d >= c >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridShape {
    c: usize,
    d: usize,
}

impl GridShape {
    pub fn new(c: usize, d: usize) -> Result<Self> {
        if c == 0 || d == 0 {
            return Err(Error::GridShape(format!("grid dimensions must be positive, got c={c}, d={d}")));
        }
        if d < c {
            return Err(Error::GridShape(format!("grid needs d >= c, got c={c}, d={d}")));
        }
        Ok(Self { c, d })
    }

    /// Cubic grid with `c = d`.
    pub fn cubic(c: usize) -> Result<Self> {
        Self::new(c, c)
    }

    /// One-dimensional `1 x p x 1` grid.
    pub fn linear(p: usize) -> Result<Self> {
        Self::new(1, p)
    }

    #[inline]
    pub fn c(&self) -> usize {
        self.c
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    /// Total number of ranks, `c^2 d`.
    #[inline]
    pub fn p(&self) -> usize {
        self.c * self.c * self.d
    }

    pub fn is_cubic(&self) -> bool {
        self.c == self.d
    }

    /// `c` divides `d`, so the grid splits into `d/c` subcubes.
    pub fn has_subcubes(&self) -> bool {
        self.d.is_multiple_of(self.c)
    }

    pub fn num_subcubes(&self) -> Result<usize> {
        self.require_subcubes()?;
        Ok(self.d / self.c)
    }

    pub fn require_subcubes(&self) -> Result<()> {
        if !self.has_subcubes() {
            return Err(Error::GridShape(format!(
                "c={} must divide d={} for subcube communicators",
                self.c, self.d
            )));
        }
        Ok(())
    }

    /// Both `c` and `d` are powers of two, so every communicator size is too.
    pub fn require_power_of_two(&self) -> Result<()> {
        if !self.c.is_power_of_two() || !self.d.is_power_of_two() {
            return Err(Error::GridShape(format!(
                "c={} and d={} must be powers of two",
                self.c, self.d
            )));
        }
        Ok(())
    }

    pub fn contains(&self, r: RankCoord) -> bool {
        r.x < self.c && r.y < self.d && r.z < self.c
    }

    pub fn rank_id(&self, r: RankCoord) -> usize {
        debug_assert!(self.contains(r));
        r.x + self.c * (r.y + self.d * r.z)
    }

    pub fn coord(&self, id: usize) -> RankCoord {
        debug_assert!(id < self.p());
        RankCoord {
            x: id % self.c,
            y: (id / self.c) % self.d,
            z: id / (self.c * self.d),
        }
    }

    /// All ranks in linear-id order.
    pub fn ranks(&self) -> impl Iterator<Item = RankCoord> + '_ {
        (0..self.p()).map(|id| self.coord(id))
    }

    /// Every communicator of `kind`, each exactly once, ordered by the
    /// linear id of its first member.
    pub fn communicators(&self, kind: CommKind) -> Result<Vec<Communicator>> {
        let mut seen = vec![false; self.p()];
        let mut out = Vec::new();
        for r in self.ranks() {
            if seen[self.rank_id(r)] {
                continue;
            }
            let comm = subcomm(self, r, kind)?;
            for m in comm.members() {
                seen[self.rank_id(*m)] = true;
            }
            out.push(comm);
        }
        Ok(out)
    }
}

impl fmt::Display for GridShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.c, self.d, self.c)
    }
}

/// Builds a `c x d x c` grid. Rejects `d < c` and zero dimensions.
pub fn build_grid(c: usize, d: usize) -> Result<GridShape> {
    GridShape::new(c, d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RankCoord {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl RankCoord {
    pub const fn new(x: usize, y: usize, z: usize) -> Self {
        Self { x, y, z }
    }
}

impl fmt::Display for RankCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.x, self.y, self.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CommKind {
    /// `[:, y, z]`, size `c`.
    Row,
    /// `[x, :, z]`, size `d`.
    Column,
    /// `[x, y, :]`, size `c`.
    Depth,
    /// `[:, :, z]`, size `c d`.
    Slice,
    /// `[x, c*floor(y/c) .. c*floor(y/c)+c-1, z]`, size `c`.
    YContiguous,
    /// `[x, (y mod c) : c : d-1, z]`, size `d/c`.
    YStrided,
    /// The `c x c x c` cube containing the rank, size `c^3`.
    Subcube,
    /// `[:, c*floor(y/c) .. c*floor(y/c)+c-1, z]`: the 2D slice of the
    /// rank's subcube, size `c^2`.
    SubcubeSlice,
    /// Every rank.
    World,
}

/// An ordered group of ranks.
///
/// Members are listed in ascending order of the varying coordinates, with
/// `x` varying fastest, then `y`, then `z`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Communicator {
    kind: CommKind,
    members: Vec<RankCoord>,
}

impl Communicator {
    pub fn kind(&self) -> CommKind {
        self.kind
    }

    pub fn members(&self) -> &[RankCoord] {
        &self.members
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    /// Position of `r` within the communicator, if it is a member.
    pub fn index_of(&self, r: RankCoord) -> Option<usize> {
        self.members.iter().position(|m| *m == r)
    }

    pub fn contains(&self, r: RankCoord) -> bool {
        self.index_of(r).is_some()
    }

    /// Ad-hoc communicator over an explicit member list; used for pairwise
    /// exchanges and tests.
    pub fn from_members(kind: CommKind, members: Vec<RankCoord>) -> Result<Self> {
        let mut sorted = members.clone();
        sorted.sort_by_key(|r| (r.z, r.y, r.x));
        sorted.dedup();
        if sorted.len() != members.len() {
            return Err(Error::Collective("communicator members must be distinct".into()));
        }
        Ok(Self { kind, members: sorted })
    }
}

/// The communicator of `kind` that contains `me`.
pub fn subcomm(grid: &GridShape, me: RankCoord, kind: CommKind) -> Result<Communicator> {
    if !grid.contains(me) {
        return Err(Error::GridShape(format!("rank {me} is outside grid {grid}")));
    }
    let (c, d) = (grid.c(), grid.d());
    let RankCoord { x, y, z } = me;
    let mut members = Vec::new();
    let mut push = |xs: &mut dyn Iterator<Item = usize>, ys: &[usize], zs: &[usize]| {
        let xs: Vec<usize> = xs.collect();
        for &zz in zs {
            for &yy in ys {
                for &xx in &xs {
                    members.push(RankCoord::new(xx, yy, zz));
                }
            }
        }
    };
    let all_x = || 0..c;
    let all_y: Vec<usize> = (0..d).collect();
    let all_z: Vec<usize> = (0..c).collect();
    let block_y = |y: usize| -> Vec<usize> {
        let y0 = c * (y / c);
        (y0..y0 + c).collect()
    };
    match kind {
        CommKind::Row => push(&mut all_x(), &[y], &[z]),
        CommKind::Column => push(&mut std::iter::once(x), &all_y, &[z]),
        CommKind::Depth => push(&mut std::iter::once(x), &[y], &all_z),
        CommKind::Slice => push(&mut all_x(), &all_y, &[z]),
        CommKind::World => push(&mut all_x(), &all_y, &all_z),
        CommKind::YContiguous | CommKind::YStrided | CommKind::Subcube | CommKind::SubcubeSlice => {
            grid.require_subcubes()?;
            match kind {
                CommKind::YContiguous => push(&mut std::iter::once(x), &block_y(y), &[z]),
                CommKind::YStrided => {
                    let ys: Vec<usize> = (y % c..d).step_by(c).collect();
                    push(&mut std::iter::once(x), &ys, &[z])
                }
                CommKind::Subcube => push(&mut all_x(), &block_y(y), &all_z),
                CommKind::SubcubeSlice => push(&mut all_x(), &block_y(y), &[z]),
                _ => unreachable!(),
            }
        }
    }
    Ok(Communicator { kind, members })
}
