use cacqr::collectives::{allgather_groups, allreduce_groups, bcast_groups, reduce_groups, Packing};
use cacqr::cost::{t_allreduce, t_bcast};
use cacqr::linalg::DenseMatrix;
use cacqr::{build_grid, gather, scatter_cyclic, subcomm, CommKind, CostLedger, GridShape, Rational, RankCoord, SliceShape};
use proptest::prelude::*;

const KINDS: [CommKind; 9] = [
    CommKind::Row,
    CommKind::Column,
    CommKind::Depth,
    CommKind::Slice,
    CommKind::YContiguous,
    CommKind::YStrided,
    CommKind::Subcube,
    CommKind::SubcubeSlice,
    CommKind::World,
];

/// Group membership written directly from the coordinate definitions.
fn same_group(kind: CommKind, c: usize, a: RankCoord, b: RankCoord) -> bool {
    match kind {
        CommKind::Row => a.y == b.y && a.z == b.z,
        CommKind::Column => a.x == b.x && a.z == b.z,
        CommKind::Depth => a.x == b.x && a.y == b.y,
        CommKind::Slice => a.z == b.z,
        CommKind::YContiguous => a.x == b.x && a.z == b.z && a.y / c == b.y / c,
        CommKind::YStrided => a.x == b.x && a.z == b.z && a.y % c == b.y % c,
        CommKind::Subcube => a.y / c == b.y / c,
        CommKind::SubcubeSlice => a.z == b.z && a.y / c == b.y / c,
        CommKind::World => true,
    }
}

fn expected_size(kind: CommKind, g: &GridShape) -> usize {
    let (c, d) = (g.c(), g.d());
    match kind {
        CommKind::Row | CommKind::Depth | CommKind::YContiguous => c,
        CommKind::Column => d,
        CommKind::Slice => c * d,
        CommKind::YStrided => d / c,
        CommKind::Subcube => c * c * c,
        CommKind::SubcubeSlice => c * c,
        CommKind::World => c * c * d,
    }
}

fn grids() -> impl Strategy<Value = GridShape> {
    (0u32..3, 0u32..3).prop_map(|(i, j)| {
        let c = 1 << i;
        build_grid(c, c << j).unwrap()
    })
}

fn rank_blocks(g: &GridShape, rows: usize, cols: usize, seed: i64) -> Vec<DenseMatrix<f64>> {
    g.ranks()
        .map(|r| {
            let id = g.rank_id(r) as i64;
            DenseMatrix::from_fn(rows, cols, |i, j| ((id * 31 + seed + (i * 7 + j * 3) as i64) % 17 - 8) as f64)
        })
        .collect()
}

fn brute_sum(g: &GridShape, kind: CommKind, blocks: &[DenseMatrix<f64>], me: RankCoord) -> DenseMatrix<f64> {
    let mut s = DenseMatrix::zeros(blocks[0].rows(), blocks[0].cols());
    for r in g.ranks().filter(|&r| same_group(kind, g.c(), me, r)) {
        s.add_assign(&blocks[g.rank_id(r)]).unwrap();
    }
    s
}

proptest! {
    #[test]
    fn communicators_partition_the_grid(g in grids()) {
        for kind in KINDS {
            let comms = g.communicators(kind).unwrap();
            let mut seen = vec![0usize; g.p()];
            for comm in &comms {
                prop_assert_eq!(comm.size(), expected_size(kind, &g));
                let lead = comm.members()[0];
                for &m in comm.members() {
                    prop_assert!(same_group(kind, g.c(), lead, m));
                    seen[g.rank_id(m)] += 1;
                }
                let brute = g.ranks().filter(|&r| same_group(kind, g.c(), lead, r)).count();
                prop_assert_eq!(brute, comm.size());
            }
            prop_assert!(seen.iter().all(|&k| k == 1), "{:?} is not a partition", kind);
            for r in g.ranks() {
                let sc = subcomm(&g, r, kind).unwrap();
                prop_assert!(sc.contains(r));
                prop_assert!(comms.contains(&sc));
            }
        }
    }

    #[test]
    fn rank_id_round_trips(g in grids()) {
        for id in 0..g.p() {
            prop_assert_eq!(g.rank_id(g.coord(id)), id);
        }
    }

    #[test]
    fn allreduce_matches_brute_force(g in grids(), k in 0usize..9, rows in 1usize..4, cols in 1usize..4, seed in 0i64..100) {
        let kind = KINDS[k];
        let blocks = rank_blocks(&g, rows, cols, seed);
        let mut l = CostLedger::new();
        let out = allreduce_groups(&g, kind, &blocks, |_| Packing::Full, &mut l, "ar").unwrap();
        for r in g.ranks() {
            prop_assert_eq!(&out[g.rank_id(r)], &brute_sum(&g, kind, &blocks, r));
        }
        let words = Rational::from_integer((rows * cols) as i64);
        prop_assert_eq!(l.total(), t_allreduce(words, expected_size(kind, &g)).unwrap());
    }

    #[test]
    fn reduce_and_bcast_match_brute_force(g in grids(), k in 0usize..9, seed in 0i64..100) {
        let kind = KINDS[k];
        let blocks = rank_blocks(&g, 2, 3, seed);
        let root = |comm: &cacqr::Communicator| *comm.members().last().unwrap();
        let mut l = CostLedger::new();
        let red = reduce_groups(&g, kind, &blocks, root, |_| Packing::Full, &mut l, "r").unwrap();
        let bc = bcast_groups(&g, kind, &blocks, root, |_| Packing::Full, &mut l, "b").unwrap();
        for comm in g.communicators(kind).unwrap() {
            let rt = root(&comm);
            for &m in comm.members() {
                let got = &red[g.rank_id(m)];
                if m == rt {
                    prop_assert_eq!(got, &brute_sum(&g, kind, &blocks, m));
                } else {
                    prop_assert_eq!(got.max_abs(), 0.0);
                }
                prop_assert_eq!(&bc[g.rank_id(m)], &blocks[g.rank_id(rt)]);
            }
        }
        let bcast = t_bcast(Rational::from_integer(6), expected_size(kind, &g)).unwrap();
        prop_assert_eq!(l.sum_by_prefix("b"), bcast);
    }

    #[test]
    fn allgather_collects_in_member_order(g in grids(), k in 0usize..9) {
        let kind = KINDS[k];
        let blocks = rank_blocks(&g, 1, 2, 0);
        let out = allgather_groups(&g, kind, &blocks, &mut CostLedger::new(), "ag").unwrap();
        prop_assert_eq!(out.len(), g.p() / expected_size(kind, &g));
        for (comm, parts) in out {
            prop_assert_eq!(parts.len(), comm.size());
            for (m, part) in comm.members().iter().zip(&parts) {
                prop_assert_eq!(part, &blocks[g.rank_id(*m)]);
            }
        }
    }

    #[test]
    fn scatter_gather_round_trip(g in grids(), face in any::<bool>(), i in 1usize..5, j in 1usize..5, seed in 0i64..1000) {
        let s = if face { SliceShape::face(&g) } else { SliceShape::subcube(&g) };
        let a = DenseMatrix::from_fn(s.pr * i, s.pc * j, |r, c| (seed as f64 + r as f64).sin() * 1e3 + c as f64);
        let d = scatter_cyclic(&a, g, s).unwrap();
        prop_assert!(d.check_replication().is_ok());
        prop_assert_eq!(d.local_shape(), (i, j));
        prop_assert_eq!(gather(&d).unwrap(), a);
    }
}
