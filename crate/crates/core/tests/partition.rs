use std::collections::BTreeSet;

use fmm_core::{
    build_let, build_tree, distributed_evaluate, fmm_evaluate, partition, simulate, Bodies, Domain,
    FmmConfig, FmmError, Precision, RankPartition, Tree,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn clustered(n: usize, seed: u64) -> Bodies {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let pos = (0..n)
        .map(|i| match i % 3 {
            0 => [r.gen(), r.gen(), r.gen()],
            1 => [
                0.3 + 0.1 * r.gen::<f64>(),
                0.6 + 0.1 * r.gen::<f64>(),
                0.2 * r.gen::<f64>(),
            ],
            _ => [0.9 * r.gen::<f64>(), 0.1 * r.gen::<f64>(), 0.8],
        })
        .collect();
    let q = (0..n).map(|_| 1.0 - 2.0 * r.gen::<f64>()).collect();
    Bodies::new(pos, q).unwrap()
}

#[test]
fn ranks_reproduce_serial_bitwise() {
    let b = clustered(20_000, 1);
    for precision in [Precision::Double, Precision::SingleNearField] {
        let cfg = FmmConfig::new(4).with_ncrit(32).with_precision(precision);
        let serial = fmm_evaluate(b.clone(), &cfg).unwrap();
        for nranks in [1, 2, 4, 8, 16] {
            let d = distributed_evaluate(b.clone(), &cfg, nranks).unwrap();
            assert_eq!(
                d.result.potential, serial.potential,
                "{precision:?} nranks {nranks}"
            );
            assert_eq!(
                d.result.force, serial.force,
                "{precision:?} nranks {nranks}"
            );
            assert_eq!(d.result.diagnostics.p2p_pairs, serial.diagnostics.p2p_pairs);
            assert_eq!(d.ranks.len(), nranks);
        }
    }
}

fn adjacent(a: [u32; 3], b: [u32; 3]) -> bool {
    (0..3).all(|k| a[k].abs_diff(b[k]) <= 1)
}

/// Recomputes every rank's manifest by scanning all cell pairs.
fn brute_force_manifest(
    tree: &Tree,
    part: &RankPartition,
    rank: usize,
) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let cells = tree.cells();
    let own = part.bodies(rank);
    let owners = |c: usize| -> BTreeSet<usize> {
        cells[c]
            .body_range()
            .map(|i| part.bodies_owner(i))
            .collect()
    };
    let relevant = |c: usize| cells[c].body_range().any(|i| own.contains(&i));
    let anchor = |c: usize| cells[c].key.anchor();
    let level = |c: usize| cells[c].level();

    let mut halo = Vec::new();
    for l in tree.leaf_range() {
        if part.leaves(rank).contains(&l) {
            continue;
        }
        if part.leaves(rank).any(|o| adjacent(anchor(o), anchor(l))) {
            halo.push((l, *owners(l).iter().next().unwrap()));
        }
    }

    let mut needed = BTreeSet::new();
    for c in 0..cells.len() {
        if !relevant(c) {
            continue;
        }
        if level(c) >= 2 {
            for d in 0..cells.len() {
                let pa = anchor(c).map(|x| x >> 1);
                let pd = anchor(d).map(|x| x >> 1);
                if level(d) == level(c) && !adjacent(anchor(c), anchor(d)) && adjacent(pa, pd) {
                    needed.insert(d);
                }
            }
        }
        if !cells[c].is_leaf && owners(c).len() > 1 {
            needed.extend(cells[c].children());
        }
    }
    loop {
        let mut grown = needed.clone();
        for &y in &needed {
            if !relevant(y) && owners(y).len() > 1 {
                grown.extend(cells[y].children());
            }
        }
        if grown == needed {
            break;
        }
        needed = grown;
    }
    let remote = needed
        .into_iter()
        .filter(|&y| !relevant(y))
        .filter_map(|y| {
            let o = owners(y);
            (o.len() == 1).then(|| (y, *o.iter().next().unwrap()))
        })
        .collect();
    (halo, remote)
}

trait BodyOwner {
    fn bodies_owner(&self, i: usize) -> usize;
}

impl BodyOwner for RankPartition {
    fn bodies_owner(&self, i: usize) -> usize {
        (0..self.nranks)
            .find(|&r| self.bodies(r).contains(&i))
            .unwrap()
    }
}

#[test]
fn manifests_match_exhaustive_scan() {
    for (seed, nranks) in [(2, 2), (3, 5), (4, 8)] {
        let tree = build_tree(
            clustered(2000, seed),
            &FmmConfig::new(3).with_ncrit(16),
            None,
        )
        .unwrap();
        let part = partition(&tree, nranks).unwrap();
        for r in 0..nranks {
            let m = build_let(&part, &tree, r, 3).unwrap();
            let (halo, remote) = brute_force_manifest(&tree, &part, r);
            assert_eq!(m.halo_leaves, halo, "halo of rank {r}/{nranks}");
            assert_eq!(
                m.remote_multipoles, remote,
                "multipoles of rank {r}/{nranks}"
            );
            let bodies: usize = halo.iter().map(|&(l, _)| tree.cell(l).body_count).sum();
            assert_eq!(m.bytes_p2p, bodies as u64 * 32);
            assert_eq!(m.bytes_m2l, remote.len() as u64 * (6 * 16 + 24));
        }
    }
}

#[test]
fn every_manifest_entry_is_needed() {
    let cfg = FmmConfig::new(3).with_ncrit(16);
    let tree = build_tree(clustered(3000, 5), &cfg, None).unwrap();
    let part = partition(&tree, 4).unwrap();
    let manifests: Vec<_> = (0..4)
        .map(|r| build_let(&part, &tree, r, 3).unwrap())
        .collect();
    assert!(simulate(&tree, &cfg, &part, &manifests).is_ok());

    let mut entries = Vec::new();
    for (r, m) in manifests.iter().enumerate() {
        entries.extend((0..m.halo_leaves.len()).map(|i| (r, true, i)));
        entries.extend((0..m.remote_multipoles.len()).map(|i| (r, false, i)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let picks: Vec<_> = entries.choose_multiple(&mut rng, 20).copied().collect();
    assert_eq!(picks.len(), 20);
    for (r, halo, i) in picks {
        let mut cut = manifests.clone();
        let removed = if halo {
            cut[r].halo_leaves.remove(i).0
        } else {
            cut[r].remote_multipoles.remove(i).0
        };
        match simulate(&tree, &cfg, &part, &cut) {
            Err(FmmError::MissingRemote { rank, cell }) => assert_eq!((rank, cell), (r, removed)),
            other => panic!(
                "removing cell {removed} from rank {r} gave {:?}",
                other.map(|_| ())
            ),
        }
    }
}

#[test]
fn halo_traffic_grows_with_rank_count() {
    let b = clustered(20_000, 7);
    let cfg = FmmConfig::new(3).with_ncrit(32);
    let mut last = 0;
    for nranks in [1, 2, 4, 8, 16] {
        let d = distributed_evaluate(b.clone(), &cfg, nranks).unwrap();
        assert!(
            d.comm.total_p2p >= last,
            "{nranks}: {} < {last}",
            d.comm.total_p2p
        );
        last = d.comm.total_p2p;
    }
    assert!(last > 0);
}

#[test]
fn rank_loads_stay_within_one_leaf_of_ideal() {
    for (seed, nranks) in [(8, 3), (9, 7), (10, 16), (11, 30)] {
        let b = clustered(10_000, seed);
        let n = b.len();
        let tree = build_tree(b, &FmmConfig::new(3).with_ncrit(20), None).unwrap();
        let part = partition(&tree, nranks).unwrap();
        let max_leaf = tree.leaves().iter().map(|c| c.body_count).max().unwrap();
        for r in 0..nranks {
            assert!(part.bodies(r).len() <= n.div_ceil(nranks) + max_leaf);
            assert!(!part.leaves(r).is_empty());
        }
        assert_eq!(part.body_bounds[nranks], n);
    }
}

#[test]
fn thousand_random_leaves_on_sixteen_ranks() {
    // Pick 1000 of the 4096 level-4 cells and fill each with 1..=60 bodies.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut slots: Vec<u32> = (0..4096).collect();
    slots.shuffle(&mut rng);
    let (mut pos, mut pops) = (Vec::new(), Vec::new());
    for &s in &slots[..1000] {
        let a = [s & 15, (s >> 4) & 15, s >> 8];
        let k = rng.gen_range(1..=60);
        pops.push(k);
        for _ in 0..k {
            pos.push(a.map(|x| (x as f64 + rng.gen_range(0.1..0.9)) / 16.0));
        }
    }
    let n = pos.len();
    let domain = Domain::new([0.0; 3], 1.0).unwrap();
    let bodies = Bodies::new(pos, vec![1.0; n]).unwrap();
    let tree = build_tree(bodies, &FmmConfig::new(3).with_max_level(4), Some(domain)).unwrap();
    assert_eq!(tree.leaf_range().len(), 1000);
    let part = partition(&tree, 16).unwrap();
    let worst = (0..16).map(|r| part.bodies(r).len()).max().unwrap();
    let bound = n.div_ceil(16) + *pops.iter().max().unwrap();
    assert!(worst <= bound, "{worst} > {bound}");
}

#[test]
fn symmetric_split_sends_equal_bytes() {
    // Mirror-symmetric in z, so the Morton midpoint cut is a symmetry plane.
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut pos = Vec::new();
    for _ in 0..2000 {
        let p: [f64; 3] = [rng.gen(), rng.gen(), rng.gen_range(0.0..0.5)];
        pos.push(p);
        pos.push([p[0], p[1], 1.0 - p[2]]);
    }
    let n = pos.len();
    let domain = Domain::new([0.0; 3], 1.0).unwrap();
    let cfg = FmmConfig::new(4).with_max_level(3);
    let tree = build_tree(Bodies::new(pos, vec![1.0; n]).unwrap(), &cfg, Some(domain)).unwrap();
    let part = partition(&tree, 2).unwrap();
    assert_eq!(part.bodies(0).len(), n / 2);
    let m: Vec<_> = (0..2)
        .map(|r| build_let(&part, &tree, r, 4).unwrap())
        .collect();
    assert_eq!(m[0].bytes_p2p, m[1].bytes_p2p);
    assert_eq!(m[0].bytes_m2l, m[1].bytes_m2l);
    assert!(m[0].bytes_m2l > 0);
}

#[test]
fn rank_errors_surface() {
    let b = clustered(100, 14);
    let cfg = FmmConfig::new(3).with_max_level(1);
    assert!(matches!(
        distributed_evaluate(b.clone(), &cfg, 0),
        Err(FmmError::InvalidConfig(_))
    ));
    assert!(matches!(
        distributed_evaluate(b, &cfg, 9),
        Err(FmmError::TooManyRanks { .. })
    ));
}
