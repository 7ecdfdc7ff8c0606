//! In-process simulation of a distributed FMM run.
//!
//! The Morton-sorted leaves are cut into contiguous spans, one per rank.
//! Every rank knows the whole tree topology but holds only its own bodies.
//! Before the far field can be evaluated a rank needs two kinds of remote
//! data, its local essential tree:
//!
//! * bodies of remote leaves adjacent to its own leaves (near field, "P2P");
//! * multipoles of remote cells in the interaction lists of the cells it
//!   works on ("M2L").
//!
//! A cell whose bodies all belong to one rank is *owned* by that rank. Cells
//! near the root usually straddle several ranks; every rank that needs such
//! a shared cell assembles it itself from child multipoles, so only owned
//! cells ever travel. The exchange is a timed copy between rank stores.
//!
//! Ranks run the same per-cell routines as the serial evaluator in the same
//! order, so merged results are bitwise identical to a single-rank run.

use std::cmp::Reverse;
use std::ops::Range;

use num_complex::Complex64;

use crate::bodies::Bodies;
use crate::config::{FmmConfig, Precision};
use crate::error::{FmmError, Result};
use crate::evaluator::{
    l2l_cell, l2p_cell, m2l_cell, m2m_cell, p2m_cell, p2p_cell_double, p2p_cell_single, unsort,
    CoeffStore, Diagnostics, FmmResult, Lists, M2lTable, SingleBuffers,
};
use crate::harmonics::coeff_count;
use crate::kernels::expansion::Scratch;
use crate::timing::{Phase, TimingBreakdown};
use crate::tree::{build_tree, Tree};

/// Bytes per body record: position and charge.
pub const BODY_RECORD_BYTES: u64 = 4 * 8;

/// Bytes per multipole record of the given order: coefficients and center.
pub fn multipole_record_bytes(order: usize) -> u64 {
    coeff_count(order) as u64 * 16 + 3 * 8
}

/// What the greedy split equalises.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Balance {
    #[default]
    Bodies,
    Leaves,
}

/// Contiguous spans of Morton-ordered leaves, one per rank.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankPartition {
    pub nranks: usize,
    /// Rank `r` owns leaf cells `leaf_bounds[r]..leaf_bounds[r + 1]`.
    pub leaf_bounds: Vec<usize>,
    /// ...and sorted bodies `body_bounds[r]..body_bounds[r + 1]`.
    pub body_bounds: Vec<usize>,
}

impl RankPartition {
    pub fn leaves(&self, rank: usize) -> Range<usize> {
        self.leaf_bounds[rank]..self.leaf_bounds[rank + 1]
    }

    pub fn bodies(&self, rank: usize) -> Range<usize> {
        self.body_bounds[rank]..self.body_bounds[rank + 1]
    }

    pub fn owner_of_leaf(&self, leaf: usize) -> usize {
        self.leaf_bounds.partition_point(|&b| b <= leaf) - 1
    }

    pub fn owner_of_body(&self, body: usize) -> usize {
        self.body_bounds.partition_point(|&b| b <= body) - 1
    }

    /// Whether any body of `cell` belongs to `rank`.
    pub fn is_relevant(&self, tree: &Tree, cell: usize, rank: usize) -> bool {
        let r = tree.cell(cell).body_range();
        let own = self.bodies(rank);
        r.start < own.end && own.start < r.end
    }

    /// The rank holding every body of `cell`, if there is one.
    pub fn full_owner(&self, tree: &Tree, cell: usize) -> Option<usize> {
        let r = tree.cell(cell).body_range();
        let first = self.owner_of_body(r.start);
        (self.owner_of_body(r.end - 1) == first).then_some(first)
    }
}

/// Body-balanced split; see [`partition_with`].
pub fn partition(tree: &Tree, nranks: usize) -> Result<RankPartition> {
    partition_with(tree, nranks, Balance::Bodies)
}

/// Greedy contiguous split of the leaves: boundary `k` is put at the leaf
/// boundary whose prefix weight is nearest to `k / nranks` of the total,
/// keeping at least one leaf per rank.
pub fn partition_with(tree: &Tree, nranks: usize, balance: Balance) -> Result<RankPartition> {
    let leaves = tree.leaf_range();
    let nleaves = leaves.len();
    if nranks == 0 {
        return Err(FmmError::InvalidConfig("rank count must be >= 1".into()));
    }
    if nranks > nleaves {
        return Err(FmmError::TooManyRanks {
            ranks: nranks,
            leaves: nleaves,
        });
    }
    let mut prefix = Vec::with_capacity(nleaves + 1);
    prefix.push(0u64);
    for c in tree.leaves() {
        let w = match balance {
            Balance::Bodies => c.body_count as u64,
            Balance::Leaves => 1,
        };
        prefix.push(prefix.last().unwrap() + w);
    }
    let total = prefix[nleaves] as f64;
    let mut cuts = vec![0usize];
    for k in 1..nranks {
        let target = total * k as f64 / nranks as f64;
        let lo = cuts[k - 1] + 1;
        let hi = nleaves - (nranks - k);
        let above = prefix
            .partition_point(|&p| (p as f64) < target)
            .clamp(lo, hi);
        let below = (above - 1).max(lo);
        let pick = if (target - prefix[below] as f64).abs() <= (prefix[above] as f64 - target).abs()
        {
            below
        } else {
            above
        };
        cuts.push(pick);
    }
    cuts.push(nleaves);
    let body_bounds = cuts
        .iter()
        .map(|&i| {
            if i == nleaves {
                tree.bodies().len()
            } else {
                tree.cell(leaves.start + i).body_start
            }
        })
        .collect();
    Ok(RankPartition {
        nranks,
        leaf_bounds: cuts.iter().map(|&i| leaves.start + i).collect(),
        body_bounds,
    })
}

/// Remote data one rank must receive.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LetManifest {
    pub rank: usize,
    /// `(leaf, owner)`: remote leaves adjacent to an owned leaf, ascending.
    pub halo_leaves: Vec<(usize, usize)>,
    /// `(cell, owner)`: remote owned cells whose multipoles are needed, ascending.
    pub remote_multipoles: Vec<(usize, usize)>,
    pub halo_bodies: u64,
    pub bytes_p2p: u64,
    pub bytes_m2l: u64,
}

/// Work lists of one rank, derived from the tree and the partition.
struct RankPlan {
    /// Owned non-leaf cells, deepest level first.
    local_upward: Vec<usize>,
    /// Shared cells built after the exchange, deepest level first.
    assembled: Vec<usize>,
    /// Cells at level >= 2 with at least one owned body, ascending.
    far_targets: Vec<usize>,
}

fn level_slice_overlapping(tree: &Tree, level: u32, bodies: &Range<usize>) -> Range<usize> {
    let r = tree.level_range(level);
    let cells = &tree.cells()[r.clone()];
    let a = cells.partition_point(|c| c.body_start + c.body_count <= bodies.start);
    let b = cells.partition_point(|c| c.body_start < bodies.end);
    r.start + a..r.start + b.max(a)
}

fn plan(
    tree: &Tree,
    part: &RankPartition,
    rank: usize,
) -> (RankPlan, Vec<(usize, usize)>, Vec<(usize, usize)>) {
    let own = part.bodies(rank);
    let mut relevant = Vec::new();
    for level in 0..=tree.max_level() {
        relevant.extend(level_slice_overlapping(tree, level, &own));
    }
    let mut needed = vec![false; tree.len()];
    let mut stack = Vec::new();
    let mut push = |c: usize, stack: &mut Vec<usize>| {
        if !needed[c] {
            needed[c] = true;
            stack.push(c);
        }
    };
    let mut lists = Lists::default();
    let mut local_upward = Vec::new();
    let mut assembled = Vec::new();
    let mut far_targets = Vec::new();
    for &c in &relevant {
        let cell = tree.cell(c);
        if cell.level() >= 2 {
            far_targets.push(c);
            tree.interactions_into(c, &mut lists.il, &mut lists.nb)
                .expect("level >= 2");
            for &s in &lists.il {
                push(s, &mut stack);
            }
        }
        if cell.is_leaf {
            continue;
        }
        if part.full_owner(tree, c) == Some(rank) {
            local_upward.push(c);
        } else {
            assembled.push(c);
            for ch in cell.children() {
                push(ch, &mut stack);
            }
        }
    }
    let mut remote = Vec::new();
    while let Some(y) = stack.pop() {
        if part.is_relevant(tree, y, rank) {
            continue;
        }
        match part.full_owner(tree, y) {
            Some(s) => remote.push((y, s)),
            None => {
                assembled.push(y);
                for ch in tree.cell(y).children() {
                    push(ch, &mut stack);
                }
            }
        }
    }
    remote.sort_unstable();
    let deepest_first =
        |v: &mut Vec<usize>| v.sort_unstable_by_key(|&c| (Reverse(tree.cell(c).level()), c));
    deepest_first(&mut local_upward);
    deepest_first(&mut assembled);

    let mut halo = Vec::new();
    let leaves = part.leaves(rank);
    for l in leaves.clone() {
        tree.neighbors_into(l, &mut lists.nb);
        halo.extend(
            lists
                .nb
                .iter()
                .filter(|nb| !leaves.contains(nb))
                .map(|&nb| (nb, part.owner_of_leaf(nb))),
        );
    }
    halo.sort_unstable();
    halo.dedup();
    (
        RankPlan {
            local_upward,
            assembled,
            far_targets,
        },
        halo,
        remote,
    )
}

fn manifest_from(
    tree: &Tree,
    rank: usize,
    order: usize,
    halo: Vec<(usize, usize)>,
    remote: Vec<(usize, usize)>,
) -> LetManifest {
    let halo_bodies: u64 = halo
        .iter()
        .map(|&(l, _)| tree.cell(l).body_count as u64)
        .sum();
    LetManifest {
        rank,
        bytes_p2p: halo_bodies * BODY_RECORD_BYTES,
        bytes_m2l: remote.len() as u64 * multipole_record_bytes(order),
        halo_bodies,
        halo_leaves: halo,
        remote_multipoles: remote,
    }
}

/// Remote data `rank` needs for an expansion order `order`.
pub fn build_let(
    part: &RankPartition,
    tree: &Tree,
    rank: usize,
    order: usize,
) -> Result<LetManifest> {
    if rank >= part.nranks {
        return Err(FmmError::InvalidConfig(format!(
            "rank {rank} out of {}",
            part.nranks
        )));
    }
    let (_, halo, remote) = plan(tree, part, rank);
    Ok(manifest_from(tree, rank, order, halo, remote))
}

/// Traffic received by one rank.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CommStats {
    pub rank: usize,
    pub halo_leaves: usize,
    pub halo_bodies: u64,
    pub remote_multipoles: usize,
    pub bytes_p2p: u64,
    pub bytes_m2l: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CommSummary {
    pub per_rank: Vec<CommStats>,
    pub total_p2p: u64,
    pub total_m2l: u64,
    /// Max over mean of per-rank bytes; 1 for perfect balance, 0 when idle.
    pub imbalance_p2p: f64,
    pub imbalance_m2l: f64,
}

fn imbalance(v: impl Iterator<Item = u64> + Clone) -> f64 {
    let n = v.clone().count();
    let total: u64 = v.clone().sum();
    if n == 0 || total == 0 {
        return 0.0;
    }
    v.max().unwrap() as f64 / (total as f64 / n as f64)
}

pub fn comm_stats(manifests: &[LetManifest]) -> CommSummary {
    let per_rank: Vec<CommStats> = manifests
        .iter()
        .map(|m| CommStats {
            rank: m.rank,
            halo_leaves: m.halo_leaves.len(),
            halo_bodies: m.halo_bodies,
            remote_multipoles: m.remote_multipoles.len(),
            bytes_p2p: m.bytes_p2p,
            bytes_m2l: m.bytes_m2l,
        })
        .collect();
    CommSummary {
        total_p2p: per_rank.iter().map(|s| s.bytes_p2p).sum(),
        total_m2l: per_rank.iter().map(|s| s.bytes_m2l).sum(),
        imbalance_p2p: imbalance(per_rank.iter().map(|s| s.bytes_p2p)),
        imbalance_m2l: imbalance(per_rank.iter().map(|s| s.bytes_m2l)),
        per_rank,
    }
}

/// Per-rank outcome of a simulated run.
#[derive(Clone, Debug)]
pub struct RankReport {
    pub rank: usize,
    pub bodies: usize,
    pub leaves: usize,
    pub timing: TimingBreakdown,
    pub stats: CommStats,
    pub p2p_pairs: u64,
    pub m2l_pairs: u64,
}

#[derive(Clone, Debug)]
pub struct DistributedResult {
    /// Merged output. Phase times are the maximum over ranks; `m2l_pairs`
    /// counts work done, including shared cells handled by several ranks.
    pub result: FmmResult,
    pub ranks: Vec<RankReport>,
    pub comm: CommSummary,
    pub partition: RankPartition,
}

/// Everything one simulated rank holds. Arrays are indexed globally; the
/// `*_held` masks say which entries the rank actually has.
struct RankStore {
    positions: Vec<[f64; 3]>,
    charges: Vec<f64>,
    leaf_held: Vec<bool>,
    multipole: Vec<Complex64>,
    multipole_held: Vec<bool>,
    local: Vec<Complex64>,
    potential: Vec<f64>,
    force: Vec<[f64; 3]>,
}

/// Mutable `v[a]` and shared `v[b]`, `a != b`.
fn pair_mut<T>(v: &mut [T], a: usize, b: usize) -> (&mut T, &T) {
    assert_ne!(a, b);
    if a < b {
        let (x, y) = v.split_at_mut(b);
        (&mut x[a], &y[0])
    } else {
        let (x, y) = v.split_at_mut(a);
        (&mut y[0], &x[b])
    }
}

/// Builds the tree, partitions it and simulates `nranks` ranks.
pub fn distributed_evaluate(
    bodies: Bodies,
    config: &FmmConfig,
    nranks: usize,
) -> Result<DistributedResult> {
    distributed_evaluate_with(bodies, config, nranks, Balance::Bodies)
}

pub fn distributed_evaluate_with(
    bodies: Bodies,
    config: &FmmConfig,
    nranks: usize,
    balance: Balance,
) -> Result<DistributedResult> {
    config.validate()?;
    let tree = build_tree(bodies, config, None)?;
    let part = partition_with(&tree, nranks, balance)?;
    let manifests = (0..nranks)
        .map(|r| build_let(&part, &tree, r, config.order))
        .collect::<Result<Vec<_>>>()?;
    simulate(&tree, config, &part, &manifests)
}

/// Runs the ranks of `part` on `tree`, exchanging exactly what `manifests`
/// list. A rank that lacks data it needs fails with
/// [`FmmError::MissingRemote`].
pub fn simulate(
    tree: &Tree,
    config: &FmmConfig,
    part: &RankPartition,
    manifests: &[LetManifest],
) -> Result<DistributedResult> {
    config.validate()?;
    if manifests.len() != part.nranks {
        return Err(FmmError::LengthMismatch {
            expected: part.nranks,
            found: manifests.len(),
        });
    }
    let order = config.order;
    let nc = coeff_count(order);
    let n = tree.bodies().len();
    let sorted = tree.bodies();
    let deep = tree.max_level() >= 2;
    let plans: Vec<RankPlan> = (0..part.nranks).map(|r| plan(tree, part, r).0).collect();
    let mut timings: Vec<TimingBreakdown> = (0..part.nranks)
        .map(|_| TimingBreakdown::new(n, order, 1, tree.max_level()))
        .collect();
    let missing = |rank: usize| move |cell: usize| FmmError::MissingRemote { rank, cell };

    // Initial distribution: each rank starts with its own bodies only.
    let mut stores: Vec<RankStore> = (0..part.nranks)
        .map(|r| {
            let own = part.bodies(r);
            let mut positions = vec![[0.0; 3]; n];
            let mut charges = vec![0.0; n];
            positions[own.clone()].copy_from_slice(&sorted.position[own.clone()]);
            charges[own.clone()].copy_from_slice(&sorted.charge[own.clone()]);
            let mut leaf_held = vec![false; tree.len()];
            for l in part.leaves(r) {
                leaf_held[l] = true;
            }
            RankStore {
                positions,
                charges,
                leaf_held,
                multipole: vec![Complex64::default(); tree.len() * nc],
                multipole_held: vec![false; tree.len()],
                local: vec![Complex64::default(); tree.len() * nc],
                potential: vec![0.0; own.len()],
                force: vec![[0.0; 3]; own.len()],
            }
        })
        .collect();

    // Local upward sweep.
    for (r, st) in stores.iter_mut().enumerate() {
        let mut sc = Scratch::new(order);
        let t = &mut timings[r];
        t.time(Phase::P2M, || {
            for l in part.leaves(r) {
                p2m_cell(
                    tree,
                    l,
                    &st.positions,
                    &st.charges,
                    &mut st.multipole[l * nc..(l + 1) * nc],
                    &mut sc,
                );
                st.multipole_held[l] = true;
            }
        });
        t.time(Phase::M2M, || {
            assemble(tree, st, &plans[r].local_upward, nc, &mut sc).map_err(missing(r))
        })?;
    }

    // Exchange.
    for m in manifests {
        let r = m.rank;
        timings[r].time(Phase::SimSendP2P, || {
            for &(leaf, owner) in &m.halo_leaves {
                let (dst, src) = pair_mut(&mut stores, r, owner);
                if !src.leaf_held[leaf] {
                    return Err(FmmError::MissingRemote {
                        rank: owner,
                        cell: leaf,
                    });
                }
                let b = tree.cell(leaf).body_range();
                dst.positions[b.clone()].copy_from_slice(&src.positions[b.clone()]);
                dst.charges[b.clone()].copy_from_slice(&src.charges[b]);
                dst.leaf_held[leaf] = true;
            }
            Ok(())
        })?;
        timings[r].time(Phase::SimSendM2L, || {
            for &(cell, owner) in &m.remote_multipoles {
                let (dst, src) = pair_mut(&mut stores, r, owner);
                if !src.multipole_held[cell] {
                    return Err(FmmError::MissingRemote { rank: owner, cell });
                }
                let k = cell * nc..(cell + 1) * nc;
                dst.multipole[k.clone()].copy_from_slice(&src.multipole[k]);
                dst.multipole_held[cell] = true;
            }
            Ok(())
        })?;
    }

    // Far field and near field on owned targets.
    let mut reports = Vec::with_capacity(part.nranks);
    for (r, st) in stores.iter_mut().enumerate() {
        let pl = &plans[r];
        let t = &mut timings[r];
        let mut sc = Scratch::new(order);
        let mut lists = Lists::default();
        t.time(Phase::M2M, || {
            assemble(tree, st, &pl.assembled, nc, &mut sc).map_err(missing(r))
        })?;
        let m2l_pairs = t.time(Phase::M2L, || {
            let table = M2lTable::new(tree, order);
            let store = CoeffStore::new(&st.multipole, 0, nc, Some(&st.multipole_held));
            let mut pairs = 0;
            for &c in &pl.far_targets {
                let out = &mut st.local[c * nc..(c + 1) * nc];
                pairs += m2l_cell(tree, c, store, &table, out, &mut sc, &mut lists)
                    .map_err(missing(r))?;
            }
            Ok(pairs)
        })?;
        let own = part.bodies(r);
        if deep {
            t.time(Phase::L2L, || {
                let mut parent = vec![Complex64::default(); nc];
                for &c in pl
                    .far_targets
                    .iter()
                    .filter(|&&c| tree.cell(c).level() >= 3)
                {
                    let p = tree.cell(c).parent.expect("deep cells have parents");
                    parent.copy_from_slice(&st.local[p * nc..(p + 1) * nc]);
                    l2l_cell(
                        tree,
                        c,
                        &parent,
                        &mut st.local[c * nc..(c + 1) * nc],
                        &mut sc,
                    );
                }
            });
            t.time(Phase::L2P, || {
                for l in part.leaves(r) {
                    let b = tree.cell(l).body_range();
                    let k = b.start - own.start..b.end - own.start;
                    l2p_cell(
                        tree,
                        l,
                        &st.local[l * nc..(l + 1) * nc],
                        &st.positions,
                        &st.charges,
                        &mut st.potential[k.clone()],
                        &mut st.force[k],
                        &mut sc,
                    );
                }
            });
        }
        let (p2p_pairs, zeros) = t.time(Phase::P2P, || {
            let mut acc = Default::default();
            let mut single = SingleBuffers::default();
            let (mut pairs, mut zeros) = (0, 0);
            for l in part.leaves(r) {
                let b = tree.cell(l).body_range();
                let k = b.start - own.start..b.end - own.start;
                let (pot, f) = (&mut st.potential[k.clone()], &mut st.force[k]);
                let held = Some(&st.leaf_held[..]);
                let (sources, z) = match config.precision {
                    Precision::Double => p2p_cell_double(
                        tree,
                        l,
                        &st.positions,
                        &st.charges,
                        held,
                        pot,
                        f,
                        &mut lists,
                        &mut acc,
                    ),
                    Precision::SingleNearField => p2p_cell_single(
                        tree,
                        l,
                        &st.positions,
                        &st.charges,
                        held,
                        pot,
                        f,
                        &mut lists,
                        &mut single,
                    ),
                }
                .map_err(missing(r))?;
                pairs += sources * b.len() as u64;
                zeros += z;
            }
            Ok((pairs - own.len() as u64, zeros - own.len() as u64))
        })?;
        reports.push((m2l_pairs, p2p_pairs, zeros));
    }

    let mut potential = vec![0.0; n];
    let mut force = vec![[0.0; 3]; n];
    for (r, st) in stores.iter().enumerate() {
        let own = part.bodies(r);
        potential[own.clone()].copy_from_slice(&st.potential);
        force[own].copy_from_slice(&st.force);
    }
    let comm = comm_stats(manifests);
    let mut merged = TimingBreakdown::new(n, order, 1, tree.max_level());
    for t in &timings {
        merged.max_merge(t);
    }
    merged.set(Phase::Sort, tree.sort_seconds());
    merged.set(Phase::BuildTree, tree.build_seconds());
    let diagnostics = Diagnostics {
        p2p_pairs: reports.iter().map(|r| r.1).sum(),
        m2l_pairs: reports.iter().map(|r| r.0).sum(),
        coincident_pairs: reports.iter().map(|r| r.2).sum(),
    };
    let orig = &sorted.original_index;
    let ranks = reports
        .into_iter()
        .zip(timings)
        .enumerate()
        .map(|(r, ((m2l_pairs, p2p_pairs, _), timing))| RankReport {
            rank: r,
            bodies: part.bodies(r).len(),
            leaves: part.leaves(r).len(),
            timing,
            stats: comm
                .per_rank
                .iter()
                .find(|s| s.rank == r)
                .copied()
                .unwrap_or_default(),
            p2p_pairs,
            m2l_pairs,
        })
        .collect();
    Ok(DistributedResult {
        result: FmmResult {
            potential: unsort(&potential, orig),
            force: unsort(&force, orig),
            timing: merged,
            diagnostics,
            max_level: tree.max_level(),
        },
        ranks,
        comm,
        partition: part.clone(),
    })
}

/// M2M into each listed cell from its children, in list order.
fn assemble(
    tree: &Tree,
    st: &mut RankStore,
    cells: &[usize],
    nc: usize,
    sc: &mut Scratch,
) -> std::result::Result<(), usize> {
    let mut out = vec![Complex64::default(); nc];
    for &c in cells {
        out.fill(Complex64::default());
        let store = CoeffStore::new(&st.multipole, 0, nc, Some(&st.multipole_held));
        m2m_cell(tree, c, store, &mut out, sc)?;
        st.multipole[c * nc..(c + 1) * nc].copy_from_slice(&out);
        st.multipole_held[c] = true;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_tree(level: u32) -> Tree {
        let k = 1usize << level;
        let mut pos = Vec::new();
        for z in 0..k {
            for y in 0..k {
                for x in 0..k {
                    pos.push([x, y, z].map(|i| (i as f64 + 0.5) / k as f64));
                }
            }
        }
        let n = pos.len();
        let domain = crate::bodies::Domain::new([0.0; 3], 1.0).unwrap();
        build_tree(
            Bodies::new(pos, vec![1.0; n]).unwrap(),
            &FmmConfig::new(3).with_max_level(level),
            Some(domain),
        )
        .unwrap()
    }

    #[test]
    fn one_rank_owns_everything() {
        let tree = grid_tree(2);
        let p = partition(&tree, 1).unwrap();
        assert_eq!(
            p.leaf_bounds,
            vec![tree.leaf_range().start, tree.leaf_range().end]
        );
        let m = build_let(&p, &tree, 0, 3).unwrap();
        assert!(m.halo_leaves.is_empty() && m.remote_multipoles.is_empty());
        assert_eq!((m.bytes_p2p, m.bytes_m2l), (0, 0));
    }

    #[test]
    fn equal_leaves_get_one_rank_each() {
        let tree = grid_tree(1);
        let p = partition(&tree, 8).unwrap();
        for r in 0..8 {
            assert_eq!(p.leaves(r).len(), 1);
        }
        assert!(matches!(
            partition(&tree, 9),
            Err(FmmError::TooManyRanks {
                ranks: 9,
                leaves: 8
            })
        ));
        assert!(partition(&tree, 0).is_err());
    }

    #[test]
    fn halves_of_a_grid_exchange_the_cut_planes() {
        // Octants 0-3 have z < 1/2, so the Morton midpoint cuts along z.
        let tree = grid_tree(2);
        let p = partition(&tree, 2).unwrap();
        assert_eq!(p.leaves(0).len(), 32);
        for r in 0..2 {
            let m = build_let(&p, &tree, r, 3).unwrap();
            let want_z = if r == 0 { 2 } else { 1 };
            assert_eq!(m.halo_leaves.len(), 16);
            for &(l, owner) in &m.halo_leaves {
                assert_eq!(owner, 1 - r);
                assert_eq!(tree.cell(l).key.anchor()[2], want_z);
            }
        }
        let s = comm_stats(&[
            build_let(&p, &tree, 0, 3).unwrap(),
            build_let(&p, &tree, 1, 3).unwrap(),
        ]);
        assert_eq!(s.per_rank[0].bytes_p2p, s.per_rank[1].bytes_p2p);
        assert_eq!(s.per_rank[0].bytes_m2l, s.per_rank[1].bytes_m2l);
        assert_eq!(s.imbalance_p2p, 1.0);
        assert_eq!(s.total_p2p, 2 * 16 * BODY_RECORD_BYTES);
    }

    #[test]
    fn record_sizes() {
        assert_eq!(multipole_record_bytes(3), 6 * 16 + 24);
        assert_eq!(BODY_RECORD_BYTES, 32);
    }

    #[test]
    fn single_rank_matches_serial_bitwise() {
        let tree = grid_tree(3);
        let bodies = tree.bodies().clone();
        let cfg = FmmConfig::new(4).with_max_level(3);
        let serial = crate::evaluator::fmm_evaluate(bodies.clone(), &cfg).unwrap();
        let d = distributed_evaluate(bodies, &cfg, 1).unwrap();
        assert_eq!(d.result.potential, serial.potential);
        assert_eq!(d.result.force, serial.force);
        assert_eq!(d.result.diagnostics, serial.diagnostics);
    }
}
