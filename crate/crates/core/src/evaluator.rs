//! The FMM pass: tree build, upward sweep, M2L transfer, downward sweep and
//! near field, each timed and run over the worker pool.
//!
//! Every per-cell routine below reads shared inputs and accumulates into its
//! own cell or its own bodies only, in a fixed order (ascending source cell,
//! then ascending body). That makes the result independent of the worker
//! count and of how the rank simulator splits the work.

use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::Complex64;

use crate::bodies::Bodies;
use crate::config::{FmmConfig, Precision};
use crate::error::{FmmError, Result};
use crate::harmonics::coeff_count;
use crate::kernels::expansion::{
    l2l_into, l2p_into, m2l_kernel, m2l_kernel_len, m2l_matrix, m2l_matrix_len, m2l_with_kernel,
    m2m_into, matrix_sum_add, matrix_sum_finish, matrix_sum_start, p2m_into, Scratch,
};
use crate::kernels::p2p::{p2p_f32_slices, p2p_into, FAR_AWAY, LANES};
use crate::parallel::WorkerPool;
use crate::timing::{Phase, TimingBreakdown};
use crate::tree::{build_tree, Tree};

/// Multipole and local coefficients for every cell, `ncoef` per cell in cell order.
#[derive(Clone, Debug)]
pub struct Expansions {
    order: usize,
    ncoef: usize,
    pub multipole: Vec<Complex64>,
    pub local: Vec<Complex64>,
}

impl Expansions {
    pub fn new(cells: usize, order: usize) -> Self {
        let ncoef = coeff_count(order);
        Self {
            order,
            ncoef,
            multipole: vec![Complex64::default(); cells * ncoef],
            local: vec![Complex64::default(); cells * ncoef],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn ncoef(&self) -> usize {
        self.ncoef
    }

    pub fn multipole(&self, cell: usize) -> &[Complex64] {
        &self.multipole[cell * self.ncoef..(cell + 1) * self.ncoef]
    }

    pub fn local(&self, cell: usize) -> &[Complex64] {
        &self.local[cell * self.ncoef..(cell + 1) * self.ncoef]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Diagnostics {
    /// Ordered body pairs evaluated directly, self pairs excluded.
    pub p2p_pairs: u64,
    /// Directed cell pairs handled by M2L.
    pub m2l_pairs: u64,
    /// Ordered pairs of distinct bodies at zero separation (skipped).
    pub coincident_pairs: u64,
}

/// Output of a full evaluation, in original body order.
#[derive(Clone, Debug)]
pub struct FmmResult {
    pub potential: Vec<f64>,
    /// `q_i * (-grad phi_i)`.
    pub force: Vec<[f64; 3]>,
    pub timing: TimingBreakdown,
    pub diagnostics: Diagnostics,
    pub max_level: u32,
}

/// Read access to per-cell coefficients, optionally restricted to the cells
/// a rank actually holds.
#[derive(Clone, Copy)]
pub(crate) struct CoeffStore<'a> {
    data: &'a [Complex64],
    first_cell: usize,
    ncoef: usize,
    present: Option<&'a [bool]>,
}

impl<'a> CoeffStore<'a> {
    pub(crate) fn new(
        data: &'a [Complex64],
        first_cell: usize,
        ncoef: usize,
        present: Option<&'a [bool]>,
    ) -> Self {
        Self {
            data,
            first_cell,
            ncoef,
            present,
        }
    }

    /// Coefficients of `cell`, or `Err(cell)` when it is not held.
    #[inline]
    fn get(&self, cell: usize) -> std::result::Result<&'a [Complex64], usize> {
        if let Some(p) = self.present {
            if !p[cell] {
                return Err(cell);
            }
        }
        let i = cell - self.first_cell;
        Ok(&self.data[i * self.ncoef..(i + 1) * self.ncoef])
    }
}

/// Neighbor and interaction list buffers.
#[derive(Default)]
pub(crate) struct Lists {
    pub nb: Vec<usize>,
    pub il: Vec<usize>,
}

/// Staging streams for the single-precision near field.
#[derive(Default)]
pub(crate) struct SingleBuffers {
    target: [Vec<f32>; 3],
    source: [Vec<f32>; 4],
    out: [Vec<f32>; 4],
}

pub(crate) fn p2m_cell(
    tree: &Tree,
    leaf: usize,
    positions: &[[f64; 3]],
    charges: &[f64],
    out: &mut [Complex64],
    sc: &mut Scratch,
) {
    let cell = tree.cell(leaf);
    let r = cell.body_range();
    p2m_into(cell.center, &positions[r.clone()], &charges[r], out, sc);
}

pub(crate) fn m2m_cell(
    tree: &Tree,
    idx: usize,
    children: CoeffStore<'_>,
    out: &mut [Complex64],
    sc: &mut Scratch,
) -> std::result::Result<(), usize> {
    let cell = tree.cell(idx);
    for c in cell.children() {
        m2m_into(children.get(c)?, tree.cell(c).center, cell.center, out, sc);
    }
    Ok(())
}

/// M2L kernels for every level, indexed by the integer offset between target
/// and source cell. Interaction-list partners are at most three cells apart
/// on each axis, so `7^3` offsets per level cover every pair. Up to
/// [`MATRIX_MAX_ORDER`] each kernel is kept as a dense real matrix.
pub(crate) struct M2lTable {
    len: usize,
    levels: Vec<Vec<Complex64>>,
    matrix_len: usize,
    matrices: Vec<Vec<f64>>,
}

const OFFSETS: usize = 7 * 7 * 7;
const MATRIX_MAX_ORDER: usize = 8;

impl M2lTable {
    pub(crate) fn new(tree: &Tree, order: usize) -> Self {
        let len = m2l_kernel_len(order);
        let dense = order <= MATRIX_MAX_ORDER;
        let matrix_len = if dense { m2l_matrix_len(order) } else { 0 };
        let mut levels = Vec::new();
        let mut matrices = Vec::new();
        for level in 0..=tree.max_level() {
            if level < 2 {
                levels.push(Vec::new());
                matrices.push(Vec::new());
                continue;
            }
            let width = tree.domain().width / (1u64 << level) as f64;
            let mut table = vec![Complex64::default(); OFFSETS * len];
            let mut mats = vec![0.0; OFFSETS * matrix_len];
            for o in 0..OFFSETS {
                let d = [o % 7, o / 7 % 7, o / 49].map(|a| a as i64 - 3);
                if d.iter().all(|a| a.abs() <= 1) {
                    continue;
                }
                let kernel = &mut table[o * len..(o + 1) * len];
                m2l_kernel(d.map(|a| a as f64 * width), order, kernel);
                if dense {
                    m2l_matrix(
                        kernel,
                        order,
                        &mut mats[o * matrix_len..(o + 1) * matrix_len],
                    );
                }
            }
            if dense {
                table = Vec::new();
            }
            levels.push(table);
            matrices.push(mats);
        }
        Self {
            len,
            levels,
            matrix_len,
            matrices,
        }
    }

    #[inline]
    fn offset(target: [u32; 3], source: [u32; 3]) -> usize {
        let d: [usize; 3] =
            std::array::from_fn(|k| (target[k] as i64 - source[k] as i64 + 3) as usize);
        (d[2] * 7 + d[1]) * 7 + d[0]
    }

    #[inline]
    fn matrix(&self, level: u32, target: [u32; 3], source: [u32; 3]) -> &[f64] {
        let o = Self::offset(target, source);
        &self.matrices[level as usize][o * self.matrix_len..(o + 1) * self.matrix_len]
    }

    #[inline]
    fn kernel(&self, level: u32, target: [u32; 3], source: [u32; 3]) -> &[Complex64] {
        let o = Self::offset(target, source);
        &self.levels[level as usize][o * self.len..(o + 1) * self.len]
    }
}

/// Returns the number of M2L pairs.
pub(crate) fn m2l_cell(
    tree: &Tree,
    idx: usize,
    multipoles: CoeffStore<'_>,
    table: &M2lTable,
    out: &mut [Complex64],
    sc: &mut Scratch,
    lists: &mut Lists,
) -> std::result::Result<u64, usize> {
    tree.interactions_into(idx, &mut lists.il, &mut lists.nb)
        .expect("M2L targets sit at level 2 or deeper");
    let key = tree.cell(idx).key;
    let (level, anchor) = (key.level(), key.anchor());
    if table.matrix_len > 0 {
        matrix_sum_start(sc);
        for &s in &lists.il {
            let m = table.matrix(level, anchor, tree.cell(s).key.anchor());
            matrix_sum_add(multipoles.get(s)?, m, sc);
        }
        matrix_sum_finish(out, sc);
    } else {
        for &s in &lists.il {
            let k = table.kernel(level, anchor, tree.cell(s).key.anchor());
            m2l_with_kernel(multipoles.get(s)?, k, out, sc);
        }
    }
    Ok(lists.il.len() as u64)
}

pub(crate) fn l2l_cell(
    tree: &Tree,
    idx: usize,
    parent_local: &[Complex64],
    out: &mut [Complex64],
    sc: &mut Scratch,
) {
    let cell = tree.cell(idx);
    let parent = cell.parent.expect("L2L targets have a parent");
    l2l_into(parent_local, tree.cell(parent).center, cell.center, out, sc);
}

/// `potential` and `force` cover exactly the leaf's bodies.
pub(crate) fn l2p_cell(
    tree: &Tree,
    leaf: usize,
    local: &[Complex64],
    positions: &[[f64; 3]],
    charges: &[f64],
    potential: &mut [f64],
    force: &mut [[f64; 3]],
    sc: &mut Scratch,
) {
    let cell = tree.cell(leaf);
    let r = cell.body_range();
    l2p_into(
        local,
        cell.center,
        &positions[r.clone()],
        &charges[r],
        potential,
        force,
        sc,
    );
}

/// Near field of one leaf in double precision. `leaf_present` restricts the
/// source leaves to those a rank holds. Returns `(source bodies, zero pairs)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn p2p_cell_double(
    tree: &Tree,
    leaf: usize,
    positions: &[[f64; 3]],
    charges: &[f64],
    leaf_present: Option<&[bool]>,
    potential: &mut [f64],
    force: &mut [[f64; 3]],
    lists: &mut Lists,
    acc: &mut (Vec<f64>, Vec<[f64; 3]>),
) -> std::result::Result<(u64, u64), usize> {
    let cell = tree.cell(leaf);
    let tr = cell.body_range();
    let targets = &positions[tr.clone()];
    let (acc_phi, acc_f) = acc;
    acc_phi.clear();
    acc_phi.resize(targets.len(), 0.0);
    acc_f.clear();
    acc_f.resize(targets.len(), [0.0; 3]);
    tree.neighbors_into(leaf, &mut lists.nb);
    let mut zeros = 0;
    let mut sources = 0;
    // Neighbors are ascending, so consecutive leaves give contiguous body
    // runs; merging them keeps the summation order unchanged.
    let mut run: Option<std::ops::Range<usize>> = None;
    for &nb in &lists.nb {
        if let Some(p) = leaf_present {
            if !p[nb] {
                return Err(nb);
            }
        }
        let r = tree.cell(nb).body_range();
        sources += r.len() as u64;
        run = match run {
            Some(cur) if cur.end == r.start => Some(cur.start..r.end),
            Some(cur) => {
                zeros += p2p_into(
                    targets,
                    &positions[cur.clone()],
                    &charges[cur],
                    acc_phi,
                    acc_f,
                );
                Some(r)
            }
            None => Some(r),
        };
    }
    if let Some(cur) = run {
        zeros += p2p_into(
            targets,
            &positions[cur.clone()],
            &charges[cur],
            acc_phi,
            acc_f,
        );
    }
    for (k, i) in tr.enumerate() {
        potential[k] += acc_phi[k];
        let q = charges[i];
        for d in 0..3 {
            force[k][d] += q * acc_f[k][d];
        }
    }
    Ok((sources, zeros))
}

/// Near field of one leaf with single-precision arithmetic: coordinates are
/// taken relative to the leaf center, all neighbor sources go through one
/// batched kernel call, and the results are added to the double accumulators.
#[allow(clippy::too_many_arguments)]
pub(crate) fn p2p_cell_single(
    tree: &Tree,
    leaf: usize,
    positions: &[[f64; 3]],
    charges: &[f64],
    leaf_present: Option<&[bool]>,
    potential: &mut [f64],
    force: &mut [[f64; 3]],
    lists: &mut Lists,
    buf: &mut SingleBuffers,
) -> std::result::Result<(u64, u64), usize> {
    let cell = tree.cell(leaf);
    let c = cell.center;
    let tr = cell.body_range();
    let nt = tr.len();
    let padded = nt.next_multiple_of(LANES);
    for (k, t) in buf.target.iter_mut().enumerate() {
        t.clear();
        t.extend(positions[tr.clone()].iter().map(|p| (p[k] - c[k]) as f32));
        t.resize(padded, -FAR_AWAY);
    }
    for s in buf.source.iter_mut() {
        s.clear();
    }
    tree.neighbors_into(leaf, &mut lists.nb);
    for &nb in &lists.nb {
        if let Some(p) = leaf_present {
            if !p[nb] {
                return Err(nb);
            }
        }
        let r = tree.cell(nb).body_range();
        for k in 0..3 {
            buf.source[k].extend(positions[r.clone()].iter().map(|p| (p[k] - c[k]) as f32));
        }
        buf.source[3].extend(charges[r].iter().map(|&q| q as f32));
    }
    for o in buf.out.iter_mut() {
        o.clear();
        o.resize(padded, 0.0);
    }
    let sources = buf.source[3].len() as u64;
    let [tx, ty, tz] = &buf.target;
    let [sx, sy, sz, sq] = &buf.source;
    let [op, ox, oy, oz] = &mut buf.out;
    let zeros = p2p_f32_slices([tx, ty, tz], [sx, sy, sz, sq], [op, ox, oy, oz]);
    for (k, i) in tr.enumerate() {
        potential[k] += f64::from(buf.out[0][k]);
        let q = charges[i];
        for d in 0..3 {
            force[k][d] += q * f64::from(buf.out[d + 1][k]);
        }
    }
    Ok((sources, zeros))
}

/// P2M on every leaf, then M2M level by level up to the root.
pub fn upward_sweep(
    tree: &Tree,
    order: usize,
    pool: &WorkerPool,
    timing: &mut TimingBreakdown,
) -> Expansions {
    let mut exp = Expansions::new(tree.len(), order);
    let nc = exp.ncoef;
    let offsets = tree.level_offsets();
    let bodies = tree.bodies();
    let (pos, q) = (&bodies.position[..], &bodies.charge[..]);
    let leaves = tree.leaf_range();
    timing.time(Phase::P2M, || {
        let out = &mut exp.multipole[leaves.start * nc..leaves.end * nc];
        pool.parallel_apply(out, nc, |items, chunk| {
            let mut sc = Scratch::new(order);
            for (k, i) in items.enumerate() {
                p2m_cell(
                    tree,
                    leaves.start + i,
                    pos,
                    q,
                    &mut chunk[k * nc..(k + 1) * nc],
                    &mut sc,
                );
            }
        });
    });
    timing.time(Phase::M2M, || {
        for level in (0..tree.max_level() as usize).rev() {
            let (upper, lower) = exp.multipole.split_at_mut(offsets[level + 1] * nc);
            let out = &mut upper[offsets[level] * nc..];
            let children = CoeffStore::new(lower, offsets[level + 1], nc, None);
            let first = offsets[level];
            pool.parallel_apply(out, nc, |items, chunk| {
                let mut sc = Scratch::new(order);
                for (k, i) in items.enumerate() {
                    m2m_cell(
                        tree,
                        first + i,
                        children,
                        &mut chunk[k * nc..(k + 1) * nc],
                        &mut sc,
                    )
                    .expect("all children present");
                }
            });
        }
    });
    exp
}

/// M2L for every cell at levels `2..=max_level` as one parallel loop, with
/// no ordering between levels. Returns the number of M2L pairs.
pub fn transfer_m2l(
    tree: &Tree,
    exp: &mut Expansions,
    pool: &WorkerPool,
    timing: &mut TimingBreakdown,
) -> u64 {
    if tree.max_level() < 2 {
        return 0;
    }
    let first = tree.level_offsets()[2];
    timing.time(Phase::M2L, || {
        let table = M2lTable::new(tree, exp.order);
        m2l_range(tree, exp, &table, first, tree.len(), pool)
    })
}

/// M2L one level at a time, visiting levels in the given order.
pub fn transfer_m2l_levels(
    tree: &Tree,
    exp: &mut Expansions,
    levels: &[u32],
    pool: &WorkerPool,
    timing: &mut TimingBreakdown,
) -> Result<u64> {
    let mut pairs = 0;
    let table = timing.time(Phase::M2L, || M2lTable::new(tree, exp.order));
    for &level in levels {
        if level < 2 {
            return Err(FmmError::LevelTooShallow { level });
        }
        if level > tree.max_level() {
            return Err(FmmError::InvalidConfig(format!(
                "level {level} below the leaves"
            )));
        }
        let r = tree.level_range(level);
        pairs += timing.time(Phase::M2L, || {
            m2l_range(tree, exp, &table, r.start, r.end, pool)
        });
    }
    Ok(pairs)
}

fn m2l_range(
    tree: &Tree,
    exp: &mut Expansions,
    table: &M2lTable,
    start: usize,
    end: usize,
    pool: &WorkerPool,
) -> u64 {
    let nc = exp.ncoef;
    let order = exp.order;
    let store = CoeffStore::new(&exp.multipole, 0, nc, None);
    let pairs = AtomicU64::new(0);
    pool.parallel_apply(&mut exp.local[start * nc..end * nc], nc, |items, chunk| {
        let mut sc = Scratch::new(order);
        let mut lists = Lists::default();
        let mut n = 0;
        for (k, i) in items.enumerate() {
            n += m2l_cell(
                tree,
                start + i,
                store,
                table,
                &mut chunk[k * nc..(k + 1) * nc],
                &mut sc,
                &mut lists,
            )
            .expect("all multipoles present");
        }
        pairs.fetch_add(n, Ordering::Relaxed);
    });
    pairs.into_inner()
}

/// Leaf body boundaries: leaf `i` owns bodies `b[i]..b[i + 1]`.
fn leaf_bounds(tree: &Tree) -> Vec<usize> {
    let leaves = tree.leaves();
    let mut b: Vec<usize> = leaves.iter().map(|c| c.body_start).collect();
    b.push(leaves.last().map_or(0, |c| c.body_start + c.body_count));
    b
}

/// L2L from level 2 downward, then L2P at the leaves. Adds into the sorted
/// accumulators `potential` / `force`.
pub fn downward_sweep(
    tree: &Tree,
    exp: &mut Expansions,
    potential: &mut [f64],
    force: &mut [[f64; 3]],
    pool: &WorkerPool,
    timing: &mut TimingBreakdown,
) {
    if tree.max_level() < 2 {
        return;
    }
    let nc = exp.ncoef;
    let order = exp.order;
    let offsets = tree.level_offsets();
    timing.time(Phase::L2L, || {
        for level in 3..=tree.max_level() as usize {
            let (upper, lower) = exp.local.split_at_mut(offsets[level] * nc);
            let upper = &*upper;
            let first = offsets[level];
            let out = &mut lower[..(offsets[level + 1] - first) * nc];
            pool.parallel_apply(out, nc, |items, chunk| {
                let mut sc = Scratch::new(order);
                for (k, i) in items.enumerate() {
                    let idx = first + i;
                    let p = tree.cell(idx).parent.expect("deep cells have parents");
                    l2l_cell(
                        tree,
                        idx,
                        &upper[p * nc..(p + 1) * nc],
                        &mut chunk[k * nc..(k + 1) * nc],
                        &mut sc,
                    );
                }
            });
        }
    });
    let bodies = tree.bodies();
    let (pos, q) = (&bodies.position[..], &bodies.charge[..]);
    let bounds = leaf_bounds(tree);
    let first_leaf = tree.leaf_range().start;
    let local = &exp.local;
    timing.time(Phase::L2P, || {
        pool.parallel_apply_ranges(&bounds, potential, force, |items, pot, f| {
            let mut sc = Scratch::new(order);
            let base = bounds[items.start];
            for i in items {
                let leaf = first_leaf + i;
                let r = bounds[i] - base..bounds[i + 1] - base;
                let l = &local[leaf * nc..(leaf + 1) * nc];
                l2p_cell(
                    tree,
                    leaf,
                    l,
                    pos,
                    q,
                    &mut pot[r.clone()],
                    &mut f[r],
                    &mut sc,
                );
            }
        });
    });
}

/// Direct interaction of every leaf with its neighbor leaves (itself
/// included). Returns `(p2p pairs, coincident pairs)`.
pub fn near_field(
    tree: &Tree,
    precision: Precision,
    potential: &mut [f64],
    force: &mut [[f64; 3]],
    pool: &WorkerPool,
    timing: &mut TimingBreakdown,
) -> (u64, u64) {
    let bodies = tree.bodies();
    let (pos, q) = (&bodies.position[..], &bodies.charge[..]);
    let bounds = leaf_bounds(tree);
    let first_leaf = tree.leaf_range().start;
    let pairs = AtomicU64::new(0);
    let zeros = AtomicU64::new(0);
    timing.time(Phase::P2P, || {
        pool.parallel_apply_ranges(&bounds, potential, force, |items, pot, f| {
            let mut lists = Lists::default();
            let mut acc = Default::default();
            let mut single = SingleBuffers::default();
            let base = bounds[items.start];
            let (mut np, mut nz) = (0, 0);
            for i in items {
                let leaf = first_leaf + i;
                let r = bounds[i] - base..bounds[i + 1] - base;
                let (pot, f) = (&mut pot[r.clone()], &mut f[r.clone()]);
                let (sources, z) = match precision {
                    Precision::Double => {
                        p2p_cell_double(tree, leaf, pos, q, None, pot, f, &mut lists, &mut acc)
                    }
                    Precision::SingleNearField => {
                        p2p_cell_single(tree, leaf, pos, q, None, pot, f, &mut lists, &mut single)
                    }
                }
                .expect("all leaves present");
                np += sources * r.len() as u64;
                nz += z;
            }
            pairs.fetch_add(np, Ordering::Relaxed);
            zeros.fetch_add(nz, Ordering::Relaxed);
        });
    });
    let n = bodies.len() as u64;
    (pairs.into_inner() - n, zeros.into_inner() - n)
}

/// Sorted-order outputs of [`evaluate_tree`].
#[derive(Clone, Debug)]
pub struct TreeEvaluation {
    pub potential: Vec<f64>,
    pub force: Vec<[f64; 3]>,
    pub diagnostics: Diagnostics,
}

/// Runs every FMM phase on an already built tree. Outputs follow the tree's
/// (sorted) body order.
pub fn evaluate_tree(
    tree: &Tree,
    config: &FmmConfig,
    pool: &WorkerPool,
    timing: &mut TimingBreakdown,
) -> Result<TreeEvaluation> {
    config.validate()?;
    let n = tree.bodies().len();
    let mut potential = vec![0.0; n];
    let mut force = vec![[0.0; 3]; n];
    let mut exp = upward_sweep(tree, config.order, pool, timing);
    let m2l_pairs = transfer_m2l(tree, &mut exp, pool, timing);
    downward_sweep(tree, &mut exp, &mut potential, &mut force, pool, timing);
    let (p2p_pairs, coincident_pairs) = near_field(
        tree,
        config.precision,
        &mut potential,
        &mut force,
        pool,
        timing,
    );
    Ok(TreeEvaluation {
        potential,
        force,
        diagnostics: Diagnostics {
            p2p_pairs,
            m2l_pairs,
            coincident_pairs,
        },
    })
}

/// Scatters sorted-order values back to original body order.
pub(crate) fn unsort<T: Copy + Default>(sorted: &[T], original_index: &[usize]) -> Vec<T> {
    let mut out = vec![T::default(); sorted.len()];
    for (v, &o) in sorted.iter().zip(original_index) {
        out[o] = *v;
    }
    out
}

/// Full evaluation of potentials and forces for `bodies`.
pub fn fmm_evaluate(bodies: Bodies, config: &FmmConfig) -> Result<FmmResult> {
    config.validate()?;
    let pool = WorkerPool::new(config.workers)?;
    let n = bodies.len();
    let tree = build_tree(bodies, config, None)?;
    let mut timing = TimingBreakdown::new(n, config.order, config.workers, tree.max_level());
    timing.set(Phase::Sort, tree.sort_seconds());
    timing.set(Phase::BuildTree, tree.build_seconds());
    let ev = evaluate_tree(&tree, config, &pool, &mut timing)?;
    let orig = &tree.bodies().original_index;
    Ok(FmmResult {
        potential: unsort(&ev.potential, orig),
        force: unsort(&ev.force, orig),
        timing,
        diagnostics: ev.diagnostics,
        max_level: tree.max_level(),
    })
}

/// `||approx - reference||_2 / ||reference||_2`.
pub fn relative_l2_error(approx: &[f64], reference: &[f64]) -> Result<f64> {
    if approx.len() != reference.len() {
        return Err(FmmError::LengthMismatch {
            expected: reference.len(),
            found: approx.len(),
        });
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (a, r) in approx.iter().zip(reference) {
        num += (a - r) * (a - r);
        den += r * r;
    }
    if den == 0.0 {
        return Err(FmmError::ZeroReference);
    }
    Ok((num / den).sqrt())
}
