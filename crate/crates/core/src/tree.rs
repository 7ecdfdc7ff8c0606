//! Uniform-depth linear octree over Morton-sorted bodies.
//!
//! Cells are stored level by level (root first); inside a level they are in
//! ascending key order, so the children of a cell form a contiguous run on
//! the next level and the bodies of any cell form a contiguous run
//! `body_start..body_start + body_count` of the sorted body arrays.

use std::ops::Range;
use std::time::Instant;

use crate::bodies::{Bodies, Domain};
use crate::config::FmmConfig;
use crate::error::{FmmError, Result};
use crate::morton::MortonKey;

/// Deepest level that gets a dense key-to-index table (8^7 entries).
const DENSE_LOOKUP_MAX_LEVEL: u32 = 7;
const ABSENT: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub key: MortonKey,
    pub center: [f64; 3],
    pub half_width: f64,
    pub body_start: usize,
    pub body_count: usize,
    /// Bit `o` set when octant `o` holds bodies.
    pub child_mask: u8,
    pub is_leaf: bool,
    pub parent: Option<usize>,
    /// Index of the first child; children are `first_child..first_child + child_count()`.
    pub first_child: usize,
}

impl Cell {
    #[inline]
    pub fn body_range(&self) -> Range<usize> {
        self.body_start..self.body_start + self.body_count
    }

    #[inline]
    pub fn child_count(&self) -> usize {
        self.child_mask.count_ones() as usize
    }

    #[inline]
    pub fn children(&self) -> Range<usize> {
        self.first_child..self.first_child + self.child_count()
    }

    #[inline]
    pub fn level(&self) -> u32 {
        self.key.level()
    }
}

#[derive(Clone, Debug)]
pub struct Tree {
    cells: Vec<Cell>,
    level_offsets: Vec<usize>,
    max_level: u32,
    domain: Domain,
    bodies: Bodies,
    lookup: Vec<Option<Vec<u32>>>,
    sort_seconds: f64,
    build_seconds: f64,
}

/// Sorts `bodies` into leaf-key order and materialises every occupied cell.
///
/// `domain` defaults to the bounding cube of the bodies.
pub fn build_tree(mut bodies: Bodies, config: &FmmConfig, domain: Option<Domain>) -> Result<Tree> {
    let n = bodies.len();
    if n == 0 {
        return Err(FmmError::EmptyInput);
    }
    let max_level = config.max_level(n)?;
    let domain = match domain {
        Some(d) => d,
        None => Domain::enclosing(&bodies.position)?,
    };

    let t_sort = Instant::now();
    let mut keyed: Vec<(u64, usize)> = Vec::with_capacity(n);
    for (i, &p) in bodies.position.iter().enumerate() {
        if !domain.contains(p) {
            return Err(FmmError::OutsideDomain { position: p });
        }
        let key = MortonKey::new_unchecked(domain.grid_anchor(p, max_level), max_level as u8);
        keyed.push((key.packed(), i));
    }
    // Ties keep the incoming order, which makes the layout deterministic.
    keyed.sort_unstable();
    let order: Vec<usize> = keyed.iter().map(|&(_, i)| i).collect();
    bodies.permute(&order);
    let leaf_keys: Vec<u64> = keyed.into_iter().map(|(k, _)| k).collect();
    let sort_seconds = t_sort.elapsed().as_secs_f64();

    let t_build = Instant::now();
    let mut levels: Vec<Vec<Cell>> = Vec::with_capacity(max_level as usize + 1);
    let mut leaves = Vec::new();
    let mut start = 0;
    while start < n {
        let key = leaf_keys[start];
        let mut end = start + 1;
        while end < n && leaf_keys[end] == key {
            end += 1;
        }
        let key = MortonKey::from_packed(key, max_level).expect("leaf key within level");
        leaves.push(new_cell(&domain, key, start, end - start, true));
        start = end;
    }
    levels.push(leaves);
    for level in (0..max_level).rev() {
        let below = levels.last().expect("child level present");
        let mut cells: Vec<Cell> = Vec::new();
        for (ci, child) in below.iter().enumerate() {
            let parent_key = child.key.parent().expect("non-root child");
            match cells.last_mut() {
                Some(p) if p.key == parent_key => {
                    p.body_count += child.body_count;
                    p.child_mask |= 1 << child.key.octant();
                }
                _ => {
                    let mut p = new_cell(
                        &domain,
                        parent_key,
                        child.body_start,
                        child.body_count,
                        false,
                    );
                    p.child_mask = 1 << child.key.octant();
                    p.first_child = ci;
                    cells.push(p);
                }
            }
        }
        debug_assert_eq!(cells.last().map(|c| c.key.level()), Some(level));
        levels.push(cells);
    }
    levels.reverse();

    let mut level_offsets = Vec::with_capacity(levels.len() + 1);
    let mut total = 0;
    for l in &levels {
        level_offsets.push(total);
        total += l.len();
    }
    level_offsets.push(total);

    let mut cells: Vec<Cell> = Vec::with_capacity(total);
    for (l, level_cells) in levels.into_iter().enumerate() {
        for mut c in level_cells {
            if !c.is_leaf {
                c.first_child += level_offsets[l + 1];
            }
            cells.push(c);
        }
    }
    for l in 0..max_level as usize {
        for pi in level_offsets[l]..level_offsets[l + 1] {
            let children = cells[pi].children();
            for ci in children {
                cells[ci].parent = Some(pi);
            }
        }
    }

    let lookup = (0..=max_level)
        .map(|l| {
            (l <= DENSE_LOOKUP_MAX_LEVEL).then(|| {
                let mut table = vec![ABSENT; 1usize << (3 * l)];
                for (i, c) in cells[level_offsets[l as usize]..level_offsets[l as usize + 1]]
                    .iter()
                    .enumerate()
                {
                    table[c.key.packed() as usize] = (level_offsets[l as usize] + i) as u32;
                }
                table
            })
        })
        .collect();
    let build_seconds = t_build.elapsed().as_secs_f64();

    Ok(Tree {
        cells,
        level_offsets,
        max_level,
        domain,
        bodies,
        lookup,
        sort_seconds,
        build_seconds,
    })
}

fn new_cell(
    domain: &Domain,
    key: MortonKey,
    body_start: usize,
    body_count: usize,
    is_leaf: bool,
) -> Cell {
    Cell {
        key,
        center: domain.cell_center(key.anchor(), key.level()),
        half_width: domain.half_width() / (1u64 << key.level()) as f64,
        body_start,
        body_count,
        child_mask: 0,
        is_leaf,
        parent: None,
        first_child: 0,
    }
}

impl Tree {
    #[inline]
    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    #[inline]
    pub fn cell(&self, idx: usize) -> &Cell {
        &self.cells[idx]
    }

    #[inline]
    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    #[inline]
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    #[inline]
    pub fn bodies(&self) -> &Bodies {
        &self.bodies
    }

    pub fn into_bodies(self) -> Bodies {
        self.bodies
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Start offset of each level in the cell array, plus the total at the end.
    pub fn level_offsets(&self) -> &[usize] {
        &self.level_offsets
    }

    #[inline]
    pub fn level_range(&self, level: u32) -> Range<usize> {
        self.level_offsets[level as usize]..self.level_offsets[level as usize + 1]
    }

    #[inline]
    pub fn leaf_range(&self) -> Range<usize> {
        self.level_range(self.max_level)
    }

    pub fn leaves(&self) -> &[Cell] {
        &self.cells[self.leaf_range()]
    }

    /// Seconds spent computing keys and sorting bodies.
    pub fn sort_seconds(&self) -> f64 {
        self.sort_seconds
    }

    /// Seconds spent materialising cells and lookup tables.
    pub fn build_seconds(&self) -> f64 {
        self.build_seconds
    }

    /// Index of the occupied cell with `packed` key at `level`.
    pub fn find(&self, level: u32, packed: u64) -> Option<usize> {
        if level > self.max_level {
            return None;
        }
        match &self.lookup[level as usize] {
            Some(table) => table
                .get(packed as usize)
                .copied()
                .filter(|&i| i != ABSENT)
                .map(|i| i as usize),
            None => {
                let range = self.level_range(level);
                self.cells[range.clone()]
                    .binary_search_by_key(&packed, |c| c.key.packed())
                    .ok()
                    .map(|i| range.start + i)
            }
        }
    }

    /// Occupied same-level cells adjacent to `idx` (itself included), in
    /// ascending key order.
    pub fn neighbor_list(&self, idx: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(27);
        self.neighbors_into(idx, &mut out);
        out
    }

    pub fn neighbors_into(&self, idx: usize, out: &mut Vec<usize>) {
        out.clear();
        let key = self.cells[idx].key;
        let level = key.level();
        let top = (1i64 << level) - 1;
        let [ax, ay, az] = key.anchor().map(i64::from);
        for z in (az - 1).max(0)..=(az + 1).min(top) {
            for y in (ay - 1).max(0)..=(ay + 1).min(top) {
                for x in (ax - 1).max(0)..=(ax + 1).min(top) {
                    let k = MortonKey::new_unchecked([x as u32, y as u32, z as u32], level as u8);
                    if let Some(j) = self.find(level, k.packed()) {
                        out.push(j);
                    }
                }
            }
        }
        out.sort_unstable();
    }

    /// Well-separated partners of `idx`: children of the parent's neighbors
    /// that are not adjacent to `idx`, in ascending key order.
    pub fn interaction_list(&self, idx: usize) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(189);
        let mut scratch = Vec::with_capacity(27);
        self.interactions_into(idx, &mut out, &mut scratch)?;
        Ok(out)
    }

    pub fn interactions_into(
        &self,
        idx: usize,
        out: &mut Vec<usize>,
        scratch: &mut Vec<usize>,
    ) -> Result<()> {
        out.clear();
        let cell = &self.cells[idx];
        let level = cell.level();
        if level < 2 {
            return Err(FmmError::LevelTooShallow { level });
        }
        let parent = cell.parent.expect("cells below the root have a parent");
        self.neighbors_into(parent, scratch);
        for &pn in scratch.iter() {
            for c in self.cells[pn].children() {
                if !cell.key.is_adjacent(&self.cells[c].key) {
                    out.push(c);
                }
            }
        }
        // Children of ascending parents are already ascending.
        debug_assert!(out.windows(2).all(|w| w[0] < w[1]));
        Ok(())
    }

    /// Index of the leaf holding sorted body `body`.
    pub fn leaf_of_body(&self, body: usize) -> usize {
        let leaves = self.leaves();
        let i = leaves.partition_point(|c| c.body_start + c.body_count <= body);
        self.leaf_range().start + i
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_bodies(n: usize, seed: u64) -> Bodies {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let pos = (0..n)
            .map(|_| [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        Bodies::new(pos, vec![1.0; n]).unwrap()
    }

    /// One body at the center of every level-`level` cell of the unit cube.
    fn full_grid(level: u32) -> Tree {
        let k = 1usize << level;
        let mut pos = Vec::new();
        for z in 0..k {
            for y in 0..k {
                for x in 0..k {
                    pos.push([x, y, z].map(|c| (c as f64 + 0.5) / k as f64));
                }
            }
        }
        let n = pos.len();
        let d = Domain::new([0.0; 3], 1.0).unwrap();
        build_tree(
            Bodies::new(pos, vec![1.0; n]).unwrap(),
            &FmmConfig::new(3).with_max_level(level),
            Some(d),
        )
        .unwrap()
    }

    fn find_anchor(t: &Tree, a: [u32; 3], level: u32) -> usize {
        t.find(
            level,
            MortonKey::encode(a[0], a[1], a[2], level).unwrap().packed(),
        )
        .unwrap()
    }

    fn brute_interactions(t: &Tree, idx: usize) -> Vec<usize> {
        let c = &t.cells()[idx];
        t.level_range(c.level())
            .filter(|&j| {
                let d = &t.cells()[j];
                !c.key.is_adjacent(&d.key)
                    && c.key
                        .parent()
                        .unwrap()
                        .is_adjacent(&d.key.parent().unwrap())
            })
            .collect()
    }

    #[test]
    fn single_body_single_leaf() {
        let t = build_tree(random_bodies(1, 1), &FmmConfig::new(3).with_ncrit(10), None).unwrap();
        assert_eq!(t.max_level(), 0);
        assert_eq!(t.len(), 1);
        assert!(t.cell(0).is_leaf);
        assert_eq!(t.cell(0).body_count, 1);
        assert_eq!(t.neighbor_list(0), vec![0]);
    }

    #[test]
    fn empty_input_rejected() {
        let err = build_tree(Bodies::default(), &FmmConfig::new(3), None).unwrap_err();
        assert_eq!(err, FmmError::EmptyInput);
    }

    #[test]
    fn body_outside_explicit_domain_rejected() {
        let b = Bodies::new(vec![[2.0, 0.0, 0.0]], vec![1.0]).unwrap();
        let d = Domain::new([0.0; 3], 1.0).unwrap();
        assert!(matches!(
            build_tree(b, &FmmConfig::new(3), Some(d)),
            Err(FmmError::OutsideDomain { .. })
        ));
    }

    #[test]
    fn depth_from_ncrit_and_structure() {
        let t = build_tree(
            random_bodies(8192, 2),
            &FmmConfig::new(3).with_ncrit(16),
            None,
        )
        .unwrap();
        assert_eq!(t.max_level(), 3);
        let occupancy: usize = t.leaves().iter().map(|c| c.body_count).sum();
        assert_eq!(occupancy, 8192);
        assert_eq!(t.level_range(0).len(), 1);

        let b = t.bodies();
        let mut seen = b.original_index.clone();
        seen.sort_unstable();
        assert!(seen.iter().enumerate().all(|(i, &v)| i == v));

        for (i, c) in t.cells().iter().enumerate() {
            let want_hw = t.domain().half_width() / (1u64 << c.level()) as f64;
            assert_eq!(c.half_width, want_hw);
            if let Some(p) = c.parent {
                assert_eq!(t.cell(p).level() + 1, c.level());
                assert!(t.cell(p).children().contains(&i));
                assert_eq!(c.key.parent().unwrap(), t.cell(p).key);
            }
            if !c.is_leaf {
                let sum: usize = c.children().map(|k| t.cell(k).body_count).sum();
                assert_eq!(sum, c.body_count);
                assert!(c.body_count > 0);
            }
        }
        // Bodies sit in their leaf and in ascending key order.
        for leaf in t.leaves() {
            for i in leaf.body_range() {
                let k =
                    crate::morton::point_to_key(b.position[i], t.domain(), t.max_level()).unwrap();
                assert_eq!(k, leaf.key);
            }
        }
    }

    #[test]
    fn leaf_ranges_partition_bodies() {
        let t = build_tree(
            random_bodies(20_000, 3),
            &FmmConfig::new(3).with_ncrit(8),
            None,
        )
        .unwrap();
        let mut ranges: Vec<_> = t.leaves().iter().map(|c| c.body_range()).collect();
        ranges.sort_by_key(|r| r.start);
        let mut next = 0;
        for r in ranges {
            assert_eq!(r.start, next);
            assert!(!r.is_empty());
            next = r.end;
        }
        assert_eq!(next, 20_000);
        assert_eq!(t.leaf_of_body(0), t.leaf_range().start);
        assert_eq!(t.leaf_of_body(19_999), t.leaf_range().end - 1);
    }

    #[test]
    fn neighbor_counts_on_full_grid() {
        let t = full_grid(2);
        assert_eq!(t.neighbor_list(0), vec![0]);
        assert_eq!(t.neighbor_list(find_anchor(&t, [1, 1, 1], 2)).len(), 27);
        assert_eq!(t.neighbor_list(find_anchor(&t, [0, 0, 0], 2)).len(), 8);
        assert_eq!(t.neighbor_list(find_anchor(&t, [3, 0, 0], 2)).len(), 8);
        assert_eq!(t.neighbor_list(find_anchor(&t, [1, 0, 0], 2)).len(), 12);
    }

    #[test]
    fn interaction_counts_on_full_grid() {
        let t = full_grid(2);
        // At level 2 every level-1 cell neighbors every other one, so the
        // list is all 64 cells minus the 3x3x3 (or clipped) neighborhood.
        let corner = find_anchor(&t, [0, 0, 0], 2);
        let interior = find_anchor(&t, [1, 1, 1], 2);
        assert_eq!(t.interaction_list(interior).unwrap().len(), 64 - 27);
        assert_eq!(t.interaction_list(corner).unwrap().len(), 64 - 8);
        for i in t.level_range(2) {
            assert_eq!(t.interaction_list(i).unwrap(), brute_interactions(&t, i));
        }
        assert!(matches!(
            t.interaction_list(0),
            Err(FmmError::LevelTooShallow { level: 0 })
        ));
        assert!(t.interaction_list(t.level_range(1).start).is_err());

        let t3 = full_grid(3);
        let central = find_anchor(&t3, [3, 3, 3], 3);
        assert_eq!(t3.interaction_list(central).unwrap().len(), 189);
        assert_eq!(brute_interactions(&t3, central).len(), 189);
    }

    #[test]
    fn isolated_cluster_has_no_interactions() {
        // Everything inside one level-1 octant: the occupied level-2 cells are
        // all siblings and mutually adjacent.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let pos: Vec<_> = (0..200)
            .map(|_| {
                [
                    rng.gen::<f64>() * 0.49,
                    rng.gen::<f64>() * 0.49,
                    rng.gen::<f64>() * 0.49,
                ]
            })
            .collect();
        let d = Domain::new([0.0; 3], 1.0).unwrap();
        let t = build_tree(
            Bodies::new(pos, vec![1.0; 200]).unwrap(),
            &FmmConfig::new(3).with_max_level(2),
            Some(d),
        )
        .unwrap();
        assert_eq!(t.level_range(1).len(), 1);
        for i in t.level_range(2) {
            assert!(t.interaction_list(i).unwrap().is_empty());
            assert_eq!(brute_interactions(&t, i), Vec::<usize>::new());
        }
    }

    #[test]
    fn lists_match_brute_force_on_random_trees() {
        for (seed, n, level) in [(5, 300, 3), (6, 2000, 4), (7, 50, 5)] {
            let t = build_tree(
                random_bodies(n, seed),
                &FmmConfig::new(3).with_max_level(level),
                None,
            )
            .unwrap();
            for i in 0..t.len() {
                let c = t.cell(i);
                let want: Vec<usize> = t
                    .level_range(c.level())
                    .filter(|&j| c.key.is_adjacent(&t.cell(j).key))
                    .collect();
                assert_eq!(t.neighbor_list(i), want);
                if c.level() >= 2 {
                    assert_eq!(t.interaction_list(i).unwrap(), brute_interactions(&t, i));
                }
            }
        }
    }

    #[test]
    fn sparse_levels_use_binary_search() {
        let t = build_tree(
            random_bodies(3000, 9),
            &FmmConfig::new(3).with_max_level(9),
            None,
        )
        .unwrap();
        for i in t.leaf_range() {
            let c = t.cell(i);
            assert_eq!(t.find(9, c.key.packed()), Some(i));
        }
        assert_eq!(t.find(10, 0), None);
    }
}
