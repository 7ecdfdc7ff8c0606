//! Morton (Z-order) keys for a uniform octree.
//!
//! Bits are interleaved most significant first with the axis order `z, y, x`
//! inside every 3-bit group, so the packed value of a level-`l` cell is
//!
//! ```text
//! packed = sum_b (z_b << 2 | y_b << 1 | x_b) << 3b,   b = 0..l
//! ```
//!
//! The packed value alone does not identify a cell; the level is carried
//! alongside it. A child's packed key is its parent's shifted left by three
//! bits plus the octant.

use crate::bodies::Domain;
use crate::error::{FmmError, Result};

/// Deepest level representable in a 64-bit packed key.
pub const MAX_LEVEL: u32 = 21;

/// Cell identifier: level, integer anchor and interleaved key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MortonKey {
    level: u8,
    packed: u64,
    anchor: [u32; 3],
}

#[inline]
fn spread3(v: u32) -> u64 {
    let mut x = u64::from(v) & 0x1f_ffff;
    x = (x | (x << 32)) & 0x001f_0000_0000_ffff;
    x = (x | (x << 16)) & 0x001f_0000_ff00_00ff;
    x = (x | (x << 8)) & 0x100f_00f0_0f00_f00f;
    x = (x | (x << 4)) & 0x10c3_0c30_c30c_30c3;
    x = (x | (x << 2)) & 0x1249_2492_4924_9249;
    x
}

#[inline]
fn compact3(v: u64) -> u32 {
    let mut x = v & 0x1249_2492_4924_9249;
    x = (x | (x >> 2)) & 0x10c3_0c30_c30c_30c3;
    x = (x | (x >> 4)) & 0x100f_00f0_0f00_f00f;
    x = (x | (x >> 8)) & 0x001f_0000_ff00_00ff;
    x = (x | (x >> 16)) & 0x001f_0000_0000_ffff;
    x = (x | (x >> 32)) & 0x1f_ffff;
    x as u32
}

impl MortonKey {
    /// Key of the cell with anchor `(ix, iy, iz)` at `level`.
    pub fn encode(ix: u32, iy: u32, iz: u32, level: u32) -> Result<Self> {
        let out_of_range =
            level > MAX_LEVEL || [ix, iy, iz].iter().any(|&c| u64::from(c) >> level != 0);
        if out_of_range {
            return Err(FmmError::InvalidKey {
                level,
                anchor: [ix.into(), iy.into(), iz.into()],
            });
        }
        Ok(Self::new_unchecked([ix, iy, iz], level as u8))
    }

    /// Inverse of [`MortonKey::encode`]; rejects bits above `3 * level`.
    pub fn from_packed(packed: u64, level: u32) -> Result<Self> {
        if level > MAX_LEVEL || packed >> (3 * level) != 0 {
            return Err(FmmError::MalformedKey { level, packed });
        }
        let anchor = [
            compact3(packed),
            compact3(packed >> 1),
            compact3(packed >> 2),
        ];
        Ok(Self {
            level: level as u8,
            packed,
            anchor,
        })
    }

    pub(crate) fn new_unchecked(anchor: [u32; 3], level: u8) -> Self {
        let packed = spread3(anchor[0]) | spread3(anchor[1]) << 1 | spread3(anchor[2]) << 2;
        Self {
            level,
            packed,
            anchor,
        }
    }

    pub fn root() -> Self {
        Self {
            level: 0,
            packed: 0,
            anchor: [0; 3],
        }
    }

    #[inline]
    pub fn level(&self) -> u32 {
        u32::from(self.level)
    }

    #[inline]
    pub fn packed(&self) -> u64 {
        self.packed
    }

    #[inline]
    pub fn anchor(&self) -> [u32; 3] {
        self.anchor
    }

    /// `(level, ix, iy, iz)`.
    pub fn decode(&self) -> (u32, u32, u32, u32) {
        (self.level(), self.anchor[0], self.anchor[1], self.anchor[2])
    }

    pub fn parent(&self) -> Option<Self> {
        (self.level > 0).then(|| Self {
            level: self.level - 1,
            packed: self.packed >> 3,
            anchor: self.anchor.map(|a| a >> 1),
        })
    }

    /// Octant of this cell inside its parent (the low three key bits).
    #[inline]
    pub fn octant(&self) -> u8 {
        (self.packed & 7) as u8
    }

    pub fn child(&self, octant: u8) -> Self {
        debug_assert!(octant < 8 && u32::from(self.level) < MAX_LEVEL);
        let o = u32::from(octant);
        Self {
            level: self.level + 1,
            packed: self.packed << 3 | u64::from(octant),
            anchor: [
                self.anchor[0] << 1 | (o & 1),
                self.anchor[1] << 1 | (o >> 1 & 1),
                self.anchor[2] << 1 | (o >> 2 & 1),
            ],
        }
    }

    /// Same-level cells sharing at least a vertex (or identical).
    #[inline]
    pub fn is_adjacent(&self, other: &MortonKey) -> bool {
        self.level == other.level
            && self
                .anchor
                .iter()
                .zip(other.anchor.iter())
                .all(|(&a, &b)| a.abs_diff(b) <= 1)
    }
}

pub fn morton_encode(ix: u32, iy: u32, iz: u32, level: u32) -> Result<MortonKey> {
    MortonKey::encode(ix, iy, iz, level)
}

pub fn morton_decode(packed: u64, level: u32) -> Result<(u32, u32, u32, u32)> {
    MortonKey::from_packed(packed, level).map(|k| k.decode())
}

/// Key of the level-`level` cell containing `position`.
///
/// Cells are half-open: a point on an internal face belongs to the cell on
/// the high side. Points on the domain's upper faces are outside.
pub fn point_to_key(position: [f64; 3], domain: &Domain, level: u32) -> Result<MortonKey> {
    if level > MAX_LEVEL {
        return Err(FmmError::DepthTooLarge {
            requested: level,
            max: MAX_LEVEL,
        });
    }
    if !domain.contains(position) {
        return Err(FmmError::OutsideDomain { position });
    }
    Ok(MortonKey::new_unchecked(
        domain.grid_anchor(position, level),
        level as u8,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Bit-by-bit interleave, independent of the magic-number spreading.
    fn loop_interleave(ix: u32, iy: u32, iz: u32, level: u32) -> u64 {
        let mut key = 0u64;
        for b in (0..level).rev() {
            let triple = (u64::from(iz >> b & 1) << 2)
                | (u64::from(iy >> b & 1) << 1)
                | u64::from(ix >> b & 1);
            key = key << 3 | triple;
        }
        key
    }

    #[test]
    fn encode_examples() {
        for level in 0..=MAX_LEVEL {
            assert_eq!(MortonKey::encode(0, 0, 0, level).unwrap().packed(), 0);
        }
        assert_eq!(MortonKey::encode(1, 1, 1, 1).unwrap().packed(), 7);
        assert_eq!(loop_interleave(1, 2, 3, 2), 53);
        assert_eq!(MortonKey::encode(1, 2, 3, 2).unwrap().packed(), 53);
    }

    #[test]
    fn decode_examples() {
        let k = MortonKey::encode(5, 0, 2, 3).unwrap();
        assert_eq!(k.decode(), (3, 5, 0, 2));
        assert_eq!(morton_decode(0, 0).unwrap(), (0, 0, 0, 0));
        assert_eq!(morton_decode(53, 2).unwrap(), (2, 1, 2, 3));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(MortonKey::encode(4, 0, 0, 2).is_err());
        assert!(MortonKey::encode(0, 0, 0, 22).is_err());
        assert!(morton_decode(64, 2).is_err());
        assert!(morton_decode(0, 22).is_err());
        let max = (1u32 << 21) - 1;
        let k = MortonKey::encode(max, max, max, 21).unwrap();
        assert_eq!(k.packed(), (1u64 << 63) - 1);
        assert_eq!(morton_decode(k.packed(), 21).unwrap(), (21, max, max, max));
    }

    #[test]
    fn parent_child_relation() {
        let k = MortonKey::encode(5, 6, 7, 3).unwrap();
        for o in 0..8 {
            let c = k.child(o);
            assert_eq!(c.parent().unwrap(), k);
            assert_eq!(c.octant(), o);
            assert_eq!(c.anchor().map(|a| a >> 1), k.anchor());
            assert_eq!(MortonKey::from_packed(c.packed(), 4).unwrap(), c);
        }
        assert!(MortonKey::root().parent().is_none());
    }

    #[test]
    fn point_to_key_boundaries() {
        let d = Domain::new([0.0; 3], 1.0).unwrap();
        let k = point_to_key([0.5, 0.5, 0.5], &d, 1).unwrap();
        assert_eq!(k.anchor(), [1, 1, 1]);
        for level in 0..8 {
            assert_eq!(point_to_key([0.0; 3], &d, level).unwrap().packed(), 0);
        }
        assert!(point_to_key([1.0, 0.2, 0.2], &d, 2).is_err());
        assert!(point_to_key([-1e-300, 0.2, 0.2], &d, 2).is_err());
    }

    #[test]
    fn point_to_key_matches_integer_grid() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let d = Domain::new([0.0; 3], 1.0).unwrap();
        // Dyadic coordinates are exact in binary floating point, so the
        // integer shift below is an exact oracle for the grid cell.
        const BITS: u32 = 20;
        for _ in 0..1000 {
            let g: [u32; 3] = std::array::from_fn(|_| rng.gen_range(0..1u32 << BITS));
            let pos = g.map(|c| f64::from(c) / f64::from(1u32 << BITS));
            for level in [0, 1, 3, 7, 12, 20] {
                let k = point_to_key(pos, &d, level).unwrap();
                let want = g.map(|c| c >> (BITS - level));
                assert_eq!(k.anchor(), want);
                assert_eq!(
                    k.packed(),
                    loop_interleave(want[0], want[1], want[2], level)
                );
            }
        }
    }

    proptest! {
        #[test]
        fn roundtrip(level in 0u32..=21, a in any::<u32>(), b in any::<u32>(), c in any::<u32>()) {
            let mask = if level == 0 { 0 } else { u32::MAX >> (32 - level) };
            let (ix, iy, iz) = (a & mask, b & mask, c & mask);
            let k = MortonKey::encode(ix, iy, iz, level).unwrap();
            prop_assert_eq!(k.packed(), loop_interleave(ix, iy, iz, level));
            prop_assert_eq!(morton_decode(k.packed(), level).unwrap(), (level, ix, iy, iz));
        }

        #[test]
        fn same_level_order_is_interleaved_order(level in 1u32..=10, a in any::<[u32; 3]>(), b in any::<[u32; 3]>()) {
            let mask = u32::MAX >> (32 - level);
            let ka = MortonKey::encode(a[0] & mask, a[1] & mask, a[2] & mask, level).unwrap();
            let kb = MortonKey::encode(b[0] & mask, b[1] & mask, b[2] & mask, level).unwrap();
            // Compare the interleaved bit strings triple by triple from the top.
            let bits = |k: &MortonKey| -> Vec<u64> {
                (0..level).rev().map(|i| k.packed() >> (3 * i) & 7).collect()
            };
            prop_assert_eq!(ka.packed().cmp(&kb.packed()), bits(&ka).cmp(&bits(&kb)));
        }
    }
}
