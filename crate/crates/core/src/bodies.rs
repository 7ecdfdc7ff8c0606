use crate::error::{FmmError, Result};

/// Axis-aligned cube `[min, min + width)^3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Domain {
    pub min: [f64; 3],
    pub width: f64,
}

/// Relative margin added around the tight bounding cube.
const AUTO_MARGIN: f64 = 1e-6;

impl Domain {
    pub fn new(min: [f64; 3], width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) || min.iter().any(|c| !c.is_finite()) {
            return Err(FmmError::InvalidConfig(format!(
                "domain needs finite min and positive width, got {min:?} / {width}"
            )));
        }
        Ok(Self { min, width })
    }

    /// Tight bounding cube of `positions`, grown by a small relative margin
    /// so that points on the upper faces fall inside the half-open cube.
    pub fn enclosing(positions: &[[f64; 3]]) -> Result<Self> {
        if positions.is_empty() {
            return Err(FmmError::EmptyInput);
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in positions {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let extent = (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
        if !extent.is_finite() {
            return Err(FmmError::InvalidConfig("non-finite body position".into()));
        }
        let scale = lo
            .iter()
            .chain(hi.iter())
            .fold(0.0f64, |m, c| m.max(c.abs()))
            .max(1.0);
        let base = if extent > 0.0 { extent } else { scale * 1e-3 };
        let width = base * (1.0 + 2.0 * AUTO_MARGIN);
        let min = std::array::from_fn(|k| 0.5 * (lo[k] + hi[k]) - 0.5 * width);
        Self::new(min, width)
    }

    #[inline]
    pub fn half_width(&self) -> f64 {
        0.5 * self.width
    }

    pub fn contains(&self, p: [f64; 3]) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] < self.min[k] + self.width)
    }

    /// Integer anchor of the level-`level` grid cell holding `p` (assumed inside).
    #[inline]
    pub(crate) fn grid_anchor(&self, p: [f64; 3], level: u32) -> [u32; 3] {
        let cells = (1u64 << level) as f64;
        let top = (1u64 << level) - 1;
        std::array::from_fn(|k| {
            let t = (p[k] - self.min[k]) / self.width * cells;
            (t.floor().max(0.0) as u64).min(top) as u32
        })
    }

    /// Geometric center of the cell with integer anchor `anchor` at `level`.
    pub fn cell_center(&self, anchor: [u32; 3], level: u32) -> [f64; 3] {
        let h = self.width / (1u64 << level) as f64;
        std::array::from_fn(|k| self.min[k] + (f64::from(anchor[k]) + 0.5) * h)
    }
}

/// Particle set stored field by field.
///
/// `potential` and `force` are accumulators; `force` holds `q_i * (-grad phi)`
/// so that like charges push each other apart.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bodies {
    pub position: Vec<[f64; 3]>,
    pub charge: Vec<f64>,
    pub potential: Vec<f64>,
    pub force: Vec<[f64; 3]>,
    /// Index of each body in the caller's original ordering.
    pub original_index: Vec<usize>,
}

impl Bodies {
    pub fn new(position: Vec<[f64; 3]>, charge: Vec<f64>) -> Result<Self> {
        if position.len() != charge.len() {
            return Err(FmmError::LengthMismatch {
                expected: position.len(),
                found: charge.len(),
            });
        }
        let n = position.len();
        Ok(Self {
            position,
            charge,
            potential: vec![0.0; n],
            force: vec![[0.0; 3]; n],
            original_index: (0..n).collect(),
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.position.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.position.is_empty()
    }

    pub fn clear_accumulators(&mut self) {
        self.potential.iter_mut().for_each(|v| *v = 0.0);
        self.force.iter_mut().for_each(|f| *f = [0.0; 3]);
    }

    /// Reorders every field so that new slot `i` holds old body `order[i]`.
    pub(crate) fn permute(&mut self, order: &[usize]) {
        debug_assert_eq!(order.len(), self.len());
        self.position = order.iter().map(|&i| self.position[i]).collect();
        self.charge = order.iter().map(|&i| self.charge[i]).collect();
        self.potential = order.iter().map(|&i| self.potential[i]).collect();
        self.force = order.iter().map(|&i| self.force[i]).collect();
        self.original_index = order.iter().map(|&i| self.original_index[i]).collect();
    }

    pub fn total_charge(&self) -> f64 {
        self.charge.iter().sum()
    }
}
