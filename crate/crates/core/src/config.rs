use crate::error::{FmmError, Result};
use crate::morton::MAX_LEVEL;

/// Leaf target when the near field runs in double precision.
pub const DEFAULT_NCRIT_DOUBLE: usize = 64;
/// Leaf target when the batched single-precision near field is active; the
/// cheaper P2P pays for a shallower tree.
pub const DEFAULT_NCRIT_SINGLE: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Precision {
    /// Everything in `f64`, scalar near field.
    #[default]
    Double,
    /// Near field through the batched `f32` kernel; expansions stay `f64`.
    SingleNearField,
}

impl Precision {
    pub fn name(&self) -> &'static str {
        match self {
            Precision::Double => "double",
            Precision::SingleNearField => "single",
        }
    }
}

/// What fixes the uniform tree depth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TreeDepth {
    /// Default leaf target for the chosen precision.
    #[default]
    Auto,
    /// `max_level = max(0, ceil(log8(N / ncrit)))`.
    Ncrit(usize),
    /// Prescribed maximum level.
    MaxLevel(u32),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FmmConfig {
    /// Truncation order: degrees `0..order` are kept.
    pub order: usize,
    pub depth: TreeDepth,
    pub precision: Precision,
    pub workers: usize,
}

impl Default for FmmConfig {
    fn default() -> Self {
        Self {
            order: 3,
            depth: TreeDepth::Auto,
            precision: Precision::Double,
            workers: 1,
        }
    }
}

impl FmmConfig {
    pub fn new(order: usize) -> Self {
        Self {
            order,
            ..Self::default()
        }
    }

    pub fn with_ncrit(mut self, ncrit: usize) -> Self {
        self.depth = TreeDepth::Ncrit(ncrit);
        self
    }

    pub fn with_max_level(mut self, level: u32) -> Self {
        self.depth = TreeDepth::MaxLevel(level);
        self
    }

    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(FmmError::InvalidConfig(
                "expansion order must be >= 1".into(),
            ));
        }
        if self.workers == 0 {
            return Err(FmmError::InvalidConfig("worker count must be >= 1".into()));
        }
        match self.depth {
            TreeDepth::Ncrit(0) => Err(FmmError::InvalidConfig("ncrit must be >= 1".into())),
            TreeDepth::MaxLevel(l) if l > MAX_LEVEL => Err(FmmError::DepthTooLarge {
                requested: l,
                max: MAX_LEVEL,
            }),
            _ => Ok(()),
        }
    }

    pub fn ncrit(&self) -> Option<usize> {
        match self.depth {
            TreeDepth::Auto => Some(match self.precision {
                Precision::Double => DEFAULT_NCRIT_DOUBLE,
                Precision::SingleNearField => DEFAULT_NCRIT_SINGLE,
            }),
            TreeDepth::Ncrit(n) => Some(n),
            TreeDepth::MaxLevel(_) => None,
        }
    }

    /// Uniform depth for `n` bodies.
    pub fn max_level(&self, n: usize) -> Result<u32> {
        self.validate()?;
        let level = match self.depth {
            TreeDepth::MaxLevel(l) => l,
            _ => depth_for(n, self.ncrit().unwrap_or(DEFAULT_NCRIT_DOUBLE)),
        };
        if level > MAX_LEVEL {
            return Err(FmmError::DepthTooLarge {
                requested: level,
                max: MAX_LEVEL,
            });
        }
        Ok(level)
    }
}

/// Smallest `L >= 0` with `ncrit * 8^L >= n`, i.e. `ceil(log8(n / ncrit))`.
pub fn depth_for(n: usize, ncrit: usize) -> u32 {
    let mut level = 0u32;
    let mut capacity = ncrit as u128;
    while capacity < n as u128 {
        capacity *= 8;
        level += 1;
    }
    level
}
