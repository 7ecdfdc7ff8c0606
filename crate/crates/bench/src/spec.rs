use std::path::PathBuf;
use std::str::FromStr;

use fmm_core::{FmmConfig, Precision};

use crate::error::{BenchError, Result};
use crate::generate::Distribution;

/// Above this size a full O(N^2) reference needs `allow_full`.
pub const FULL_CHECK_LIMIT: usize = 100_000;
/// Targets sampled when the check is left on `auto` for large runs.
pub const DEFAULT_SAMPLES: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Check {
    Off,
    /// Full for `n <= FULL_CHECK_LIMIT`, otherwise `Sampled(DEFAULT_SAMPLES)`.
    Auto,
    Sampled(usize),
    Full,
}

impl FromStr for Check {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" => Ok(Check::Off),
            "auto" => Ok(Check::Auto),
            "full" => Ok(Check::Full),
            _ => match s.strip_prefix("sampled:").map(str::parse) {
                Some(Ok(k)) if k > 0 => Ok(Check::Sampled(k)),
                _ => Err(BenchError::Usage(format!(
                    "bad check `{s}` (off, auto, full, sampled:<k>)"
                ))),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    /// One JSON object per line.
    Json,
}

impl FromStr for Format {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(BenchError::Usage(format!("bad format `{s}` (csv, json)"))),
        }
    }
}

pub fn parse_precision(s: &str) -> Result<Precision> {
    match s {
        "double" => Ok(Precision::Double),
        "single" => Ok(Precision::SingleNearField),
        _ => Err(BenchError::Usage(format!(
            "bad precision `{s}` (double, single)"
        ))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Workers,
    Ranks,
    N,
    P,
}

impl FromStr for Axis {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "workers" => Ok(Axis::Workers),
            "ranks" | "sim_ranks" => Ok(Axis::Ranks),
            "n" => Ok(Axis::N),
            "p" => Ok(Axis::P),
            _ => Err(BenchError::Usage(format!(
                "bad axis `{s}` (workers, ranks, n, p)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchSpec {
    pub n: usize,
    pub distribution: Distribution,
    pub seed: u64,
    pub p: usize,
    /// Leaf target; ignored when `level` is set.
    pub ncrit: Option<usize>,
    pub level: Option<u32>,
    pub workers: usize,
    pub sim_ranks: usize,
    pub precision: Precision,
    pub check: Check,
    pub allow_full: bool,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            n: 10_000,
            distribution: Distribution::CubeUniform,
            seed: 42,
            p: 3,
            ncrit: None,
            level: None,
            workers: 1,
            sim_ranks: 1,
            precision: Precision::Double,
            check: Check::Auto,
            allow_full: false,
            out: None,
            format: Format::Csv,
        }
    }
}

impl BenchSpec {
    pub fn config(&self) -> FmmConfig {
        let cfg = FmmConfig::new(self.p)
            .with_workers(self.workers)
            .with_precision(self.precision);
        match (self.level, self.ncrit) {
            (Some(l), _) => cfg.with_max_level(l),
            (None, Some(c)) => cfg.with_ncrit(c),
            (None, None) => cfg,
        }
    }

    /// The check that will actually run.
    pub fn resolved_check(&self) -> Result<Check> {
        match self.check {
            Check::Auto if self.n <= FULL_CHECK_LIMIT => Ok(Check::Full),
            Check::Auto => Ok(Check::Sampled(DEFAULT_SAMPLES)),
            Check::Full if self.n > FULL_CHECK_LIMIT && !self.allow_full => {
                Err(BenchError::Usage(format!(
                    "check=full on n={} exceeds {FULL_CHECK_LIMIT}; pass --allow-full to force it",
                    self.n
                )))
            }
            c => Ok(c),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.sim_ranks == 0 {
            return Err(BenchError::Usage("n and sim_ranks must be >= 1".into()));
        }
        self.config().validate()?;
        self.resolved_check().map(|_| ())
    }
}
