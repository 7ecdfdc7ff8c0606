//! Benchmark harness for `fmm-core`: body generation, accuracy checks,
//! worker/rank/size/order sweeps and per-phase timing export.

pub mod error;
pub mod generate;
pub mod record;
pub mod run;
pub mod spec;

pub use error::{BenchError, Result};
pub use generate::{generate, Distribution};
pub use record::{read_csv, write_reports, RankRow, Record, Report, COLUMNS};
pub use run::{assert_error_below, check_seed, efficiency, point, run, sample_targets, sweep};
pub use spec::{
    parse_precision, Axis, BenchSpec, Check, Format, DEFAULT_SAMPLES, FULL_CHECK_LIMIT,
};
