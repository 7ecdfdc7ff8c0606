//! One result row, and how rows reach disk.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{self, Write};
use std::path::Path;

use fmm_core::{Phase, TimingBreakdown};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::spec::Format;

/// CSV header, in order.
pub const COLUMNS: [&str; 26] = [
    "n",
    "dist",
    "seed",
    "p",
    "ncrit",
    "level",
    "workers",
    "sim_ranks",
    "precision",
    "t_sort",
    "t_buildTree",
    "t_P2P",
    "t_P2M",
    "t_M2M",
    "t_M2L",
    "t_L2L",
    "t_L2P",
    "t_simSendP2P",
    "t_simSendM2L",
    "t_total",
    "err_l2",
    "err_targets",
    "p2p_pairs",
    "m2l_pairs",
    "bytes_p2p",
    "bytes_m2l",
];

/// A CSV row. Field order is the column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub n: usize,
    pub dist: String,
    pub seed: u64,
    pub p: usize,
    pub ncrit: Option<usize>,
    pub level: u32,
    pub workers: usize,
    pub sim_ranks: usize,
    pub precision: String,
    pub t_sort: f64,
    #[serde(rename = "t_buildTree")]
    pub t_build_tree: f64,
    #[serde(rename = "t_P2P")]
    pub t_p2p: f64,
    #[serde(rename = "t_P2M")]
    pub t_p2m: f64,
    #[serde(rename = "t_M2M")]
    pub t_m2m: f64,
    #[serde(rename = "t_M2L")]
    pub t_m2l: f64,
    #[serde(rename = "t_L2L")]
    pub t_l2l: f64,
    #[serde(rename = "t_L2P")]
    pub t_l2p: f64,
    #[serde(rename = "t_simSendP2P")]
    pub t_sim_send_p2p: f64,
    #[serde(rename = "t_simSendM2L")]
    pub t_sim_send_m2l: f64,
    pub t_total: f64,
    pub err_l2: Option<f64>,
    pub err_targets: Option<usize>,
    pub p2p_pairs: u64,
    pub m2l_pairs: u64,
    pub bytes_p2p: u64,
    pub bytes_m2l: u64,
}

impl Record {
    pub fn set_timing(&mut self, t: &TimingBreakdown) {
        self.t_sort = t.get(Phase::Sort);
        self.t_build_tree = t.get(Phase::BuildTree);
        self.t_p2p = t.get(Phase::P2P);
        self.t_p2m = t.get(Phase::P2M);
        self.t_m2m = t.get(Phase::M2M);
        self.t_m2l = t.get(Phase::M2L);
        self.t_l2l = t.get(Phase::L2L);
        self.t_l2p = t.get(Phase::L2P);
        self.t_sim_send_p2p = t.get(Phase::SimSendP2P);
        self.t_sim_send_m2l = t.get(Phase::SimSendM2L);
        self.t_total = t.total();
    }

    pub fn phase_seconds(&self) -> [(Phase, f64); 10] {
        [
            (Phase::Sort, self.t_sort),
            (Phase::BuildTree, self.t_build_tree),
            (Phase::P2P, self.t_p2p),
            (Phase::P2M, self.t_p2m),
            (Phase::M2M, self.t_m2m),
            (Phase::M2L, self.t_m2l),
            (Phase::L2L, self.t_l2l),
            (Phase::L2P, self.t_l2p),
            (Phase::SimSendP2P, self.t_sim_send_p2p),
            (Phase::SimSendM2L, self.t_sim_send_m2l),
        ]
    }
}

/// Per-rank row of a simulated distributed run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub rank: usize,
    pub bodies: usize,
    pub leaves: usize,
    #[serde(rename = "t_P2P")]
    pub t_p2p: f64,
    #[serde(rename = "t_M2L")]
    pub t_m2l: f64,
    pub t_total: f64,
    pub bytes_p2p: u64,
    pub bytes_m2l: u64,
}

/// Everything one run produced. The CSV carries only `record`; JSON carries
/// all of it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    #[serde(flatten)]
    pub record: Record,
    /// Seed of the target sample when the check was sampled.
    pub check_seed: Option<u64>,
    /// Phase times multiplied by the worker count, keyed by column name.
    pub times_workers: BTreeMap<String, f64>,
    /// For `sim_ranks > 1`: merged output bitwise equal to a serial run.
    pub serial_equivalent: Option<bool>,
    pub ranks: Vec<RankRow>,
}

/// Appends `reports` to `path` (stdout when `None`). A CSV header is written
/// only when the target is new or empty.
pub fn write_reports(path: Option<&Path>, format: Format, reports: &[Report]) -> Result<()> {
    match path {
        None => {
            let out = io::stdout();
            write_to(out.lock(), true, format, reports).map_err(|e| reattach(e, None))
        }
        Some(p) => {
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(p)
                .map_err(|e| BenchError::io(Some(p.to_path_buf()), e))?;
            let fresh = file
                .metadata()
                .map_err(|e| BenchError::io(Some(p.to_path_buf()), e))?
                .len()
                == 0;
            write_to(file, fresh, format, reports).map_err(|e| reattach(e, Some(p)))
        }
    }
}

fn reattach(e: BenchError, path: Option<&Path>) -> BenchError {
    match e {
        BenchError::Io { path: None, source } => {
            BenchError::io(path.map(Path::to_path_buf), source)
        }
        e => e,
    }
}

fn write_to<W: Write>(mut w: W, header: bool, format: Format, reports: &[Report]) -> Result<()> {
    match format {
        Format::Csv => {
            let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(w);
            if header {
                csv.write_record(COLUMNS)?;
            }
            for r in reports {
                csv.serialize(&r.record)?;
            }
            csv.flush().map_err(|e| BenchError::io(None, e))
        }
        Format::Json => {
            for r in reports {
                serde_json::to_writer(&mut w, r)?;
                w.write_all(b"\n").map_err(|e| BenchError::io(None, e))?;
            }
            w.flush().map_err(|e| BenchError::io(None, e))
        }
    }
}

/// Reads back a CSV written by [`write_reports`].
pub fn read_csv(path: &Path) -> Result<Vec<Record>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != COLUMNS {
        return Err(BenchError::Encode(format!("unexpected header {header:?}")));
    }
    r.deserialize()
        .map(|row| row.map_err(BenchError::from))
        .collect()
}
