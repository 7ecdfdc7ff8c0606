//! Fast multipole method for the 3D Laplace kernel `q / r`.
//!
//! Bodies are sorted along a Morton curve into a uniform-depth octree; far
//! interactions go through truncated spherical-harmonic expansions and near
//! interactions are summed directly. Every phase runs on a fixed worker pool
//! with gather-only writes, so results are identical for any worker count.

pub mod bodies;
pub mod config;
pub mod error;
pub mod evaluator;
pub mod harmonics;
pub mod kernels;
pub mod morton;
pub mod parallel;
pub mod partition;
pub mod timing;
pub mod tree;

pub use bodies::{Bodies, Domain};
pub use config::{depth_for, FmmConfig, Precision, TreeDepth};
pub use error::{ErrorKind, FmmError, Result};
pub use evaluator::{
    downward_sweep, evaluate_tree, fmm_evaluate, near_field, relative_l2_error, transfer_m2l,
    transfer_m2l_levels, upward_sweep, Diagnostics, Expansions, FmmResult, TreeEvaluation,
};
pub use morton::{morton_decode, morton_encode, point_to_key, MortonKey, MAX_LEVEL};
pub use parallel::WorkerPool;
pub use partition::{
    build_let, comm_stats, distributed_evaluate, distributed_evaluate_with, partition,
    partition_with, simulate, Balance, CommStats, CommSummary, DistributedResult, LetManifest,
    RankPartition, RankReport,
};
pub use timing::{Phase, TimingBreakdown};
pub use tree::{build_tree, Cell, Tree};
