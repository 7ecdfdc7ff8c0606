//! Fixed-size worker pool running the outermost loop of each phase.
//!
//! Work items own disjoint pieces of the output, so items can be handed out
//! in contiguous chunks with no locking, and the result does not depend on
//! how the chunks are scheduled.

use std::ops::Range;

use rayon::prelude::*;

use crate::error::{FmmError, Result};

/// Chunks handed out per worker; more than one smooths out uneven items.
const CHUNKS_PER_WORKER: usize = 4;

pub struct WorkerPool {
    workers: usize,
    pool: Option<rayon::ThreadPool>,
}

impl WorkerPool {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(FmmError::InvalidConfig("worker count must be >= 1".into()));
        }
        let pool = if workers > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .thread_name(|i| format!("fmm-worker-{i}"))
                .build()
                .map_err(|e| FmmError::InvalidConfig(format!("cannot start worker pool: {e}")))?;
            Some(pool)
        } else {
            None
        };
        Ok(Self { workers, pool })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    fn chunk_bounds(&self, items: usize) -> Vec<usize> {
        let chunks = if self.workers == 1 {
            1
        } else {
            (self.workers * CHUNKS_PER_WORKER).min(items).max(1)
        };
        (0..=chunks).map(|c| c * items / chunks).collect()
    }

    /// Item `i` owns `out[i * stride..(i + 1) * stride]`. `f(items, chunk)`
    /// receives a contiguous item range and the matching output slice.
    pub fn parallel_apply<T, F>(&self, out: &mut [T], stride: usize, f: F)
    where
        T: Send,
        F: Fn(Range<usize>, &mut [T]) + Sync,
    {
        let items = if stride == 0 { 0 } else { out.len() / stride };
        if items == 0 {
            return;
        }
        let bounds = self.chunk_bounds(items);
        let pieces = split_at_bounds(out, &bounds.iter().map(|b| b * stride).collect::<Vec<_>>());
        self.run(
            bounds.windows(2).map(|w| w[0]..w[1]).zip(pieces).collect(),
            |(r, s)| f(r, s),
        );
    }

    /// Variable-size items: item `i` owns elements `bounds[i]..bounds[i + 1]`
    /// (relative to `bounds[0]`) of both `a` and `b`.
    pub fn parallel_apply_ranges<A, B, F>(&self, bounds: &[usize], a: &mut [A], b: &mut [B], f: F)
    where
        A: Send,
        B: Send,
        F: Fn(Range<usize>, &mut [A], &mut [B]) + Sync,
    {
        let items = bounds.len().saturating_sub(1);
        if items == 0 {
            return;
        }
        let base = bounds[0];
        let chunk_items = self.chunk_bounds(items);
        let element_bounds: Vec<usize> = chunk_items.iter().map(|&i| bounds[i] - base).collect();
        let pa = split_at_bounds(a, &element_bounds);
        let pb = split_at_bounds(b, &element_bounds);
        let work: Vec<_> = chunk_items
            .windows(2)
            .map(|w| w[0]..w[1])
            .zip(pa.into_iter().zip(pb))
            .collect();
        self.run(work, |(r, (sa, sb))| f(r, sa, sb));
    }

    fn run<W: Send>(&self, work: Vec<W>, f: impl Fn(W) + Sync) {
        match &self.pool {
            Some(pool) => pool.install(|| work.into_par_iter().for_each(&f)),
            None => work.into_iter().for_each(f),
        }
    }
}

/// Splits `data` into `bounds.len() - 1` consecutive pieces
/// `bounds[i]..bounds[i + 1]`; `bounds` starts at 0 and is non-decreasing.
fn split_at_bounds<'a, T>(mut data: &'a mut [T], bounds: &[usize]) -> Vec<&'a mut [T]> {
    let mut out = Vec::with_capacity(bounds.len().saturating_sub(1));
    for w in bounds.windows(2) {
        let (head, tail) = std::mem::take(&mut data).split_at_mut(w[1] - w[0]);
        out.push(head);
        data = tail;
    }
    out
}
