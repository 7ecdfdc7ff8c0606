use std::collections::BTreeMap;

use fmm_core::kernels::direct_sum;
use fmm_core::{distributed_evaluate, fmm_evaluate, relative_l2_error, Bodies, FmmResult, Phase};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{BenchError, Result};
use crate::generate::generate;
use crate::record::{write_reports, RankRow, Record, Report};
use crate::spec::{Axis, BenchSpec, Check};

/// Seed of the sampled-target draw for a run generated from `seed`.
pub fn check_seed(seed: u64) -> u64 {
    seed.rotate_left(32) ^ 0x9e37_79b9_7f4a_7c15
}

/// `k` distinct target indices in `0..n`, ascending.
pub fn sample_targets(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = index::sample(&mut rng, n, k.min(n)).into_vec();
    t.sort_unstable();
    t
}

fn accuracy(
    bodies: &Bodies,
    result: &FmmResult,
    check: Check,
    seed: u64,
) -> Result<(Option<f64>, Option<usize>, Option<u64>)> {
    let (targets, cseed) = match check {
        Check::Off => return Ok((None, None, None)),
        Check::Sampled(k) => {
            let s = check_seed(seed);
            (Some(sample_targets(bodies.len(), k, s)), Some(s))
        }
        _ => (None, None),
    };
    let reference = direct_sum(&bodies.position, &bodies.charge, targets.as_deref());
    let approx: Vec<f64> = reference
        .targets
        .iter()
        .map(|&i| result.potential[i])
        .collect();
    let err = relative_l2_error(&approx, &reference.potential)?;
    Ok((Some(err), Some(reference.targets.len()), cseed))
}

/// Generates the bodies, evaluates them and measures the error.
pub fn run(spec: &BenchSpec) -> Result<Report> {
    spec.validate()?;
    let check = spec.resolved_check()?;
    let bodies = generate(spec.distribution, spec.n, spec.seed)?;
    let cfg = spec.config();
    let (result, ranks, bytes, serial_equivalent) = if spec.sim_ranks > 1 {
        let d = distributed_evaluate(bodies.clone(), &cfg, spec.sim_ranks)?;
        let serial = fmm_evaluate(bodies.clone(), &cfg)?;
        let same = serial.potential == d.result.potential && serial.force == d.result.force;
        let rows = d
            .ranks
            .iter()
            .map(|r| RankRow {
                rank: r.rank,
                bodies: r.bodies,
                leaves: r.leaves,
                t_p2p: r.timing.get(Phase::P2P),
                t_m2l: r.timing.get(Phase::M2L),
                t_total: r.timing.total(),
                bytes_p2p: r.stats.bytes_p2p,
                bytes_m2l: r.stats.bytes_m2l,
            })
            .collect();
        (
            d.result,
            rows,
            (d.comm.total_p2p, d.comm.total_m2l),
            Some(same),
        )
    } else {
        (
            fmm_evaluate(bodies.clone(), &cfg)?,
            Vec::new(),
            (0, 0),
            None,
        )
    };
    let (err_l2, err_targets, check_seed) = accuracy(&bodies, &result, check, spec.seed)?;
    let mut record = Record {
        n: spec.n,
        dist: spec.distribution.name().into(),
        seed: spec.seed,
        p: spec.p,
        ncrit: cfg.ncrit(),
        level: result.max_level,
        workers: spec.workers,
        sim_ranks: spec.sim_ranks,
        precision: spec.precision.name().into(),
        t_sort: 0.0,
        t_build_tree: 0.0,
        t_p2p: 0.0,
        t_p2m: 0.0,
        t_m2m: 0.0,
        t_m2l: 0.0,
        t_l2l: 0.0,
        t_l2p: 0.0,
        t_sim_send_p2p: 0.0,
        t_sim_send_m2l: 0.0,
        t_total: 0.0,
        err_l2,
        err_targets,
        p2p_pairs: result.diagnostics.p2p_pairs,
        m2l_pairs: result.diagnostics.m2l_pairs,
        bytes_p2p: bytes.0,
        bytes_m2l: bytes.1,
    };
    record.set_timing(&result.timing);
    let k = spec.workers as f64;
    let mut times_workers: BTreeMap<String, f64> = record
        .phase_seconds()
        .iter()
        .map(|(ph, s)| (format!("t_{}", ph.name()), s * k))
        .collect();
    times_workers.insert("t_total".into(), record.t_total * k);
    Ok(Report {
        record,
        check_seed,
        times_workers,
        serial_equivalent,
        ranks,
    })
}

/// Fails with [`BenchError::Assertion`] unless the measured error is below `limit`.
pub fn assert_error_below(report: &Report, limit: f64) -> Result<()> {
    match report.record.err_l2 {
        None => Err(BenchError::Usage(
            "--assert-error-below needs a check other than off".into(),
        )),
        Some(e) if e < limit => Ok(()),
        Some(e) => Err(BenchError::Assertion { error: e, limit }),
    }
}

/// `template` with the `axis` field set to `value`. With `weak`, a ranks or
/// workers sweep scales `n` by the value, keeping the load per unit fixed.
pub fn point(template: &BenchSpec, axis: Axis, value: u64, weak: bool) -> Result<BenchSpec> {
    let v = usize::try_from(value)
        .map_err(|_| BenchError::Usage(format!("value {value} too large")))?;
    let mut s = template.clone();
    match axis {
        Axis::Workers => s.workers = v,
        Axis::Ranks => s.sim_ranks = v,
        Axis::N => s.n = v,
        Axis::P => s.p = v,
    }
    if weak && matches!(axis, Axis::Workers | Axis::Ranks) {
        s.n = template.n * v;
    }
    s.validate()?;
    Ok(s)
}

/// Runs the points one after another, appending each record as it finishes.
/// An assertion failure is reported after the whole sweep has run.
pub fn sweep(
    template: &BenchSpec,
    axis: Axis,
    values: &[u64],
    weak: bool,
    limit: Option<f64>,
) -> Result<Vec<Report>> {
    if values.is_empty() {
        return Err(BenchError::Usage("sweep needs at least one value".into()));
    }
    let specs = values
        .iter()
        .map(|&v| point(template, axis, v, weak))
        .collect::<Result<Vec<_>>>()?;
    let mut reports = Vec::with_capacity(specs.len());
    let mut failed = None;
    for s in &specs {
        let r = run(s)?;
        write_reports(s.out.as_deref(), s.format, std::slice::from_ref(&r))?;
        if let Some(l) = limit {
            if let Err(e) = assert_error_below(&r, l) {
                failed.get_or_insert(e);
            }
        }
        reports.push(r);
    }
    match failed {
        Some(e) => Err(e),
        None => Ok(reports),
    }
}

/// Strong-scaling efficiency `t_1 / (k t_k)` of each point against the first.
pub fn efficiency(reports: &[Report], seconds: impl Fn(&Record) -> f64) -> Vec<f64> {
    let Some(first) = reports.first() else {
        return Vec::new();
    };
    let t1 = seconds(&first.record) * first.record.workers as f64;
    reports
        .iter()
        .map(|r| t1 / (r.record.workers as f64 * seconds(&r.record)))
        .collect()
}
