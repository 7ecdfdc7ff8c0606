//! Direct particle-particle interaction.
//!
//! Every routine here is gather-only: targets own their accumulators and
//! sources are never written. Accumulated "field" is `-grad phi`, i.e.
//! `sum_j q_j (x_i - x_j) / r_ij^3`; callers scale it by the target charge to
//! get a force. Pairs at zero separation are skipped and counted (this
//! includes a body meeting itself). NaN inputs propagate into the outputs.

use rayon::prelude::*;

use crate::error::{FmmError, Result};

/// Target lanes per vector block in the batched kernel.
pub const LANES: usize = 16;

/// Scalar double-precision P2P. Accumulates in source order into the running
/// sums `potential` / `field`; returns the number of zero-distance pairs.
pub fn p2p_into(
    targets: &[[f64; 3]],
    sources: &[[f64; 3]],
    charges: &[f64],
    potential: &mut [f64],
    field: &mut [[f64; 3]],
) -> u64 {
    let mut zeros = 0;
    for (i, t) in targets.iter().enumerate() {
        let mut phi = potential[i];
        let mut f = field[i];
        for (s, &q) in sources.iter().zip(charges) {
            let dx = t[0] - s[0];
            let dy = t[1] - s[1];
            let dz = t[2] - s[2];
            let r2 = dx * dx + dy * dy + dz * dz;
            if r2 != 0.0 {
                let inv = 1.0 / r2.sqrt();
                let qinv = q * inv;
                phi += qinv;
                let qinv3 = qinv * inv * inv;
                f[0] += qinv3 * dx;
                f[1] += qinv3 * dy;
                f[2] += qinv3 * dz;
            } else {
                zeros += 1;
            }
        }
        potential[i] = phi;
        field[i] = f;
    }
    zeros
}

/// Potentials and forces from exact pairwise summation.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectResult {
    /// Target indices the rows below belong to.
    pub targets: Vec<usize>,
    pub potential: Vec<f64>,
    /// `q_i * (-grad phi_i)`.
    pub force: Vec<[f64; 3]>,
}

/// O(N * |targets|) reference in double precision, summing sources in
/// ascending index order. `targets = None` means every body.
pub fn direct_sum(
    positions: &[[f64; 3]],
    charges: &[f64],
    targets: Option<&[usize]>,
) -> DirectResult {
    let targets: Vec<usize> = match targets {
        Some(t) => t.to_vec(),
        None => (0..positions.len()).collect(),
    };
    let rows: Vec<(f64, [f64; 3])> = targets
        .par_iter()
        .map(|&i| {
            let mut phi = [0.0];
            let mut f = [[0.0; 3]];
            p2p_into(&positions[i..=i], positions, charges, &mut phi, &mut f);
            let q = charges[i];
            (phi[0], f[0].map(|c| q * c))
        })
        .collect();
    let (potential, force) = rows.into_iter().unzip();
    DirectResult {
        targets,
        potential,
        force,
    }
}

/// Structure-of-arrays single-precision interaction block.
///
/// Targets and sources sit in separate coordinate streams; outputs are
/// accumulated per target. Padding sources carry zero charge and padding
/// targets are ignored by callers.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct InteractionBatch {
    pub target: [Vec<f32>; 3],
    pub source: [Vec<f32>; 3],
    pub charge: Vec<f32>,
    pub potential: Vec<f32>,
    /// `-grad phi` per target.
    pub field: [Vec<f32>; 3],
}

impl InteractionBatch {
    pub fn new(targets: &[[f32; 3]], sources: &[[f32; 3]], charges: &[f32]) -> Self {
        let split = |pts: &[[f32; 3]]| -> [Vec<f32>; 3] {
            std::array::from_fn(|k| pts.iter().map(|p| p[k]).collect())
        };
        let nt = targets.len();
        Self {
            target: split(targets),
            source: split(sources),
            charge: charges.to_vec(),
            potential: vec![0.0; nt],
            field: std::array::from_fn(|_| vec![0.0; nt]),
        }
    }

    pub fn target_len(&self) -> usize {
        self.target[0].len()
    }

    pub fn source_len(&self) -> usize {
        self.charge.len()
    }

    /// Pads both sides to a multiple of [`LANES`]. Padding sources are
    /// zero-charge and far away; padding targets are far away on the other
    /// side, so they never meet a source at zero distance.
    pub fn pad(&mut self) {
        let nt = self.target_len().next_multiple_of(LANES);
        for v in self.target.iter_mut() {
            v.resize(nt, -FAR_AWAY);
        }
        self.potential.resize(nt, 0.0);
        for v in self.field.iter_mut() {
            v.resize(nt, 0.0);
        }
        let ns = self.source_len().next_multiple_of(LANES);
        for v in self.source.iter_mut() {
            v.resize(ns, FAR_AWAY);
        }
        self.charge.resize(ns, 0.0);
    }

    fn check(&self) -> Result<()> {
        let nt = self.target_len();
        let ns = self.source_len();
        let t_lens = self
            .target
            .iter()
            .chain(self.field.iter())
            .map(Vec::len)
            .chain([self.potential.len()]);
        for len in t_lens {
            if len != nt {
                return Err(FmmError::LengthMismatch {
                    expected: nt,
                    found: len,
                });
            }
        }
        for len in self.source.iter().map(Vec::len) {
            if len != ns {
                return Err(FmmError::LengthMismatch {
                    expected: ns,
                    found: len,
                });
            }
        }
        if nt % LANES != 0 {
            return Err(FmmError::LengthMismatch {
                expected: nt.next_multiple_of(LANES),
                found: nt,
            });
        }
        Ok(())
    }
}

/// Padding coordinate. Large enough that padding never sits on real data,
/// small enough that `1/r^3` against real data stays a normal float.
pub(crate) const FAR_AWAY: f32 = 1.0e6;

/// Batched single-precision P2P over a padded [`InteractionBatch`].
/// Returns the number of zero-distance pairs (padding included).
pub fn p2p_batched(batch: &mut InteractionBatch) -> Result<u64> {
    batch.check()?;
    let [tx, ty, tz] = &batch.target;
    let [fx, fy, fz] = &mut batch.field;
    Ok(p2p_f32_slices(
        [tx, ty, tz],
        [
            &batch.source[0],
            &batch.source[1],
            &batch.source[2],
            &batch.charge,
        ],
        [&mut batch.potential, fx, fy, fz],
    ))
}

/// Kernel entry on raw streams: `targets` length is a multiple of [`LANES`].
pub(crate) fn p2p_f32_slices(
    targets: [&[f32]; 3],
    sources: [&[f32]; 4],
    out: [&mut [f32]; 4],
) -> u64 {
    let nt = targets[0].len();
    let ns = sources[3].len();
    assert!(nt % LANES == 0);
    assert!(targets.iter().all(|t| t.len() == nt) && out.iter().all(|o| o.len() >= nt));
    assert!(sources.iter().all(|s| s.len() >= ns));
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            // SAFETY: the CPU supports the enabled features; lengths checked above.
            return unsafe { p2p_f32_avx512(targets, sources, out) };
        }
        if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma")
        {
            // SAFETY: as above.
            return unsafe { p2p_f32_avx2(targets, sources, out) };
        }
    }
    p2p_f32_generic(targets, sources, out)
}

/// One 16-lane register per coordinate. `1/r` comes from the hardware
/// reciprocal square root estimate refined by one Newton step.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn p2p_f32_avx512(targets: [&[f32]; 3], sources: [&[f32]; 4], out: [&mut [f32]; 4]) -> u64 {
    use std::arch::x86_64::*;
    let [tx, ty, tz] = targets;
    let [sx, sy, sz, sq] = sources;
    let [phi, fx, fy, fz] = out;
    let zero = _mm512_setzero_ps();
    let three_halves = _mm512_set1_ps(1.5);
    let one = _mm512_set1_epi32(1);
    let mut zeros = 0u64;
    for b in (0..tx.len()).step_by(LANES) {
        let px = _mm512_loadu_ps(tx.as_ptr().add(b));
        let py = _mm512_loadu_ps(ty.as_ptr().add(b));
        let pz = _mm512_loadu_ps(tz.as_ptr().add(b));
        let (mut ap, mut ax, mut ay, mut az) = (zero, zero, zero, zero);
        let mut dead = _mm512_setzero_si512();
        for j in 0..sq.len() {
            let dx = _mm512_sub_ps(px, _mm512_set1_ps(*sx.get_unchecked(j)));
            let dy = _mm512_sub_ps(py, _mm512_set1_ps(*sy.get_unchecked(j)));
            let dz = _mm512_sub_ps(pz, _mm512_set1_ps(*sz.get_unchecked(j)));
            let r2 = _mm512_fmadd_ps(dx, dx, _mm512_fmadd_ps(dy, dy, _mm512_mul_ps(dz, dz)));
            let live = _mm512_cmp_ps_mask::<_CMP_NEQ_UQ>(r2, zero);
            dead = _mm512_mask_add_epi32(dead, !live, dead, one);
            // y (1.5 - 0.5 r2 y^2)
            let y = _mm512_rsqrt14_ps(r2);
            let half_r2_y = _mm512_mul_ps(_mm512_mul_ps(r2, y), _mm512_set1_ps(0.5));
            let inv = _mm512_maskz_mul_ps(live, y, _mm512_fnmadd_ps(half_r2_y, y, three_halves));
            let qinv = _mm512_mul_ps(_mm512_set1_ps(*sq.get_unchecked(j)), inv);
            ap = _mm512_add_ps(ap, qinv);
            let qinv3 = _mm512_mul_ps(qinv, _mm512_mul_ps(inv, inv));
            ax = _mm512_fmadd_ps(qinv3, dx, ax);
            ay = _mm512_fmadd_ps(qinv3, dy, ay);
            az = _mm512_fmadd_ps(qinv3, dz, az);
        }
        zeros += _mm512_reduce_add_epi32(dead) as u64;
        for (o, a) in [
            (phi.as_mut_ptr(), ap),
            (fx.as_mut_ptr(), ax),
            (fy.as_mut_ptr(), ay),
            (fz.as_mut_ptr(), az),
        ] {
            _mm512_storeu_ps(o.add(b), _mm512_add_ps(_mm512_loadu_ps(o.add(b)), a));
        }
    }
    zeros
}

/// Two 8-lane registers per coordinate, otherwise as the AVX-512 kernel.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn p2p_f32_avx2(targets: [&[f32]; 3], sources: [&[f32]; 4], out: [&mut [f32]; 4]) -> u64 {
    use std::arch::x86_64::*;
    let [tx, ty, tz] = targets;
    let [sx, sy, sz, sq] = sources;
    let [phi, fx, fy, fz] = out;
    let zero = _mm256_setzero_ps();
    let half = _mm256_set1_ps(0.5);
    let three_halves = _mm256_set1_ps(1.5);
    let mut zeros = 0u64;
    for b in (0..tx.len()).step_by(LANES) {
        let load2 = |s: &[f32]| {
            [
                _mm256_loadu_ps(s.as_ptr().add(b)),
                _mm256_loadu_ps(s.as_ptr().add(b + 8)),
            ]
        };
        let (px, py, pz) = (load2(tx), load2(ty), load2(tz));
        let mut acc = [[zero; 2]; 4];
        for j in 0..sq.len() {
            let (x, y, z) = (
                _mm256_set1_ps(*sx.get_unchecked(j)),
                _mm256_set1_ps(*sy.get_unchecked(j)),
                _mm256_set1_ps(*sz.get_unchecked(j)),
            );
            let q = _mm256_set1_ps(*sq.get_unchecked(j));
            for h in 0..2 {
                let dx = _mm256_sub_ps(px[h], x);
                let dy = _mm256_sub_ps(py[h], y);
                let dz = _mm256_sub_ps(pz[h], z);
                let r2 = _mm256_fmadd_ps(dx, dx, _mm256_fmadd_ps(dy, dy, _mm256_mul_ps(dz, dz)));
                let live = _mm256_cmp_ps::<_CMP_NEQ_UQ>(r2, zero);
                zeros += u64::from(8 - (_mm256_movemask_ps(live) as u32).count_ones());
                let e = _mm256_rsqrt_ps(r2);
                let he = _mm256_mul_ps(_mm256_mul_ps(half, r2), _mm256_mul_ps(e, e));
                let inv = _mm256_and_ps(live, _mm256_mul_ps(e, _mm256_sub_ps(three_halves, he)));
                let qinv = _mm256_mul_ps(q, inv);
                acc[0][h] = _mm256_add_ps(acc[0][h], qinv);
                let qinv3 = _mm256_mul_ps(qinv, _mm256_mul_ps(inv, inv));
                acc[1][h] = _mm256_fmadd_ps(qinv3, dx, acc[1][h]);
                acc[2][h] = _mm256_fmadd_ps(qinv3, dy, acc[2][h]);
                acc[3][h] = _mm256_fmadd_ps(qinv3, dz, acc[3][h]);
            }
        }
        for (o, a) in [
            phi.as_mut_ptr(),
            fx.as_mut_ptr(),
            fy.as_mut_ptr(),
            fz.as_mut_ptr(),
        ]
        .into_iter()
        .zip(acc)
        {
            for (h, v) in a.into_iter().enumerate() {
                let p = o.add(b + 8 * h);
                _mm256_storeu_ps(p, _mm256_add_ps(_mm256_loadu_ps(p), v));
            }
        }
    }
    zeros
}

/// Portable version: targets across lanes, sources streamed, each lane
/// keeping its own running sums.
fn p2p_f32_generic(targets: [&[f32]; 3], sources: [&[f32]; 4], out: [&mut [f32]; 4]) -> u64 {
    let [tx, ty, tz] = targets;
    let [sx, sy, sz, sq] = sources;
    let [phi, fx, fy, fz] = out;
    let ns = sq.len();
    let (sx, sy, sz) = (&sx[..ns], &sy[..ns], &sz[..ns]);
    let mut zeros = 0u64;
    for b in 0..tx.len() / LANES {
        let r = b * LANES..(b + 1) * LANES;
        let px: [f32; LANES] = tx[r.clone()].try_into().unwrap();
        let py: [f32; LANES] = ty[r.clone()].try_into().unwrap();
        let pz: [f32; LANES] = tz[r.clone()].try_into().unwrap();
        let mut acc_p = [0.0f32; LANES];
        let mut acc_x = [0.0f32; LANES];
        let mut acc_y = [0.0f32; LANES];
        let mut acc_z = [0.0f32; LANES];
        let mut acc_0 = [0u32; LANES];
        for j in 0..ns {
            let (x, y, z, q) = (sx[j], sy[j], sz[j], sq[j]);
            for l in 0..LANES {
                let dx = px[l] - x;
                let dy = py[l] - y;
                let dz = pz[l] - z;
                let r2 = dx * dx + dy * dy + dz * dz;
                let live = r2 != 0.0;
                let inv = if live { 1.0 / r2.sqrt() } else { 0.0 };
                let qinv = q * inv;
                acc_p[l] += qinv;
                let qinv3 = qinv * inv * inv;
                acc_x[l] += qinv3 * dx;
                acc_y[l] += qinv3 * dy;
                acc_z[l] += qinv3 * dz;
                acc_0[l] += u32::from(!live);
            }
        }
        for l in 0..LANES {
            phi[b * LANES + l] += acc_p[l];
            fx[b * LANES + l] += acc_x[l];
            fy[b * LANES + l] += acc_y[l];
            fz[b * LANES + l] += acc_z[l];
            zeros += u64::from(acc_0[l]);
        }
    }
    zeros
}
