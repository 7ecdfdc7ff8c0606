//! Multipole and local expansions of the Laplace potential `q / r` and the
//! five operators that create, translate and evaluate them.
//!
//! A multipole expansion about `c` represents
//! `phi(x) = sum_{n,m} M_n^m I_n^m(x - c)` with `M_n^m = sum_j q_j conj(R_n^m(x_j - c))`;
//! a local expansion represents `phi(x) = sum_{n,m} L_n^m R_n^m(x - c)`.
//! Sums run over `n < order`, `-n <= m <= n`; see [`crate::harmonics`] for
//! the normalisation. The `*_into` functions work on raw coefficient slices
//! and accumulate into their output.

use num_complex::Complex64;

use crate::error::{FmmError, Result};
use crate::harmonics::{coeff_count, get, index, irregular, regular};

#[inline]
fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Reusable buffers sized for one expansion order.
#[derive(Clone, Debug)]
pub struct Scratch {
    order: usize,
    reg: Vec<Complex64>,
    irr: Vec<Complex64>,
    /// All `-n <= m <= n` at `n * n + n + m`, for the M2L inner loop.
    full_irr: Vec<Complex64>,
    full_src: Vec<Complex64>,
    acc: Vec<Complex64>,
    real_acc: Vec<f64>,
}

impl Scratch {
    pub fn new(order: usize) -> Self {
        Self {
            order,
            reg: vec![Complex64::default(); coeff_count(order)],
            irr: vec![Complex64::default(); coeff_count((2 * order).saturating_sub(1))],
            full_irr: vec![Complex64::default(); (2 * order).saturating_sub(1).pow(2)],
            full_src: vec![Complex64::default(); order * order],
            acc: vec![Complex64::default(); coeff_count(order)],
            real_acc: vec![0.0; 2 * coeff_count(order)],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }
}

/// Adds the multipole moments of point charges about `center`.
pub fn p2m_into(
    center: [f64; 3],
    positions: &[[f64; 3]],
    charges: &[f64],
    out: &mut [Complex64],
    scratch: &mut Scratch,
) {
    let order = scratch.order;
    let n_coef = coeff_count(order);
    for (&p, &q) in positions.iter().zip(charges) {
        regular(sub(p, center), order, &mut scratch.reg);
        for (o, r) in out[..n_coef].iter_mut().zip(&scratch.reg) {
            *o += q * r.conj();
        }
    }
}

/// Adds `child` (about `child_center`) re-expanded about `parent_center`.
/// Exact for every retained degree.
pub fn m2m_into(
    child: &[Complex64],
    child_center: [f64; 3],
    parent_center: [f64; 3],
    out: &mut [Complex64],
    scratch: &mut Scratch,
) {
    let order = scratch.order;
    let reg = &mut scratch.reg;
    regular(sub(child_center, parent_center), order, reg);
    for n in 0..order {
        for m in 0..=n as isize {
            let mut acc = Complex64::default();
            for k in 0..=n {
                let j = n - k;
                for l in -(k as isize)..=k as isize {
                    if (m - l).unsigned_abs() <= j {
                        acc += get(reg, j, m - l).conj() * get(child, k, l);
                    }
                }
            }
            out[index(n, m as usize)] += acc;
        }
    }
}

/// Adds the local expansion about `target_center` of the field of `source`
/// (a multipole expansion about `source_center`). Cost `O(order^4)`.
pub fn m2l_into(
    source: &[Complex64],
    source_center: [f64; 3],
    target_center: [f64; 3],
    out: &mut [Complex64],
    scratch: &mut Scratch,
) {
    let order = scratch.order;
    let d = sub(target_center, source_center);
    debug_assert!(d != [0.0; 3], "m2l between coincident centers");
    let irr_order = 2 * order - 1;
    irregular(d, irr_order, &mut scratch.irr);
    expand_full(&scratch.irr, irr_order, &mut scratch.full_irr);
    m2l_apply(
        source,
        &scratch.full_irr,
        order,
        &mut scratch.full_src,
        &mut scratch.acc,
        out,
    );
}

/// Length of an M2L translation kernel for `order`.
pub fn m2l_kernel_len(order: usize) -> usize {
    (2 * order).saturating_sub(1).pow(2)
}

/// Translation kernel for center offset `d = target - source`, reusable by
/// every pair with the same offset through [`m2l_with_kernel`].
pub fn m2l_kernel(d: [f64; 3], order: usize, out: &mut [Complex64]) {
    let irr_order = 2 * order - 1;
    let mut irr = vec![Complex64::default(); coeff_count(irr_order)];
    irregular(d, irr_order, &mut irr);
    expand_full(&irr, irr_order, out);
}

/// Same as [`m2l_into`] with a precomputed kernel from [`m2l_kernel`].
pub fn m2l_with_kernel(
    source: &[Complex64],
    kernel: &[Complex64],
    out: &mut [Complex64],
    scratch: &mut Scratch,
) {
    m2l_apply(
        source,
        kernel,
        scratch.order,
        &mut scratch.full_src,
        &mut scratch.acc,
        out,
    );
}

/// Size of the real matrix form of an M2L kernel for `order`.
pub fn m2l_matrix_len(order: usize) -> usize {
    (2 * coeff_count(order)).pow(2)
}

/// Rewrites a kernel from [`m2l_kernel`] as a real matrix acting on the
/// interleaved `(re, im)` parts of the source coefficients. Stored column
/// by column, `2 * coeff_count(order)` rows each.
pub fn m2l_matrix(kernel: &[Complex64], order: usize, out: &mut [f64]) {
    let rows = 2 * coeff_count(order);
    let out = &mut out[..rows * rows];
    out.fill(0.0);
    for k in 0..order {
        let sign = if k & 1 == 0 { 1.0 } else { -1.0 };
        for l in 0..=k {
            let (r_re, r_im) = (2 * index(k, l), 2 * index(k, l) + 1);
            for n in 0..order {
                for m in -(n as isize)..=n as isize {
                    let j = n + k;
                    let b = kernel[((j * j + j + l) as isize + m) as usize];
                    let q = index(n, m.unsigned_abs());
                    let (c_x, c_y) = (2 * q, 2 * q + 1);
                    // out = sign * conj(sum a * b), a = c or (-1)^m conj(c).
                    if m >= 0 {
                        out[c_x * rows + r_re] += sign * b.re;
                        out[c_y * rows + r_re] -= sign * b.im;
                        out[c_x * rows + r_im] -= sign * b.im;
                        out[c_y * rows + r_im] -= sign * b.re;
                    } else {
                        let s = if m & 1 == 0 { sign } else { -sign };
                        out[c_x * rows + r_re] += s * b.re;
                        out[c_y * rows + r_re] += s * b.im;
                        out[c_x * rows + r_im] -= s * b.im;
                        out[c_y * rows + r_im] += s * b.re;
                    }
                }
            }
        }
    }
}

/// Same as [`m2l_with_kernel`] with a matrix from [`m2l_matrix`].
pub fn m2l_with_matrix(
    source: &[Complex64],
    matrix: &[f64],
    out: &mut [Complex64],
    scratch: &mut Scratch,
) {
    matrix_sum_start(scratch);
    matrix_sum_add(source, matrix, scratch);
    matrix_sum_finish(out, scratch);
}

/// Starts a run of [`matrix_sum_add`] calls that share one accumulator.
pub(crate) fn matrix_sum_start(scratch: &mut Scratch) {
    scratch.real_acc.fill(0.0);
}

pub(crate) fn matrix_sum_add(source: &[Complex64], matrix: &[f64], scratch: &mut Scratch) {
    let cc = coeff_count(scratch.order);
    let rows = 2 * cc;
    matvec(
        &source[..cc],
        &matrix[..rows * rows],
        &mut scratch.real_acc[..rows],
    );
}

/// Adds the accumulated sum into `out`.
pub(crate) fn matrix_sum_finish(out: &mut [Complex64], scratch: &Scratch) {
    let cc = coeff_count(scratch.order);
    for (o, a) in out[..cc].iter_mut().zip(scratch.real_acc.chunks_exact(2)) {
        o.re += a[0];
        o.im += a[1];
    }
}

/// `acc += matrix * source` with `source` read as interleaved reals. Every
/// path does the same fused multiply-adds, so the width only changes speed.
fn matvec(source: &[Complex64], matrix: &[f64], acc: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("fma") {
            if std::arch::is_x86_feature_detected!("avx512f") {
                // SAFETY: the CPU supports the enabled features.
                return unsafe { matvec_avx512(source, matrix, acc) };
            }
            if std::arch::is_x86_feature_detected!("avx2") {
                // SAFETY: as above.
                return unsafe { matvec_avx2(source, matrix, acc) };
            }
        }
    }
    matvec_generic(source, matrix, acc)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f,fma")]
unsafe fn matvec_avx512(source: &[Complex64], matrix: &[f64], acc: &mut [f64]) {
    matvec_generic(source, matrix, acc)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn matvec_avx2(source: &[Complex64], matrix: &[f64], acc: &mut [f64]) {
    matvec_generic(source, matrix, acc)
}

#[inline(always)]
fn matvec_generic(source: &[Complex64], matrix: &[f64], acc: &mut [f64]) {
    match acc.len() {
        12 => matvec_fixed::<12>(source, matrix, acc),
        20 => matvec_fixed::<20>(source, matrix, acc),
        30 => matvec_fixed::<30>(source, matrix, acc),
        42 => matvec_fixed::<42>(source, matrix, acc),
        _ => matvec_any(source, matrix, acc),
    }
}

/// Orders 3 to 6 with the row count known at compile time.
#[inline(always)]
fn matvec_fixed<const R: usize>(source: &[Complex64], matrix: &[f64], acc: &mut [f64]) {
    let acc: &mut [f64; R] = acc.try_into().expect("row count");
    let mut a = *acc;
    for (cols, c) in matrix.chunks_exact(2 * R).zip(source) {
        let re: &[f64; R] = cols[..R].try_into().expect("column");
        let im: &[f64; R] = cols[R..].try_into().expect("column");
        for i in 0..R {
            a[i] = im[i].mul_add(c.im, re[i].mul_add(c.re, a[i]));
        }
    }
    *acc = a;
}

#[inline(always)]
fn matvec_any(source: &[Complex64], matrix: &[f64], acc: &mut [f64]) {
    let rows = acc.len();
    for (cols, c) in matrix.chunks_exact(2 * rows).zip(source) {
        let (re, im) = cols.split_at(rows);
        for ((a, m), n) in acc.iter_mut().zip(re).zip(im) {
            *a = n.mul_add(c.im, m.mul_add(c.re, *a));
        }
    }
}

fn m2l_apply(
    source: &[Complex64],
    irr: &[Complex64],
    order: usize,
    src: &mut [Complex64],
    acc: &mut [Complex64],
    out: &mut [Complex64],
) {
    expand_full(source, order, src);
    let acc = &mut acc[..coeff_count(order)];
    acc.fill(Complex64::default());
    // Source-major so that each output term has its own accumulator.
    for n in 0..order {
        for i in 0..2 * n + 1 {
            let a = src[n * n + i];
            for k in 0..order {
                // I_{n+k}^{m+l} with m = i - n, for l = 0..=k.
                let j = n + k;
                let base = j * j + j + i - n;
                let row = &irr[base..base + k + 1];
                let dst = &mut acc[index(k, 0)..index(k, 0) + k + 1];
                for (d, b) in dst.iter_mut().zip(row) {
                    d.re += a.re * b.re - a.im * b.im;
                    d.im += a.re * b.im + a.im * b.re;
                }
            }
        }
    }
    for k in 0..order {
        let sign = if k & 1 == 0 { 1.0 } else { -1.0 };
        for l in 0..=k {
            let v = acc[index(k, l)];
            out[index(k, l)] += Complex64::new(sign * v.re, -sign * v.im);
        }
    }
}

/// Writes every `(n, m)`, `-n <= m <= n`, `n < order` to `full[n * n + n + m]`.
fn expand_full(coeffs: &[Complex64], order: usize, full: &mut [Complex64]) {
    for n in 0..order {
        let c = n * n + n;
        full[c] = coeffs[index(n, 0)];
        for m in 1..=n {
            let v = coeffs[index(n, m)];
            full[c + m] = v;
            full[c - m] = if m & 1 == 0 { v.conj() } else { -v.conj() };
        }
    }
}

/// Adds `parent` (about `parent_center`) re-centered at `child_center`.
/// Exact for every retained degree.
pub fn l2l_into(
    parent: &[Complex64],
    parent_center: [f64; 3],
    child_center: [f64; 3],
    out: &mut [Complex64],
    scratch: &mut Scratch,
) {
    let order = scratch.order;
    let reg = &mut scratch.reg;
    regular(sub(child_center, parent_center), order, reg);
    for k in 0..order {
        for l in 0..=k as isize {
            let mut acc = Complex64::default();
            for n in k..order {
                let j = n - k;
                for m in -(n as isize)..=n as isize {
                    if (m - l).unsigned_abs() <= j {
                        acc += get(parent, n, m) * get(reg, j, m - l);
                    }
                }
            }
            out[index(k, l as usize)] += acc;
        }
    }
}

/// Potential and gradient of a local expansion at `point`.
pub fn local_potential_gradient(
    local: &[Complex64],
    center: [f64; 3],
    point: [f64; 3],
    scratch: &mut Scratch,
) -> (f64, [f64; 3]) {
    let order = scratch.order;
    let reg = &mut scratch.reg;
    regular(sub(point, center), order, reg);
    let mut phi = 0.0;
    for n in 0..order {
        phi += (local[index(n, 0)] * reg[index(n, 0)]).re;
        for m in 1..=n {
            phi += 2.0 * (local[index(n, m)] * reg[index(n, m)]).re;
        }
    }
    // The degree-1 coefficients of the expansion re-centered at `point`
    // carry the gradient: d/dz = L_1^0, d/dx - i d/dy = -L_1^1.
    let mut dz = 0.0;
    let mut d1 = Complex64::default();
    for n in 1..order {
        let j = n - 1;
        dz += (local[index(n, 0)] * reg[index(j, 0)]).re;
        for m in 1..=j {
            dz += 2.0 * (local[index(n, m)] * reg[index(j, m)]).re;
        }
        for m in (2 - n as isize)..=n as isize {
            d1 += get(local, n, m) * get(reg, j, m - 1);
        }
    }
    (phi, [-d1.re, d1.im, dz])
}

/// Adds the local field to bodies: `potential += phi`, `force += q (-grad phi)`.
pub fn l2p_into(
    local: &[Complex64],
    center: [f64; 3],
    positions: &[[f64; 3]],
    charges: &[f64],
    potential: &mut [f64],
    force: &mut [[f64; 3]],
    scratch: &mut Scratch,
) {
    for (i, &p) in positions.iter().enumerate() {
        let (phi, g) = local_potential_gradient(local, center, p, scratch);
        potential[i] += phi;
        let q = charges[i];
        for k in 0..3 {
            force[i][k] -= q * g[k];
        }
    }
}

/// Truncated multipole series at `point`.
pub fn multipole_potential(
    multipole: &[Complex64],
    center: [f64; 3],
    point: [f64; 3],
    scratch: &mut Scratch,
) -> f64 {
    let order = scratch.order;
    let irr = &mut scratch.irr;
    irregular(sub(point, center), order, irr);
    let mut phi = 0.0;
    for n in 0..order {
        phi += (multipole[index(n, 0)] * irr[index(n, 0)]).re;
        for m in 1..=n {
            phi += 2.0 * (multipole[index(n, m)] * irr[index(n, m)]).re;
        }
    }
    phi
}

/// Multipole expansion: `coeffs[index(n, m)] = M_n^m`, `n < order`, `m >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultipoleExpansion {
    pub center: [f64; 3],
    pub order: usize,
    pub coeffs: Vec<Complex64>,
}

/// Local expansion: `coeffs[index(n, m)] = L_n^m`, `n < order`, `m >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalExpansion {
    pub center: [f64; 3],
    pub order: usize,
    pub coeffs: Vec<Complex64>,
}

impl MultipoleExpansion {
    pub fn zero(center: [f64; 3], order: usize) -> Self {
        Self {
            center,
            order,
            coeffs: vec![Complex64::default(); coeff_count(order)],
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * alpha).collect(),
            ..self.clone()
        }
    }
}

impl LocalExpansion {
    pub fn zero(center: [f64; 3], order: usize) -> Self {
        Self {
            center,
            order,
            coeffs: vec![Complex64::default(); coeff_count(order)],
        }
    }

    /// Potential and gradient at `point`.
    pub fn evaluate(&self, point: [f64; 3]) -> (f64, [f64; 3]) {
        local_potential_gradient(
            &self.coeffs,
            self.center,
            point,
            &mut Scratch::new(self.order),
        )
    }
}

/// P2M: expansion of the given charges about `center`.
pub fn p2m(
    center: [f64; 3],
    positions: &[[f64; 3]],
    charges: &[f64],
    order: usize,
) -> MultipoleExpansion {
    let mut me = MultipoleExpansion::zero(center, order);
    p2m_into(
        center,
        positions,
        charges,
        &mut me.coeffs,
        &mut Scratch::new(order),
    );
    me
}

/// M2M: `child` re-expanded about `parent_center`.
pub fn m2m(child: &MultipoleExpansion, parent_center: [f64; 3]) -> MultipoleExpansion {
    let mut me = MultipoleExpansion::zero(parent_center, child.order);
    m2m_into(
        &child.coeffs,
        child.center,
        parent_center,
        &mut me.coeffs,
        &mut Scratch::new(child.order),
    );
    me
}

/// M2L: local expansion about `target_center` of the far field of `source`.
pub fn m2l(source: &MultipoleExpansion, target_center: [f64; 3]) -> Result<LocalExpansion> {
    if source.center == target_center {
        return Err(FmmError::CoincidentCenters);
    }
    let mut le = LocalExpansion::zero(target_center, source.order);
    m2l_into(
        &source.coeffs,
        source.center,
        target_center,
        &mut le.coeffs,
        &mut Scratch::new(source.order),
    );
    Ok(le)
}

/// L2L: `parent` re-centered at `child_center`.
pub fn l2l(parent: &LocalExpansion, child_center: [f64; 3]) -> LocalExpansion {
    let mut le = LocalExpansion::zero(child_center, parent.order);
    l2l_into(
        &parent.coeffs,
        parent.center,
        child_center,
        &mut le.coeffs,
        &mut Scratch::new(parent.order),
    );
    le
}

/// L2P: adds the local field to the given bodies' accumulators.
pub fn l2p(
    local: &LocalExpansion,
    positions: &[[f64; 3]],
    charges: &[f64],
    potential: &mut [f64],
    force: &mut [[f64; 3]],
) {
    l2p_into(
        &local.coeffs,
        local.center,
        positions,
        charges,
        potential,
        force,
        &mut Scratch::new(local.order),
    );
}

/// Value of the truncated multipole series at `point`.
pub fn evaluate_multipole(me: &MultipoleExpansion, point: [f64; 3]) -> Result<f64> {
    if point == me.center {
        return Err(FmmError::CoincidentCenters);
    }
    Ok(multipole_potential(
        &me.coeffs,
        me.center,
        point,
        &mut Scratch::new(me.order),
    ))
}
