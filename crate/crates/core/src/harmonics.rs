//! Scaled solid harmonics.
//!
//! With `P_n^m` the associated Legendre functions including the
//! Condon-Shortley phase, the regular and irregular harmonics are
//!
//! ```text
//! R_n^m(r) = r^n P_n^m(cos t) e^{i m f} / (n + m)!
//! I_n^m(r) = (n - m)! P_n^m(cos t) e^{i m f} / r^(n + 1)
//! ```
//!
//! and both obey `X_n^{-m} = (-1)^m conj(X_n^m)`, so only `m >= 0` is stored,
//! at index `n (n + 1) / 2 + m`. In this scaling the Laplace kernel and the
//! translation theorems carry no extra factors:
//!
//! ```text
//! 1 / |r - a|  = sum_{n,m} conj(R_n^m(a)) I_n^m(r)                      |a| < |r|
//! R_n^m(a + b) = sum_{k,l} R_k^l(a) R_{n-k}^{m-l}(b)
//! I_n^m(D + y) = sum_{k,l} (-1)^k conj(R_k^l(y)) I_{n+k}^{m+l}(D)       |y| < |D|
//! ```
//!
//! Both families are generated from Cartesian recurrences, no trigonometry.

use num_complex::Complex64;

/// Number of stored coefficients for degrees `0..order`.
#[inline]
pub const fn coeff_count(order: usize) -> usize {
    order * (order + 1) / 2
}

#[inline]
pub const fn index(n: usize, m: usize) -> usize {
    n * (n + 1) / 2 + m
}

/// Coefficient `(n, m)` for any `-n <= m <= n`, using the conjugate symmetry.
#[inline]
pub fn get(coeffs: &[Complex64], n: usize, m: isize) -> Complex64 {
    if m >= 0 {
        coeffs[index(n, m as usize)]
    } else {
        let c = coeffs[index(n, (-m) as usize)].conj();
        if m & 1 == 0 {
            c
        } else {
            -c
        }
    }
}

/// Regular harmonics `R_n^m(v)` for `n < order`, written to `out[..coeff_count(order)]`.
pub fn regular(v: [f64; 3], order: usize, out: &mut [Complex64]) {
    if order == 0 {
        return;
    }
    let out = &mut out[..coeff_count(order)];
    let [x, y, z] = v;
    let r2 = x * x + y * y + z * z;
    let w = Complex64::new(x, y);
    let mut diag = Complex64::new(1.0, 0.0);
    // Coefficients tracked as floats to keep integer conversions out of the loops.
    let mut fm = 0.0;
    for m in 0..order {
        if m > 0 {
            diag = w * diag * (-0.5 / fm);
        }
        // Column m holds (n, m) for n = m.., spaced n + 1 apart.
        let mut i = index(m, m);
        out[i] = diag;
        if m + 1 < order {
            let mut b = diag;
            let mut a = z * diag;
            i += m + 1;
            out[i] = a;
            let mut fn_ = fm + 1.0;
            for n in m + 2..order {
                fn_ += 1.0;
                i += n;
                let c = ((2.0 * fn_ - 1.0) * z * a - r2 * b) / ((fn_ + fm) * (fn_ - fm));
                out[i] = c;
                b = a;
                a = c;
            }
        }
        fm += 1.0;
    }
}

/// Irregular harmonics `I_n^m(v)` for `n < order`; `v` must be nonzero.
pub fn irregular(v: [f64; 3], order: usize, out: &mut [Complex64]) {
    if order == 0 {
        return;
    }
    let out = &mut out[..coeff_count(order)];
    let [x, y, z] = v;
    let r2 = x * x + y * y + z * z;
    let inv_r2 = 1.0 / r2;
    let w = Complex64::new(x, y);
    let mut diag = Complex64::new(r2.sqrt().recip(), 0.0);
    let mut fm = 0.0;
    for m in 0..order {
        if m > 0 {
            diag = w * diag * (-(2.0 * fm - 1.0) * inv_r2);
        }
        let mut i = index(m, m);
        out[i] = diag;
        if m + 1 < order {
            let mut b = diag;
            let mut a = diag * ((2.0 * fm + 1.0) * z * inv_r2);
            i += m + 1;
            out[i] = a;
            let mut fn_ = fm + 1.0;
            for n in m + 2..order {
                fn_ += 1.0;
                i += n;
                let c = ((2.0 * fn_ - 1.0) * z * a - ((fn_ + fm - 1.0) * (fn_ - fm - 1.0)) * b)
                    * inv_r2;
                out[i] = c;
                b = a;
                a = c;
            }
        }
        fm += 1.0;
    }
}
