//! Orthonormalized associated Legendre functions.
//!
//! `P̄_l^m(x)` is normalized so that `P̄_l^m(cos θ) e^{imφ}` is orthonormal on
//! the unit sphere, without the Condon–Shortley phase. Values come from the
//! three-term recurrence in `l` at fixed `m`, carrying a power-of-two scale so
//! that sectoral terms `sin^m θ` do not underflow for `l` in the thousands.

use std::f64::consts::PI;

const RESCALE_EXP: i32 = 500;
const RESCALE_LO: f64 = 3.054936363499605e-151; // 2^-500
const RESCALE_HI: f64 = 3.273390607896142e150; // 2^500

fn pow2(e: i32) -> f64 {
    // split so that intermediate factors stay representable
    let half = e / 2;
    2f64.powi(half) * 2f64.powi(e - half)
}

/// Fills `out[j]` with `P̄_{m+j}^m(x)` for `j = 0..out.len()`.
pub fn normalized_column(m: usize, x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let sin = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
    let mut exp2 = 0i32;
    let mut p = 1.0 / (4.0 * PI).sqrt();
    for k in 1..=m {
        let kf = k as f64;
        p *= ((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() * sin;
        if p != 0.0 && p.abs() < RESCALE_LO {
            p *= RESCALE_HI;
            exp2 -= RESCALE_EXP;
        }
    }
    let mut factor = pow2(exp2);
    out[0] = p * factor;
    if out.len() == 1 {
        return;
    }
    let mf = m as f64;
    let mut prev = p;
    let mut cur = (2.0 * mf + 3.0).sqrt() * x * p;
    out[1] = cur * factor;
    for (j, slot) in out.iter_mut().enumerate().skip(2) {
        let l = (m + j) as f64;
        let a = ((4.0 * l * l - 1.0) / (l * l - mf * mf)).sqrt();
        let lm1 = l - 1.0;
        let b = ((lm1 * lm1 - mf * mf) / (4.0 * lm1 * lm1 - 1.0)).sqrt();
        let next = a * (x * cur - b * prev);
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE_HI {
            cur *= RESCALE_LO;
            prev *= RESCALE_LO;
            exp2 += RESCALE_EXP;
            factor = pow2(exp2);
        }
        *slot = cur * factor;
    }
}

/// Single value `P̄_l^m(x)`, computed along the same recurrence path as
/// [`normalized_column`] so both agree bit for bit.
pub fn normalized(l: usize, m: usize, x: f64) -> f64 {
    assert!(m <= l, "order m = {m} exceeds degree l = {l}");
    let mut column = vec![0.0; l - m + 1];
    normalized_column(m, x, &mut column);
    column[l - m]
}

/// Table of `ln k!` for `k = 0..=n`.
pub fn ln_factorials(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    table.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

/// Ratio `P̄_l^m / P_l^m` between the orthonormalized and the plain
/// associated Legendre function, `√((2l+1)/(4π) · (l−m)!/(l+m)!)`.
pub fn normalization_ratio(l: usize, m: usize, ln_fact: &[f64]) -> f64 {
    let ln = 0.5 * (((2 * l + 1) as f64).ln() - (4.0 * PI).ln() + ln_fact[l - m] - ln_fact[l + m]);
    ln.exp()
}
