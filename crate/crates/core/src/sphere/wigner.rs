//! Wigner small-d functions and the spin-weighted harmonic normalisation.
//!
//! Convention: `sY_lm(θ, φ) = (-1)^s √((2l+1)/4π) d^l_{m,-s}(θ) e^{imφ}`.
//! For `s = 0` this is the Condon–Shortley `Y_lm`.

use std::f64::consts::PI;

fn ln_factorial(n: i64) -> f64 {
    debug_assert!(n >= 0);
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `d^j_{mp,m}(beta)` by Wigner's explicit sum. Exact for small `j`; used for
/// recurrence seeds (where the sum has a single term) and as a test oracle.
pub fn wigner_d_direct(j: i64, mp: i64, m: i64, beta: f64) -> f64 {
    if mp.abs() > j || m.abs() > j {
        return 0.0;
    }
    let (c, s) = ((beta / 2.0).cos(), (beta / 2.0).sin());
    let pre = 0.5 * (ln_factorial(j + mp) + ln_factorial(j - mp) + ln_factorial(j + m) + ln_factorial(j - m));
    let lo = 0.max(m - mp);
    let hi = (j + m).min(j - mp);
    let mut sum = 0.0;
    for k in lo..=hi {
        let den = ln_factorial(j + m - k) + ln_factorial(k) + ln_factorial(mp - m + k) + ln_factorial(j - mp - k);
        let sign = if (mp - m + k).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let pc = (2 * j + m - mp - 2 * k) as i32;
        let ps = (mp - m + 2 * k) as i32;
        sum += sign * (pre - den).exp() * c.powi(pc) * s.powi(ps);
    }
    sum
}

/// Column `d^l_{m,k}(beta)` for `l = 0..=l_max` (zero where `l < max(|m|,|k|)`),
/// by the three-term recurrence in `l`.
pub fn wigner_d_column(l_max: usize, m: i64, k: i64, beta: f64) -> Vec<f64> {
    let mut out = vec![0.0; l_max + 1];
    let l0 = m.abs().max(k.abs());
    if l0 as usize > l_max {
        return out;
    }
    let cb = beta.cos();
    out[l0 as usize] = wigner_d_direct(l0, m, k, beta);
    let (mf, kf) = (m as f64, k as f64);
    for j in l0..(l_max as i64) {
        let jf = j as f64;
        let j1 = jf + 1.0;
        let norm = ((j1 * j1 - mf * mf) * (j1 * j1 - kf * kf)).sqrt();
        let shift = if j == 0 { 0.0 } else { mf * kf / (jf * j1) };
        let mut val = j1 * (2.0 * jf + 1.0) * (cb - shift) * out[j as usize];
        if j > l0 {
            let back = ((jf * jf - mf * mf) * (jf * jf - kf * kf)).sqrt();
            val -= j1 * back / jf * out[j as usize - 1];
        }
        out[j as usize + 1] = val / norm;
    }
    out
}

/// Index of `(l, m)` in a packed coefficient vector of length `(l_max+1)^2`.
#[inline]
pub fn lm_index(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

/// θ-part of the spin-`s` harmonics, `Θ_lm(θ)` with `sY_lm = Θ_lm e^{imφ}`,
/// packed by [`lm_index`]. Entries with `l < |s|` are zero.
pub fn spin_theta_row(l_max: usize, spin: i32, theta: f64) -> Vec<f64> {
    let n = (l_max + 1) * (l_max + 1);
    let mut row = vec![0.0; n];
    let sign = if spin.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let lm = l_max as i64;
    for m in -lm..=lm {
        let col = wigner_d_column(l_max, m, -(spin as i64), theta);
        for l in (m.unsigned_abs() as usize).max(spin.unsigned_abs() as usize)..=l_max {
            let norm = ((2 * l + 1) as f64 / (4.0 * PI)).sqrt();
            row[lm_index(l, m)] = sign * norm * col[l];
        }
    }
    row
}
