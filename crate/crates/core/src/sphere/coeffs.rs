use num_complex::Complex64;

use super::wigner::lm_index;
use super::SphereError;

/// Complex spin-weighted harmonic coefficients `a_lm`, `|m| <= l <= l_max`,
/// packed by `l^2 + l + m`. Entries with `l < |spin|` are always zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralCoeffs {
    l_max: usize,
    spin: i32,
    data: Vec<Complex64>,
}

impl SpectralCoeffs {
    pub fn zeros(l_max: usize, spin: i32) -> Self {
        SpectralCoeffs { l_max, spin, data: vec![Complex64::new(0.0, 0.0); (l_max + 1) * (l_max + 1)] }
    }

    pub fn from_vec(l_max: usize, spin: i32, data: Vec<Complex64>) -> Result<Self, SphereError> {
        if data.len() != (l_max + 1) * (l_max + 1) {
            return Err(SphereError::Size { expected: (l_max + 1) * (l_max + 1), got: data.len() });
        }
        Ok(SpectralCoeffs { l_max, spin, data })
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }
    pub fn spin(&self) -> i32 {
        self.spin
    }
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }
    pub fn l_min(&self) -> usize {
        self.spin.unsigned_abs() as usize
    }

    pub fn get(&self, l: usize, m: i64) -> Complex64 {
        if l > self.l_max || m.unsigned_abs() as usize > l {
            return Complex64::new(0.0, 0.0);
        }
        self.data[lm_index(l, m)]
    }

    pub fn set(&mut self, l: usize, m: i64, v: Complex64) {
        self.data[lm_index(l, m)] = v;
    }

    /// Iterate `(l, m, a_lm)` over all stored modes.
    pub fn iter(&self) -> impl Iterator<Item = (usize, i64, Complex64)> + '_ {
        (0..=self.l_max).flat_map(move |l| {
            let li = l as i64;
            (-li..=li).map(move |m| (l, m, self.data[lm_index(l, m)]))
        })
    }

    /// Multiply every degree-`l` block by `factor(l)`, relabelling the spin.
    pub fn map_degree(&self, new_spin: i32, factor: impl Fn(usize) -> f64) -> Self {
        let mut out = SpectralCoeffs::zeros(self.l_max, new_spin);
        let lo = self.l_min().max(out.l_min());
        for l in lo..=self.l_max {
            let f = factor(l);
            let li = l as i64;
            for m in -li..=li {
                let i = lm_index(l, m);
                out.data[i] = self.data[i] * f;
            }
        }
        out
    }

    /// Zero every mode of degree above `l`.
    pub fn truncate(&mut self, l: usize) {
        let start = (l + 1).min(self.l_max + 1).pow(2);
        for v in &mut self.data[start..] {
            *v = Complex64::new(0.0, 0.0);
        }
    }

    /// Sum of `|a_lm|^2` per degree.
    pub fn power_spectrum(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.l_max + 1];
        for (l, _, a) in self.iter() {
            p[l] += a.norm_sqr();
        }
        p
    }

    /// `l2` norm of the coefficient vector (= L² norm of the field).
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn axpy(&mut self, alpha: f64, other: &SpectralCoeffs) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * alpha;
        }
    }
}

/// Real orthonormal basis coefficients from the complex coefficients of a
/// real spin-0 field: `r_{l,m} = √2 (-1)^m Re a_lm`, `r_{l,-m} = -√2 (-1)^m Im a_lm`
/// for `m > 0`, `r_{l,0} = Re a_l0`.
pub fn complex_to_real(c: &SpectralCoeffs) -> Vec<f64> {
    let mut r = vec![0.0; c.data.len()];
    let s2 = std::f64::consts::SQRT_2;
    for l in 0..=c.l_max {
        r[lm_index(l, 0)] = c.get(l, 0).re;
        for m in 1..=l as i64 {
            let a = c.get(l, m);
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            r[lm_index(l, m)] = s2 * sign * a.re;
            r[lm_index(l, -m)] = -s2 * sign * a.im;
        }
    }
    r
}

pub fn real_to_complex(l_max: usize, r: &[f64]) -> Result<SpectralCoeffs, SphereError> {
    if r.len() != (l_max + 1) * (l_max + 1) {
        return Err(SphereError::Size { expected: (l_max + 1) * (l_max + 1), got: r.len() });
    }
    let mut c = SpectralCoeffs::zeros(l_max, 0);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for l in 0..=l_max {
        c.set(l, 0, Complex64::new(r[lm_index(l, 0)], 0.0));
        for m in 1..=l as i64 {
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let a = Complex64::new(r[lm_index(l, m)], -r[lm_index(l, -m)]) * (sign * h);
            c.set(l, m, a);
            c.set(l, -m, a.conj() * sign);
        }
    }
    Ok(c)
}
