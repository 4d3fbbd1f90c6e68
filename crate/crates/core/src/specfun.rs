//! Spherical Bessel, Neumann and Hankel functions and their modified
//! counterparts, as scalars and as diagonal channel matrices.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::angular::{ShEvaluator, Truncation};
use crate::error::{DwmsError, Result};
use crate::linalg::{CMat, CVec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum BesselKind {
    /// Regular `j_l`.
    J,
    /// Irregular `n_l` (`n_0 = -cos x / x`).
    N,
    /// `h⁺_l = j_l + i n_l`.
    HPlus,
    /// `h⁻_l = j_l - i n_l`.
    HMinus,
    /// Modified regular `i_l` (`i_0 = sinh x / x`).
    ModI,
    /// Modified decaying `k⁺_l = (-1)^l k̃_l` with `k̃_0 = e^{-x}/x`.
    ModK,
}

impl BesselKind {
    fn singular_at_origin(self) -> bool {
        !matches!(self, BesselKind::J | BesselKind::ModI)
    }
}

/// Values and `x`-derivatives for `l = 0..=l_max`.
#[derive(Clone, Debug)]
pub struct BesselValues {
    pub values: Vec<Complex64>,
    pub derivs: Vec<Complex64>,
}

fn series_j(l: usize, x: f64, modified: bool) -> f64 {
    // x^l/(2l+1)!! Σ_k (∓x²/2)^k / (k! (2l+3)(2l+5)...(2l+2k+1))
    let mut lead = 1.0;
    for k in 0..l {
        lead *= x / (2 * k + 3) as f64;
    }
    let sign = if modified { 1.0 } else { -1.0 };
    let y = 0.5 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..40 {
        term *= sign * y / (k as f64 * (2 * l + 2 * k + 1) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    lead * sum
}

/// Downward recurrence `f_{l-1} = (2l+1)/x f_l ∓ f_{l+1}`, normalized to `f_0`
/// (or `f_1` near a zero of `f_0`).
fn miller(l_max: usize, x: f64, modified: bool, f0: f64, f1: f64) -> Vec<f64> {
    let extra = if modified { (80.0 * x + (l_max * l_max) as f64).sqrt() as usize } else { x as usize };
    let start = l_max.max(extra) + 40 + (40.0 * x).sqrt() as usize;
    let mut out = vec![0.0; l_max + 2];
    let mut above = 0.0;
    let mut cur = 1e-300;
    for l in (1..=start).rev() {
        let t = (2 * l + 1) as f64 / x * cur;
        let below = if modified { t + above } else { t - above };
        if l <= l_max + 1 {
            out[l] = cur;
        }
        above = cur;
        cur = below;
        if l - 1 <= l_max + 1 {
            out[l - 1] = cur;
        }
        if cur.abs() > 1e250 {
            out.iter_mut().for_each(|v| *v *= 1e-250);
            above *= 1e-250;
            cur *= 1e-250;
        }
    }
    let scale = if f0.abs() >= 0.1 * f1.abs() { f0 / out[0] } else { f1 / out[1] };
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

/// `j_l(x)` for `l = 0..=l_max+1`.
fn real_j(l_max: usize, x: f64) -> Vec<f64> {
    let n = l_max + 2;
    if x == 0.0 {
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        return v;
    }
    if x < 1.0 {
        return (0..n).map(|l| series_j(l, x, false)).collect();
    }
    let j0 = x.sin() / x;
    let j1 = x.sin() / (x * x) - x.cos() / x;
    if x > (l_max + 1) as f64 {
        let mut v = vec![j0, j1];
        for l in 1..n - 1 {
            let next = (2 * l + 1) as f64 / x * v[l] - v[l - 1];
            v.push(next);
        }
        v.truncate(n);
        return v;
    }
    let mut v = miller(l_max, x, false, j0, j1);
    v.truncate(n);
    v
}

/// `n_l(x)` by upward recurrence.
fn real_n(l_max: usize, x: f64) -> Vec<f64> {
    let n = l_max + 2;
    let mut v = vec![-x.cos() / x, -x.cos() / (x * x) - x.sin() / x];
    for l in 1..n - 1 {
        let next = (2 * l + 1) as f64 / x * v[l] - v[l - 1];
        v.push(next);
    }
    v.truncate(n);
    v
}

fn real_i(l_max: usize, x: f64) -> Vec<f64> {
    let n = l_max + 2;
    if x == 0.0 {
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        return v;
    }
    if x < 1.0 {
        return (0..n).map(|l| series_j(l, x, true)).collect();
    }
    let i0 = x.sinh() / x;
    let i1 = x.cosh() / x - x.sinh() / (x * x);
    let mut v = miller(l_max, x, true, i0, i1);
    v.truncate(n);
    v
}

/// `k̃_l(x)` by upward recurrence.
fn real_k_tilde(l_max: usize, x: f64) -> Vec<f64> {
    let n = l_max + 2;
    let e = (-x).exp();
    let mut v = vec![e / x, e * (1.0 / x + 1.0 / (x * x))];
    for l in 1..n - 1 {
        let next = v[l - 1] + (2 * l + 1) as f64 / x * v[l];
        v.push(next);
    }
    v.truncate(n);
    v
}

fn derivs_standard(v: &[f64], x: f64, l_max: usize) -> Vec<f64> {
    // f'_l = f_{l-1} - (l+1)/x f_l, f'_0 = -f_1
    (0..=l_max)
        .map(|l| if l == 0 { -v[1] } else { v[l - 1] - (l + 1) as f64 / x * v[l] })
        .collect()
}

fn to_c(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|x| Complex64::new(*x, 0.0)).collect()
}

/// All orders `0..=l_max` of one kind at argument `x`.
pub fn sph_bessel_all(kind: BesselKind, l_max: usize, x: f64) -> Result<BesselValues> {
    if x < 0.0 || !x.is_finite() || (x == 0.0 && kind.singular_at_origin()) {
        return Err(DwmsError::Domain(format!("{kind:?} undefined at x = {x}")));
    }
    if kind == BesselKind::ModI && x > 700.0 {
        return Err(DwmsError::Domain(format!("i_l overflows at x = {x}")));
    }
    let n = l_max + 1;
    let out = match kind {
        BesselKind::J => {
            let v = real_j(l_max, x);
            let d = if x == 0.0 {
                (0..n).map(|l| if l == 1 { 1.0 / 3.0 } else { 0.0 }).collect()
            } else {
                derivs_standard(&v, x, l_max)
            };
            BesselValues { values: to_c(&v[..n]), derivs: to_c(&d) }
        }
        BesselKind::N => {
            let v = real_n(l_max, x);
            let d = derivs_standard(&v, x, l_max);
            BesselValues { values: to_c(&v[..n]), derivs: to_c(&d) }
        }
        BesselKind::HPlus | BesselKind::HMinus => {
            let s = if kind == BesselKind::HPlus { 1.0 } else { -1.0 };
            let j = real_j(l_max, x);
            let y = real_n(l_max, x);
            let dj = derivs_standard(&j, x, l_max);
            let dy = derivs_standard(&y, x, l_max);
            BesselValues {
                values: (0..n).map(|l| Complex64::new(j[l], s * y[l])).collect(),
                derivs: (0..n).map(|l| Complex64::new(dj[l], s * dy[l])).collect(),
            }
        }
        BesselKind::ModI => {
            let v = real_i(l_max, x);
            let d: Vec<f64> = if x == 0.0 {
                (0..n).map(|l| if l == 1 { 1.0 / 3.0 } else { 0.0 }).collect()
            } else {
                (0..n).map(|l| if l == 0 { v[1] } else { v[l - 1] - (l + 1) as f64 / x * v[l] }).collect()
            };
            BesselValues { values: to_c(&v[..n]), derivs: to_c(&d) }
        }
        BesselKind::ModK => {
            let v = real_k_tilde(l_max, x);
            let sign = |l: usize| if l % 2 == 0 { 1.0 } else { -1.0 };
            let d: Vec<f64> = (0..n)
                .map(|l| sign(l) * if l == 0 { -v[1] } else { -v[l - 1] - (l + 1) as f64 / x * v[l] })
                .collect();
            let vals: Vec<f64> = (0..n).map(|l| sign(l) * v[l]).collect();
            BesselValues { values: to_c(&vals), derivs: to_c(&d) }
        }
    };
    Ok(out)
}

pub fn sph_bessel(kind: BesselKind, l: usize, x: f64) -> Result<Complex64> {
    Ok(sph_bessel_all(kind, l, x)?.values[l])
}

pub fn sph_bessel_deriv(kind: BesselKind, l: usize, x: f64) -> Result<Complex64> {
    Ok(sph_bessel_all(kind, l, x)?.derivs[l])
}

/// Diagonal channel matrix `f(k r)` with entry `(L,L)` equal to `f_l(k r)`.
#[derive(Clone, Copy, Debug)]
pub struct DiagonalRadialMatrix {
    pub kind: BesselKind,
    pub wavenumber: f64,
    pub trunc: Truncation,
}

impl DiagonalRadialMatrix {
    pub fn new(kind: BesselKind, wavenumber: f64, trunc: Truncation) -> Self {
        Self { kind, wavenumber, trunc }
    }

    /// Diagonal entries of `f(kr)` and of `d/dr f(kr)`, one per channel.
    pub fn diagonal(&self, r: f64) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        let b = sph_bessel_all(self.kind, self.trunc.l_max, self.wavenumber * r)?;
        let ls = self.trunc.l_values();
        let v = ls.iter().map(|l| b.values[*l]).collect();
        let d = ls.iter().map(|l| b.derivs[*l] * self.wavenumber).collect();
        Ok((v, d))
    }

    pub fn matrix(&self, r: f64) -> Result<(CMat, CMat)> {
        let (v, d) = self.diagonal(r)?;
        Ok((
            CMat::from_diagonal(&CVec::from_vec(v)),
            CMat::from_diagonal(&CVec::from_vec(d)),
        ))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseKind {
    /// `ξ = diag(i^l)`.
    Xi,
    /// `η = diag((-1)^l)`.
    Eta,
}

#[derive(Clone, Copy, Debug)]
pub struct PhaseMatrix {
    pub kind: PhaseKind,
    pub trunc: Truncation,
}

impl PhaseMatrix {
    pub fn xi(trunc: Truncation) -> Self {
        Self { kind: PhaseKind::Xi, trunc }
    }

    pub fn eta(trunc: Truncation) -> Self {
        Self { kind: PhaseKind::Eta, trunc }
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        self.trunc
            .l_values()
            .into_iter()
            .map(|l| match self.kind {
                PhaseKind::Xi => i_pow(l as i64),
                PhaseKind::Eta => Complex64::new(if l % 2 == 0 { 1.0 } else { -1.0 }, 0.0),
            })
            .collect()
    }

    pub fn matrix(&self) -> CMat {
        CMat::from_diagonal(&CVec::from_vec(self.diagonal()))
    }
}

/// `i^n` for any integer `n`.
pub fn i_pow(n: i64) -> Complex64 {
    match n.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Unit vector along `v`, or `ẑ` for the zero vector.
pub fn direction(v: [f64; 3]) -> (f64, [f64; 3]) {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n == 0.0 {
        (0.0, [0.0, 0.0, 1.0])
    } else {
        (n, [v[0] / n, v[1] / n, v[2] / n])
    }
}

/// Truncated `4π Σ_L i^l j_l(kr) Y_L(k̂) Y_L(r̂)`.
pub fn plane_wave_expansion(k_vec: [f64; 3], r_vec: [f64; 3], trunc: Truncation) -> Complex64 {
    let (k, kh) = direction(k_vec);
    let (r, rh) = direction(r_vec);
    let j = sph_bessel_all(BesselKind::J, trunc.l_max, k * r).expect("non-negative argument");
    let mut ev = ShEvaluator::new(trunc.l_max);
    let mut yk = vec![0.0; trunc.dim()];
    let mut yr = vec![0.0; trunc.dim()];
    ev.values(kh, &mut yk);
    ev.values(rh, &mut yr);
    let mut sum = Complex64::new(0.0, 0.0);
    for (idx, (a, b)) in yk.iter().zip(&yr).enumerate() {
        let l = crate::angular::AngularIndex::from_index(idx).l;
        sum += i_pow(l as i64) * j.values[l] * (a * b);
    }
    sum * 4.0 * PI
}
