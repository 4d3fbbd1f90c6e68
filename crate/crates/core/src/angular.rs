//! Real spherical harmonics, Gaunt coefficients and Gaunt-matrix algebra.
//!
//! Convention: `Y_{l,m} ∝ P_l^{|m|}(cos θ) cos(mφ)` for `m ≥ 0` and
//! `∝ P_l^{|m|}(cos θ) sin(|m|φ)` for `m < 0`, orthonormal on the sphere,
//! without the Condon-Shortley phase.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{DwmsError, Result};
use crate::linalg::{CMat, RMat};
use crate::quadrature::gauss_legendre;

/// Compound angular index `(l, m)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AngularIndex {
    pub l: usize,
    pub m: i64,
}

impl AngularIndex {
    pub fn new(l: usize, m: i64) -> Result<Self> {
        if m.unsigned_abs() as usize > l {
            return Err(DwmsError::Domain(format!("|m| = {} exceeds l = {l}", m.abs())));
        }
        Ok(Self { l, m })
    }

    /// Linear index `l² + l + m`.
    pub fn index(self) -> usize {
        ((self.l * self.l + self.l) as i64 + self.m) as usize
    }

    pub fn from_index(idx: usize) -> Self {
        let l = (idx as f64).sqrt().floor() as usize;
        let l = if (l + 1) * (l + 1) <= idx { l + 1 } else { l };
        let m = idx as i64 - (l * l + l) as i64;
        Self { l, m }
    }
}

/// Channel space of all `(l, m)` with `l ≤ l_max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Truncation {
    pub l_max: usize,
}

impl Truncation {
    pub fn new(l_max: usize) -> Self {
        Self { l_max }
    }

    pub fn dim(self) -> usize {
        (self.l_max + 1) * (self.l_max + 1)
    }

    pub fn indices(self) -> impl Iterator<Item = AngularIndex> {
        (0..self.dim()).map(AngularIndex::from_index)
    }

    /// `l` of every channel, in linear order.
    pub fn l_values(self) -> Vec<usize> {
        self.indices().map(|a| a.l).collect()
    }

    /// Number of channels with `l ≤ l_sub`.
    pub fn sub_dim(self, l_sub: usize) -> usize {
        let l = l_sub.min(self.l_max);
        (l + 1) * (l + 1)
    }
}

fn check_unit(dir: [f64; 3]) -> Result<()> {
    let n = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
    if (n - 1.0).abs() > 1e-12 {
        return Err(DwmsError::Domain(format!("direction has norm {n}, expected 1")));
    }
    Ok(())
}

/// Normalized associated Legendre functions with the `sin^m θ` factor removed:
/// `P̄_l^m(x) = sin^m θ · Q[l][m]`. Includes the `1/√(4π)` normalization.
fn reduced_legendre(l_max: usize, x: f64, out: &mut Vec<f64>) {
    let n = (l_max + 1) * (l_max + 2) / 2;
    out.clear();
    out.resize(n, 0.0);
    let at = |l: usize, m: usize| l * (l + 1) / 2 + m;
    let mut diag = 1.0 / (4.0 * PI).sqrt();
    for m in 0..=l_max {
        if m > 0 {
            diag *= ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
        }
        out[at(m, m)] = diag;
        if m < l_max {
            out[at(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * x * diag;
        }
        for l in (m + 2)..=l_max {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            out[at(l, m)] = a * (x * out[at(l - 1, m)] - b * out[at(l - 2, m)]);
        }
    }
}

#[inline]
fn tri(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Spherical angles of a unit vector: (cos θ, sin θ, φ).
fn angles(dir: [f64; 3]) -> (f64, f64, f64) {
    let x = dir[2].clamp(-1.0, 1.0);
    let s = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
    let phi = if s > 0.0 { dir[1].atan2(dir[0]) } else { 0.0 };
    (x, s, phi)
}

/// Reusable evaluator of all real harmonics up to `l_max` at one direction.
#[derive(Clone, Debug)]
pub struct ShEvaluator {
    l_max: usize,
    legendre: Vec<f64>,
    cos_m: Vec<f64>,
    sin_m: Vec<f64>,
    sin_pow: Vec<f64>,
}

impl ShEvaluator {
    pub fn new(l_max: usize) -> Self {
        Self {
            l_max,
            legendre: Vec::new(),
            cos_m: vec![0.0; l_max + 2],
            sin_m: vec![0.0; l_max + 2],
            sin_pow: vec![0.0; l_max + 2],
        }
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    fn prepare(&mut self, x: f64, s: f64, phi: f64) {
        reduced_legendre(self.l_max, x, &mut self.legendre);
        let mut sp = 1.0;
        for m in 0..=self.l_max + 1 {
            self.cos_m[m] = (m as f64 * phi).cos();
            self.sin_m[m] = (m as f64 * phi).sin();
            self.sin_pow[m] = sp;
            sp *= s;
        }
    }

    /// Fills `out` (length `(l_max+1)²`) with `Y_L(dir)`; `dir` must be unit.
    pub fn values(&mut self, dir: [f64; 3], out: &mut [f64]) {
        let (x, s, phi) = angles(dir);
        self.prepare(x, s, phi);
        for l in 0..=self.l_max {
            let base = l * l + l;
            out[base] = self.legendre[tri(l, 0)];
            for m in 1..=l {
                let p = std::f64::consts::SQRT_2 * self.sin_pow[m] * self.legendre[tri(l, m)];
                out[base + m] = p * self.cos_m[m];
                out[base - m] = p * self.sin_m[m];
            }
        }
    }

    /// Values and tangential gradients `∇_S Y_L` (3-vectors) at `dir`.
    pub fn values_and_gradients(&mut self, dir: [f64; 3], vals: &mut [f64], grads: &mut [[f64; 3]]) {
        let (x, s, phi) = angles(dir);
        self.prepare(x, s, phi);
        let theta_hat = [x * phi.cos(), x * phi.sin(), -s];
        let phi_hat = [-phi.sin(), phi.cos(), 0.0];
        let pow_m1 = |m: usize, sp: &[f64]| if m == 0 { 0.0 } else { sp[m - 1] };
        for l in 0..=self.l_max {
            let base = l * l + l;
            for m in 0..=l {
                let c = if m == 0 { 1.0 } else { std::f64::consts::SQRT_2 };
                let q = self.legendre[tri(l, m)];
                let q_up = if m < l { self.legendre[tri(l, m + 1)] } else { 0.0 };
                let lm = ((l - m) as f64 * (l + m + 1) as f64).sqrt();
                let value = c * self.sin_pow[m] * q;
                let d_theta = c
                    * (m as f64 * pow_m1(m, &self.sin_pow) * x * q - self.sin_pow[m + 1] * lm * q_up);
                let d_phi = c * pow_m1(m, &self.sin_pow) * q;
                // cos(mφ) branch
                let (cm, sm) = (self.cos_m[m], self.sin_m[m]);
                vals[base + m] = value * cm;
                let gt = d_theta * cm;
                let gp = -(m as f64) * d_phi * sm;
                grads[base + m] = [
                    gt * theta_hat[0] + gp * phi_hat[0],
                    gt * theta_hat[1] + gp * phi_hat[1],
                    gt * theta_hat[2] + gp * phi_hat[2],
                ];
                if m > 0 {
                    vals[base - m] = value * sm;
                    let gt = d_theta * sm;
                    let gp = m as f64 * d_phi * cm;
                    grads[base - m] = [
                        gt * theta_hat[0] + gp * phi_hat[0],
                        gt * theta_hat[1] + gp * phi_hat[1],
                        gt * theta_hat[2] + gp * phi_hat[2],
                    ];
                }
            }
        }
    }
}

/// All `Y_L(dir)` for `l ≤ l_max` as a vector.
pub fn sh_vector(l_max: usize, dir: [f64; 3]) -> Result<Vec<f64>> {
    check_unit(dir)?;
    let mut ev = ShEvaluator::new(l_max);
    let mut out = vec![0.0; (l_max + 1) * (l_max + 1)];
    ev.values(dir, &mut out);
    Ok(out)
}

pub fn eval_real_sh(idx: AngularIndex, dir: [f64; 3]) -> Result<f64> {
    Ok(sh_vector(idx.l, dir)?[idx.index()])
}

/// Tangential gradient of `Y_L` on the unit sphere, so that
/// `∇[f(r) Y_L(r̂)] = f' Y_L r̂ + (f/r) sh_gradient(L, r̂)`.
pub fn sh_gradient(idx: AngularIndex, dir: [f64; 3]) -> Result<[f64; 3]> {
    check_unit(dir)?;
    let l_max = idx.l;
    let n = (l_max + 1) * (l_max + 1);
    let mut ev = ShEvaluator::new(l_max);
    let mut vals = vec![0.0; n];
    let mut grads = vec![[0.0; 3]; n];
    ev.values_and_gradients(dir, &mut vals, &mut grads);
    Ok(grads[idx.index()])
}

/// `∫₀^{2π} Φ_{m1} Φ_{m2} Φ_{m3} dφ` with `Φ_m = cos(mφ)` (m ≥ 0) or `sin(|m|φ)`.
fn phi_integral(m1: i64, m2: i64, m3: i64) -> f64 {
    let half = |m: i64, sign: i64| -> Complex64 {
        if m >= 0 {
            Complex64::new(0.5, 0.0)
        } else {
            // sin(aφ) = (e^{iaφ} - e^{-iaφ}) / 2i
            Complex64::new(0.0, -0.5 * sign as f64)
        }
    };
    let ms = [m1, m2, m3];
    let mut total = Complex64::new(0.0, 0.0);
    for mask in 0..8 {
        let mut freq = 0i64;
        let mut coef = Complex64::new(1.0, 0.0);
        for (k, m) in ms.iter().enumerate() {
            let sign = if mask & (1 << k) != 0 { -1 } else { 1 };
            freq += sign * m.abs();
            coef *= half(*m, sign);
        }
        if freq == 0 {
            total += coef;
        }
    }
    2.0 * PI * total.re
}

/// Selection rules for the real-harmonic Gaunt coefficient.
fn gaunt_allowed(a: AngularIndex, b: AngularIndex, c: AngularIndex) -> bool {
    let (l1, l2, l3) = (a.l, b.l, c.l);
    if (l1 + l2 + l3) % 2 == 1 {
        return false;
    }
    if l3 > l1 + l2 || l3 + l1.min(l2) < l1.max(l2) {
        return false;
    }
    let (m1, m2, m3) = (a.m.abs(), b.m.abs(), c.m.abs());
    if m3 != m1 + m2 && m3 != (m1 - m2).abs() {
        return false;
    }
    let negatives = [a.m, b.m, c.m].iter().filter(|m| **m < 0).count();
    negatives % 2 == 0
}

/// Gauss-Legendre nodes in cos θ with tabulated reduced Legendre functions,
/// exact for Gaunt integrals with `l1 + l2 + l3 ≤ 2·n − 1`.
#[derive(Debug)]
struct ThetaRule {
    l_max: usize,
    weights: Vec<f64>,
    sin2: Vec<f64>,
    legendre: Vec<Vec<f64>>,
}

impl ThetaRule {
    fn new(l_max: usize) -> Self {
        let n = (3 * l_max) / 2 + 2;
        let (x, w) = gauss_legendre(n);
        let mut legendre = Vec::with_capacity(n);
        for xi in &x {
            let mut buf = Vec::new();
            reduced_legendre(l_max, *xi, &mut buf);
            legendre.push(buf);
        }
        let sin2 = x.iter().map(|x| 1.0 - x * x).collect();
        Self { l_max, weights: w, sin2, legendre }
    }

    fn theta_integral(&self, a: AngularIndex, b: AngularIndex, c: AngularIndex) -> f64 {
        let (ma, mb, mc) = (a.m.unsigned_abs() as usize, b.m.unsigned_abs() as usize, c.m.unsigned_abs() as usize);
        let half_pow = (ma + mb + mc) / 2;
        let mut acc = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            let t = &self.legendre[k];
            acc += w
                * self.sin2[k].powi(half_pow as i32)
                * t[tri(a.l, ma)]
                * t[tri(b.l, mb)]
                * t[tri(c.l, mc)];
        }
        acc
    }

    fn gaunt(&self, a: AngularIndex, b: AngularIndex, c: AngularIndex) -> f64 {
        debug_assert!(a.l.max(b.l).max(c.l) <= self.l_max);
        if !gaunt_allowed(a, b, c) {
            return 0.0;
        }
        let norm = [a.m, b.m, c.m].iter().map(|m| if *m == 0 { 1.0 } else { std::f64::consts::SQRT_2 }).product::<f64>();
        let phi = phi_integral(a.m, b.m, c.m);
        if phi == 0.0 {
            return 0.0;
        }
        norm * phi * self.theta_integral(a, b, c)
    }
}

/// Gaunt coefficient `I(L,L',L'') = ∫ Y_L Y_L' Y_L'' dΩ` for arbitrary indices.
pub fn gaunt(a: AngularIndex, b: AngularIndex, c: AngularIndex) -> f64 {
    if !gaunt_allowed(a, b, c) {
        return 0.0;
    }
    let l = a.l.max(b.l).max(c.l);
    GauntTable::shared(l.div_ceil(2)).rule.gaunt(a, b, c)
}

/// Gaunt coefficients for a truncation: cached node tables plus the sparse
/// Gaunt matrices `Γ^(L'')` restricted to `L, L' ≤ l_max`, for `l'' ≤ 2·l_max`.
#[derive(Debug)]
pub struct GauntTable {
    trunc: Truncation,
    rule: ThetaRule,
    matrices: Vec<Vec<(u32, u32, f64)>>,
}

impl GauntTable {
    pub fn new(l_max: usize) -> Self {
        let trunc = Truncation::new(l_max);
        let rule = ThetaRule::new(2 * l_max);
        let dim = trunc.dim();
        let dim2 = Truncation::new(2 * l_max).dim();
        let mut matrices = Vec::with_capacity(dim2);
        for c in 0..dim2 {
            let ci = AngularIndex::from_index(c);
            let mut entries = Vec::new();
            for a in 0..dim {
                let ai = AngularIndex::from_index(a);
                for b in a..dim {
                    let bi = AngularIndex::from_index(b);
                    let g = rule.gaunt(ai, bi, ci);
                    if g != 0.0 {
                        entries.push((a as u32, b as u32, g));
                        if a != b {
                            entries.push((b as u32, a as u32, g));
                        }
                    }
                }
            }
            matrices.push(entries);
        }
        Self { trunc, rule, matrices }
    }

    /// Process-wide cache keyed by `l_max`.
    pub fn shared(l_max: usize) -> Arc<GauntTable> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GauntTable>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(t) = cache.lock().expect("gaunt cache poisoned").get(&l_max) {
            return t.clone();
        }
        let table = Arc::new(GauntTable::new(l_max));
        cache.lock().expect("gaunt cache poisoned").entry(l_max).or_insert(table).clone()
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    /// Any coefficient with all `l ≤ 2·l_max`.
    pub fn get(&self, a: AngularIndex, b: AngularIndex, c: AngularIndex) -> f64 {
        self.rule.gaunt(a, b, c)
    }

    /// Nonzero entries `(L, L', I)` of `Γ^(L'')`.
    pub fn entries(&self, l2_index: usize) -> &[(u32, u32, f64)] {
        &self.matrices[l2_index]
    }

    /// Number of Gaunt matrices held (`(2 l_max + 1)²`).
    pub fn band_dim(&self) -> usize {
        self.matrices.len()
    }
}

/// Gaunt coefficients for arbitrary triples with every `l ≤ l_max`, holding only
/// the θ-rule tables (no per-matrix storage).
#[derive(Debug)]
pub struct GauntRule {
    rule: ThetaRule,
}

impl GauntRule {
    pub fn shared(l_max: usize) -> Arc<GauntRule> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GauntRule>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().expect("gaunt rule cache poisoned");
        map.entry(l_max).or_insert_with(|| Arc::new(GauntRule { rule: ThetaRule::new(l_max) })).clone()
    }

    pub fn l_max(&self) -> usize {
        self.rule.l_max
    }

    pub fn get(&self, a: AngularIndex, b: AngularIndex, c: AngularIndex) -> f64 {
        self.rule.gaunt(a, b, c)
    }
}

/// `Γ^(L'')` as a dense real symmetric matrix.
pub fn gaunt_matrix(l2: AngularIndex, trunc: Truncation) -> Result<RMat> {
    if l2.l > 2 * trunc.l_max {
        return Err(DwmsError::Domain(format!("l'' = {} exceeds 2·l_max = {}", l2.l, 2 * trunc.l_max)));
    }
    let table = GauntTable::shared(trunc.l_max);
    let dim = trunc.dim();
    let mut m = RMat::zeros(dim, dim);
    for &(a, b, g) in table.entries(l2.index()) {
        m[(a as usize, b as usize)] = g;
    }
    Ok(m)
}

/// `Λ[a] = Σ_L a_L Γ^(L)` for complex coefficients indexed by `L` with `l ≤ 2·l_max`.
pub fn lambda_combination(a: &[Complex64], trunc: Truncation) -> Result<CMat> {
    let table = GauntTable::shared(trunc.l_max);
    if a.len() > table.band_dim() {
        return Err(DwmsError::Dimension(format!(
            "coefficient vector of length {} exceeds band dimension {}",
            a.len(),
            table.band_dim()
        )));
    }
    let dim = trunc.dim();
    let mut m = CMat::zeros(dim, dim);
    for (l2, coef) in a.iter().enumerate() {
        if *coef == Complex64::new(0.0, 0.0) {
            continue;
        }
        for &(i, j, g) in table.entries(l2) {
            m[(i as usize, j as usize)] += coef * g;
        }
    }
    Ok(m)
}

/// Real-coefficient variant of [`lambda_combination`].
pub fn lambda_combination_real(a: &[f64], table: &GauntTable) -> RMat {
    let dim = table.truncation().dim();
    let mut m = RMat::zeros(dim, dim);
    for (l2, coef) in a.iter().enumerate().take(table.band_dim()) {
        if *coef == 0.0 {
            continue;
        }
        for &(i, j, g) in table.entries(l2) {
            m[(i as usize, j as usize)] += coef * g;
        }
    }
    m
}

/// Recover `a` from `Λ[a]` through the first row, `a_L = √(4π) Λ[a]_{00,L}`.
///
/// Only coefficients with `l ≤ l_max` appear in the first row.
pub fn first_row_readout(lambda: &CMat) -> Vec<Complex64> {
    let s = (4.0 * PI).sqrt();
    lambda.row(0).iter().map(|z| z * s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::SphereQuadrature;

    fn idx(l: usize, m: i64) -> AngularIndex {
        AngularIndex::new(l, m).unwrap()
    }

    #[test]
    fn index_roundtrip() {
        for i in 0..400 {
            let a = AngularIndex::from_index(i);
            assert!(a.m.unsigned_abs() as usize <= a.l);
            assert_eq!(a.index(), i);
        }
        assert_eq!(Truncation::new(4).dim(), Truncation::new(4).indices().count());
    }

    #[test]
    fn trivial_values() {
        let y00 = eval_real_sh(idx(0, 0), [0.6, 0.0, 0.8]).unwrap();
        assert!((y00 - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-15);
        let y10 = eval_real_sh(idx(1, 0), [0.0, 0.0, 1.0]).unwrap();
        assert!((y10 - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-15);
        assert!(eval_real_sh(idx(1, 0), [0.0, 0.0, 1.1]).is_err());
    }

    #[test]
    fn p_orbitals_follow_cartesian_components() {
        let d = [0.48, -0.6, 0.64];
        let y = sh_vector(1, d).unwrap();
        let n = (3.0 / (4.0 * PI)).sqrt();
        assert!((y[1] - n * d[1]).abs() < 1e-14);
        assert!((y[2] - n * d[2]).abs() < 1e-14);
        assert!((y[3] - n * d[0]).abs() < 1e-14);
    }

    #[test]
    fn orthonormality() {
        let l_max = 8;
        let q = SphereQuadrature::exact_to_degree(2 * l_max);
        let dim = Truncation::new(l_max).dim();
        let mut ev = ShEvaluator::new(l_max);
        let mut y = vec![0.0; dim];
        let mut gram = RMat::zeros(dim, dim);
        for n in &q.nodes {
            ev.values(n.dir, &mut y);
            for a in 0..dim {
                for b in 0..dim {
                    gram[(a, b)] += n.weight * y[a] * y[b];
                }
            }
        }
        let defect = (gram - RMat::identity(dim, dim)).abs().max();
        assert!(defect < 1e-10, "{defect}");
    }

    #[test]
    fn gaunt_first_row_and_parity() {
        let s = 1.0 / (4.0 * PI).sqrt();
        for a in 0..25 {
            for b in 0..25 {
                let g = gaunt(idx(0, 0), AngularIndex::from_index(a), AngularIndex::from_index(b));
                let expect = if a == b { s } else { 0.0 };
                assert!((g - expect).abs() < 1e-14);
            }
        }
        assert_eq!(gaunt(idx(1, 0), idx(1, 1), idx(1, -1)), 0.0);
        assert_eq!(gaunt(idx(2, 1), idx(1, 0), idx(2, 1)), 0.0);
    }

    #[test]
    fn gaunt_matches_direct_quadrature() {
        let q = SphereQuadrature::new(40, 80);
        let triples = [
            (idx(1, 0), idx(1, 0), idx(2, 0)),
            (idx(2, -1), idx(3, 2), idx(3, -1)),
            (idx(4, 3), idx(2, -2), idx(4, -1)),
            (idx(5, 5), idx(5, -5), idx(6, 0)),
            (idx(3, 1), idx(3, 1), idx(2, 2)),
        ];
        for (a, b, c) in triples {
            let lmax = a.l.max(b.l).max(c.l);
            let direct = q.integrate(|d| {
                let y = sh_vector(lmax, d).unwrap();
                y[a.index()] * y[b.index()] * y[c.index()]
            });
            let g = gaunt(a, b, c);
            assert!((g - direct).abs() < 1e-12, "{a:?} {b:?} {c:?}: {g} vs {direct}");
        }
    }

    /// Zero-m Gaunt coefficients from the closed-form 3j symbol.
    #[test]
    fn gaunt_zero_m_matches_three_j() {
        fn ln_fact(n: usize) -> f64 {
            (1..=n).map(|k| (k as f64).ln()).sum()
        }
        fn three_j_zero(l1: usize, l2: usize, l3: usize) -> f64 {
            let j = l1 + l2 + l3;
            if j % 2 == 1 || l3 > l1 + l2 || l3 + l1.min(l2) < l1.max(l2) {
                return 0.0;
            }
            let g = j / 2;
            let sign = if g % 2 == 0 { 1.0 } else { -1.0 };
            let ln = 0.5 * (ln_fact(j - 2 * l1) + ln_fact(j - 2 * l2) + ln_fact(j - 2 * l3) - ln_fact(j + 1))
                + ln_fact(g)
                - ln_fact(g - l1)
                - ln_fact(g - l2)
                - ln_fact(g - l3);
            sign * ln.exp()
        }
        for l1 in 0..6 {
            for l2 in 0..6 {
                for l3 in 0..11 {
                    let w = three_j_zero(l1, l2, l3);
                    let expect = (((2 * l1 + 1) * (2 * l2 + 1) * (2 * l3 + 1)) as f64 / (4.0 * PI)).sqrt() * w * w;
                    let g = gaunt(idx(l1, 0), idx(l2, 0), idx(l3, 0));
                    assert!((g - expect).abs() < 1e-13, "{l1} {l2} {l3}: {g} vs {expect}");
                }
            }
        }
    }

    #[test]
    fn gaunt_matrix_basics() {
        let t = Truncation::new(4);
        let g0 = gaunt_matrix(idx(0, 0), t).unwrap();
        let expect = RMat::identity(t.dim(), t.dim()) / (4.0 * PI).sqrt();
        assert!((g0 - expect).abs().max() < 1e-14);
        let g = gaunt_matrix(idx(3, -2), t).unwrap();
        assert!((&g - g.transpose()).abs().max() == 0.0);
        assert!(gaunt_matrix(idx(9, 0), t).is_err());
    }

    #[test]
    fn gradient_finite_difference_and_eigenvalue() {
        let l_max = 5;
        let dir = crate::quadrature::normalize([0.3, -0.5, 0.7]);
        let t1 = crate::quadrature::normalize(crate::quadrature::cross(dir, [0.0, 0.0, 1.0]));
        let t2 = crate::quadrature::cross(dir, t1);
        for idx_l in 0..Truncation::new(l_max).dim() {
            let a = AngularIndex::from_index(idx_l);
            let g = sh_gradient(a, dir).unwrap();
            for t in [t1, t2] {
                let h = 1e-5;
                let p = crate::quadrature::normalize(crate::quadrature::add(dir, crate::quadrature::scale(t, h)));
                let m = crate::quadrature::normalize(crate::quadrature::add(dir, crate::quadrature::scale(t, -h)));
                let fd = (eval_real_sh(a, p).unwrap() - eval_real_sh(a, m).unwrap()) / (2.0 * h);
                let an = crate::quadrature::dot(g, t);
                assert!((fd - an).abs() < 1e-6, "{a:?}: {fd} vs {an}");
            }
        }
        assert_eq!(sh_gradient(idx(0, 0), dir).unwrap(), [0.0, 0.0, 0.0]);
        let q = SphereQuadrature::exact_to_degree(2 * l_max + 2);
        for a in Truncation::new(l_max).indices() {
            let e = q.integrate(|d| {
                let g = sh_gradient(a, d).unwrap();
                crate::quadrature::dot(g, g)
            });
            assert!((e - (a.l * (a.l + 1)) as f64).abs() < 1e-9, "{a:?} {e}");
        }
    }

    #[test]
    fn gradient_at_poles_is_finite() {
        for dir in [[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]] {
            let g = sh_gradient(idx(1, 1), dir).unwrap();
            let n = (3.0 / (4.0 * PI)).sqrt();
            assert!((g[0] - n).abs() < 1e-14 && g[1].abs() < 1e-14 && g[2].abs() < 1e-14);
            let g = sh_gradient(idx(1, -1), dir).unwrap();
            assert!(g[0].abs() < 1e-14 && (g[1] - n).abs() < 1e-14);
        }
    }
}
