//! Re-expansion of spherical waves about displaced centers (`D̂`, `D`, `F`,
//! `D⁽⁻⁾`) and the near-region couplings `K^{ji}` between two centers.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::angular::{AngularIndex, GauntRule, ShEvaluator, Truncation};
use crate::error::{DwmsError, Result};
use crate::linalg::{CMat, CVec};
use crate::quadrature::{add, dot, norm, scale, sub, SphereQuadrature};
use crate::radial::{FreeSolution, RadialFunction};
use crate::specfun::{direction, i_pow, sph_bessel_all, BesselKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranslationKind {
    /// `Λ[4π ξ j(kR) Y(R̂)]`.
    DHat,
    /// `ξ D̂ ξ†`, real orthogonal.
    D,
    /// `ξ Λ[4π ξ h⁺(kR) Y(R̂)] ξ†`, near-region re-expansion of outgoing waves.
    F,
    /// `ξ† Λ[4π i(κR) Y(R̂)] ξ`, regular re-expansion below zero energy.
    DNeg,
}

/// Translation matrix with rows in `rows` and columns in `cols`; rectangular
/// blocks let the summed index run beyond the truncation of the target.
#[derive(Clone, Debug)]
pub struct TranslationMatrix {
    pub kind: TranslationKind,
    pub wavenumber: f64,
    pub displacement: [f64; 3],
    pub rows: Truncation,
    pub cols: Truncation,
    pub matrix: CMat,
}

impl TranslationMatrix {
    pub fn new(kind: TranslationKind, wavenumber: f64, displacement: [f64; 3], trunc: Truncation) -> Result<Self> {
        Self::block(kind, wavenumber, displacement, trunc, trunc)
    }

    pub fn block(
        kind: TranslationKind,
        wavenumber: f64,
        displacement: [f64; 3],
        rows: Truncation,
        cols: Truncation,
    ) -> Result<Self> {
        if wavenumber <= 0.0 || !wavenumber.is_finite() {
            return Err(DwmsError::Domain(format!("translation needs a positive wavenumber, got {wavenumber}")));
        }
        let (dist, dir) = direction(displacement);
        if kind == TranslationKind::F && dist == 0.0 {
            return Err(DwmsError::Geometry("near-field re-expansion needs a nonzero displacement".into()));
        }
        let band = rows.l_max + cols.l_max;
        let bessel = match kind {
            TranslationKind::DHat | TranslationKind::D => BesselKind::J,
            TranslationKind::F => BesselKind::HPlus,
            TranslationKind::DNeg => BesselKind::ModI,
        };
        let radial = sph_bessel_all(bessel, band, wavenumber * dist)?;
        let mut y = vec![0.0; Truncation::new(band).dim()];
        ShEvaluator::new(band).values(dir, &mut y);
        let coef: Vec<Complex64> = y
            .iter()
            .enumerate()
            .map(|(idx, yv)| {
                let l = AngularIndex::from_index(idx).l;
                let phase = if kind == TranslationKind::DNeg { Complex64::new(1.0, 0.0) } else { i_pow(l as i64) };
                phase * radial.values[l] * (4.0 * PI * yv)
            })
            .collect();
        let rule = GauntRule::shared(band);
        let n_cols = cols.dim();
        let data: Vec<Vec<Complex64>> = (0..rows.dim())
            .into_par_iter()
            .map(|a| {
                let ai = AngularIndex::from_index(a);
                (0..n_cols)
                    .map(|b| {
                        let bi = AngularIndex::from_index(b);
                        let sum = gaunt_sum(&rule, ai, bi, &coef);
                        let phase = match kind {
                            TranslationKind::DHat => Complex64::new(1.0, 0.0),
                            TranslationKind::D | TranslationKind::F => i_pow(ai.l as i64 - bi.l as i64),
                            TranslationKind::DNeg => i_pow(bi.l as i64 - ai.l as i64),
                        };
                        phase * sum
                    })
                    .collect()
            })
            .collect();
        let matrix = CMat::from_fn(rows.dim(), n_cols, |a, b| data[a][b]);
        Ok(Self { kind, wavenumber, displacement, rows, cols, matrix })
    }
}

/// `Σ_{L''} c_{L''} I(L, L', L'')` over the triangle-allowed `L''`.
fn gaunt_sum(rule: &GauntRule, a: AngularIndex, b: AngularIndex, coef: &[Complex64]) -> Complex64 {
    let (ma, mb) = (a.m.abs(), b.m.abs());
    let mut m_abs = vec![ma + mb, (ma - mb).abs()];
    m_abs.dedup();
    let mut sum = Complex64::new(0.0, 0.0);
    let lo = a.l.abs_diff(b.l);
    for l2 in (lo..=a.l + b.l).step_by(2) {
        for &mm in &m_abs {
            if mm as usize > l2 {
                continue;
            }
            let signs: &[i64] = if mm == 0 { &[1] } else { &[1, -1] };
            for s in signs {
                let c = AngularIndex { l: l2, m: s * mm };
                let g = rule.get(a, b, c);
                if g != 0.0 {
                    sum += coef[c.index()] * g;
                }
            }
        }
    }
    sum
}

pub fn translation_d_hat(k: f64, displacement: [f64; 3], trunc: Truncation) -> Result<TranslationMatrix> {
    TranslationMatrix::new(TranslationKind::DHat, k, displacement, trunc)
}

pub fn translation_d(k: f64, displacement: [f64; 3], trunc: Truncation) -> Result<TranslationMatrix> {
    TranslationMatrix::new(TranslationKind::D, k, displacement, trunc)
}

pub fn near_field_f(k: f64, displacement: [f64; 3], trunc: Truncation) -> Result<TranslationMatrix> {
    TranslationMatrix::new(TranslationKind::F, k, displacement, trunc)
}

pub fn translation_d_neg(kappa: f64, displacement: [f64; 3], trunc: Truncation) -> Result<TranslationMatrix> {
    TranslationMatrix::new(TranslationKind::DNeg, kappa, displacement, trunc)
}

/// Closed-form free coupling `K_f^{ji} = −(i/k) F(k; R_j − R_i)`.
pub fn free_coupling_closed(k: f64, center_i: [f64; 3], center_j: [f64; 3], trunc: Truncation) -> Result<CMat> {
    let f = near_field_f(k, sub(center_j, center_i), trunc)?;
    Ok(f.matrix * Complex64::new(0.0, -1.0 / k))
}

/// Vector of column solutions `Q(r) = f(r_c)ᵀ Y(r̂_c)` about a center.
#[derive(Clone)]
pub struct CenteredWaves {
    pub center: [f64; 3],
    pub radial: Arc<dyn RadialFunction>,
}

impl CenteredWaves {
    pub fn new(center: [f64; 3], radial: Arc<dyn RadialFunction>) -> Self {
        Self { center, radial }
    }

    /// `H⁺(k r) = h⁺(k r) Y(r̂)`.
    pub fn hankel(center: [f64; 3], k: f64, trunc: Truncation) -> Self {
        Self::new(center, Arc::new(FreeSolution::new(BesselKind::HPlus, k, trunc, Complex64::new(1.0, 0.0))))
    }

    pub fn value(&self, point: [f64; 3]) -> Result<CVec> {
        Ok(self.value_and_normal_derivative(point, [0.0, 0.0, 1.0])?.0)
    }

    /// `Q(r)` and `n̂·∇Q(r)`.
    pub fn value_and_normal_derivative(&self, point: [f64; 3], normal: [f64; 3]) -> Result<(CVec, CVec)> {
        let rel = sub(point, self.center);
        let rho = norm(rel);
        if rho == 0.0 {
            return Err(DwmsError::SingularPoint("wave evaluated at its own center".into()));
        }
        let dir = scale(rel, 1.0 / rho);
        let trunc = self.radial.truncation();
        let dim = trunc.dim();
        let mut y = vec![0.0; dim];
        let mut g = vec![[0.0; 3]; dim];
        ShEvaluator::new(trunc.l_max).values_and_gradients(dir, &mut y, &mut g);
        let radial_part = dot(dir, normal);
        let yv = CVec::from_iterator(dim, y.iter().map(|v| Complex64::new(*v, 0.0)));
        let a = CVec::from_iterator(dim, y.iter().map(|v| Complex64::new(v * radial_part, 0.0)));
        let b = CVec::from_iterator(dim, g.iter().map(|gv| Complex64::new(dot(*gv, normal) / rho, 0.0)));
        let (f, df) = self.radial.eval(rho)?;
        let value = f.transpose() * yv;
        let deriv = df.transpose() * a + f.transpose() * b;
        Ok((value, deriv))
    }
}

/// Product rule about the axis from the inner center toward the outer one;
/// the θ order doubles until successive results differ by less than `tol`.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurfaceRule {
    pub n_theta: usize,
    pub max_n_theta: usize,
    /// Threshold on the entrywise change between doublings, relative to max(1, |K_ab|).
    pub tol: f64,
}

impl Default for SurfaceRule {
    fn default() -> Self {
        Self { n_theta: 16, max_n_theta: 256, tol: 1e-8 }
    }
}

/// Surface Wronskian `ρ² ∮ [∂_n Q_outer Q_innerᵀ − Q_outer ∂_n Q_innerᵀ] dΩ`
/// over the sphere of radius `ρ` about the inner center.
#[derive(Clone, Debug)]
pub struct SurfaceIntegral {
    pub matrix: CMat,
    pub radius: f64,
    pub n_theta: usize,
    /// Change at the last doubling.
    pub change: f64,
}

pub fn surface_wronskian(
    outer: &CenteredWaves,
    inner: &CenteredWaves,
    radius: f64,
    rule: SurfaceRule,
) -> Result<SurfaceIntegral> {
    let axis = sub(outer.center, inner.center);
    let axis = if norm(axis) > 0.0 { axis } else { [0.0, 0.0, 1.0] };
    let l_phi = outer.radial.truncation().l_max + inner.radial.truncation().l_max;
    let n_phi = l_phi + 2;
    let eval = |n_theta: usize| -> Result<CMat> {
        let quad = SphereQuadrature::about_axis(n_theta, n_phi, axis);
        let parts: Vec<Result<CMat>> = quad
            .nodes
            .par_iter()
            .map(|node| {
                let point = add(inner.center, scale(node.dir, radius));
                let (qo, dqo) = outer.value_and_normal_derivative(point, node.dir)?;
                let (qi, dqi) = inner.value_and_normal_derivative(point, node.dir)?;
                Ok((dqo * qi.transpose() - qo * dqi.transpose()) * Complex64::new(node.weight, 0.0))
            })
            .collect();
        let mut acc: Option<CMat> = None;
        for p in parts {
            let p = p?;
            acc = Some(match acc {
                Some(a) => a + p,
                None => p,
            });
        }
        Ok(acc.expect("non-empty quadrature") * Complex64::new(radius * radius, 0.0))
    };
    let mut n = rule.n_theta.max(2);
    let mut prev = eval(n)?;
    loop {
        let next_n = 2 * n;
        let next = eval(next_n)?;
        let change = next.iter().zip(prev.iter()).fold(0.0f64, |a, (x, y)| a.max((x - y).norm() / x.norm().max(1.0)));
        if change < rule.tol {
            return Ok(SurfaceIntegral { matrix: next, radius, n_theta: next_n, change });
        }
        if next_n >= rule.max_n_theta {
            return Err(DwmsError::Quadrature { context: "surface Wronskian".into(), delta: change });
        }
        prev = next;
        n = next_n;
    }
}

/// `K^{ji}` between two centers: rows are channels of `j`, columns of `i`.
#[derive(Clone, Debug)]
pub struct NearFieldCoupling {
    pub matrix: CMat,
    pub center_i: [f64; 3],
    pub center_j: [f64; 3],
    pub radius: f64,
    pub n_theta: usize,
    pub change: f64,
}

fn check_enclosure(center_i: [f64; 3], center_j: [f64; 3], radius: f64) -> Result<()> {
    let d = norm(sub(center_j, center_i));
    if !(radius > 0.0 && radius < d) {
        return Err(DwmsError::Geometry(format!(
            "coupling surface radius {radius} must lie in (0, {d}) so that only one center is enclosed"
        )));
    }
    Ok(())
}

/// Free coupling `K_f^{ji}` by quadrature over the sphere of radius `radius` about `R_i`.
pub fn free_coupling_surface(
    k: f64,
    center_i: [f64; 3],
    center_j: [f64; 3],
    radius: f64,
    trunc: Truncation,
    rule: SurfaceRule,
) -> Result<NearFieldCoupling> {
    check_enclosure(center_i, center_j, radius)?;
    let si = surface_wronskian(
        &CenteredWaves::hankel(center_j, k, trunc),
        &CenteredWaves::hankel(center_i, k, trunc),
        radius,
        rule,
    )?;
    Ok(NearFieldCoupling { matrix: si.matrix, center_i, center_j, radius, n_theta: si.n_theta, change: si.change })
}

/// General coupling `K^{ji} = −ρ² ∮_{∂τ_i} [∂_n Q_j Q_iᵀ − Q_j ∂_n Q_iᵀ] dΩ` from
/// the irregular solutions of the distorting potential about each center.
///
/// `q_j` must be evaluable on `[R_ij − ρ, R_ij + ρ]` and `q_i` at `ρ`.
pub fn general_coupling_surface(
    q_i: &CenteredWaves,
    q_j: &CenteredWaves,
    radius: f64,
    rule: SurfaceRule,
) -> Result<NearFieldCoupling> {
    check_enclosure(q_i.center, q_j.center, radius)?;
    let si = surface_wronskian(q_j, q_i, radius, rule)?;
    Ok(NearFieldCoupling {
        matrix: -si.matrix,
        center_i: q_i.center,
        center_j: q_j.center,
        radius,
        n_theta: si.n_theta,
        change: si.change,
    })
}

/// The same surface integral over a sphere about `R_i` enclosing both centers;
/// it vanishes for outgoing solutions.
pub fn enclosing_surface_integral(
    q_i: &CenteredWaves,
    q_j: &CenteredWaves,
    radius: f64,
    rule: SurfaceRule,
) -> Result<SurfaceIntegral> {
    let d = norm(sub(q_j.center, q_i.center));
    if radius <= d {
        return Err(DwmsError::Geometry(format!("enclosing radius {radius} must exceed the separation {d}")));
    }
    surface_wronskian(q_j, q_i, radius, rule)
}
