//! Pointwise Green functions assembled from regular and irregular radial
//! solutions about one center, and the distorted wave `χ⁺`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::angular::{sh_vector, Truncation};
use crate::error::{DwmsError, Result};
use crate::linalg::{inverse, CMat, CVec};
use crate::quadrature::{norm, sub};
use crate::radial::{FreeSolution, RadialFunction, RadialSolution, WronskianConstant};
use crate::specfun::PhaseMatrix;

/// Default near-diagonal exclusion `|r − s|` (bohr).
pub const DIAGONAL_EXCLUSION: f64 = 0.05;

fn split(center: [f64; 3], point: [f64; 3]) -> Result<(f64, [f64; 3])> {
    let rel = sub(point, center);
    let r = norm(rel);
    if r == 0.0 {
        return Err(DwmsError::Domain("evaluation point at the expansion center".into()));
    }
    Ok((r, [rel[0] / r, rel[1] / r, rel[2] / r]))
}

fn y_vec(l_max: usize, dir: [f64; 3]) -> Result<CVec> {
    Ok(CVec::from_iterator(
        Truncation::new(l_max).dim(),
        sh_vector(l_max, dir)?.into_iter().map(|v| Complex64::new(v, 0.0)),
    ))
}

fn check_separation(r: [f64; 3], s: [f64; 3], exclusion: f64) -> Result<()> {
    let d = norm(sub(r, s));
    if d < exclusion {
        return Err(DwmsError::Domain(format!("near-diagonal Green evaluation: |r − s| = {d:.3e} < {exclusion}")));
    }
    Ok(())
}

/// `G(r,s) = Yᵀ(r̂)[p(r)(M⁻¹)ᵀq(s)ᵀ θ(s−r) + q(r)M⁻¹p(s)ᵀ θ(r−s)]Y(ŝ)`.
#[derive(Clone)]
pub struct GreenExpansion {
    pub center: [f64; 3],
    pub energy: f64,
    pub trunc: Truncation,
    pub p: Arc<dyn RadialFunction>,
    pub q: Arc<dyn RadialFunction>,
    pub m: CMat,
    m_inv: CMat,
    pub exclusion: f64,
}

impl GreenExpansion {
    pub fn new(
        center: [f64; 3],
        energy: f64,
        p: Arc<dyn RadialFunction>,
        q: Arc<dyn RadialFunction>,
        m: CMat,
    ) -> Result<Self> {
        let trunc = p.truncation();
        if q.truncation() != trunc || m.nrows() != trunc.dim() {
            return Err(DwmsError::Dimension("Green expansion parts disagree in truncation".into()));
        }
        let m_inv = inverse(&m, "Wronskian constant")?;
        Ok(Self { center, energy, trunc, p, q, m, m_inv, exclusion: DIAGONAL_EXCLUSION })
    }

    /// From numerical solutions of one potential.
    pub fn from_solutions(center: [f64; 3], p: &RadialSolution, q: &RadialSolution) -> Result<Self> {
        let m = WronskianConstant::compute(p, q)?.matrix;
        Self::new(center, p.energy(), Arc::new(p.clone()), Arc::new(q.clone()), m)
    }

    /// Free outgoing Green function above zero energy, decaying below.
    pub fn free(center: [f64; 3], energy: f64, trunc: Truncation) -> Result<Self> {
        let k = energy.abs().sqrt();
        let p = Arc::new(FreeSolution::regular(energy, trunc));
        let (q, m) = if energy > 0.0 {
            (FreeSolution::outgoing(k, trunc), CMat::identity(trunc.dim(), trunc.dim()) / Complex64::new(k, 0.0))
        } else {
            let signs: Vec<Complex64> =
                PhaseMatrix::eta(trunc).diagonal().into_iter().map(|s| -s / Complex64::new(k, 0.0)).collect();
            (FreeSolution::decaying(k, trunc), crate::linalg::diag_complex(&signs))
        };
        Self::new(center, energy, p, Arc::new(q), m)
    }

    pub fn with_exclusion(mut self, exclusion: f64) -> Self {
        self.exclusion = exclusion;
        self
    }

    pub fn m_inverse(&self) -> &CMat {
        &self.m_inv
    }

    pub fn eval(&self, r_vec: [f64; 3], s_vec: [f64; 3]) -> Result<Complex64> {
        check_separation(r_vec, s_vec, self.exclusion)?;
        let (r, rh) = split(self.center, r_vec)?;
        let (s, sh) = split(self.center, s_vec)?;
        let yr = y_vec(self.trunc.l_max, rh)?;
        let ys = y_vec(self.trunc.l_max, sh)?;
        let (left, mid, right) = if r < s {
            (self.p.eval(r)?.0, self.m_inv.transpose(), self.q.eval(s)?.0)
        } else {
            (self.q.eval(r)?.0, self.m_inv.clone(), self.p.eval(s)?.0)
        };
        let a = left.transpose() * yr;
        let b = right.transpose() * ys;
        Ok((a.transpose() * mid * b)[(0, 0)])
    }

    /// `χ⁺(r) = (4π/k) Y(r̂)ᵀ p(r)(M₊⁻¹)ᵀ ξ Y(k̂)`; requires the outgoing form.
    pub fn distorted_wave(&self, k_dir: [f64; 3], r_vec: [f64; 3]) -> Result<Complex64> {
        if self.energy <= 0.0 {
            return Err(DwmsError::Domain("distorted wave needs positive energy".into()));
        }
        let k = self.energy.sqrt();
        let (r, rh) = split(self.center, r_vec)?;
        let yr = y_vec(self.trunc.l_max, rh)?;
        let yk = y_vec(self.trunc.l_max, crate::quadrature::normalize(k_dir))?;
        let xi = PhaseMatrix::xi(self.trunc).matrix();
        let p = self.p.eval(r)?.0;
        let v = yr.transpose() * p * self.m_inv.transpose() * xi * yk;
        Ok(v[(0, 0)] * (4.0 * PI / k))
    }
}

/// `G = (ik/2)Yᵀ[q⁺Âq⁺ᵀ − q⁻q⁺ᵀ θ(s−r) − q⁺q⁻ᵀ θ(r−s)]Y`.
#[derive(Clone)]
pub struct IrregularGreen {
    pub center: [f64; 3],
    pub k: f64,
    pub q_plus: Arc<dyn RadialFunction>,
    pub q_minus: Arc<dyn RadialFunction>,
    pub a_hat: CMat,
    pub exclusion: f64,
}

impl IrregularGreen {
    pub fn new(center: [f64; 3], k: f64, q_plus: Arc<dyn RadialFunction>, q_minus: Arc<dyn RadialFunction>, a_hat: CMat) -> Self {
        Self { center, k, q_plus, q_minus, a_hat, exclusion: DIAGONAL_EXCLUSION }
    }

    pub fn eval(&self, r_vec: [f64; 3], s_vec: [f64; 3]) -> Result<Complex64> {
        check_separation(r_vec, s_vec, self.exclusion)?;
        let l_max = self.q_plus.truncation().l_max;
        let (r, rh) = split(self.center, r_vec)?;
        let (s, sh) = split(self.center, s_vec)?;
        let yr = y_vec(l_max, rh)?;
        let ys = y_vec(l_max, sh)?;
        let qr_p = self.q_plus.eval(r)?.0.transpose() * &yr;
        let qs_p = self.q_plus.eval(s)?.0.transpose() * &ys;
        let mut total = (qr_p.transpose() * &self.a_hat * &qs_p)[(0, 0)];
        if r < s {
            let qr_m = self.q_minus.eval(r)?.0.transpose() * &yr;
            total -= (qr_m.transpose() * &qs_p)[(0, 0)];
        } else {
            let qs_m = self.q_minus.eval(s)?.0.transpose() * &ys;
            total -= (qr_p.transpose() * &qs_m)[(0, 0)];
        }
        Ok(total * Complex64::new(0.0, self.k / 2.0))
    }
}
