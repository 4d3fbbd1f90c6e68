use std::sync::Arc;

use num_complex::Complex64;

use crate::angular::Truncation;
use crate::error::{DwmsError, Result};
use crate::linalg::{CMat, RMat};
use crate::specfun::{sph_bessel_all, BesselKind};

use super::grid::RadialGrid;
use super::numerov::Problem;
use super::potmat::CoupledPotentialMatrix;

/// A matrix function of `r` with its first derivative, indexed `[L, column]`.
pub trait RadialFunction: Send + Sync {
    fn truncation(&self) -> Truncation;
    fn eval(&self, r: f64) -> Result<(CMat, CMat)>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Regularity {
    RegularOrigin,
    OutgoingInfinity,
    IncomingInfinity,
    DecayingInfinity,
}

/// Continuation beyond the outermost node, where the field vanishes.
#[derive(Clone, Debug)]
pub(crate) enum Tail {
    /// `y = r·factor·scale_c·f_l(k r)` per working channel.
    Free { kind: BesselKind, wavenumber: f64, factor: Complex64, scale: Vec<f64> },
    /// `p = F1 α + F2 β` with diagonal free functions.
    Fitted { f1: BesselKind, f2: BesselKind, wavenumber: f64, alpha: RMat, beta: RMat },
    None,
}

#[derive(Debug)]
pub(crate) struct SolutionData {
    pub lo: usize,
    pub hi: usize,
    pub y: Vec<RMat>,
    pub dy: Vec<RMat>,
    pub complex: bool,
    pub tail: Tail,
}

/// Numerical matrix solution of the coupled radial equations. Columns may be
/// recombined by a right multiplier without touching the stored data.
#[derive(Clone, Debug)]
pub struct RadialSolution {
    pub(crate) regularity: Regularity,
    pub(crate) energy: f64,
    pub(crate) pm: Arc<CoupledPotentialMatrix>,
    pub(crate) data: Arc<SolutionData>,
    pub(crate) conjugate: bool,
    pub(crate) right: Option<CMat>,
}

fn hermite(t: f64) -> ([f64; 6], [f64; 6]) {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    (
        [
            1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5,
            t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5,
            0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5),
            10.0 * t3 - 15.0 * t4 + 6.0 * t5,
            -4.0 * t3 + 7.0 * t4 - 3.0 * t5,
            0.5 * (t3 - 2.0 * t4 + t5),
        ],
        [
            -30.0 * t2 + 60.0 * t3 - 30.0 * t4,
            1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4,
            0.5 * (2.0 * t - 9.0 * t2 + 12.0 * t3 - 5.0 * t4),
            30.0 * t2 - 60.0 * t3 + 30.0 * t4,
            -12.0 * t2 + 28.0 * t3 - 15.0 * t4,
            0.5 * (3.0 * t2 - 8.0 * t3 + 5.0 * t4),
        ],
    )
}

impl RadialSolution {
    pub fn regularity(&self) -> Regularity {
        self.regularity
    }

    /// Energy in Rydberg, including the asymptotic offset.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Energy above the asymptotic value of the field.
    pub fn energy_above_asymptote(&self) -> f64 {
        self.energy - self.pm.asymptotic()
    }

    /// `k` for positive, `κ` for negative energy.
    pub fn wavenumber(&self) -> f64 {
        self.energy_above_asymptote().abs().sqrt()
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        self.pm.grid()
    }

    pub fn potential(&self) -> &Arc<CoupledPotentialMatrix> {
        &self.pm
    }

    pub fn is_complex(&self) -> bool {
        self.data.complex || self.right.as_ref().is_some_and(|r| r.iter().any(|z| z.im != 0.0))
    }

    /// Radii covered by stored nodes.
    pub fn r_range(&self) -> (f64, f64) {
        (self.grid().r(self.data.lo), self.grid().r(self.data.hi))
    }

    pub fn conjugated(&self) -> RadialSolution {
        let mut s = self.clone();
        s.conjugate = !s.conjugate;
        s.right = s.right.map(|m| m.map(|z| z.conj()));
        s.regularity = match s.regularity {
            Regularity::OutgoingInfinity => Regularity::IncomingInfinity,
            Regularity::IncomingInfinity => Regularity::OutgoingInfinity,
            other => other,
        };
        s
    }

    /// Same solution with columns recombined, `f(r)·x`.
    pub fn right_multiplied(&self, x: &CMat) -> RadialSolution {
        let mut s = self.clone();
        s.right = Some(match &s.right {
            Some(m) => m * x,
            None => x.clone(),
        });
        s
    }

    pub(crate) fn problem(&self) -> Problem<'_> {
        Problem::new(&self.pm, self.energy_above_asymptote())
    }

    /// Stored `(y, y')` at a node in the working channel set.
    pub(crate) fn working_node(&self, node: usize) -> Option<(&RMat, &RMat)> {
        if node < self.data.lo || node > self.data.hi {
            return None;
        }
        let k = node - self.data.lo;
        Some((&self.data.y[k], &self.data.dy[k]))
    }

    fn to_complex(&self, m: &RMat) -> CMat {
        let n = m.nrows();
        if self.data.complex {
            CMat::from_fn(n, n, |a, b| {
                let z = Complex64::new(m[(a, b)], m[(a, b + n)]);
                if self.conjugate { z.conj() } else { z }
            })
        } else {
            m.map(|x| Complex64::new(x, 0.0))
        }
    }

    /// Working-channel result to full channels, then applies the right multiplier.
    pub(crate) fn finish(&self, work: CMat) -> CMat {
        let trunc = self.pm.truncation();
        let full = if self.pm.is_spherical() {
            let ls = trunc.l_values();
            CMat::from_fn(trunc.dim(), trunc.dim(), |a, b| if a == b { work[(ls[a], ls[a])] } else { Complex64::new(0.0, 0.0) })
        } else {
            work
        };
        match &self.right {
            Some(x) => full * x,
            None => full,
        }
    }

    /// `(p, p')` at a stored node.
    pub fn at_node(&self, node: usize) -> Result<(CMat, CMat)> {
        let (y, dy) = self.working_node(node).ok_or(DwmsError::OutOfRange {
            r: self.grid().r(node),
            lo: self.r_range().0,
            hi: self.r_range().1,
        })?;
        let r = self.grid().r(node);
        if r == 0.0 {
            return Err(DwmsError::Domain("solution value at r = 0".into()));
        }
        let y = self.to_complex(y);
        let dy = self.to_complex(dy);
        let p = &y / Complex64::new(r, 0.0);
        let dp = (&dy - &p) / Complex64::new(r, 0.0);
        Ok((self.finish(p), self.finish(dp)))
    }

    /// Interpolated working `(y, y')` inside the stored range.
    fn working_interp(&self, r: f64) -> Result<(RMat, RMat)> {
        let grid = self.grid();
        let (lo, hi) = self.r_range();
        let err = || DwmsError::OutOfRange { r, lo, hi };
        let (ci, mut n0) = grid.locate(r).ok_or_else(err)?;
        // r on the outermost stored node: use the interval below it
        if n0 == self.data.hi && n0 > self.data.lo && grid.is_interval(n0 - 1) {
            n0 -= 1;
        }
        let c = grid.chunks()[ci];
        let (a, b) = (self.working_node(n0).ok_or_else(err)?, self.working_node(n0 + 1).ok_or_else(err)?);
        let h = c.h;
        let t = (r - grid.r(n0)) / h;
        let prob = self.problem();
        let dd0 = if grid.r(n0) == 0.0 {
            // second derivative at the origin from the first interval
            (a.1 * (-2.0 / h) + (b.0 - a.0) * (2.0 / (h * h))) * 1.0
        } else {
            prob.u(n0) * a.0
        };
        let dd1 = prob.u(n0 + 1) * b.0;
        let (w, dw) = hermite(t);
        let y = a.0 * w[0] + a.1 * (w[1] * h) + &dd0 * (w[2] * h * h) + b.0 * w[3] + b.1 * (w[4] * h) + &dd1 * (w[5] * h * h);
        let dy = (a.0 * dw[0] + a.1 * (dw[1] * h) + &dd0 * (dw[2] * h * h) + b.0 * dw[3] + b.1 * (dw[4] * h) + &dd1 * (dw[5] * h * h)) / h;
        Ok((y, dy))
    }

    fn tail_eval(&self, r: f64) -> Result<(CMat, CMat)> {
        let n = self.data.y[0].nrows();
        let ls: Vec<usize> = self.problem().ls;
        let l_max = *ls.iter().max().unwrap_or(&0);
        match &self.data.tail {
            Tail::Free { kind, wavenumber, factor, scale } => {
                let b = sph_bessel_all(*kind, l_max, wavenumber * r)?;
                let mut p = CMat::zeros(n, n);
                let mut dp = CMat::zeros(n, n);
                for (a, l) in ls.iter().enumerate() {
                    let f = factor * scale[a];
                    let (v, d) = if self.conjugate {
                        ((b.values[*l] * f).conj(), (b.derivs[*l] * f * *wavenumber).conj())
                    } else {
                        (b.values[*l] * f, b.derivs[*l] * f * *wavenumber)
                    };
                    p[(a, a)] = v;
                    dp[(a, a)] = d;
                }
                Ok((self.finish(p), self.finish(dp)))
            }
            Tail::Fitted { f1, f2, wavenumber, alpha, beta } => {
                let b1 = sph_bessel_all(*f1, l_max, wavenumber * r)?;
                let b2 = sph_bessel_all(*f2, l_max, wavenumber * r)?;
                let mut p = RMat::zeros(n, alpha.ncols());
                let mut dp = RMat::zeros(n, alpha.ncols());
                for (a, l) in ls.iter().enumerate() {
                    let (v1, v2) = (b1.values[*l].re, b2.values[*l].re);
                    let (d1, d2) = (b1.derivs[*l].re * wavenumber, b2.derivs[*l].re * wavenumber);
                    for c in 0..alpha.ncols() {
                        p[(a, c)] = v1 * alpha[(a, c)] + v2 * beta[(a, c)];
                        dp[(a, c)] = d1 * alpha[(a, c)] + d2 * beta[(a, c)];
                    }
                }
                Ok((self.finish(self.to_complex(&p)), self.finish(self.to_complex(&dp))))
            }
            Tail::None => {
                let (lo, hi) = self.r_range();
                Err(DwmsError::OutOfRange { r, lo, hi })
            }
        }
    }

    /// Condition number of the value matrix at `r`.
    pub fn condition_at(&self, r: f64) -> Result<f64> {
        let (p, _) = self.eval(r)?;
        Ok(crate::linalg::condition_number(&p))
    }
}

impl RadialFunction for RadialSolution {
    fn truncation(&self) -> Truncation {
        self.pm.truncation()
    }

    /// `(p(r), p'(r))`; quintic Hermite interpolation between nodes using
    /// `y'' = u y`, free continuation beyond the outermost grid node. Irregular
    /// solutions of a constant field are the free functions at every radius.
    fn eval(&self, r: f64) -> Result<(CMat, CMat)> {
        let (lo, hi) = self.r_range();
        let exact_free = self.pm.is_vanishing() && matches!(self.data.tail, Tail::Free { .. });
        let beyond = r > hi * (1.0 + 1e-13);
        if (beyond && self.data.hi == self.grid().last_node()) || (exact_free && r > 0.0) {
            return self.tail_eval(r);
        }
        if beyond || r <= 0.0 || r < lo * (1.0 - 1e-13) {
            return Err(DwmsError::OutOfRange { r, lo, hi });
        }
        let (y, dy) = self.working_interp(r.max(lo).min(hi))?;
        let y = self.to_complex(&y);
        let dy = self.to_complex(&dy);
        let p = &y / Complex64::new(r, 0.0);
        let dp = (&dy - &p) / Complex64::new(r, 0.0);
        Ok((self.finish(p), self.finish(dp)))
    }
}

/// Diagonal free solution `f_l(k r)` times a per-column factor.
#[derive(Clone, Debug)]
pub struct FreeSolution {
    pub kind: BesselKind,
    pub wavenumber: f64,
    pub trunc: Truncation,
    pub column_factor: Vec<Complex64>,
}

impl FreeSolution {
    pub fn new(kind: BesselKind, wavenumber: f64, trunc: Truncation, factor: Complex64) -> Self {
        Self { kind, wavenumber, trunc, column_factor: vec![factor; trunc.dim()] }
    }

    /// `p_f`: `j(kr)` above zero energy, `i(κr)` below.
    pub fn regular(energy: f64, trunc: Truncation) -> Self {
        let one = Complex64::new(1.0, 0.0);
        if energy > 0.0 {
            Self::new(BesselKind::J, energy.sqrt(), trunc, one)
        } else {
            Self::new(BesselKind::ModI, (-energy).sqrt(), trunc, one)
        }
    }

    /// `−i h⁺(kr)`.
    pub fn outgoing(k: f64, trunc: Truncation) -> Self {
        Self::new(BesselKind::HPlus, k, trunc, Complex64::new(0.0, -1.0))
    }

    /// `i h⁻(kr)`.
    pub fn incoming(k: f64, trunc: Truncation) -> Self {
        Self::new(BesselKind::HMinus, k, trunc, Complex64::new(0.0, 1.0))
    }

    /// `k⁺(κr)`.
    pub fn decaying(kappa: f64, trunc: Truncation) -> Self {
        Self::new(BesselKind::ModK, kappa, trunc, Complex64::new(1.0, 0.0))
    }

    /// `i ξ k⁺(κr)`, the continuation of the outgoing solution below zero energy.
    pub fn decaying_continued(kappa: f64, trunc: Truncation) -> Self {
        let factor = trunc
            .l_values()
            .into_iter()
            .map(|l| Complex64::new(0.0, 1.0) * crate::specfun::i_pow(l as i64))
            .collect();
        Self { kind: BesselKind::ModK, wavenumber: kappa, trunc, column_factor: factor }
    }
}

impl RadialFunction for FreeSolution {
    fn truncation(&self) -> Truncation {
        self.trunc
    }

    fn eval(&self, r: f64) -> Result<(CMat, CMat)> {
        let b = sph_bessel_all(self.kind, self.trunc.l_max, self.wavenumber * r)?;
        let ls = self.trunc.l_values();
        let dim = self.trunc.dim();
        let mut v = CMat::zeros(dim, dim);
        let mut d = CMat::zeros(dim, dim);
        for (a, l) in ls.iter().enumerate() {
            v[(a, a)] = b.values[*l] * self.column_factor[a];
            d[(a, a)] = b.derivs[*l] * self.column_factor[a] * self.wavenumber;
        }
        Ok((v, d))
    }
}

/// `Σ f_i(r) C_i` for radial functions sharing a truncation.
pub struct Combination {
    pub terms: Vec<(Arc<dyn RadialFunction>, CMat)>,
}

impl RadialFunction for Combination {
    fn truncation(&self) -> Truncation {
        self.terms[0].0.truncation()
    }

    fn eval(&self, r: f64) -> Result<(CMat, CMat)> {
        let dim = self.truncation().dim();
        let mut v = CMat::zeros(dim, self.terms[0].1.ncols());
        let mut d = v.clone();
        for (f, c) in &self.terms {
            let (fv, fd) = f.eval(r)?;
            v += fv * c;
            d += fd * c;
        }
        Ok((v, d))
    }
}
