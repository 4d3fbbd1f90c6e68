//! Coupled-channel radial solutions: regular `p`, irregular `q±`, decaying `q`
//! and the Wronskian constants that glue them into Green functions.

mod grid;
pub(crate) mod numerov;
mod potmat;
mod solution;

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{DwmsError, Result};
use crate::linalg::{CMat, RMat};
use crate::specfun::{sph_bessel_all, BesselKind};

pub use grid::{Chunk, GridSpec, RadialGrid};
pub use potmat::CoupledPotentialMatrix;
pub use solution::{Combination, FreeSolution, RadialFunction, RadialSolution, Regularity};

use numerov::{discrete_wronskian, inward_segments, march, outward_segments, Problem, Start};
use solution::{SolutionData, Tail};

/// Default step: `min(0.01, 0.02/k)` bohr.
pub fn default_step(energy_above_asymptote: f64) -> f64 {
    let k = energy_above_asymptote.abs().sqrt();
    (0.02 / k.max(1e-12)).min(0.01)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IrregularBoundary {
    /// `−i h⁺(kr)`.
    Outgoing,
    /// `i h⁻(kr)`, the complex conjugate of the outgoing solution.
    Incoming,
    /// `k⁺(κr)`.
    Decaying,
    /// `i ξ k⁺(κr)`.
    DecayingContinued,
}

/// Default threshold on `|V − V∞|·r²` at the outermost node.
pub const TAIL_THRESHOLD: f64 = 1e-10;

/// Default limit on the condition number of `p` at the outer radius.
pub const MAX_CONDITION: f64 = 1e12;

fn energy_check(pm: &CoupledPotentialMatrix, energy: f64) -> Result<f64> {
    let e = energy - pm.asymptotic();
    if e == 0.0 || !e.is_finite() {
        return Err(DwmsError::Domain(format!("energy {energy} at the asymptotic value")));
    }
    Ok(e)
}

fn tail_check(pm: &CoupledPotentialMatrix, threshold: f64) -> Result<()> {
    let grid = pm.grid();
    let last = grid.last_node();
    let tail = pm.tail_measure(last).max(pm.tail_measure(last - 1));
    if tail > threshold {
        return Err(DwmsError::TailTooLarge { r_asym: grid.r(last), tail, threshold });
    }
    Ok(())
}

fn into_data(m: numerov::March, complex: bool, tail: Tail) -> SolutionData {
    let lo = *m.nodes.iter().min().expect("visited nodes");
    let hi = *m.nodes.iter().max().expect("visited nodes");
    let len = hi - lo + 1;
    let mut y: Vec<Option<RMat>> = vec![None; len];
    let mut dy: Vec<Option<RMat>> = vec![None; len];
    for ((node, yv), dv) in m.nodes.into_iter().zip(m.y).zip(m.dy) {
        y[node - lo] = Some(yv);
        dy[node - lo] = Some(dv);
    }
    SolutionData {
        lo,
        hi,
        y: y.into_iter().map(|v| v.expect("contiguous march")).collect(),
        dy: dy.into_iter().map(|v| v.expect("contiguous march")).collect(),
        complex,
        tail,
    }
}

/// Regular solution by outward integration from the origin over the whole grid;
/// beyond the grid it is continued as a free combination.
pub fn integrate_regular(pm: Arc<CoupledPotentialMatrix>, energy: f64) -> Result<RadialSolution> {
    integrate_regular_with(pm, energy, true)
}

/// As [`integrate_regular`]; `free_tail = false` leaves the solution undefined
/// beyond the grid (interior solutions of the full potential).
pub fn integrate_regular_with(pm: Arc<CoupledPotentialMatrix>, energy: f64, free_tail: bool) -> Result<RadialSolution> {
    let r_max = pm.grid().r_max();
    regular_up_to(pm, energy, r_max, free_tail)
}

/// Regular solution marched only as far as the first node at or beyond `r_hi`;
/// undefined further out.
pub fn integrate_regular_to(pm: Arc<CoupledPotentialMatrix>, energy: f64, r_hi: f64) -> Result<RadialSolution> {
    regular_up_to(pm, energy, r_hi, false)
}

fn regular_up_to(pm: Arc<CoupledPotentialMatrix>, energy: f64, r_hi: f64, free_tail: bool) -> Result<RadialSolution> {
    let e = energy_check(&pm, energy)?;
    let prob = Problem::new(&pm, e);
    let grid = pm.grid().clone();
    let last = node_covering(&grid, r_hi);
    let segs = outward_segments(&grid, last);
    let n = prob.n();
    let mut m = march(&prob, &segs, Start::Origin, n, last)?;
    // balance columns at the outer radius
    let pos = m.nodes.iter().position(|&k| k == last).expect("outermost node");
    let last_y = m.y[pos].clone();
    for c in 0..n {
        let mx = last_y.column(c).abs().max();
        if mx > 0.0 {
            for v in m.y.iter_mut().chain(m.dy.iter_mut()) {
                v.column_mut(c).unscale_mut(mx);
            }
        }
    }
    let tail = if free_tail && last == grid.last_node() {
        fit_tail(&prob, grid.r(last), &m.y[pos], &m.dy[pos])?
    } else {
        Tail::None
    };
    let sol = RadialSolution {
        regularity: Regularity::RegularOrigin,
        energy,
        pm,
        data: Arc::new(into_data(m, false, tail)),
        conjugate: false,
        right: None,
    };
    let (pv, _) = sol.eval(grid.r(last))?;
    let cond = crate::linalg::column_normalized_condition(&pv);
    if cond > MAX_CONDITION {
        return Err(DwmsError::Singular {
            context: "regular solution columns lost independence; reduce r_out or l_max".into(),
            cond,
        });
    }
    Ok(sol)
}

/// First node at or beyond `r` (the last node when `r` exceeds the grid), and
/// never closer than four nodes to the origin.
fn node_covering(grid: &RadialGrid, r: f64) -> usize {
    let below = grid.node_below(r.min(grid.r_max()));
    let node = if grid.r(below) >= r * (1.0 - 1e-13) { below } else { below + 1 };
    node.min(grid.last_node()).max(4.min(grid.last_node()))
}

fn fit_tail(prob: &Problem, r: f64, y: &RMat, dy: &RMat) -> Result<Tail> {
    let k = prob.e_eff.abs().sqrt();
    let (f1, f2) = if prob.e_eff > 0.0 { (BesselKind::J, BesselKind::N) } else { (BesselKind::ModI, BesselKind::ModK) };
    let l_max = *prob.ls.iter().max().unwrap_or(&0);
    let b1 = sph_bessel_all(f1, l_max, k * r)?;
    let b2 = sph_bessel_all(f2, l_max, k * r)?;
    let n = prob.n();
    let mut alpha = RMat::zeros(n, y.ncols());
    let mut beta = RMat::zeros(n, y.ncols());
    for (a, l) in prob.ls.iter().enumerate() {
        // y = r F, y' = F + r k F'
        let (v1, v2) = (b1.values[*l].re, b2.values[*l].re);
        let (d1, d2) = (v1 + r * k * b1.derivs[*l].re, v2 + r * k * b2.derivs[*l].re);
        let det = r * v1 * d2 - r * v2 * d1;
        for c in 0..y.ncols() {
            alpha[(a, c)] = (y[(a, c)] * d2 - r * v2 * dy[(a, c)]) / det;
            beta[(a, c)] = (r * v1 * dy[(a, c)] - y[(a, c)] * d1) / det;
        }
    }
    Ok(Tail::Fitted { f1, f2, wavenumber: k, alpha, beta })
}

/// Grid about `center` with restarts at the jump radii of `field` and nodes at `knots`.
pub fn grid_for_field(
    field: &dyn crate::potential::ScalarField,
    center: [f64; 3],
    h_max: f64,
    r_out: f64,
    knots: Vec<f64>,
) -> Result<Arc<RadialGrid>> {
    let jumps = field.jump_radii(center);
    Ok(Arc::new(RadialGrid::build(&GridSpec { h_max, knots, jumps, r_out })?))
}

/// Irregular solution by inward integration from the outermost node, where it
/// takes exact free diagonal values, down to `r_stop`.
///
/// Outgoing columns are rescaled by `1 + O(h⁴)` so that the discrete Wronskian
/// of `q⁺` with `q⁻` is exactly `(2i/k)`-diagonal.
pub fn integrate_irregular(
    pm: Arc<CoupledPotentialMatrix>,
    energy: f64,
    boundary: IrregularBoundary,
    r_stop: f64,
    tail_threshold: f64,
) -> Result<RadialSolution> {
    integrate_irregular_window(pm, energy, boundary, r_stop, f64::INFINITY, tail_threshold)
}

/// As [`integrate_irregular`], storing the solution on `[r_stop, r_hi]` only;
/// the free continuation is available when `r_hi` covers the whole grid.
pub fn integrate_irregular_window(
    pm: Arc<CoupledPotentialMatrix>,
    energy: f64,
    boundary: IrregularBoundary,
    r_stop: f64,
    r_hi: f64,
    tail_threshold: f64,
) -> Result<RadialSolution> {
    let e = energy_check(&pm, energy)?;
    match boundary {
        IrregularBoundary::Outgoing | IrregularBoundary::Incoming if e < 0.0 => {
            return Err(DwmsError::Domain("outgoing/incoming boundary needs positive energy".into()));
        }
        IrregularBoundary::Decaying | IrregularBoundary::DecayingContinued if e > 0.0 => {
            return Err(DwmsError::Domain("decaying boundary needs negative energy".into()));
        }
        _ => {}
    }
    tail_check(&pm, tail_threshold)?;
    let prob = Problem::new(&pm, e);
    let grid = pm.grid().clone();
    let k = e.abs().sqrt();
    let n = prob.n();
    let last = grid.last_node();
    let l_max = *prob.ls.iter().max().unwrap_or(&0);
    let complex = e > 0.0;
    let ncols = if complex { 2 * n } else { n };
    let seed = |node: usize| -> Result<(RMat, RMat)> {
        let r = grid.r(node);
        let kind = if complex { BesselKind::HPlus } else { BesselKind::ModK };
        let b = sph_bessel_all(kind, l_max, k * r)?;
        let factor = if complex { Complex64::new(0.0, -1.0) } else { Complex64::new(1.0, 0.0) };
        let mut y = RMat::zeros(n, ncols);
        let mut dy = RMat::zeros(n, ncols);
        for (a, l) in prob.ls.iter().enumerate() {
            let v = b.values[*l] * factor;
            let d = b.derivs[*l] * factor * k;
            let yv = v * r;
            let dv = v + d * r;
            y[(a, a)] = yv.re;
            dy[(a, a)] = dv.re;
            if complex {
                y[(a, a + n)] = yv.im;
                dy[(a, a + n)] = dv.im;
            }
        }
        Ok((y, dy))
    };
    let (mut y_hi, mut dy_hi) = seed(last)?;
    let (mut y_lo, _) = seed(last - 1)?;
    let mut scale = vec![1.0; n];
    if complex {
        // ω(q⁺, q⁻) = −2i ω(Re, Im); target −2i/k
        let re_hi = y_hi.columns(0, n).into_owned();
        let im_hi = y_hi.columns(n, n).into_owned();
        let re_lo = y_lo.columns(0, n).into_owned();
        let im_lo = y_lo.columns(n, n).into_owned();
        let w = discrete_wronskian(&prob, last - 1, (&re_lo, &re_hi), (&im_lo, &im_hi));
        for a in 0..n {
            let s = (1.0 / (k * w[(a, a)])).sqrt();
            if !s.is_finite() {
                return Err(DwmsError::Singular { context: "outgoing seed normalization".into(), cond: f64::INFINITY });
            }
            scale[a] = s;
            for c in [a, a + n] {
                y_hi[(a, c)] *= s;
                dy_hi[(a, c)] *= s;
                y_lo[(a, c)] *= s;
            }
        }
    }
    let stop = grid.node_below(r_stop.max(grid.r(1)));
    let segs = inward_segments(&grid, stop);
    let keep = node_covering(&grid, r_hi);
    let m = march(&prob, &segs, Start::Seeds { y0: y_hi, y1: y_lo, dy0: dy_hi }, ncols, keep)?;
    let tail = Tail::Free {
        kind: if complex { BesselKind::HPlus } else { BesselKind::ModK },
        wavenumber: k,
        factor: if complex { Complex64::new(0.0, -1.0) } else { Complex64::new(1.0, 0.0) },
        scale,
    };
    let base = RadialSolution {
        regularity: if complex { Regularity::OutgoingInfinity } else { Regularity::DecayingInfinity },
        energy,
        pm,
        data: Arc::new(into_data(m, complex, tail)),
        conjugate: false,
        right: None,
    };
    Ok(match boundary {
        IrregularBoundary::Outgoing | IrregularBoundary::Decaying => base,
        IrregularBoundary::Incoming => base.conjugated(),
        IrregularBoundary::DecayingContinued => {
            let trunc = base.pm.truncation();
            let d: Vec<Complex64> = FreeSolution::decaying_continued(k, trunc).column_factor;
            base.right_multiplied(&crate::linalg::diag_complex(&d))
        }
    })
}

/// `r²(a'ᵀb − aᵀb')` at `r` for any two matrix functions.
pub fn wronskian_constant(a: &dyn RadialFunction, b: &dyn RadialFunction, r: f64) -> Result<CMat> {
    let (av, ad) = a.eval(r)?;
    let (bv, bd) = b.eval(r)?;
    Ok((ad.transpose() * &bv - av.transpose() * &bd) * Complex64::new(r * r, 0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum WronskianVariant {
    MPlus,
    MMinus,
    MNeg,
}

/// `M = r²(pᵀq' − p'ᵀq)`, the radius-independent glue between `p` and `q`.
#[derive(Clone, Debug)]
pub struct WronskianConstant {
    pub matrix: CMat,
    pub variant: WronskianVariant,
}

impl WronskianConstant {
    /// From the exactly conserved discrete Wronskian over the outermost grid
    /// interval; both solutions must live on the same grid and potential.
    pub fn compute(p: &RadialSolution, q: &RadialSolution) -> Result<Self> {
        if !Arc::ptr_eq(p.potential(), q.potential()) {
            return Err(DwmsError::Dimension("Wronskian constant needs solutions of one potential".into()));
        }
        let variant = match q.regularity() {
            Regularity::OutgoingInfinity => WronskianVariant::MPlus,
            Regularity::IncomingInfinity => WronskianVariant::MMinus,
            Regularity::DecayingInfinity => WronskianVariant::MNeg,
            Regularity::RegularOrigin => return Err(DwmsError::Domain("second solution must be irregular".into())),
        };
        let grid = p.grid();
        // outermost interval both solutions store
        let node = p.data.hi.min(q.data.hi) - 1;
        if node < p.data.lo.max(q.data.lo) {
            return Err(DwmsError::OutOfRange { r: grid.r(node), lo: p.r_range().0, hi: p.r_range().1 });
        }
        let prob = p.problem();
        let (p0, p1) = (p.working_node(node), p.working_node(node + 1));
        let (q0, q1) = (q.working_node(node), q.working_node(node + 1));
        let (Some(p0), Some(p1), Some(q0), Some(q1)) = (p0, p1, q0, q1) else {
            return Err(DwmsError::OutOfRange { r: grid.r_max(), lo: p.r_range().0, hi: p.r_range().1 });
        };
        if p.data.complex {
            return Err(DwmsError::Domain("regular solution stored as complex".into()));
        }
        let n = p0.0.nrows();
        let work = if q.data.complex {
            let re = discrete_wronskian(&prob, node, (p0.0, p1.0), (&q0.0.columns(0, n).into_owned(), &q1.0.columns(0, n).into_owned()));
            let im = discrete_wronskian(&prob, node, (p0.0, p1.0), (&q0.0.columns(n, n).into_owned(), &q1.0.columns(n, n).into_owned()));
            CMat::from_fn(n, n, |a, b| {
                let z = Complex64::new(re[(a, b)], im[(a, b)]);
                if q.conjugate { z.conj() } else { z }
            })
        } else {
            discrete_wronskian(&prob, node, (p0.0, p1.0), (q0.0, q1.0)).map(|x| Complex64::new(x, 0.0))
        };
        let trunc = p.potential().truncation();
        let full = if p.potential().is_spherical() {
            let ls = trunc.l_values();
            CMat::from_fn(trunc.dim(), trunc.dim(), |a, b| if a == b { work[(ls[a], ls[a])] } else { Complex64::new(0.0, 0.0) })
        } else {
            work
        };
        let left = p.right.as_ref().map(|x| x.transpose());
        let matrix = match (left, &q.right) {
            (Some(l), Some(r)) => l * full * r,
            (Some(l), None) => l * full,
            (None, Some(r)) => full * r,
            (None, None) => full,
        };
        Ok(Self { matrix, variant })
    }

    pub fn inverse(&self) -> Result<CMat> {
        crate::linalg::inverse(&self.matrix, "Wronskian constant")
    }
}

/// `p = (ik/2)[q⁺ M₋ᵀ − q⁻ M₊ᵀ]`.
pub fn reconstruct_p_from_q(
    q_plus: Arc<dyn RadialFunction>,
    q_minus: Arc<dyn RadialFunction>,
    m_plus: &CMat,
    m_minus: &CMat,
    k: f64,
) -> Result<Combination> {
    crate::linalg::inverse(m_plus, "M₊")?;
    let f = Complex64::new(0.0, k / 2.0);
    Ok(Combination {
        terms: vec![(q_plus, m_minus.transpose() * f), (q_minus, m_plus.transpose() * -f)],
    })
}

/// Writes `r` and the real and imaginary parts of selected entries at every
/// stored node.
pub fn write_csv(sol: &RadialSolution, entries: &[(usize, usize)], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| DwmsError::Io(std::io::Error::other(e)))?;
    let mut header = vec!["r".to_string()];
    for (a, b) in entries {
        header.push(format!("re_{a}_{b}"));
        header.push(format!("im_{a}_{b}"));
    }
    w.write_record(&header).map_err(|e| DwmsError::Io(std::io::Error::other(e)))?;
    let grid = sol.grid();
    for node in sol.data.lo..=sol.data.hi {
        let r = grid.r(node);
        if r == 0.0 {
            continue;
        }
        let (p, _) = sol.at_node(node)?;
        let mut rec = vec![format!("{r:.12e}")];
        for (a, b) in entries {
            rec.push(format!("{:.12e}", p[(*a, *b)].re));
            rec.push(format!("{:.12e}", p[(*a, *b)].im));
        }
        w.write_record(&rec).map_err(|e| DwmsError::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}
