//! Identity suite evaluated on the configured potential.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::angular::Truncation;
use crate::error::Result;
use crate::green::{GreenExpansion, IrregularGreen};
use crate::linalg::{max_abs, max_diff, CMat};
use crate::msw::{solve_secular, Incident, MolecularWavefunction, MswProblem};
use crate::quadrature::{add, norm, normalize, scale, sub};
use crate::radial::{reconstruct_p_from_q, wronskian_constant, RadialFunction};
use crate::scatter::{CrossSections, SingleScattering};
use crate::translate::{free_coupling_closed, free_coupling_surface, SurfaceRule, TranslationKind, TranslationMatrix};

use super::Check;

pub const RADIAL_TOL: f64 = 1e-7;
pub const RECIPROCITY_TOL: f64 = 1e-10;
pub const OPTICAL_TOL: f64 = 1e-4;
pub const GREEN_SYMMETRY_TOL: f64 = 1e-8;
pub const GREEN_FORM_TOL: f64 = 1e-6;
pub const FREE_GREEN_TOL: f64 = 1e-6;
pub const FREE_GREEN_L_MAX: usize = 14;
pub const TRANSLATION_TOL: f64 = 1e-7;
pub const COUPLING_CLOSED_TOL: f64 = 1e-6;
pub const COUPLING_RADIUS_TOL: f64 = 1e-7;
pub const SECULAR_RESIDUAL_TOL: f64 = 1e-10;
pub const T_SYMMETRY_TOL: f64 = 1e-7;
pub const SURFACE_MATCH_TOL: f64 = 1e-4;

fn rel(a: &CMat, b: &CMat) -> f64 {
    max_diff(a, b) / max_abs(b).max(1e-300)
}

fn asym(m: &CMat) -> f64 {
    rel(m, &m.transpose())
}

/// `max_ab |a_ab − b_ab| / max(1, |b_ab|)`.
fn entrywise(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm() / y.norm().max(1.0)).fold(0.0, f64::max)
}

fn free_green(energy: f64, r: [f64; 3], s: [f64; 3]) -> Complex64 {
    let d = norm(sub(r, s));
    if energy > 0.0 {
        -Complex64::new(0.0, energy.sqrt() * d).exp() / (4.0 * PI * d)
    } else {
        Complex64::new(-(-(-energy).sqrt() * d).exp() / (4.0 * PI * d), 0.0)
    }
}

/// `|σ_int − σ_opt|` relative to the larger of the two. Cross sections below
/// `10⁻⁶` of the s-wave unitarity limit `4π/k²` are compared against that
/// floor instead: the optical route is linear in `I − A` and the integrated one
/// quadratic, so rounding in a nearly free `A` dominates there.
pub fn optical_defect(cs: &CrossSections, k: f64) -> f64 {
    let floor = 1e-6 * 4.0 * PI / (k * k);
    (cs.integrated - cs.optical).abs() / cs.integrated.abs().max(cs.optical.abs()).max(floor)
}

/// Radii at which the single-center relations are sampled.
#[derive(Clone, Copy, Debug)]
pub struct Probe {
    pub center: [f64; 3],
    pub r_stop: f64,
    pub inner: f64,
    pub outer: f64,
}

/// Wronskian, amplitude and Green-function relations of one solved center.
pub fn single_center_checks(ss: &SingleScattering, probe: Probe, k_dir: [f64; 3], l_sub: usize) -> Result<Vec<Check>> {
    let energy = ss.amplitude.energy;
    let k = ss.amplitude.wavenumber();
    let e = Some(energy);
    let mut out = Vec::new();
    let (p, qp, qm) = (&ss.p, &ss.q_plus, &ss.q_minus);
    let mp = &ss.m_plus.matrix;
    let mm = &ss.m_minus.matrix;
    for (name, r) in [("m_constancy_inner", probe.inner), ("m_constancy_outer", probe.outer)] {
        let w = wronskian_constant(p, qp, r)?;
        out.push(Check::new(name, e, rel(&(-w), mp), RADIAL_TOL));
    }
    let r = probe.inner;
    let (pv, pd) = p.eval(r)?;
    out.push(Check::new("p_wronskian_symmetry", e, asym(&(pv.transpose() * &pd)), RADIAL_TOL));
    let (qv, qd) = qp.eval(r)?;
    out.push(Check::new("q_wronskian_symmetry", e, asym(&(qv.transpose() * &qd)), RADIAL_TOL));
    let (mv, md) = qm.eval(r)?;
    let w = qd.transpose() * &mv - qv.transpose() * &md;
    let expect = CMat::identity(w.nrows(), w.nrows()) * Complex64::new(0.0, 2.0 / (k * r * r));
    out.push(Check::new("q_plus_minus_wronskian", e, rel(&w, &expect), RADIAL_TOL));
    out.push(Check::new("m_minus_is_conjugate", e, rel(mm, &mp.map(|z| z.conj())), RADIAL_TOL));
    let prod = mm * mp.transpose();
    out.push(Check::new("m_product_symmetry", e, asym(&prod), RADIAL_TOL));
    let imag = prod.iter().map(|z| z.im.abs()).fold(0.0, f64::max) / max_abs(&prod).max(1e-300);
    out.push(Check::new("m_product_real", e, imag, RADIAL_TOL));

    let qp_arc: Arc<dyn RadialFunction> = Arc::new(qp.clone());
    let qm_arc: Arc<dyn RadialFunction> = Arc::new(qm.clone());
    let rec = reconstruct_p_from_q(qp_arc.clone(), qm_arc.clone(), mp, mm, k)?;
    let (a, da) = rec.eval(r)?;
    out.push(Check::new("p_from_q_reconstruction", e, rel(&a, &pv).max(rel(&da, &pd)), RADIAL_TOL));

    let am = &ss.amplitude;
    out.push(Check::new("amplitude_symmetry", e, am.symmetry_defect() / max_abs(&am.a_hat).max(1e-300), RADIAL_TOL));
    out.push(Check::new("unitarity", e, am.unitarity_defect(l_sub), RADIAL_TOL));
    out.push(Check::new("reciprocity", e, am.reciprocity_defect(), RECIPROCITY_TOL));
    let cs = am.cross_sections(k_dir)?;
    out.push(Check::new("optical_theorem", e, optical_defect(&cs, k), OPTICAL_TOL));

    let c = probe.center;
    let near = add(c, scale(normalize([0.3, -0.5, 0.8]), probe.r_stop + 0.7));
    let far = add(c, scale(normalize([-0.6, 0.2, 0.4]), probe.inner));
    let gp = GreenExpansion::from_solutions(c, p, qp)?;
    let gm = GreenExpansion::from_solutions(c, p, qm)?;
    let g = gp.eval(near, far)?;
    let scale_g = g.norm().max(1e-300);
    out.push(Check::new("green_symmetry", e, (gp.eval(far, near)? - g).norm() / scale_g, GREEN_SYMMETRY_TOL));
    out.push(Check::new(
        "green_incoming_conjugate",
        e,
        (gm.eval(far, near)?.conj() - g).norm() / scale_g,
        GREEN_SYMMETRY_TOL,
    ));
    let ig = IrregularGreen::new(c, k, qp_arc, qm_arc, am.a_hat.clone());
    out.push(Check::new("green_irregular_form", e, (ig.eval(near, far)? - g).norm() / scale_g, GREEN_FORM_TOL));
    Ok(out)
}

/// Free Green function against its closed form above and below zero energy.
pub fn free_green_checks(center: [f64; 3], energy: f64) -> Result<Vec<Check>> {
    let r = add(center, scale(normalize([0.2, 0.3, 0.9]), 0.5));
    let s = add(center, scale(normalize([0.7, -0.6, 0.1]), 2.5));
    let mut out = Vec::new();
    for (name, e) in [("free_green_closed_form", energy), ("free_green_closed_form_negative", -energy)] {
        let g = GreenExpansion::free(center, e, Truncation::new(FREE_GREEN_L_MAX))?;
        let exact = free_green(e, r, s);
        out.push(Check::new(name, Some(energy), (g.eval(r, s)? - exact).norm() / exact.norm(), FREE_GREEN_TOL));
    }
    Ok(out)
}

fn tall_l(trunc: Truncation, k: f64, length: f64) -> Truncation {
    Truncation::new((trunc.l_max + (k * length).ceil() as usize + 14).min(30))
}

/// Orthogonality and group law of `D`, and the free coupling against its
/// closed form, for the displacement `displacement`.
pub fn translation_checks(
    energy: f64,
    displacement: [f64; 3],
    trunc: Truncation,
    rule: SurfaceRule,
) -> Result<Vec<Check>> {
    let k = energy.sqrt();
    let e = Some(energy);
    let d = norm(displacement);
    let mut out = Vec::new();
    let big = tall_l(trunc, k, d);
    let fwd = TranslationMatrix::block(TranslationKind::D, k, displacement, trunc, big)?.matrix;
    let back = TranslationMatrix::block(TranslationKind::D, k, scale(displacement, -1.0), big, trunc)?.matrix;
    let n = trunc.dim();
    out.push(Check::new("translation_orthogonality", e, max_diff(&(fwd * back), &CMat::identity(n, n)), TRANSLATION_TOL));
    let second = [-0.3, 0.8, 0.4];
    let big = tall_l(trunc, k, d + norm(second));
    let lhs = TranslationMatrix::block(TranslationKind::DHat, k, add(displacement, second), trunc, trunc)?.matrix;
    let a = TranslationMatrix::block(TranslationKind::DHat, k, displacement, trunc, big)?.matrix;
    let b = TranslationMatrix::block(TranslationKind::DHat, k, second, big, trunc)?.matrix;
    out.push(Check::new("translation_group_law", e, max_diff(&lhs, &(a * b)), TRANSLATION_TOL));
    let origin = [0.0; 3];
    let closed = free_coupling_closed(k, origin, displacement, trunc)?;
    let wide = free_coupling_surface(k, origin, displacement, 0.5 * d, trunc, rule)?;
    let narrow = free_coupling_surface(k, origin, displacement, 0.3 * d, trunc, rule)?;
    out.push(Check::new("free_coupling_closed_form", e, entrywise(&wide.matrix, &closed), COUPLING_CLOSED_TOL));
    out.push(Check::new(
        "free_coupling_radius_independence",
        e,
        entrywise(&narrow.matrix, &wide.matrix),
        COUPLING_RADIUS_TOL,
    ));
    Ok(out)
}

/// Secular residual, inverse t-matrix symmetry and surface matching of the
/// multicenter solution.
pub fn msw_checks(problem: &MswProblem<'_>, energy: f64, k_dir: [f64; 3], incident: Incident) -> Result<Vec<Check>> {
    let e = Some(energy);
    let state = problem.assemble(energy)?;
    let sol = solve_secular(&state.system)?;
    let wf = MolecularWavefunction::new(&state.atoms, &state.system, &sol, k_dir, incident)?;
    let degree = 4 * problem.settings().l_max + 4;
    let mut surface = 0.0f64;
    for i in 0..state.atoms.len() {
        surface = surface.max(wf.surface_matching(i, degree)?.relative());
    }
    Ok(vec![
        Check::new("msw_secular_residual", e, sol.residual, SECULAR_RESIDUAL_TOL),
        Check::new("msw_t_inverse_symmetry", e, state.t_symmetry_defect(), T_SYMMETRY_TOL),
        Check::new("msw_surface_matching", e, surface, SURFACE_MATCH_TOL),
    ])
}
