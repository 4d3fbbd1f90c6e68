use std::sync::Arc;

use num_complex::Complex64;

use super::*;
use crate::linalg::{inverse, CMat};
use crate::potential::{Continuation, MolecularPartition, PotentialModel, PotentialTerm, RadialForm};
use crate::scatter::square_well_phase_shifts;
use crate::specfun::{sph_bessel_all, BesselKind};
use crate::translate::near_field_f;

fn distorted(sites: Vec<[f64; 3]>, forms: Vec<(usize, RadialForm)>, offset: f64, radii: Vec<f64>) -> DistortedPotential {
    let centers = sites[..radii.len()].to_vec();
    let terms = forms.into_iter().map(|(site, form)| PotentialTerm { site, form }).collect();
    let model = Arc::new(PotentialModel::new(sites, terms, offset).unwrap());
    let part = MolecularPartition::new(centers, radii).unwrap();
    DistortedPotential::build(model, part, Continuation::Polynomial { degree: 3, l_cont: 8 }).unwrap()
}

fn settings(l_max: usize) -> MswSettings {
    MswSettings { l_max, l_max_pot: 2 * l_max, ..MswSettings::default() }
}

/// Square wells inside spheres with a constant interstitial value.
fn muffin_tin(offset: f64) -> DistortedPotential {
    let well = RadialForm::SquareWell { depth: 1.5, radius: 1.8 };
    distorted(vec![[0.0, 0.0, -2.5], [0.0, 0.0, 2.5]], vec![(0, well), (1, well)], offset, vec![2.0, 2.0])
}

/// Classic muffin-tin multiple scattering: `(t⁻¹ a^i) − Σ_j F(k; R_i − R_j) a^j = 4π D(k; R_i) ξ Y(k̂)`,
/// `ψ = e^{ik·r} + Σ_j h⁺(k r_j) Yᵀ(r̂_j) a^j`.
struct MtReference {
    k: f64,
    centers: Vec<[f64; 3]>,
    trunc: Truncation,
    amplitudes: Vec<CVec>,
}

impl MtReference {
    fn solve(k: f64, centers: Vec<[f64; 3]>, deltas: &[f64], trunc: Truncation, k_dir: [f64; 3]) -> Self {
        let n = trunc.dim();
        let size = n * centers.len();
        let mut a = CMat::zeros(size, size);
        let mut rhs = CVec::zeros(size);
        let yk: Vec<f64> = harmonics(trunc, k_dir);
        for (i, ri) in centers.iter().enumerate() {
            for idx in 0..n {
                let l = AngularIndex::from_index(idx).l;
                let t = Complex64::new(0.0, 1.0) * Complex64::from_polar(1.0, deltas[l]) * deltas[l].sin();
                a[(i * n + idx, i * n + idx)] = 1.0 / t;
            }
            for (j, rj) in centers.iter().enumerate() {
                if i != j {
                    let f = near_field_f(k, sub(*ri, *rj), trunc).unwrap().matrix;
                    a.view_mut((i * n, j * n), (n, n)).copy_from(&(-f));
                }
            }
            let d = translation_d(k, *ri, trunc).unwrap().matrix;
            let xi_y = CVec::from_fn(n, |idx, _| i_pow(AngularIndex::from_index(idx).l as i64) * yk[idx] * (4.0 * PI));
            rhs.rows_mut(i * n, n).copy_from(&(d * xi_y));
        }
        let sol = a.lu().solve(&rhs).unwrap();
        let amplitudes = (0..centers.len()).map(|i| sol.rows(i * n, n).into_owned()).collect();
        Self { k, centers, trunc, amplitudes }
    }

    fn value(&self, point: [f64; 3], k_dir: [f64; 3]) -> Complex64 {
        let kv = scale(crate::quadrature::normalize(k_dir), self.k);
        let mut psi = Complex64::new(0.0, crate::quadrature::dot(kv, point)).exp();
        for (c, a) in self.centers.iter().zip(&self.amplitudes) {
            let rel = sub(point, *c);
            let h = sph_bessel_all(BesselKind::HPlus, self.trunc.l_max, self.k * norm(rel)).unwrap();
            let y = harmonics(self.trunc, rel);
            for idx in 0..self.trunc.dim() {
                psi += h.values[AngularIndex::from_index(idx).l] * y[idx] * a[idx];
            }
        }
        psi
    }
}

fn vmax(v: &CVec) -> f64 {
    v.iter().fold(0.0, |a, z| a.max(z.norm()))
}

fn interstitial_points(count: usize, centers: &[[f64; 3]], radius: f64) -> Vec<[f64; 3]> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut out = Vec::new();
    while out.len() < count {
        let p = [rng.random_range(-3.5..3.5), rng.random_range(-3.5..3.5), rng.random_range(-5.0..5.0)];
        if centers.iter().all(|c| norm(sub(p, *c)) > radius + 0.05) {
            out.push(p);
        }
    }
    out
}

#[test]
fn single_sphere_t_matrix_matches_phase_shifts() {
    let well = RadialForm::SquareWell { depth: 2.0, radius: 1.8 };
    let pot = distorted(vec![[0.0; 3]], vec![(0, well)], 0.0, vec![2.0]);
    let energy = 1.0;
    let atom = AtomicScatteringData::build(&pot, 0, energy, &settings(4)).unwrap();
    assert!(atom.t.symmetry_defect < 1e-10);
    let t = inverse(&atom.t.t_inverse, "t").unwrap();
    let deltas = square_well_phase_shifts(2.0, 1.8, energy, 4).unwrap();
    let k = 1.0;
    for a in 0..25 {
        let l = AngularIndex::from_index(a).l;
        let expect = Complex64::from_polar(1.0, deltas[l]) * deltas[l].sin() * k;
        assert!((t[(a, a)] - expect).norm() < 1e-6, "l = {l}: {} vs {expect}", t[(a, a)]);
    }
    let off = t.iter().enumerate().filter(|(n, _)| n % 26 != 0).fold(0.0f64, |m, (_, z)| m.max(z.norm()));
    assert!(off < 1e-10);
}

#[test]
fn identity_continuation_is_rejected_as_degenerate() {
    let well = RadialForm::Gaussian { depth: 1.0, width: 1.0 };
    let terms = vec![PotentialTerm { site: 0, form: well }];
    let model = Arc::new(PotentialModel::new(vec![[0.0; 3]], terms, 0.0).unwrap());
    let part = MolecularPartition::new(vec![[0.0; 3]], vec![2.0]).unwrap();
    let pot = DistortedPotential::build(model, part, Continuation::Identity).unwrap();
    let err = AtomicScatteringData::build(&pot, 0, 1.0, &settings(2)).unwrap_err();
    assert!(matches!(err, DwmsError::Singular { .. }), "{err}");
}

#[test]
fn single_center_solution_is_t_times_rhs() {
    let well = RadialForm::SquareWell { depth: 1.0, radius: 1.5 };
    let center = [0.3, -0.2, 0.5];
    let pot = distorted(vec![center], vec![(0, well)], 0.0, vec![2.0]);
    let s = settings(3);
    let state = MswState::assemble(&pot, 0.8, &s).unwrap();
    let sol = solve_secular(&state.system).unwrap();
    assert!(sol.residual < 1e-12);
    let t = inverse(&state.atoms[0].t.t_inverse, "t").unwrap();
    let k = 0.8f64.sqrt();
    let dir = [0.2, 0.7, -0.4];
    let b = &sol.scattering(s.trunc(), dir)[0];
    let d = translation_d(k, center, s.trunc()).unwrap().matrix;
    let xi_y = PhaseMatrix::xi(s.trunc()).matrix() * row(&harmonics(s.trunc(), dir));
    let expect = t * d * xi_y * Complex64::new(-4.0 * PI / k, 0.0);
    assert!(vmax(&(b - &expect)) < 1e-10 * vmax(&expect));
}

#[test]
fn channel_superposition_and_zero_rhs() {
    let pot = muffin_tin(0.0);
    let s = settings(3);
    let state = MswState::assemble(&pot, 1.0, &s).unwrap();
    let sol = solve_secular(&state.system).unwrap();
    let dir = [0.5, -0.1, 0.8];
    let w = excitation_weights(s.trunc(), dir);
    let general = state.system.rhs.as_ref().unwrap() * &w;
    let general = CMat::from_column_slice(general.len(), 1, general.as_slice());
    let direct = solve_with(&state.system.matrix, &general).unwrap();
    let sup = &sol.channels * &w;
    assert!(vmax(&(direct.channels.column(0) - &sup)) < 1e-12 * vmax(&sup));
    let zero = solve_with(&state.system.matrix, &CMat::zeros(state.system.matrix.nrows(), 2)).unwrap();
    assert_eq!(max_abs(&zero.channels), 0.0);
}

#[test]
fn muffin_tin_limit_matches_reference() {
    let offset = 0.1;
    let pot = muffin_tin(offset);
    let s = MswSettings { reach: 3.0, ..settings(4) };
    let energy = 1.0;
    let k = (energy - offset).sqrt();
    let state = MswState::assemble(&pot, energy, &s).unwrap();
    assert!(state.system.block_symmetry_defect() < 1e-8);
    let sol = solve_secular(&state.system).unwrap();
    let dir = [0.3, 0.2, 0.9];
    let deltas = square_well_phase_shifts(1.5, 1.8, energy - offset, 4).unwrap();
    let reference = MtReference::solve(k, state.system.centers.clone(), &deltas, s.trunc(), dir);
    let wf = MolecularWavefunction::new(&state.atoms, &state.system, &sol, dir, Incident::plane_wave(k, dir)).unwrap();
    // −i B^j are the outgoing amplitudes of the reference
    for (b, a) in wf.scattered().iter().zip(&reference.amplitudes) {
        let scaled = b * Complex64::new(0.0, -1.0);
        assert!(vmax(&(scaled - a)) < 1e-6 * vmax(&a).max(1.0));
    }
    for p in interstitial_points(20, &state.system.centers, 2.0) {
        let ours = wf.value(p).unwrap();
        let theirs = reference.value(p, dir);
        assert!((ours - theirs).norm() < 1e-6, "{p:?}: {ours} vs {theirs}");
    }
    for i in 0..2 {
        let m = wf.surface_matching(i, 4 * s.l_max + 4).unwrap();
        assert!(m.relative() < 1e-7, "{m:?}");
    }
}

/// Two Coulomb-like atoms with a shallow smooth background across the bond.
fn toy_molecule(depth: f64) -> DistortedPotential {
    let atom = RadialForm::CoulombCutoff { z: 1.0, cutoff: 2.0 };
    let background = RadialForm::Gaussian { depth, width: 4.0 };
    distorted(
        vec![[0.0, 0.0, -2.5], [0.0, 0.0, 2.5], [0.0; 3]],
        vec![(0, atom), (1, atom), (2, background)],
        0.0,
        vec![2.0, 2.0],
    )
}

#[test]
fn swap_symmetry_and_surface_matching_on_toy_molecule() {
    let pot = toy_molecule(0.1);
    let s = settings(3);
    let state = MswState::assemble(&pot, 1.0, &s).unwrap();
    assert!(state.t_symmetry_defect() < 1e-9, "{}", state.t_symmetry_defect());
    let sol = solve_secular(&state.system).unwrap();
    assert!(sol.residual < 1e-10);
    let dir = [0.4, -0.3, 0.7];
    let mirrored = [0.4, -0.3, -0.7];
    let b = sol.scattering(s.trunc(), dir);
    let bm = sol.scattering(s.trunc(), mirrored);
    let p = z_reflection(s.trunc());
    let scale = vmax(&b[0]);
    assert!(vmax(&(&b[0] - &p * &bm[1])) < 1e-8 * scale);
    assert!(vmax(&(&b[1] - &p * &bm[0])) < 1e-8 * scale);
    let wf = MolecularWavefunction::new(&state.atoms, &state.system, &sol, dir, Incident::plane_wave(1.0, dir)).unwrap();
    for i in 0..2 {
        let m = wf.surface_matching(i, 4 * s.l_max + 4).unwrap();
        assert!(m.relative() < 1e-3, "{m:?}");
    }
}

/// Lowest s level of a spherical square well from `K cot(K a) = −κ` by bisection.
fn square_well_s_level(depth: f64, radius: f64) -> f64 {
    let f = |e: f64| {
        let kin = (e + depth).sqrt();
        kin / (kin * radius).tan() + (-e).sqrt()
    };
    // the lowest root lies where K a ∈ (π/2, π)
    let (mut lo, mut hi) = ((PI / 2.0 / radius).powi(2) - depth + 1e-12, (-1e-12f64).min((PI / radius).powi(2) - depth - 1e-12));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo).signum() == f(mid).signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn single_center_bound_state_matches_analytic_level() {
    let (depth, radius) = (2.5, 1.5);
    let pot = distorted(vec![[0.0; 3]], vec![(0, RadialForm::SquareWell { depth, radius })], 0.0, vec![2.0]);
    let expect = square_well_s_level(depth, radius);
    let window = ScanWindow { e_min: -2.3, e_max: -0.05, steps: 24, ..ScanWindow::default() };
    let report = bound_state_scan(&MswProblem::new(&pot, settings(1)), &window).unwrap();
    assert_eq!(report.candidates.len(), 1, "{report:?}");
    assert!((report.candidates[0].energy - expect).abs() < 1e-5, "{} vs {expect}", report.candidates[0].energy);
    assert!(report.flagged.is_empty());
}

#[test]
fn shallow_well_has_no_candidates() {
    let pot = distorted(vec![[0.0; 3]], vec![(0, RadialForm::SquareWell { depth: 0.3, radius: 1.5 })], 0.0, vec![2.0]);
    let window = ScanWindow { e_min: -1.0, e_max: -0.05, steps: 12, ..ScanWindow::default() };
    let report = bound_state_scan(&MswProblem::new(&pot, settings(1)), &window).unwrap();
    assert!(report.candidates.is_empty(), "{report:?}");
}

