use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DwmsError, Result};
use crate::linalg::CMat;
use super::{MswProblem, Regime};

/// Energy window below the interstitial asymptote.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanWindow {
    pub e_min: f64,
    pub e_max: f64,
    pub steps: usize,
    /// Candidates must refine to a smallest singular value below this.
    pub sigma_threshold: f64,
    /// Energy tolerance of the golden-section refinement.
    pub energy_tol: f64,
    /// `cond(M_i)` above this flags a distorting-potential bound state.
    pub wronskian_limit: f64,
}

impl Default for ScanWindow {
    fn default() -> Self {
        Self { e_min: -1.0, e_max: -0.05, steps: 40, sigma_threshold: 1e-4, energy_tol: 1e-9, wronskian_limit: 1e10 }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScanSample {
    pub energy: f64,
    /// Smallest singular value of the diagonally scaled secular matrix.
    pub sigma_min: f64,
    /// Phase of its determinant.
    pub det_phase: f64,
    pub wronskian_condition: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundCandidate {
    pub energy: f64,
    pub sigma_min: f64,
    /// Determinant phase changes by about π across the bracket.
    pub phase_flip: bool,
    pub bracket: (f64, f64),
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ScanReport {
    pub samples: Vec<ScanSample>,
    pub candidates: Vec<BoundCandidate>,
    /// Local minima that failed the threshold or the phase test.
    pub rejected: Vec<BoundCandidate>,
    /// Energies with `cond(M_i)` over the limit.
    pub flagged: Vec<f64>,
    /// Energies where assembly failed, with the reason.
    pub failures: Vec<(f64, String)>,
}

/// `D S D` with `D_a = 1/√max(|S_aa|, 1)`, taming the growth of high-`l` entries.
fn scaled(s: &CMat) -> CMat {
    let d: Vec<f64> = (0..s.nrows()).map(|a| 1.0 / s[(a, a)].norm().max(1.0).sqrt()).collect();
    CMat::from_fn(s.nrows(), s.ncols(), |a, b| s[(a, b)] * (d[a] * d[b]))
}

/// Singularity indicators of the homogeneous secular system at one energy.
pub fn secular_singularity(problem: &MswProblem<'_>, energy: f64) -> Result<ScanSample> {
    if !matches!(Regime::of(problem.potential(), energy)?, Regime::Bound { .. }) {
        return Err(DwmsError::Domain(format!("bound-state scan energy {energy} is above the asymptote")));
    }
    let state = problem.assemble(energy)?;
    let s = scaled(&state.system.matrix);
    let sigma_min = s.clone().singular_values().iter().cloned().fold(f64::INFINITY, f64::min);
    let det: Complex64 = s.lu().determinant();
    let wronskian_condition = state.atoms.iter().map(|a| a.wronskian_condition()).fold(0.0, f64::max);
    Ok(ScanSample { energy, sigma_min, det_phase: det.arg(), wronskian_condition })
}

fn phase_jump(a: f64, b: f64) -> f64 {
    let d = (b - a).rem_euclid(2.0 * std::f64::consts::PI);
    d.min(2.0 * std::f64::consts::PI - d)
}

/// Minimizes the smallest singular value on `[lo, hi]` by golden section.
fn refine(problem: &MswProblem<'_>, lo: f64, hi: f64, tol: f64) -> Result<ScanSample> {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = secular_singularity(problem, c)?;
    let mut fd = secular_singularity(problem, d)?;
    while (b - a).abs() > tol {
        if fc.sigma_min < fd.sigma_min {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = secular_singularity(problem, c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = secular_singularity(problem, d)?;
        }
    }
    Ok(if fc.sigma_min < fd.sigma_min { fc } else { fd })
}

/// Scans `window` for energies where the secular matrix becomes singular.
pub fn bound_state_scan(problem: &MswProblem<'_>, window: &ScanWindow) -> Result<ScanReport> {
    if !(window.e_min < window.e_max) || window.steps < 3 {
        return Err(DwmsError::Config("scan window needs e_min < e_max and at least 3 steps".into()));
    }
    let energies: Vec<f64> = (0..window.steps)
        .map(|n| window.e_min + (window.e_max - window.e_min) * n as f64 / (window.steps - 1) as f64)
        .collect();
    let results: Vec<(f64, Result<ScanSample>)> =
        energies.par_iter().map(|&e| (e, secular_singularity(problem, e))).collect();
    let mut report = ScanReport::default();
    for (e, r) in results {
        match r {
            Ok(s) => report.samples.push(s),
            Err(err @ (DwmsError::Singular { .. } | DwmsError::OutOfRange { .. })) => report.failures.push((e, err.to_string())),
            Err(err) => return Err(err),
        }
    }
    report.flagged = report.samples.iter().filter(|s| s.wronskian_condition > window.wronskian_limit).map(|s| s.energy).collect();
    let s = &report.samples;
    for k in 1..s.len().saturating_sub(1) {
        if !(s[k].sigma_min < s[k - 1].sigma_min && s[k].sigma_min <= s[k + 1].sigma_min) {
            continue;
        }
        let bracket = (s[k - 1].energy, s[k + 1].energy);
        let best = refine(problem, bracket.0, bracket.1, window.energy_tol)?;
        let lo = secular_singularity(problem, bracket.0.max(best.energy - 1e-4))?;
        let hi = secular_singularity(problem, bracket.1.min(best.energy + 1e-4))?;
        let phase_flip = phase_jump(lo.det_phase, hi.det_phase) > std::f64::consts::FRAC_PI_2;
        let cand = BoundCandidate { energy: best.energy, sigma_min: best.sigma_min, phase_flip, bracket };
        if phase_flip && best.sigma_min < window.sigma_threshold {
            report.candidates.push(cand);
        } else {
            report.rejected.push(cand);
        }
    }
    Ok(report)
}
