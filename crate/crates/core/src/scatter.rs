//! Single-center scattering: amplitude matrices `Â` and `A`, the scattering
//! amplitude and cross sections.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::angular::{sh_vector, Truncation};
use crate::error::{DwmsError, Result};
use crate::linalg::{balanced_condition, diag_complex, inverse, max_abs, max_diff, sub_block, CMat, CVec};
use crate::quadrature::{dot, normalize, SphereQuadrature};
use crate::radial::{
    integrate_irregular, integrate_regular, CoupledPotentialMatrix, IrregularBoundary, RadialSolution,
    WronskianConstant, TAIL_THRESHOLD,
};
use crate::specfun::PhaseMatrix;
use crate::translate::{TranslationKind, TranslationMatrix};

/// Above this balanced condition number of `M₊` the energy is treated as too
/// close to a bound state or resonance of the potential.
pub const MAX_AMPLITUDE_CONDITION: f64 = 1e10;

/// `Â = M₋ᵀ(M₊⁻¹)ᵀ` and `A = ξ†Âξ` at one energy.
#[derive(Clone, Debug)]
pub struct AmplitudeMatrix {
    pub a_hat: CMat,
    pub a: CMat,
    pub energy: f64,
    pub trunc: Truncation,
    /// Balanced condition number of `M₊`.
    pub condition: f64,
}

pub fn amplitude_matrix(m_plus: &CMat, m_minus: &CMat, energy: f64, trunc: Truncation) -> Result<AmplitudeMatrix> {
    if energy <= 0.0 {
        return Err(DwmsError::Domain("amplitude matrix needs positive energy".into()));
    }
    if m_plus.nrows() != trunc.dim() || m_minus.shape() != m_plus.shape() {
        return Err(DwmsError::Dimension("Wronskian constants disagree with the truncation".into()));
    }
    let condition = balanced_condition(m_plus);
    if !(condition <= MAX_AMPLITUDE_CONDITION) {
        return Err(DwmsError::Singular {
            context: "M₊ near a bound state or resonance; use the bound-state scan".into(),
            cond: condition,
        });
    }
    let a_hat = m_minus.transpose() * inverse(m_plus, "M₊")?.transpose();
    let xi = PhaseMatrix::xi(trunc).matrix();
    let a = xi.adjoint() * &a_hat * xi;
    Ok(AmplitudeMatrix { a_hat, a, energy, trunc, condition })
}

fn y_vec(l_max: usize, dir: [f64; 3]) -> Result<CVec> {
    let y = sh_vector(l_max, normalize(dir))?;
    Ok(CVec::from_iterator(y.len(), y.into_iter().map(|v| Complex64::new(v, 0.0))))
}

impl AmplitudeMatrix {
    /// No scattering: `Â = A = I`.
    pub fn free(energy: f64, trunc: Truncation) -> Self {
        let n = trunc.dim();
        Self { a_hat: CMat::identity(n, n), a: CMat::identity(n, n), energy, trunc, condition: 1.0 }
    }

    /// From `e^{2iδ_l}` of a central potential.
    pub fn from_phase_shifts(energy: f64, trunc: Truncation, deltas: &[f64]) -> Self {
        let d: Vec<Complex64> =
            trunc.l_values().iter().map(|l| Complex64::new(0.0, 2.0 * deltas[*l]).exp()).collect();
        let a = diag_complex(&d);
        Self { a_hat: a.clone(), a, energy, trunc, condition: 1.0 }
    }

    pub fn wavenumber(&self) -> f64 {
        self.energy.sqrt()
    }

    /// `‖Â − Âᵀ‖_max`.
    pub fn symmetry_defect(&self) -> f64 {
        max_diff(&self.a_hat, &self.a_hat.transpose())
    }

    /// `‖A†A − I‖_max` on channels `l ≤ l_sub`.
    pub fn unitarity_defect(&self, l_sub: usize) -> f64 {
        let n = self.trunc.sub_dim(l_sub.min(self.trunc.l_max));
        let a = sub_block(&self.a, n);
        max_diff(&(a.adjoint() * &a), &CMat::identity(n, n))
    }

    /// `‖ηAᵀη − A‖_max`.
    pub fn reciprocity_defect(&self) -> f64 {
        let eta = PhaseMatrix::eta(self.trunc).matrix();
        max_diff(&(&eta * self.a.transpose() * &eta), &self.a)
    }

    /// Largest `|A_LL' |` off the diagonal, zero for central potentials.
    pub fn off_diagonal(&self) -> f64 {
        let mut off = self.a.clone();
        off.fill_diagonal(Complex64::new(0.0, 0.0));
        max_abs(&off)
    }

    /// `(I − A) Y(k̂)`, the part of `f` independent of the outgoing direction.
    fn scattered_column(&self, k_in: [f64; 3]) -> Result<CVec> {
        let y = y_vec(self.trunc.l_max, k_in)?;
        let n = self.trunc.dim();
        Ok((CMat::identity(n, n) - &self.a) * y)
    }

    /// `f(k', k) = (2πi/k) Y(k̂')ᵀ(I − A)Y(k̂)` in bohr.
    pub fn scattering_amplitude(&self, k_out: [f64; 3], k_in: [f64; 3]) -> Result<Complex64> {
        let col = self.scattered_column(k_in)?;
        let yo = y_vec(self.trunc.l_max, k_out)?;
        Ok((yo.transpose() * col)[(0, 0)] * Complex64::new(0.0, 2.0 * PI / self.wavenumber()))
    }

    pub fn differential_cross_section(&self, k_out: [f64; 3], k_in: [f64; 3]) -> Result<f64> {
        Ok(self.scattering_amplitude(k_out, k_in)?.norm_sqr())
    }

    /// `σ_tot` by integrating `|f|²` with a rule exact for degree `2 l_max`,
    /// and by the optical theorem.
    pub fn cross_sections(&self, k_in: [f64; 3]) -> Result<CrossSections> {
        let quad = SphereQuadrature::exact_to_degree(2 * self.trunc.l_max);
        self.cross_sections_with(k_in, &quad)
    }

    pub fn cross_sections_with(&self, k_in: [f64; 3], quad: &SphereQuadrature) -> Result<CrossSections> {
        let col = self.scattered_column(k_in)?;
        let pref = 2.0 * PI / self.wavenumber();
        let mut integrated = 0.0;
        for node in &quad.nodes {
            let yo = y_vec(self.trunc.l_max, node.dir)?;
            let f = (yo.transpose() * &col)[(0, 0)] * pref;
            integrated += node.weight * f.norm_sqr();
        }
        let forward = self.scattering_amplitude(k_in, k_in)?;
        let optical = 4.0 * PI / self.wavenumber() * forward.im;
        Ok(CrossSections { integrated, optical })
    }

    /// `A_j = I − D̂(k;R_ij)(I − A_i)D̂(k;−R_ij)` referred to a center displaced
    /// by `R_ij`, in the truncation `rows`.
    pub fn translated(&self, displacement: [f64; 3], rows: Truncation) -> Result<AmplitudeMatrix> {
        let k = self.wavenumber();
        let fwd = TranslationMatrix::block(TranslationKind::DHat, k, displacement, rows, self.trunc)?.matrix;
        let back = TranslationMatrix::block(
            TranslationKind::DHat,
            k,
            crate::quadrature::scale(displacement, -1.0),
            self.trunc,
            rows,
        )?
        .matrix;
        let n = self.trunc.dim();
        let t = CMat::identity(n, n) - &self.a;
        let m = rows.dim();
        let a = CMat::identity(m, m) - fwd * t * back;
        let xi = PhaseMatrix::xi(rows).matrix();
        let a_hat = &xi * &a * xi.adjoint();
        Ok(AmplitudeMatrix { a_hat, a, energy: self.energy, trunc: rows, condition: self.condition })
    }
}

/// Total cross section by two routes.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct CrossSections {
    /// `∫|f|² dΩ`.
    pub integrated: f64,
    /// `(4π/k) Im f(k,k)`.
    pub optical: f64,
}

impl CrossSections {
    pub fn relative_mismatch(&self) -> f64 {
        (self.integrated - self.optical).abs() / self.integrated.abs().max(self.optical.abs()).max(1e-300)
    }
}

/// `f_j(k',k) = exp[i(k' − k)·R_ij] f_i(k',k)`.
pub fn translated_amplitude_phase(
    f_i: Complex64,
    k: f64,
    displacement: [f64; 3],
    k_out: [f64; 3],
    k_in: [f64; 3],
) -> Complex64 {
    let (o, n) = (normalize(k_out), normalize(k_in));
    let q = [k * (o[0] - n[0]), k * (o[1] - n[1]), k * (o[2] - n[2])];
    f_i * Complex64::new(0.0, dot(q, displacement)).exp()
}

/// Solutions and amplitude matrix for one potential about one center.
#[derive(Clone, Debug)]
pub struct SingleScattering {
    pub p: RadialSolution,
    pub q_plus: RadialSolution,
    pub q_minus: RadialSolution,
    pub m_plus: WronskianConstant,
    pub m_minus: WronskianConstant,
    pub amplitude: AmplitudeMatrix,
}

/// Integrates `p` and `q±`; `q±` are kept down to `r_stop`.
pub fn solve_single(pm: Arc<CoupledPotentialMatrix>, energy: f64, r_stop: f64) -> Result<SingleScattering> {
    let trunc = pm.truncation();
    let p = integrate_regular(pm.clone(), energy)?;
    let q_plus = integrate_irregular(pm, energy, IrregularBoundary::Outgoing, r_stop, TAIL_THRESHOLD)?;
    let q_minus = q_plus.conjugated();
    let m_plus = WronskianConstant::compute(&p, &q_plus)?;
    let m_minus = WronskianConstant::compute(&p, &q_minus)?;
    let amplitude = amplitude_matrix(&m_plus.matrix, &m_minus.matrix, energy - p.potential().asymptotic(), trunc)?;
    Ok(SingleScattering { p, q_plus, q_minus, m_plus, m_minus, amplitude })
}

/// `δ_l = arg(A_LL)/2` from the `m = 0` diagonal entries, in `(−π/2, π/2]`.
pub fn phase_shifts(am: &AmplitudeMatrix) -> Vec<f64> {
    (0..=am.trunc.l_max).map(|l| am.a[(l * l + l, l * l + l)].arg() / 2.0).collect()
}

/// Analytic phase shifts of a spherical square well of `depth` and `radius`.
pub fn square_well_phase_shifts(depth: f64, radius: f64, energy: f64, l_max: usize) -> Result<Vec<f64>> {
    use crate::specfun::{sph_bessel_all, BesselKind};
    let k = energy.sqrt();
    let inner = energy + depth;
    let (j_in, gamma_scale) = if inner > 0.0 {
        (sph_bessel_all(BesselKind::J, l_max, inner.sqrt() * radius)?, inner.sqrt())
    } else {
        (sph_bessel_all(BesselKind::ModI, l_max, (-inner).sqrt() * radius)?, (-inner).sqrt())
    };
    let j = sph_bessel_all(BesselKind::J, l_max, k * radius)?;
    let n = sph_bessel_all(BesselKind::N, l_max, k * radius)?;
    Ok((0..=l_max)
        .map(|l| {
            let gamma = gamma_scale * j_in.derivs[l].re / j_in.values[l].re;
            let num = k * j.derivs[l].re - gamma * j.values[l].re;
            let den = k * n.derivs[l].re - gamma * n.values[l].re;
            (num / den).atan()
        })
        .collect())
}

/// Partial-wave total cross section `(4π/k²) Σ (2l+1) sin²δ_l`.
pub fn partial_wave_cross_section(energy: f64, deltas: &[f64]) -> f64 {
    let s: f64 = deltas.iter().enumerate().map(|(l, d)| (2 * l + 1) as f64 * d.sin().powi(2)).sum();
    4.0 * PI / energy * s
}

/// One row of a cross-section sweep.
#[derive(Clone, Debug, serde::Serialize)]
pub struct CrossSectionRecord {
    pub energy: f64,
    pub sigma_integrated: f64,
    pub sigma_optical: f64,
    pub unitarity_defect: f64,
    /// Independent value printed alongside when available (partial waves).
    pub sigma_reference: Option<f64>,
}

pub fn write_cross_sections(records: &[CrossSectionRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| DwmsError::Io(std::io::Error::other(e)))?;
    for r in records {
        w.serialize(r).map_err(|e| DwmsError::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `θ, φ, dσ/dΩ` on a product grid for incidence along `k_in`.
pub fn write_angular_distribution(am: &AmplitudeMatrix, k_in: [f64; 3], n_theta: usize, n_phi: usize, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| DwmsError::Io(std::io::Error::other(e)))?;
    w.write_record(["theta", "phi", "dsigma_domega"]).map_err(|e| DwmsError::Io(std::io::Error::other(e)))?;
    for it in 0..n_theta {
        let theta = PI * (it as f64 + 0.5) / n_theta as f64;
        for ip in 0..n_phi {
            let phi = 2.0 * PI * ip as f64 / n_phi as f64;
            let dir = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
            let s = am.differential_cross_section(dir, k_in)?;
            w.write_record([format!("{theta:.10}"), format!("{phi:.10}"), format!("{s:.12e}")])
                .map_err(|e| DwmsError::Io(std::io::Error::other(e)))?;
        }
    }
    w.flush()?;
    Ok(())
}
