//! Multicenter secular system: atomic inverse t-matrices, near-field couplings,
//! the dense block solve, wavefunction reconstruction and the bound-state scan.

mod bound;

pub use bound::{bound_state_scan, secular_singularity, BoundCandidate, ScanReport, ScanSample, ScanWindow};

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angular::{AngularIndex, ShEvaluator, Truncation};
use crate::error::{DwmsError, Result};
use crate::linalg::{balanced_condition, condition_number, max_abs, max_diff, scaled_asymmetry, CMat, CVec};
use crate::potential::{DistortedPotential, Which};
use crate::quadrature::{add, norm, scale, sub, SphereQuadrature};
use crate::radial::{
    default_step, grid_for_field, integrate_irregular_window, integrate_regular_to, CoupledPotentialMatrix,
    IrregularBoundary, RadialFunction, RadialSolution, WronskianConstant, TAIL_THRESHOLD,
};
use crate::specfun::{i_pow, PhaseMatrix};
use crate::translate::{general_coupling_surface, translation_d, CenteredWaves, SurfaceRule};

/// Balanced condition of `W[pᵀ, R]` above which the interior and distorted
/// solutions are treated as degenerate on the sphere.
pub const MAX_INTERIOR_CONDITION: f64 = 1e12;
/// Condition of the secular matrix above which a solve is refused.
pub const MAX_SECULAR_CONDITION: f64 = 1e14;

/// Numerical controls shared by every center.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MswSettings {
    pub l_max: usize,
    pub l_max_pot: usize,
    /// Radial step; `None` picks [`default_step`] for the energy.
    pub h_max: Option<f64>,
    pub surface: SurfaceRule,
    pub tail_threshold: f64,
    /// Extra distance beyond the farthest neighbor sphere to which `q_i` is stored.
    pub reach: f64,
}

impl Default for MswSettings {
    fn default() -> Self {
        Self {
            l_max: 6,
            l_max_pot: 12,
            h_max: None,
            surface: SurfaceRule::default(),
            tail_threshold: TAIL_THRESHOLD,
            reach: 0.0,
        }
    }
}

impl MswSettings {
    pub fn trunc(&self) -> Truncation {
        Truncation::new(self.l_max)
    }

    pub fn step(&self, energy_above_asymptote: f64) -> f64 {
        self.h_max.unwrap_or_else(|| default_step(energy_above_asymptote))
    }
}

/// Which side of the asymptotic value of `V_I` the energy lies on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Continuum { k: f64 },
    Bound { kappa: f64 },
}

impl Regime {
    pub fn of(pot: &DistortedPotential, energy: f64) -> Result<Self> {
        let e = energy - pot.model().offset();
        if e == 0.0 || !e.is_finite() {
            return Err(DwmsError::Domain(format!("energy {energy} at the interstitial asymptote")));
        }
        Ok(if e > 0.0 { Regime::Continuum { k: e.sqrt() } } else { Regime::Bound { kappa: (-e).sqrt() } })
    }

    pub fn wavenumber(&self) -> f64 {
        match *self {
            Regime::Continuum { k } => k,
            Regime::Bound { kappa } => kappa,
        }
    }
}

/// `W[aᵀ, b](r) = aᵀb' − a'ᵀb`.
pub fn matrix_wronskian(a: &dyn RadialFunction, b: &dyn RadialFunction, r: f64) -> Result<CMat> {
    let (av, ad) = a.eval(r)?;
    let (bv, bd) = b.eval(r)?;
    Ok(av.transpose() * bd - ad.transpose() * bv)
}

/// Inverse atomic t-matrix at the sphere radius with the matrix that recovers
/// the interior coefficients, `C = b⁻² W[pᵀ,R]⁻¹ M B`.
#[derive(Clone, Debug)]
pub struct AtomicT {
    pub t_inverse: CMat,
    pub interior_map: CMat,
    /// `M = b² W[pᵀ,q](b)` from the same sphere values as the other Wronskians.
    pub m_at_radius: CMat,
    /// `‖T⁻¹ − T⁻ᵀ‖_max`.
    pub symmetry_defect: f64,
    /// The same, entrywise relative to `√|T⁻¹_aa T⁻¹_bb|`.
    pub scaled_symmetry_defect: f64,
    /// Largest entry of `M(b) − M`, relative to `max|M|`.
    pub m_constancy: f64,
}

/// `T_a^{−1} = W[qᵀ,R](b) W[pᵀ,R](b)⁻¹ M`, with `M` taken at `b` so that every
/// factor comes from one set of sphere values; `m` is checked against it.
pub fn atomic_t_inverse(
    regular: &dyn RadialFunction,
    irregular: &dyn RadialFunction,
    interior: &dyn RadialFunction,
    m: &WronskianConstant,
    radius: f64,
) -> Result<AtomicT> {
    let w_pr = matrix_wronskian(regular, interior, radius)?;
    let cond = balanced_condition(&w_pr);
    if !cond.is_finite() || cond > MAX_INTERIOR_CONDITION || max_abs(&w_pr) == 0.0 {
        return Err(DwmsError::Singular {
            context: "W[pᵀ,R] at the sphere radius (accidental degeneracy with V_A; perturb the energy or grid)".into(),
            cond,
        });
    }
    let w_pr_inv = w_pr
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| DwmsError::Singular { context: "W[pᵀ,R] at the sphere radius".into(), cond })?;
    let w_qr = matrix_wronskian(irregular, interior, radius)?;
    let m_at_radius = matrix_wronskian(regular, irregular, radius)? * Complex64::new(radius * radius, 0.0);
    let m_constancy = max_diff(&m_at_radius, &m.matrix) / max_abs(&m.matrix).max(1e-300);
    let t_inverse = w_qr * &w_pr_inv * &m_at_radius;
    let interior_map = w_pr_inv * &m_at_radius * Complex64::new(1.0 / (radius * radius), 0.0);
    let symmetry_defect = max_diff(&t_inverse, &t_inverse.transpose());
    let scaled_symmetry_defect = scaled_asymmetry(&t_inverse);
    Ok(AtomicT { t_inverse, interior_map, m_at_radius, symmetry_defect, scaled_symmetry_defect, m_constancy })
}

/// Everything one center contributes to the secular system at one energy.
#[derive(Clone, Debug)]
pub struct AtomicScatteringData {
    pub index: usize,
    pub center: [f64; 3],
    pub radius: f64,
    pub energy: f64,
    pub regime: Regime,
    /// `R^i`, regular solution of the full potential, marched slightly past `b_i`.
    pub interior: RadialSolution,
    /// `p_i` of `V_I`, likewise.
    pub regular: RadialSolution,
    /// `q_i⁺` of `V_I` (or `iξk⁺` below the asymptote) from just inside `b_i` outward.
    pub irregular: RadialSolution,
    pub wronskian: WronskianConstant,
    pub t: AtomicT,
}

/// Projected potential matrices about one center for one radial step; they do
/// not depend on the energy.
#[derive(Clone, Debug)]
pub struct CenterFields {
    pub step: f64,
    /// Full potential on `[0, b + 6h]`.
    pub interior: Arc<CoupledPotentialMatrix>,
    /// `V_I` out to where its tail is negligible and `q` is needed.
    pub distorting: Arc<CoupledPotentialMatrix>,
    /// Outermost radius at which `q_i` is stored.
    pub q_hi: f64,
}

impl CenterFields {
    pub fn build(pot: &DistortedPotential, index: usize, settings: &MswSettings, step: f64) -> Result<Self> {
        let part = pot.partition();
        let center = part.center(index);
        let b = part.radius(index);
        let trunc = settings.trunc();
        let full = pot.field(Which::Full);
        // a few nodes past b keep the derivative there central
        let grid_in = grid_for_field(&full, center, step, b + 6.0 * step, vec![b])?;
        let interior = Arc::new(CoupledPotentialMatrix::from_field(&full, center, grid_in, trunc, settings.l_max_pot)?);
        let distorting = pot.field(Which::Distorting);
        let q_hi = neighbor_reach(pot, index) + settings.reach;
        let r_out = q_hi.max(pot.model().tail_extent(center, settings.tail_threshold)) + 4.0 * step;
        let grid = grid_for_field(&distorting, center, step, r_out, vec![b])?;
        let distorting = Arc::new(CoupledPotentialMatrix::from_field(&distorting, center, grid, trunc, settings.l_max_pot)?);
        Ok(Self { step, interior, distorting, q_hi })
    }
}

impl AtomicScatteringData {
    pub fn build(pot: &DistortedPotential, index: usize, energy: f64, settings: &MswSettings) -> Result<Self> {
        let step = settings.step(energy - pot.model().offset());
        let fields = CenterFields::build(pot, index, settings, step)?;
        Self::from_fields(pot, index, &fields, energy, settings)
    }

    pub fn from_fields(
        pot: &DistortedPotential,
        index: usize,
        fields: &CenterFields,
        energy: f64,
        settings: &MswSettings,
    ) -> Result<Self> {
        let part = pot.partition();
        let center = part.center(index);
        let b = part.radius(index);
        let regime = Regime::of(pot, energy)?;
        let past = b + 6.0 * fields.step;
        let interior = integrate_regular_to(fields.interior.clone(), energy, past)?;
        let regular = integrate_regular_to(fields.distorting.clone(), energy, past)?;
        let boundary = match regime {
            Regime::Continuum { .. } => IrregularBoundary::Outgoing,
            Regime::Bound { .. } => IrregularBoundary::DecayingContinued,
        };
        let irregular = integrate_irregular_window(
            fields.distorting.clone(),
            energy,
            boundary,
            0.9 * b,
            fields.q_hi,
            settings.tail_threshold,
        )?;
        let wronskian = WronskianConstant::compute(&regular, &irregular)?;
        let t = atomic_t_inverse(&regular, &irregular, &interior, &wronskian, b)?;
        Ok(Self { index, center, radius: b, energy, regime, interior, regular, irregular, wronskian, t })
    }

    pub fn truncation(&self) -> Truncation {
        self.regular.potential().truncation()
    }

    pub fn waves(&self) -> CenteredWaves {
        CenteredWaves::new(self.center, Arc::new(self.irregular.clone()))
    }

    /// `cond(M_i)` after row/column balancing.
    pub fn wronskian_condition(&self) -> f64 {
        balanced_condition(&self.wronskian.matrix)
    }
}

/// Largest `|R_ij| + b_j`, the farthest radius about `i` at which `q_i` is
/// needed for the couplings; twice `b_i` for an isolated center.
fn neighbor_reach(pot: &DistortedPotential, i: usize) -> f64 {
    let part = pot.partition();
    (0..part.len())
        .filter(|&j| j != i)
        .map(|j| norm(sub(part.center(j), part.center(i))) + part.radius(j))
        .fold(2.0 * part.radius(i), f64::max)
}

/// Off-diagonal blocks `K^{ij}` keyed by `(i, j)`.
#[derive(Clone, Debug, Default)]
pub struct CouplingMap {
    pub blocks: BTreeMap<(usize, usize), CMat>,
    /// Final θ order and last change of each quadrature.
    pub quadrature: BTreeMap<(usize, usize), (usize, f64)>,
}

impl CouplingMap {
    /// Largest `‖K^{ij} − K^{ji,T}‖_max` over the pairs.
    pub fn symmetry_defect(&self) -> f64 {
        self.blocks
            .iter()
            .filter(|((i, j), _)| i < j)
            .map(|((i, j), k)| self.blocks.get(&(*j, *i)).map_or(f64::INFINITY, |kt| max_diff(k, &kt.transpose())))
            .fold(0.0, f64::max)
    }

    /// Symmetry defect on the leading `l ≤ l_sub` sub-blocks.
    pub fn sub_block_symmetry_defect(&self, l_sub: usize) -> f64 {
        let n = Truncation::new(l_sub).dim();
        self.blocks
            .iter()
            .filter(|((i, j), _)| i < j)
            .map(|((i, j), k)| {
                let kt = &self.blocks[&(*j, *i)];
                max_diff(&crate::linalg::sub_block(k, n), &crate::linalg::sub_block(&kt.transpose(), n))
            })
            .fold(0.0, f64::max)
    }
}

/// `K^{ij}` for every ordered pair from surface integrals over `∂τ_j`.
pub fn compute_couplings(atoms: &[AtomicScatteringData], rule: SurfaceRule) -> Result<CouplingMap> {
    let waves: Vec<CenteredWaves> = atoms.iter().map(|a| a.waves()).collect();
    let pairs: Vec<(usize, usize)> =
        (0..atoms.len()).flat_map(|i| (0..atoms.len()).filter(move |&j| j != i).map(move |j| (i, j))).collect();
    let results: Vec<Result<_>> = pairs
        .par_iter()
        .map(|&(i, j)| general_coupling_surface(&waves[j], &waves[i], atoms[j].radius, rule).map(|k| ((i, j), k)))
        .collect();
    let mut map = CouplingMap::default();
    for r in results {
        let (key, k) = r?;
        map.quadrature.insert(key, (k.n_theta, k.change));
        map.blocks.insert(key, k.matrix);
    }
    Ok(map)
}

/// Block matrix `S^{ii} = T_a^{i−1}`, `S^{ij} = K^{ij}` and, in the continuum,
/// the per-channel right-hand sides `−(1/k) D(k; R_i)`.
#[derive(Clone, Debug)]
pub struct SecularSystem {
    pub energy: f64,
    pub regime: Regime,
    pub trunc: Truncation,
    pub centers: Vec<[f64; 3]>,
    pub matrix: CMat,
    pub rhs: Option<CMat>,
}

impl SecularSystem {
    pub fn n_centers(&self) -> usize {
        self.centers.len()
    }

    pub fn block(&self, i: usize, j: usize) -> CMat {
        let n = self.trunc.dim();
        self.matrix.view((i * n, j * n), (n, n)).into_owned()
    }

    /// Largest `‖S^{ij} − S^{ji,T}‖_max` over off-diagonal pairs.
    pub fn block_symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n_centers() {
            for j in (i + 1)..self.n_centers() {
                worst = worst.max(max_diff(&self.block(i, j), &self.block(j, i).transpose()));
            }
        }
        worst
    }
}

pub fn assemble_secular(
    atoms: &[AtomicScatteringData],
    couplings: &CouplingMap,
    trunc: Truncation,
) -> Result<SecularSystem> {
    let first = atoms.first().ok_or_else(|| DwmsError::Dimension("secular system without centers".into()))?;
    let n = trunc.dim();
    for a in atoms {
        if a.truncation() != trunc {
            return Err(DwmsError::Dimension(format!("center {} has truncation l_max = {}", a.index, a.truncation().l_max)));
        }
        if a.energy != first.energy {
            return Err(DwmsError::Dimension(format!("center {} at energy {} ≠ {}", a.index, a.energy, first.energy)));
        }
    }
    let size = atoms.len() * n;
    let mut matrix = CMat::zeros(size, size);
    for (i, a) in atoms.iter().enumerate() {
        matrix.view_mut((i * n, i * n), (n, n)).copy_from(&a.t.t_inverse);
        for j in (0..atoms.len()).filter(|&j| j != i) {
            let k = couplings
                .blocks
                .get(&(i, j))
                .ok_or_else(|| DwmsError::Dimension(format!("missing coupling K^{{{i}{j}}}")))?;
            if k.nrows() != n || k.ncols() != n {
                return Err(DwmsError::Dimension(format!("K^{{{i}{j}}} is {}×{}, expected {n}×{n}", k.nrows(), k.ncols())));
            }
            matrix.view_mut((i * n, j * n), (n, n)).copy_from(k);
        }
    }
    let rhs = match first.regime {
        Regime::Continuum { k } => {
            let mut rhs = CMat::zeros(size, n);
            for (i, a) in atoms.iter().enumerate() {
                let d = translation_d(k, a.center, trunc)?.matrix;
                rhs.view_mut((i * n, 0), (n, n)).copy_from(&(d * Complex64::new(-1.0 / k, 0.0)));
            }
            Some(rhs)
        }
        Regime::Bound { .. } => None,
    };
    Ok(SecularSystem {
        energy: first.energy,
        regime: first.regime,
        trunc,
        centers: atoms.iter().map(|a| a.center).collect(),
        matrix,
        rhs,
    })
}

/// Channel solutions `X` with `S X = RHS`; column `L''` answers excitation in channel `L''`.
#[derive(Clone, Debug)]
pub struct SecularSolution {
    pub channels: CMat,
    pub condition: f64,
    /// `‖S X − RHS‖_max / ‖RHS‖_max`.
    pub residual: f64,
}

/// Excitation weights `4π i^l Y_L(k̂)`.
pub fn excitation_weights(trunc: Truncation, k_dir: [f64; 3]) -> CVec {
    let y = harmonics(trunc, k_dir);
    CVec::from_fn(trunc.dim(), |a, _| i_pow(AngularIndex::from_index(a).l as i64) * y[a] * (4.0 * PI))
}

impl SecularSolution {
    /// `B^i(k̂)` per center.
    pub fn scattering(&self, trunc: Truncation, k_dir: [f64; 3]) -> Vec<CVec> {
        let all = &self.channels * excitation_weights(trunc, k_dir);
        let n = trunc.dim();
        (0..all.len() / n).map(|i| all.rows(i * n, n).into_owned()).collect()
    }
}

/// Dense partially pivoted solve of `S X = rhs`, with residual and condition.
pub fn solve_with(matrix: &CMat, rhs: &CMat) -> Result<SecularSolution> {
    if matrix.nrows() != rhs.nrows() || !matrix.is_square() {
        return Err(DwmsError::Dimension("secular matrix and right-hand side do not conform".into()));
    }
    let condition = condition_number(matrix);
    let lu = matrix.clone().lu();
    let channels = lu.solve(rhs).ok_or_else(|| DwmsError::Singular {
        context: "secular matrix (possible resonance or bound state)".into(),
        cond: condition,
    })?;
    if !condition.is_finite() || condition > MAX_SECULAR_CONDITION {
        return Err(DwmsError::Singular { context: "secular matrix (possible resonance)".into(), cond: condition });
    }
    let scale = max_abs(rhs);
    let residual = if scale == 0.0 { max_abs(&(matrix * &channels)) } else { max_abs(&(matrix * &channels - rhs)) / scale };
    Ok(SecularSolution { channels, condition, residual })
}

pub fn solve_secular(sys: &SecularSystem) -> Result<SecularSolution> {
    let rhs = sys
        .rhs
        .as_ref()
        .ok_or_else(|| DwmsError::Domain("no inhomogeneous term below the asymptote; use the bound-state scan".into()))?;
    solve_with(&sys.matrix, rhs)
}

/// A potential with its settings and a per-step cache of projected fields,
/// shared across the energies of a sweep or scan.
pub struct MswProblem<'a> {
    pot: &'a DistortedPotential,
    settings: MswSettings,
    cache: Mutex<Vec<(u64, Arc<Vec<CenterFields>>)>>,
}

impl<'a> MswProblem<'a> {
    pub fn new(pot: &'a DistortedPotential, settings: MswSettings) -> Self {
        Self { pot, settings, cache: Mutex::new(Vec::new()) }
    }

    pub fn potential(&self) -> &'a DistortedPotential {
        self.pot
    }

    pub fn settings(&self) -> &MswSettings {
        &self.settings
    }

    pub fn fields(&self, step: f64) -> Result<Arc<Vec<CenterFields>>> {
        let key = step.to_bits();
        if let Some((_, f)) = self.cache.lock().expect("field cache").iter().find(|(k, _)| *k == key) {
            return Ok(f.clone());
        }
        let built: Vec<CenterFields> = (0..self.pot.partition().len())
            .into_par_iter()
            .map(|i| CenterFields::build(self.pot, i, &self.settings, step))
            .collect::<Result<_>>()?;
        let built = Arc::new(built);
        self.cache.lock().expect("field cache").push((key, built.clone()));
        Ok(built)
    }

    pub fn atoms(&self, energy: f64) -> Result<Vec<AtomicScatteringData>> {
        let fields = self.fields(self.settings.step(energy - self.pot.model().offset()))?;
        fields
            .par_iter()
            .enumerate()
            .map(|(i, f)| AtomicScatteringData::from_fields(self.pot, i, f, energy, &self.settings))
            .collect()
    }

    pub fn assemble(&self, energy: f64) -> Result<MswState> {
        let atoms = self.atoms(energy)?;
        let couplings = compute_couplings(&atoms, self.settings.surface)?;
        let system = assemble_secular(&atoms, &couplings, self.settings.trunc())?;
        Ok(MswState { atoms, couplings, system })
    }
}

/// Atomic data, couplings and secular matrix at one energy.
#[derive(Clone, Debug)]
pub struct MswState {
    pub atoms: Vec<AtomicScatteringData>,
    pub couplings: CouplingMap,
    pub system: SecularSystem,
}

impl MswState {
    pub fn assemble(pot: &DistortedPotential, energy: f64, settings: &MswSettings) -> Result<Self> {
        MswProblem::new(pot, *settings).assemble(energy)
    }

    /// Largest scaled inverse t-matrix symmetry defect over centers.
    pub fn t_symmetry_defect(&self) -> f64 {
        self.atoms.iter().map(|a| a.t.scaled_symmetry_defect).fold(0.0, f64::max)
    }
}

fn harmonics(trunc: Truncation, dir: [f64; 3]) -> Vec<f64> {
    let mut y = vec![0.0; trunc.dim()];
    ShEvaluator::new(trunc.l_max).values(crate::quadrature::normalize(dir), &mut y);
    y
}

fn row(y: &[f64]) -> CVec {
    CVec::from_iterator(y.len(), y.iter().map(|v| Complex64::new(*v, 0.0)))
}

/// The distorted incident wave `χ⁺` in the interstitial region.
#[derive(Clone)]
pub enum Incident {
    /// `e^{ik·r}`, exact when `V_I` is constant.
    PlaneWave { k_vec: [f64; 3] },
    /// `Yᵀ(r̂_c) p_c(r_c) a` about one center, accurate where its truncation converges.
    Expanded { waves: CenteredWaves, coefficients: CVec },
}

impl Incident {
    pub fn plane_wave(k: f64, k_dir: [f64; 3]) -> Self {
        Incident::PlaneWave { k_vec: scale(crate::quadrature::normalize(k_dir), k) }
    }

    /// `χ⁺ = (4π/k) Yᵀ p_c (M_c⁻¹)ᵀ D(k; R_c) ξ Y(k̂)` from `V_I` about `center`,
    /// with `p_c` stored to `r_hi`.
    pub fn expanded(
        pot: &DistortedPotential,
        center: [f64; 3],
        trunc: Truncation,
        energy: f64,
        k_dir: [f64; 3],
        r_hi: f64,
        settings: &MswSettings,
    ) -> Result<Self> {
        let Regime::Continuum { k } = Regime::of(pot, energy)? else {
            return Err(DwmsError::Domain("incident wave needs a continuum energy".into()));
        };
        let h = settings.step(energy - pot.model().offset());
        let field = pot.field(Which::Distorting);
        let r_out = r_hi.max(pot.model().tail_extent(center, settings.tail_threshold)) + 4.0 * h;
        let grid = grid_for_field(&field, center, h, r_out, vec![r_hi])?;
        let pm = Arc::new(CoupledPotentialMatrix::from_field(&field, center, grid, trunc, settings.l_max_pot)?);
        let p = integrate_regular_to(pm.clone(), energy, r_hi)?;
        let q = integrate_irregular_window(pm, energy, IrregularBoundary::Outgoing, 0.95 * r_hi, r_hi, settings.tail_threshold)?;
        let m_inv = WronskianConstant::compute(&p, &q)?.inverse()?;
        let d = translation_d(k, center, trunc)?.matrix;
        let xi_y = PhaseMatrix::xi(trunc).matrix() * row(&harmonics(trunc, k_dir));
        let coefficients = m_inv.transpose() * d * xi_y * Complex64::new(4.0 * PI / k, 0.0);
        Ok(Incident::Expanded { waves: CenteredWaves::new(center, Arc::new(p)), coefficients })
    }

    pub fn value(&self, point: [f64; 3]) -> Result<Complex64> {
        match self {
            Incident::PlaneWave { k_vec } => Ok(Complex64::new(0.0, crate::quadrature::dot(*k_vec, point)).exp()),
            Incident::Expanded { waves, coefficients } => Ok(waves.value(point)?.dot(coefficients)),
        }
    }
}

/// Agreement of the inside and interstitial representations on one sphere.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SurfaceMatch {
    pub center: usize,
    /// Defect after projecting the interstitial form onto `l ≤ l_max` on the sphere.
    pub band_limited: f64,
    /// Pointwise defect, including the `l > l_max` content the truncation omits.
    pub raw: f64,
    /// `max|ψ|` over the sample points.
    pub scale: f64,
}

impl SurfaceMatch {
    pub fn relative(&self) -> f64 {
        self.band_limited / self.scale.max(1e-300)
    }
}

/// Multicenter scattering state for one incident direction.
pub struct MolecularWavefunction<'a> {
    atoms: &'a [AtomicScatteringData],
    incident: Incident,
    /// `a_i` with `χ⁺ ≈ Yᵀ(r̂_i) p_i(r_i) a_i` near sphere `i`.
    local_incident: Vec<CVec>,
    scattered: Vec<CVec>,
    interior: Vec<CVec>,
}

impl<'a> MolecularWavefunction<'a> {
    pub fn new(
        atoms: &'a [AtomicScatteringData],
        system: &SecularSystem,
        solution: &SecularSolution,
        k_dir: [f64; 3],
        incident: Incident,
    ) -> Result<Self> {
        let rhs = system.rhs.as_ref().ok_or_else(|| DwmsError::Domain("wavefunction needs a continuum system".into()))?;
        let trunc = system.trunc;
        let n = trunc.dim();
        let w = excitation_weights(trunc, k_dir);
        let scattered = solution.scattering(trunc, k_dir);
        let driven = rhs * &w;
        let mut local_incident = Vec::with_capacity(atoms.len());
        let mut interior = Vec::with_capacity(atoms.len());
        for (i, a) in atoms.iter().enumerate() {
            let m_inv = crate::linalg::inverse(&a.t.m_at_radius, "M at the sphere radius")?;
            local_incident.push(-(m_inv.transpose() * driven.rows(i * n, n)));
            interior.push(&a.t.interior_map * &scattered[i]);
        }
        Ok(Self { atoms, incident, local_incident, scattered, interior })
    }

    pub fn scattered(&self) -> &[CVec] {
        &self.scattered
    }

    pub fn interior(&self) -> &[CVec] {
        &self.interior
    }

    fn atom_containing(&self, point: [f64; 3]) -> Option<usize> {
        self.atoms.iter().position(|a| norm(sub(point, a.center)) < a.radius)
    }

    pub fn value(&self, point: [f64; 3]) -> Result<Complex64> {
        match self.atom_containing(point) {
            Some(i) => self.inside_value(i, point),
            None => self.interstitial_value(point),
        }
    }

    /// `Yᵀ(r̂_i) R^i(r_i) C^i`.
    pub fn inside_value(&self, i: usize, point: [f64; 3]) -> Result<Complex64> {
        let a = &self.atoms[i];
        let rel = sub(point, a.center);
        let r = norm(rel);
        if r == 0.0 {
            return Err(DwmsError::SingularPoint(format!("center {i}")));
        }
        let (rv, _) = a.interior.eval(r)?;
        let y = row(&harmonics(a.truncation(), rel));
        Ok(y.dot(&(rv * &self.interior[i])))
    }

    /// Scattered part `Σ_i Yᵀ(r̂_i) q_i⁺(r_i) B^i`, optionally skipping one center.
    fn scattered_value(&self, point: [f64; 3], skip: Option<usize>) -> Result<Complex64> {
        let mut sum = Complex64::new(0.0, 0.0);
        for (i, a) in self.atoms.iter().enumerate() {
            if Some(i) == skip {
                continue;
            }
            sum += a.waves().value(point)?.dot(&self.scattered[i]);
        }
        Ok(sum)
    }

    /// `χ⁺(r) + Σ_i Yᵀ(r̂_i) q_i⁺(r_i) B^i`.
    pub fn interstitial_value(&self, point: [f64; 3]) -> Result<Complex64> {
        Ok(self.incident.value(point)? + self.scattered_value(point, None)?)
    }

    /// Compares both representations on `∂τ_i` with a rule exact to `degree`.
    pub fn surface_matching(&self, i: usize, degree: usize) -> Result<SurfaceMatch> {
        let a = &self.atoms[i];
        let trunc = a.truncation();
        let b = a.radius;
        let (rv, _) = a.interior.eval(b)?;
        let (pv, _) = a.regular.eval(b)?;
        let (qv, _) = a.irregular.eval(b)?;
        let inside_coef = rv * &self.interior[i];
        let own = pv * &self.local_incident[i] + qv * &self.scattered[i];
        let quad = SphereQuadrature::exact_to_degree(degree.max(2 * trunc.l_max));
        let samples: Vec<Result<(Vec<f64>, Complex64, Complex64)>> = quad
            .nodes
            .par_iter()
            .map(|node| {
                let point = add(a.center, scale(node.dir, b));
                let y = harmonics(trunc, node.dir);
                Ok((y, self.scattered_value(point, Some(i))?, self.interstitial_value(point)?))
            })
            .collect();
        let mut projected = CVec::zeros(trunc.dim());
        let mut rows = Vec::with_capacity(samples.len());
        let mut raw_out = Vec::with_capacity(samples.len());
        for (s, node) in samples.into_iter().zip(&quad.nodes) {
            let (y, others, total) = s?;
            for (p, yv) in projected.iter_mut().zip(&y) {
                *p += others * (yv * node.weight);
            }
            rows.push(row(&y));
            raw_out.push(total);
        }
        let diff = own + projected - &inside_coef;
        let (mut band, mut raw, mut top) = (0.0f64, 0.0f64, 0.0f64);
        for (y, out) in rows.iter().zip(&raw_out) {
            let inside = y.dot(&inside_coef);
            band = band.max(y.dot(&diff).norm());
            raw = raw.max((out - inside).norm());
            top = top.max(inside.norm()).max(out.norm());
        }
        Ok(SurfaceMatch { center: i, band_limited: band, raw, scale: top })
    }
}

/// Per-energy result record.
#[derive(Clone, Debug, Serialize)]
pub struct MswRecord {
    pub energy: f64,
    pub wavenumber: f64,
    pub condition: f64,
    pub residual: f64,
    pub t_inverse_symmetry: Vec<f64>,
    pub t_inverse_scaled_symmetry: Vec<f64>,
    pub m_constancy: Vec<f64>,
    pub coupling_symmetry: f64,
    pub wronskian_condition: Vec<f64>,
    pub surface_matching: Vec<SurfaceMatch>,
    /// `B^i(k̂)` as `[re, im]` pairs when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scattering: Option<Vec<Vec<[f64; 2]>>>,
}

impl MswRecord {
    pub fn new(state: &MswState, solution: &SecularSolution, wf: &MolecularWavefunction<'_>, matching: Vec<SurfaceMatch>, with_b: bool) -> Self {
        Self {
            energy: state.system.energy,
            wavenumber: state.system.regime.wavenumber(),
            condition: solution.condition,
            residual: solution.residual,
            t_inverse_symmetry: state.atoms.iter().map(|a| a.t.symmetry_defect).collect(),
            t_inverse_scaled_symmetry: state.atoms.iter().map(|a| a.t.scaled_symmetry_defect).collect(),
            m_constancy: state.atoms.iter().map(|a| a.t.m_constancy).collect(),
            coupling_symmetry: state.couplings.symmetry_defect(),
            wronskian_condition: state.atoms.iter().map(|a| a.wronskian_condition()).collect(),
            surface_matching: matching,
            scattering: with_b.then(|| wf.scattered().iter().map(|b| b.iter().map(|z| [z.re, z.im]).collect()).collect()),
        }
    }
}

/// `diag((−1)^{l+|m|})`, the action of `z → −z` on real harmonics.
pub fn z_reflection(trunc: Truncation) -> CMat {
    CMat::from_fn(trunc.dim(), trunc.dim(), |a, b| {
        if a != b {
            return Complex64::new(0.0, 0.0);
        }
        let idx = AngularIndex::from_index(a);
        Complex64::new(if (idx.l as i64 + idx.m.abs()) % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
    })
}

#[cfg(test)]
mod tests;
