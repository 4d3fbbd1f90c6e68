//! Batch driver: run configuration, the four run modes and their artifacts
//! (CSV tables, a JSON manifest and a plain-text verification report).
//!
//! ```toml
//! schema = "dwms-run/1"
//! potential = "molecule.toml"   # relative to this file
//! l_max = 6
//! direction = [0.0, 0.0, 1.0]
//!
//! [energies]
//! values = [0.5, 1.0]           # and/or start, stop, count
//!
//! [numerics]
//! h_max = 0.01
//!
//! [bound_scan]
//! e_min = -1.0
//! e_max = -0.05
//! steps = 40
//! ```

pub mod verify;

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::angular::Truncation;
use crate::error::{DwmsError, Result};
use crate::msw::{
    bound_state_scan, solve_secular, Incident, MolecularWavefunction, MswProblem, MswRecord, MswSettings, ScanReport,
    ScanWindow, MAX_INTERIOR_CONDITION, MAX_SECULAR_CONDITION,
};
use crate::potential::{DistortedPotential, PotentialConfig, PotentialModel, RadialForm};
use crate::quadrature::{norm, normalize, sub};
use crate::radial::{grid_for_field, CoupledPotentialMatrix, TAIL_THRESHOLD};
use crate::scatter::{
    partial_wave_cross_section, solve_single, square_well_phase_shifts, write_cross_sections, CrossSectionRecord,
    SingleScattering, MAX_AMPLITUDE_CONDITION,
};
use crate::translate::SurfaceRule;

pub const RUN_SCHEMA: &str = "dwms-run/1";
pub const MANIFEST_SCHEMA: &str = "dwms-manifest/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SingleScatter,
    MswContinuum,
    MswBoundScan,
    Verify,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::SingleScatter, Mode::MswContinuum, Mode::MswBoundScan, Mode::Verify];

    pub fn name(self) -> &'static str {
        match self {
            Mode::SingleScatter => "single_scatter",
            Mode::MswContinuum => "msw_continuum",
            Mode::MswBoundScan => "msw_bound_scan",
            Mode::Verify => "verify",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = DwmsError;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<_> = Mode::ALL.iter().map(|m| m.name()).collect();
            DwmsError::Config(format!("unknown mode {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

/// Explicit energies plus an optional uniform range, in Rydberg.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyGrid {
    pub values: Vec<f64>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub count: Option<usize>,
}

impl EnergyGrid {
    pub fn energies(&self) -> Result<Vec<f64>> {
        let mut out = self.values.clone();
        match (self.start, self.stop, self.count) {
            (None, None, None) => {}
            (Some(a), Some(b), Some(n)) if n >= 1 => {
                if n == 1 {
                    out.push(a);
                } else {
                    out.extend((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64));
                }
            }
            _ => return Err(DwmsError::Config("energies: start, stop and count go together, with count ≥ 1".into())),
        }
        if out.iter().any(|e| !e.is_finite()) {
            return Err(DwmsError::Config("energies must be finite".into()));
        }
        Ok(out)
    }
}

/// Radial, quadrature and tolerance controls.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    /// Radial step; omitted picks `min(0.01, 0.02/k)` per energy.
    pub h_max: Option<f64>,
    pub tail_threshold: f64,
    /// Extra distance to which multicenter irregular solutions are stored.
    pub reach: f64,
    pub surface: SurfaceRule,
    /// Innermost radius of irregular solutions in the single-center modes.
    pub r_stop: f64,
    /// Smallest outer grid radius in the single-center modes.
    pub r_out_min: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self { h_max: None, tail_threshold: TAIL_THRESHOLD, reach: 0.0, surface: SurfaceRule::default(), r_stop: 1.0, r_out_min: 6.0 }
    }
}

fn default_l_max() -> usize {
    6
}

fn default_direction() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: String,
    /// Must agree with the command-line mode when given.
    #[serde(default)]
    pub mode: Option<Mode>,
    /// Geometry and potential file.
    pub potential: PathBuf,
    #[serde(default)]
    pub energies: EnergyGrid,
    #[serde(default = "default_l_max")]
    pub l_max: usize,
    /// Defaults to `2 l_max`.
    #[serde(default)]
    pub l_max_pot: Option<usize>,
    /// Incidence direction.
    #[serde(default = "default_direction")]
    pub direction: [f64; 3],
    /// Expansion center of the single-center modes; defaults to the first
    /// sphere, else the first site, else the origin.
    #[serde(default)]
    pub center: Option<[f64; 3]>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub bound_scan: ScanWindow,
    /// Include `B^i` in the multicenter JSON records.
    #[serde(default)]
    pub write_coefficients: bool,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| DwmsError::Config(e.to_string()))?;
        if cfg.schema != RUN_SCHEMA {
            return Err(DwmsError::Config(format!("unsupported run schema {:?}, expected {RUN_SCHEMA:?}", cfg.schema)));
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DwmsError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| DwmsError::Config(format!("{}: {e}", path.display())))
    }

    pub fn l_max_pot(&self) -> usize {
        self.l_max_pot.unwrap_or(2 * self.l_max)
    }

    pub fn settings(&self) -> MswSettings {
        MswSettings {
            l_max: self.l_max,
            l_max_pot: self.l_max_pot(),
            h_max: self.numerics.h_max,
            surface: self.numerics.surface,
            tail_threshold: self.numerics.tail_threshold,
            reach: self.numerics.reach,
        }
    }
}

/// A validated run: configuration, potential and mode.
pub struct Run {
    pub mode: Mode,
    pub config: RunConfig,
    pub potential_path: PathBuf,
    pub potential_config: PotentialConfig,
    pub potential: DistortedPotential,
    pub energies: Vec<f64>,
    pub warnings: Vec<String>,
}

impl Run {
    pub fn load(mode: Mode, config_path: &Path) -> Result<Self> {
        let config = RunConfig::from_file(config_path)?;
        let base = config_path.parent().unwrap_or(Path::new("."));
        Self::new(mode, config, base)
    }

    /// `base` resolves a relative potential path.
    pub fn new(mode: Mode, config: RunConfig, base: &Path) -> Result<Self> {
        if let Some(m) = config.mode {
            if m != mode {
                return Err(DwmsError::Config(format!("config is for mode {m}, but {mode} was requested")));
            }
        }
        if config.l_max_pot() < config.l_max {
            return Err(DwmsError::Config("l_max_pot must be at least l_max".into()));
        }
        if norm(config.direction) == 0.0 {
            return Err(DwmsError::Config("direction must be nonzero".into()));
        }
        if let Some(h) = config.numerics.h_max {
            if !(h > 0.0) {
                return Err(DwmsError::Config(format!("numerics.h_max must be positive, got {h}")));
            }
        }
        let potential_path = if config.potential.is_absolute() { config.potential.clone() } else { base.join(&config.potential) };
        let potential_config = PotentialConfig::from_file(&potential_path)?;
        let model = potential_config.model()?;
        let partition = potential_config.partition()?;
        let continuation = potential_config.continuation(config.l_max_pot());
        let potential = DistortedPotential::build(model, partition, continuation)?;
        let offset = potential.model().offset();
        let energies = match mode {
            Mode::MswBoundScan => Vec::new(),
            _ => config.energies.energies()?,
        };
        match mode {
            Mode::MswBoundScan => {
                let w = &config.bound_scan;
                if !(w.e_max < offset) {
                    return Err(DwmsError::Config(format!(
                        "bound_scan window must lie below the interstitial asymptote {offset}; e_max = {}",
                        w.e_max
                    )));
                }
            }
            _ => {
                if energies.is_empty() {
                    return Err(DwmsError::Config("no energies given".into()));
                }
                if let Some(e) = energies.iter().find(|e| **e <= offset) {
                    return Err(DwmsError::Config(format!(
                        "{mode} needs energies above the asymptote {offset}; got {e}"
                    )));
                }
            }
        }
        if matches!(mode, Mode::MswContinuum | Mode::MswBoundScan) && potential.partition().is_empty() {
            return Err(DwmsError::Config(format!("{mode} needs at least one atom with a sphere radius")));
        }
        let mut run = Self { mode, config, potential_path, potential_config, potential, energies, warnings: Vec::new() };
        run.warnings = run.truncation_warnings();
        Ok(run)
    }

    fn truncation_warnings(&self) -> Vec<String> {
        let b_max = self.potential.partition().radii().iter().cloned().fold(0.0, f64::max);
        let offset = self.potential.model().offset();
        self.energies
            .iter()
            .filter_map(|e| {
                let kb = (e - offset).sqrt() * b_max;
                (kb > self.config.l_max as f64)
                    .then(|| format!("E = {e}: k·max(b_i) = {kb:.3} exceeds l_max = {}", self.config.l_max))
            })
            .collect()
    }

    pub fn center(&self) -> [f64; 3] {
        if let Some(c) = self.config.center {
            return c;
        }
        let part = self.potential.partition();
        if !part.is_empty() {
            return part.center(0);
        }
        self.potential.model().sites().first().copied().unwrap_or([0.0; 3])
    }

    /// Displacement used by the translation checks.
    pub fn displacement(&self) -> [f64; 3] {
        let part = self.potential.partition();
        let sites = self.potential.model().sites();
        let d = if part.len() >= 2 {
            sub(part.center(1), part.center(0))
        } else if sites.len() >= 2 {
            sub(sites[1], sites[0])
        } else {
            [0.0; 3]
        };
        if norm(d) > 1e-6 {
            d
        } else {
            [1.0, -2.0, 4.0]
        }
    }

    fn direction(&self) -> [f64; 3] {
        normalize(self.config.direction)
    }
}

/// One identity or invariant check.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub energy: Option<f64>,
    pub defect: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: &str, energy: Option<f64>, defect: f64, tolerance: f64) -> Self {
        Self { name: name.to_string(), energy, defect, tolerance, passed: defect <= tolerance }
    }
}

/// Radial grid actually used about one center.
#[derive(Clone, Debug, Serialize)]
pub struct GridRecord {
    pub role: &'static str,
    pub energy: Option<f64>,
    pub center: [f64; 3],
    pub step: f64,
    pub r_max: f64,
    pub nodes: usize,
}

impl GridRecord {
    fn of(role: &'static str, energy: Option<f64>, center: [f64; 3], step: f64, pm: &CoupledPotentialMatrix) -> Self {
        Self { role, energy, center, step, r_max: pm.grid().r_max(), nodes: pm.grid().len() }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Guards {
    pub max_amplitude_condition: f64,
    pub max_interior_condition: f64,
    pub max_secular_condition: f64,
}

impl Default for Guards {
    fn default() -> Self {
        Self {
            max_amplitude_condition: MAX_AMPLITUDE_CONDITION,
            max_interior_condition: MAX_INTERIOR_CONDITION,
            max_secular_condition: MAX_SECULAR_CONDITION,
        }
    }
}

/// Everything a mode produced besides its tables.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub grids: Vec<GridRecord>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
    /// Where the reference column of single-scattering tables comes from.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema: &'static str,
    version: &'static str,
    mode: Mode,
    config: &'a RunConfig,
    potential_file: String,
    potential: &'a PotentialConfig,
    energies: &'a [f64],
    settings: MswSettings,
    steps: Vec<(f64, f64)>,
    guards: Guards,
    grids: &'a [GridRecord],
    checks: &'a [Check],
    all_passed: bool,
    warnings: &'a [String],
    artifacts: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<&'a str>,
}

fn csv_err(e: csv::Error) -> DwmsError {
    DwmsError::Io(std::io::Error::other(e))
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Executes `run`, writing every artifact into `out`.
pub fn execute(run: &Run, out: &Path) -> Result<Outcome> {
    std::fs::create_dir_all(out)?;
    let mut outcome = match run.mode {
        Mode::SingleScatter => single_scatter(run, out)?,
        Mode::MswContinuum => msw_continuum(run, out)?,
        Mode::MswBoundScan => msw_bound_scan(run, out)?,
        Mode::Verify => verify_mode(run, out)?,
    };
    outcome.warnings.splice(0..0, run.warnings.iter().cloned());
    outcome.artifacts.push("manifest.json".into());
    outcome.artifacts.push("report.txt".into());
    let settings = run.config.settings();
    let offset = run.potential.model().offset();
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA,
        version: env!("CARGO_PKG_VERSION"),
        mode: run.mode,
        config: &run.config,
        potential_file: run.potential_path.display().to_string(),
        potential: &run.potential_config,
        energies: &run.energies,
        settings,
        steps: run.energies.iter().map(|e| (*e, settings.step(e - offset))).collect(),
        guards: Guards::default(),
        grids: &outcome.grids,
        checks: &outcome.checks,
        all_passed: outcome.passed(),
        warnings: &outcome.warnings,
        artifacts: &outcome.artifacts,
        reference: outcome.reference.as_deref(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| DwmsError::Io(std::io::Error::other(e)))?;
    std::fs::write(out.join("manifest.json"), json + "\n")?;
    std::fs::write(out.join("report.txt"), report(run, &outcome))?;
    Ok(outcome)
}

/// Plain-text listing of every check with its measured defect.
pub fn report(run: &Run, outcome: &Outcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "dwms {} verification report", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "mode: {}", run.mode);
    let _ = writeln!(s, "potential: {}", run.potential_path.display());
    let _ = writeln!(s, "l_max = {}, l_max_pot = {}", run.config.l_max, run.config.l_max_pot());
    for w in &outcome.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    let _ = writeln!(s);
    for c in &outcome.checks {
        let e = c.energy.map(|e| format!("{e:>10.6}")).unwrap_or_else(|| format!("{:>10}", "-"));
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "{verdict}  E = {e}  {:<36} defect = {:.3e}  tol = {:.1e}", c.name, c.defect, c.tolerance);
    }
    let failed = outcome.checks.iter().filter(|c| !c.passed).count();
    let _ = writeln!(s, "\n{} checks, {} passed, {} failed", outcome.checks.len(), outcome.checks.len() - failed, failed);
    s
}

/// Full potential projected about one center.
fn single_center(run: &Run, energy: f64) -> Result<(SingleScattering, GridRecord, verify::Probe)> {
    let settings = run.config.settings();
    let model: &PotentialModel = run.potential.model();
    let center = run.center();
    let num = &run.config.numerics;
    let step = settings.step(energy - model.offset());
    let r_out = (model.tail_extent(center, num.tail_threshold) + 1.0).max(num.r_out_min);
    let grid = grid_for_field(model, center, step, r_out, vec![])?;
    let pm = Arc::new(CoupledPotentialMatrix::from_field(model, center, grid, settings.trunc(), settings.l_max_pot)?);
    let record = GridRecord::of("full", Some(energy), center, step, &pm);
    let ss = solve_single(pm, energy, num.r_stop)?;
    let probe = verify::Probe { center, r_stop: num.r_stop, inner: (0.35 * r_out).max(num.r_stop + 0.5), outer: 0.8 * r_out };
    Ok((ss, record, probe))
}

/// Analytic partial-wave cross section when the potential is one square well
/// at the expansion center.
fn square_well_reference(run: &Run, energy: f64) -> Option<f64> {
    let model = run.potential.model();
    let [term] = model.terms() else { return None };
    let RadialForm::SquareWell { depth, radius } = term.form else { return None };
    if norm(sub(model.sites()[term.site], run.center())) > 1e-12 || model.offset() != 0.0 {
        return None;
    }
    let deltas = square_well_phase_shifts(depth, radius, energy, run.config.l_max).ok()?;
    Some(partial_wave_cross_section(energy, &deltas))
}

fn single_scatter(run: &Run, out: &Path) -> Result<Outcome> {
    let dir = run.direction();
    let l_sub = run.config.l_max.saturating_sub(2);
    let rows: Vec<(CrossSectionRecord, GridRecord, Vec<Check>)> = run
        .energies
        .par_iter()
        .map(|&e| {
            let (ss, grid, _) = single_center(run, e)?;
            let am = &ss.amplitude;
            let cs = am.cross_sections(dir)?;
            let reference = square_well_reference(run, e);
            let unitarity = am.unitarity_defect(l_sub);
            let mut checks = vec![
                Check::new("unitarity", Some(e), unitarity, verify::RADIAL_TOL),
                Check::new("reciprocity", Some(e), am.reciprocity_defect(), verify::RECIPROCITY_TOL),
                Check::new("optical_theorem", Some(e), verify::optical_defect(&cs, am.wavenumber()), verify::OPTICAL_TOL),
            ];
            if let Some(r) = reference {
                let d = (cs.integrated - r).abs() / r.abs().max(1e-300);
                checks.push(Check::new("partial_wave_reference", Some(e), d, verify::OPTICAL_TOL));
            }
            let rec = CrossSectionRecord {
                energy: e,
                sigma_integrated: cs.integrated,
                sigma_optical: cs.optical,
                unitarity_defect: unitarity,
                sigma_reference: reference,
            };
            Ok((rec, grid, checks))
        })
        .collect::<Result<_>>()?;
    let mut outcome = Outcome::default();
    let mut records = Vec::new();
    for (rec, grid, checks) in rows {
        records.push(rec);
        outcome.grids.push(grid);
        outcome.checks.extend(checks);
    }
    write_cross_sections(&records, &out.join("cross_sections.csv"))?;
    outcome.artifacts.push("cross_sections.csv".into());
    if records.iter().any(|r| r.sigma_reference.is_some()) {
        outcome.reference = Some("analytic square-well phase shifts, partial-wave sum".into());
    }
    Ok(outcome)
}

fn field_grids(problem: &MswProblem<'_>, energy: f64, out: &mut Vec<GridRecord>) -> Result<()> {
    let settings = problem.settings();
    let step = settings.step(energy - problem.potential().model().offset());
    let part = problem.potential().partition();
    for (i, f) in problem.fields(step)?.iter().enumerate() {
        out.push(GridRecord::of("interior", Some(energy), part.center(i), step, &f.interior));
        out.push(GridRecord::of("distorting", Some(energy), part.center(i), step, &f.distorting));
    }
    Ok(())
}

/// Plane wave when `V_I` is constant, otherwise `χ⁺` expanded about the
/// centroid of the spheres.
fn incident_for(problem: &MswProblem<'_>, energy: f64, dir: [f64; 3]) -> Result<Incident> {
    let pot = problem.potential();
    let settings = problem.settings();
    let offset = pot.model().offset();
    let fields = problem.fields(settings.step(energy - offset))?;
    if fields.iter().all(|f| f.distorting.is_vanishing()) {
        return Ok(Incident::plane_wave((energy - offset).sqrt(), dir));
    }
    let part = pot.partition();
    let n = part.len() as f64;
    let mut centroid = [0.0; 3];
    for c in part.centers() {
        for a in 0..3 {
            centroid[a] += c[a] / n;
        }
    }
    let r_hi = (0..part.len()).map(|i| norm(sub(part.center(i), centroid)) + part.radius(i)).fold(0.0, f64::max);
    Incident::expanded(pot, centroid, settings.trunc(), energy, dir, r_hi, settings)
}

#[derive(Serialize)]
struct MswRow {
    energy: f64,
    wavenumber: f64,
    condition: f64,
    residual: f64,
    t_inverse_symmetry: f64,
    t_inverse_scaled_symmetry: f64,
    m_constancy: f64,
    coupling_symmetry: f64,
    wronskian_condition: f64,
    surface_matching: f64,
    surface_matching_raw: f64,
    scattering_norm: f64,
}

fn vmax(v: &[f64]) -> f64 {
    v.iter().cloned().fold(0.0, f64::max)
}

fn msw_continuum(run: &Run, out: &Path) -> Result<Outcome> {
    let settings = run.config.settings();
    let problem = MswProblem::new(&run.potential, settings);
    let dir = run.direction();
    let degree = 4 * settings.l_max + 4;
    let mut outcome = Outcome::default();
    let mut records = Vec::new();
    let mut rows = Vec::new();
    // energies run in sequence: each one already fans out over centers and
    // holds the full set of coupled solutions
    for &e in &run.energies {
        let state = problem.assemble(e)?;
        let sol = solve_secular(&state.system)?;
        let incident = incident_for(&problem, e, dir)?;
        let wf = MolecularWavefunction::new(&state.atoms, &state.system, &sol, dir, incident)?;
        let matching = (0..state.atoms.len()).map(|i| wf.surface_matching(i, degree)).collect::<Result<Vec<_>>>()?;
        let rec = MswRecord::new(&state, &sol, &wf, matching, run.config.write_coefficients);
        let surface = matching_max(&rec, |m| m.relative());
        let raw = matching_max(&rec, |m| m.raw / m.scale.max(1e-300));
        let b_norm = wf.scattered().iter().map(|b| b.norm_squared()).sum::<f64>().sqrt();
        outcome.checks.push(Check::new("msw_secular_residual", Some(e), rec.residual, verify::SECULAR_RESIDUAL_TOL));
        outcome.checks.push(Check::new("msw_t_inverse_symmetry", Some(e), state.t_symmetry_defect(), verify::T_SYMMETRY_TOL));
        outcome.checks.push(Check::new("msw_surface_matching", Some(e), surface, verify::SURFACE_MATCH_TOL));
        rows.push(MswRow {
            energy: e,
            wavenumber: rec.wavenumber,
            condition: rec.condition,
            residual: rec.residual,
            t_inverse_symmetry: vmax(&rec.t_inverse_symmetry),
            t_inverse_scaled_symmetry: vmax(&rec.t_inverse_scaled_symmetry),
            m_constancy: vmax(&rec.m_constancy),
            coupling_symmetry: rec.coupling_symmetry,
            wronskian_condition: vmax(&rec.wronskian_condition),
            surface_matching: surface,
            surface_matching_raw: raw,
            scattering_norm: b_norm,
        });
        field_grids(&problem, e, &mut outcome.grids)?;
        records.push(rec);
    }
    write_rows(&out.join("msw.csv"), &rows)?;
    let json = serde_json::to_string_pretty(&records).map_err(|e| DwmsError::Io(std::io::Error::other(e)))?;
    std::fs::write(out.join("msw_records.json"), json + "\n")?;
    outcome.artifacts.extend(["msw.csv".to_string(), "msw_records.json".to_string()]);
    Ok(outcome)
}

fn matching_max(rec: &MswRecord, f: impl Fn(&crate::msw::SurfaceMatch) -> f64) -> f64 {
    rec.surface_matching.iter().map(f).fold(0.0, f64::max)
}

#[derive(Serialize)]
struct CandidateRow {
    energy: f64,
    sigma_min: f64,
    phase_flip: bool,
    bracket_lo: f64,
    bracket_hi: f64,
    accepted: bool,
}

fn msw_bound_scan(run: &Run, out: &Path) -> Result<Outcome> {
    let settings = run.config.settings();
    let window = run.config.bound_scan;
    let problem = MswProblem::new(&run.potential, settings);
    let report: ScanReport = bound_state_scan(&problem, &window)?;
    let mut outcome = Outcome::default();
    let mut candidates: Vec<CandidateRow> = report
        .candidates
        .iter()
        .map(|c| (c, true))
        .chain(report.rejected.iter().map(|c| (c, false)))
        .map(|(c, accepted)| CandidateRow {
            energy: c.energy,
            sigma_min: c.sigma_min,
            phase_flip: c.phase_flip,
            bracket_lo: c.bracket.0,
            bracket_hi: c.bracket.1,
            accepted,
        })
        .collect();
    candidates.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    write_rows(&out.join("bound_candidates.csv"), &candidates)?;
    write_rows(&out.join("bound_scan_samples.csv"), &report.samples)?;
    outcome.artifacts.extend(["bound_candidates.csv".to_string(), "bound_scan_samples.csv".to_string()]);
    for e in &report.flagged {
        outcome.warnings.push(format!("E = {e}: cond(M_i) above {:e}, distorting potential may bind here", window.wronskian_limit));
    }
    for (e, why) in &report.failures {
        outcome.warnings.push(format!("E = {e}: assembly failed: {why}"));
    }
    let worst = report.samples.iter().map(|s| s.wronskian_condition).fold(0.0, f64::max);
    outcome.checks.push(Check::new("distorting_wronskian_condition", None, worst, window.wronskian_limit));
    outcome.checks.push(Check::new("scan_failures", None, report.failures.len() as f64, 0.0));
    if let Some(s) = report.samples.first() {
        field_grids(&problem, s.energy, &mut outcome.grids)?;
    }
    Ok(outcome)
}

fn verify_mode(run: &Run, out: &Path) -> Result<Outcome> {
    let dir = run.direction();
    let trunc = Truncation::new(run.config.l_max);
    let l_sub = run.config.l_max.saturating_sub(2);
    let offset = run.potential.model().offset();
    let per_energy: Vec<(GridRecord, Vec<Check>)> = run
        .energies
        .par_iter()
        .map(|&e| {
            let (ss, grid, probe) = single_center(run, e)?;
            let mut checks = verify::single_center_checks(&ss, probe, dir, l_sub)?;
            checks.extend(verify::free_green_checks(probe.center, e - offset)?);
            checks.extend(verify::translation_checks(e - offset, run.displacement(), trunc, run.config.numerics.surface)?);
            Ok((grid, checks))
        })
        .collect::<Result<_>>()?;
    let mut outcome = Outcome::default();
    for (grid, checks) in per_energy {
        outcome.grids.push(grid);
        outcome.checks.extend(checks);
    }
    if !run.potential.partition().is_empty() {
        let problem = MswProblem::new(&run.potential, run.config.settings());
        for &e in &run.energies {
            let incident = incident_for(&problem, e, dir)?;
            outcome.checks.extend(verify::msw_checks(&problem, e, dir, incident)?);
            field_grids(&problem, e, &mut outcome.grids)?;
        }
    }
    write_rows(&out.join("verify.csv"), &outcome.checks)?;
    outcome.artifacts.push("verify.csv".into());
    Ok(outcome)
}
