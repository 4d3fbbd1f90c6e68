//! Multicenter potential models, multipole projection about any center and the
//! split `V = V_I + V_A` into a smooth distorting part and atomic remainders.

mod config;
mod distorted;
mod multipole;

pub use config::{AtomConfig, ContinuationConfig, ContinuationMode, PotentialConfig, TermConfig, POTENTIAL_SCHEMA};
pub use distorted::{Continuation, DistortedPotential, Which};
pub use multipole::{project_multipoles, MultipoleExpansion, ProjectionRule};

use crate::error::{DwmsError, Result};
use crate::quadrature::{norm, sub};

/// Anything that can be evaluated pointwise in space (Rydberg).
pub trait ScalarField: Send + Sync {
    fn value(&self, point: [f64; 3]) -> Result<f64>;

    /// Radii about `center` where the field jumps; grids place breakpoints there.
    fn jump_radii(&self, _center: [f64; 3]) -> Vec<f64> {
        Vec::new()
    }

    /// Constant approached at infinity.
    fn asymptotic_value(&self) -> f64 {
        0.0
    }
}

/// Atomic spheres `τ_i`: centers and radii, mutually disjoint.
#[derive(Clone, Debug, PartialEq)]
pub struct MolecularPartition {
    centers: Vec<[f64; 3]>,
    radii: Vec<f64>,
}

impl MolecularPartition {
    pub fn new(centers: Vec<[f64; 3]>, radii: Vec<f64>) -> Result<Self> {
        if centers.len() != radii.len() {
            return Err(DwmsError::Geometry(format!(
                "{} centers but {} radii",
                centers.len(),
                radii.len()
            )));
        }
        for (i, b) in radii.iter().enumerate() {
            if !(*b > 0.0) {
                return Err(DwmsError::Geometry(format!("sphere {i} has radius {b}")));
            }
        }
        for i in 0..centers.len() {
            for j in i + 1..centers.len() {
                let d = norm(sub(centers[i], centers[j]));
                if radii[i] + radii[j] > d * (1.0 + 1e-12) {
                    return Err(DwmsError::Geometry(format!(
                        "spheres {i} and {j} overlap: b_i + b_j = {} > |R_ij| = {d}",
                        radii[i] + radii[j]
                    )));
                }
            }
        }
        Ok(Self { centers, radii })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn center(&self, i: usize) -> [f64; 3] {
        self.centers[i]
    }

    pub fn radius(&self, i: usize) -> f64 {
        self.radii[i]
    }

    pub fn centers(&self) -> &[[f64; 3]] {
        &self.centers
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    /// Sphere strictly containing `point`, if any.
    pub fn containing(&self, point: [f64; 3]) -> Option<usize> {
        (0..self.len()).find(|&i| norm(sub(point, self.centers[i])) < self.radii[i])
    }
}

/// Radial shape of one potential term (attractive for positive strengths).
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RadialForm {
    /// `-(2Z/r)(1 - r/r_c)³` for `r < r_c`, zero beyond (C² at the cutoff).
    CoulombCutoff { z: f64, cutoff: f64 },
    /// `-2 g e^{-μ r} / r`.
    Yukawa { strength: f64, screening: f64 },
    /// `-V₀ exp(-(r/w)²)`.
    Gaussian { depth: f64, width: f64 },
    /// `-V₀` for `r < a`.
    SquareWell { depth: f64, radius: f64 },
}

impl RadialForm {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            RadialForm::CoulombCutoff { z, cutoff } => {
                if r >= cutoff {
                    0.0
                } else {
                    let t = 1.0 - r / cutoff;
                    -2.0 * z / r * t * t * t
                }
            }
            RadialForm::Yukawa { strength, screening } => -2.0 * strength * (-screening * r).exp() / r,
            RadialForm::Gaussian { depth, width } => -depth * (-(r / width) * (r / width)).exp(),
            RadialForm::SquareWell { depth, radius } => {
                if r < radius {
                    -depth
                } else {
                    0.0
                }
            }
        }
    }

    pub fn singular(&self) -> bool {
        matches!(self, RadialForm::CoulombCutoff { .. } | RadialForm::Yukawa { .. })
    }

    pub fn jump_radius(&self) -> Option<f64> {
        match *self {
            RadialForm::SquareWell { radius, .. } => Some(radius),
            _ => None,
        }
    }

    /// Radius beyond which `|V| r² < threshold`.
    pub fn tail_radius(&self, threshold: f64) -> f64 {
        match *self {
            RadialForm::CoulombCutoff { cutoff, .. } => cutoff,
            RadialForm::SquareWell { radius, .. } => radius,
            _ => {
                let mut r = 1.0;
                while self.eval(r).abs() * r * r >= threshold && r < 1e4 {
                    r *= 1.05;
                }
                r
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialTerm {
    pub site: usize,
    pub form: RadialForm,
}

/// Sum of analytic site-centered terms plus a global constant.
#[derive(Clone, Debug, PartialEq)]
pub struct PotentialModel {
    sites: Vec<[f64; 3]>,
    terms: Vec<PotentialTerm>,
    offset: f64,
}

impl PotentialModel {
    pub fn new(sites: Vec<[f64; 3]>, terms: Vec<PotentialTerm>, offset: f64) -> Result<Self> {
        for t in &terms {
            if t.site >= sites.len() {
                return Err(DwmsError::Config(format!("term refers to missing site {}", t.site)));
            }
        }
        Ok(Self { sites, terms, offset })
    }

    /// The potential that vanishes everywhere.
    pub fn free() -> Self {
        Self { sites: Vec::new(), terms: Vec::new(), offset: 0.0 }
    }

    pub fn sites(&self) -> &[[f64; 3]] {
        &self.sites
    }

    pub fn terms(&self) -> &[PotentialTerm] {
        &self.terms
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Largest distance from `center` at which any term still exceeds the tail threshold.
    pub fn tail_extent(&self, center: [f64; 3], threshold: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| norm(sub(self.sites[t.site], center)) + t.form.tail_radius(threshold))
            .fold(0.0, f64::max)
    }
}

impl ScalarField for PotentialModel {
    fn value(&self, point: [f64; 3]) -> Result<f64> {
        let mut v = self.offset;
        for t in &self.terms {
            let r = norm(sub(point, self.sites[t.site]));
            if r == 0.0 && t.form.singular() {
                return Err(DwmsError::SingularPoint(format!("site {}", t.site)));
            }
            v += t.form.eval(r);
        }
        Ok(v)
    }

    fn jump_radii(&self, center: [f64; 3]) -> Vec<f64> {
        let mut out = Vec::new();
        for t in &self.terms {
            if let Some(a) = t.form.jump_radius() {
                let d = norm(sub(self.sites[t.site], center));
                if d < 1e-12 {
                    out.push(a);
                }
            }
        }
        out
    }

    fn asymptotic_value(&self) -> f64 {
        self.offset
    }
}
