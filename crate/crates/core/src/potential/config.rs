//! Potential/geometry file format (TOML).
//!
//! ```toml
//! schema = "dwms-potential/1"
//! offset = 0.0
//!
//! [continuation]
//! mode = "polynomial"   # or "identity" (V_I ≡ V)
//! degree = 2
//!
//! [[atom]]
//! label = "A"
//! position = [0.0, 0.0, -2.5]
//! radius = 2.0           # omit for a bare potential site without a sphere
//! [[atom.term]]
//! kind = "coulomb_cutoff"
//! z = 1.0
//! cutoff = 3.5
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{DwmsError, Result};

use super::{Continuation, MolecularPartition, PotentialModel, PotentialTerm, RadialForm};

pub const POTENTIAL_SCHEMA: &str = "dwms-potential/1";

pub type TermConfig = RadialForm;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    #[serde(default)]
    pub label: Option<String>,
    pub position: [f64; 3],
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default, rename = "term")]
    pub terms: Vec<TermConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ContinuationMode {
    #[default]
    Polynomial,
    Identity,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuationConfig {
    #[serde(default)]
    pub mode: ContinuationMode,
    #[serde(default = "default_degree")]
    pub degree: usize,
    /// Highest multipole continued into the spheres (defaults to `l_max_pot`).
    #[serde(default)]
    pub l_cont: Option<usize>,
}

fn default_degree() -> usize {
    2
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self { mode: ContinuationMode::Polynomial, degree: 2, l_cont: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub schema: String,
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub continuation: ContinuationConfig,
    #[serde(default, rename = "atom")]
    pub atoms: Vec<AtomConfig>,
}

impl PotentialConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PotentialConfig = toml::from_str(text).map_err(|e| DwmsError::Config(e.to_string()))?;
        if cfg.schema != POTENTIAL_SCHEMA {
            return Err(DwmsError::Config(format!(
                "unsupported potential schema {:?}, expected {POTENTIAL_SCHEMA:?}",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| DwmsError::Config(format!("{}: {e}", path.display())))
    }

    pub fn model(&self) -> Result<Arc<PotentialModel>> {
        let sites = self.atoms.iter().map(|a| a.position).collect();
        let terms = self
            .atoms
            .iter()
            .enumerate()
            .flat_map(|(i, a)| a.terms.iter().map(move |f| PotentialTerm { site: i, form: *f }))
            .collect();
        Ok(Arc::new(PotentialModel::new(sites, terms, self.offset)?))
    }

    /// Atoms that carry a sphere radius, in file order.
    pub fn partition(&self) -> Result<MolecularPartition> {
        let (c, r): (Vec<_>, Vec<_>) = self.atoms.iter().filter_map(|a| a.radius.map(|b| (a.position, b))).unzip();
        MolecularPartition::new(c, r)
    }

    pub fn continuation(&self, l_max_pot: usize) -> Continuation {
        match self.continuation.mode {
            ContinuationMode::Identity => Continuation::Identity,
            ContinuationMode::Polynomial => Continuation::Polynomial {
                degree: self.continuation.degree,
                l_cont: self.continuation.l_cont.unwrap_or(l_max_pot),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
schema = "dwms-potential/1"
offset = 0.1

[[atom]]
label = "A"
position = [0.0, 0.0, -2.5]
radius = 2.0
[[atom.term]]
kind = "coulomb_cutoff"
z = 1.0
cutoff = 3.5

[[atom]]
position = [0.0, 0.0, 2.5]
radius = 2.0
[[atom.term]]
kind = "gaussian"
depth = 1.0
width = 0.5
"#;

    #[test]
    fn parses_sample() {
        let cfg = PotentialConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.atoms.len(), 2);
        let m = cfg.model().unwrap();
        assert_eq!(m.terms().len(), 2);
        assert_eq!(cfg.partition().unwrap().len(), 2);
        assert_eq!(cfg.continuation(8), Continuation::Polynomial { degree: 2, l_cont: 8 });
    }

    #[test]
    fn rejects_wrong_schema_and_reports_location() {
        let bad = SAMPLE.replace("dwms-potential/1", "dwms-potential/9");
        assert!(PotentialConfig::from_toml_str(&bad).is_err());
        let typo = SAMPLE.replace("cutoff = 3.5", "cutof = 3.5");
        let err = PotentialConfig::from_toml_str(&typo).unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
    }
}
