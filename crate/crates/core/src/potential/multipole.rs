use std::f64::consts::PI;

use crate::angular::{ShEvaluator, Truncation};
use crate::error::{DwmsError, Result};
use crate::quadrature::{add, scale, SphereQuadrature};

use super::ScalarField;

/// Angular projection onto real harmonics with a product rule of
/// `2·l_max_pot + 2` Gauss-Legendre nodes in cos θ and twice as many in φ.
#[derive(Clone, Debug)]
pub struct ProjectionRule {
    l_max_pot: usize,
    quad: SphereQuadrature,
    /// `w_k Y_L(n_k)`, row-major by node.
    weighted_y: Vec<f64>,
}

impl ProjectionRule {
    pub fn new(l_max_pot: usize) -> Self {
        let n_theta = 2 * l_max_pot + 2;
        Self::with_order(l_max_pot, n_theta)
    }

    pub fn with_order(l_max_pot: usize, n_theta: usize) -> Self {
        let quad = SphereQuadrature::new(n_theta, 2 * n_theta);
        let n_pot = Truncation::new(l_max_pot).dim();
        let mut ev = ShEvaluator::new(l_max_pot);
        let mut y = vec![0.0; n_pot];
        let mut weighted_y = Vec::with_capacity(quad.nodes.len() * n_pot);
        for node in &quad.nodes {
            ev.values(node.dir, &mut y);
            weighted_y.extend(y.iter().map(|v| v * node.weight));
        }
        Self { l_max_pot, quad, weighted_y }
    }

    pub fn l_max_pot(&self) -> usize {
        self.l_max_pot
    }

    /// `v_L(r) = ∫ V(center + r n̂) Y_L(n̂) dΩ`.
    pub fn project(&self, field: &dyn ScalarField, center: [f64; 3], r: f64) -> Result<Vec<f64>> {
        let n_pot = Truncation::new(self.l_max_pot).dim();
        let mut out = vec![0.0; n_pot];
        if r == 0.0 {
            if let Ok(v) = field.value(center) {
                out[0] = (4.0 * PI).sqrt() * v;
            }
            return Ok(out);
        }
        for (k, node) in self.quad.nodes.iter().enumerate() {
            let v = field.value(add(center, scale(node.dir, r)))?;
            let row = &self.weighted_y[k * n_pot..(k + 1) * n_pot];
            for (o, wy) in out.iter_mut().zip(row) {
                *o += v * wy;
            }
        }
        Ok(out)
    }
}

/// Multipole components `v_L(r)` of a field about one center on a set of radii.
#[derive(Clone, Debug)]
pub struct MultipoleExpansion {
    pub center: [f64; 3],
    pub l_max_pot: usize,
    pub radii: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    /// Largest change of any component under doubling of the angular order,
    /// sampled at a few radii.
    pub projection_error: f64,
}

impl MultipoleExpansion {
    /// `Σ_L v_L(r_k) Y_L(dir)` at sampled radius index `k`.
    pub fn reconstruct(&self, k: usize, dir: [f64; 3]) -> f64 {
        let mut ev = ShEvaluator::new(self.l_max_pot);
        let mut y = vec![0.0; Truncation::new(self.l_max_pot).dim()];
        ev.values(dir, &mut y);
        self.components[k].iter().zip(&y).map(|(a, b)| a * b).sum()
    }

    /// Fails when the doubling estimate exceeds `tol`.
    pub fn check(&self, tol: f64) -> Result<()> {
        if self.projection_error > tol {
            return Err(DwmsError::Quadrature {
                context: "multipole projection".into(),
                delta: self.projection_error,
            });
        }
        Ok(())
    }
}

pub fn project_multipoles(
    field: &dyn ScalarField,
    center: [f64; 3],
    radii: &[f64],
    l_max_pot: usize,
) -> Result<MultipoleExpansion> {
    let rule = ProjectionRule::new(l_max_pot);
    let components = radii.iter().map(|r| rule.project(field, center, *r)).collect::<Result<Vec<_>>>()?;
    let fine = ProjectionRule::with_order(l_max_pot, 4 * l_max_pot + 4);
    let mut err: f64 = 0.0;
    if !radii.is_empty() {
        for k in [0, radii.len() / 2, radii.len() - 1] {
            let a = &components[k];
            let b = fine.project(field, center, radii[k])?;
            err = a.iter().zip(&b).fold(err, |e, (x, y)| e.max((x - y).abs()));
        }
    }
    Ok(MultipoleExpansion { center, l_max_pot, radii: radii.to_vec(), components, projection_error: err })
}
