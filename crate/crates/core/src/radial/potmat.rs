use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::angular::{AngularIndex, GauntTable, Truncation};
use crate::error::{DwmsError, Result};
use crate::linalg::RMat;
use crate::potential::{ProjectionRule, ScalarField};

use super::grid::RadialGrid;

/// Potential coupling matrix `w_{LL'}(r) = Σ I(L,L',L'') v_{L''}(r)` on a grid,
/// measured from the asymptotic value of the field.
#[derive(Clone, Debug)]
pub struct CoupledPotentialMatrix {
    grid: Arc<RadialGrid>,
    trunc: Truncation,
    l_max_pot: usize,
    gaunt: Arc<GauntTable>,
    /// Multipoles of `V − V∞` per node.
    components: Vec<Vec<f64>>,
    asymptotic: f64,
    spherical: bool,
    vanishing: bool,
}

impl CoupledPotentialMatrix {
    /// Builds from a components function. At nodes shared by two chunks the
    /// function is sampled just below (lower chunk) and just above (upper chunk).
    pub fn from_components<F>(
        grid: Arc<RadialGrid>,
        trunc: Truncation,
        l_max_pot: usize,
        asymptotic: f64,
        components: F,
    ) -> Result<Self>
    where
        F: Fn(f64) -> Result<Vec<f64>> + Sync,
    {
        let l_used = l_max_pot.min(2 * trunc.l_max);
        let n_pot = Truncation::new(l_used).dim();
        let chunks = grid.chunks().to_vec();
        let n_chunks = chunks.len();
        let sample = |node: usize| -> Result<Vec<f64>> {
            let ci = grid.chunk_of(node);
            let mut r = grid.r(node);
            let c = &chunks[ci];
            if node == c.last() && ci + 1 < n_chunks {
                r *= 1.0 - 1e-12;
            } else if node == c.first && ci > 0 {
                r *= 1.0 + 1e-12;
            }
            let mut v = components(r)?;
            v.resize(n_pot, 0.0);
            v[0] -= (4.0 * PI).sqrt() * asymptotic;
            Ok(v)
        };
        let components: Vec<Vec<f64>> = (0..grid.len()).into_par_iter().map(sample).collect::<Result<_>>()?;
        let scale = components.iter().flat_map(|v| v.iter()).fold(0.0f64, |a, x| a.max(x.abs()));
        let spherical = components.iter().all(|v| v.iter().skip(1).all(|x| x.abs() <= 1e-14 * scale.max(1e-300)));
        let vanishing = scale <= 1e-13 * asymptotic.abs().max(1.0);
        Ok(Self {
            grid,
            trunc,
            l_max_pot: l_used,
            gaunt: GauntTable::shared(trunc.l_max),
            components,
            asymptotic,
            spherical,
            vanishing,
        })
    }

    /// Projects a field about `center` on every node.
    pub fn from_field(
        field: &dyn ScalarField,
        center: [f64; 3],
        grid: Arc<RadialGrid>,
        trunc: Truncation,
        l_max_pot: usize,
    ) -> Result<Self> {
        let rule = ProjectionRule::new(l_max_pot.min(2 * trunc.l_max));
        let asym = field.asymptotic_value();
        Self::from_components(grid, trunc, l_max_pot, asym, |r| rule.project(field, center, r))
    }

    /// Zero potential.
    pub fn free(grid: Arc<RadialGrid>, trunc: Truncation) -> Self {
        Self::from_components(grid, trunc, 0, 0.0, |_| Ok(vec![0.0])).expect("free potential")
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    pub fn l_max_pot(&self) -> usize {
        self.l_max_pot
    }

    pub fn asymptotic(&self) -> f64 {
        self.asymptotic
    }

    /// True if only the monopole is present; channels then decouple by `l`.
    pub fn is_spherical(&self) -> bool {
        self.spherical
    }

    /// True if `V − V∞` vanishes on the whole grid (a constant field).
    pub fn is_vanishing(&self) -> bool {
        self.vanishing
    }

    pub fn components(&self, node: usize) -> &[f64] {
        &self.components[node]
    }

    /// `w` at a node (full channel dimension).
    pub fn w(&self, node: usize) -> RMat {
        let dim = self.trunc.dim();
        let mut m = RMat::zeros(dim, dim);
        for (l2, v) in self.components[node].iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            for &(a, b, g) in self.gaunt.entries(l2) {
                m[(a as usize, b as usize)] += v * g;
            }
        }
        m
    }

    /// Monopole part of `w` (the common diagonal value for a spherical field).
    pub fn w_monopole(&self, node: usize) -> f64 {
        self.components[node][0] / (4.0 * PI).sqrt()
    }

    /// Bound on `|V − V∞|·r²` at a node.
    pub fn tail_measure(&self, node: usize) -> f64 {
        let r = self.grid.r(node);
        let sum: f64 = self.components[node]
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let l = AngularIndex::from_index(k).l as f64;
                v.abs() * ((2.0 * l + 1.0) / (4.0 * PI)).sqrt()
            })
            .sum();
        sum * r * r
    }

    /// Checks whether the field matches another on the same grid to within `tol`.
    pub fn same_grid(&self, other: &CoupledPotentialMatrix) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(DwmsError::Dimension("solutions live on different grids".into()))
        }
    }
}
