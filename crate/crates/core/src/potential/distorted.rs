use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::angular::{ShEvaluator, Truncation};
use crate::error::{DwmsError, Result};
use crate::quadrature::{norm, scale, sub};

use super::multipole::ProjectionRule;
use super::{MolecularPartition, PotentialModel, ScalarField};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    /// The true potential `V`.
    Full,
    /// The distorting potential `V_I`.
    Distorting,
    /// `V_A = V − V_I`.
    Singular,
}

/// How `V_I` is continued inside the atomic spheres.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Continuation {
    /// `V_I ≡ V`, so `V_A ≡ 0`.
    Identity,
    /// Each multipole `l ≤ l_cont` becomes `r^l Σ_{n<degree} c_n r^{2n}`, matching the
    /// value and `degree − 1` radial derivatives of the true component at `b_i`.
    Polynomial { degree: usize, l_cont: usize },
}

/// `V = V_I + V_A` with smooth continuation of `V_I` into each sphere.
#[derive(Debug)]
pub struct DistortedPotential {
    model: Arc<PotentialModel>,
    partition: MolecularPartition,
    continuation: Continuation,
    /// `coefficients[i][L]` for sphere `i`, channel `L` with `l ≤ l_cont`.
    coefficients: Vec<Vec<Vec<f64>>>,
}

impl DistortedPotential {
    pub fn build(model: Arc<PotentialModel>, partition: MolecularPartition, continuation: Continuation) -> Result<Self> {
        let mut coefficients = Vec::new();
        if let Continuation::Polynomial { degree, l_cont } = continuation {
            if !(1..=3).contains(&degree) {
                return Err(DwmsError::Config(format!("continuation degree {degree} not in 1..=3")));
            }
            let rule = ProjectionRule::new(l_cont);
            for i in 0..partition.len() {
                coefficients.push(fit_sphere(&model, &partition, i, degree, l_cont, &rule)?);
            }
        }
        Ok(Self { model, partition, continuation, coefficients })
    }

    pub fn model(&self) -> &PotentialModel {
        &self.model
    }

    pub fn partition(&self) -> &MolecularPartition {
        &self.partition
    }

    pub fn continuation(&self) -> Continuation {
        self.continuation
    }

    /// Continued component `V_I,L(r)` inside sphere `i` and its radial derivative.
    pub fn continued_component(&self, sphere: usize, channel: usize, r: f64) -> (f64, f64) {
        let Some(c) = self.coefficients.get(sphere).and_then(|s| s.get(channel)) else {
            return (0.0, 0.0);
        };
        let l = crate::angular::AngularIndex::from_index(channel).l as i32;
        let mut v = 0.0;
        let mut d = 0.0;
        for (n, cn) in c.iter().enumerate() {
            let p = l + 2 * n as i32;
            v += cn * r.powi(p);
            if p > 0 {
                d += cn * p as f64 * r.powi(p - 1);
            }
        }
        (v, d)
    }

    /// All continued components at radius `r` inside sphere `i`, padded to `n_pot`.
    pub fn continued_components(&self, sphere: usize, r: f64, n_pot: usize) -> Vec<f64> {
        (0..n_pot).map(|k| self.continued_component(sphere, k, r).0).collect()
    }

    pub fn eval(&self, which: Which, point: [f64; 3]) -> Result<f64> {
        match which {
            Which::Full => self.model.value(point),
            Which::Distorting => self.distorting_value(point),
            Which::Singular => {
                if self.inside(point).is_none() {
                    Ok(0.0)
                } else {
                    Ok(self.model.value(point)? - self.distorting_value(point)?)
                }
            }
        }
    }

    fn inside(&self, point: [f64; 3]) -> Option<usize> {
        match self.continuation {
            Continuation::Identity => None,
            Continuation::Polynomial { .. } => self.partition.containing(point),
        }
    }

    fn distorting_value(&self, point: [f64; 3]) -> Result<f64> {
        let Some(i) = self.inside(point) else {
            return self.model.value(point);
        };
        let Continuation::Polynomial { l_cont, .. } = self.continuation else { unreachable!() };
        let rel = sub(point, self.partition.center(i));
        let r = norm(rel);
        let dir = if r > 0.0 { scale(rel, 1.0 / r) } else { [0.0, 0.0, 1.0] };
        let mut ev = ShEvaluator::new(l_cont);
        let mut y = vec![0.0; Truncation::new(l_cont).dim()];
        ev.values(dir, &mut y);
        Ok(y.iter().enumerate().map(|(k, yk)| self.continued_component(i, k, r).0 * yk).sum())
    }

    /// View of one of the three fields as a [`ScalarField`].
    pub fn field(&self, which: Which) -> FieldView<'_> {
        FieldView { pot: self, which }
    }
}

pub struct FieldView<'a> {
    pot: &'a DistortedPotential,
    which: Which,
}

impl ScalarField for FieldView<'_> {
    fn value(&self, point: [f64; 3]) -> Result<f64> {
        self.pot.eval(self.which, point)
    }

    fn jump_radii(&self, center: [f64; 3]) -> Vec<f64> {
        let own: Vec<f64> = self.pot.model.jump_radii(center);
        match (self.which, self.pot.continuation) {
            (Which::Distorting, Continuation::Polynomial { .. }) => {
                // jumps inside the own sphere are replaced by the continuation
                match (0..self.pot.partition.len()).find(|&i| norm(sub(self.pot.partition.center(i), center)) < 1e-12) {
                    Some(i) => own.into_iter().filter(|a| *a > self.pot.partition.radius(i)).collect(),
                    None => own,
                }
            }
            _ => own,
        }
    }

    fn asymptotic_value(&self) -> f64 {
        self.pot.model.offset()
    }
}

fn fit_sphere(
    model: &PotentialModel,
    partition: &MolecularPartition,
    i: usize,
    degree: usize,
    l_cont: usize,
    rule: &ProjectionRule,
) -> Result<Vec<Vec<f64>>> {
    let b = partition.radius(i);
    let center = partition.center(i);
    let delta = 2e-3 * b;
    if model.jump_radii(center).iter().any(|a| (a - b).abs() <= 2.0 * delta) {
        return Err(DwmsError::Continuation {
            center: i,
            reason: format!("potential jumps within {:.3e} of the sphere radius {b}", 2.0 * delta),
        });
    }
    let samples: Vec<Vec<f64>> = (-2..=2)
        .map(|j| rule.project(model, center, b + j as f64 * delta))
        .collect::<Result<_>>()
        .map_err(|e| DwmsError::Continuation { center: i, reason: e.to_string() })?;
    let n_pot = Truncation::new(l_cont).dim();
    let mut out = Vec::with_capacity(n_pot);
    for channel in 0..n_pot {
        let f: Vec<f64> = samples.iter().map(|s| s[channel]).collect();
        let derivs = [
            f[2],
            (f[0] - 8.0 * f[1] + 8.0 * f[3] - f[4]) / (12.0 * delta),
            (-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * delta * delta),
        ];
        if derivs.iter().any(|d| !d.is_finite()) {
            return Err(DwmsError::Continuation { center: i, reason: "non-finite derivative estimate".into() });
        }
        let l = crate::angular::AngularIndex::from_index(channel).l as i32;
        let mut a = DMatrix::<f64>::zeros(degree, degree);
        for k in 0..degree {
            for n in 0..degree {
                let p = l + 2 * n as i32;
                let mut fall = 1.0;
                for t in 0..k as i32 {
                    fall *= (p - t) as f64;
                }
                a[(k, n)] = if p - (k as i32) < 0 { 0.0 } else { fall * b.powi(p - k as i32) };
            }
        }
        let rhs = DVector::from_iterator(degree, derivs.iter().take(degree).cloned());
        let c = a.lu().solve(&rhs).ok_or_else(|| DwmsError::Continuation {
            center: i,
            reason: format!("singular matching system for channel {channel}"),
        })?;
        out.push(c.iter().cloned().collect());
    }
    Ok(out)
}
