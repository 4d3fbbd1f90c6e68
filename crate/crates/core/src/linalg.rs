//! Small dense-matrix helpers shared by the numerical modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{DwmsError, Result};

pub type CMat = DMatrix<Complex64>;
pub type RMat = DMatrix<f64>;
pub type CVec = DVector<Complex64>;
pub type RVec = DVector<f64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.norm()))
}

pub fn max_abs_real(m: &RMat) -> f64 {
    m.iter().fold(0.0, |a, z| a.max(z.abs()))
}

/// Largest entry of |a - b|.
pub fn max_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).norm()))
}

/// Largest `|m_ab − m_ba| / max(√|m_aa m_bb|, 1)`, unchanged by a symmetric
/// diagonal rescaling of the channels.
pub fn scaled_asymmetry(m: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for a in 0..m.nrows() {
        for b in (a + 1)..m.ncols() {
            let scale = (m[(a, a)].norm() * m[(b, b)].norm()).sqrt().max(1.0);
            worst = worst.max((m[(a, b)] - m[(b, a)]).norm() / scale);
        }
    }
    worst
}

/// Leading `n × n` block.
pub fn sub_block(m: &CMat, n: usize) -> CMat {
    m.view((0, 0), (n, n)).into_owned()
}

pub fn inverse(m: &CMat, context: &str) -> Result<CMat> {
    let cond = condition_number(m);
    if !cond.is_finite() || cond > 1e14 {
        return Err(DwmsError::Singular { context: context.to_string(), cond });
    }
    m.clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| DwmsError::Singular { context: context.to_string(), cond })
}

pub fn inverse_real(m: &RMat, context: &str) -> Result<RMat> {
    m.clone().lu().try_inverse().ok_or_else(|| DwmsError::Singular {
        context: context.to_string(),
        cond: f64::INFINITY,
    })
}

/// 2-norm condition number from the singular values.
pub fn condition_number(m: &CMat) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn diag_complex(d: &[Complex64]) -> CMat {
    CMat::from_diagonal(&CVec::from_column_slice(d))
}

/// Multiply the columns of `m` by `d` in place.
pub fn scale_columns(m: &mut CMat, d: &[Complex64]) {
    for (j, s) in d.iter().enumerate() {
        m.column_mut(j).scale_mut_c(*s);
    }
}

/// Multiply the rows of `m` by `d` in place.
pub fn scale_rows(m: &mut CMat, d: &[Complex64]) {
    for (i, s) in d.iter().enumerate() {
        m.row_mut(i).scale_mut_c(*s);
    }
}

trait ScaleC {
    fn scale_mut_c(&mut self, s: Complex64);
}

impl<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::StorageMut<Complex64, R, C>> ScaleC
    for nalgebra::Matrix<Complex64, R, C, S>
{
    fn scale_mut_c(&mut self, s: Complex64) {
        for z in self.iter_mut() {
            *z *= s;
        }
    }
}

/// Condition number after scaling every column to unit max norm.
pub fn column_normalized_condition(m: &CMat) -> f64 {
    let mut s = m.clone();
    for mut c in s.column_iter_mut() {
        let mx = c.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        if mx > 0.0 {
            c.unscale_mut(mx);
        }
    }
    condition_number(&s)
}

/// Condition number after alternately equilibrating rows and columns to unit
/// max norm, insensitive to the arbitrary column scales of solution matrices.
pub fn balanced_condition(m: &CMat) -> f64 {
    let mut s = m.clone();
    for _ in 0..4 {
        for mut r in s.row_iter_mut() {
            let mx = r.iter().fold(0.0f64, |a, z| a.max(z.norm()));
            if mx > 0.0 {
                r.unscale_mut(mx);
            }
        }
        for mut c in s.column_iter_mut() {
            let mx = c.iter().fold(0.0f64, |a, z| a.max(z.norm()));
            if mx > 0.0 {
                c.unscale_mut(mx);
            }
        }
    }
    condition_number(&s)
}
