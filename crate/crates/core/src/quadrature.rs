//! Gauss-Legendre rules and product quadratures on the unit sphere.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// A node on the unit sphere with its weight.
#[derive(Clone, Copy, Debug)]
pub struct SphereNode {
    pub dir: [f64; 3],
    pub weight: f64,
}

/// Product rule: Gauss-Legendre in cos θ times uniform φ, optionally rotated
/// so that the polar axis points along `axis`.
#[derive(Clone, Debug)]
pub struct SphereQuadrature {
    pub n_theta: usize,
    pub n_phi: usize,
    pub nodes: Vec<SphereNode>,
}

impl SphereQuadrature {
    pub fn new(n_theta: usize, n_phi: usize) -> Self {
        Self::about_axis(n_theta, n_phi, [0.0, 0.0, 1.0])
    }

    /// Exact for spherical polynomials of degree ≤ `degree`.
    pub fn exact_to_degree(degree: usize) -> Self {
        let n_theta = degree / 2 + 1;
        Self::new(n_theta, degree + 1)
    }

    pub fn about_axis(n_theta: usize, n_phi: usize, axis: [f64; 3]) -> Self {
        let (x, w) = gauss_legendre(n_theta);
        let frame = orthonormal_frame(axis);
        let mut nodes = Vec::with_capacity(n_theta * n_phi);
        let dphi = 2.0 * PI / n_phi as f64;
        for (ct, wt) in x.iter().zip(&w) {
            let st = (1.0 - ct * ct).max(0.0).sqrt();
            for k in 0..n_phi {
                let phi = (k as f64 + 0.5) * dphi;
                let local = [st * phi.cos(), st * phi.sin(), *ct];
                let mut dir = [0.0; 3];
                for (a, d) in dir.iter_mut().enumerate() {
                    *d = frame[0][a] * local[0] + frame[1][a] * local[1] + frame[2][a] * local[2];
                }
                nodes.push(SphereNode { dir, weight: wt * dphi });
            }
        }
        Self { n_theta, n_phi, nodes }
    }

    pub fn integrate<F: FnMut([f64; 3]) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().map(|n| n.weight * f(n.dir)).sum()
    }
}

/// Right-handed frame (e1, e2, e3) with e3 along `axis`.
pub fn orthonormal_frame(axis: [f64; 3]) -> [[f64; 3]; 3] {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let e3 = if n > 0.0 { [axis[0] / n, axis[1] / n, axis[2] / n] } else { [0.0, 0.0, 1.0] };
    if (e3[2] - 1.0).abs() < 1e-15 {
        return [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    }
    let helper = if e3[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = normalize(cross(helper, e3));
    let e2 = cross(e3, e1);
    [e1, e2, e3]
}

pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = norm(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

pub fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}
