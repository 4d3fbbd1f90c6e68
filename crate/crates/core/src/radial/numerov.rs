//! Matrix Numerov on `y'' = u y` in the variable `z = (I − h²u/12) y`,
//! `z_{n+1} = 12 y_n − 10 z_n − z_{n−1}`, marched in summed form.

use crate::error::{DwmsError, Result};
use crate::linalg::RMat;

use super::grid::RadialGrid;
use super::potmat::CoupledPotentialMatrix;

/// Working channel set: the full `(l, m)` set, or one channel per `l` when the
/// field is spherical.
#[derive(Clone, Debug)]
pub(crate) struct Problem<'a> {
    pub pm: &'a CoupledPotentialMatrix,
    pub e_eff: f64,
    pub reduced: bool,
    pub ls: Vec<usize>,
}

impl<'a> Problem<'a> {
    pub fn new(pm: &'a CoupledPotentialMatrix, e_eff: f64) -> Self {
        let trunc = pm.truncation();
        let reduced = pm.is_spherical();
        let ls = if reduced { (0..=trunc.l_max).collect() } else { trunc.l_values() };
        Self { pm, e_eff, reduced, ls }
    }

    pub fn n(&self) -> usize {
        self.ls.len()
    }

    pub fn grid(&self) -> &RadialGrid {
        self.pm.grid()
    }

    /// `u = w + l(l+1)/r² − E`; zero placeholder at `r = 0`.
    pub fn u(&self, node: usize) -> RMat {
        let n = self.n();
        let r = self.grid().r(node);
        if r == 0.0 {
            return RMat::zeros(n, n);
        }
        let mut u = if self.reduced {
            RMat::from_diagonal_element(n, n, self.pm.w_monopole(node))
        } else {
            self.pm.w(node)
        };
        for (a, l) in self.ls.iter().enumerate() {
            u[(a, a)] += (l * (l + 1)) as f64 / (r * r) - self.e_eff;
        }
        u
    }
}

pub(crate) struct Segment {
    pub nodes: Vec<usize>,
    /// Signed step in the direction of travel.
    pub h: f64,
}

pub(crate) enum Start {
    /// `y_0 = 0`, `y_1 = I` at `r = 0, h`.
    Origin,
    /// Values at the first two nodes and the derivative at the first.
    Seeds { y0: RMat, y1: RMat, dy0: RMat },
}

/// Values and derivatives of `y` on the visited nodes, in visiting order.
pub(crate) struct March {
    pub nodes: Vec<usize>,
    pub y: Vec<RMat>,
    pub dy: Vec<RMat>,
}

const RESCALE_ABOVE: f64 = 1e100;

fn t_matrix(u: &RMat, h: f64) -> RMat {
    let n = u.nrows();
    RMat::identity(n, n) - u * (h * h / 12.0)
}

fn solve(t: &RMat, z: &RMat) -> Result<RMat> {
    t.clone()
        .lu()
        .solve(z)
        .ok_or_else(|| DwmsError::Singular { context: "Numerov step matrix".into(), cond: f64::INFINITY })
}

/// Outward segments from the origin to the last node.
pub(crate) fn outward_segments(grid: &RadialGrid, last: usize) -> Vec<Segment> {
    let mut segs = Vec::new();
    for c in grid.chunks() {
        if c.first > last {
            break;
        }
        let end = c.last().min(last.max(c.first + 3));
        segs.push(Segment { nodes: (c.first..=end).collect(), h: c.h });
    }
    segs
}

/// Inward segments from the outermost node down to (at most) `stop`; the final
/// segment keeps at least four nodes.
pub(crate) fn inward_segments(grid: &RadialGrid, stop: usize) -> Vec<Segment> {
    let mut segs = Vec::new();
    for c in grid.chunks().iter().rev() {
        if c.last() < stop {
            break;
        }
        let lo = stop.max(c.first).min(c.last().saturating_sub(3)).max(c.first);
        segs.push(Segment { nodes: (lo..=c.last()).rev().collect(), h: -c.h });
        if lo <= stop {
            break;
        }
    }
    segs
}

/// Marches across `segs`, storing only nodes `≤ keep_max`. Per-node matrices
/// live in a sliding window so memory scales with the stored range.
pub(crate) fn march(prob: &Problem, segs: &[Segment], start: Start, ncols: usize, keep_max: usize) -> Result<March> {
    let n = prob.n();
    let mut out = March { nodes: Vec::new(), y: Vec::new(), dy: Vec::new() };
    let mut carry: Option<(RMat, RMat)> = None;
    let mut start = Some(start);
    for seg in segs {
        let m = seg.nodes.len();
        let h = seg.h;
        let mut win = Window::new(prob, seg, ncols);
        let dy0: RMat;
        let (z0, z1);
        match (start.take(), carry.take()) {
            (Some(Start::Origin), _) => {
                let grid = prob.grid();
                let r1 = grid.r(seg.nodes[1]);
                let r2 = grid.r(seg.nodes[2]);
                let w1 = win.u(1)[(0, 0)] + prob.e_eff;
                let w2 = win.u(2)[(0, 0)] + prob.e_eff;
                let coulomb = 2.0 * r1 * w1 - r2 * w2;
                let y1 = RMat::identity(n, ncols);
                let mut z0m = RMat::zeros(n, ncols);
                let slope0 = 1.0 / (h * (1.0 + coulomb * h / 2.0));
                z0m[(0, 0)] = -(h * h / 12.0) * coulomb * slope0;
                // l = 1 channels: y ≈ a r², u y → 2a at the origin
                for (a, l) in prob.ls.iter().enumerate() {
                    if *l == 1 && a < ncols {
                        z0m[(a, a)] = -1.0 / 6.0;
                    }
                }
                // Least-norm correction making z0ᵀz1 symmetric, so the discrete
                // Wronskian of the regular solution with itself is exactly zero.
                let z1m = t_matrix(&win.u(1), h) * &y1;
                let cross = z0m.transpose() * &z1m;
                let anti = (&cross - cross.transpose()) * 0.5;
                let gram = z1m.transpose() * &z1m;
                if let Some(g) = gram.lu().solve(&anti.transpose()) {
                    z0m -= &z1m * g;
                }
                let mut d = RMat::zeros(n, ncols);
                d[(0, 0)] = slope0;
                dy0 = d;
                win.set_y(0, RMat::zeros(n, ncols));
                win.set_y(1, y1);
                z0 = z0m;
                z1 = z1m;
            }
            (Some(Start::Seeds { y0, y1, dy0: d0 }), _) => {
                z0 = t_matrix(&win.u(0), h) * &y0;
                z1 = t_matrix(&win.u(1), h) * &y1;
                win.set_y(0, y0);
                win.set_y(1, y1);
                dy0 = d0;
            }
            (None, Some((ya, dya))) => {
                if m < 4 {
                    return Err(DwmsError::Config("restart segment shorter than four nodes".into()));
                }
                let (u0, u1, u2, u3) = (win.u(0), win.u(1), win.u(2), win.u(3));
                let du = (&u0 * -3.0 + &u1 * 4.0 - &u2) / (2.0 * h);
                let d2u = (&u0 * 2.0 - &u1 * 5.0 + &u2 * 4.0 - &u3) / (h * h);
                let u0y = &u0 * &ya;
                let y1 = &ya
                    + &dya * h
                    + &u0y * (h * h / 2.0)
                    + (&du * &ya + &u0 * &dya) * (h.powi(3) / 6.0)
                    + (&d2u * &ya + &du * &dya * 2.0 + &u0 * &u0y) * (h.powi(4) / 24.0);
                z0 = t_matrix(&u0, h) * &ya;
                z1 = t_matrix(&u1, h) * &y1;
                win.set_y(0, ya);
                win.set_y(1, y1);
                dy0 = dya;
            }
            (None, None) => unreachable!("segments after the first always carry state"),
        }
        let emit = |node: usize, y: &RMat, dy: RMat, out: &mut March| {
            if node <= keep_max {
                out.nodes.push(node);
                out.y.push(y.clone());
                out.dy.push(dy);
            }
        };
        emit(seg.nodes[0], win.y(0), dy0, &mut out);
        // summed form Δz_k = Δz_{k−1} + h² u_k y_k keeps roundoff out of the
        // conserved Wronskian
        let mut dz = &z1 - &z0;
        let mut z = z1;
        for k in 1..m - 1 {
            dz += win.dd(k) * (h * h);
            z += &dz;
            let yn = solve(&t_matrix(&win.u(k + 1), h), &z)?;
            let big = yn.abs().max();
            win.set_y(k + 1, yn);
            if big > RESCALE_ABOVE {
                let s = win.rescale(k + 1);
                for (c, sc) in s.iter().enumerate() {
                    dz.column_mut(c).scale_mut(*sc);
                    z.column_mut(c).scale_mut(*sc);
                    for v in out.y.iter_mut().chain(out.dy.iter_mut()) {
                        v.column_mut(c).scale_mut(*sc);
                    }
                }
            }
            // derivative at k − 1 now has all its neighbours
            if k >= 2 {
                let j = k - 1;
                let d = win.central_derivative(j, m);
                emit(seg.nodes[j], win.y(j), d, &mut out);
                if j >= 2 {
                    win.release(j - 2);
                }
            }
        }
        for j in (m - 2).max(1)..m - 1 {
            let d = win.central_derivative(j, m);
            emit(seg.nodes[j], win.y(j), d, &mut out);
        }
        let e = m - 1;
        let back = (win.y(e) - win.y(e - 1)) / h + (win.dd(e) * 7.0 + win.dd(e - 1) * 6.0 - win.dd(e.saturating_sub(2))) * (h / 24.0);
        carry = Some((win.y(e).clone(), back.clone()));
        emit(seg.nodes[e], win.y(e), back, &mut out);
    }
    Ok(out)
}

/// Values, `u` and `u y` for the live nodes of one segment.
struct Window<'a, 'p> {
    prob: &'a Problem<'p>,
    seg: &'a Segment,
    y: Vec<Option<RMat>>,
    u: Vec<Option<RMat>>,
    dd: Vec<Option<RMat>>,
    ncols: usize,
}

impl<'a, 'p> Window<'a, 'p> {
    fn new(prob: &'a Problem<'p>, seg: &'a Segment, ncols: usize) -> Self {
        let m = seg.nodes.len();
        Self { prob, seg, y: vec![None; m], u: vec![None; m], dd: vec![None; m], ncols }
    }

    fn u(&mut self, k: usize) -> RMat {
        if self.u[k].is_none() {
            self.u[k] = Some(self.prob.u(self.seg.nodes[k]));
        }
        self.u[k].clone().expect("filled")
    }

    fn set_y(&mut self, k: usize, y: RMat) {
        self.y[k] = Some(y);
        self.dd[k] = None;
    }

    fn y(&self, k: usize) -> &RMat {
        self.y[k].as_ref().expect("live node")
    }

    fn dd(&mut self, k: usize) -> RMat {
        if self.dd[k].is_none() {
            let u = self.u(k);
            self.dd[k] = Some(u * self.y(k));
        }
        self.dd[k].clone().expect("filled")
    }

    /// Sixth-order derivative inside the segment, fourth order next to its ends.
    fn central_derivative(&mut self, k: usize, m: usize) -> RMat {
        let h = self.seg.h;
        let central = (self.y(k + 1) - self.y(k - 1)) / (2.0 * h);
        let e1 = (self.dd(k + 1) - self.dd(k - 1)) / (2.0 * h);
        if k >= 2 && k + 2 < m {
            // y' = D1 − h²(37 E1 − 7 E2)/180 + O(h⁶)
            let e2 = (self.dd(k + 2) - self.dd(k - 2)) / (4.0 * h);
            central - (e1 * 37.0 - e2 * 7.0) * (h * h / 180.0)
        } else {
            central - e1 * (h * h / 6.0)
        }
    }

    fn release(&mut self, k: usize) {
        if k + 1 < self.y.len() - 1 {
            self.y[k] = None;
            self.u[k] = None;
            self.dd[k] = None;
        }
    }

    /// Scales columns so node `k` has unit column maxima; returns the factors.
    fn rescale(&mut self, k: usize) -> Vec<f64> {
        let last = self.y(k);
        let s: Vec<f64> = (0..self.ncols)
            .map(|c| {
                let mx = last.column(c).abs().max();
                if mx > 0.0 { 1.0 / mx } else { 1.0 }
            })
            .collect();
        for v in self.y.iter_mut().chain(self.dd.iter_mut()).flatten() {
            for (c, sc) in s.iter().enumerate() {
                v.column_mut(c).scale_mut(*sc);
            }
        }
        s
    }
}

/// Discrete Wronskian `z_aᵀ(n) z_b(n+1) − z_aᵀ(n+1) z_b(n)` over the interval
/// starting at `node`, divided by its width. Exactly conserved along a chunk and
/// equal to `yᵀ_a y'_b − y'ᵀ_a y_b` up to `O(h⁴)`.
pub(crate) fn discrete_wronskian(
    prob: &Problem,
    node: usize,
    ya: (&RMat, &RMat),
    yb: (&RMat, &RMat),
) -> RMat {
    let grid = prob.grid();
    let h = grid.r(node + 1) - grid.r(node);
    let t0 = t_matrix(&prob.u(node), h);
    let t1 = t_matrix(&prob.u(node + 1), h);
    let za0 = &t0 * ya.0;
    let za1 = &t1 * ya.1;
    let zb0 = &t0 * yb.0;
    let zb1 = &t1 * yb.1;
    (za0.transpose() * zb1 - za1.transpose() * zb0) / h
}
