use serde::{Deserialize, Serialize};

use crate::error::{DwmsError, Result};

/// Grid construction parameters.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GridSpec {
    /// Largest allowed step (bohr).
    pub h_max: f64,
    /// Radii that must be nodes; integration continues through them smoothly
    /// when the step allows.
    pub knots: Vec<f64>,
    /// Radii where the potential jumps; integration restarts there.
    pub jumps: Vec<f64>,
    /// Minimum outer radius; rounded up to a whole step.
    pub r_out: f64,
}

/// A run of equally spaced nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Chunk {
    pub r0: f64,
    pub h: f64,
    pub n_steps: usize,
    /// Flat index of the first node.
    pub first: usize,
}

impl Chunk {
    pub fn last(&self) -> usize {
        self.first + self.n_steps
    }

    pub fn r_end(&self) -> f64 {
        self.r0 + self.h * self.n_steps as f64
    }
}

/// Piecewise-uniform radial grid from `r = 0`. Neighbouring chunks share their
/// boundary radius but hold separate nodes for it, so one-sided quantities
/// (potential jumps, restarted derivatives) live on distinct nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    chunks: Vec<Chunk>,
    r: Vec<f64>,
    chunk_of: Vec<usize>,
}

const MIN_STEPS: usize = 4;

impl RadialGrid {
    pub fn build(spec: &GridSpec) -> Result<Self> {
        if !(spec.h_max > 0.0) || !(spec.r_out > 0.0) {
            return Err(DwmsError::Config(format!("invalid grid: h_max = {}, r_out = {}", spec.h_max, spec.r_out)));
        }
        let mut marks: Vec<(f64, bool)> = spec
            .knots
            .iter()
            .map(|r| (*r, false))
            .chain(spec.jumps.iter().map(|r| (*r, true)))
            .filter(|(r, _)| *r > 0.0 && *r < spec.r_out)
            .collect();
        marks.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite radii"));
        // merge coincident marks, a jump wins
        let mut merged: Vec<(f64, bool)> = Vec::new();
        for (r, j) in marks {
            match merged.last_mut() {
                Some(last) if (r - last.0).abs() < 1e-10 * r.max(1.0) => last.1 |= j,
                _ => merged.push((r, j)),
            }
        }
        let mut chunks: Vec<Chunk> = Vec::new();
        let mut start = 0.0;
        let mut restart = true;
        let n_marks = merged.len();
        for (k, (end, is_jump)) in merged.into_iter().chain(std::iter::once((spec.r_out, false))).enumerate() {
            let len = end - start;
            let is_last = k == n_marks;
            let extend = !restart && chunks.last().is_some();
            if extend {
                let c = chunks.last_mut().expect("checked");
                let n = len / c.h;
                let whole = (n - n.round()).abs() < 1e-9 * n.max(1.0);
                if (whole && n.round() >= 1.0) || is_last {
                    let steps = if is_last { n.ceil().max(1.0) as usize } else { n.round() as usize };
                    c.n_steps += steps;
                    start = c.r_end();
                    restart = is_jump;
                    continue;
                }
            }
            let first = chunks.last().map(|c| c.last() + 1).unwrap_or(0);
            let n = ((len / spec.h_max).ceil() as usize).max(MIN_STEPS);
            chunks.push(Chunk { r0: start, h: len / n as f64, n_steps: n, first });
            start = end;
            restart = is_jump;
        }
        let mut r = Vec::new();
        let mut chunk_of = Vec::new();
        for (ci, c) in chunks.iter().enumerate() {
            for i in 0..=c.n_steps {
                r.push(if i == c.n_steps { c.r_end() } else { c.r0 + c.h * i as f64 });
                chunk_of.push(ci);
            }
        }
        Ok(Self { chunks, r, chunk_of })
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn r(&self, node: usize) -> f64 {
        self.r[node]
    }

    pub fn chunk_of(&self, node: usize) -> usize {
        self.chunk_of[node]
    }

    pub fn r_max(&self) -> f64 {
        *self.r.last().expect("non-empty grid")
    }

    pub fn last_node(&self) -> usize {
        self.r.len() - 1
    }

    /// True if `node` and its successor in the same chunk are an interval.
    pub fn is_interval(&self, node: usize) -> bool {
        node + 1 < self.r.len() && self.chunk_of[node] == self.chunk_of[node + 1]
    }

    /// Interval `(chunk, first node)` containing `r`; the lower chunk is chosen at
    /// a shared boundary.
    pub fn locate(&self, r: f64) -> Option<(usize, usize)> {
        for (ci, c) in self.chunks.iter().enumerate() {
            let tol = 1e-12 * c.r_end().max(1.0);
            if r >= c.r0 - tol && r <= c.r_end() + tol {
                let i = (((r - c.r0) / c.h + 1e-9).floor().max(0.0) as usize).min(c.n_steps - 1);
                return Some((ci, c.first + i));
            }
        }
        None
    }

    /// Node at radius `r` (within rounding), preferring the lower chunk.
    pub fn node_at(&self, r: f64) -> Option<usize> {
        self.r.iter().position(|x| (x - r).abs() <= 1e-10 * r.max(1.0))
    }

    /// Highest node index with radius ≤ `r` in the lowest chunk that reaches `r`.
    pub fn node_below(&self, r: f64) -> usize {
        match self.locate(r) {
            Some((_, n)) => n,
            None => self.last_node(),
        }
    }
}
