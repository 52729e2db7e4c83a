//! Translation lattices in the plane and sampling domains.

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Lattice `{k xi + m nu : k, m integers}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub xi: [f64; 2],
    pub nu: [f64; 2],
}

impl Lattice {
    pub fn new(xi: [f64; 2], nu: [f64; 2]) -> Result<Self, GeometryError> {
        let det = xi[0] * nu[1] - xi[1] * nu[0];
        if !(det.abs() > 1e-12) {
            return Err(GeometryError::InvalidLattice { det });
        }
        Ok(Self { xi, nu })
    }

    pub fn unit_square() -> Self {
        Self { xi: [1.0, 0.0], nu: [0.0, 1.0] }
    }

    pub fn det(&self) -> f64 {
        self.xi[0] * self.nu[1] - self.xi[1] * self.nu[0]
    }

    /// Coordinates `(s, t)` with `p = s xi + t nu`.
    pub fn to_lattice_coords(&self, p: [f64; 2]) -> [f64; 2] {
        let d = self.det();
        [
            (p[0] * self.nu[1] - p[1] * self.nu[0]) / d,
            (self.xi[0] * p[1] - self.xi[1] * p[0]) / d,
        ]
    }

    pub fn from_lattice_coords(&self, st: [f64; 2]) -> [f64; 2] {
        [
            st[0] * self.xi[0] + st[1] * self.nu[0],
            st[0] * self.xi[1] + st[1] * self.nu[1],
        ]
    }

    /// Representative of `p` in the fundamental parallelogram `[0,1)xi + [0,1)nu`.
    pub fn reduce(&self, p: [f64; 2]) -> [f64; 2] {
        let [s, t] = self.to_lattice_coords(p);
        let wrap = |u: f64| {
            let r = u - u.floor();
            if r >= 1.0 {
                0.0
            } else {
                r
            }
        };
        self.from_lattice_coords([wrap(s), wrap(t)])
    }
}

/// Region used for grid sweeps and random sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Domain {
    /// Fundamental parallelogram of a lattice.
    Cell { lattice: Lattice },
    /// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
    Rect { x0: f64, x1: f64, y0: f64, y1: f64 },
}

impl Domain {
    pub fn rect(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Domain::Rect { x0, x1, y0, y1 }
    }

    /// Map unit-square coordinates `(s, t)` into the domain.
    pub fn point(&self, s: f64, t: f64) -> [f64; 2] {
        match self {
            Domain::Cell { lattice } => lattice.from_lattice_coords([s, t]),
            Domain::Rect { x0, x1, y0, y1 } => [x0 + s * (x1 - x0), y0 + t * (y1 - y0)],
        }
    }

    /// Cell-centred `n x n` grid, row-major in `t` then `s`.
    pub fn grid(&self, n: usize) -> Vec<[f64; 2]> {
        let mut pts = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let s = (i as f64 + 0.5) / n as f64;
                let t = (j as f64 + 0.5) / n as f64;
                pts.push(self.point(s, t));
            }
        }
        pts
    }

    pub fn area(&self) -> f64 {
        match self {
            Domain::Cell { lattice } => lattice.det().abs(),
            Domain::Rect { x0, x1, y0, y1 } => (x1 - x0).abs() * (y1 - y0).abs(),
        }
    }
}
