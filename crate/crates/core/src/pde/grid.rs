//! Grid geometry: the unit square `[0,1]²` with a tensor product of `n`
//! nodes per side, and the unit disk meshed by `nr` rings of `na` nodes
//! around a center node. Both expose node coordinates, lumped volumes, an
//! ordered boundary walk with trapezoidal quadrature weights and an
//! arc-length parameterization of the perimeter.

use serde::{Deserialize, Serialize};

use super::PdeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum GridShape {
    Square { n: usize },
    Disk { nr: usize, na: usize },
}

#[derive(Debug)]
pub struct Grid2D {
    shape: GridShape,
    coords: Vec<(f64, f64)>,
    /// Lumped control volume / mass per node.
    volumes: Vec<f64>,
    /// Ordered boundary walk (counterclockwise).
    boundary: Vec<usize>,
    /// Quadrature weight per boundary-walk entry.
    boundary_weights: Vec<f64>,
    /// Arc-length parameter of each boundary-walk entry.
    boundary_arclen: Vec<f64>,
    perimeter: f64,
    /// Mesh width: `1/(n-1)` on the square, `1/nr` on the disk.
    h: f64,
    /// Finite-volume edges `(i, j, transmissibility)`; square only.
    edges: Vec<(usize, usize, f64)>,
    /// P1 triangles; disk only.
    triangles: Vec<[usize; 3]>,
}

impl Grid2D {
    /// Tensor grid on the unit square with `n ≥ 4` nodes per side.
    pub fn new_square(n: usize) -> Result<Self, PdeError> {
        if n < 4 {
            return Err(PdeError::InvalidGrid(format!("square grid needs n >= 4, got {n}")));
        }
        let h = 1.0 / (n - 1) as f64;
        let idx = |ix: usize, iy: usize| ix + iy * n;
        let mut coords = Vec::with_capacity(n * n);
        let mut volumes = Vec::with_capacity(n * n);
        for iy in 0..n {
            for ix in 0..n {
                coords.push((ix as f64 * h, iy as f64 * h));
                let wx = if ix == 0 || ix == n - 1 { 0.5 } else { 1.0 };
                let wy = if iy == 0 || iy == n - 1 { 0.5 } else { 1.0 };
                volumes.push(h * h * wx * wy);
            }
        }
        // Finite-volume edges with face-length over distance transmissibility.
        let mut edges = Vec::new();
        for iy in 0..n {
            for ix in 0..n - 1 {
                let face = if iy == 0 || iy == n - 1 { 0.5 } else { 1.0 };
                edges.push((idx(ix, iy), idx(ix + 1, iy), face));
            }
        }
        for ix in 0..n {
            for iy in 0..n - 1 {
                let face = if ix == 0 || ix == n - 1 { 0.5 } else { 1.0 };
                edges.push((idx(ix, iy), idx(ix, iy + 1), face));
            }
        }
        // Counterclockwise boundary walk from the origin corner.
        let mut boundary = Vec::with_capacity(4 * (n - 1));
        for ix in 0..n - 1 {
            boundary.push(idx(ix, 0));
        }
        for iy in 0..n - 1 {
            boundary.push(idx(n - 1, iy));
        }
        for ix in (1..n).rev() {
            boundary.push(idx(ix, n - 1));
        }
        for iy in (1..n).rev() {
            boundary.push(idx(0, iy));
        }
        let boundary_weights = vec![h; boundary.len()];
        let boundary_arclen = (0..boundary.len()).map(|k| k as f64 * h).collect();
        Ok(Grid2D {
            shape: GridShape::Square { n },
            coords,
            volumes,
            boundary,
            boundary_weights,
            boundary_arclen,
            perimeter: 4.0,
            h,
            edges,
            triangles: Vec::new(),
        })
    }

    /// Polar mesh of the unit disk: a center node plus `nr` rings of `na`
    /// nodes, triangulated by a center fan and split quads.
    pub fn new_disk(nr: usize, na: usize) -> Result<Self, PdeError> {
        if nr < 2 || na < 8 {
            return Err(PdeError::InvalidGrid(format!(
                "disk grid needs nr >= 2 and na >= 8, got nr={nr}, na={na}"
            )));
        }
        let ring = |k: usize, j: usize| 1 + (k - 1) * na + (j % na);
        let mut coords = vec![(0.0, 0.0)];
        for k in 1..=nr {
            let r = k as f64 / nr as f64;
            for j in 0..na {
                let th = 2.0 * std::f64::consts::PI * j as f64 / na as f64;
                coords.push((r * th.cos(), r * th.sin()));
            }
        }
        let mut triangles = Vec::new();
        for j in 0..na {
            triangles.push([0, ring(1, j), ring(1, j + 1)]);
        }
        for k in 1..nr {
            for j in 0..na {
                let a = ring(k, j);
                let b = ring(k, j + 1);
                let c = ring(k + 1, j + 1);
                let d = ring(k + 1, j);
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        // Lumped mass: a third of each incident triangle area.
        let mut volumes = vec![0.0; coords.len()];
        for t in &triangles {
            let area = triangle_area(coords[t[0]], coords[t[1]], coords[t[2]]);
            for &v in t {
                volumes[v] += area / 3.0;
            }
        }
        // Boundary: the outermost ring, counterclockwise; trapezoidal weights
        // on the polygonal perimeter (uniform chords).
        let chord = 2.0 * (std::f64::consts::PI / na as f64).sin();
        let boundary: Vec<usize> = (0..na).map(|j| ring(nr, j)).collect();
        let boundary_weights = vec![chord; na];
        let boundary_arclen = (0..na).map(|j| j as f64 * chord).collect();
        Ok(Grid2D {
            shape: GridShape::Disk { nr, na },
            coords,
            volumes,
            boundary,
            boundary_weights,
            boundary_arclen,
            perimeter: na as f64 * chord,
            h: 1.0 / nr as f64,
            edges: Vec::new(),
            triangles,
        })
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self, i: usize) -> (f64, f64) {
        self.coords[i]
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn volume(&self, i: usize) -> f64 {
        self.volumes[i]
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    pub fn boundary_weights(&self) -> &[f64] {
        &self.boundary_weights
    }

    /// Arc-length parameter of the boundary walk.
    pub fn boundary_arclen(&self) -> &[f64] {
        &self.boundary_arclen
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    pub(super) fn fv_edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub(super) fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Geometric center used for bump placement and ball masks.
    pub fn center(&self) -> (f64, f64) {
        match self.shape {
            GridShape::Square { .. } => (0.5, 0.5),
            GridShape::Disk { .. } => (0.0, 0.0),
        }
    }

    /// Side length of the square grid in nodes, if applicable.
    pub fn square_n(&self) -> Option<usize> {
        match self.shape {
            GridShape::Square { n } => Some(n),
            GridShape::Disk { .. } => None,
        }
    }

    /// Weighted boundary mean `Σ w_i v_{b_i}` of a nodal vector.
    pub fn boundary_weighted_sum(&self, nodal: &nalgebra::DVector<f64>) -> f64 {
        self.boundary
            .iter()
            .zip(&self.boundary_weights)
            .map(|(&b, &w)| w * nodal[b])
            .sum()
    }
}

pub(super) fn triangle_area(p1: (f64, f64), p2: (f64, f64), p3: (f64, f64)) -> f64 {
    0.5 * ((p2.0 - p1.0) * (p3.1 - p1.1) - (p3.0 - p1.0) * (p2.1 - p1.1)).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_boundary_weights_sum_to_perimeter() {
        let g = Grid2D::new_square(17).unwrap();
        let total: f64 = g.boundary_weights().iter().sum();
        assert!((total - 4.0).abs() < 1e-12);
        assert_eq!(g.boundary_nodes().len(), 4 * 16);
    }

    #[test]
    fn square_volumes_tile_the_domain() {
        let g = Grid2D::new_square(9).unwrap();
        let total: f64 = g.volumes().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disk_weights_sum_to_perimeter_within_h2() {
        for (nr, na) in [(8usize, 32usize), (16, 64)] {
            let g = Grid2D::new_disk(nr, na).unwrap();
            let total: f64 = g.boundary_weights().iter().sum();
            let err = (total - 2.0 * std::f64::consts::PI).abs();
            let h = 2.0 * std::f64::consts::PI / na as f64;
            assert!(err < 2.0 * h * h, "perimeter defect {err} vs h^2 {}", h * h);
        }
    }

    #[test]
    fn disk_volumes_tile_the_polygon() {
        let g = Grid2D::new_disk(8, 32).unwrap();
        let total: f64 = g.volumes().iter().sum();
        // Polygon area na*sin(2pi/na)/2... computed per ring; just check it
        // approaches pi from below at O(h^2).
        assert!(total < std::f64::consts::PI);
        assert!((total - std::f64::consts::PI).abs() < 0.03);
    }

    #[test]
    fn square_walk_is_closed_and_distinct() {
        let g = Grid2D::new_square(6).unwrap();
        let mut seen = std::collections::HashSet::new();
        for &b in g.boundary_nodes() {
            assert!(seen.insert(b), "duplicate boundary node");
            let (x, y) = g.coords(b);
            assert!(x == 0.0 || x == 1.0 || y == 0.0 || y == 1.0);
        }
    }
}
