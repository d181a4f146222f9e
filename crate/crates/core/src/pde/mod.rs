//! 2-D elliptic discretizations on the unit square and the unit disk.
//!
//! The square uses a vertex-centered finite-volume five-point scheme (the
//! stiffness of the scheme is symmetric and linear in the coefficient); the
//! disk uses P1 finite elements on a polar mesh. Both carry an ordered
//! boundary walk with trapezoidal quadrature weights, pure-Neumann solves
//! with the zero-boundary-average gauge for the conductivity problem, trace
//! readouts, orthonormal boundary current bases, Neumann-to-Dirichlet
//! matrices and the transform pair linking conductivities to Schrödinger
//! potentials.

mod basis;
mod grid;
mod liouville;
mod sparse;
mod system;

pub use basis::BoundaryCurrentBasis;
pub use grid::{Grid2D, GridShape};
pub use liouville::{liouville_forward, liouville_inverse, poly_bump, poly_bump_laplacian};
pub use sparse::CsrMatrix;
pub use system::{
    assemble, ntd_matrix, stiffness_apply, stiffness_coeff_gradient, CoefficientKind,
    EllipticSystem, Gauge,
};

use nalgebra::DVector;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

/// Errors from discretization and solving.
#[derive(Debug, Error)]
pub enum PdeError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("coefficient not admissible: {0}")]
    Admissibility(String),
    #[error("boundary current incompatible: weighted mean {0:.3e} exceeds tolerance")]
    IncompatibleCurrent(f64),
    #[error("linear solve failed: {0}")]
    SolveFailure(String),
    #[error("shifted system is not positive definite (interior eigenvalue collision)")]
    EigenvalueCollision,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad field file: {0}")]
    BadFieldFile(String),
}

/// Nodal scalar field on a grid.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid2D>,
    values: DVector<f64>,
}

impl Field {
    pub fn new(grid: Arc<Grid2D>, values: DVector<f64>) -> Result<Self, PdeError> {
        if values.len() != grid.num_nodes() {
            return Err(PdeError::DimensionMismatch {
                expected: grid.num_nodes(),
                got: values.len(),
            });
        }
        Ok(Field { grid, values })
    }

    pub fn constant(grid: Arc<Grid2D>, value: f64) -> Self {
        let n = grid.num_nodes();
        Field { grid, values: DVector::from_element(n, value) }
    }

    /// Builds a field by evaluating `f` at every node.
    pub fn from_fn(grid: Arc<Grid2D>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = DVector::from_fn(grid.num_nodes(), |i, _| {
            let (x, y) = grid.coords(i);
            f(x, y)
        });
        Field { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut DVector<f64> {
        &mut self.values
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }

    /// Relative L² distance to another field on the same grid, using the
    /// lumped mass weights.
    pub fn rel_l2_distance(&self, other: &Field) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..self.values.len() {
            let v = self.grid.volume(i);
            num += v * (self.values[i] - other.values[i]).powi(2);
            den += v * other.values[i].powi(2);
        }
        (num / den.max(1e-300)).sqrt()
    }

    /// Writes the field as `node,x,y,value` CSV rows (with header).
    pub fn write_csv(&self, path: &Path) -> Result<(), PdeError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "node,x,y,value")?;
        for i in 0..self.values.len() {
            let (x, y) = self.grid.coords(i);
            writeln!(f, "{i},{x:.17e},{y:.17e},{:.17e}", self.values[i])?;
        }
        Ok(())
    }

    /// Reads a field written by [`Field::write_csv`] back onto `grid`.
    pub fn read_csv(grid: Arc<Grid2D>, path: &Path) -> Result<Self, PdeError> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut values = DVector::zeros(grid.num_nodes());
        let mut seen = 0usize;
        for (lineno, line) in f.lines().enumerate() {
            let line = line?;
            if lineno == 0 {
                continue; // header
            }
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 4 {
                return Err(PdeError::BadFieldFile(format!("line {}: expected 4 columns", lineno + 1)));
            }
            let idx: usize = parts[0]
                .parse()
                .map_err(|_| PdeError::BadFieldFile(format!("line {}: bad node index", lineno + 1)))?;
            let v: f64 = parts[3]
                .parse()
                .map_err(|_| PdeError::BadFieldFile(format!("line {}: bad value", lineno + 1)))?;
            if idx >= values.len() {
                return Err(PdeError::BadFieldFile(format!("node index {idx} out of range")));
            }
            values[idx] = v;
            seen += 1;
        }
        if seen != values.len() {
            return Err(PdeError::BadFieldFile(format!(
                "expected {} rows, found {seen}",
                values.len()
            )));
        }
        Field::new(grid, values)
    }
}

/// Restriction of nodal values to the ordered boundary walk.
pub fn dirichlet_trace(u: &Field) -> DVector<f64> {
    let walk = u.grid().boundary_nodes();
    DVector::from_fn(walk.len(), |i, _| u.values()[walk[i]])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_of_constant_field_is_constant() {
        let grid = Arc::new(Grid2D::new_square(9).unwrap());
        let f = Field::constant(grid.clone(), 3.25);
        let tr = dirichlet_trace(&f);
        assert_eq!(tr.len(), grid.boundary_nodes().len());
        assert!(tr.iter().all(|&v| v == 3.25));
    }

    #[test]
    fn disk_trace_of_radial_cosine() {
        // u = r cos(theta) restricted to the boundary r = 1 gives cos(theta).
        let grid = Arc::new(Grid2D::new_disk(6, 24).unwrap());
        let f = Field::from_fn(grid.clone(), |x, _| x);
        let tr = dirichlet_trace(&f);
        for (k, &node) in grid.boundary_nodes().iter().enumerate() {
            let (x, _) = grid.coords(node);
            assert!((tr[k] - x).abs() < 1e-14);
        }
    }

    #[test]
    fn field_csv_roundtrip() {
        let grid = Arc::new(Grid2D::new_square(5).unwrap());
        let f = Field::from_fn(grid.clone(), |x, y| x * y + 0.5);
        let dir = std::env::temp_dir().join("rangereg_field_csv_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("field.csv");
        f.write_csv(&path).unwrap();
        let back = Field::read_csv(grid, &path).unwrap();
        assert_eq!(f.values(), back.values());
    }
}
