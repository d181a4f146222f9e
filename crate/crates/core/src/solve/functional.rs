//! Quadratic regularization functionals `x ↦ xᵀ S x` with block-diagonal
//! symmetric positive semidefinite `S`. The discrete Sobolev form of order
//! `s` is `S = M^{1/2} (I + M^{-1/2} L M^{-1/2})^s M^{1/2}` with `L` the
//! pure-Neumann stiffness and `M` the lumped mass, built once per grid via
//! a dense symmetric eigendecomposition.
//!
//! Coordinates not covered by any block contribute nothing (the functional
//! is flat there). The Bregman distance of a quadratic is exactly the
//! value at the difference.

use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

use crate::pde::{assemble, CoefficientKind, Field, Grid2D, PdeError};

#[derive(Clone)]
enum Block {
    Identity { offset: usize, len: usize, scale: f64 },
    Dense { offset: usize, matrix: DMatrix<f64> },
}

/// Block-diagonal quadratic form.
#[derive(Clone)]
pub struct QuadFunctional {
    dim: usize,
    blocks: Vec<Block>,
}

impl QuadFunctional {
    /// Plain squared Euclidean norm on all `dim` coordinates.
    pub fn euclidean(dim: usize) -> Self {
        QuadFunctional {
            dim,
            blocks: vec![Block::Identity { offset: 0, len: dim, scale: 1.0 }],
        }
    }

    /// A functional that is identically zero (flat in every direction).
    pub fn zero(dim: usize) -> Self {
        QuadFunctional { dim, blocks: Vec::new() }
    }

    /// Starts an empty functional for incremental block construction.
    pub fn builder(dim: usize) -> Self {
        Self::zero(dim)
    }

    pub fn with_identity(mut self, offset: usize, len: usize, scale: f64) -> Self {
        assert!(offset + len <= self.dim);
        self.blocks.push(Block::Identity { offset, len, scale });
        self
    }

    /// Adds the discrete Sobolev form of the given order on the coordinate
    /// range holding one nodal field.
    pub fn with_sobolev(
        mut self,
        grid: &Arc<Grid2D>,
        order: f64,
        offset: usize,
    ) -> Result<Self, PdeError> {
        let m = sobolev_matrix(grid, order)?;
        assert!(offset + grid.num_nodes() <= self.dim);
        self.blocks.push(Block::Dense { offset, matrix: m });
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `S x`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.dim);
        for b in &self.blocks {
            match b {
                Block::Identity { offset, len, scale } => {
                    for i in *offset..offset + len {
                        y[i] += scale * x[i];
                    }
                }
                Block::Dense { offset, matrix } => {
                    let seg = x.rows(*offset, matrix.nrows()).into_owned();
                    let prod = matrix * seg;
                    for (k, v) in prod.iter().enumerate() {
                        y[offset + k] += v;
                    }
                }
            }
        }
        y
    }

    /// `xᵀ S x`.
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        x.dot(&self.apply(x))
    }

    /// Gradient `2 S x`.
    pub fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        2.0 * self.apply(x)
    }

    /// Bregman distance of the form at `x2` evaluated at `x1`; for a
    /// quadratic this is exactly the form of the difference.
    pub fn bregman(&self, x1: &DVector<f64>, x2: &DVector<f64>) -> f64 {
        self.value(&(x1 - x2))
    }
}

/// Dense symmetric matrix of the discrete Sobolev form of the given order.
pub fn sobolev_matrix(grid: &Arc<Grid2D>, order: f64) -> Result<DMatrix<f64>, PdeError> {
    let n = grid.num_nodes();
    if order == 0.0 {
        return Ok(DMatrix::identity(n, n));
    }
    let zero = Field::constant(grid.clone(), 0.0);
    let sys = assemble(grid.clone(), CoefficientKind::Schroedinger, &zero)?;
    let l = sys.matrix().to_dense();
    let msqrt: DVector<f64> = DVector::from_fn(n, |i, _| grid.volume(i).sqrt());
    let mut b = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = l[(i, j)] / (msqrt[i] * msqrt[j]);
        }
    }
    // Symmetrize against rounding before the eigendecomposition.
    let b = 0.5 * (&b + b.transpose());
    let eig = b.symmetric_eigen();
    let mut s = DMatrix::zeros(n, n);
    for k in 0..n {
        let lam = (1.0 + eig.eigenvalues[k].max(0.0)).powf(order);
        let q = eig.eigenvectors.column(k);
        // s += lam * q q^T (scaled by the mass square roots outside)
        for i in 0..n {
            let qi = q[i] * lam;
            for j in 0..n {
                s[(i, j)] += qi * q[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] *= msqrt[i] * msqrt[j];
        }
    }
    Ok(0.5 * (&s + s.transpose()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::standard_normal_vector;
    use rand::SeedableRng;

    #[test]
    fn euclidean_form_is_squared_norm() {
        let f = QuadFunctional::euclidean(4);
        let x = DVector::from_row_slice(&[1.0, -2.0, 0.5, 3.0]);
        assert_eq!(f.value(&x), x.norm_squared());
        assert_eq!(f.bregman(&x, &DVector::zeros(4)), x.norm_squared());
    }

    #[test]
    fn sobolev_order_zero_is_lumped_l2() {
        let grid = Arc::new(Grid2D::new_square(5).unwrap());
        let f = QuadFunctional::builder(grid.num_nodes())
            .with_sobolev(&grid, 0.0, 0)
            .unwrap();
        let x = DVector::from_element(grid.num_nodes(), 1.0);
        assert!((f.value(&x) - grid.num_nodes() as f64).abs() <= 1e-12);
    }

    #[test]
    fn sobolev_order_one_matches_stiffness_plus_mass() {
        let grid = Arc::new(Grid2D::new_square(5).unwrap());
        let f = QuadFunctional::builder(grid.num_nodes())
            .with_sobolev(&grid, 1.0, 0)
            .unwrap();
        let zero = Field::constant(grid.clone(), 0.0);
        let l = assemble(grid.clone(), CoefficientKind::Schroedinger, &zero)
            .unwrap()
            .matrix()
            .to_dense();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(44);
        let x = standard_normal_vector(&mut rng, grid.num_nodes());
        // order 1: x' (M + L) x with lumped mass M
        let mass: f64 = (0..grid.num_nodes())
            .map(|i| grid.volume(i) * x[i] * x[i])
            .sum();
        let expect = mass + x.dot(&(&l * &x));
        assert!((f.value(&x) - expect).abs() <= 1e-8 * (1.0 + expect.abs()));
    }

    #[test]
    fn sobolev_penalizes_rough_fields_more() {
        let grid = Arc::new(Grid2D::new_square(9).unwrap());
        let f = QuadFunctional::builder(grid.num_nodes())
            .with_sobolev(&grid, 1.0, 0)
            .unwrap();
        let smooth = Field::from_fn(grid.clone(), |x, _| x).into_values();
        let rough = Field::from_fn(grid.clone(), |x, y| {
            (8.0 * std::f64::consts::PI * x).sin() * (8.0 * std::f64::consts::PI * y).sin()
        })
        .into_values();
        let ratio = |v: &DVector<f64>| {
            let l2: f64 = (0..v.len()).map(|i| grid.volume(i) * v[i] * v[i]).sum();
            f.value(v) / l2
        };
        assert!(ratio(&rough) > 5.0 * ratio(&smooth));
    }

    #[test]
    fn uncovered_coordinates_are_flat() {
        let f = QuadFunctional::builder(5).with_identity(0, 2, 1.0);
        let mut x = DVector::zeros(5);
        x[4] = 100.0;
        assert_eq!(f.value(&x), 0.0);
    }
}
