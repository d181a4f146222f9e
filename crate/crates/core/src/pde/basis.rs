//! Orthonormal boundary current bases.
//!
//! Trigonometric currents in the arc-length parameterization of the
//! boundary walk, explicitly de-meaned (Neumann compatibility) and
//! orthonormalized by modified Gram–Schmidt in the discrete `L²(∂Ω)` inner
//! product.

use nalgebra::DVector;
use std::sync::Arc;

use super::{Grid2D, PdeError};

/// `N` boundary currents, zero-mean and orthonormal with respect to the
/// boundary quadrature weights.
pub struct BoundaryCurrentBasis {
    grid: Arc<Grid2D>,
    currents: Vec<DVector<f64>>,
}

impl BoundaryCurrentBasis {
    /// Builds the trigonometric basis `cos(2πks/L), sin(2πks/L)` for
    /// `k = 1, 2, …` truncated to `n` currents.
    pub fn trigonometric(grid: Arc<Grid2D>, n: usize) -> Result<Self, PdeError> {
        let nb = grid.boundary_nodes().len();
        if n == 0 || n >= nb {
            return Err(PdeError::InvalidGrid(format!(
                "basis size must lie in 1..{nb}, got {n}"
            )));
        }
        let per = grid.perimeter();
        let w = DVector::from_column_slice(grid.boundary_weights());
        let wsum = w.sum();
        let mut currents = Vec::with_capacity(n);
        for idx in 0..n {
            let freq = (idx / 2 + 1) as f64;
            let raw = DVector::from_fn(nb, |k, _| {
                let s = grid.boundary_arclen()[k];
                let angle = 2.0 * std::f64::consts::PI * freq * s / per;
                if idx % 2 == 0 {
                    angle.cos()
                } else {
                    angle.sin()
                }
            });
            currents.push(raw);
        }
        // De-mean, then modified Gram-Schmidt in the weighted inner product.
        let dot = |a: &DVector<f64>, b: &DVector<f64>| -> f64 {
            (0..nb).map(|k| w[k] * a[k] * b[k]).sum()
        };
        for cur in currents.iter_mut() {
            let mean = dot(cur, &DVector::from_element(nb, 1.0)) / wsum;
            for v in cur.iter_mut() {
                *v -= mean;
            }
        }
        for i in 0..currents.len() {
            for j in 0..i {
                let proj = dot(&currents[i], &currents[j]);
                let prev = currents[j].clone();
                currents[i].axpy(-proj, &prev, 1.0);
            }
            let norm = dot(&currents[i], &currents[i]).sqrt();
            if norm <= 1e-12 {
                return Err(PdeError::InvalidGrid(format!(
                    "current {i} degenerated during orthonormalization"
                )));
            }
            currents[i] /= norm;
        }
        Ok(BoundaryCurrentBasis { grid, currents })
    }

    pub fn len(&self) -> usize {
        self.currents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.currents.is_empty()
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn current(&self, n: usize) -> &DVector<f64> {
        &self.currents[n]
    }

    /// Frequency of the `n`-th basis current (1, 1, 2, 2, 3, …).
    pub fn frequency(&self, n: usize) -> usize {
        n / 2 + 1
    }

    /// Worst absolute weighted mean over the basis.
    pub fn max_mean_defect(&self) -> f64 {
        let w = self.grid.boundary_weights();
        self.currents
            .iter()
            .map(|c| (0..w.len()).map(|k| w[k] * c[k]).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    /// Worst deviation of the weighted Gram matrix from the identity.
    pub fn gram_defect(&self) -> f64 {
        let w = self.grid.boundary_weights();
        let mut worst = 0.0f64;
        for i in 0..self.len() {
            for j in 0..self.len() {
                let mut acc = 0.0;
                for k in 0..w.len() {
                    acc += w[k] * self.currents[i][k] * self.currents[j][k];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc - target).abs());
            }
        }
        worst
    }
}
