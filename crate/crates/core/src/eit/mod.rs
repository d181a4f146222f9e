//! Concrete relaxed inverse-problem models built on the elliptic solvers:
//! the all-at-once potential-identification problem (sequence of potentials
//! with the weighted-mean penalty), its reduced-form cousin with artificial
//! boundary data, and impedance tomography with artificial boundary
//! voltages.
//!
//! Each model implements [`crate::model::RangeInvariantModel`]; the
//! range-invariance identity `F(x) − F(x₀) = K·r(x)` holds exactly at the
//! discrete level and is verified by a construction-time check where the
//! auxiliary-problem formulation leaves a choice.

mod aao;
mod reduced;

pub use aao::{schroedinger_aao_model, SchroedingerAaoModel};
pub use reduced::{
    eit_model, schroedinger_alt_model, AuxVariant, ReducedModelConfig, ReducedRelaxedModel,
    VariantSelection,
};

use nalgebra::DVector;
use std::sync::Arc;

use crate::model::ModelError;
use crate::pde::{Field, Grid2D, PdeError};

impl From<PdeError> for ModelError {
    fn from(e: PdeError) -> Self {
        match e {
            PdeError::Admissibility(msg) => ModelError::Inadmissible(msg),
            PdeError::DimensionMismatch { expected, got } => {
                ModelError::DimensionMismatch { expected, got }
            }
            other => ModelError::SolverFailure(other.to_string()),
        }
    }
}

/// A truncated sequence of potential fields sharing one grid, with the
/// summable positive weights of the mean-removal penalty (default
/// `w_j = j⁻²`).
#[derive(Debug, Clone)]
pub struct PotentialStack {
    grid: Arc<Grid2D>,
    fields: Vec<DVector<f64>>,
    weights: Vec<f64>,
}

impl PotentialStack {
    pub fn new(grid: Arc<Grid2D>, fields: Vec<Field>) -> Result<Self, ModelError> {
        let n = fields.len();
        if n == 0 {
            return Err(ModelError::DimensionMismatch { expected: 1, got: 0 });
        }
        let mut vals = Vec::with_capacity(n);
        for f in fields {
            if !Arc::ptr_eq(f.grid(), &grid) && f.grid().num_nodes() != grid.num_nodes() {
                return Err(ModelError::DimensionMismatch {
                    expected: grid.num_nodes(),
                    got: f.grid().num_nodes(),
                });
            }
            vals.push(f.into_values());
        }
        let weights = default_weights(n);
        Ok(PotentialStack { grid, fields: vals, weights })
    }

    /// Stack of `n` copies of one field.
    pub fn replicated(field: Field, n: usize) -> Result<Self, ModelError> {
        let grid = field.grid().clone();
        PotentialStack::new(grid, vec![field; n])
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self, ModelError> {
        if weights.len() != self.fields.len() {
            return Err(ModelError::DimensionMismatch {
                expected: self.fields.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(ModelError::Inadmissible("stack weights must be positive".into()));
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn field(&self, j: usize) -> &DVector<f64> {
        &self.fields[j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Flattens to a single column (field after field).
    pub fn flatten(&self) -> DVector<f64> {
        let m = self.grid.num_nodes();
        let mut out = DVector::zeros(m * self.fields.len());
        for (j, f) in self.fields.iter().enumerate() {
            out.rows_mut(j * m, m).copy_from(f);
        }
        out
    }
}

fn default_weights(n: usize) -> Vec<f64> {
    (1..=n).map(|j| 1.0 / (j as f64 * j as f64)).collect()
}

/// Mean-removal projection on a stack:
/// `(c_j − (Σ w_k)⁻¹ Σ w_k c_k)_j`, applied nodewise.
pub fn weighted_mean_projection(stack: &PotentialStack) -> PotentialStack {
    let m = stack.grid.num_nodes();
    let wsum: f64 = stack.weights.iter().sum();
    let mut mean = DVector::zeros(m);
    for (j, f) in stack.fields.iter().enumerate() {
        mean.axpy(stack.weights[j] / wsum, f, 1.0);
    }
    let fields = stack.fields.iter().map(|f| f - &mean).collect();
    PotentialStack { grid: stack.grid.clone(), fields, weights: stack.weights.clone() }
}

/// Nodewise weighted-mean projection on a flat `n_fields × m` stack
/// vector; the building block behind the models' penalty operator.
pub(crate) fn stack_projection_flat(
    v: &DVector<f64>,
    n_fields: usize,
    m: usize,
    weights: &[f64],
) -> DVector<f64> {
    let wsum: f64 = weights.iter().sum();
    let mut mean = DVector::zeros(m);
    for j in 0..n_fields {
        mean.axpy(weights[j] / wsum, &v.rows(j * m, m).into_owned(), 1.0);
    }
    let mut out = v.clone();
    for j in 0..n_fields {
        let mut rows = out.rows_mut(j * m, m);
        rows -= &mean;
    }
    out
}

/// Scatters a boundary-walk vector into a nodal vector (the adjoint of the
/// Dirichlet trace readout).
pub(crate) fn scatter_boundary(grid: &Grid2D, g: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(grid.num_nodes());
    for (k, &b) in grid.boundary_nodes().iter().enumerate() {
        out[b] += g[k];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::Grid2D;

    fn small_stack(values: &[f64]) -> PotentialStack {
        let grid = Arc::new(Grid2D::new_square(4).unwrap());
        let fields = values
            .iter()
            .map(|&v| Field::constant(grid.clone(), v))
            .collect();
        PotentialStack::new(grid, fields).unwrap()
    }

    #[test]
    fn default_weights_are_inverse_squares() {
        let s = small_stack(&[1.0, 2.0, 3.0]);
        assert_eq!(s.weights(), &[1.0, 0.25, 1.0 / 9.0]);
    }

    #[test]
    fn constant_stack_projects_to_zero() {
        let s = small_stack(&[2.0, 2.0, 2.0, 2.0]);
        let p = weighted_mean_projection(&s);
        assert!(p.flatten().abs().max() <= 1e-15);
    }

    #[test]
    fn two_entry_equal_weights_mean_removal() {
        let s = small_stack(&[3.0, 1.0]).with_weights(vec![1.0, 1.0]).unwrap();
        let p = weighted_mean_projection(&s);
        assert!((p.field(0) - DVector::from_element(16, 1.0)).abs().max() <= 1e-15);
        assert!((p.field(1) - DVector::from_element(16, -1.0)).abs().max() <= 1e-15);
    }

    #[test]
    fn projection_is_idempotent() {
        let s = small_stack(&[0.3, -1.0, 2.5]);
        let p1 = weighted_mean_projection(&s);
        let p2 = weighted_mean_projection(&p1);
        assert!((p1.flatten() - p2.flatten()).abs().max() <= 1e-15);
    }

    #[test]
    fn complement_is_sup_norm_nonexpansive() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let grid = Arc::new(Grid2D::new_square(4).unwrap());
        for _ in 0..50 {
            let mk = |rng: &mut rand_chacha::ChaCha8Rng| {
                let fields: Vec<Field> = (0..4)
                    .map(|_| {
                        let vals = DVector::from_fn(16, |_, _| rng.gen_range(-2.0..2.0));
                        Field::new(grid.clone(), vals).unwrap()
                    })
                    .collect();
                PotentialStack::new(grid.clone(), fields).unwrap()
            };
            let s1 = mk(&mut rng);
            let s2 = mk(&mut rng);
            // (I-P)s replicates the weighted nodewise mean.
            let c1 = &s1.flatten() - weighted_mean_projection(&s1).flatten();
            let c2 = &s2.flatten() - weighted_mean_projection(&s2).flatten();
            let lhs = (c1 - c2).abs().max();
            let rhs = (s1.flatten() - s2.flatten()).abs().max();
            assert!(lhs <= rhs + 1e-14, "complement expanded: {lhs} > {rhs}");
        }
    }
}
