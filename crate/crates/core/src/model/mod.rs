//! Abstract inverse-problem contracts and the range-invariance machinery.
//!
//! A [`ForwardMap`] is a differentiable map between finite-dimensional real
//! coordinate spaces with an analytically supplied Jacobian action and
//! adjoint. A [`RangeInvariantModel`] bundles a (relaxed) forward map `F`
//! with the base point `x₀`, the fixed linear operator `K`, the
//! parameter-space map `r` with its inverse and derivative, and the penalty
//! projection `P`, tied together by the identity `F(x) − F(x₀) = K·r(x)` on
//! the admissible neighborhood.
//!
//! All spaces are Euclidean (`p = 2` Hilbert setting); vectors are flat
//! `f64` columns. Models are immutable after construction and reentrant.

mod canonical;
pub mod maps;
pub mod probes;
pub mod vecio;

pub use canonical::{canonical_relaxation, CanonicalRelaxation};

use nalgebra::DVector;
use thiserror::Error;

/// Errors from model construction and evaluation.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point outside the admissible neighborhood: {0}")]
    Inadmissible(String),
    #[error("degenerate pair: {0}")]
    DegeneratePair(String),
    #[error("linear solve failed: {0}")]
    SolverFailure(String),
    #[error("coefficient floor violated: {0}")]
    FloorViolation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint file: {0}")]
    BadCheckpoint(String),
}

/// A differentiable forward map `F̌` between coordinate spaces.
///
/// `deriv_apply` must be linear in the direction and consistent with
/// `deriv_adjoint_apply` under the Euclidean pairings; both are verified by
/// the probe battery in [`probes`].
pub trait ForwardMap: Send + Sync {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>, ModelError>;
    fn deriv_apply(&self, x: &DVector<f64>, h: &DVector<f64>)
        -> Result<DVector<f64>, ModelError>;
    fn deriv_adjoint_apply(
        &self,
        x: &DVector<f64>,
        g: &DVector<f64>,
    ) -> Result<DVector<f64>, ModelError>;

    /// Extra admissibility restrictions of the base problem (coefficient
    /// bounds and the like); the neighborhood ball is handled by the model.
    fn admissible(&self, _x: &DVector<f64>) -> bool {
        true
    }
}

/// One relaxed inverse-problem instance: everything the reconstruction
/// schemes need about `F`, `K`, `r`, `r⁻¹`, `P` and the neighborhood `U`.
pub trait RangeInvariantModel: Send + Sync {
    /// Dimension of the parameter space `X`.
    fn dim_x(&self) -> usize;
    /// Dimension of the lifted space `X̃` where `r̂` lives.
    fn dim_lifted(&self) -> usize;
    /// Dimension of the data space `Y`.
    fn dim_data(&self) -> usize;

    fn x0(&self) -> &DVector<f64>;
    /// Cached `F(x₀)`.
    fn f_x0(&self) -> &DVector<f64>;

    fn f_eval(&self, x: &DVector<f64>) -> Result<DVector<f64>, ModelError>;
    fn f_deriv_apply(&self, x: &DVector<f64>, h: &DVector<f64>)
        -> Result<DVector<f64>, ModelError>;
    fn f_deriv_adjoint_apply(
        &self,
        x: &DVector<f64>,
        g: &DVector<f64>,
    ) -> Result<DVector<f64>, ModelError>;

    /// The frozen linear operator `K : X̃ → Y`.
    fn k_apply(&self, rhat: &DVector<f64>) -> Result<DVector<f64>, ModelError>;
    fn k_adjoint_apply(&self, y: &DVector<f64>) -> Result<DVector<f64>, ModelError>;

    fn r_eval(&self, x: &DVector<f64>) -> Result<DVector<f64>, ModelError>;
    fn r_inverse(&self, rhat: &DVector<f64>) -> Result<DVector<f64>, ModelError>;
    fn r_deriv_apply(&self, x: &DVector<f64>, h: &DVector<f64>)
        -> Result<DVector<f64>, ModelError>;
    fn r_deriv_adjoint_apply(
        &self,
        x: &DVector<f64>,
        g: &DVector<f64>,
    ) -> Result<DVector<f64>, ModelError>;

    /// Jacobian action of the preimage map `r⁻¹` at `rhat` (the solvers
    /// differentiate regularizers composed with the preimage readout).
    fn r_inverse_deriv_apply(
        &self,
        rhat: &DVector<f64>,
        h: &DVector<f64>,
    ) -> Result<DVector<f64>, ModelError>;
    fn r_inverse_deriv_adjoint_apply(
        &self,
        rhat: &DVector<f64>,
        g: &DVector<f64>,
    ) -> Result<DVector<f64>, ModelError>;

    /// The penalty projection `P : X → X` (linear, idempotent).
    fn p_apply(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Complement `(I − P)x`.
    fn im_p_apply(&self, x: &DVector<f64>) -> DVector<f64> {
        x - self.p_apply(x)
    }

    /// Radius of the admissible ball around `x₀`.
    fn admissibility_radius(&self) -> f64;

    /// Membership in the neighborhood `U` (ball plus model-specific
    /// constraints).
    fn is_admissible(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim_x() && (x - self.x0()).norm() <= self.admissibility_radius()
    }
}

/// Relative defect of the range-invariance identity at `x`:
/// `‖F(x) − F(x₀) − K·r(x)‖ / (1 + ‖F(x) − F(x₀)‖)`.
pub fn range_invariance_residual(
    m: &dyn RangeInvariantModel,
    x: &DVector<f64>,
) -> Result<f64, ModelError> {
    if !m.is_admissible(x) {
        return Err(ModelError::Inadmissible(format!(
            "point at distance {:.3e} from x0 (radius {:.3e})",
            (x - m.x0()).norm(),
            m.admissibility_radius()
        )));
    }
    let df = m.f_eval(x)? - m.f_x0();
    let kr = m.k_apply(&m.r_eval(x)?)?;
    Ok((&df - kr).norm() / (1.0 + df.norm()))
}

/// Taylor-remainder quotient
/// `‖F̌(x₁) − F̌(x₂) − F̌'(x₀)(x₁ − x₂)‖ / ‖x₁ − x₂‖`, the observable
/// behind the contraction constant of the canonical relaxation.
pub fn taylor_remainder_ratio(
    base: &dyn ForwardMap,
    x1: &DVector<f64>,
    x2: &DVector<f64>,
    x0: &DVector<f64>,
) -> Result<f64, ModelError> {
    let diff = x1 - x2;
    let denom = diff.norm();
    if denom == 0.0 {
        return Ok(0.0);
    }
    let num = (base.eval(x1)? - base.eval(x2)? - base.deriv_apply(x0, &diff)?).norm();
    Ok(num / denom)
}

/// Tangential-cone quotient for `r`:
/// `‖r(x₁) − r(x₂) − r'(x₂)(x₁ − x₂)‖ / ‖r(x₁) − r(x₂)‖`.
pub fn tangential_ratio_r(
    m: &dyn RangeInvariantModel,
    x1: &DVector<f64>,
    x2: &DVector<f64>,
) -> Result<f64, ModelError> {
    let r1 = m.r_eval(x1)?;
    let r2 = m.r_eval(x2)?;
    let denom = (&r1 - &r2).norm();
    if denom == 0.0 {
        return Err(ModelError::DegeneratePair(
            "r(x1) = r(x2); tangential ratio undefined".into(),
        ));
    }
    let num = (&r1 - &r2 - m.r_deriv_apply(x2, &(x1 - x2))?).norm();
    Ok(num / denom)
}
