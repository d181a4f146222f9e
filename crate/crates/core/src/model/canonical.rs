//! The canonical data-space relaxation.
//!
//! Any inverse problem `F̌(x̌) = y` extends to a range-invariant one on
//! `X = X̌ × Y` by treating a data-space shift `z` as an extra unknown:
//! `F(x̌, z) = F̌(x̌) + z` with penalty `P(x̌, z) = z`. The identity
//! `F(x) − F(x₀) = K·r(x)` then holds exactly with
//! `K(dx̌, dz) = F̌'(x̌₀)dx̌ + dz` and
//! `r(x) = (x̌ − x̌₀, z − z₀ + T(x̌))`, where
//! `T(x̌) = F̌(x̌) − F̌(x̌₀) − F̌'(x̌₀)(x̌ − x̌₀)` is the Taylor remainder
//! at the base point and `z₀ = 0` (so that `P(x₀) = 0`).

use nalgebra::DVector;

use super::{ForwardMap, ModelError, RangeInvariantModel};

/// Canonical relaxation of a base forward map; see the module docs.
pub struct CanonicalRelaxation<F: ForwardMap> {
    base: F,
    x_check0: DVector<f64>,
    x0: DVector<f64>,
    f_x0: DVector<f64>,
    f_check_x0: DVector<f64>,
    rho0: f64,
}

/// Builds the canonical relaxation around the base point `x_check0` with
/// admissible ball radius `rho0`.
pub fn canonical_relaxation<F: ForwardMap>(
    base: F,
    x_check0: DVector<f64>,
    rho0: f64,
) -> Result<CanonicalRelaxation<F>, ModelError> {
    if x_check0.len() != base.dim_in() {
        return Err(ModelError::DimensionMismatch {
            expected: base.dim_in(),
            got: x_check0.len(),
        });
    }
    let f_check_x0 = base.eval(&x_check0)?;
    let mut x0 = DVector::zeros(base.dim_in() + base.dim_out());
    x0.rows_mut(0, base.dim_in()).copy_from(&x_check0);
    // z0 = 0, hence F(x0) = F_check(x_check0).
    let f_x0 = f_check_x0.clone();
    Ok(CanonicalRelaxation { base, x_check0, x0, f_x0, f_check_x0, rho0 })
}

impl<F: ForwardMap> CanonicalRelaxation<F> {
    pub fn base(&self) -> &F {
        &self.base
    }

    fn nx(&self) -> usize {
        self.base.dim_in()
    }

    fn nz(&self) -> usize {
        self.base.dim_out()
    }

    fn split(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        (
            x.rows(0, self.nx()).into_owned(),
            x.rows(self.nx(), self.nz()).into_owned(),
        )
    }

    fn join(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let mut v = DVector::zeros(self.nx() + self.nz());
        v.rows_mut(0, self.nx()).copy_from(a);
        v.rows_mut(self.nx(), self.nz()).copy_from(b);
        v
    }

    fn check_dim(&self, v: &DVector<f64>, expected: usize) -> Result<(), ModelError> {
        if v.len() != expected {
            return Err(ModelError::DimensionMismatch { expected, got: v.len() });
        }
        Ok(())
    }

    /// Taylor remainder of the base map at the frozen linearization point.
    fn remainder(&self, x_check: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        let dx = x_check - &self.x_check0;
        Ok(self.base.eval(x_check)? - &self.f_check_x0 - self.base.deriv_apply(&self.x_check0, &dx)?)
    }
}

impl<F: ForwardMap> RangeInvariantModel for CanonicalRelaxation<F> {
    fn dim_x(&self) -> usize {
        self.nx() + self.nz()
    }

    fn dim_lifted(&self) -> usize {
        self.nx() + self.nz()
    }

    fn dim_data(&self) -> usize {
        self.nz()
    }

    fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    fn f_x0(&self) -> &DVector<f64> {
        &self.f_x0
    }

    fn f_eval(&self, x: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        self.check_dim(x, self.dim_x())?;
        let (xc, z) = self.split(x);
        Ok(self.base.eval(&xc)? + z)
    }

    fn f_deriv_apply(&self, x: &DVector<f64>, h: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        self.check_dim(h, self.dim_x())?;
        let (xc, _) = self.split(x);
        let (hc, hz) = self.split(h);
        Ok(self.base.deriv_apply(&xc, &hc)? + hz)
    }

    fn f_deriv_adjoint_apply(
        &self,
        x: &DVector<f64>,
        g: &DVector<f64>,
    ) -> Result<DVector<f64>, ModelError> {
        self.check_dim(g, self.dim_data())?;
        let (xc, _) = self.split(x);
        Ok(self.join(&self.base.deriv_adjoint_apply(&xc, g)?, g))
    }

    fn k_apply(&self, rhat: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        self.check_dim(rhat, self.dim_lifted())?;
        let (rc, rz) = self.split(rhat);
        Ok(self.base.deriv_apply(&self.x_check0, &rc)? + rz)
    }

    fn k_adjoint_apply(&self, y: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        self.check_dim(y, self.dim_data())?;
        Ok(self.join(&self.base.deriv_adjoint_apply(&self.x_check0, y)?, y))
    }

    fn r_eval(&self, x: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        self.check_dim(x, self.dim_x())?;
        let (xc, z) = self.split(x);
        Ok(self.join(&(&xc - &self.x_check0), &(z + self.remainder(&xc)?)))
    }

    fn r_inverse(&self, rhat: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        self.check_dim(rhat, self.dim_lifted())?;
        let (rc, rz) = self.split(rhat);
        let xc = &self.x_check0 + rc;
        Ok(self.join(&xc, &(rz - self.remainder(&xc)?)))
    }

    fn r_deriv_apply(&self, x: &DVector<f64>, h: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        self.check_dim(h, self.dim_x())?;
        let (xc, _) = self.split(x);
        let (hc, hz) = self.split(h);
        let dz = hz + self.base.deriv_apply(&xc, &hc)?
            - self.base.deriv_apply(&self.x_check0, &hc)?;
        Ok(self.join(&hc, &dz))
    }

    fn r_deriv_adjoint_apply(
        &self,
        x: &DVector<f64>,
        g: &DVector<f64>,
    ) -> Result<DVector<f64>, ModelError> {
        self.check_dim(g, self.dim_lifted())?;
        let (xc, _) = self.split(x);
        let (gc, gz) = self.split(g);
        let a = gc + self.base.deriv_adjoint_apply(&xc, &gz)?
            - self.base.deriv_adjoint_apply(&self.x_check0, &gz)?;
        Ok(self.join(&a, &gz))
    }

    fn r_inverse_deriv_apply(
        &self,
        rhat: &DVector<f64>,
        h: &DVector<f64>,
    ) -> Result<DVector<f64>, ModelError> {
        self.check_dim(h, self.dim_lifted())?;
        let (rc, _) = self.split(rhat);
        let (hc, hz) = self.split(h);
        let xc = &self.x_check0 + rc;
        let dz = hz - self.base.deriv_apply(&xc, &hc)?
            + self.base.deriv_apply(&self.x_check0, &hc)?;
        Ok(self.join(&hc, &dz))
    }

    fn r_inverse_deriv_adjoint_apply(
        &self,
        rhat: &DVector<f64>,
        g: &DVector<f64>,
    ) -> Result<DVector<f64>, ModelError> {
        self.check_dim(g, self.dim_x())?;
        let (rc, _) = self.split(rhat);
        let (gc, gz) = self.split(g);
        let xc = &self.x_check0 + rc;
        let a = gc - self.base.deriv_adjoint_apply(&xc, &gz)?
            + self.base.deriv_adjoint_apply(&self.x_check0, &gz)?;
        Ok(self.join(&a, &gz))
    }

    fn p_apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut px = x.clone();
        px.rows_mut(0, self.nx()).fill(0.0);
        px
    }

    fn admissibility_radius(&self) -> f64 {
        self.rho0
    }

    fn is_admissible(&self, x: &DVector<f64>) -> bool {
        if x.len() != self.dim_x() {
            return false;
        }
        let (xc, _) = self.split(x);
        self.base.admissible(&xc) && (x - &self.x0).norm() <= self.rho0
    }
}
