//! Small concrete forward maps used by testbeds and verification suites.

use nalgebra::{DMatrix, DVector};

use super::{ForwardMap, ModelError};

/// Dense linear forward map `x ↦ A·x`.
pub struct DenseLinearMap {
    a: DMatrix<f64>,
}

impl DenseLinearMap {
    pub fn new(a: DMatrix<f64>) -> Self {
        DenseLinearMap { a }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
}

impl ForwardMap for DenseLinearMap {
    fn dim_in(&self) -> usize {
        self.a.ncols()
    }

    fn dim_out(&self) -> usize {
        self.a.nrows()
    }

    fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        Ok(&self.a * x)
    }

    fn deriv_apply(&self, _x: &DVector<f64>, h: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        Ok(&self.a * h)
    }

    fn deriv_adjoint_apply(
        &self,
        _x: &DVector<f64>,
        g: &DVector<f64>,
    ) -> Result<DVector<f64>, ModelError> {
        Ok(self.a.tr_mul(g))
    }
}

/// The quadratic toy `x ↦ (x_i², x_i)`, a minimal genuinely nonlinear map
/// whose Taylor remainder has a closed form.
pub struct ComponentwiseQuadratic {
    n: usize,
}

impl ComponentwiseQuadratic {
    pub fn new(n: usize) -> Self {
        ComponentwiseQuadratic { n }
    }
}

impl ForwardMap for ComponentwiseQuadratic {
    fn dim_in(&self) -> usize {
        self.n
    }

    fn dim_out(&self) -> usize {
        2 * self.n
    }

    fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        let mut y = DVector::zeros(2 * self.n);
        for i in 0..self.n {
            y[i] = x[i] * x[i];
            y[self.n + i] = x[i];
        }
        Ok(y)
    }

    fn deriv_apply(&self, x: &DVector<f64>, h: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        let mut y = DVector::zeros(2 * self.n);
        for i in 0..self.n {
            y[i] = 2.0 * x[i] * h[i];
            y[self.n + i] = h[i];
        }
        Ok(y)
    }

    fn deriv_adjoint_apply(
        &self,
        x: &DVector<f64>,
        g: &DVector<f64>,
    ) -> Result<DVector<f64>, ModelError> {
        let mut y = DVector::zeros(self.n);
        for i in 0..self.n {
            y[i] = 2.0 * x[i] * g[i] + g[self.n + i];
        }
        Ok(y)
    }
}
