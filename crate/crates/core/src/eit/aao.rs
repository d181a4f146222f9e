//! All-at-once formulation of the potential-identification problem.
//!
//! The unknown is the pair `(c⃗, u)` of a sequence of potentials (one per
//! boundary current) and the corresponding states. The forward operator
//! stacks, per current `n`: the pointwise PDE residual `−Δu_n + c_n u_n`,
//! the one-sided Neumann flux residual `tr^N u_n − φ_n`, the boundary
//! average `∫_∂Ω u_n dΓ`, and the Dirichlet observation `tr^D u_n`.
//!
//! With `K` the linearization at `(c⃗₀, u₀)` and
//! `r(c⃗, u)_j = ((c_j − c_{0,j})·u_j/u_{0,j},  u_j − u_{0,j})` the
//! identity `F(x) − F(x₀) = K·r(x)` cancels nodewise: the only nonlinear
//! term is the product `c_n u_n`, and
//! `c_n u_n − c_{0,n} u_{0,n} = c_{0,n}(u_n − u_{0,n}) + r_c·u_{0,n}`
//! exactly. The penalty removes the weighted mean across the potential
//! sequence; exact solutions are constant sequences.

use nalgebra::DVector;
use std::sync::Arc;

use crate::model::{ModelError, RangeInvariantModel};
use crate::pde::{
    assemble, BoundaryCurrentBasis, CoefficientKind, Field, Grid2D, GridShape,
};

use super::stack_projection_flat;

/// Sparse rectangular operator stored rowwise; enough for the pointwise
/// Laplacian and flux stencils.
struct SparseRows {
    rows: Vec<Vec<(usize, f64)>>,
    ncols: usize,
}

impl SparseRows {
    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.rows.len(), |i, _| {
            self.rows[i].iter().map(|&(j, a)| a * v[j]).sum()
        })
    }

    fn adjoint_apply(&self, g: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.ncols);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                out[j] += a * g[i];
            }
        }
        out
    }
}

/// Pointwise negative Laplacian with one-sided second-order stencils on the
/// square boundary.
fn pointwise_neg_laplacian(grid: &Grid2D, n: usize) -> SparseRows {
    let h2 = grid.h() * grid.h();
    let idx = |ix: usize, iy: usize| ix + iy * n;
    let mut rows = vec![Vec::new(); n * n];
    let one_sided = |i: usize, len: usize| -> Vec<(usize, f64)> {
        // coefficients of the second derivative along one line
        if i == 0 {
            vec![(0, 2.0), (1, -5.0), (2, 4.0), (3, -1.0)]
        } else if i == len - 1 {
            vec![(len - 1, 2.0), (len - 2, -5.0), (len - 3, 4.0), (len - 4, -1.0)]
        } else {
            vec![(i - 1, 1.0), (i, -2.0), (i + 1, 1.0)]
        }
    };
    for iy in 0..n {
        for ix in 0..n {
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(8);
            for (k, a) in one_sided(ix, n) {
                row.push((idx(k, iy), -a / h2));
            }
            for (k, a) in one_sided(iy, n) {
                row.push((idx(ix, k), -a / h2));
            }
            rows[idx(ix, iy)] = row;
        }
    }
    SparseRows { rows, ncols: n * n }
}

/// One-sided outward normal derivative at the boundary walk (averaged over
/// the two normals at corners).
fn normal_derivative(grid: &Grid2D, n: usize) -> SparseRows {
    let h = grid.h();
    let idx = |ix: i64, iy: i64| (ix + iy * n as i64) as usize;
    let mut rows = Vec::with_capacity(grid.boundary_nodes().len());
    for &b in grid.boundary_nodes() {
        let ix = (b % n) as i64;
        let iy = (b / n) as i64;
        let mut normals: Vec<(i64, i64)> = Vec::with_capacity(2);
        if ix == 0 {
            normals.push((1, 0)); // inward +x, outward -x
        }
        if ix == n as i64 - 1 {
            normals.push((-1, 0));
        }
        if iy == 0 {
            normals.push((0, 1));
        }
        if iy == n as i64 - 1 {
            normals.push((0, -1));
        }
        let scale = 1.0 / normals.len() as f64;
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(6);
        for (dx, dy) in normals {
            // outward derivative = -(inward derivative); second-order
            // one-sided: (3 f0 - 4 f1 + f2) / (2h) pointing outward.
            row.push((idx(ix, iy), scale * 3.0 / (2.0 * h)));
            row.push((idx(ix + dx, iy + dy), scale * (-4.0) / (2.0 * h)));
            row.push((idx(ix + 2 * dx, iy + 2 * dy), scale * 1.0 / (2.0 * h)));
        }
        rows.push(row);
    }
    SparseRows { rows, ncols: n * n }
}

/// The all-at-once relaxed model; see the module docs.
pub struct SchroedingerAaoModel {
    grid: Arc<Grid2D>,
    currents: Vec<DVector<f64>>,
    stack_weights: Vec<f64>,
    c0: DVector<f64>,
    u0: DVector<f64>,
    x0: DVector<f64>,
    f_x0: DVector<f64>,
    lap: SparseRows,
    flux: SparseRows,
    n_cur: usize,
    m: usize,
    nb: usize,
    rho0: f64,
    u_floor: f64,
}

/// Builds the all-at-once model around base potentials `c0` and base
/// states `u0`.
///
/// The base states need not solve any PDE but must be nodally bounded away
/// from zero (they divide the relaxation map); the floor is
/// `1e−3·max|u₀|`.
pub fn schroedinger_aao_model(
    grid: Arc<Grid2D>,
    basis: &BoundaryCurrentBasis,
    c0: &super::PotentialStack,
    u0: &super::PotentialStack,
    rho0: f64,
) -> Result<SchroedingerAaoModel, ModelError> {
    let n = match grid.shape() {
        GridShape::Square { n } => n,
        GridShape::Disk { .. } => {
            return Err(ModelError::Inadmissible(
                "the all-at-once model runs on the square grid".into(),
            ))
        }
    };
    if c0.len() != basis.len() || u0.len() != basis.len() {
        return Err(ModelError::DimensionMismatch { expected: basis.len(), got: c0.len() });
    }
    let m = grid.num_nodes();
    let u0_flat = u0.flatten();
    let u_floor = 1e-3 * u0_flat.abs().max();
    let min_u0 = u0_flat.abs().min();
    if min_u0 < u_floor {
        return Err(ModelError::FloorViolation(format!(
            "base state has nodal magnitude {min_u0:.3e} below the floor {u_floor:.3e}"
        )));
    }
    let c0_flat = c0.flatten();
    let mut x0 = DVector::zeros(2 * basis.len() * m);
    x0.rows_mut(0, basis.len() * m).copy_from(&c0_flat);
    x0.rows_mut(basis.len() * m, basis.len() * m).copy_from(&u0_flat);
    let mut model = SchroedingerAaoModel {
        grid: grid.clone(),
        currents: (0..basis.len()).map(|j| basis.current(j).clone()).collect(),
        stack_weights: c0.weights().to_vec(),
        c0: c0_flat,
        u0: u0_flat,
        x0,
        f_x0: DVector::zeros(0),
        lap: pointwise_neg_laplacian(&grid, n),
        flux: normal_derivative(&grid, n),
        n_cur: basis.len(),
        m,
        nb: grid.boundary_nodes().len(),
        rho0,
        u_floor,
    };
    model.f_x0 = model.f_eval(&model.x0.clone())?;
    Ok(model)
}

impl SchroedingerAaoModel {
    fn data_per_current(&self) -> usize {
        self.m + 2 * self.nb + 1
    }

    fn c_part<'a>(&self, x: &'a DVector<f64>) -> nalgebra::DVectorView<'a, f64> {
        x.rows(0, self.n_cur * self.m)
    }

    fn u_part<'a>(&self, x: &'a DVector<f64>) -> nalgebra::DVectorView<'a, f64> {
        x.rows(self.n_cur * self.m, self.n_cur * self.m)
    }

    /// Base states plus the constant shift used by the default base point.
    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn num_currents(&self) -> usize {
        self.n_cur
    }

    /// Assembles the admissible truth state for a single potential: the
    /// replicated sequence together with its PDE solutions.
    pub fn truth_state(&self, c_true: &Field) -> Result<DVector<f64>, ModelError> {
        let sys = assemble(self.grid.clone(), CoefficientKind::Schroedinger, c_true)?;
        let mut x = DVector::zeros(self.dim_x());
        for j in 0..self.n_cur {
            x.rows_mut(j * self.m, self.m).copy_from(c_true.values());
            let u = sys.solve_neumann(&self.currents[j])?;
            x.rows_mut((self.n_cur + j) * self.m, self.m).copy_from(u.values());
        }
        Ok(x)
    }

    /// Splits a parameter vector into its potential-sequence and state
    /// components (one pair per current).
    pub fn split_state(&self, x: &DVector<f64>) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let cs = (0..self.n_cur).map(|j| x.rows(j * self.m, self.m).into_owned()).collect();
        let us = (0..self.n_cur)
            .map(|j| x.rows((self.n_cur + j) * self.m, self.m).into_owned())
            .collect();
        (cs, us)
    }
}

impl RangeInvariantModel for SchroedingerAaoModel {
    fn dim_x(&self) -> usize {
        2 * self.n_cur * self.m
    }

    fn dim_lifted(&self) -> usize {
        2 * self.n_cur * self.m
    }

    fn dim_data(&self) -> usize {
        self.n_cur * self.data_per_current()
    }

    fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    fn f_x0(&self) -> &DVector<f64> {
        &self.f_x0
    }

    fn f_eval(&self, x: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        if x.len() != self.dim_x() {
            return Err(ModelError::DimensionMismatch { expected: self.dim_x(), got: x.len() });
        }
        let mut y = DVector::zeros(self.dim_data());
        let dpc = self.data_per_current();
        for j in 0..self.n_cur {
            let c = x.rows(j * self.m, self.m);
            let u = x.rows((self.n_cur + j) * self.m, self.m).into_owned();
            let mut pde = self.lap.apply(&u);
            for i in 0..self.m {
                pde[i] += c[i] * u[i];
            }
            let mut flux = self.flux.apply(&u);
            flux -= &self.currents[j];
            let mean = self.grid.boundary_weighted_sum(&u);
            let walk = self.grid.boundary_nodes();
            let mut block = y.rows_mut(j * dpc, dpc);
            block.rows_mut(0, self.m).copy_from(&pde);
            block.rows_mut(self.m, self.nb).copy_from(&flux);
            block[self.m + self.nb] = mean;
            for (k, &b) in walk.iter().enumerate() {
                block[self.m + self.nb + 1 + k] = u[b];
            }
        }
        Ok(y)
    }

    fn f_deriv_apply(&self, x: &DVector<f64>, h: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        let mut y = DVector::zeros(self.dim_data());
        let dpc = self.data_per_current();
        for j in 0..self.n_cur {
            let c = x.rows(j * self.m, self.m);
            let u = x.rows((self.n_cur + j) * self.m, self.m);
            let dc = h.rows(j * self.m, self.m);
            let du = h.rows((self.n_cur + j) * self.m, self.m).into_owned();
            let mut pde = self.lap.apply(&du);
            for i in 0..self.m {
                pde[i] += c[i] * du[i] + dc[i] * u[i];
            }
            let flux = self.flux.apply(&du);
            let mean = self.grid.boundary_weighted_sum(&du);
            let walk = self.grid.boundary_nodes();
            let mut block = y.rows_mut(j * dpc, dpc);
            block.rows_mut(0, self.m).copy_from(&pde);
            block.rows_mut(self.m, self.nb).copy_from(&flux);
            block[self.m + self.nb] = mean;
            for (k, &b) in walk.iter().enumerate() {
                block[self.m + self.nb + 1 + k] = du[b];
            }
        }
        Ok(y)
    }

    fn f_deriv_adjoint_apply(
        &self,
        x: &DVector<f64>,
        g: &DVector<f64>,
    ) -> Result<DVector<f64>, ModelError> {
        let mut out = DVector::zeros(self.dim_x());
        let dpc = self.data_per_current();
        for j in 0..self.n_cur {
            let c = x.rows(j * self.m, self.m);
            let u = x.rows((self.n_cur + j) * self.m, self.m);
            let block = g.rows(j * dpc, dpc);
            let g_pde = block.rows(0, self.m).into_owned();
            let g_flux = block.rows(self.m, self.nb).into_owned();
            let g_mean = block[self.m + self.nb];
            let g_obs = block.rows(self.m + self.nb + 1, self.nb).into_owned();

            let mut adj_u = self.lap.adjoint_apply(&g_pde);
            for i in 0..self.m {
                adj_u[i] += c[i] * g_pde[i];
            }
            adj_u += self.flux.adjoint_apply(&g_flux);
            for (k, &b) in self.grid.boundary_nodes().iter().enumerate() {
                adj_u[b] += g_mean * self.grid.boundary_weights()[k];
                adj_u[b] += g_obs[k];
            }
            let mut adj_c = DVector::zeros(self.m);
            for i in 0..self.m {
                adj_c[i] = u[i] * g_pde[i];
            }
            out.rows_mut(j * self.m, self.m).copy_from(&adj_c);
            out.rows_mut((self.n_cur + j) * self.m, self.m).copy_from(&adj_u);
        }
        Ok(out)
    }

    fn k_apply(&self, rhat: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        self.f_deriv_apply(&self.x0, rhat)
    }

    fn k_adjoint_apply(&self, y: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        self.f_deriv_adjoint_apply(&self.x0, y)
    }

    fn r_eval(&self, x: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        if x.len() != self.dim_x() {
            return Err(ModelError::DimensionMismatch { expected: self.dim_x(), got: x.len() });
        }
        let nm = self.n_cur * self.m;
        let c = self.c_part(x);
        let u = self.u_part(x);
        let mut r = DVector::zeros(2 * nm);
        for i in 0..nm {
            r[i] = (c[i] - self.c0[i]) * u[i] / self.u0[i];
            r[nm + i] = u[i] - self.u0[i];
        }
        Ok(r)
    }

    fn r_inverse(&self, rhat: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        let nm = self.n_cur * self.m;
        if rhat.len() != 2 * nm {
            return Err(ModelError::DimensionMismatch { expected: 2 * nm, got: rhat.len() });
        }
        let mut x = DVector::zeros(2 * nm);
        for i in 0..nm {
            let u = self.u0[i] + rhat[nm + i];
            if u.abs() < self.u_floor {
                return Err(ModelError::FloorViolation(format!(
                    "state magnitude {:.3e} below the floor {:.3e} during inversion",
                    u.abs(),
                    self.u_floor
                )));
            }
            x[i] = self.c0[i] + rhat[i] * self.u0[i] / u;
            x[nm + i] = u;
        }
        Ok(x)
    }

    fn r_deriv_apply(&self, x: &DVector<f64>, h: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        let nm = self.n_cur * self.m;
        let c = self.c_part(x);
        let u = self.u_part(x);
        let dc = self.c_part(h);
        let du = self.u_part(h);
        let mut out = DVector::zeros(2 * nm);
        for i in 0..nm {
            out[i] = dc[i] * u[i] / self.u0[i] + (c[i] - self.c0[i]) * du[i] / self.u0[i];
            out[nm + i] = du[i];
        }
        Ok(out)
    }

    fn r_deriv_adjoint_apply(
        &self,
        x: &DVector<f64>,
        g: &DVector<f64>,
    ) -> Result<DVector<f64>, ModelError> {
        let nm = self.n_cur * self.m;
        let c = self.c_part(x);
        let u = self.u_part(x);
        let gc = g.rows(0, nm);
        let gu = g.rows(nm, nm);
        let mut out = DVector::zeros(2 * nm);
        for i in 0..nm {
            out[i] = gc[i] * u[i] / self.u0[i];
            out[nm + i] = gc[i] * (c[i] - self.c0[i]) / self.u0[i] + gu[i];
        }
        Ok(out)
    }

    fn r_inverse_deriv_apply(
        &self,
        rhat: &DVector<f64>,
        h: &DVector<f64>,
    ) -> Result<DVector<f64>, ModelError> {
        let nm = self.n_cur * self.m;
        let rc = rhat.rows(0, nm);
        let ru = rhat.rows(nm, nm);
        let hc = h.rows(0, nm);
        let hu = h.rows(nm, nm);
        let mut out = DVector::zeros(2 * nm);
        for i in 0..nm {
            let d = self.u0[i] + ru[i];
            if d.abs() < self.u_floor {
                return Err(ModelError::FloorViolation(format!(
                    "state magnitude {:.3e} below the floor during preimage derivative",
                    d.abs()
                )));
            }
            out[i] = hc[i] * self.u0[i] / d - rc[i] * self.u0[i] * hu[i] / (d * d);
            out[nm + i] = hu[i];
        }
        Ok(out)
    }

    fn r_inverse_deriv_adjoint_apply(
        &self,
        rhat: &DVector<f64>,
        g: &DVector<f64>,
    ) -> Result<DVector<f64>, ModelError> {
        let nm = self.n_cur * self.m;
        let rc = rhat.rows(0, nm);
        let ru = rhat.rows(nm, nm);
        let gc = g.rows(0, nm);
        let gu = g.rows(nm, nm);
        let mut out = DVector::zeros(2 * nm);
        for i in 0..nm {
            let d = self.u0[i] + ru[i];
            if d.abs() < self.u_floor {
                return Err(ModelError::FloorViolation(format!(
                    "state magnitude {:.3e} below the floor during preimage adjoint",
                    d.abs()
                )));
            }
            out[i] = gc[i] * self.u0[i] / d;
            out[nm + i] = -gc[i] * rc[i] * self.u0[i] / (d * d) + gu[i];
        }
        Ok(out)
    }

    fn p_apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let nm = self.n_cur * self.m;
        let c = self.c_part(x).into_owned();
        let pc = stack_projection_flat(&c, self.n_cur, self.m, &self.stack_weights);
        let mut out = DVector::zeros(2 * nm);
        out.rows_mut(0, nm).copy_from(&pc);
        out
    }

    fn admissibility_radius(&self) -> f64 {
        self.rho0
    }
}
