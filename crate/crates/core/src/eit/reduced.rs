//! Reduced-form relaxed models with artificial boundary data.
//!
//! Both the impedance problem and the reduced potential problem share one
//! structure: the unknown is a coefficient field `q` plus one artificial
//! boundary vector `z_j` per current, the forward map is
//! `F(q, z⃗)_j = tr^D u_j(q) + z_j` with `u_j` the elliptic solve, the
//! penalty is `P(q, z⃗) = z⃗`, and the relaxation map reads
//! `r(q, z⃗)_j = (q − q₀, z_j − z_{0,j} + tr^D v_j)` with an auxiliary
//! elliptic solve `v_j` driven by `(q − q₀)` and `(u_j − u_{0,j})`.
//!
//! The auxiliary problem admits two formulations, differing in the
//! principal coefficient of its solve (the frozen base coefficient versus
//! the current iterate). Direct substitution closes the identity
//! `F(x) − F(x₀) = K·r(x)` exactly only for the frozen-coefficient form:
//! with `S_q` the solve operator at coefficient `q` and `A'` the
//! coefficient-linear stiffness action,
//! `u_j − u_{0,j} = −S_q A'(q − q₀) u_{0,j}` while the linearization gives
//! `w_j = −S_{q₀} A'(q − q₀) u_{0,j}`, so the defect
//! `u_j − u_{0,j} − w_j = −S_{q₀} A'(q − q₀)(u_j − u_{0,j})` is precisely
//! the frozen-coefficient auxiliary solution. Both variants are
//! implemented; construction measures the identity defect of each and
//! selects the closing one by default, keeping the other available as a
//! regression control.

use nalgebra::DVector;
use std::sync::{Arc, Mutex};

use crate::model::{range_invariance_residual, ModelError, RangeInvariantModel};
use crate::pde::{
    assemble, stiffness_apply, stiffness_coeff_gradient, BoundaryCurrentBasis, CoefficientKind,
    EllipticSystem, Field, Grid2D,
};

use super::scatter_boundary;

/// Principal coefficient used by the auxiliary solve of the relaxation map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxVariant {
    /// Solve with the base coefficient `q₀` (closes the identity exactly).
    FrozenCoefficient,
    /// Solve with the current coefficient `q` (the textbook display; leaves
    /// a second-order defect).
    CurrentCoefficient,
}

/// Construction-time identity-check outcome.
#[derive(Debug, Clone, Copy)]
pub struct VariantSelection {
    pub chosen: AuxVariant,
    pub frozen_residual: f64,
    pub current_residual: f64,
}

/// Configuration of a reduced relaxed model.
#[derive(Debug, Clone, Copy)]
pub struct ReducedModelConfig {
    /// Admissible ball radius around the base point.
    pub rho0: f64,
    /// Coefficient bounds (admissibility).
    pub coeff_lo: f64,
    pub coeff_hi: f64,
    /// Force an auxiliary variant instead of selecting by identity check.
    pub variant: Option<AuxVariant>,
    /// Sample count for the construction-time identity check.
    pub check_samples: usize,
}

impl Default for ReducedModelConfig {
    fn default() -> Self {
        ReducedModelConfig {
            rho0: 0.5,
            coeff_lo: 0.1,
            coeff_hi: 10.0,
            variant: None,
            check_samples: 5,
        }
    }
}

/// Problem-specific pieces: which elliptic operator backs the solves and
/// how its coefficient dependence acts.
pub trait ReducedProblem: Send + Sync {
    fn kind(&self) -> CoefficientKind;

    /// `A'(dq)·w`, the coefficient-derivative of the operator applied to a
    /// state.
    fn coeff_action(&self, grid: &Grid2D, dq: &DVector<f64>, w: &DVector<f64>) -> DVector<f64>;

    /// Adjoint pairing: `g` with `⟨A'(dq)w, λ⟩ = ⟨dq, g⟩`.
    fn coeff_gradient(&self, grid: &Grid2D, w: &DVector<f64>, lambda: &DVector<f64>)
        -> DVector<f64>;

    /// Sign of the auxiliary right-hand side `sign · A'(q − q₀)(u − u₀)`
    /// for the given variant.
    fn aux_rhs_sign(&self, variant: AuxVariant) -> f64;
}

/// Conductivity problem: `−∇·(q∇u) = 0`, flux data.
pub struct DiffusionProblem;

impl ReducedProblem for DiffusionProblem {
    fn kind(&self) -> CoefficientKind {
        CoefficientKind::Diffusion
    }

    fn coeff_action(&self, grid: &Grid2D, dq: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        stiffness_apply(grid, dq, w)
    }

    fn coeff_gradient(
        &self,
        grid: &Grid2D,
        w: &DVector<f64>,
        lambda: &DVector<f64>,
    ) -> DVector<f64> {
        stiffness_coeff_gradient(grid, w, lambda)
    }

    fn aux_rhs_sign(&self, _variant: AuxVariant) -> f64 {
        // -div(q0 grad v) = div((q - q0) grad (u - u0)) in weak form.
        -1.0
    }
}

/// Reaction problem: `−Δu + q·u = 0`, same flux data.
pub struct PotentialProblem;

impl ReducedProblem for PotentialProblem {
    fn kind(&self) -> CoefficientKind {
        CoefficientKind::Schroedinger
    }

    fn coeff_action(&self, grid: &Grid2D, dq: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(grid.num_nodes(), |i, _| grid.volume(i) * dq[i] * w[i])
    }

    fn coeff_gradient(
        &self,
        grid: &Grid2D,
        w: &DVector<f64>,
        lambda: &DVector<f64>,
    ) -> DVector<f64> {
        DVector::from_fn(grid.num_nodes(), |i, _| grid.volume(i) * w[i] * lambda[i])
    }

    fn aux_rhs_sign(&self, variant: AuxVariant) -> f64 {
        // The frozen form needs -(q - q0)(u - u0); the textbook display of
        // the current-coefficient form carries the opposite sign.
        match variant {
            AuxVariant::FrozenCoefficient => -1.0,
            AuxVariant::CurrentCoefficient => 1.0,
        }
    }
}

/// Cached per-coefficient solver state (system factorization, per-current
/// states and auxiliary solutions).
struct CoeffState {
    q: DVector<f64>,
    sys: EllipticSystem,
    u: Vec<DVector<f64>>,
    /// Auxiliary solutions for the model's active variant.
    v: Vec<DVector<f64>>,
}

/// Reduced relaxed model over a [`ReducedProblem`]; see the module docs.
pub struct ReducedRelaxedModel<P: ReducedProblem> {
    problem: P,
    grid: Arc<Grid2D>,
    currents: Vec<DVector<f64>>,
    q0: DVector<f64>,
    x0: DVector<f64>,
    f_x0: DVector<f64>,
    sys0: EllipticSystem,
    u0: Vec<DVector<f64>>,
    variant: AuxVariant,
    selection: Option<VariantSelection>,
    cfg: ReducedModelConfig,
    m: usize,
    nb: usize,
    n_cur: usize,
    // Two-slot cache of recently used coefficient states.
    cache: Mutex<Vec<Arc<CoeffState>>>,
}

fn build_reduced<P: ReducedProblem>(
    problem: P,
    grid: Arc<Grid2D>,
    basis: &BoundaryCurrentBasis,
    q0_field: &Field,
    cfg: ReducedModelConfig,
) -> Result<ReducedRelaxedModel<P>, ModelError> {
    let m = grid.num_nodes();
    let nb = grid.boundary_nodes().len();
    let n_cur = basis.len();
    let q0 = q0_field.values().clone();
    let sys0 = assemble(grid.clone(), problem.kind(), q0_field)?;
    let mut u0 = Vec::with_capacity(n_cur);
    for j in 0..n_cur {
        u0.push(sys0.solve_neumann(basis.current(j))?.into_values());
    }
    let mut x0 = DVector::zeros(m + n_cur * nb);
    x0.rows_mut(0, m).copy_from(&q0);
    let mut f_x0 = DVector::zeros(n_cur * nb);
    for j in 0..n_cur {
        for (k, &b) in grid.boundary_nodes().iter().enumerate() {
            f_x0[j * nb + k] = u0[j][b];
        }
    }
    let variant = cfg.variant.unwrap_or(AuxVariant::FrozenCoefficient);
    let mut model = ReducedRelaxedModel {
        problem,
        grid,
        currents: (0..n_cur).map(|j| basis.current(j).clone()).collect(),
        q0,
        x0,
        f_x0,
        sys0,
        u0,
        variant,
        selection: None,
        cfg,
        m,
        nb,
        n_cur,
        cache: Mutex::new(Vec::new()),
    };
    if cfg.variant.is_none() {
        let selection = model.select_variant()?;
        model.variant = selection.chosen;
        model.selection = Some(selection);
        model.cache.lock().unwrap().clear();
    }
    Ok(model)
}

/// Impedance model with artificial boundary voltages.
pub fn eit_model(
    grid: Arc<Grid2D>,
    basis: &BoundaryCurrentBasis,
    sigma0: &Field,
    cfg: ReducedModelConfig,
) -> Result<ReducedRelaxedModel<DiffusionProblem>, ModelError> {
    build_reduced(DiffusionProblem, grid, basis, sigma0, cfg)
}

/// Reduced potential model with artificial boundary data.
pub fn schroedinger_alt_model(
    grid: Arc<Grid2D>,
    basis: &BoundaryCurrentBasis,
    c0: &Field,
    cfg: ReducedModelConfig,
) -> Result<ReducedRelaxedModel<PotentialProblem>, ModelError> {
    build_reduced(PotentialProblem, grid, basis, c0, cfg)
}

impl<P: ReducedProblem> ReducedRelaxedModel<P> {
    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn num_currents(&self) -> usize {
        self.n_cur
    }

    pub fn variant(&self) -> AuxVariant {
        self.variant
    }

    /// Outcome of the construction-time identity check, when it ran.
    pub fn variant_selection(&self) -> Option<VariantSelection> {
        self.selection
    }

    /// Coefficient and boundary-vector components of a parameter vector.
    pub fn split_x(&self, x: &DVector<f64>) -> (DVector<f64>, Vec<DVector<f64>>) {
        let q = x.rows(0, self.m).into_owned();
        let zs = (0..self.n_cur)
            .map(|j| x.rows(self.m + j * self.nb, self.nb).into_owned())
            .collect();
        (q, zs)
    }

    /// Truth state for a coefficient field: `(q_true, z⃗ = 0)`.
    pub fn truth_state(&self, q_true: &Field) -> DVector<f64> {
        let mut x = DVector::zeros(self.dim_x());
        x.rows_mut(0, self.m).copy_from(q_true.values());
        x
    }

    fn coeff_admissible(&self, q: &DVector<f64>) -> bool {
        let (lo, hi) = (q.min(), q.max());
        lo >= self.cfg.coeff_lo && hi <= self.cfg.coeff_hi
    }

    /// Solver state at coefficient `q`, cached for reuse across the
    /// evaluation/derivative calls of one iterate.
    fn state(&self, q: &DVector<f64>) -> Result<Arc<CoeffState>, ModelError> {
        {
            let cache = self.cache.lock().unwrap();
            if let Some(hit) = cache.iter().find(|s| s.q == *q) {
                return Ok(hit.clone());
            }
        }
        let state = Arc::new(self.build_state(q, self.variant)?);
        let mut cache = self.cache.lock().unwrap();
        if cache.len() >= 2 {
            cache.remove(0);
        }
        cache.push(state.clone());
        Ok(state)
    }

    fn build_state(&self, q: &DVector<f64>, variant: AuxVariant) -> Result<CoeffState, ModelError> {
        if !self.coeff_admissible(q) {
            return Err(ModelError::Inadmissible(format!(
                "coefficient range [{:.3e}, {:.3e}] outside [{}, {}]",
                q.min(),
                q.max(),
                self.cfg.coeff_lo,
                self.cfg.coeff_hi
            )));
        }
        let field = Field::new(self.grid.clone(), q.clone())?;
        let sys = assemble(self.grid.clone(), self.problem.kind(), &field)?;
        let mut u = Vec::with_capacity(self.n_cur);
        for j in 0..self.n_cur {
            u.push(sys.solve_neumann(&self.currents[j])?.into_values());
        }
        let dq = q - &self.q0;
        let sign = self.problem.aux_rhs_sign(variant);
        let mut v = Vec::with_capacity(self.n_cur);
        for j in 0..self.n_cur {
            let rhs = sign * self.problem.coeff_action(&self.grid, &dq, &(&u[j] - &self.u0[j]));
            let sol = match variant {
                AuxVariant::FrozenCoefficient => self.sys0.solve_rhs_unchecked(&rhs)?,
                AuxVariant::CurrentCoefficient => sys.solve_rhs_unchecked(&rhs)?,
            };
            v.push(sol);
        }
        Ok(CoeffState { q: q.clone(), sys, u, v })
    }

    fn aux_sys<'a>(&'a self, state: &'a CoeffState) -> &'a EllipticSystem {
        match self.variant {
            AuxVariant::FrozenCoefficient => &self.sys0,
            AuxVariant::CurrentCoefficient => &state.sys,
        }
    }

    fn trace_into(&self, u: &DVector<f64>, out: &mut nalgebra::DVectorViewMut<f64>) {
        for (k, &b) in self.grid.boundary_nodes().iter().enumerate() {
            out[k] += u[b];
        }
    }

    /// Directional derivative of the auxiliary solutions `v_j` with respect
    /// to the coefficient, at the given state.
    fn aux_dv(&self, state: &CoeffState, dq: &DVector<f64>) -> Result<Vec<DVector<f64>>, ModelError> {
        let aux = self.aux_sys(state);
        let sign = self.problem.aux_rhs_sign(self.variant);
        let dq_base = &state.q - &self.q0;
        let mut dvs = Vec::with_capacity(self.n_cur);
        for j in 0..self.n_cur {
            let du = state
                .sys
                .solve_rhs_unchecked(&(-self.problem.coeff_action(&self.grid, dq, &state.u[j])))?;
            let mut db = self.problem.coeff_action(&self.grid, dq, &(&state.u[j] - &self.u0[j]));
            db += self.problem.coeff_action(&self.grid, &dq_base, &du);
            db *= sign;
            let mut dv = aux.solve_rhs_unchecked(&db)?;
            if self.variant == AuxVariant::CurrentCoefficient {
                let extra = state
                    .sys
                    .solve_rhs_unchecked(&self.problem.coeff_action(&self.grid, dq, &state.v[j]))?;
                dv -= &extra;
            }
            dvs.push(dv);
        }
        Ok(dvs)
    }

    /// Adjoint accumulation: returns `g` with
    /// `Σ_j ⟨tr dv_j(dq), z_j⟩ = ⟨dq, g⟩` for boundary blocks `z_j`.
    fn aux_dv_adjoint(
        &self,
        state: &CoeffState,
        z_blocks: &[DVector<f64>],
    ) -> Result<DVector<f64>, ModelError> {
        let aux = self.aux_sys(state);
        let sign = self.problem.aux_rhs_sign(self.variant);
        let dq_base = &state.q - &self.q0;
        let mut adj_q = DVector::zeros(self.m);
        for j in 0..self.n_cur {
            let lambda = aux.solve_rhs_unchecked(&scatter_boundary(&self.grid, &z_blocks[j]))?;
            adj_q += sign
                * self
                    .problem
                    .coeff_gradient(&self.grid, &(&state.u[j] - &self.u0[j]), &lambda);
            let nu = state
                .sys
                .solve_rhs_unchecked(&self.problem.coeff_action(&self.grid, &dq_base, &lambda))?;
            adj_q -= sign * self.problem.coeff_gradient(&self.grid, &state.u[j], &nu);
            if self.variant == AuxVariant::CurrentCoefficient {
                adj_q -= self.problem.coeff_gradient(&self.grid, &state.v[j], &lambda);
            }
        }
        Ok(adj_q)
    }

    /// Identity defect of each variant on a small random battery around
    /// the base point; used to pick the default variant.
    fn select_variant(&mut self) -> Result<VariantSelection, ModelError> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x52495643);
        let mut worst = [0.0f64; 2];
        let variants = [AuxVariant::FrozenCoefficient, AuxVariant::CurrentCoefficient];
        for _ in 0..self.cfg.check_samples {
            let x = crate::model::probes::sample_admissible(self, &mut rng, 0.5);
            for (vi, &variant) in variants.iter().enumerate() {
                self.variant = variant;
                self.cache.lock().unwrap().clear();
                let res = range_invariance_residual(self, &x)?;
                worst[vi] = worst[vi].max(res);
            }
        }
        let chosen = if worst[0] <= worst[1] {
            AuxVariant::FrozenCoefficient
        } else {
            AuxVariant::CurrentCoefficient
        };
        self.variant = chosen;
        Ok(VariantSelection {
            chosen,
            frozen_residual: worst[0],
            current_residual: worst[1],
        })
    }
}

impl<P: ReducedProblem> RangeInvariantModel for ReducedRelaxedModel<P> {
    fn dim_x(&self) -> usize {
        self.m + self.n_cur * self.nb
    }

    fn dim_lifted(&self) -> usize {
        self.m + self.n_cur * self.nb
    }

    fn dim_data(&self) -> usize {
        self.n_cur * self.nb
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
        let (q, _) = self.split_x(x);
        let state = self.state(&q)?;
        let mut y = x.rows(self.m, self.n_cur * self.nb).into_owned();
        for j in 0..self.n_cur {
            let mut block = y.rows_mut(j * self.nb, self.nb);
            self.trace_into(&state.u[j], &mut block);
        }
        Ok(y)
    }

    fn f_deriv_apply(&self, x: &DVector<f64>, h: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        let (q, _) = self.split_x(x);
        let (dq, _) = self.split_x(h);
        let state = self.state(&q)?;
        let mut y = h.rows(self.m, self.n_cur * self.nb).into_owned();
        for j in 0..self.n_cur {
            let rhs = -self.problem.coeff_action(&self.grid, &dq, &state.u[j]);
            let du = state.sys.solve_rhs_unchecked(&rhs)?;
            let mut block = y.rows_mut(j * self.nb, self.nb);
            self.trace_into(&du, &mut block);
        }
        Ok(y)
    }

    fn f_deriv_adjoint_apply(
        &self,
        x: &DVector<f64>,
        g: &DVector<f64>,
    ) -> Result<DVector<f64>, ModelError> {
        let (q, _) = self.split_x(x);
        let state = self.state(&q)?;
        let mut out = DVector::zeros(self.dim_x());
        out.rows_mut(self.m, self.n_cur * self.nb).copy_from(g);
        let mut adj_q = DVector::zeros(self.m);
        for j in 0..self.n_cur {
            let gj = g.rows(j * self.nb, self.nb).into_owned();
            let lambda = state.sys.solve_rhs_unchecked(&scatter_boundary(&self.grid, &gj))?;
            adj_q -= self.problem.coeff_gradient(&self.grid, &state.u[j], &lambda);
        }
        out.rows_mut(0, self.m).copy_from(&adj_q);
        Ok(out)
    }

    fn k_apply(&self, rhat: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        let (dq, _) = self.split_x(rhat);
        let mut y = rhat.rows(self.m, self.n_cur * self.nb).into_owned();
        for j in 0..self.n_cur {
            let rhs = -self.problem.coeff_action(&self.grid, &dq, &self.u0[j]);
            let w = self.sys0.solve_rhs_unchecked(&rhs)?;
            let mut block = y.rows_mut(j * self.nb, self.nb);
            self.trace_into(&w, &mut block);
        }
        Ok(y)
    }

    fn k_adjoint_apply(&self, y: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        let mut out = DVector::zeros(self.dim_x());
        out.rows_mut(self.m, self.n_cur * self.nb).copy_from(y);
        let mut adj_q = DVector::zeros(self.m);
        for j in 0..self.n_cur {
            let gj = y.rows(j * self.nb, self.nb).into_owned();
            let lambda = self.sys0.solve_rhs_unchecked(&scatter_boundary(&self.grid, &gj))?;
            adj_q -= self.problem.coeff_gradient(&self.grid, &self.u0[j], &lambda);
        }
        out.rows_mut(0, self.m).copy_from(&adj_q);
        Ok(out)
    }

    fn r_eval(&self, x: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        let (q, _) = self.split_x(x);
        let state = self.state(&q)?;
        let mut r = x.clone();
        r.rows_mut(0, self.m).copy_from(&(&q - &self.q0));
        for j in 0..self.n_cur {
            let mut block = r.rows_mut(self.m + j * self.nb, self.nb);
            self.trace_into(&state.v[j], &mut block);
        }
        Ok(r)
    }

    fn r_inverse(&self, rhat: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        let q = &self.q0 + rhat.rows(0, self.m);
        let state = self.state(&q)?;
        let mut x = rhat.clone();
        x.rows_mut(0, self.m).copy_from(&q);
        for j in 0..self.n_cur {
            let mut tr = DVector::zeros(self.nb);
            {
                let mut view = tr.rows_mut(0, self.nb);
                self.trace_into(&state.v[j], &mut view);
            }
            let mut block = x.rows_mut(self.m + j * self.nb, self.nb);
            block -= &tr;
        }
        Ok(x)
    }

    fn r_deriv_apply(&self, x: &DVector<f64>, h: &DVector<f64>) -> Result<DVector<f64>, ModelError> {
        let (q, _) = self.split_x(x);
        let (dq, _) = self.split_x(h);
        let state = self.state(&q)?;
        let dvs = self.aux_dv(&state, &dq)?;
        let mut out = h.clone();
        for (j, dv) in dvs.iter().enumerate() {
            let mut block = out.rows_mut(self.m + j * self.nb, self.nb);
            self.trace_into(dv, &mut block);
        }
        Ok(out)
    }

    fn r_deriv_adjoint_apply(
        &self,
        x: &DVector<f64>,
        g: &DVector<f64>,
    ) -> Result<DVector<f64>, ModelError> {
        let (q, _) = self.split_x(x);
        let state = self.state(&q)?;
        let (_, z_blocks) = self.split_x(g);
        let aux_adj = self.aux_dv_adjoint(&state, &z_blocks)?;
        let mut out = g.clone();
        {
            let mut head = out.rows_mut(0, self.m);
            head += &aux_adj;
        }
        Ok(out)
    }

    fn r_inverse_deriv_apply(
        &self,
        rhat: &DVector<f64>,
        h: &DVector<f64>,
    ) -> Result<DVector<f64>, ModelError> {
        let q = &self.q0 + rhat.rows(0, self.m);
        let (dq, _) = self.split_x(h);
        let state = self.state(&q)?;
        let dvs = self.aux_dv(&state, &dq)?;
        let mut out = h.clone();
        for (j, dv) in dvs.iter().enumerate() {
            let mut tr = DVector::zeros(self.nb);
            {
                let mut view = tr.rows_mut(0, self.nb);
                self.trace_into(dv, &mut view);
            }
            let mut block = out.rows_mut(self.m + j * self.nb, self.nb);
            block -= &tr;
        }
        Ok(out)
    }

    fn r_inverse_deriv_adjoint_apply(
        &self,
        rhat: &DVector<f64>,
        g: &DVector<f64>,
    ) -> Result<DVector<f64>, ModelError> {
        let q = &self.q0 + rhat.rows(0, self.m);
        let state = self.state(&q)?;
        let (_, z_blocks) = self.split_x(g);
        let aux_adj = self.aux_dv_adjoint(&state, &z_blocks)?;
        let mut out = g.clone();
        {
            let mut head = out.rows_mut(0, self.m);
            head -= &aux_adj;
        }
        Ok(out)
    }

    fn p_apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut px = x.clone();
        px.rows_mut(0, self.m).fill(0.0);
        px
    }

    fn admissibility_radius(&self) -> f64 {
        self.cfg.rho0
    }

    fn is_admissible(&self, x: &DVector<f64>) -> bool {
        if x.len() != self.dim_x() {
            return false;
        }
        let q = x.rows(0, self.m).into_owned();
        self.coeff_admissible(&q) && (x - &self.x0).norm() <= self.cfg.rho0
    }
}
