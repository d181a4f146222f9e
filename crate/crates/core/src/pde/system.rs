//! Assembly of the elliptic operators and the gauged Neumann solves.
//!
//! Assembled matrices are symmetric and linear in the coefficient. The
//! conductivity (pure-flux) operator is singular with a constant kernel; its
//! solves impose the zero boundary-average gauge through the rank-one
//! augmentation `A + m mᵀ`, where `m` carries the boundary quadrature
//! weights. For compatible data this is algebraically equivalent to the
//! bordered Lagrange-multiplier system: left-multiplying `(A + m mᵀ)u = b`
//! by `1ᵀ` gives `|∂Ω|·(mᵀu) = 1ᵀb = 0`, so the gauge holds and `Au = b`.

use nalgebra::{DMatrix, DVector};
use std::sync::{Arc, OnceLock};

use super::grid::triangle_area;
use super::{CsrMatrix, Field, Grid2D, GridShape, PdeError};

/// Reaction-vs-flux form of the operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientKind {
    /// `−Δu + c·u` with nodal reaction coefficient `c`.
    Schroedinger,
    /// `−∇·(σ∇u)` with edge/element-averaged conductivity `σ`.
    Diffusion,
}

/// Gauge applied by the solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    None,
    /// Enforce `∫_∂Ω u dΓ = 0` (required by the singular diffusion operator).
    BoundaryMeanZero,
}

enum Factor {
    Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    /// Conjugate gradients on the (possibly gauge-augmented) operator.
    Iterative,
}

/// Assembled discrete elliptic operator with a lazily cached factorization.
pub struct EllipticSystem {
    grid: Arc<Grid2D>,
    kind: CoefficientKind,
    gauge: Gauge,
    mat: CsrMatrix,
    /// Gauge functional (boundary weights scattered to nodes); zero vector
    /// when ungauged.
    gauge_vec: DVector<f64>,
    factor: OnceLock<Result<Factor, String>>,
}

/// Maximum node count for dense factorization; larger systems fall back to
/// conjugate gradients.
const DENSE_LIMIT: usize = 1500;

/// Applies the coefficient-linear stiffness `A(σ)u` without assembling.
///
/// Must stay in exact agreement with [`assemble`]'s diffusion matrix; the
/// Jacobian machinery of the impedance models relies on that.
pub fn stiffness_apply(grid: &Grid2D, sigma: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
    let mut y = DVector::zeros(grid.num_nodes());
    match grid.shape() {
        GridShape::Square { .. } => {
            for &(i, j, t) in grid.fv_edges() {
                let coeff = t * 0.5 * (sigma[i] + sigma[j]);
                let d = coeff * (u[i] - u[j]);
                y[i] += d;
                y[j] -= d;
            }
        }
        GridShape::Disk { .. } => {
            for tri in grid.triangles() {
                let (k, _) = triangle_gradients(grid, tri);
                let sbar = (sigma[tri[0]] + sigma[tri[1]] + sigma[tri[2]]) / 3.0;
                for a in 0..3 {
                    let mut acc = 0.0;
                    for b in 0..3 {
                        acc += k[a][b] * u[tri[b]];
                    }
                    y[tri[a]] += sbar * acc;
                }
            }
        }
    }
    y
}

/// Nodal gradient `g` of the stiffness form with respect to the
/// coefficient: `⟨A(dσ)u, λ⟩ = ⟨dσ, g⟩` for every direction `dσ`.
pub fn stiffness_coeff_gradient(
    grid: &Grid2D,
    u: &DVector<f64>,
    lambda: &DVector<f64>,
) -> DVector<f64> {
    let mut g = DVector::zeros(grid.num_nodes());
    match grid.shape() {
        GridShape::Square { .. } => {
            for &(i, j, t) in grid.fv_edges() {
                let q = t * (u[i] - u[j]) * (lambda[i] - lambda[j]);
                g[i] += 0.5 * q;
                g[j] += 0.5 * q;
            }
        }
        GridShape::Disk { .. } => {
            for tri in grid.triangles() {
                let (k, _) = triangle_gradients(grid, tri);
                let mut q = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        q += lambda[tri[a]] * k[a][b] * u[tri[b]];
                    }
                }
                for &v in tri {
                    g[v] += q / 3.0;
                }
            }
        }
    }
    g
}

/// Per-triangle P1 stiffness (unit coefficient) and area.
fn triangle_gradients(grid: &Grid2D, tri: &[usize; 3]) -> ([[f64; 3]; 3], f64) {
    let p: Vec<(f64, f64)> = tri.iter().map(|&v| grid.coords(v)).collect();
    let area = triangle_area(p[0], p[1], p[2]);
    let b = [p[1].1 - p[2].1, p[2].1 - p[0].1, p[0].1 - p[1].1];
    let c = [p[2].0 - p[1].0, p[0].0 - p[2].0, p[1].0 - p[0].0];
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
        }
    }
    (k, area)
}

/// Assembles the discrete operator for the given kind and coefficient.
///
/// Diffusion requires a strictly positive coefficient and receives the
/// boundary-mean-zero gauge; the reaction form is solved ungauged (its
/// operator is invertible for admissible potentials, and the vanishing
/// boundary average travels as a residual block of the all-at-once
/// formulations instead).
pub fn assemble(
    grid: Arc<Grid2D>,
    kind: CoefficientKind,
    coefficient: &Field,
) -> Result<EllipticSystem, PdeError> {
    if coefficient.grid().num_nodes() != grid.num_nodes() {
        return Err(PdeError::DimensionMismatch {
            expected: grid.num_nodes(),
            got: coefficient.grid().num_nodes(),
        });
    }
    let n = grid.num_nodes();
    let coeff = coefficient.values();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let stiffness_coeff: DVector<f64> = match kind {
        CoefficientKind::Diffusion => {
            let min = coeff.min();
            if !(min > 0.0) {
                return Err(PdeError::Admissibility(format!(
                    "conductivity must be strictly positive (minimum {min:.3e})"
                )));
            }
            coeff.clone()
        }
        CoefficientKind::Schroedinger => DVector::from_element(n, 1.0),
    };
    match grid.shape() {
        GridShape::Square { .. } => {
            for &(i, j, t) in grid.fv_edges() {
                let w = t * 0.5 * (stiffness_coeff[i] + stiffness_coeff[j]);
                triplets.push((i, i, w));
                triplets.push((j, j, w));
                triplets.push((i, j, -w));
                triplets.push((j, i, -w));
            }
        }
        GridShape::Disk { .. } => {
            for tri in grid.triangles() {
                let (k, _) = triangle_gradients(&grid, tri);
                let sbar =
                    (stiffness_coeff[tri[0]] + stiffness_coeff[tri[1]] + stiffness_coeff[tri[2]])
                        / 3.0;
                for a in 0..3 {
                    for b in 0..3 {
                        triplets.push((tri[a], tri[b], sbar * k[a][b]));
                    }
                }
            }
        }
    }
    if kind == CoefficientKind::Schroedinger {
        for i in 0..n {
            triplets.push((i, i, grid.volume(i) * coeff[i]));
        }
    }
    let mat = CsrMatrix::from_triplets(n, &triplets);
    let gauge = match kind {
        CoefficientKind::Diffusion => Gauge::BoundaryMeanZero,
        CoefficientKind::Schroedinger => Gauge::None,
    };
    let mut gauge_vec = DVector::zeros(n);
    if gauge == Gauge::BoundaryMeanZero {
        for (&b, &w) in grid.boundary_nodes().iter().zip(grid.boundary_weights()) {
            gauge_vec[b] = w;
        }
    }
    Ok(EllipticSystem { grid, kind, gauge, mat, gauge_vec, factor: OnceLock::new() })
}

impl EllipticSystem {
    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn kind(&self) -> CoefficientKind {
        self.kind
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.mat
    }

    fn gauged_dense(&self) -> DMatrix<f64> {
        let mut d = self.mat.to_dense();
        if self.gauge == Gauge::BoundaryMeanZero {
            d += &self.gauge_vec * self.gauge_vec.transpose();
        }
        d
    }

    fn gauged_apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut y = self.mat.matvec(v);
        if self.gauge == Gauge::BoundaryMeanZero {
            let s = self.gauge_vec.dot(v);
            y.axpy(s, &self.gauge_vec, 1.0);
        }
        y
    }

    fn factorization(&self) -> Result<&Factor, PdeError> {
        let res = self.factor.get_or_init(|| {
            if self.mat.dim() > DENSE_LIMIT {
                return Ok(Factor::Iterative);
            }
            let dense = self.gauged_dense();
            if let Some(chol) = dense.clone().cholesky() {
                return Ok(Factor::Chol(chol));
            }
            let lu = dense.lu();
            // An exactly singular matrix (e.g. ungauged diffusion) has no
            // usable LU solve; probe with a trivial solve.
            if lu.solve(&DVector::zeros(self.mat.dim())).is_some() {
                Ok(Factor::Lu(lu))
            } else {
                Err("singular operator (missing gauge?)".to_string())
            }
        });
        match res {
            Ok(f) => Ok(f),
            Err(msg) => Err(PdeError::SolveFailure(msg.clone())),
        }
    }

    /// Solves the (gauged) system for an arbitrary nodal right-hand side.
    ///
    /// Gauged solves check the discrete compatibility `1ᵀ·rhs ≈ 0`; the
    /// returned solution then satisfies both `A·u = rhs` and the zero
    /// boundary-average gauge.
    pub fn solve_rhs(&self, rhs: &DVector<f64>) -> Result<DVector<f64>, PdeError> {
        if rhs.len() != self.mat.dim() {
            return Err(PdeError::DimensionMismatch { expected: self.mat.dim(), got: rhs.len() });
        }
        if self.gauge == Gauge::BoundaryMeanZero {
            let total = rhs.sum();
            if total.abs() > 1e-10 * (1.0 + rhs.norm()) {
                return Err(PdeError::IncompatibleCurrent(total));
            }
        }
        self.solve_rhs_unchecked(rhs)
    }

    /// Solves with the gauge-augmented operator without the compatibility
    /// check. Adjoint computations apply the inverse of the augmented
    /// operator to arbitrary vectors; only physical solves require
    /// compatible data.
    pub fn solve_rhs_unchecked(&self, rhs: &DVector<f64>) -> Result<DVector<f64>, PdeError> {
        if rhs.len() != self.mat.dim() {
            return Err(PdeError::DimensionMismatch { expected: self.mat.dim(), got: rhs.len() });
        }
        match self.factorization()? {
            Factor::Chol(chol) => Ok(chol.solve(rhs)),
            Factor::Lu(lu) => lu
                .solve(rhs)
                .ok_or_else(|| PdeError::SolveFailure("LU solve failed".into())),
            Factor::Iterative => {
                let u = crate::numerics::conjugate_gradients(
                    |v| self.gauged_apply(v),
                    rhs,
                    None,
                    1e-13,
                    20 * self.mat.dim(),
                );
                let res = (self.gauged_apply(&u) - rhs).norm();
                if res > 1e-8 * (1.0 + rhs.norm()) {
                    return Err(PdeError::SolveFailure(format!(
                        "CG stagnated at residual {res:.3e}"
                    )));
                }
                Ok(u)
            }
        }
    }

    /// Solves the Neumann problem for a boundary current given on the
    /// boundary walk: the current is lifted to the right-hand side through
    /// the boundary quadrature weights.
    pub fn solve_neumann(&self, current: &DVector<f64>) -> Result<Field, PdeError> {
        let walk = self.grid.boundary_nodes();
        if current.len() != walk.len() {
            return Err(PdeError::DimensionMismatch { expected: walk.len(), got: current.len() });
        }
        let mut rhs: DVector<f64> = DVector::zeros(self.mat.dim());
        for (k, &b) in walk.iter().enumerate() {
            rhs[b] += self.grid.boundary_weights()[k] * current[k];
        }
        if self.gauge == Gauge::BoundaryMeanZero {
            let mean: f64 = rhs.sum();
            if mean.abs() > 1e-10 * (1.0 + current.norm()) {
                return Err(PdeError::IncompatibleCurrent(mean));
            }
        }
        let u = self.solve_rhs(&rhs)?;
        Field::new(self.grid.clone(), u)
    }
}

/// Neumann-to-Dirichlet matrix of a system with respect to a boundary
/// current basis: entry `(m, n)` is the discrete `L²(∂Ω)` inner product of
/// `φ_m` with the Dirichlet trace of the solve for `φ_n`.
pub fn ntd_matrix(
    sys: &EllipticSystem,
    basis: &super::BoundaryCurrentBasis,
) -> Result<DMatrix<f64>, PdeError> {
    let n = basis.len();
    let w = sys.grid().boundary_weights();
    let mut out = DMatrix::zeros(n, n);
    for jn in 0..n {
        let u = sys.solve_neumann(basis.current(jn))?;
        let tr = super::dirichlet_trace(&u);
        for jm in 0..n {
            let phi = basis.current(jm);
            let mut acc = 0.0;
            for k in 0..w.len() {
                acc += w[k] * phi[k] * tr[k];
            }
            out[(jm, jn)] = acc;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::standard_normal_vector;
    use rand::SeedableRng;

    fn square(n: usize) -> Arc<Grid2D> {
        Arc::new(Grid2D::new_square(n).unwrap())
    }

    #[test]
    fn constants_span_the_kernel_without_reaction() {
        for grid in [square(9), Arc::new(Grid2D::new_disk(6, 24).unwrap())] {
            let sigma = Field::constant(grid.clone(), 1.0);
            let sys = assemble(grid.clone(), CoefficientKind::Diffusion, &sigma).unwrap();
            assert!(sys.matrix().row_sums().abs().max() <= 1e-12);
            let c0 = Field::constant(grid.clone(), 0.0);
            let sys2 = assemble(grid, CoefficientKind::Schroedinger, &c0).unwrap();
            assert!(sys2.matrix().row_sums().abs().max() <= 1e-12);
        }
    }

    #[test]
    fn unit_conductivity_matches_zero_potential_stiffness() {
        let grid = square(9);
        let sys_d =
            assemble(grid.clone(), CoefficientKind::Diffusion, &Field::constant(grid.clone(), 1.0))
                .unwrap();
        let sys_s = assemble(
            grid.clone(),
            CoefficientKind::Schroedinger,
            &Field::constant(grid.clone(), 0.0),
        )
        .unwrap();
        let diff = (sys_d.matrix().to_dense() - sys_s.matrix().to_dense()).abs().max();
        assert!(diff <= 1e-14);
    }

    #[test]
    fn assembled_matrices_are_symmetric() {
        let grid = Arc::new(Grid2D::new_disk(5, 16).unwrap());
        let sigma = Field::from_fn(grid.clone(), |x, y| 1.0 + 0.3 * x + 0.2 * y * y);
        let sys = assemble(grid, CoefficientKind::Diffusion, &sigma).unwrap();
        assert!(sys.matrix().symmetry_defect() <= 1e-12);
    }

    #[test]
    fn nonpositive_conductivity_is_rejected() {
        let grid = square(5);
        let sigma = Field::from_fn(grid.clone(), |x, _| x - 0.5);
        assert!(matches!(
            assemble(grid, CoefficientKind::Diffusion, &sigma),
            Err(PdeError::Admissibility(_))
        ));
    }

    #[test]
    fn ungauged_diffusion_matrix_is_singular_with_constant_kernel() {
        let grid = square(9);
        let sigma = Field::from_fn(grid.clone(), |x, y| 1.0 + 0.5 * x * y);
        let sys = assemble(grid, CoefficientKind::Diffusion, &sigma).unwrap();
        let dense = sys.matrix().to_dense();
        let svd = dense.clone().svd(false, false);
        let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
        sv.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let norm = sv.last().copied().unwrap();
        assert!(sv[0] < 1e-8 * norm, "smallest singular value {}", sv[0]);
        assert!(sv[1] > 1e-6 * norm, "second singular value {}", sv[1]);
    }

    #[test]
    fn manufactured_solution_residual_is_second_order() {
        // u* = cos(pi x) cos(pi y) has exact zero Neumann data; with c = 1
        // the nodal residual (A u*)/V - (2 pi^2 + 1) u* shrinks at O(h^2).
        let resid = |n: usize| -> f64 {
            let grid = square(n);
            let c = Field::constant(grid.clone(), 1.0);
            let sys = assemble(grid.clone(), CoefficientKind::Schroedinger, &c).unwrap();
            let ustar = Field::from_fn(grid.clone(), |x, y| {
                (std::f64::consts::PI * x).cos() * (std::f64::consts::PI * y).cos()
            });
            let au = sys.matrix().matvec(ustar.values());
            let mut worst = 0.0f64;
            for i in 0..grid.num_nodes() {
                let (x, y) = grid.coords(i);
                let f = (2.0 * std::f64::consts::PI.powi(2) + 1.0)
                    * (std::f64::consts::PI * x).cos()
                    * (std::f64::consts::PI * y).cos();
                worst = worst.max((au[i] / grid.volume(i) - f).abs());
            }
            worst
        };
        let r17 = resid(17);
        let r33 = resid(33);
        let ratio = r17 / r33;
        assert!((3.0..=5.0).contains(&ratio), "refinement ratio {ratio}");
    }

    #[test]
    fn zero_current_zero_potential_solution() {
        let grid = square(9);
        let c = Field::constant(grid.clone(), 1.0);
        let sys = assemble(grid.clone(), CoefficientKind::Schroedinger, &c).unwrap();
        let current = DVector::zeros(grid.boundary_nodes().len());
        let u = sys.solve_neumann(&current).unwrap();
        assert!(u.values().abs().max() <= 1e-14);
    }

    #[test]
    fn neumann_solve_is_linear() {
        let grid = square(9);
        let sigma = Field::from_fn(grid.clone(), |x, y| 1.0 + 0.2 * (x + y));
        let sys = assemble(grid.clone(), CoefficientKind::Diffusion, &sigma).unwrap();
        let nb = grid.boundary_nodes().len();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let mut phi1 = standard_normal_vector(&mut rng, nb);
        let mut phi2 = standard_normal_vector(&mut rng, nb);
        // Remove the weighted mean to make the currents compatible.
        for phi in [&mut phi1, &mut phi2] {
            let w = DVector::from_column_slice(grid.boundary_weights());
            let mean = w.dot(phi) / w.sum();
            for v in phi.iter_mut() {
                *v -= mean;
            }
        }
        let u1 = sys.solve_neumann(&phi1).unwrap();
        let u2 = sys.solve_neumann(&phi2).unwrap();
        let u12 = sys.solve_neumann(&(&phi1 + &phi2)).unwrap();
        let defect = (u1.values() + u2.values() - u12.values()).norm()
            / (1.0 + u12.values().norm());
        assert!(defect <= 1e-10);
    }

    #[test]
    fn gauged_solution_has_zero_boundary_average() {
        let grid = square(17);
        let sigma = Field::from_fn(grid.clone(), |x, y| 1.0 + 0.3 * x + 0.1 * y);
        let sys = assemble(grid.clone(), CoefficientKind::Diffusion, &sigma).unwrap();
        let phi = DVector::from_fn(grid.boundary_nodes().len(), |k, _| {
            let s = grid.boundary_arclen()[k] / grid.perimeter();
            (2.0 * std::f64::consts::PI * s).cos()
        });
        let u = sys.solve_neumann(&phi).unwrap();
        let mean = grid.boundary_weighted_sum(u.values());
        assert!(mean.abs() <= 1e-10 * u.values().norm().max(1.0));
        // And the ungauged equations hold too.
        let mut rhs = DVector::zeros(grid.num_nodes());
        for (k, &b) in grid.boundary_nodes().iter().enumerate() {
            rhs[b] += grid.boundary_weights()[k] * phi[k];
        }
        let res = (sys.matrix().matvec(u.values()) - &rhs).norm();
        assert!(res <= 1e-9 * rhs.norm());
    }

    #[test]
    fn incompatible_current_is_rejected() {
        let grid = square(9);
        let sigma = Field::constant(grid.clone(), 1.0);
        let sys = assemble(grid.clone(), CoefficientKind::Diffusion, &sigma).unwrap();
        let phi = DVector::from_element(grid.boundary_nodes().len(), 1.0);
        assert!(matches!(sys.solve_neumann(&phi), Err(PdeError::IncompatibleCurrent(_))));
    }

    #[test]
    fn green_identity_reduces_to_symmetry() {
        let grid = square(9);
        let sigma = Field::from_fn(grid.clone(), |x, y| 1.5 + 0.4 * x * y);
        let sys = assemble(grid.clone(), CoefficientKind::Diffusion, &sigma).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let u = standard_normal_vector(&mut rng, grid.num_nodes());
        let v = standard_normal_vector(&mut rng, grid.num_nodes());
        let lhs = sys.matrix().matvec(&u).dot(&v);
        let rhs = u.dot(&sys.matrix().matvec(&v));
        assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    /// Worst deviation of the disk N-t-D matrix from the analytic symbol
    /// diag(1/frequency) of the Laplacian.
    fn disk_ntd_defect(nr: usize, na: usize, nbasis: usize) -> f64 {
        let grid = Arc::new(Grid2D::new_disk(nr, na).unwrap());
        let sigma = Field::constant(grid.clone(), 1.0);
        let sys = assemble(grid.clone(), CoefficientKind::Diffusion, &sigma).unwrap();
        let basis = crate::pde::BoundaryCurrentBasis::trigonometric(grid, nbasis).unwrap();
        let ntd = ntd_matrix(&sys, &basis).unwrap();
        let mut worst = 0.0f64;
        for i in 0..nbasis {
            for j in 0..nbasis {
                let target = if i == j { 1.0 / basis.frequency(i) as f64 } else { 0.0 };
                worst = worst.max((ntd[(i, j)] - target).abs());
            }
        }
        worst
    }

    #[test]
    fn disk_ntd_matches_analytic_symbol_at_second_order() {
        let e1 = disk_ntd_defect(8, 32, 6);
        let e2 = disk_ntd_defect(16, 64, 6);
        assert!(e1 < 0.02, "coarse defect too large: {e1}");
        let ratio = e1 / e2;
        assert!((2.5..=6.0).contains(&ratio), "two-grid ratio {ratio} ({e1} / {e2})");
    }

    #[test]
    fn ntd_is_symmetric_and_scales_inversely_with_conductivity() {
        let grid = Arc::new(Grid2D::new_disk(8, 32).unwrap());
        let basis = crate::pde::BoundaryCurrentBasis::trigonometric(grid.clone(), 6).unwrap();
        let sys1 =
            assemble(grid.clone(), CoefficientKind::Diffusion, &Field::constant(grid.clone(), 1.0))
                .unwrap();
        let sys2 =
            assemble(grid.clone(), CoefficientKind::Diffusion, &Field::constant(grid.clone(), 2.0))
                .unwrap();
        let l1 = ntd_matrix(&sys1, &basis).unwrap();
        let l2 = ntd_matrix(&sys2, &basis).unwrap();
        assert!((&l1 - l1.transpose()).abs().max() <= 1e-8);
        assert!((l1 / 2.0 - l2).abs().max() <= 1e-12, "doubling sigma must halve the map");
    }

    #[test]
    fn trace_of_solve_composes_to_ntd_column() {
        let grid = square(17);
        let sigma = Field::from_fn(grid.clone(), |x, y| 1.0 + 0.2 * x + 0.1 * y);
        let sys = assemble(grid.clone(), CoefficientKind::Diffusion, &sigma).unwrap();
        let basis = crate::pde::BoundaryCurrentBasis::trigonometric(grid.clone(), 4).unwrap();
        let ntd = ntd_matrix(&sys, &basis).unwrap();
        let u = sys.solve_neumann(basis.current(2)).unwrap();
        let tr = crate::pde::dirichlet_trace(&u);
        for m in 0..basis.len() {
            let mut acc = 0.0;
            for k in 0..tr.len() {
                acc += grid.boundary_weights()[k] * basis.current(m)[k] * tr[k];
            }
            assert!((acc - ntd[(m, 2)]).abs() <= 1e-12);
        }
    }

    #[test]
    fn disk_harmonic_solution_converges_at_second_order() {
        // sigma = 1 with current cos(theta): u = r cos(theta).
        let trace_err = |nr: usize, na: usize| -> f64 {
            let grid = Arc::new(Grid2D::new_disk(nr, na).unwrap());
            let sigma = Field::constant(grid.clone(), 1.0);
            let sys = assemble(grid.clone(), CoefficientKind::Diffusion, &sigma).unwrap();
            let phi = DVector::from_fn(grid.boundary_nodes().len(), |k, _| {
                let (x, _) = grid.coords(grid.boundary_nodes()[k]);
                x // cos(theta) on the unit circle
            });
            let u = sys.solve_neumann(&phi).unwrap();
            let tr = crate::pde::dirichlet_trace(&u);
            let mut worst = 0.0f64;
            for (k, &node) in grid.boundary_nodes().iter().enumerate() {
                let (x, _) = grid.coords(node);
                worst = worst.max((tr[k] - x).abs());
            }
            worst
        };
        let e1 = trace_err(8, 32);
        let e2 = trace_err(16, 64);
        assert!(e1 < 0.05, "coarse harmonic trace error {e1}");
        let ratio = e1 / e2;
        assert!((2.5..=7.0).contains(&ratio), "two-grid ratio {ratio} ({e1} / {e2})");
    }

    #[test]
    fn matrix_free_apply_matches_assembly() {
        for grid in [square(9), Arc::new(Grid2D::new_disk(5, 16).unwrap())] {
            let sigma = Field::from_fn(grid.clone(), |x, y| 1.0 + 0.25 * x + 0.5 * y * y);
            let sys = assemble(grid.clone(), CoefficientKind::Diffusion, &sigma).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
            let u = standard_normal_vector(&mut rng, grid.num_nodes());
            let direct = stiffness_apply(&grid, sigma.values(), &u);
            let via_mat = sys.matrix().matvec(&u);
            assert!((direct - via_mat).abs().max() <= 1e-12);
        }
    }

    #[test]
    fn coefficient_gradient_pairs_with_stiffness() {
        for grid in [square(9), Arc::new(Grid2D::new_disk(5, 16).unwrap())] {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
            let u = standard_normal_vector(&mut rng, grid.num_nodes());
            let lambda = standard_normal_vector(&mut rng, grid.num_nodes());
            let dsigma = standard_normal_vector(&mut rng, grid.num_nodes());
            let lhs = stiffness_apply(&grid, &dsigma, &u).dot(&lambda);
            let rhs = dsigma.dot(&stiffness_coeff_gradient(&grid, &u, &lambda));
            assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }
    }
}
