//! The transform pair between conductivities and Schrödinger potentials:
//! `c = Δ√σ / √σ` forward, and recovery of `σ` from `c` through the
//! Dirichlet problem `−Δs + c·s = 0` on a ball with `s = √σ_bg` on its
//! rim. Both directions live on the square grid, where the one-sided
//! Laplacian stencils are available.
//!
//! The forward direction uses the pointwise five-point Laplacian; the
//! inverse solves with P1 elements on the split-cell triangulation
//! (five-point stiffness, consistent-mass reaction). The two
//! discretizations agree to second order, so the roundtrip defect is a
//! genuine O(h²) consistency measure rather than an algebraic identity.

use nalgebra::DVector;

use super::{Field, GridShape, PdeError};

/// Second derivative along one index line, one-sided at the ends
/// (second-order accurate).
fn second_diff(get: impl Fn(usize) -> f64, i: usize, n: usize, h: f64) -> f64 {
    let v = if i == 0 {
        2.0 * get(0) - 5.0 * get(1) + 4.0 * get(2) - get(3)
    } else if i == n - 1 {
        2.0 * get(n - 1) - 5.0 * get(n - 2) + 4.0 * get(n - 3) - get(n - 4)
    } else {
        get(i + 1) - 2.0 * get(i) + get(i - 1)
    };
    v / (h * h)
}

/// Potential induced by a conductivity: `c = Δ√σ / √σ` via the nodal
/// discrete Laplacian with one-sided boundary stencils. Requires `σ > 0`
/// everywhere; with `σ` constant near the boundary the result vanishes
/// there.
pub fn liouville_forward(sigma: &Field) -> Result<Field, PdeError> {
    let grid = sigma.grid().clone();
    let n = match grid.shape() {
        GridShape::Square { n } => n,
        GridShape::Disk { .. } => {
            return Err(PdeError::InvalidGrid(
                "the transform pair is implemented on the square grid".into(),
            ))
        }
    };
    let min = sigma.values().min();
    if !(min > 0.0) {
        return Err(PdeError::Admissibility(format!(
            "conductivity must be strictly positive (minimum {min:.3e})"
        )));
    }
    let h = grid.h();
    let s: DVector<f64> = sigma.values().map(|v| v.sqrt());
    let idx = |ix: usize, iy: usize| ix + iy * n;
    let mut c = DVector::zeros(grid.num_nodes());
    for iy in 0..n {
        for ix in 0..n {
            let dxx = second_diff(|k| s[idx(k, iy)], ix, n, h);
            let dyy = second_diff(|k| s[idx(ix, k)], iy, n, h);
            c[idx(ix, iy)] = (dxx + dyy) / s[idx(ix, iy)];
        }
    }
    Field::new(grid, c)
}

/// Recovers a conductivity from a potential: solves the Dirichlet problem
/// `−Δs + c·s = 0` on the discrete ball of radius `rho` around the grid
/// center with `s = √σ_bg` on its complement, and returns `σ = s²`
/// (extended by `σ_bg` outside the ball).
///
/// The shifted system must be positive definite (no interior eigenvalue);
/// a failed factorization reports that collision.
pub fn liouville_inverse(c: &Field, rho: f64, sigma_bg: &Field) -> Result<Field, PdeError> {
    let grid = c.grid().clone();
    let n = match grid.shape() {
        GridShape::Square { n } => n,
        GridShape::Disk { .. } => {
            return Err(PdeError::InvalidGrid(
                "the transform pair is implemented on the square grid".into(),
            ))
        }
    };
    if sigma_bg.values().min() <= 0.0 {
        return Err(PdeError::Admissibility("background conductivity must be positive".into()));
    }
    let (cx, cy) = grid.center();
    let idx = |ix: usize, iy: usize| ix + iy * n;
    let in_ball: Vec<bool> = (0..grid.num_nodes())
        .map(|i| {
            let (x, y) = grid.coords(i);
            ((x - cx).powi(2) + (y - cy).powi(2)).sqrt() < rho
        })
        .collect();
    let unknowns: Vec<usize> = (0..grid.num_nodes()).filter(|&i| in_ball[i]).collect();
    if unknowns.is_empty() {
        return Err(PdeError::InvalidGrid(format!("ball radius {rho} contains no nodes")));
    }
    for &i in &unknowns {
        let ix = i % n;
        let iy = i / n;
        if ix == 0 || ix == n - 1 || iy == 0 || iy == n - 1 {
            return Err(PdeError::InvalidGrid("ball touches the outer boundary; shrink rho".into()));
        }
    }
    let pos: Vec<Option<usize>> = {
        let mut p = vec![None; grid.num_nodes()];
        for (k, &i) in unknowns.iter().enumerate() {
            p[i] = Some(k);
        }
        p
    };
    let s_bg: DVector<f64> = sigma_bg.values().map(|v| v.sqrt());
    // P1 elements on split cells: the stiffness reduces to the five-point
    // stencil, the reaction uses the consistent element mass matrix with
    // the elementwise-averaged potential.
    let m = unknowns.len();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut rhs = DVector::zeros(m);
    let half = grid.h() * grid.h() / 2.0; // triangle area
    let cv = c.values();
    for iy in 0..n - 1 {
        for ix in 0..n - 1 {
            let a = idx(ix, iy);
            let b = idx(ix + 1, iy);
            let cc = idx(ix + 1, iy + 1);
            let d = idx(ix, iy + 1);
            for tri in [[a, b, cc], [a, cc, d]] {
                if tri.iter().all(|&v| pos[v].is_none()) {
                    continue;
                }
                // Right isoceles triangle with the right angle at the middle
                // vertex of the diagonal pair: P1 stiffness entries.
                let k_e = p1_stiffness(grid.coords(tri[0]), grid.coords(tri[1]), grid.coords(tri[2]));
                let cbar = (cv[tri[0]] + cv[tri[1]] + cv[tri[2]]) / 3.0;
                for i_loc in 0..3 {
                    let gi = tri[i_loc];
                    let Some(row) = pos[gi] else { continue };
                    for j_loc in 0..3 {
                        let gj = tri[j_loc];
                        let mass = cbar * half / 12.0 * if i_loc == j_loc { 2.0 } else { 1.0 };
                        let entry = k_e[i_loc][j_loc] + mass;
                        match pos[gj] {
                            Some(col) => triplets.push((row, col, entry)),
                            None => rhs[row] -= entry * s_bg[gj],
                        }
                    }
                }
            }
        }
    }
    let mat = super::CsrMatrix::from_triplets(m, &triplets);
    let s_in = if m <= 1500 {
        match mat.to_dense().cholesky() {
            Some(chol) => chol.solve(&rhs),
            None => return Err(PdeError::EigenvalueCollision),
        }
    } else {
        let sol =
            crate::numerics::conjugate_gradients(|v| mat.matvec(v), &rhs, None, 1e-13, 40 * m);
        let res = (mat.matvec(&sol) - &rhs).norm();
        if res > 1e-8 * (1.0 + rhs.norm()) {
            return Err(PdeError::EigenvalueCollision);
        }
        sol
    };
    let mut sigma = sigma_bg.values().clone();
    for (k, &i) in unknowns.iter().enumerate() {
        sigma[i] = s_in[k] * s_in[k];
    }
    Field::new(grid, sigma)
}

fn p1_stiffness(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> [[f64; 3]; 3] {
    let area = super::grid::triangle_area(p0, p1, p2);
    let b = [p1.1 - p2.1, p2.1 - p0.1, p0.1 - p1.1];
    let c = [p2.0 - p1.0, p0.0 - p2.0, p1.0 - p0.0];
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
        }
    }
    k
}

/// Compactly supported quartic bump `amp·(1 − t²)⁴` with
/// `t = |x − center| / radius`; three continuous derivatives and bounded
/// fourth derivatives, so five-point stencils see clean second-order
/// behavior on it.
pub fn poly_bump(x: f64, y: f64, center: (f64, f64), radius: f64, amp: f64) -> f64 {
    let t2 = ((x - center.0).powi(2) + (y - center.1).powi(2)) / (radius * radius);
    if t2 >= 1.0 {
        0.0
    } else {
        amp * (1.0 - t2).powi(4)
    }
}

/// Exact Laplacian of [`poly_bump`]:
/// `Δb = −16·amp/ρ²·(1 − u)²·(1 − 4u)` with `u = (r/ρ)²` (2-D).
pub fn poly_bump_laplacian(x: f64, y: f64, center: (f64, f64), radius: f64, amp: f64) -> f64 {
    let u = ((x - center.0).powi(2) + (y - center.1).powi(2)) / (radius * radius);
    if u >= 1.0 {
        0.0
    } else {
        -16.0 * amp / (radius * radius) * (1.0 - u).powi(2) * (1.0 - 4.0 * u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::Grid2D;
    use std::sync::Arc;

    fn bump_sigma(grid: &Arc<Grid2D>, amp: f64, radius: f64) -> Field {
        // sigma = (1 + bump)^2 so that sqrt(sigma) = 1 + bump is polynomial
        // inside the support.
        Field::from_fn(grid.clone(), move |x, y| {
            let b = poly_bump(x, y, (0.5, 0.5), radius, amp);
            (1.0 + b) * (1.0 + b)
        })
    }

    #[test]
    fn constant_conductivity_gives_zero_potential() {
        let grid = Arc::new(Grid2D::new_square(17).unwrap());
        let sigma = Field::constant(grid, 1.0);
        let c = liouville_forward(&sigma).unwrap();
        assert!(c.values().abs().max() <= 1e-12);
    }

    #[test]
    fn zero_potential_recovers_background() {
        let grid = Arc::new(Grid2D::new_square(17).unwrap());
        let c = Field::constant(grid.clone(), 0.0);
        let bg = Field::constant(grid, 1.0);
        let sigma = liouville_inverse(&c, 0.35, &bg).unwrap();
        assert!((sigma.values() - bg.values()).abs().max() <= 1e-10);
    }

    #[test]
    fn forward_matches_analytic_laplacian_at_second_order() {
        // For sigma = (1+b)^2 the potential is Delta b / (1+b), available in
        // closed form for the quartic bump.
        let analytic_err = |n: usize| -> f64 {
            let grid = Arc::new(Grid2D::new_square(n).unwrap());
            let sigma = bump_sigma(&grid, 0.2, 0.3);
            let c = liouville_forward(&sigma).unwrap();
            let mut worst = 0.0f64;
            for i in 0..grid.num_nodes() {
                let (x, y) = grid.coords(i);
                let expected = poly_bump_laplacian(x, y, (0.5, 0.5), 0.3, 0.2)
                    / (1.0 + poly_bump(x, y, (0.5, 0.5), 0.3, 0.2));
                worst = worst.max((c.values()[i] - expected).abs());
            }
            worst
        };
        let e17 = analytic_err(17);
        let e33 = analytic_err(33);
        let ratio = e17 / e33;
        assert!((2.5..=6.0).contains(&ratio), "refinement ratio {ratio} ({e17} / {e33})");
    }

    #[test]
    fn potential_vanishes_outside_the_bump() {
        let grid = Arc::new(Grid2D::new_square(33).unwrap());
        let sigma = bump_sigma(&grid, 0.2, 0.25);
        let c = liouville_forward(&sigma).unwrap();
        for i in 0..grid.num_nodes() {
            let (x, y) = grid.coords(i);
            let r = ((x - 0.5).powi(2) + (y - 0.5).powi(2)).sqrt();
            if r > 0.25 + 2.0 * grid.h() {
                assert!(
                    c.values()[i].abs() <= 1e-12,
                    "potential leaked outside support at r={r}: {}",
                    c.values()[i]
                );
            }
        }
    }

    #[test]
    fn roundtrip_error_decays_at_second_order() {
        let roundtrip_err = |n: usize| -> f64 {
            let grid = Arc::new(Grid2D::new_square(n).unwrap());
            let sigma = bump_sigma(&grid, 0.2, 0.25);
            let c = liouville_forward(&sigma).unwrap();
            let bg = Field::constant(grid, 1.0);
            let back = liouville_inverse(&c, 0.35, &bg).unwrap();
            back.rel_l2_distance(&sigma)
        };
        let e17 = roundtrip_err(17);
        let e33 = roundtrip_err(33);
        let e65 = roundtrip_err(65);
        let r1 = e17 / e33;
        let r2 = e33 / e65;
        assert!((3.0..=5.0).contains(&r1), "ratio 17->33 {r1} ({e17} / {e33})");
        assert!((3.0..=5.0).contains(&r2), "ratio 33->65 {r2} ({e33} / {e65})");
    }

    #[test]
    fn recovered_conductivity_stays_positive() {
        let grid = Arc::new(Grid2D::new_square(33).unwrap());
        let sigma = bump_sigma(&grid, 0.15, 0.25);
        let c = liouville_forward(&sigma).unwrap();
        let bg = Field::constant(grid, 1.0);
        let back = liouville_inverse(&c, 0.35, &bg).unwrap();
        assert!(back.values().min() >= 0.5);
    }
}
