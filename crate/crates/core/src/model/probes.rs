//! Randomized probe battery for model contracts: Jacobian vs central finite
//! differences, adjoint pairing consistency, projector idempotence,
//! relaxation roundtrip and the range-invariance identity itself. Used both
//! by the test suites and by the `verify` command.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::numerics::standard_normal_vector;

use super::{range_invariance_residual, ModelError, RangeInvariantModel};

/// Worst observed defects over a randomized battery; all entries are
/// relative quantities that should sit at rounding level for a correct
/// model.
#[derive(Debug, Clone, Copy, Default)]
pub struct BatteryReport {
    pub samples: usize,
    pub identity_residual: f64,
    pub roundtrip_error: f64,
    pub f_jacobian_fd_error: f64,
    pub r_jacobian_fd_error: f64,
    pub rinv_jacobian_fd_error: f64,
    pub f_adjoint_defect: f64,
    pub r_adjoint_defect: f64,
    pub rinv_adjoint_defect: f64,
    pub k_adjoint_defect: f64,
    pub p_idempotence_defect: f64,
    pub p_complement_defect: f64,
}

/// Draws a point uniformly inside the model's admissible ball, rejecting
/// model-specific inadmissible draws.
pub fn sample_admissible(
    m: &dyn RangeInvariantModel,
    rng: &mut ChaCha8Rng,
    fill: f64,
) -> DVector<f64> {
    loop {
        let dir = standard_normal_vector(rng, m.dim_x());
        let n = dir.norm();
        if n == 0.0 {
            continue;
        }
        let radius: f64 = rng.gen::<f64>() * fill * m.admissibility_radius();
        let x = m.x0() + dir * (radius / n);
        if m.is_admissible(&x) {
            return x;
        }
    }
}

/// Central finite-difference directional derivative of `f` at `x`.
fn central_fd(
    f: impl Fn(&DVector<f64>) -> Result<DVector<f64>, ModelError>,
    x: &DVector<f64>,
    h: &DVector<f64>,
) -> Result<DVector<f64>, ModelError> {
    let step = 1e-5 * (1.0 + x.norm()) / h.norm().max(1e-300);
    let fp = f(&(x + h * step))?;
    let fm = f(&(x - h * step))?;
    Ok((fp - fm) / (2.0 * step))
}

fn rel(err: f64, scale: f64) -> f64 {
    err / (1.0 + scale)
}

/// Runs the full battery at `samples` random admissible points.
///
/// `fill` shrinks the sampling ball relative to the admissible radius so
/// finite-difference excursions stay admissible.
pub fn run_battery(
    m: &dyn RangeInvariantModel,
    samples: usize,
    seed: u64,
    fill: f64,
) -> Result<BatteryReport, ModelError> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = BatteryReport { samples, ..Default::default() };
    for _ in 0..samples {
        let x = sample_admissible(m, &mut rng, fill);
        let hx = standard_normal_vector(&mut rng, m.dim_x());
        let gy = standard_normal_vector(&mut rng, m.dim_data());
        let gl = standard_normal_vector(&mut rng, m.dim_lifted());
        let rl = standard_normal_vector(&mut rng, m.dim_lifted());

        // Range invariance identity.
        rep.identity_residual = rep.identity_residual.max(range_invariance_residual(m, &x)?);

        // Relaxation roundtrip.
        let r = m.r_eval(&x)?;
        let back = m.r_inverse(&r)?;
        rep.roundtrip_error = rep
            .roundtrip_error
            .max(rel((&back - &x).norm(), x.norm()));

        // Jacobians against central differences.
        let jf = m.f_deriv_apply(&x, &hx)?;
        let jf_fd = central_fd(|p| m.f_eval(p), &x, &hx)?;
        rep.f_jacobian_fd_error = rep
            .f_jacobian_fd_error
            .max(rel((&jf - jf_fd).norm(), jf.norm()));
        let jr = m.r_deriv_apply(&x, &hx)?;
        let jr_fd = central_fd(|p| m.r_eval(p), &x, &hx)?;
        rep.r_jacobian_fd_error = rep
            .r_jacobian_fd_error
            .max(rel((&jr - jr_fd).norm(), jr.norm()));

        // Adjoint pairings <A h, g> = <h, A* g>.
        let pair_f = jf.dot(&gy) - hx.dot(&m.f_deriv_adjoint_apply(&x, &gy)?);
        rep.f_adjoint_defect = rep
            .f_adjoint_defect
            .max(rel(pair_f.abs(), jf.norm() * gy.norm()));
        let pair_r = jr.dot(&gl) - hx.dot(&m.r_deriv_adjoint_apply(&x, &gl)?);
        rep.r_adjoint_defect = rep
            .r_adjoint_defect
            .max(rel(pair_r.abs(), jr.norm() * gl.norm()));
        let krl = m.k_apply(&rl)?;
        let pair_k = krl.dot(&gy) - rl.dot(&m.k_adjoint_apply(&gy)?);
        rep.k_adjoint_defect = rep
            .k_adjoint_defect
            .max(rel(pair_k.abs(), krl.norm() * gy.norm()));

        // Preimage derivative probed at the relaxed image of x (a valid
        // argument of the inverse by construction).
        let hl = standard_normal_vector(&mut rng, m.dim_lifted());
        let gx = standard_normal_vector(&mut rng, m.dim_x());
        let jinv = m.r_inverse_deriv_apply(&r, &hl)?;
        let jinv_fd = central_fd(|p| m.r_inverse(p), &r, &hl)?;
        rep.rinv_jacobian_fd_error = rep
            .rinv_jacobian_fd_error
            .max(rel((&jinv - jinv_fd).norm(), jinv.norm()));
        let pair_inv = jinv.dot(&gx) - hl.dot(&m.r_inverse_deriv_adjoint_apply(&r, &gx)?);
        rep.rinv_adjoint_defect = rep
            .rinv_adjoint_defect
            .max(rel(pair_inv.abs(), jinv.norm() * gx.norm()));

        // Projector algebra.
        let px = m.p_apply(&x);
        rep.p_idempotence_defect = rep
            .p_idempotence_defect
            .max(rel((m.p_apply(&px) - &px).norm(), px.norm()));
        rep.p_complement_defect = rep
            .p_complement_defect
            .max(rel((&px + m.im_p_apply(&x) - &x).norm(), x.norm()));
    }
    Ok(rep)
}
