//! Inner block solvers shared by the schemes.
//!
//! The lifted-variable block is quadratic up to the (possibly nonlinear)
//! preimage readout and the concave penalty wrapper; it is minimized by
//! repeated linearize-and-majorize steps, each solved with conjugate
//! gradients on the normal equations and safeguarded by a backtracking
//! line search on the true objective. The parameter block is a damped
//! Gauss-Newton iteration constrained to the admissible set. Both blocks
//! only ever accept decreases, so outer objective traces are monotone by
//! construction; a stalled block returns its iterate and leaves the
//! verdict to the suboptimality certificate.

use nalgebra::DVector;

use crate::model::{ModelError, RangeInvariantModel};
use crate::numerics::conjugate_gradients;

use super::{RegVariant, SchemeContext, SolveError};

/// Relative floor used when a tolerance of zero is requested.
const DECREASE_FLOOR: f64 = 1e-13;
/// Step-size floor of the stall rule.
const STALL_STEP: f64 = 1e-14;
/// Clamp for the concave-penalty linearization point.
const PSI_ARG_FLOOR: f64 = 1e-12;

pub(super) struct BlockReport {
    pub objective: f64,
    pub steps: usize,
    pub stalled: bool,
    /// Objective after every accepted step.
    pub trace: Vec<f64>,
}

/// Abstract residual map used by the parameter block: the relaxation map
/// itself for the variational scheme, its affine linearization for the
/// Newton scheme.
pub(super) struct ResidualMap<'a> {
    pub eval: Box<dyn Fn(&DVector<f64>) -> Result<DVector<f64>, ModelError> + 'a>,
    pub deriv: Box<dyn Fn(&DVector<f64>, &DVector<f64>) -> Result<DVector<f64>, ModelError> + 'a>,
    pub adjoint:
        Box<dyn Fn(&DVector<f64>, &DVector<f64>) -> Result<DVector<f64>, ModelError> + 'a>,
}

impl<'a> ResidualMap<'a> {
    pub fn relaxation(model: &'a dyn RangeInvariantModel) -> Self {
        ResidualMap {
            eval: Box::new(move |x| model.r_eval(x)),
            deriv: Box::new(move |x, h| model.r_deriv_apply(x, h)),
            adjoint: Box::new(move |x, g| model.r_deriv_adjoint_apply(x, g)),
        }
    }

    /// Affine linearization `r(x_n) + r'(x_n)(x − x_n)` frozen at `x_lin`.
    pub fn linearized(
        model: &'a dyn RangeInvariantModel,
        x_lin: &DVector<f64>,
    ) -> Result<Self, ModelError> {
        let r_lin = model.r_eval(x_lin)?;
        let x_lin = x_lin.clone();
        let x_lin2 = x_lin.clone();
        let x_lin3 = x_lin.clone();
        let r_lin2 = r_lin.clone();
        Ok(ResidualMap {
            eval: Box::new(move |x| {
                Ok(&r_lin2 + model.r_deriv_apply(&x_lin, &(x - &x_lin))?)
            }),
            deriv: Box::new(move |_x, h| model.r_deriv_apply(&x_lin2, h)),
            adjoint: Box::new(move |_x, g| model.r_deriv_adjoint_apply(&x_lin3, g)),
        })
    }
}

/// Objective of the parameter block: `β‖map(x) − r̂‖² + ‖P x‖²`.
pub(super) fn x_block_objective(
    model: &dyn RangeInvariantModel,
    map: &ResidualMap,
    rhat: &DVector<f64>,
    beta: f64,
    x: &DVector<f64>,
) -> Result<f64, ModelError> {
    let res = (map.eval)(x)? - rhat;
    Ok(beta * res.norm_squared() + model.p_apply(x).norm_squared())
}

/// Damped Gauss-Newton on the parameter block, constrained to the
/// admissible set.
pub(super) fn x_block_gauss_newton(
    ctx: &SchemeContext,
    map: &ResidualMap,
    rhat: &DVector<f64>,
    beta: f64,
    x_init: &DVector<f64>,
    decrease_tol: f64,
) -> Result<(DVector<f64>, BlockReport), SolveError> {
    let model = ctx.model;
    let mut x = x_init.clone();
    let mut obj = x_block_objective(model, map, rhat, beta, &x)?;
    if !obj.is_finite() {
        return Err(SolveError::NonFinite("parameter block objective".into()));
    }
    let tol = decrease_tol.max(DECREASE_FLOOR * (1.0 + obj.abs()));
    let mut stalled = false;
    let mut steps = 0;
    let mut trace = vec![obj];
    for _ in 0..ctx.cfg.max_block_steps {
        steps += 1;
        let res = (map.eval)(&x)? - rhat;
        let grad = 2.0 * beta * (map.adjoint)(&x, &res)? + 2.0 * model.p_apply(&x);
        // Gauss-Newton normal operator: 2 beta J'J + 2 P (P is an orthogonal
        // projector, hence its own normal matrix).
        let normal = |d: &DVector<f64>| -> DVector<f64> {
            let jd = (map.deriv)(&x, d).expect("Jacobian action failed inside CG");
            2.0 * beta * (map.adjoint)(&x, &jd).expect("Jacobian adjoint failed inside CG")
                + 2.0 * model.p_apply(d)
        };
        let dir = conjugate_gradients(normal, &(-&grad), None, 1e-12, ctx.cfg.cg_max_iter);
        if dir.norm() <= STALL_STEP * (1.0 + x.norm()) {
            stalled = true;
            break;
        }
        // Backtracking with admissibility screening.
        let mut t = 1.0;
        let mut accepted = false;
        while t * dir.norm() > STALL_STEP * (1.0 + x.norm()) {
            let cand = &x + t * &dir;
            if model.is_admissible(&cand) {
                match x_block_objective(model, map, rhat, beta, &cand) {
                    Ok(new_obj) if new_obj.is_finite() && new_obj < obj => {
                        let gain = obj - new_obj;
                        x = cand;
                        obj = new_obj;
                        trace.push(obj);
                        accepted = true;
                        if gain < tol {
                            return Ok((x, BlockReport { objective: obj, steps, stalled: false, trace }));
                        }
                        break;
                    }
                    _ => {}
                }
            }
            t *= 0.5;
        }
        if !accepted {
            stalled = true;
            break;
        }
    }
    Ok((x, BlockReport { objective: obj, steps, stalled, trace }))
}

/// Joint Gauss-Newton polish over the stacked variable `(r̂, x)`.
///
/// Exact block solves converge slowly along the valley where `r̂` and the
/// matched parameter move together (the alternation factor approaches one
/// as α shrinks); a few joint steps remove that gap. For affine relaxation
/// maps the first step already solves the full quadratic to solver
/// tolerance. The concave penalty term is majorized by its tangent, and
/// every step is validated by a line search on the true objective.
#[allow(clippy::too_many_arguments)]
pub(super) fn joint_polish(
    ctx: &SchemeContext,
    variant: RegVariant,
    map: &ResidualMap,
    y_delta: &DVector<f64>,
    alpha: f64,
    beta: f64,
    rhat_init: &DVector<f64>,
    x_init: &DVector<f64>,
    decrease_tol: f64,
) -> Result<(DVector<f64>, DVector<f64>, f64), SolveError> {
    let model = ctx.model;
    let dim_l = model.dim_lifted();
    let dim_x = model.dim_x();
    let mut rhat = rhat_init.clone();
    let mut x = x_init.clone();
    let joint = |rh: &DVector<f64>, xx: &DVector<f64>| -> Result<f64, SolveError> {
        let q = (map.eval)(xx)?;
        Ok(rhat_block_objective(ctx, variant, y_delta, alpha, beta, Some(&q), rh)?
            + model.p_apply(xx).norm_squared())
    };
    let mut obj = joint(&rhat, &x)?;
    let tol = decrease_tol.max(DECREASE_FLOOR * (1.0 + obj.abs()));
    let split = |v: &DVector<f64>| -> (DVector<f64>, DVector<f64>) {
        (v.rows(0, dim_l).into_owned(), v.rows(dim_l, dim_x).into_owned())
    };
    let join = |a: &DVector<f64>, b: &DVector<f64>| -> DVector<f64> {
        let mut v = DVector::zeros(dim_l + dim_x);
        v.rows_mut(0, dim_l).copy_from(a);
        v.rows_mut(dim_l, dim_x).copy_from(b);
        v
    };
    for _ in 0..ctx.cfg.max_block_steps {
        let x_im = model.r_inverse(&rhat)?;
        let g_val = model.im_p_apply(&x_im);
        let p_val = model.p_apply(&x_im);
        let psi_weight = match variant {
            RegVariant::Plain => 0.0,
            RegVariant::Penalized => {
                let arg = (ctx.cfg.c_p * p_val.norm().powf(ctx.cfg.p)).max(PSI_ARG_FLOOR);
                ctx.cfg.gamma * ctx.psi.psi_prime(arg)? * ctx.cfg.c_p
            }
        };
        let fit_res = model.k_apply(&rhat)? + model.f_x0() - y_delta;
        let q_res = (map.eval)(&x)? - &rhat;
        // Gradient over the stacked variable.
        let s_g = ctx.rreg.apply(&g_val);
        let w = &s_g - model.p_apply(&s_g);
        let mut grad_r = 2.0 * model.k_adjoint_apply(&fit_res)?
            + 2.0 * alpha * model.r_inverse_deriv_adjoint_apply(&rhat, &w)?
            - 2.0 * beta * &q_res;
        if psi_weight > 0.0 {
            let pp = model.p_apply(&p_val);
            grad_r += 2.0
                * alpha
                * psi_weight
                * model.r_inverse_deriv_adjoint_apply(&rhat, &pp)?;
        }
        let grad_x = 2.0 * beta * (map.adjoint)(&x, &q_res)? + 2.0 * model.p_apply(&x);
        let grad = join(&grad_r, &grad_x);
        let normal = |d: &DVector<f64>| -> DVector<f64> {
            let (dr, dx) = split(d);
            let kd = model.k_apply(&dr).expect("K apply failed inside CG");
            let mut out_r =
                2.0 * model.k_adjoint_apply(&kd).expect("K adjoint failed inside CG");
            let jd = model
                .r_inverse_deriv_apply(&rhat, &dr)
                .expect("preimage Jacobian failed inside CG");
            let gjd = &jd - model.p_apply(&jd);
            let sgjd = ctx.rreg.apply(&gjd);
            let wv = &sgjd - model.p_apply(&sgjd);
            out_r += 2.0
                * alpha
                * model
                    .r_inverse_deriv_adjoint_apply(&rhat, &wv)
                    .expect("preimage pullback failed inside CG");
            if psi_weight > 0.0 {
                let pjd = model.p_apply(&jd);
                out_r += 2.0
                    * alpha
                    * psi_weight
                    * model
                        .r_inverse_deriv_adjoint_apply(&rhat, &model.p_apply(&pjd))
                        .expect("preimage pullback failed inside CG");
            }
            let rx_d = (map.deriv)(&x, &dx).expect("Jacobian action failed inside CG");
            let coupling = &rx_d - &dr;
            out_r -= 2.0 * beta * &coupling;
            let out_x = 2.0 * beta * (map.adjoint)(&x, &coupling).expect("adjoint failed")
                + 2.0 * model.p_apply(&dx);
            join(&out_r, &out_x)
        };
        let dir = conjugate_gradients(normal, &(-&grad), None, 1e-12, ctx.cfg.cg_max_iter);
        let scale = 1.0 + rhat.norm() + x.norm();
        if dir.norm() <= STALL_STEP * scale {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        while t * dir.norm() > STALL_STEP * scale {
            let (dr, dx) = split(&(t * &dir));
            let cand_r = &rhat + dr;
            let cand_x = &x + dx;
            if model.is_admissible(&cand_x) {
                match joint(&cand_r, &cand_x) {
                    Ok(new_obj) if new_obj.is_finite() && new_obj < obj => {
                        let gain = obj - new_obj;
                        rhat = cand_r;
                        x = cand_x;
                        obj = new_obj;
                        accepted = true;
                        if gain < tol {
                            return Ok((rhat, x, obj));
                        }
                        break;
                    }
                    _ => {}
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok((rhat, x, obj))
}

/// Objective of the lifted block:
/// `‖K r̂ + F(x₀) − y‖² + α·R(r̂) + β‖r̂ − q‖²`.
pub(super) fn rhat_block_objective(
    ctx: &SchemeContext,
    variant: RegVariant,
    y_delta: &DVector<f64>,
    alpha: f64,
    beta: f64,
    q_target: Option<&DVector<f64>>,
    rhat: &DVector<f64>,
) -> Result<f64, SolveError> {
    let fit = (ctx.model.k_apply(rhat)? + ctx.model.f_x0() - y_delta).norm_squared();
    let reg = ctx.reg_functional(variant, rhat)?;
    let coupling = match q_target {
        Some(q) => beta * (rhat - q).norm_squared(),
        None => 0.0,
    };
    Ok(fit + alpha * reg + coupling)
}

/// Linearize-majorize minimization of the lifted block.
pub(super) fn rhat_block_minimize(
    ctx: &SchemeContext,
    variant: RegVariant,
    y_delta: &DVector<f64>,
    alpha: f64,
    beta: f64,
    q_target: Option<&DVector<f64>>,
    rhat_init: &DVector<f64>,
    decrease_tol: f64,
) -> Result<(DVector<f64>, BlockReport), SolveError> {
    let model = ctx.model;
    let mut rhat = rhat_init.clone();
    let mut obj =
        rhat_block_objective(ctx, variant, y_delta, alpha, beta, q_target, &rhat)?;
    if !obj.is_finite() {
        return Err(SolveError::NonFinite("lifted block objective".into()));
    }
    let tol = decrease_tol.max(DECREASE_FLOOR * (1.0 + obj.abs()));
    let data_shift = model.f_x0() - y_delta;
    let mut stalled = false;
    let mut steps = 0;
    let mut trace = vec![obj];
    for _ in 0..ctx.cfg.max_block_steps {
        steps += 1;
        // Linearization point.
        let x_im = model.r_inverse(&rhat)?;
        let g_val = model.im_p_apply(&x_im);
        let p_val = model.p_apply(&x_im);
        // Majorizer weight of the concave penalty (tangent at the current
        // argument; any tangent of a concave function lies above it).
        let psi_weight = match variant {
            RegVariant::Plain => 0.0,
            RegVariant::Penalized => {
                let arg = (ctx.cfg.c_p * p_val.norm().powf(ctx.cfg.p)).max(PSI_ARG_FLOOR);
                ctx.cfg.gamma * ctx.psi.psi_prime(arg)? * ctx.cfg.c_p
            }
        };
        // Gradient of the surrogate at the current point (equals the true
        // gradient wherever the linearization is tight).
        let fit_res = model.k_apply(&rhat)? + &data_shift;
        let s_g = ctx.rreg.apply(&g_val);
        let mut grad = 2.0 * model.k_adjoint_apply(&fit_res)?;
        let im_p_pullback = |v: &DVector<f64>, rh: &DVector<f64>| -> Result<DVector<f64>, ModelError> {
            // adjoint of d ↦ (I−P) r^{-1}'(rhat) d
            let w = v - model.p_apply(v);
            model.r_inverse_deriv_adjoint_apply(rh, &w)
        };
        let p_pullback = |v: &DVector<f64>, rh: &DVector<f64>| -> Result<DVector<f64>, ModelError> {
            model.r_inverse_deriv_adjoint_apply(rh, &model.p_apply(v))
        };
        grad += 2.0 * alpha * im_p_pullback(&s_g, &rhat)?;
        if psi_weight > 0.0 {
            grad += 2.0 * alpha * psi_weight * p_pullback(&p_val, &rhat)?;
        }
        if let Some(q) = q_target {
            grad += 2.0 * beta * (&rhat - q);
        }
        let normal = |d: &DVector<f64>| -> DVector<f64> {
            let kd = model.k_apply(d).expect("K apply failed inside CG");
            let mut out =
                2.0 * model.k_adjoint_apply(&kd).expect("K adjoint failed inside CG");
            let jd = model
                .r_inverse_deriv_apply(&rhat, d)
                .expect("preimage Jacobian failed inside CG");
            let gjd = &jd - model.p_apply(&jd);
            let sgjd = ctx.rreg.apply(&gjd);
            out += 2.0
                * alpha
                * im_p_pullback(&sgjd, &rhat).expect("preimage pullback failed inside CG");
            if psi_weight > 0.0 {
                let pjd = model.p_apply(&jd);
                out += 2.0
                    * alpha
                    * psi_weight
                    * p_pullback(&pjd, &rhat).expect("preimage pullback failed inside CG");
            }
            if q_target.is_some() {
                out += 2.0 * beta * d;
            }
            out
        };
        let dir = conjugate_gradients(normal, &(-&grad), None, 1e-12, ctx.cfg.cg_max_iter);
        if dir.norm() <= STALL_STEP * (1.0 + rhat.norm()) {
            stalled = true;
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        while t * dir.norm() > STALL_STEP * (1.0 + rhat.norm()) {
            let cand = &rhat + t * &dir;
            match rhat_block_objective(ctx, variant, y_delta, alpha, beta, q_target, &cand) {
                Ok(new_obj) if new_obj.is_finite() && new_obj < obj => {
                    let gain = obj - new_obj;
                    rhat = cand;
                    obj = new_obj;
                    trace.push(obj);
                    accepted = true;
                    if gain < tol {
                        return Ok((
                            rhat,
                            BlockReport { objective: obj, steps, stalled: false, trace },
                        ));
                    }
                    break;
                }
                _ => {}
            }
            t *= 0.5;
        }
        if !accepted {
            stalled = true;
            break;
        }
    }
    Ok((rhat, BlockReport { objective: obj, steps, stalled, trace }))
}
