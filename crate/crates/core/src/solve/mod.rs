//! The three reconstruction schemes over a range-invariant model: joint
//! variational minimization, one-step split minimization, and the frozen
//! Newton iteration, together with the regularization functionals and the
//! a-priori parameter-choice rules.
//!
//! Every scheme returns its iterate with an explicit suboptimality
//! certificate: on synthetic runs the final objective is compared against
//! the objective at the known solution, and the gap must not exceed the
//! tolerance η — this is the contract the convergence theory actually
//! needs, and it is recorded rather than assumed.

mod functional;
mod inner;
mod schemes;

pub use functional::{sobolev_matrix, QuadFunctional};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::model::{ModelError, RangeInvariantModel};
use crate::numerics::operator_norm;
use crate::ratefun::{IndexFunction, NewtonSchedule, RateFunError};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    RateFun(#[from] RateFunError),
    #[error(transparent)]
    Pde(#[from] crate::pde::PdeError),
    #[error("line search failed: {0}")]
    LineSearch(String),
    #[error("objective became non-finite: {0}")]
    NonFinite(String),
}

/// Rule for the a-priori choice of the regularization parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum AlphaRule {
    /// `α = φ(√(τ̲·τ̄)·δ^p)`, bracketing `τ̲·δ^p ≤ φ⁻¹(α) ≤ τ̄·δ^p`.
    PhiBased,
    /// `α = δ^p̃` (the shortcut that preserves logarithmic rates).
    LogShortcut { p_tilde: f64 },
}

/// Scalar tunables shared by all schemes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct RegConfig {
    /// Norm exponent; only the quadratic case is implemented.
    pub p: f64,
    /// Source-condition constant `b ∈ (0, 1)`.
    pub b_vsc: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Suboptimality tolerance η.
    pub eta: f64,
    /// Penalty factor of the mean-part regularizer (must exceed the
    /// subadditivity constant 1).
    pub gamma: f64,
    /// Scaling inside the mean-part regularizer; calibration raises it to
    /// at least `2^{p−1}·‖K‖^p·L_r^p`.
    pub c_p: f64,
    /// Newton coupling `β_n = c_{βα}·α_n`.
    pub c_beta_alpha: f64,
    pub tau: f64,
    pub tau_low: f64,
    pub tau_up: f64,
    pub c_eta: f64,
    /// Order of the discrete Sobolev regularization norm.
    pub sobolev_order: f64,
    /// Constant of the parameter-choice map φ.
    pub cbar: f64,
    /// Constant tying the distance term to the error functional.
    pub c_q_tilde: f64,
    pub alpha_rule: AlphaRule,
    /// Outer alternation cycle cap.
    pub max_cycles: usize,
    /// Inner step caps.
    pub max_block_steps: usize,
    pub cg_max_iter: usize,
}

impl Default for RegConfig {
    fn default() -> Self {
        RegConfig {
            p: 2.0,
            b_vsc: 0.75,
            alpha: 1e-3,
            beta: 1.0,
            eta: 0.0,
            gamma: 2.0,
            c_p: 1.0,
            c_beta_alpha: 0.0625,
            tau: 1.0,
            tau_low: 0.5,
            tau_up: 2.0,
            c_eta: 1.0,
            sobolev_order: 1.0,
            cbar: 4.0,
            c_q_tilde: 1.0,
            alpha_rule: AlphaRule::PhiBased,
            max_cycles: 60,
            max_block_steps: 40,
            cg_max_iter: 400,
        }
    }
}

impl RegConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        if self.p != 2.0 {
            return Err(SolveError::Config(format!(
                "only the quadratic exponent p = 2 is implemented, got {}",
                self.p
            )));
        }
        if !(self.b_vsc > 0.0 && self.b_vsc < 1.0) {
            return Err(SolveError::Config(format!("b must lie in (0,1), got {}", self.b_vsc)));
        }
        if !(self.gamma > 1.0) {
            return Err(SolveError::Config(format!(
                "gamma must exceed the subadditivity constant 1, got {}",
                self.gamma
            )));
        }
        let bound = (1.0 - self.b_vsc).min(self.gamma - 1.0) / (4.0 * self.c_q_tilde);
        if self.c_beta_alpha > bound * (1.0 + 1e-12) {
            return Err(SolveError::Config(format!(
                "c_beta_alpha = {} exceeds min(1-b, gamma-1)/(4 c_q) = {bound}",
                self.c_beta_alpha
            )));
        }
        if !(self.tau_low > 0.0 && self.tau_low < self.tau_up) {
            return Err(SolveError::Config("need 0 < tau_low < tau_up".into()));
        }
        if !(self.beta > 0.0 && self.eta >= 0.0 && self.c_p > 0.0) {
            return Err(SolveError::Config("beta, c_p must be positive and eta nonnegative".into()));
        }
        Ok(())
    }
}

/// Measured operator constants backing the config invariants.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CalibrationReport {
    pub k_norm: f64,
    pub l_r: f64,
    /// Lower bound `2^{p−1}·‖K‖^p·L_r^p` enforced on `c_p`.
    pub c_p_floor: f64,
}

/// Measures `‖K‖` (power iteration) and the Lipschitz quotient of `r`
/// (sampled difference quotients), and raises `cfg.c_p` to its admissible
/// floor.
pub fn calibrate_config(
    model: &dyn RangeInvariantModel,
    cfg: &mut RegConfig,
    seed: u64,
) -> Result<CalibrationReport, SolveError> {
    use rand::SeedableRng;
    let k_norm = operator_norm(
        model.dim_lifted(),
        |v| model.k_apply(v).expect("K apply failed during calibration"),
        |w| model.k_adjoint_apply(w).expect("K adjoint failed during calibration"),
        50,
    );
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut l_r: f64 = 0.0;
    for _ in 0..100 {
        let x1 = crate::model::probes::sample_admissible(model, &mut rng, 1.0);
        let x2 = crate::model::probes::sample_admissible(model, &mut rng, 1.0);
        let dx = (&x1 - &x2).norm();
        if dx == 0.0 {
            continue;
        }
        let dr = (model.r_eval(&x1)? - model.r_eval(&x2)?).norm();
        l_r = l_r.max(dr / dx);
    }
    let c_p_floor = 2f64.powf(cfg.p - 1.0) * (k_norm * l_r).powf(cfg.p);
    cfg.c_p = cfg.c_p.max(c_p_floor);
    Ok(CalibrationReport { k_norm, l_r, c_p_floor })
}

/// Regularization functional variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegVariant {
    /// `Ř((I−P)·r⁻¹(r̂))`.
    Plain,
    /// Adds `γ·ψ(C_P·‖P·r⁻¹(r̂)‖^p)` controlling the out-of-subspace part.
    Penalized,
}

/// The reference solution of a synthetic run: used for certificates only,
/// never by the solvers themselves.
#[derive(Debug, Clone)]
pub struct Truth {
    pub x_true: DVector<f64>,
    pub r_true: DVector<f64>,
}

/// Result of one scheme run.
#[derive(Debug, Clone)]
pub struct ReconResult {
    pub r_hat: DVector<f64>,
    pub x: DVector<f64>,
    /// Joint objective after each outer cycle (non-increasing).
    pub objective_trace: Vec<f64>,
    /// Named scalar certificates (suboptimality gaps, gradient norms,
    /// iteration counts).
    pub certificates: BTreeMap<String, f64>,
    /// Stopping index (Newton only).
    pub n_stop: Option<usize>,
}

impl ReconResult {
    /// Scalar part as a JSON document (vectors are checkpointed separately
    /// in the binary format).
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "objective_trace": self.objective_trace,
            "certificates": self.certificates,
            "n_stop": self.n_stop,
            "dim_lifted": self.r_hat.len(),
            "dim_x": self.x.len(),
        })
    }
}

/// Everything a scheme needs about one problem instance.
pub struct SchemeContext<'a> {
    pub model: &'a dyn RangeInvariantModel,
    pub psi: IndexFunction,
    /// The quadratic regularization form Ř on the parameter space.
    pub rreg: QuadFunctional,
    pub cfg: RegConfig,
}

impl<'a> SchemeContext<'a> {
    pub fn new(
        model: &'a dyn RangeInvariantModel,
        psi: IndexFunction,
        rreg: QuadFunctional,
        cfg: RegConfig,
    ) -> Result<Self, SolveError> {
        cfg.validate()?;
        if rreg.dim() != model.dim_x() {
            return Err(SolveError::Config(format!(
                "regularization form dimension {} does not match the model ({})",
                rreg.dim(),
                model.dim_x()
            )));
        }
        Ok(SchemeContext { model, psi, rreg, cfg })
    }

    /// `Ř((I−P)·r⁻¹(r̂))` or its penalized extension.
    pub fn reg_functional(&self, variant: RegVariant, rhat: &DVector<f64>) -> Result<f64, SolveError> {
        let x_im = self.model.r_inverse(rhat)?;
        let plain = self.rreg.value(&self.model.im_p_apply(&x_im));
        match variant {
            RegVariant::Plain => Ok(plain),
            RegVariant::Penalized => {
                let pnorm = self.model.p_apply(&x_im).norm();
                let arg = self.cfg.c_p * pnorm.powf(self.cfg.p);
                Ok(plain + self.cfg.gamma * self.psi.psi(arg)?)
            }
        }
    }

    /// A-priori regularization parameter for noise level `delta`.
    pub fn choose_alpha_apriori(&self, delta: f64) -> Result<f64, SolveError> {
        if !(delta > 0.0) {
            return Err(SolveError::Config(format!("alpha rule needs delta > 0, got {delta}")));
        }
        match self.cfg.alpha_rule {
            AlphaRule::LogShortcut { p_tilde } => Ok(delta.powf(p_tilde)),
            AlphaRule::PhiBased => {
                let target =
                    (self.cfg.tau_low * self.cfg.tau_up).sqrt() * delta.powf(self.cfg.p);
                Ok(self.psi.phi(self.cfg.cbar, target)?)
            }
        }
    }

    /// Newton schedule tolerance/stopping data for noise level `delta`.
    pub fn newton_schedule(
        &self,
        sched: &NewtonSchedule,
        delta: f64,
    ) -> Result<crate::ratefun::ScheduleRun, SolveError> {
        Ok(sched.run(&self.psi, self.cfg.cbar, delta, self.cfg.p)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        RegConfig::default().validate().unwrap();
    }

    #[test]
    fn validation_rejects_bad_constants() {
        let mut cfg = RegConfig { p: 3.0, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg = RegConfig { gamma: 0.5, ..Default::default() };
        assert!(cfg.validate().is_err());
        cfg = RegConfig { c_beta_alpha: 1.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn alpha_rule_hoelder_half_gives_delta() {
        // mu = 1/2, tau_low = tau_up = 1, p = 2: with Cbar = 2 the map is
        // phi_inverse(alpha) = alpha * c_{1/2} * (2*2*alpha) = alpha^2,
        // hence alpha = delta exactly.
        let model = crate::model::canonical_relaxation(
            crate::model::maps::DenseLinearMap::new(nalgebra::DMatrix::identity(3, 3)),
            nalgebra::DVector::zeros(3),
            10.0,
        )
        .unwrap();
        let cfg = RegConfig {
            cbar: 2.0,
            tau_low: 1.0 - 1e-12,
            tau_up: 1.0 + 1e-12,
            ..Default::default()
        };
        let ctx = SchemeContext::new(
            &model,
            IndexFunction::hoelder(0.5).unwrap(),
            QuadFunctional::euclidean(6),
            cfg,
        )
        .unwrap();
        for delta in [1e-1, 1e-3] {
            let alpha = ctx.choose_alpha_apriori(delta).unwrap();
            assert!((alpha - delta).abs() <= 1e-8 * delta, "alpha {alpha} vs delta {delta}");
        }
    }

    #[test]
    fn alpha_bracket_holds_for_random_rules() {
        use rand::Rng;
        use rand::SeedableRng;
        let model = crate::model::canonical_relaxation(
            crate::model::maps::DenseLinearMap::new(nalgebra::DMatrix::identity(2, 2)),
            nalgebra::DVector::zeros(2),
            10.0,
        )
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let psi = IndexFunction::hoelder(0.5).unwrap();
        for _ in 0..20 {
            let delta = 10f64.powf(rng.gen_range(-4.0..-1.0));
            let tau_low = rng.gen_range(0.1..1.0);
            let tau_up = tau_low + rng.gen_range(0.5..2.0);
            let cfg = RegConfig { tau_low, tau_up, ..Default::default() };
            let ctx =
                SchemeContext::new(&model, psi, QuadFunctional::euclidean(4), cfg).unwrap();
            let alpha = ctx.choose_alpha_apriori(delta).unwrap();
            let t = psi.phi_inverse(cfg.cbar, alpha).unwrap();
            let d2 = delta * delta;
            assert!(
                tau_low * d2 * (1.0 - 1e-8) <= t && t <= tau_up * d2 * (1.0 + 1e-8),
                "bracket violated: {t} vs [{}, {}]",
                tau_low * d2,
                tau_up * d2
            );
        }
    }

    #[test]
    fn log_shortcut_returns_power_verbatim() {
        let model = crate::model::canonical_relaxation(
            crate::model::maps::DenseLinearMap::new(nalgebra::DMatrix::identity(2, 2)),
            nalgebra::DVector::zeros(2),
            10.0,
        )
        .unwrap();
        let cfg = RegConfig {
            alpha_rule: AlphaRule::LogShortcut { p_tilde: 2.0 },
            ..Default::default()
        };
        let ctx = SchemeContext::new(
            &model,
            IndexFunction::logarithmic(1.0, (-1.0f64).exp()).unwrap(),
            QuadFunctional::euclidean(4),
            cfg,
        )
        .unwrap();
        assert_eq!(ctx.choose_alpha_apriori(1e-3).unwrap(), 1e-6);
    }
}
