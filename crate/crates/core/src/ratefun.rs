//! Index-function calculus.
//!
//! An index function ψ is continuous, strictly increasing with ψ(0) = 0. Two
//! families are supported: Hölder `ψ(t) = t^μ` with `μ ∈ (0, 1]` and
//! logarithmic `ψ(t) = (−log(min{t, t₀}))^{−ν}` with `ν > 0`,
//! `t₀ ∈ (0, 1/e]`. The module provides ψ itself, the convex conjugate of
//! −ψ, the parameter-choice map `φ⁻¹(α) = α·(−ψ)*(−1/(2·C̄·α))` together
//! with its inverse φ, the derived rate function ψ̃, the resolution lemma
//! turning a joint residual/error inequality into separate bounds, a
//! subadditivity check, and geometric α-schedules with their stopping index.
//!
//! Everything here is a pure function of its inputs; values are immutable
//! and safe to share across threads.

use crate::numerics::{bisect_increasing, golden_section_max};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from the index-function calculus.
#[derive(Debug, Error)]
pub enum RateFunError {
    #[error("invalid index-function parameter: {0}")]
    InvalidParameter(String),
    #[error("psi is only defined for nonnegative arguments (got {0})")]
    NegativeArgument(f64),
    #[error("the supremum defining the conjugate is unbounded at s = {0}")]
    UnboundedSupremum(f64),
    #[error("no bracket for phi: target {target} outside attainable range [{lo}, {hi}]")]
    NoBracket { target: f64, lo: f64, hi: f64 },
    #[error("rate instance violates the feasibility inequality by {0:.3e}")]
    Infeasible(f64),
    #[error("rate bounds need strictly positive c1, c2, C3 and alpha")]
    DegenerateInstance,
    #[error("schedule did not reach the stopping index within {0} steps")]
    ScheduleDiverged(usize),
    #[error("conjugate growth ratio {measured:.6} exceeds the assumed bound {assumed:.6}")]
    GrowthViolation { measured: f64, assumed: f64 },
}

/// Floor used when clamping logarithm arguments away from zero.
const LOG_FLOOR: f64 = 1e-300;

/// Bracket and tolerance for numeric conjugation by golden-section search.
const CONJ_BRACKET_HI: f64 = 1e6;
const CONJ_TOL: f64 = 1e-12;

/// A rate function ψ from one of the two supported families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum IndexFunction {
    /// `ψ(t) = t^μ`, `0 < μ ≤ 1`.
    Hoelder { mu: f64 },
    /// `ψ(t) = (−log(min{t, t₀}))^{−ν}`, `ν > 0`, `0 < t₀ ≤ 1/e`.
    Logarithmic { nu: f64, t0: f64 },
}

impl IndexFunction {
    /// Hölder-family constructor; requires `0 < mu <= 1`.
    pub fn hoelder(mu: f64) -> Result<Self, RateFunError> {
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(RateFunError::InvalidParameter(format!(
                "hoelder exponent must lie in (0, 1], got {mu}"
            )));
        }
        Ok(IndexFunction::Hoelder { mu })
    }

    /// Logarithmic-family constructor; requires `nu > 0` and
    /// `0 < t0 <= 1/e` so that `−log t₀ ≥ 1`.
    pub fn logarithmic(nu: f64, t0: f64) -> Result<Self, RateFunError> {
        if !(nu > 0.0) {
            return Err(RateFunError::InvalidParameter(format!(
                "log exponent must be positive, got {nu}"
            )));
        }
        if !(t0 > 0.0 && t0 <= (-1.0f64).exp()) {
            return Err(RateFunError::InvalidParameter(format!(
                "log cutoff must lie in (0, 1/e], got {t0}"
            )));
        }
        Ok(IndexFunction::Logarithmic { nu, t0 })
    }

    /// Evaluates ψ(t) for `t ≥ 0`.
    pub fn psi(&self, t: f64) -> Result<f64, RateFunError> {
        if t < 0.0 {
            return Err(RateFunError::NegativeArgument(t));
        }
        Ok(match *self {
            IndexFunction::Hoelder { mu } => t.powf(mu),
            IndexFunction::Logarithmic { nu, t0 } => {
                if t == 0.0 {
                    0.0
                } else {
                    let arg = t.min(t0).max(LOG_FLOOR);
                    (-arg.ln()).powf(-nu)
                }
            }
        })
    }

    /// Derivative ψ'(t) for `t > 0` (used by majorize-minimize solvers).
    ///
    /// The logarithmic family has zero slope on the plateau `t ≥ t₀`.
    pub fn psi_prime(&self, t: f64) -> Result<f64, RateFunError> {
        if t <= 0.0 {
            return Err(RateFunError::NegativeArgument(t));
        }
        Ok(match *self {
            IndexFunction::Hoelder { mu } => mu * t.powf(mu - 1.0),
            IndexFunction::Logarithmic { nu, t0 } => {
                if t >= t0 {
                    0.0
                } else {
                    let l = -t.max(LOG_FLOOR).ln();
                    nu * l.powf(-nu - 1.0) / t
                }
            }
        })
    }

    /// Convex conjugate of −ψ at `s ≤ 0`:
    /// `(−ψ)*(s) = sup_{t ≥ 0} (s·t + ψ(t))`.
    ///
    /// For the Hölder family with `μ < 1` the closed form
    /// `c_μ·(−1/s)^{μ/(1−μ)}` with `c_μ = μ^{μ/(1−μ)} − μ^{1/(1−μ)}` is
    /// used. The `μ = 1` case is piecewise exact (0 for `s ≤ −1`, unbounded
    /// above). The logarithmic family is conjugated numerically by
    /// golden-section search; the objective is concave on `[0, t₀]` and
    /// affine decreasing beyond, hence unimodal.
    pub fn conj_neg_psi(&self, s: f64) -> Result<f64, RateFunError> {
        if s > 0.0 {
            return Err(RateFunError::UnboundedSupremum(s));
        }
        match *self {
            IndexFunction::Hoelder { mu } => {
                if (mu - 1.0).abs() < f64::EPSILON {
                    // sup_t (s+1) t: zero iff s <= -1, otherwise unbounded.
                    if s <= -1.0 {
                        Ok(0.0)
                    } else {
                        Err(RateFunError::UnboundedSupremum(s))
                    }
                } else if s == 0.0 {
                    Err(RateFunError::UnboundedSupremum(s))
                } else {
                    let c_mu = mu.powf(mu / (1.0 - mu)) - mu.powf(1.0 / (1.0 - mu));
                    Ok(c_mu * (-1.0 / s).powf(mu / (1.0 - mu)))
                }
            }
            IndexFunction::Logarithmic { .. } => {
                let (_, v) = golden_section_max(0.0, CONJ_BRACKET_HI, CONJ_TOL, |t| {
                    s * t + self.psi(t).unwrap_or(f64::NEG_INFINITY)
                });
                Ok(v.max(0.0))
            }
        }
    }

    /// The a-priori map `φ⁻¹(α) = α·(−ψ)*(−1/(2·C̄·α))`, strictly
    /// increasing in α.
    pub fn phi_inverse(&self, cbar: f64, alpha: f64) -> Result<f64, RateFunError> {
        if !(alpha > 0.0) || !(cbar > 0.0) {
            return Err(RateFunError::InvalidParameter(format!(
                "phi_inverse needs alpha > 0 and cbar > 0, got alpha={alpha}, cbar={cbar}"
            )));
        }
        Ok(alpha * self.conj_neg_psi(-1.0 / (2.0 * cbar * alpha))?)
    }

    /// Inverse of [`Self::phi_inverse`]: returns α with `φ⁻¹(α) = t` to
    /// 1e−10 relative tolerance, by monotone bisection on `log α`.
    pub fn phi(&self, cbar: f64, t: f64) -> Result<f64, RateFunError> {
        if !(t > 0.0) {
            return Err(RateFunError::InvalidParameter(format!(
                "phi is defined for positive arguments, got {t}"
            )));
        }
        let eval = |log_alpha: f64| self.phi_inverse(cbar, log_alpha.exp()).unwrap_or(f64::NAN);
        // Expand the bracket in log alpha until it straddles the target.
        let (mut lo, mut hi) = (-5.0f64, 5.0f64);
        let mut expansions = 0;
        while !(eval(lo) <= t) {
            lo -= 20.0;
            expansions += 1;
            if expansions > 40 || !eval(lo).is_finite() {
                return Err(RateFunError::NoBracket { target: t, lo: eval(lo), hi: eval(hi) });
            }
        }
        while !(eval(hi) >= t) {
            hi += 20.0;
            expansions += 1;
            if expansions > 40 || !eval(hi).is_finite() {
                return Err(RateFunError::NoBracket { target: t, lo: eval(lo), hi: eval(hi) });
            }
        }
        let log_alpha = bisect_increasing(lo, hi, t, 0.0, 200, eval);
        let alpha = log_alpha.exp();
        let achieved = self.phi_inverse(cbar, alpha)?;
        if (achieved - t).abs() > 1e-10 * t.abs() {
            return Err(RateFunError::NoBracket { target: t, lo: achieved, hi: achieved });
        }
        Ok(alpha)
    }

    /// The derived rate function `ψ̃(d) = (−ψ)*(−1/(2·C̄·φ(τ̄·d)))`.
    pub fn psi_tilde(&self, cbar: f64, tau_up: f64, d: f64) -> Result<f64, RateFunError> {
        if !(d > 0.0) || !(tau_up > 0.0) {
            return Err(RateFunError::InvalidParameter(format!(
                "psi_tilde needs d > 0 and tau_up > 0, got d={d}, tau_up={tau_up}"
            )));
        }
        let alpha = self.phi(cbar, tau_up * d)?;
        self.conj_neg_psi(-1.0 / (2.0 * cbar * alpha))
    }

    /// Maximum of `ψ(a+b) − ψ(a) − ψ(b)` over the supplied pairs; both
    /// families are subadditive, so the result should not exceed zero (up
    /// to rounding).
    pub fn subadditivity_violation(&self, pairs: &[(f64, f64)]) -> Result<f64, RateFunError> {
        let mut worst = f64::NEG_INFINITY;
        for &(a, b) in pairs {
            let v = self.psi(a + b)? - self.psi(a)? - self.psi(b)?;
            if v > worst {
                worst = v;
            }
        }
        Ok(worst)
    }

    /// Infimum of `ψ(t)/t` over a log grid on `(0, t_max]`; the constant
    /// `c_ψ` of the low-rate bound `ψ(t) ≥ c_ψ·t` on that range.
    pub fn low_rate_constant(&self, t_max: f64, samples: usize) -> Result<f64, RateFunError> {
        let mut c = f64::INFINITY;
        for i in 0..samples {
            let t = t_max * (i as f64 + 1.0) / samples as f64;
            c = c.min(self.psi(t)? / t);
        }
        Ok(c)
    }
}

/// Builds the log-spaced grid of `(a, b)` pairs used by the subadditivity
/// battery: `n × n` points with both coordinates in `[lo, hi]`.
pub fn log_grid_pairs(lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    let coords: Vec<f64> = (0..n)
        .map(|i| {
            let f = i as f64 / (n - 1) as f64;
            lo * (hi / lo).powf(f)
        })
        .collect();
    let mut pairs = Vec::with_capacity(n * n);
    for &a in &coords {
        for &b in &coords {
            pairs.push((a, b));
        }
    }
    pairs
}

/// One instance of the residual/error inequality
/// `c₁·res + c₂·α·err ≤ d + α·ψ(C₃·res)`.
#[derive(Debug, Clone, Copy)]
pub struct RateInstance {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub d: f64,
    pub alpha: f64,
    pub res: f64,
    pub err: f64,
}

impl RateInstance {
    /// Slack of the feasibility inequality; nonnegative means feasible.
    pub fn feasibility_slack(&self, f: &IndexFunction) -> Result<f64, RateFunError> {
        let lhs = self.c1 * self.res + self.c2 * self.alpha * self.err;
        let rhs = self.d + self.alpha * f.psi(self.c3 * self.res)?;
        Ok(rhs - lhs)
    }
}

/// Resolves a feasible [`RateInstance`] into separate bounds
/// `err ≤ (1/c₂)·(d/α + (−ψ)*(−c̃₁/α))` and
/// `res ≤ (2/c₁)·(d + α·(−ψ)*(−c̃₁/(2α)))` with `c̃₁ = c₁/C₃`.
///
/// An unbounded conjugate (possible for `μ = 1` when the scaled argument
/// lands in `(−1, 0]`) makes the corresponding bound vacuous; it is
/// returned as `+∞`.
pub fn rate_bounds(inst: &RateInstance, f: &IndexFunction) -> Result<(f64, f64), RateFunError> {
    if !(inst.c1 > 0.0 && inst.c2 > 0.0 && inst.c3 > 0.0 && inst.alpha > 0.0) {
        return Err(RateFunError::DegenerateInstance);
    }
    let slack = inst.feasibility_slack(f)?;
    if slack < -1e-12 * (1.0 + inst.d.abs()) {
        return Err(RateFunError::Infeasible(-slack));
    }
    let conj_or_inf = |s: f64| match f.conj_neg_psi(s) {
        Ok(v) => Ok(v),
        Err(RateFunError::UnboundedSupremum(_)) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    };
    let c1_tilde = inst.c1 / inst.c3;
    let err_bound = (inst.d / inst.alpha + conj_or_inf(-c1_tilde / inst.alpha)?) / inst.c2;
    let res_bound =
        2.0 / inst.c1 * (inst.d + inst.alpha * conj_or_inf(-c1_tilde / (2.0 * inst.alpha))?);
    Ok((err_bound, res_bound))
}

/// Geometric regularization-parameter schedule for the frozen Newton
/// iteration: `α_{n+1} = q·α_n`, tolerances `η_n = C_η·φ⁻¹(α_n)`, and the
/// stopping index `n* = min{n : φ⁻¹(α_n) ≤ τ·δ^p}`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct NewtonSchedule {
    pub alpha0: f64,
    pub decay_q: f64,
    pub c_eta: f64,
    pub tau: f64,
    /// Assumed bound on the conjugate growth ratio between consecutive
    /// schedule steps; the measured ratio is checked against it.
    pub c_conj_growth: f64,
    /// Hard cap on the stopping index.
    pub max_steps: usize,
}

impl Default for NewtonSchedule {
    fn default() -> Self {
        NewtonSchedule {
            alpha0: 1.0,
            decay_q: 0.5,
            c_eta: 1.0,
            tau: 1.0,
            c_conj_growth: 4.0,
            max_steps: 200,
        }
    }
}

/// Realized schedule: the α and η sequences up to the stopping index and
/// the measured conjugate growth constant.
#[derive(Debug, Clone)]
pub struct ScheduleRun {
    pub alphas: Vec<f64>,
    pub etas: Vec<f64>,
    pub n_star: usize,
    pub measured_growth: f64,
}

impl NewtonSchedule {
    /// Runs the schedule for noise level `delta` and exponent `p`.
    ///
    /// Stops at the first `n` with `φ⁻¹(α_n) ≤ τ·δ^p` (equivalent to
    /// `α_n ≤ φ(τ·δ^p)` since φ is increasing). Errors if the cap is hit
    /// or the measured conjugate growth exceeds the assumed bound.
    pub fn run(
        &self,
        f: &IndexFunction,
        cbar: f64,
        delta: f64,
        p: f64,
    ) -> Result<ScheduleRun, RateFunError> {
        if !(delta > 0.0) {
            return Err(RateFunError::InvalidParameter(format!(
                "schedule needs delta > 0, got {delta}"
            )));
        }
        if !(self.decay_q > 0.0 && self.decay_q < 1.0) {
            return Err(RateFunError::InvalidParameter(format!(
                "decay factor must lie in (0,1), got {}",
                self.decay_q
            )));
        }
        let target = self.tau * delta.powf(p);
        let mut alphas = Vec::new();
        let mut etas = Vec::new();
        let mut conjs = Vec::new();
        let mut n_star = None;
        for n in 0..=self.max_steps {
            let alpha = self.alpha0 * self.decay_q.powi(n as i32);
            let phi_inv = f.phi_inverse(cbar, alpha)?;
            alphas.push(alpha);
            etas.push(self.c_eta * phi_inv);
            conjs.push(f.conj_neg_psi(-1.0 / (2.0 * cbar * alpha))?);
            if phi_inv <= target {
                n_star = Some(n);
                break;
            }
        }
        let n_star = n_star.ok_or(RateFunError::ScheduleDiverged(self.max_steps))?;
        // Growth condition: conj at alpha_n vs alpha_{n+1}, up to n*.
        let mut measured: f64 = 1.0;
        for n in 0..n_star {
            if conjs[n + 1] > 0.0 {
                measured = measured.max(conjs[n] / conjs[n + 1]);
            }
        }
        if measured > self.c_conj_growth * (1.0 + 1e-9) {
            return Err(RateFunError::GrowthViolation {
                measured,
                assumed: self.c_conj_growth,
            });
        }
        Ok(ScheduleRun { alphas, etas, n_star, measured_growth: measured })
    }
}

/// Brute-force reference computations, deliberately independent of the
/// closed forms and searches above. These power the verification command
/// and the oracle-based tests.
pub mod bruteforce {
    use super::{IndexFunction, RateFunError, RateInstance};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    /// Conjugate `sup_{t≥0}(s·t + ψ(t))` by coarse grid search followed by
    /// repeated local refinement. Entirely derivative-free.
    pub fn conj_grid_refine(
        f: &IndexFunction,
        s: f64,
        hi: f64,
    ) -> Result<f64, RateFunError> {
        let obj = |t: f64| -> f64 { s * t + f.psi(t).unwrap_or(f64::NEG_INFINITY) };
        let n = 4000usize;
        let mut best_t = 0.0;
        let mut best = obj(0.0);
        // Log-spaced sweep catches maxima near zero; include the far end.
        for i in 0..=n {
            let t = 1e-12 * (hi / 1e-12f64).powf(i as f64 / n as f64);
            let v = obj(t);
            if v > best {
                best = v;
                best_t = t;
            }
        }
        let mut lo = (best_t * 0.5).max(0.0);
        let mut span = (best_t * 2.0).max(1e-10) - lo;
        for _ in 0..40 {
            let mut local_best = best;
            let mut local_t = best_t;
            for i in 0..=200 {
                let t = lo + span * i as f64 / 200.0;
                let v = obj(t);
                if v > local_best {
                    local_best = v;
                    local_t = t;
                }
            }
            best = local_best;
            best_t = local_t;
            span /= 20.0;
            lo = (best_t - span / 2.0).max(0.0);
        }
        Ok(best.max(0.0))
    }

    /// Result of the rate-lemma sampling battery.
    #[derive(Debug, Clone, Copy)]
    pub struct RateLemmaReport {
        pub instances: usize,
        pub err_violations: usize,
        pub res_violations: usize,
        /// Largest relative excess of a quantity over its bound (negative
        /// when every bound holds with room to spare).
        pub worst_excess: f64,
    }

    /// Samples feasible residual/error instances and checks both bounds of
    /// the resolution lemma on each. Sampling is direct on the feasible
    /// set: `res` is drawn first, then `err` uniformly below the level the
    /// inequality allows.
    pub fn rate_lemma_battery(
        f: &IndexFunction,
        instances: usize,
        seed: u64,
    ) -> Result<RateLemmaReport, RateFunError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut report = RateLemmaReport {
            instances: 0,
            err_violations: 0,
            res_violations: 0,
            worst_excess: f64::NEG_INFINITY,
        };
        while report.instances < instances {
            let c1 = rng.gen_range(0.1..3.0);
            let c2 = rng.gen_range(0.1..3.0);
            let c3 = rng.gen_range(0.1..3.0);
            let d = rng.gen_range(0.0..1.0);
            let alpha = 10f64.powf(rng.gen_range(-3.0..1.0));
            // Feasible res range: slack(res) >= 0 with err = 0. The slack is
            // positive at 0 (d >= 0) and eventually negative since psi is
            // sublinear in the sampled regime; scan for a sign change.
            let slack0 = |res: f64| -> f64 {
                d + alpha * f.psi(c3 * res).unwrap_or(0.0) - c1 * res
            };
            let mut res_hi = 1e-3;
            while slack0(res_hi) > 0.0 && res_hi < 1e6 {
                res_hi *= 2.0;
            }
            let res = rng.gen_range(0.0..res_hi);
            let slack = slack0(res);
            if slack < 0.0 {
                continue; // res itself infeasible; resample
            }
            let err_max = slack / (c2 * alpha);
            let err = rng.gen_range(0.0..=err_max);
            let inst = RateInstance { c1, c2, c3, d, alpha, res, err };
            let (err_bound, res_bound) = super::rate_bounds(&inst, f)?;
            report.instances += 1;
            let err_excess = (err - err_bound) / (1.0 + err_bound.abs());
            let res_excess = (res - res_bound) / (1.0 + res_bound.abs());
            if err_excess > 1e-12 {
                report.err_violations += 1;
            }
            if res_excess > 1e-12 {
                report.res_violations += 1;
            }
            report.worst_excess = report.worst_excess.max(err_excess).max(res_excess);
        }
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn hoelder(mu: f64) -> IndexFunction {
        IndexFunction::hoelder(mu).unwrap()
    }

    fn log1() -> IndexFunction {
        IndexFunction::logarithmic(1.0, (-1.0f64).exp()).unwrap()
    }

    #[test]
    fn psi_hoelder_values() {
        assert_relative_eq!(hoelder(0.5).psi(0.25).unwrap(), 0.5);
        for t in [0.0, 0.3, 7.0] {
            assert_relative_eq!(hoelder(1.0).psi(t).unwrap(), t);
        }
    }

    #[test]
    fn psi_log_values() {
        // psi(e^-4) = 1/4 for nu = 1, t0 = 1/e.
        assert_relative_eq!(log1().psi((-4.0f64).exp()).unwrap(), 0.25, max_relative = 1e-12);
        assert_eq!(log1().psi(0.0).unwrap(), 0.0);
        // Plateau beyond the cutoff.
        assert_relative_eq!(log1().psi(10.0).unwrap(), 1.0);
    }

    #[test]
    fn psi_rejects_negative_arguments() {
        assert!(hoelder(0.5).psi(-1e-9).is_err());
        assert!(log1().psi(-2.0).is_err());
    }

    #[test]
    fn psi_is_monotone_from_zero() {
        for f in [hoelder(0.3), hoelder(1.0), log1()] {
            let mut prev = f.psi(0.0).unwrap();
            assert_eq!(prev, 0.0);
            for i in 1..60 {
                let t = 1e-9 * 1.9f64.powi(i);
                let v = f.psi(t).unwrap();
                assert!(v >= prev, "psi must be nondecreasing");
                prev = v;
            }
        }
    }

    #[test]
    fn conjugate_hoelder_half_closed_form() {
        // c_{1/2} = 1/4, so the conjugate at s = -1/t equals t/4.
        let f = hoelder(0.5);
        let t = 8.0;
        assert_relative_eq!(f.conj_neg_psi(-1.0 / t).unwrap(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn conjugate_hoelder_matches_grid_refine_oracle() {
        for mu in [0.3, 0.5, 0.75] {
            let f = hoelder(mu);
            for i in 0..50 {
                let t = 1e-3 * (1e4f64).powf(i as f64 / 49.0); // t in [1e-3, 10]
                let s = -1.0 / t;
                let closed = f.conj_neg_psi(s).unwrap();
                let oracle = bruteforce::conj_grid_refine(&f, s, 1e6).unwrap();
                assert_relative_eq!(closed, oracle, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn conjugate_mu_one_is_zero_at_minus_one() {
        assert_eq!(hoelder(1.0).conj_neg_psi(-1.0).unwrap(), 0.0);
        assert_eq!(hoelder(1.0).conj_neg_psi(-3.0).unwrap(), 0.0);
        assert!(hoelder(1.0).conj_neg_psi(-0.5).is_err());
    }

    #[test]
    fn conjugate_rejects_positive_arguments() {
        assert!(hoelder(0.5).conj_neg_psi(0.1).is_err());
        assert!(log1().conj_neg_psi(1.0).is_err());
    }

    #[test]
    fn conjugate_log_matches_oracle() {
        let f = log1();
        let golden = f.conj_neg_psi(-100.0).unwrap();
        let oracle = bruteforce::conj_grid_refine(&f, -100.0, 1e6).unwrap();
        assert_relative_eq!(golden, oracle, max_relative = 1e-8);
    }

    #[test]
    fn phi_inverse_hoelder_half_example() {
        // mu = 1/2, Cbar = 1/2, alpha = 1: conj(-1/(2*0.5*1)) = conj(-1) = 1/4,
        // hence phi_inverse = 0.25.
        let f = hoelder(0.5);
        assert_relative_eq!(f.phi_inverse(0.5, 1.0).unwrap(), 0.25, max_relative = 1e-12);
    }

    #[test]
    fn phi_inverse_mu_one_vanishes_below_threshold() {
        let f = hoelder(1.0);
        for cbar in [0.5, 1.0, 4.0] {
            let alpha = 1.0 / (2.0 * cbar); // boundary of finiteness
            assert_eq!(f.phi_inverse(cbar, alpha).unwrap(), 0.0);
            assert_eq!(f.phi_inverse(cbar, alpha / 8.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn phi_inverse_is_strictly_increasing() {
        for f in [hoelder(0.5), log1()] {
            let mut prev = 0.0;
            for i in 0..20 {
                let alpha = 1e-6 * (1e6f64).powf(i as f64 / 19.0);
                let v = f.phi_inverse(0.5, alpha).unwrap();
                assert!(v > prev, "phi_inverse must increase: {v} vs {prev}");
                prev = v;
            }
        }
    }

    #[test]
    fn phi_roundtrips_phi_inverse() {
        for f in [hoelder(0.5), hoelder(0.3), log1()] {
            for i in 0..10 {
                let alpha = 1e-6 * (1e6f64).powf(i as f64 / 9.0);
                let t = f.phi_inverse(0.5, alpha).unwrap();
                let back = f.phi(0.5, t).unwrap();
                assert_relative_eq!(back, alpha, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn phi_hoelder_half_example() {
        assert_relative_eq!(hoelder(0.5).phi(0.5, 0.25).unwrap(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn psi_tilde_hoelder_slope_is_mu() {
        // For psi = t^mu the derived rate function is proportional to d^mu;
        // check the fitted slope over four decades.
        let f = hoelder(0.5);
        let mut pts = Vec::new();
        for i in 0..20 {
            let d = 1e-6 * (1e4f64).powf(i as f64 / 19.0);
            pts.push((d.ln(), f.psi_tilde(0.5, 1.0, d).unwrap().ln()));
        }
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        assert_relative_eq!(slope, 0.5, max_relative = 1e-6);
    }

    #[test]
    fn psi_tilde_monotone_in_d() {
        for f in [hoelder(0.5), log1()] {
            let mut prev = 0.0;
            for i in 0..20 {
                let d = 1e-6 * (1e4f64).powf(i as f64 / 19.0);
                let v = f.psi_tilde(0.5, 1.0, d).unwrap();
                assert!(v > prev);
                prev = v;
            }
        }
    }

    #[test]
    fn psi_tilde_log_tracks_psi_near_zero() {
        // For the logarithmic family the derived rate has the same decay as
        // psi itself: the ratio drifts by less than 10% over two decades.
        let f = log1();
        let ratio = |d: f64| f.psi_tilde(0.5, 1.0, d).unwrap() / f.psi(d).unwrap();
        let r1 = ratio(1e-6);
        let r2 = ratio(1e-8);
        assert!(
            (r1 / r2 - 1.0).abs() < 0.10,
            "ratio drift too large: {r1} vs {r2}"
        );
    }

    #[test]
    fn rate_bounds_mu_one_degenerate_point() {
        // c1=c2=C3=1, d=0, mu=1: feasibility reads res + err <= res, which
        // forces err = 0; the err bound is exactly zero. The res bound uses
        // the conjugate at -1/2 which is unbounded for mu = 1, so it is
        // vacuous (+inf) and res stays unconstrained, as it should: any
        // (res, 0) satisfies the inequality.
        let f = hoelder(1.0);
        let inst = RateInstance {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            d: 0.0,
            alpha: 1.0,
            res: 0.0,
            err: 0.0,
        };
        let (eb, rb) = rate_bounds(&inst, &f).unwrap();
        assert_eq!(eb, 0.0);
        assert!(rb.is_infinite());
        let feasible_res = RateInstance { res: 5.0, ..inst };
        assert!(feasible_res.feasibility_slack(&f).unwrap() >= 0.0);
        // Any positive err is infeasible at this parameter point.
        let bad = RateInstance { err: 0.1, ..inst };
        assert!(rate_bounds(&bad, &f).is_err());
    }

    #[test]
    fn rate_lemma_battery_holds_for_both_families() {
        for f in [hoelder(0.5), log1()] {
            let report = bruteforce::rate_lemma_battery(&f, 1000, 42).unwrap();
            assert_eq!(report.err_violations, 0, "{f:?}");
            assert_eq!(report.res_violations, 0, "{f:?}");
        }
    }

    #[test]
    fn rate_bounds_splitting_parameter_half() {
        // Re-derivation of the res bound: splitting res into a convex
        // combination with lambda = 1/2 gives
        // (c1/2) res <= d + alpha*conj(-c1/(2 C3 alpha)), which is exactly
        // the returned res bound; check on a feasible instance with err = 0.
        let f = hoelder(0.5);
        let inst = RateInstance {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            d: 0.2,
            alpha: 0.3,
            res: 0.1,
            err: 0.0,
        };
        let (_, res_bound) = rate_bounds(&inst, &f).unwrap();
        let direct = 2.0 / inst.c1
            * (inst.d
                + inst.alpha
                    * f.conj_neg_psi(-(inst.c1 / inst.c3) / (2.0 * inst.alpha)).unwrap());
        assert_relative_eq!(res_bound, direct);
    }

    #[test]
    fn subadditivity_grids() {
        let pairs = log_grid_pairs(1e-8, 1e2, 100);
        assert!(hoelder(0.5).subadditivity_violation(&pairs).unwrap() <= 1e-12);
        assert!(hoelder(1.0).subadditivity_violation(&pairs).unwrap().abs() <= 1e-12);
        let log_pairs = log_grid_pairs(1e-8, 0.36, 100); // inside (0, 1/e)
        assert!(log1().subadditivity_violation(&log_pairs).unwrap() <= 1e-12);
    }

    #[test]
    fn low_rate_constant_positive() {
        let c = hoelder(0.5).low_rate_constant(1.0, 50).unwrap();
        assert!(c > 0.0);
        // psi(t)/t = t^{-1/2} is minimized at t_max = 1, value 1.
        assert_relative_eq!(c, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn schedule_stops_immediately_when_target_reached() {
        let f = hoelder(0.5);
        let sched = NewtonSchedule::default();
        let cbar = 0.5;
        // Pick delta so that phi_inverse(alpha0) = tau * delta^2 exactly.
        let t = f.phi_inverse(cbar, sched.alpha0).unwrap();
        let delta = t.sqrt();
        let run = sched.run(&f, cbar, delta, 2.0).unwrap();
        assert_eq!(run.n_star, 0);
    }

    #[test]
    fn schedule_growth_constant_hoelder_half() {
        // conj(-1/(2 Cbar a)) is proportional to a for mu = 1/2, so the
        // growth ratio is 1/q = 2.
        let f = hoelder(0.5);
        let run = NewtonSchedule::default().run(&f, 0.5, 1e-3, 2.0).unwrap();
        assert_relative_eq!(run.measured_growth, 2.0, max_relative = 1e-9);
        assert!(run.n_star > 0);
        // alpha and eta decrease strictly.
        for n in 1..run.alphas.len() {
            assert!(run.alphas[n] < run.alphas[n - 1]);
            assert!(run.etas[n] < run.etas[n - 1]);
        }
    }

    #[test]
    fn schedule_nstar_grows_logarithmically() {
        // For mu = 1/2 and q = 1/2, n* grows like log2(alpha0 / phi(tau d^2)).
        let f = hoelder(0.5);
        let sched = NewtonSchedule::default();
        let mut prev = 0;
        for k in 1..=5 {
            let delta = 10f64.powi(-k);
            let run = sched.run(&f, 0.5, delta, 2.0).unwrap();
            assert!(run.n_star >= prev);
            prev = run.n_star;
            // phi_inverse(alpha) = Cbar alpha^2 / 2... for mu=1/2 the exact
            // n* satisfies alpha_{n*} ~ delta, so n* ~ log2(1/delta).
            let expected = (1.0 / delta).log2();
            assert!(
                (run.n_star as f64 - expected).abs() <= 2.0,
                "n_star {} vs expected {expected}",
                run.n_star
            );
        }
    }

    #[test]
    fn constructor_validation() {
        assert!(IndexFunction::hoelder(0.0).is_err());
        assert!(IndexFunction::hoelder(1.2).is_err());
        assert!(IndexFunction::logarithmic(0.0, 0.3).is_err());
        assert!(IndexFunction::logarithmic(1.0, 0.5).is_err()); // t0 > 1/e
    }
}
