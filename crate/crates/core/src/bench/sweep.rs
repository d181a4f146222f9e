//! Noise-level sweeps: run one scheme across a grid of noise levels and
//! seeds, collect the rate observables, take per-level medians and fit
//! log-log slopes.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

use crate::model::RangeInvariantModel;
use crate::ratefun::NewtonSchedule;
use crate::solve::{ReconResult, SchemeContext, Truth};

use super::{fit_loglog, FitResult, add_noise, BenchError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Variational,
    Split,
    Newton,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Variational => "variational",
            Scheme::Split => "split",
            Scheme::Newton => "newton",
        }
    }
}

/// One sweep record.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    pub seed: u64,
    pub scheme: &'static str,
    pub err_breg: f64,
    pub err_norm: f64,
    pub residual_k: f64,
    pub norm_px: f64,
    pub q_gap: f64,
    pub alpha: f64,
    /// Newton stopping index; -1 for the single-shot schemes.
    pub n_stop: i64,
    pub status: String,
}

#[derive(Debug)]
pub struct SweepReport {
    /// Rows sorted by noise level (descending), then seed.
    pub rows: Vec<SweepRow>,
    /// Per-level medians over seeds, keyed by metric.
    pub medians: BTreeMap<String, Vec<(f64, f64)>>,
    /// Fitted log-log slopes per metric.
    pub fitted: BTreeMap<String, FitResult>,
}

/// Sweep controls beyond the scheme configuration.
pub struct SweepOptions {
    pub deltas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub newton_schedule: NewtonSchedule,
    /// Keep the regularization parameter frozen at the config value
    /// instead of coupling it to the noise level (a deliberate misuse mode
    /// for control experiments).
    pub freeze_alpha: bool,
}

impl SweepOptions {
    pub fn new(deltas: Vec<f64>, seeds: Vec<u64>) -> Self {
        SweepOptions { deltas, seeds, newton_schedule: NewtonSchedule::default(), freeze_alpha: false }
    }
}

const METRICS: [&str; 5] = ["err_breg", "err_norm", "residual_k", "norm_px", "q_gap"];

/// Runs the sweep. Rows execute in parallel; every row's randomness is
/// keyed to its own seed, so the result is a pure function of the inputs.
pub fn delta_sweep(
    ctx: &SchemeContext,
    scheme: Scheme,
    y_exact: &DVector<f64>,
    truth: &Truth,
    opts: &SweepOptions,
) -> Result<SweepReport, BenchError> {
    if opts.deltas.len() < 3 {
        return Err(BenchError::InsufficientData(format!(
            "sweep needs at least 3 noise levels, got {}",
            opts.deltas.len()
        )));
    }
    if opts.seeds.is_empty() {
        return Err(BenchError::Config("sweep needs at least one seed".into()));
    }
    let mut jobs: Vec<(f64, u64)> = Vec::new();
    for &d in &opts.deltas {
        if !(d > 0.0) {
            return Err(BenchError::Config(format!("noise levels must be positive, got {d}")));
        }
        for &s in &opts.seeds {
            jobs.push((d, s));
        }
    }
    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|&(delta, seed)| run_row(ctx, scheme, y_exact, truth, delta, seed, opts))
        .collect();
    let mut rows = rows;
    rows.sort_by(|a, b| {
        b.delta
            .partial_cmp(&a.delta)
            .unwrap()
            .then(a.seed.cmp(&b.seed))
    });
    // Medians over seeds per level, valid rows only.
    let mut medians: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for metric in METRICS {
        let mut pts = Vec::new();
        for &d in &opts.deltas {
            let mut vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.delta == d && r.status == "ok")
                .map(|r| metric_value(r, metric))
                .filter(|v| v.is_finite())
                .collect();
            if vals.is_empty() {
                continue;
            }
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            pts.push((d, vals[vals.len() / 2]));
        }
        pts.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        medians.insert(metric.to_string(), pts);
    }
    let mut fitted = BTreeMap::new();
    for metric in METRICS {
        let pts: Vec<(f64, f64)> = medians[metric]
            .iter()
            .copied()
            .filter(|&(_, v)| v > 0.0)
            .collect();
        if pts.len() >= 3 {
            fitted.insert(metric.to_string(), fit_loglog(&pts)?);
        }
    }
    if fitted.is_empty() {
        return Err(BenchError::InsufficientData(
            "fewer than 3 valid levels survived for every metric".into(),
        ));
    }
    Ok(SweepReport { rows, medians, fitted })
}

fn metric_value(row: &SweepRow, metric: &str) -> f64 {
    match metric {
        "err_breg" => row.err_breg,
        "err_norm" => row.err_norm,
        "residual_k" => row.residual_k,
        "norm_px" => row.norm_px,
        "q_gap" => row.q_gap,
        _ => f64::NAN,
    }
}

fn run_row(
    ctx: &SchemeContext,
    scheme: Scheme,
    y_exact: &DVector<f64>,
    truth: &Truth,
    delta: f64,
    seed: u64,
    opts: &SweepOptions,
) -> SweepRow {
    let mut row = SweepRow {
        delta,
        seed,
        scheme: scheme.name(),
        err_breg: f64::NAN,
        err_norm: f64::NAN,
        residual_k: f64::NAN,
        norm_px: f64::NAN,
        q_gap: f64::NAN,
        alpha: f64::NAN,
        n_stop: -1,
        status: "ok".into(),
    };
    let y_delta = add_noise(y_exact, delta, seed);
    let mut cfg = ctx.cfg;
    cfg.eta = cfg.c_eta * delta.powf(cfg.p);
    if !opts.freeze_alpha && scheme != Scheme::Newton {
        match ctx.choose_alpha_apriori(delta) {
            Ok(a) => cfg.alpha = a,
            Err(e) => {
                row.status = format!("error:{e}");
                return row;
            }
        }
    }
    row.alpha = cfg.alpha;
    let run_ctx = match SchemeContext::new(ctx.model, ctx.psi, ctx.rreg.clone(), cfg) {
        Ok(c) => c,
        Err(e) => {
            row.status = format!("error:{e}");
            return row;
        }
    };
    let result: Result<ReconResult, _> = match scheme {
        Scheme::Variational => run_ctx.minimize_variational(&y_delta, Some(truth)),
        Scheme::Split => run_ctx.minimize_split(&y_delta, Some(truth)),
        Scheme::Newton => {
            run_ctx.run_frozen_newton(&y_delta, delta, &opts.newton_schedule, Some(truth))
        }
    };
    let res = match result {
        Ok(r) => r,
        Err(e) => {
            row.status = format!("error:{e}");
            return row;
        }
    };
    if let Some(n) = res.n_stop {
        row.n_stop = n as i64;
        if let Some(a) = res.certificates.get("alpha_terminal") {
            row.alpha = *a;
        }
    }
    if let Some(excess) = res.certificates.get("eta_gap_excess") {
        // Tiny positive excess at rounding scale is not a violation.
        let scale = res.certificates.get("objective").copied().unwrap_or(1.0);
        if *excess > 1e-9 * (1.0 + scale.abs()) {
            row.status = "cert_violated".into();
        }
    }
    let model = ctx.model;
    match fill_metrics(model, &ctx.rreg, truth, &res) {
        Ok((eb, en, rk, px, qg)) => {
            row.err_breg = eb;
            row.err_norm = en;
            row.residual_k = rk;
            row.norm_px = px;
            row.q_gap = qg;
        }
        Err(e) => row.status = format!("error:{e}"),
    }
    row
}

fn fill_metrics(
    model: &dyn RangeInvariantModel,
    rreg: &crate::solve::QuadFunctional,
    truth: &Truth,
    res: &ReconResult,
) -> Result<(f64, f64, f64, f64, f64), BenchError> {
    let readout = model.im_p_apply(&model.r_inverse(&res.r_hat)?);
    let target = model.im_p_apply(&truth.x_true);
    let err_breg = rreg.bregman(&readout, &target);
    let err_norm = (&readout - &target).norm();
    let residual_k = model.k_apply(&(&res.r_hat - &truth.r_true))?.norm();
    let norm_px = model.p_apply(&res.x).norm();
    let q_gap = (model.r_eval(&res.x)? - &res.r_hat).norm();
    Ok((err_breg, err_norm, residual_k, norm_px, q_gap))
}
