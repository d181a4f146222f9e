//! The three subcommands.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DVector;
use rangereg::bench::{
    add_noise, delta_sweep, emit_report, recheck_vsc, SweepMeta, SweepOptions,
};
use rangereg::model::{probes, range_invariance_residual, tangential_ratio_r, vecio};
use rangereg::pde::{liouville_forward, liouville_inverse, Field, Grid2D};
use rangereg::ratefun::{bruteforce, log_grid_pairs, IndexFunction, RateInstance};
use rangereg::solve::{calibrate_config, RegVariant, SchemeContext};

use crate::config::{config_hash, Problem, ProblemSetup, RunConfig, SchemeKind};
use crate::render;
use crate::CliError;

struct CheckTable {
    rows: Vec<(String, bool, f64)>,
}

impl CheckTable {
    fn new() -> Self {
        CheckTable { rows: Vec::new() }
    }

    fn push(&mut self, name: &str, pass: bool, value: f64) {
        self.rows.push((name.to_string(), pass, value));
    }

    fn print_and_status(&self) -> bool {
        println!("name,status,value");
        let mut all = true;
        for (name, pass, value) in &self.rows {
            println!("{name},{},{value:.6e}", if *pass { "pass" } else { "FAIL" });
            all &= pass;
        }
        all
    }
}

/// Runs every module's invariant battery for the configured problem and
/// prints a `name,status,value` table.
pub fn cmd_verify(cfg: &RunConfig) -> Result<(), CliError> {
    let mut table = CheckTable::new();

    // Index-function calculus against the independent grid-refine oracle.
    for mu in [0.3, 0.5, 0.75] {
        let f = IndexFunction::hoelder(mu).expect("valid exponent");
        let mut worst = 0.0f64;
        for i in 0..50 {
            let t = 1e-3 * (1e4f64).powf(i as f64 / 49.0);
            let closed = f.conj_neg_psi(-1.0 / t).map_err(CliError::science)?;
            let oracle =
                bruteforce::conj_grid_refine(&f, -1.0 / t, 1e6).map_err(CliError::science)?;
            worst = worst.max((closed - oracle).abs() / oracle.abs().max(1e-300));
        }
        table.push(&format!("conjugate_oracle_mu_{mu}"), worst <= 1e-8, worst);
    }
    let log_f = IndexFunction::logarithmic(1.0, (-1.0f64).exp()).expect("valid parameters");
    {
        let mut worst = 0.0f64;
        for s in [-3.0, -10.0, -100.0, -1e4] {
            let v = log_f.conj_neg_psi(s).map_err(CliError::science)?;
            let o = bruteforce::conj_grid_refine(&log_f, s, 1e6).map_err(CliError::science)?;
            worst = worst.max((v - o).abs() / o.abs().max(1e-300));
        }
        table.push("conjugate_oracle_log", worst <= 1e-8, worst);
    }

    // Rate lemma by direct feasible sampling.
    for (name, f) in [
        ("rate_lemma_hoelder", IndexFunction::hoelder(0.5).expect("valid")),
        ("rate_lemma_log", log_f),
    ] {
        let rep = bruteforce::rate_lemma_battery(&f, 1000, 0xbeef).map_err(CliError::science)?;
        table.push(
            name,
            rep.err_violations == 0 && rep.res_violations == 0,
            rep.worst_excess,
        );
    }

    // Subadditivity grids.
    for mu in [0.3, 0.5, 0.9, 1.0] {
        let f = IndexFunction::hoelder(mu).expect("valid exponent");
        let v = f
            .subadditivity_violation(&log_grid_pairs(1e-8, 1e2, 100))
            .map_err(CliError::science)?;
        table.push(&format!("subadditivity_mu_{mu}"), v <= 1e-12, v);
    }
    {
        let v = log_f
            .subadditivity_violation(&log_grid_pairs(1e-8, 0.36, 100))
            .map_err(CliError::science)?;
        table.push("subadditivity_log", v <= 1e-12, v);
    }

    // Model battery for the configured problem.
    let setup = cfg.setup()?;
    let battery = probes::run_battery(setup.model.as_ref(), 50, 0x5eed, 0.5)
        .map_err(CliError::science)?;
    let identity_tol = match cfg.problem {
        Problem::Diagonal { .. } => 1e-12,
        Problem::SchroedingerAao { .. } => 1e-10,
        _ => 1e-9,
    };
    table.push("range_invariance_identity", battery.identity_residual <= identity_tol, battery.identity_residual);
    table.push("relaxation_roundtrip", battery.roundtrip_error <= 1e-9, battery.roundtrip_error);
    table.push("jacobian_fd_forward", battery.f_jacobian_fd_error <= 1e-5, battery.f_jacobian_fd_error);
    table.push("jacobian_fd_relaxation", battery.r_jacobian_fd_error <= 1e-5, battery.r_jacobian_fd_error);
    table.push("adjoint_forward", battery.f_adjoint_defect <= 1e-8, battery.f_adjoint_defect);
    table.push("adjoint_relaxation", battery.r_adjoint_defect <= 1e-8, battery.r_adjoint_defect);
    table.push("adjoint_frozen_operator", battery.k_adjoint_defect <= 1e-8, battery.k_adjoint_defect);
    table.push("projector_idempotent", battery.p_idempotence_defect <= 1e-12, battery.p_idempotence_defect);

    // Identity defect at the truth point itself.
    let truth_res = range_invariance_residual(setup.model.as_ref(), &setup.truth.x_true)
        .map_err(CliError::science)?;
    table.push("identity_at_truth", truth_res <= identity_tol, truth_res);

    // Source-condition re-check for the diagonal testbed.
    if let Problem::Diagonal { n, a, b_decay } = cfg.problem {
        let tb = rangereg::bench::make_diagonal_testbed(n, a, b_decay)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let worst = recheck_vsc(&tb, 5000, 0xa5a5);
        table.push("source_condition_recheck", worst <= 1e-10, worst);
    }

    // Conductivity/potential transform pair: two-grid roundtrip ratio.
    {
        let roundtrip = |n: usize| -> Result<f64, CliError> {
            let grid = std::sync::Arc::new(Grid2D::new_square(n).map_err(CliError::science)?);
            let sigma = crate::config::bump_field(
                &grid,
                &crate::config::BumpSpec { amp: 0.2, radius: 0.25 },
            );
            let c = liouville_forward(&sigma).map_err(CliError::science)?;
            let bg = Field::constant(grid, 1.0);
            let back = liouville_inverse(&c, 0.35, &bg).map_err(CliError::science)?;
            Ok(back.rel_l2_distance(&sigma))
        };
        let ratio = roundtrip(17)? / roundtrip(33)?;
        table.push("liouville_roundtrip_ratio", (2.5..=6.0).contains(&ratio), ratio);
    }

    // The single trivial rate-lemma edge case stays pinned.
    {
        let f = IndexFunction::hoelder(1.0).expect("valid exponent");
        let inst = RateInstance { c1: 1.0, c2: 1.0, c3: 1.0, d: 0.0, alpha: 1.0, res: 0.0, err: 0.0 };
        let ok = rangereg::ratefun::rate_bounds(&inst, &f)
            .map(|(eb, _)| eb == 0.0)
            .unwrap_or(false);
        table.push("rate_lemma_linear_edge", ok, 0.0);
    }

    if table.print_and_status() {
        Ok(())
    } else {
        Err(CliError::Science("verification battery reported failures".into()))
    }
}

fn build_context<'a>(
    cfg: &RunConfig,
    setup: &'a ProblemSetup,
) -> Result<SchemeContext<'a>, CliError> {
    SchemeContext::new(setup.model.as_ref(), setup.psi, setup.rreg.clone(), cfg.reg)
        .map_err(CliError::science)
}

/// Generates data at one noise level, runs the configured scheme, and
/// writes result artifacts.
pub fn cmd_reconstruct(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", out.display())))?;
    let setup = cfg.setup()?;
    let mut run_cfg = cfg.reg;
    if cfg.delta > 0.0 {
        run_cfg.eta = run_cfg.c_eta * cfg.delta.powf(run_cfg.p);
    }
    let y_delta = if cfg.delta > 0.0 {
        add_noise(&setup.y_exact, cfg.delta, cfg.seeds.first().copied().unwrap_or(1))
    } else {
        setup.y_exact.clone()
    };
    let base_ctx = build_context(cfg, &setup)?;
    if cfg.delta > 0.0 && cfg.scheme != SchemeKind::Newton {
        run_cfg.alpha = base_ctx.choose_alpha_apriori(cfg.delta).map_err(CliError::science)?;
    }
    let ctx = SchemeContext::new(setup.model.as_ref(), setup.psi, setup.rreg.clone(), run_cfg)
        .map_err(CliError::science)?;
    let result = match cfg.scheme {
        SchemeKind::Variational => ctx.minimize_variational(&y_delta, Some(&setup.truth)),
        SchemeKind::Split => ctx.minimize_split(&y_delta, Some(&setup.truth)),
        SchemeKind::Newton => {
            ctx.run_frozen_newton(&y_delta, cfg.delta.max(1e-12), &cfg.newton, Some(&setup.truth))
        }
    }
    .map_err(|e| CliError::Science(format!("solver failed: {e}")))?;

    // Result document plus binary checkpoints.
    let mut doc = result.to_json();
    doc.as_object_mut().unwrap().insert("alpha".into(), serde_json::json!(run_cfg.alpha));
    doc.as_object_mut().unwrap().insert("delta".into(), serde_json::json!(cfg.delta));
    std::fs::write(out.join("result.json"), serde_json::to_string_pretty(&doc).unwrap())
        .map_err(CliError::io)?;
    vecio::write_vector(&out.join("r_hat.bin"), &result.r_hat).map_err(CliError::science)?;
    vecio::write_vector(&out.join("x.bin"), &result.x).map_err(CliError::science)?;

    // Coefficient readout vs truth.
    let readout = setup
        .model
        .im_p_apply(&setup.model.r_inverse(&result.r_hat).map_err(CliError::science)?);
    let truth_readout = setup.model.im_p_apply(&setup.truth.x_true);
    let rec_coeff = readout.rows(0, setup.coeff_dim).into_owned();
    let true_coeff = truth_readout.rows(0, setup.coeff_dim).into_owned();
    if let Some(grid) = &setup.grid {
        let m = grid.num_nodes();
        let rec_field = Field::new(grid.clone(), rec_coeff.rows(0, m).into_owned())
            .map_err(CliError::science)?;
        let true_field = Field::new(grid.clone(), true_coeff.rows(0, m).into_owned())
            .map_err(CliError::science)?;
        rec_field.write_csv(&out.join("reconstruction.csv")).map_err(CliError::science)?;
        true_field.write_csv(&out.join("truth.csv")).map_err(CliError::science)?;
        std::fs::write(
            out.join("comparison.svg"),
            render::field_pair_svg(grid, &true_field, &rec_field),
        )
        .map_err(CliError::io)?;
    } else {
        write_series_csv(&out.join("truth.csv"), &true_coeff)?;
        write_series_csv(&out.join("reconstruction.csv"), &rec_coeff)?;
        std::fs::write(
            out.join("comparison.svg"),
            render::series_pair_svg(&true_coeff, &rec_coeff),
        )
        .map_err(CliError::io)?;
    }

    let err = (rec_coeff - true_coeff).norm();
    println!("reconstruction_error,{err:.6e}");
    for (k, v) in &result.certificates {
        println!("certificate_{k},{v:.6e}");
    }
    if let Some(excess) = result.certificates.get("eta_gap_excess") {
        let scale = result.certificates.get("objective").copied().unwrap_or(1.0);
        if *excess > 1e-9 * (1.0 + scale.abs()) {
            return Err(CliError::Science(format!(
                "suboptimality certificate violated (excess {excess:.3e})"
            )));
        }
    }
    Ok(())
}

fn write_series_csv(path: &Path, v: &DVector<f64>) -> Result<(), CliError> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(CliError::io)?);
    writeln!(f, "index,value").map_err(CliError::io)?;
    for i in 0..v.len() {
        writeln!(f, "{i},{:.17e}", v[i]).map_err(CliError::io)?;
    }
    Ok(())
}

/// Runs the configured noise sweep, emits the report, and grades the
/// declared slope checks.
pub fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    if cfg.deltas.len() < 3 {
        return Err(CliError::Usage(format!(
            "sweep needs at least 3 noise levels, got {}",
            cfg.deltas.len()
        )));
    }
    let setup = cfg.setup()?;
    let mut reg = cfg.reg;
    let calibration = calibrate_config(setup.model.as_ref(), &mut reg, 0xca11)
        .map_err(CliError::science)?;
    let run_cfg = RunConfig { reg, ..cfg.clone() };
    let ctx = build_context(&run_cfg, &setup)?;
    let mut opts = SweepOptions::new(cfg.deltas.clone(), cfg.seeds.clone());
    opts.newton_schedule = cfg.newton;
    let report = delta_sweep(
        &ctx,
        cfg.scheme.to_bench(),
        &setup.y_exact,
        &setup.truth,
        &opts,
    )
    .map_err(|e| match e {
        rangereg::bench::BenchError::InsufficientData(msg) => CliError::Usage(msg),
        rangereg::bench::BenchError::Config(msg) => CliError::Usage(msg),
        other => CliError::Science(other.to_string()),
    })?;

    let mut diagnostics = setup.diagnostics.clone();
    diagnostics.insert("k_norm".into(), calibration.k_norm);
    diagnostics.insert("l_r".into(), calibration.l_r);
    diagnostics.insert("c_p_floor".into(), calibration.c_p_floor);
    // Tangential-cone observable on a small admissible ball.
    if let Ok(c_tcr) = measure_tangential(setup.model.as_ref(), 20, 0.25) {
        diagnostics.insert("c_tcr".into(), c_tcr);
    }
    let meta = SweepMeta {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(cfg),
        scheme: format!("{:?}", cfg.scheme).to_lowercase(),
        problem: cfg.problem.name().to_string(),
        deltas: cfg.deltas.clone(),
        seeds: cfg.seeds.clone(),
        config: run_cfg.reg,
        diagnostics,
    };
    emit_report(&report, &meta, out).map_err(|e| CliError::Science(e.to_string()))?;

    let mut all_ok = true;
    println!("metric,fitted_slope,declared,tol,status");
    for check in &cfg.checks {
        match report.fitted.get(&check.metric) {
            Some(fit) => {
                let ok = (fit.slope - check.slope).abs() <= check.tol;
                all_ok &= ok;
                println!(
                    "{},{:.4},{},{},{}",
                    check.metric,
                    fit.slope,
                    check.slope,
                    check.tol,
                    if ok { "pass" } else { "FAIL" }
                );
            }
            None => {
                all_ok = false;
                println!("{},n/a,{},{},FAIL", check.metric, check.slope, check.tol);
            }
        }
    }
    let violations = report.rows.iter().filter(|r| r.status != "ok").count();
    if violations > 0 {
        println!("rows_not_ok,{violations}");
        all_ok = false;
    }
    if all_ok {
        Ok(())
    } else {
        Err(CliError::Science("sweep checks failed".into()))
    }
}

fn measure_tangential(
    model: &dyn rangereg::model::RangeInvariantModel,
    pairs: usize,
    fill: f64,
) -> Result<f64, CliError> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x7c7);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let x1 = probes::sample_admissible(model, &mut rng, fill);
        let x2 = probes::sample_admissible(model, &mut rng, fill);
        if let Ok(ratio) = tangential_ratio_r(model, &x1, &x2) {
            worst = worst.max(ratio);
        }
    }
    Ok(worst)
}
