//! Run configuration: a single JSON document, schema-validated before any
//! computation (unknown keys are rejected), plus the machinery turning it
//! into a concrete problem instance.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;

use rangereg::bench::make_diagonal_testbed;
use rangereg::eit::{
    eit_model, schroedinger_aao_model, schroedinger_alt_model, AuxVariant, PotentialStack,
    ReducedModelConfig,
};
use rangereg::model::RangeInvariantModel;
use rangereg::pde::{
    assemble, poly_bump, BoundaryCurrentBasis, CoefficientKind, Field, Grid2D,
};
use rangereg::ratefun::{IndexFunction, NewtonSchedule};
use rangereg::solve::{QuadFunctional, RegConfig, Truth};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Variational,
    Split,
    Newton,
}

impl SchemeKind {
    pub fn to_bench(self) -> rangereg::bench::Scheme {
        match self {
            SchemeKind::Variational => rangereg::bench::Scheme::Variational,
            SchemeKind::Split => rangereg::bench::Scheme::Split,
            SchemeKind::Newton => rangereg::bench::Scheme::Newton,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpSpec {
    pub amp: f64,
    pub radius: f64,
}

impl Default for BumpSpec {
    fn default() -> Self {
        BumpSpec { amp: 0.3, radius: 0.3 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Problem {
    Diagonal {
        n: usize,
        a: f64,
        b_decay: f64,
    },
    SchroedingerAao {
        grid_n: usize,
        num_currents: usize,
        #[serde(default)]
        truth: BumpSpec,
    },
    SchroedingerAlt {
        grid_n: usize,
        num_currents: usize,
        #[serde(default)]
        truth: BumpSpec,
        #[serde(default)]
        variant: Option<String>,
    },
    Eit {
        grid_n: usize,
        num_currents: usize,
        #[serde(default)]
        truth: BumpSpec,
        #[serde(default)]
        variant: Option<String>,
        #[serde(default)]
        sobolev_order: Option<f64>,
    },
}

impl Problem {
    pub fn name(&self) -> &'static str {
        match self {
            Problem::Diagonal { .. } => "diagonal",
            Problem::SchroedingerAao { .. } => "schroedinger_aao",
            Problem::SchroedingerAlt { .. } => "schroedinger_alt",
            Problem::Eit { .. } => "eit",
        }
    }
}

/// Declared tolerance on one fitted slope; the sweep command's exit status
/// aggregates these.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeCheck {
    pub metric: String,
    pub slope: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Problem,
    #[serde(default = "default_scheme")]
    pub scheme: SchemeKind,
    #[serde(default)]
    pub reg: RegConfig,
    #[serde(default)]
    pub newton: NewtonSchedule,
    #[serde(default)]
    pub deltas: Vec<f64>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    /// Noise level of a single reconstruction (`0` keeps the data exact).
    #[serde(default)]
    pub delta: f64,
    #[serde(default)]
    pub checks: Vec<SlopeCheck>,
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_scheme() -> SchemeKind {
    SchemeKind::Variational
}

/// Loads a config, applying `--override key=value` dotted-path edits before
/// schema validation.
pub fn load_config(path: &std::path::Path, overrides: &[String]) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut doc: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config is not valid JSON: {e}")))?;
    for ov in overrides {
        let (key, value) = ov
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("override must be key=value, got {ov}")))?;
        let parsed: serde_json::Value = serde_json::from_str(value)
            .unwrap_or(serde_json::Value::String(value.to_string()));
        let mut cursor = &mut doc;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            if i + 1 == parts.len() {
                cursor
                    .as_object_mut()
                    .ok_or_else(|| CliError::Usage(format!("override path {key} is not an object")))?
                    .insert(part.to_string(), parsed.clone());
            } else {
                cursor = cursor
                    .as_object_mut()
                    .ok_or_else(|| CliError::Usage(format!("override path {key} is not an object")))?
                    .entry(part.to_string())
                    .or_insert_with(|| serde_json::json!({}));
            }
        }
    }
    serde_json::from_value(doc).map_err(|e| CliError::Usage(format!("config schema: {e}")))
}

/// Hex digest of the canonicalized config (recorded in run metadata).
pub fn config_hash(cfg: &RunConfig) -> String {
    use sha2::{Digest, Sha256};
    let canon = serde_json::to_string(cfg).expect("config serialization cannot fail");
    let mut hasher = Sha256::new();
    hasher.update(canon.as_bytes());
    let out = hasher.finalize();
    out.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// A fully materialized problem: model, rate function, regularization
/// form, truth and exact data.
pub struct ProblemSetup {
    pub model: Box<dyn RangeInvariantModel>,
    pub psi: IndexFunction,
    pub rreg: QuadFunctional,
    pub truth: Truth,
    pub y_exact: DVector<f64>,
    pub grid: Option<Arc<Grid2D>>,
    /// Dimension of the leading coefficient block of the readout.
    pub coeff_dim: usize,
    pub diagnostics: BTreeMap<String, f64>,
}

fn parse_variant(v: &Option<String>) -> Result<Option<AuxVariant>, CliError> {
    match v.as_deref() {
        None => Ok(None),
        Some("frozen_coefficient") => Ok(Some(AuxVariant::FrozenCoefficient)),
        Some("current_coefficient") => Ok(Some(AuxVariant::CurrentCoefficient)),
        Some(other) => Err(CliError::Usage(format!(
            "variant must be frozen_coefficient or current_coefficient, got {other}"
        ))),
    }
}

const LOG_T0: f64 = 0.367_879_441_171_442_33; // 1/e

impl RunConfig {
    /// Builds the configured problem instance.
    pub fn setup(&self) -> Result<ProblemSetup, CliError> {
        match &self.problem {
            Problem::Diagonal { n, a, b_decay } => {
                let tb = make_diagonal_testbed(*n, *a, *b_decay)
                    .map_err(|e| CliError::Usage(format!("testbed: {e}")))?;
                let rreg = tb.rreg();
                let mut diagnostics = BTreeMap::new();
                diagnostics.insert("vsc_mu".into(), tb.audit.mu);
                diagnostics.insert("vsc_nu_star".into(), tb.audit.nu_star);
                diagnostics.insert("vsc_c_const".into(), tb.audit.c_const);
                diagnostics.insert("vsc_max_violation".into(), tb.audit.max_violation);
                let coeff_dim = tb.dim();
                Ok(ProblemSetup {
                    psi: tb.psi,
                    rreg,
                    truth: tb.truth.clone(),
                    y_exact: tb.y_exact.clone(),
                    grid: None,
                    coeff_dim,
                    diagnostics: diagnostics.clone(),
                    model: Box::new(tb.model),
                })
            }
            Problem::Eit { grid_n, num_currents, truth, variant, sobolev_order } => {
                let grid = Arc::new(
                    Grid2D::new_square(*grid_n)
                        .map_err(|e| CliError::Usage(format!("grid: {e}")))?,
                );
                let basis = BoundaryCurrentBasis::trigonometric(grid.clone(), *num_currents)
                    .map_err(|e| CliError::Usage(format!("basis: {e}")))?;
                let sigma0 = Field::constant(grid.clone(), 1.0);
                let sigma_true = bump_field(&grid, truth);
                // Admissible ball sized from the truth offset.
                let offset = (sigma_true.values() - sigma0.values()).norm();
                let mcfg = ReducedModelConfig {
                    rho0: 4.0 * offset + 1.0,
                    variant: parse_variant(variant)?,
                    ..Default::default()
                };
                let model = eit_model(grid.clone(), &basis, &sigma0, mcfg)
                    .map_err(|e| CliError::Usage(format!("model: {e}")))?;
                let x_true = model.truth_state(&sigma_true);
                let r_true = model.r_eval(&x_true).map_err(CliError::science)?;
                let y_exact = model.f_eval(&x_true).map_err(CliError::science)?;
                let order = sobolev_order.unwrap_or(self.reg.sobolev_order);
                let rreg = QuadFunctional::builder(model.dim_x())
                    .with_sobolev(&grid, order, 0)
                    .map_err(CliError::science)?;
                let mut diagnostics = BTreeMap::new();
                if let Some(sel) = model.variant_selection() {
                    diagnostics.insert("identity_frozen".into(), sel.frozen_residual);
                    diagnostics.insert("identity_current".into(), sel.current_residual);
                }
                Ok(ProblemSetup {
                    psi: IndexFunction::logarithmic(1.0, LOG_T0).expect("valid parameters"),
                    rreg,
                    truth: Truth { x_true, r_true },
                    y_exact,
                    grid: Some(grid.clone()),
                    coeff_dim: grid.num_nodes(),
                    diagnostics,
                    model: Box::new(model),
                })
            }
            Problem::SchroedingerAlt { grid_n, num_currents, truth, variant } => {
                let grid = Arc::new(
                    Grid2D::new_square(*grid_n)
                        .map_err(|e| CliError::Usage(format!("grid: {e}")))?,
                );
                let basis = BoundaryCurrentBasis::trigonometric(grid.clone(), *num_currents)
                    .map_err(|e| CliError::Usage(format!("basis: {e}")))?;
                let c0 = Field::constant(grid.clone(), 1.0);
                let c_true = bump_field_additive(&grid, truth);
                let offset = (c_true.values() - c0.values()).norm();
                let mcfg = ReducedModelConfig {
                    rho0: 4.0 * offset + 1.0,
                    coeff_lo: 0.01,
                    variant: parse_variant(variant)?,
                    ..Default::default()
                };
                let model = schroedinger_alt_model(grid.clone(), &basis, &c0, mcfg)
                    .map_err(|e| CliError::Usage(format!("model: {e}")))?;
                let x_true = model.truth_state(&c_true);
                let r_true = model.r_eval(&x_true).map_err(CliError::science)?;
                let y_exact = model.f_eval(&x_true).map_err(CliError::science)?;
                let rreg = QuadFunctional::builder(model.dim_x())
                    .with_sobolev(&grid, self.reg.sobolev_order, 0)
                    .map_err(CliError::science)?;
                let mut diagnostics = BTreeMap::new();
                if let Some(sel) = model.variant_selection() {
                    diagnostics.insert("identity_frozen".into(), sel.frozen_residual);
                    diagnostics.insert("identity_current".into(), sel.current_residual);
                }
                Ok(ProblemSetup {
                    psi: IndexFunction::logarithmic(1.0, LOG_T0).expect("valid parameters"),
                    rreg,
                    truth: Truth { x_true, r_true },
                    y_exact,
                    grid: Some(grid.clone()),
                    coeff_dim: grid.num_nodes(),
                    diagnostics,
                    model: Box::new(model),
                })
            }
            Problem::SchroedingerAao { grid_n, num_currents, truth } => {
                let grid = Arc::new(
                    Grid2D::new_square(*grid_n)
                        .map_err(|e| CliError::Usage(format!("grid: {e}")))?,
                );
                let basis = BoundaryCurrentBasis::trigonometric(grid.clone(), *num_currents)
                    .map_err(|e| CliError::Usage(format!("basis: {e}")))?;
                let c0_field = Field::constant(grid.clone(), 1.0);
                let c0 = PotentialStack::replicated(c0_field.clone(), *num_currents)
                    .map_err(CliError::science)?;
                // Base states: solves of the base potential shifted away
                // from zero (they need not solve any PDE).
                let sys = assemble(grid.clone(), CoefficientKind::Schroedinger, &c0_field)
                    .map_err(CliError::science)?;
                let u0_fields: Result<Vec<Field>, _> = (0..*num_currents)
                    .map(|j| {
                        sys.solve_neumann(basis.current(j)).map(|mut u| {
                            *u.values_mut() +=
                                DVector::from_element(grid.num_nodes(), 1.0);
                            u
                        })
                    })
                    .collect();
                let u0 = PotentialStack::new(grid.clone(), u0_fields.map_err(CliError::science)?)
                    .map_err(CliError::science)?;
                // Build with a provisional radius, size it from the truth,
                // then rebuild.
                let provisional =
                    schroedinger_aao_model(grid.clone(), &basis, &c0, &u0, 1.0)
                        .map_err(|e| CliError::Usage(format!("model: {e}")))?;
                let c_true = bump_field_additive(&grid, truth);
                let x_true = provisional.truth_state(&c_true).map_err(CliError::science)?;
                let rho0 = 4.0 * (&x_true - provisional.x0()).norm() + 1.0;
                let model = schroedinger_aao_model(grid.clone(), &basis, &c0, &u0, rho0)
                    .map_err(|e| CliError::Usage(format!("model: {e}")))?;
                let r_true = model.r_eval(&x_true).map_err(CliError::science)?;
                let y_exact = model.f_eval(&x_true).map_err(CliError::science)?;
                // Sobolev form on each potential slot; flat on the states.
                let mut rreg = QuadFunctional::builder(model.dim_x());
                for j in 0..*num_currents {
                    rreg = rreg
                        .with_sobolev(&grid, self.reg.sobolev_order, j * grid.num_nodes())
                        .map_err(CliError::science)?;
                }
                Ok(ProblemSetup {
                    psi: IndexFunction::logarithmic(1.0, LOG_T0).expect("valid parameters"),
                    rreg,
                    truth: Truth { x_true, r_true },
                    y_exact,
                    grid: Some(grid.clone()),
                    coeff_dim: grid.num_nodes() * num_currents,
                    diagnostics: BTreeMap::new(),
                    model: Box::new(model),
                })
            }
        }
    }
}

/// `(1 + bump)²`-shaped conductivity (background one, constant near the
/// boundary).
pub fn bump_field(grid: &Arc<Grid2D>, spec: &BumpSpec) -> Field {
    let center = grid.center();
    let (amp, radius) = (spec.amp, spec.radius);
    Field::from_fn(grid.clone(), move |x, y| {
        let b = poly_bump(x, y, center, radius, amp);
        (1.0 + b) * (1.0 + b)
    })
}

/// `1 + bump` potential (background one).
pub fn bump_field_additive(grid: &Arc<Grid2D>, spec: &BumpSpec) -> Field {
    let center = grid.center();
    let (amp, radius) = (spec.amp, spec.radius);
    Field::from_fn(grid.clone(), move |x, y| 1.0 + poly_bump(x, y, center, radius, amp))
}
