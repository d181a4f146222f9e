//! Synthetic benchmarks: the diagonal testbed with a verified source
//! condition, exact-magnitude noise, δ-sweeps with log-log rate fits, and
//! report emission.

mod fit;
mod noise;
mod report;
mod sweep;
mod testbed;

pub use fit::{fit_loglog, FitResult};
pub use noise::add_noise;
pub use report::{emit_report, SweepMeta};
pub use sweep::{delta_sweep, Scheme, SweepOptions, SweepReport, SweepRow};
pub use testbed::{make_diagonal_testbed, recheck_vsc, DiagonalTestbed, VscAudit};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Solve(#[from] crate::solve::SolveError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    RateFun(#[from] crate::ratefun::RateFunError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
