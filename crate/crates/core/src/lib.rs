//! Numerical toolkit for regularizing ill-posed inverse problems whose
//! linearized forward operator has an invariant range.
//!
//! The library is organized around the reformulation of `F(x) = y` as the
//! system `K r̂ = y − F(x₀)`, `r(x) = r̂`, `P(x) = 0`, where the nonlinearity
//! of `F` has been absorbed into a parameter-space map `r` and `K` is a fixed
//! linear operator. Three reconstruction schemes exploit this structure:
//! joint variational regularization, a one-step split minimization, and a
//! frozen Newton iteration. Their parameter-choice rules and convergence
//! diagnostics are driven by an index-function calculus (Hölder and
//! logarithmic rate functions, their convex conjugates and derived
//! schedules).
//!
//! Modules:
//! - [`ratefun`]: index functions, conjugates, rate-resolution lemma,
//!   parameter schedules.
//! - [`model`]: abstract model contracts, the canonical data-space
//!   relaxation, nonlinearity diagnostics, vector checkpoint format.
//! - [`pde`]: 2-D elliptic discretizations (unit square and disk), gauged
//!   Neumann solves, boundary current bases, the conductivity/potential
//!   transform pair.
//! - [`eit`]: concrete relaxed models for the potential-identification
//!   problem (all-at-once and reduced form) and for impedance tomography.
//! - [`solve`]: the three reconstruction schemes with suboptimality
//!   certificates and parameter-choice rules.
//! - [`bench`]: synthetic testbeds with verified source conditions, noise
//!   generation, δ-sweeps, rate fitting and report emission.

pub mod bench;
pub mod eit;
pub mod model;
pub mod numerics;
pub mod pde;
pub mod ratefun;
pub mod solve;
