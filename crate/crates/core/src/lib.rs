//! Numerical laboratory for boundary Liouville quantum gravity and
//! SLE_κ(ρ_−; ρ_+, ρ_1).
//!
//! The crate is organised bottom-up:
//!
//! * [`params`]: coupling constants and the weight / insertion / force-point maps.
//! * [`specfun`]: log-gamma and the double gamma function Γ_b.
//! * [`exact`]: closed-form length laws, GMC moments, the conformal-derivative
//!   moment formula and the identities relating them.
//! * [`sle`]: Loewner-flow simulation of SLE_κ(ρ) and Monte Carlo for ψ′(1).
//! * [`gmc`]: boundary Gaussian multiplicative chaos on [0, 1].
//! * [`surfaces`]: radial processes of quantum disks and their building blocks.
//! * [`harness`]: streaming estimates, importance weights and verdicts.

pub mod error;
pub mod brownian;
pub mod campaign;
pub mod exact;
pub mod gmc;
pub mod harness;
pub mod params;
pub mod quad;
pub mod rng;
pub mod sle;
pub mod specfun;
pub mod stats;
pub mod suite;
pub mod surfaces;

pub use error::{Error, Result};
pub use params::LqgParams;

/// Version string embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
