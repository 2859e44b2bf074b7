//! Signal and sensitivity model for nuclear magnetic resonance detected with a
//! superconducting flux qubit.
//!
//! Two read-out protocols are modelled:
//!
//! * a Ramsey measurement after spatially asymmetric RF saturation of the
//!   nuclear spins, which turns the change in sample magnetization into a DC
//!   flux through the qubit loop, and
//! * dynamical decoupling (spin echo for `n = 1`), which picks up the AC field
//!   of the freely precessing spins without any polarization.
//!
//! The crate is organised bottom-up: [`fluxqubit`] holds the qubit energy
//! model and the Biot–Savart field kernels, [`rfdrive`] the driven-spin steady
//! state, [`ensemble`] the sample discretization and field aggregation,
//! [`protocols`] the closed-form signals and uncertainties, and
//! [`sensitivity`] the minimum-detectable density and spin-number solvers.
//! [`oracle`] contains slow brute-force references used by the test-suite and
//! by [`selfcheck`].

pub mod constants;
pub mod ensemble;
pub mod error;
pub mod exec;
pub mod fluxqubit;
pub mod numeric;
pub mod oracle;
pub mod protocols;
pub mod rfdrive;
pub mod selfcheck;
pub mod sensitivity;
pub mod special;
pub mod sweep;
pub mod table;

pub use error::{Error, Result};
pub use exec::Execution;
pub use fluxqubit::{FieldVector, LoopGeometry, Point, QubitParams};
pub use sensitivity::{Scheme, SensitivityResult, Setup};
