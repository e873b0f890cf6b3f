//! A laboratory for greedy sparse recovery.
//!
//! The crate bundles the pieces needed to study compressed-sensing
//! reconstruction end to end:
//!
//! * [`linalg`] — dense primitives: top-k magnitude selection and
//!   support-restricted least squares on column subsets.
//! * [`problem`] — seeded Gaussian measurement matrices and sparse test
//!   signals (Gaussian or constant-amplitude random-sign), with a binary
//!   container format for exported instances.
//! * [`algo`] — the pursuit family: OMP, SP, CoSaMP, IHT, NIHT, HTP,
//!   subspace thresholding pursuit (STP) and its width-limited variant,
//!   plus IHT-identification upgrades of CoSaMP, HTP, SAMP, and FBP.
//! * [`l1`] — equality-constrained basis pursuit as the convex baseline.
//! * [`theory`] — restricted-isometry diagnostics: exact RIC enumeration
//!   on small matrices, contraction/noise constants, admissible weight
//!   ranges, and iteration bounds.
//! * [`harness`] — seeded Monte-Carlo rate sweeps, critical-sparsity
//!   extraction, and CSV/JSON export.
//!
//! Everything is deterministic given a seed: instances, recoveries, and
//! aggregated rates are pure functions of their inputs.

pub mod algo;
pub mod error;
pub mod harness;
pub mod l1;
pub mod linalg;
pub mod problem;
pub mod rng;
pub mod theory;

pub use error::{Error, Result};
