//! Robust transient-stability-constrained optimal power flow for grids with
//! power flow routers (PFRs) and wind uncertainty.
//!
//! The crate is organized bottom-up: [`grid`] holds the network model and
//! admittance assembly, [`scenario`] the wind scenarios, [`conic`] a
//! first-order conic solver, [`opf`] the semidefinite OPF relaxation,
//! [`dynamics`] time-domain simulation, [`sime`] stability margins and
//! sensitivities, and [`pipeline`] the offline/online workflow.

pub mod cases;
pub mod conic;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod opf;
pub mod pipeline;
pub mod scenario;
pub mod sime;

pub use error::{Error, Result};
