//! Averaged-model simulation and control of a standalone PV + battery DC
//! microgrid.
//!
//! * [`pv`]: single-diode array model, current sensitivities, MPP search.
//! * [`estimator`]: Newton-Raphson temperature/irradiance estimation.
//! * [`plant`]: boost converter and six-state microgrid models, references.
//! * [`control`]: back-stepping, observer-based back-stepping, dual-loop PI
//!   with duty perturbation, estimator-driven MPPT.
//! * [`sim`]: fixed-step RK4 co-simulation, schedules, trace metrics.
//! * [`presets`]: parameter tables and named scenarios.
//!
//! The crate is `no_std` with `alloc`.

#![no_std]
// `!(x >= lo)` style checks are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod control;
pub mod error;
pub mod estimator;
pub mod math;
pub mod plant;
pub mod presets;
pub mod pv;
pub mod sim;

pub use error::{Error, Result};
