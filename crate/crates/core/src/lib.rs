#![no_std]
// `!(a < b)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;

pub mod catalog;
pub mod constants;
pub mod dynamics;
pub mod ekf;
pub mod error;
pub mod harness;
pub mod integrator;
pub mod measurement;
pub mod optimizer;
pub mod propagation;
pub mod seeding;
pub mod state;
pub mod tasking;

pub use constants::CanonicalConstants;
pub use error::{Error, Result};
pub use integrator::IntegratorConfig;
pub use propagation::Propagator;
pub use state::StateVector;
