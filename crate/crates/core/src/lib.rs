//! Desk-scale simulator for shadow tomography by postselected hypothesis
//! refinement, together with the gentle-measurement, OR-test and search
//! subroutines it is built from and the matching lower-bound instances.
//!
//! All matrices are dense. Every copy of the unknown state that a procedure
//! consumes is dispensed by a [`ledger::CopySource`] and recorded in its
//! ledger, so sample-complexity formulas can be compared with actual usage.

pub mod error;
pub mod hardness;
pub mod harness;
pub mod instance;
pub mod ledger;
pub mod linalg;
mod numeric;
pub mod orbound;
pub mod quantum;
pub mod random;
pub mod rng;
pub mod search;
pub mod shadow;

pub use error::{Error, Result};
pub use instance::Instance;
pub use linalg::{DimCap, HermMatrix, Spectrum, C64};
pub use quantum::{
    accept_prob, apply_effect, binomial_tail, materialize_threshold, sequential_accept_all, Branch,
    DensityMatrix, Direction, Effect, Measurement, MeasurementOutcome, ThresholdEffect,
};
