//! Incentive analysis for coded multi-proposer dissemination under
//! withholding attacks: exact delay laws, the PIVOT-K pivotal bounty,
//! incentive thresholds, the adaptive-sender ratchet, within-slot races and
//! a pathwise Monte-Carlo simulator.

// Parameter guards are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod delay;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod incentives;
pub mod intra_slot;
pub mod mechanism;
pub mod probability;
pub mod ratchet;
pub mod report;
pub mod simulator;

pub use error::{Error, Result};
pub use exec::Execution;
pub use geometry::{Cartel, ContactSchedule, SystemInstance};
