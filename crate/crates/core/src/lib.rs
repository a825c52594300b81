//! Small-signal modelling of a voltage regulator's control loop with
//! remote-sensed decoupling: transfer-function algebra, PDN impedances, loop
//! composition, margins, phase-lead compensation, load-step transients and a
//! simulated injection measurement.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compensator;
pub mod config;
pub mod emit;
pub mod error;
pub mod exec;
pub mod injection;
pub mod loop_model;
pub mod measured;
pub mod pdn;
pub mod poly;
mod roots;
pub mod stability;
pub mod tf;
pub mod transient;

pub use error::{Error, Result};
pub use exec::Execution;
pub use poly::Polynomial;
pub use tf::{FrequencyResponse, TransferFunction};
