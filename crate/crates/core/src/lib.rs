#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic_ber;
pub mod channel;
pub mod cli;
pub mod error;
pub mod interference;
pub mod lora_phy;
pub mod montecarlo;
pub mod specfun;

pub use error::{Error, Result};
