#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autoencoder;
pub mod channel;
pub mod cli;
pub mod codec;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod relay;
pub mod rng;

pub use error::{Error, Result};
