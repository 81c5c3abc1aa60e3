pub mod baselines;
pub mod cli;
pub mod curve;
pub mod domain;
pub mod error;
pub mod horizon;
pub mod lp;
pub mod mpc;
pub mod scenario;
pub mod sensitivity;
pub mod settlement;
pub mod synth;
pub mod trace_io;

pub use error::{EmsError, Result};
