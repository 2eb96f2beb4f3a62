//! Bayesian optimization on the unit square and analysis of recorded search
//! traces.
//!
//! The crate has three layers:
//!
//! * surrogates and their pieces: [`kernels`], [`gp`], [`rf`], [`acquisition`],
//!   [`acqopt`];
//! * the optimization loop and its stimuli: [`testfns`], [`boloop`];
//! * trace handling: [`gamestore`] persists game and machine traces, and
//!   [`compliance`] classifies a trace by the acquisition function whose
//!   proposals it follows most often.
//!
//! All coordinates live in the normalized search space `[0, 1]²` and all
//! objective values are normalized scores in `[0, 100]`.

pub mod acqopt;
pub mod acquisition;
pub mod boloop;
pub mod compliance;
mod error;
pub mod gamestore;
pub mod gp;
pub mod kernels;
mod point;
pub mod rf;
pub mod seed;
pub mod surrogate;
pub mod testfns;

pub use error::{Error, Result};
pub use point::Point2;
