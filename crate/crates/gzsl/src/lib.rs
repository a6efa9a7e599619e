//! File formats, the synthetic data generator and the command-line driver
//! around [`gzsl_core`].

pub mod cli;
pub mod error;
pub mod format;
pub mod parallel;
pub mod synth;

pub use error::{GzslError, Result};
pub use gzsl_core;
