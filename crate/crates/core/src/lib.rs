//! Generalized zero-shot emotion recognition from body-gesture skeleton
//! sequences.
//!
//! The crate is `no_std` (it needs `alloc`) and contains every numeric piece
//! of the framework:
//!
//! * [`matrix`], [`linalg`] and [`graph`]: a small dense real-matrix kernel,
//!   Jacobi symmetric eigendecomposition, the symmetric Sylvester solver and
//!   cosine kNN graphs with their Laplacians.
//! * [`autodiff`] and [`nn`]: a reverse-mode tape over matrices, the layer
//!   zoo (fully connected, LSTM / BLSTM, softmax cross-entropy) and Adam with
//!   per-group learning rates.
//! * [`features`]: multi-head self-attention, the BLSTM extractor and the
//!   per-branch attention gates.
//! * [`pbd`], [`stae`] and [`trainer`]: the prototype-based detector, the
//!   manifold-regularized autoencoder and the multi-task training loop.
//! * [`pipeline`]: label prediction and GZSL evaluation metrics.
//!
//! File formats, the synthetic data generator and the command-line tool live
//! in the companion `gzsl` crate.
#![no_std]

extern crate alloc;

pub mod autodiff;
pub mod data;
pub mod error;
pub mod features;
pub mod graph;
pub mod linalg;
pub mod matrix;
pub mod model;
pub mod nn;
pub mod pbd;
pub mod pipeline;
pub mod stae;
pub mod trainer;

pub use error::{Error, Result};
pub use matrix::Matrix;
