//! Neural building blocks on top of the autodiff tape: parameter storage,
//! initialization, the layer zoo and the grouped Adam optimizer.

pub mod adam;
pub mod init;
pub mod layers;
pub mod params;

pub use adam::{Adam, LearningRates};
pub use init::Initializer;
pub use layers::{BlstmLayer, FcParams, LstmCellParams};
pub use params::{Gradients, Group, ParamId, ParamStore};
