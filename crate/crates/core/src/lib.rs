//! Deep graph neural network lab: sparse graphs, a reverse-mode tape,
//! gated-residual GNN models, full-batch training and depth diagnostics.

pub mod autodiff;
pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod nn;
pub mod plot;
pub mod rng;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
