pub mod causal;
pub mod data;
pub mod discovery;
pub mod error;
pub mod numerics;
pub mod pipeline;
pub mod predict;
pub mod representation;
pub mod synth;

pub use error::{Error, Result};
pub use numerics::DenseMatrix;
