//! Learning representations and recovering codes from single-layer ReLU
//! observations with random bias.

pub mod bias;
pub mod error;
pub mod generative;
pub mod harness;
pub mod io;
pub mod lasso;
pub mod replearn;

pub use error::{Error, Result};
