pub mod cli;
pub mod config;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod spectral;
pub mod stability;
pub mod system;
pub mod tensor;

pub use error::{Error, Result};
pub use system::PolySystem;
pub use tensor::Tensor;
