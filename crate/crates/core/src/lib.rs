pub mod attention;
pub mod autodiff;
pub mod data;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod masks;

pub use error::{Error, Result};
