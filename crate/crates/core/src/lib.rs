pub mod algebroid;
pub mod catalog;
pub mod cli;
pub mod dtensor;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod mechanics;
pub mod prolongation;
pub mod smoothfn;

pub use error::{Error, Result};
