pub mod checkpoint;
pub mod error;
pub mod evolve;
pub mod field;
pub mod fit;
pub mod grid;
pub mod lab;
pub mod linalg;
pub mod oper;
pub mod physical;
#[cfg(test)]
mod proptests;
pub mod spectra;
pub mod steady;

pub use error::{Error, Result};
