pub mod error;
pub mod kernel;
mod quad;

pub use error::{Error, Result};
pub mod compress;
pub mod geometry;
pub mod operator;
pub mod tree;
pub mod solve;
pub mod stats;
pub mod cli;
pub mod config;
