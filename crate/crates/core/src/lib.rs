pub mod benchmarks;
pub mod bounds;
pub mod cli;
pub mod envelope;
pub mod error;
pub mod io;
pub mod manifest;
pub mod model;
pub mod numerics;
pub mod reduction;
pub mod simulation;
pub mod stability;

pub use error::{Error, Result};
