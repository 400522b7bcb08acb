pub mod cli;
pub mod config;
pub mod error;
pub mod linalg;
pub mod metric;
pub mod model_file;
pub mod observables;
pub mod par;
pub mod pipeline;
pub mod report;
pub mod scatter;
pub mod selftest;
pub mod weakmeas;

pub use error::{Error, Result};
