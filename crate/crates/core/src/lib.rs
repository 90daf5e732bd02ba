pub mod backoff;
pub mod engine;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod problems;
pub mod space;

pub use error::{Error, Result};
