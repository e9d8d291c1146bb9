pub mod app;
pub mod diagnostics;
pub mod error;
pub mod expr;
pub mod euler;
pub mod objective;
pub mod report;
pub mod scenario;
pub mod solver;
pub mod stochastic;
pub mod tvc;

pub use error::{Error, Result};
