pub mod acceptance;
pub mod bits;
pub mod curvature;
pub mod disint;
pub mod error;
pub mod flow;
pub mod isoperim;
pub mod mmspace;
pub mod monge1d;
pub mod rays;
pub mod report;
pub mod w1solve;

pub use error::{Error, Result};

/// Crate version, echoed in report manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
