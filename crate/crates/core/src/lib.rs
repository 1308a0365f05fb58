pub mod be_flow;
pub mod bundle_curvature;
pub mod cli_io;
pub mod error;
pub mod geometry_catalog;
pub mod ke_ode;
pub mod tensor_lab;

pub use error::{Error, Result};
