//! Charts, sampled fields and finite-difference Riemannian geometry.

pub mod assemble;
pub mod chart;
pub mod field;
pub mod geometry;
pub mod interp;
pub mod linalg;

pub use assemble::{assemble_total_metric, assemble_total_metric_with, total_metric_matrix};
pub use chart::{CoordinateStencil, PeriodicChart, Stencil};
pub use field::{CoordinateMetric, CoordinateScalar, MetricField, MetricSource, ScalarField, ScalarSource};
pub use geometry::{christoffel, drift_laplacian, grad_norm_sq, hessian, laplacian, ricci, ricci_field, Christoffel, RicciResult};
