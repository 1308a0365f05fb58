//! Curvature of bundle metrics with flat fibers and Lie-group fibers, and
//! the grid flow of torus bundles.

pub mod blocks;
pub mod data;
pub mod fields;
pub mod flow;
pub mod lie;

pub use blocks::{flow_from_blocks, ricci_blocks_general, ricci_blocks_torus};
pub use data::{PointwiseBundleData, RicciBlocks};
pub use fields::{ConnectionField, QField};
pub use flow::{flow_rhs_torus, integrate_torus, BundleState, TorusRhs};
pub use lie::{lie_group_ricci, LieRicci, StructureConstants};
