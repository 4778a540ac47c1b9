//! Allocation of component-based software onto heterogeneous CPU/GPU
//! platforms.
//!
//! The detailed layer ([`model`]) describes components, their CPU and GPU
//! versions, and hardware nodes. [`compaction`] folds sub-system
//! alternatives into multi-variant units, [`solver`] picks a variant and a
//! node for every unit minimizing total execution time, and the chosen
//! scheme is unfolded back into a per-component placement. [`bench`]
//! generates reproducible scalability instances.

pub mod bench;
pub mod compaction;
pub mod fixtures;
pub mod model;
pub mod quantity;
pub mod solver;

pub use quantity::Quantity;
