//! Mesh-based network synthesis.
//!
//! A polygonal mesh and a functional specification are turned into an integer
//! program whose solution selects a subset of mesh edges: street networks,
//! floorplan corridors or game-level paths. The crate builds the program,
//! solves it with a structure-aware branch-and-bound (or exports it in LP
//! format), tiles rooms, smooths the result with snakes and renders it.

pub mod baseline;
pub mod error;
pub mod mesh;
pub mod model;
mod par;
pub mod pipeline;
pub mod smoothing;
pub mod solver;
pub mod tiling;

pub use error::{Error, Result};
