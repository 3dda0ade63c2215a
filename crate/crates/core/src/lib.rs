//! Cautious active clustering with localized Hermite kernels.

pub mod active;
pub mod data;
pub mod density;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod kernel;
pub mod points;
pub mod witness;

pub use error::{CacError, Result};
pub use points::PointSet;
