//! Isokinetic Chesnavich CH4+ model and parametrisation-based Lagrangian
//! descriptors for the invariant manifolds of its periodic orbits.

pub mod dynamics;
pub mod error;
pub mod integrate;
pub mod ld;
pub mod model;
pub mod orbits;
pub mod survey;

pub use error::{Error, Result};
pub use model::ModelParams;
