//! Degenerate Hamilton–Jacobi–Bellman equations on the flat torus and the
//! occupation-measure linear programs dual to them.

pub mod adjoint;
pub mod approx;
pub mod cli;
pub mod config;
pub mod duality;
pub mod error;
pub mod grid;
pub mod io;
pub mod lp;
pub mod measures;
pub mod model;
pub mod pde;
pub mod profile;
pub mod stencil;

pub use error::{Error, Result};
pub use grid::{DiscreteMeasure, GridFunction, TorusGrid, Vector, VelocityLattice};
pub use model::ModelSpec;
