//! Multipoint flux mixed finite elements for Darcy flow on triangles, with
//! a posteriori error estimation and adaptive refinement.

pub mod adaptivity;
pub mod benchmarks;
pub mod estimator;
pub mod fem;
pub mod mesh;
pub mod postprocess;
pub mod quadrature;
pub mod solver;
pub mod verify;
pub mod vtk;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
