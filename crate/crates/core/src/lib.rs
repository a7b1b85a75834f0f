//! H(curl)-conforming vertex-patch reconstruction of broken polynomial fields
//! on 2D triangular meshes, and its use in hp a posteriori error estimation
//! for a symmetric interior penalty dG discretization of the curl-curl problem.

pub mod broken;
pub mod dg;
pub mod error;
pub mod estimator;
pub mod lifting;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod reconstruct;

pub use broken::BrokenField;
pub use mesh::{Mesh, VertexPatch};
