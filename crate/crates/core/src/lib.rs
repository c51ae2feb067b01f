//! Two-scale compliance optimization for plane linearized elasticity.
//!
//! Each macroscopic element carries a rotated orthogonal-truss microstructure
//! described by an angle and two relative truss widths. Effective tensors come
//! from periodic homogenization (a structured FEM backend, cross-checked by a
//! collocation BEM backend). A dual-weighted-residual estimator compares the
//! resulting compliance against optimal rank-2 sequential laminates and splits
//! the gap into discretization and modeling contributions, which drive
//! adaptive quadtree refinement.

pub mod bem;
pub mod dwr;
pub mod error;
pub mod fem;
pub mod io;
pub mod lamination;
pub mod linalg;
pub mod mesh;
pub mod microcell;
pub mod optimizer;
pub mod quadrature;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{ElasticTensor2D, IsotropicMaterial, StressEigen, Sym2};
