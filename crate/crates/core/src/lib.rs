//! Raviart–Thomas mixed finite elements on triangles, least-squares patch
//! recovery of the flux, recovery-based adaptivity, and numerical checks of
//! the local error-expansion identities for the RT_1 interpolant.
//!
//! The crate is organized bottom-up:
//!
//! * [`quadrature`] – Gauss rules on edges and collapsed product rules on triangles.
//! * [`mesh`] – triangulations, geometry, refinement, patches and mesh-structure analysis.
//! * [`spaces`] – RT_r shape functions, interpolation, projections and field types.
//! * [`solver`] – assembly and solution of the mixed system.
//! * [`recovery`] – the vertex-patch least-squares recovery operator.
//! * [`verify`] – geometric coefficients and identity checks on single triangles.
//! * [`analysis`] – error norms, the estimator, marking, AFEM and order fitting.
//! * [`experiment`] – the benchmark problems and the table/plot driver used by the CLI.

pub mod analysis;
pub mod error;
pub mod experiment;
pub mod mesh;
pub mod quadrature;
pub mod recovery;
pub mod solver;
pub mod spaces;
pub mod verify;

pub use error::{Error, Result};
pub use mesh::{Mesh, Patch, TriangleGeometry};
pub use recovery::{recover, PatchLs};
pub use solver::{assemble_mixed, solve_mixed, MixedSystem, ProblemSpec, SolveMethod};
pub use spaces::{LagrangeVecField, PiecewiseScalar, RtField, ScalarField, VectorField};

/// A point (or vector) in the plane.
pub type Point = [f64; 2];
