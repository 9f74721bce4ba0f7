//! geobvp: a chart-based toolkit for semi-Riemannian geodesic boundary-value
//! problems with general boundary conditions `P ⊂ M×M`.
//!
//! The crate finds geodesics whose endpoint pair lies on `P` with endpoint
//! velocities orthogonal to `P` in the product metric `g ⊕ (-g)`, detects
//! their degeneracy through Jacobi-field boundary operators and a discretized
//! index form, certifies admissibility of boundary conditions, and runs
//! degeneracy-removal experiments with compactly supported metric
//! perturbations.

pub mod boundary;
pub mod bvp;
pub mod chart;
pub mod error;
pub mod geodesic;
pub mod indexform;
pub mod jacobi;
pub mod metric;
pub mod ode;
pub mod parallel;
pub mod perturb;
pub mod pipeline;
pub mod scenario;
pub mod series;
pub mod tol;

pub use error::{Error, Result};
