//! Numerical library for Dirichlet problems of the form
//! `-F(x, u, Du, D^2u) = lambda c(x) u + <M(x) Du, Du> + h(x)`
//! with Pucci/HJB/Isaacs-type operators: frozen and full nonlinear solves,
//! principal eigenpairs, pseudo-arclength branch continuation with fold
//! detection, a-priori bound verification, and barrier/maximum-principle
//! checks.

// `!(x > 0)` style guards are deliberate: unlike `x <= 0` they also reject
// NaN. Index loops mirror the stencil formulas and stay as written.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]
#![allow(clippy::too_many_arguments)]

pub mod barriers;
pub mod bounds;
pub mod calculus;
pub mod continuation;
pub mod dirichlet;
pub mod eigen;
pub mod error;
pub mod fixedpoint;
pub mod linalg;
pub mod mesh;
pub mod operators;
pub mod oracle;
pub mod real;
pub mod transforms;
pub mod verify;

mod assemble;

pub use error::{Error, Result};
pub use real::Real;

// Concrete aliases for the default double-precision instantiation.
pub type Grid64 = mesh::Grid<f64>;
pub type GridFunction64 = calculus::GridFunction<f64>;
pub type SymMatrix64 = linalg::SymMatrix<f64>;
pub type Ellipticity64 = operators::Ellipticity<f64>;
pub type OperatorSpec64 = operators::OperatorSpec<f64>;
pub type MatrixField64 = operators::MatrixField<f64>;
pub type ProblemSpec64 = operators::ProblemSpec<f64>;
pub type SolveReport64 = dirichlet::SolveReport<f64>;
pub type Branch64 = continuation::Branch<f64>;
pub type EigenPair64 = eigen::EigenPair<f64>;
