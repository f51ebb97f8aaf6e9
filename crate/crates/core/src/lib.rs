//! Almost-sure termination prover for affine probabilistic programs.
//!
//! Each while-loop gets a linear descent supermartingale map (DSM-map),
//! synthesized through Farkas encodings and an exact rational simplex.
//! Loop certificates compose along the program structure into a
//! whole-program certificate.

pub mod cfg;
pub mod dsm;
pub mod engine;
pub mod error;
pub mod frontend;
pub mod invariants;
pub mod linear;
pub mod ratlp;
pub mod scalar;
pub mod simulator;
pub mod synthesis;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Exact arbitrary-precision rational.
pub type Rat = num_rational::BigRational;
/// Affine form with exact rational coefficients.
pub type LinExpr = linear::LinearExpr<Rat>;
/// Polyhedron with exact rational data.
pub type Poly = ratlp::Polyhedron<Rat>;
/// Finite union of exact polyhedra.
pub type Dnf = ratlp::PolyUnion<Rat>;
/// LP problem over exact rationals.
pub type Lp = ratlp::LpProblem<Rat>;
