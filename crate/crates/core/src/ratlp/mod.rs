//! Exact linear algebra: polyhedra, a simplex solver and Farkas encodings.

mod farkas;
mod polyhedron;
mod simplex;

pub use farkas::{farkas_encode, FarkasAssertion};
pub use polyhedron::{polyhedron_includes, Extremum, PolyUnion, Polyhedron};
pub use simplex::{lp_solve, LpConstraint, LpOutcome, LpProblem, Objective, Relation, Sense};
