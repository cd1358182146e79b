//! Symbolic machinery for point transformations of the Euler-Bernoulli beam
//! equation: an exact expression core, jet-space differential operators, a
//! transformation engine, the equivalence-group derivation pipeline, the
//! beam symmetry group, and a numeric verification oracle.

pub mod derivation;
pub mod error;
pub mod expr;
pub mod group;
pub mod jet;
pub mod linsolve;
pub mod oracle;
pub mod parse;
pub mod symmetry;
pub mod transform;

pub use error::{Error, Result};
pub use expr::{big, Assumptions, Atom, Expr, Frame, Idx2, JetIdx};
