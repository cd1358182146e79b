//! Exact symbolic expressions: canonical rational-radical normal form,
//! total differentiation, substitution, coefficient collection.

pub mod assume;
pub mod ast;
pub mod canon;
pub mod collect;
pub mod diff;
pub mod frame;
pub mod poly;
pub mod print;
pub mod subst;

pub use assume::Assumptions;
pub use canon::{big, Expr};
pub use frame::{Frame, Idx2, JetIdx};
pub use poly::{Atom, Mono, Poly};
pub use subst::Bindings;
