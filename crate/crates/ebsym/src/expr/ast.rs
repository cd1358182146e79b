//! Expression trees as written by users (and by the parser), converted to
//! canonical form by `normalize`.

use num::BigRational;

use crate::error::Result;

use super::assume::Assumptions;
use super::canon::Expr;
use super::frame::{Frame, Idx2};

/// Symbol reference in a tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sym {
    Var(String),
    Param(String),
    Jet(String, Idx2),
}

/// Raw expression tree. Powers carry exact rational exponents; `Deriv` is a
/// total derivative in one of the frame directions.
#[derive(Debug, Clone, PartialEq)]
pub enum Ast {
    Const(BigRational),
    Sym(Sym),
    Sum(Vec<Ast>),
    Product(Vec<Ast>),
    Power(Box<Ast>, BigRational),
    Apply(String, Vec<u32>, Vec<Ast>),
    Deriv(String, Box<Ast>),
}

impl Ast {
    /// Normalize to canonical form: a single quotient of expanded
    /// polynomials, radicals merged on equal bases. Idempotent: normalizing
    /// the print of a canonical expression reproduces it structurally.
    pub fn normalize(&self, frame: &Frame, asm: &Assumptions) -> Result<Expr> {
        match self {
            Ast::Const(c) => Ok(Expr::from_rational(c.clone())),
            Ast::Sym(Sym::Var(v)) => Ok(Expr::var(v)),
            Ast::Sym(Sym::Param(p)) => Ok(Expr::param(p)),
            Ast::Sym(Sym::Jet(f, idx)) => Ok(Expr::jet(f, *idx)),
            Ast::Sum(terms) => {
                let mut acc = Expr::zero();
                for t in terms {
                    acc = acc.add(&t.normalize(frame, asm)?);
                }
                Ok(acc)
            }
            Ast::Product(factors) => {
                let mut acc = Expr::one();
                for f in factors {
                    acc = acc.mul(&f.normalize(frame, asm)?);
                }
                Ok(acc)
            }
            Ast::Power(base, q) => base.normalize(frame, asm)?.powq(q, asm),
            Ast::Apply(name, dord, args) => {
                let mut eargs = Vec::with_capacity(args.len());
                for a in args {
                    eargs.push(a.normalize(frame, asm)?);
                }
                Ok(Expr::apply(name, dord.clone(), eargs))
            }
            Ast::Deriv(var, inner) => {
                let e = inner.normalize(frame, asm)?;
                let slot = frame
                    .slot(var)
                    .ok_or_else(|| crate::error::Error::Parse(format!("unknown direction {}", var)))?;
                Ok(e.total_derivative(slot, frame))
            }
        }
    }

    pub fn int(n: i64) -> Ast {
        Ast::Const(BigRational::from_integer(n.into()))
    }

    pub fn neg(self) -> Ast {
        Ast::Product(vec![Ast::int(-1), self])
    }
}
