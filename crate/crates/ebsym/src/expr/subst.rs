//! Simultaneous substitution. Binding an unknown function binds all of its
//! jets: the derivative atoms of a bound function are replaced by total
//! derivatives of the binding expression.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::assume::Assumptions;
use super::canon::Expr;
use super::frame::{Frame, Idx2};
use super::poly::{Atom, Poly};

#[derive(Debug, Clone, Default)]
pub struct Bindings {
    pub funcs: BTreeMap<String, Expr>,
    pub jets: BTreeMap<(String, Idx2), Expr>,
    pub params: BTreeMap<String, Expr>,
    pub vars: BTreeMap<String, Expr>,
}

impl Bindings {
    pub fn new() -> Self {
        Bindings::default()
    }

    pub fn func(mut self, name: &str, e: Expr) -> Self {
        self.funcs.insert(name.to_string(), e);
        self
    }

    pub fn jet(mut self, name: &str, idx: Idx2, e: Expr) -> Self {
        self.jets.insert((name.to_string(), idx), e);
        self
    }

    pub fn param(mut self, name: &str, e: Expr) -> Self {
        self.params.insert(name.to_string(), e);
        self
    }

    pub fn var(mut self, name: &str, e: Expr) -> Self {
        self.vars.insert(name.to_string(), e);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.funcs.is_empty() && self.jets.is_empty() && self.params.is_empty() && self.vars.is_empty()
    }
}

struct Ctx<'a> {
    b: &'a Bindings,
    frame: &'a Frame,
    asm: &'a Assumptions,
    derived: BTreeMap<(String, Idx2), Expr>,
}

impl Expr {
    pub fn substitute(&self, b: &Bindings, frame: &Frame, asm: &Assumptions) -> Result<Expr> {
        if b.is_empty() {
            return Ok(self.clone());
        }
        let mut ctx = Ctx { b, frame, asm, derived: BTreeMap::new() };
        subst_expr(self, &mut ctx)
    }
}

fn subst_expr(e: &Expr, ctx: &mut Ctx) -> Result<Expr> {
    let mut acc = subst_poly(&e.num, ctx)?;
    for (f, &k) in &e.den {
        let fv = subst_poly(f, ctx)?;
        if fv.is_zero() {
            return Err(Error::SingularSubstitution(format!("{:?}", f)));
        }
        acc = acc.mul(&fv.powi(-(k as i64))?);
    }
    Ok(acc)
}

fn subst_poly(p: &Poly, ctx: &mut Ctx) -> Result<Expr> {
    let mut acc = Expr::zero();
    for (mono, coeff) in &p.0 {
        let mut term = Expr::from_rational(coeff.clone());
        for (a, &e) in &mono.0 {
            let av = subst_atom(a, ctx)?;
            term = term.mul(&av.powi(e as i64)?);
        }
        acc = acc.add(&term);
    }
    Ok(acc)
}

fn subst_atom(a: &Atom, ctx: &mut Ctx) -> Result<Expr> {
    match a {
        Atom::Var(v) => Ok(ctx.b.vars.get(v).cloned().unwrap_or_else(|| Expr::from_atom(a.clone()))),
        Atom::Param(p) => Ok(ctx.b.params.get(p).cloned().unwrap_or_else(|| Expr::from_atom(a.clone()))),
        Atom::Jet(func, idx) => {
            let direct = ctx.b.jets.get(&(func.clone(), *idx)).cloned();
            if let Some(bound) = ctx.b.funcs.get(func).cloned() {
                let derived = derived_jet(func, *idx, &bound, ctx)?;
                if let Some(d) = direct {
                    if !d.equivalent(&derived) {
                        return Err(Error::InconsistentBinding(format!("{}_{:?}", func, idx)));
                    }
                }
                return Ok(derived);
            }
            Ok(direct.unwrap_or_else(|| Expr::from_atom(a.clone())))
        }
        Atom::Apply(name, dord, args) => {
            let mut new_args = Vec::with_capacity(args.len());
            for arg in args {
                new_args.push(subst_expr(arg, ctx)?);
            }
            Ok(Expr::apply(name, dord.clone(), new_args))
        }
        Atom::Rad(base, r) => {
            let bv = subst_poly(base, ctx)?;
            bv.powq(&num::BigRational::new(1.into(), (*r).into()), ctx.asm)
        }
    }
}

fn derived_jet(func: &str, idx: Idx2, bound: &Expr, ctx: &mut Ctx) -> Result<Expr> {
    if let Some(e) = ctx.derived.get(&(func.to_string(), idx)) {
        return Ok(e.clone());
    }
    let value = if idx == [0, 0] {
        bound.clone()
    } else if idx[1] > 0 {
        let prev = derived_jet(func, [idx[0], idx[1] - 1], bound, ctx)?;
        prev.total_derivative(1, ctx.frame)
    } else {
        let prev = derived_jet(func, [idx[0] - 1, 0], bound, ctx)?;
        prev.total_derivative(0, ctx.frame)
    };
    ctx.derived.insert((func.to_string(), idx), value.clone());
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::big;

    #[test]
    fn jets_of_bound_function_follow() {
        let fr = Frame::yz().with_dep("R", [true, false]);
        let asm = Assumptions::new();
        // R = y^2: R_yy -> 2
        let b = Bindings::new().func("R", Expr::var("y").powi(2).unwrap());
        let ryy = Expr::jet("R", [2, 0]).substitute(&b, &fr, &asm).unwrap();
        assert_eq!(ryy, Expr::int(2));
    }

    #[test]
    fn inconsistent_jet_binding_rejected() {
        let fr = Frame::yz().with_dep("R", [true, false]);
        let asm = Assumptions::new();
        let b = Bindings::new()
            .func("R", Expr::var("y").powi(2).unwrap())
            .jet("R", [1, 0], Expr::int(5));
        let r = Expr::jet("R", [1, 0]).substitute(&b, &fr, &asm);
        assert!(matches!(r, Err(Error::InconsistentBinding(_))));
        // consistent explicit binding is fine
        let b2 = Bindings::new()
            .func("R", Expr::var("y").powi(2).unwrap())
            .jet("R", [1, 0], Expr::var("y").scale(&big(2)));
        assert!(Expr::jet("R", [1, 0]).substitute(&b2, &fr, &asm).is_ok());
    }

    #[test]
    fn wy_condition_vanishes_under_solved_form() {
        // 2 R_y L_y - L R_yy with L = h(z) sqrt(R_y) substituted -> 0
        let fr = Frame::yz()
            .with_dep("R", [true, false])
            .with_dep("h", [false, true])
            .with_dep("L", [true, true]);
        let asm = Assumptions::new();
        let l = Expr::func("L");
        let cond = Expr::int(2)
            .mul(&Expr::jet("R", [1, 0]))
            .mul(&Expr::jet("L", [1, 0]))
            .sub(&l.mul(&Expr::jet("R", [2, 0])));
        let solved = Expr::func("h")
            .mul(&Expr::jet("R", [1, 0]).sqrt(&asm).unwrap());
        let b = Bindings::new().func("L", solved);
        let r = cond.substitute(&b, &fr, &asm).unwrap();
        assert!(r.is_zero());
    }

    #[test]
    fn applied_symbol_arguments_substitute() {
        let fr = Frame::yz().with_dep("S", [false, true]);
        let asm = Assumptions::new();
        let f_of_s = Expr::apply("f", vec![1], vec![Expr::func("S")]);
        let b = Bindings::new().func("S", Expr::var("z").powi(3).unwrap());
        let r = f_of_s.substitute(&b, &fr, &asm).unwrap();
        assert_eq!(
            r,
            Expr::apply("f", vec![1], vec![Expr::var("z").powi(3).unwrap()])
        );
    }
}
