//! Differentiation of canonical expressions.
//!
//! One generic engine handles product, quotient, chain and radical rules;
//! the behaviour on leaf atoms (variables, parameters, jets) is supplied by
//! the caller. Total derivatives increment jet multi-indices, partial
//! derivatives treat jets as constants, and polynomial partials single out
//! one atom.

use num::BigRational;

use super::canon::{big, Expr};
use super::frame::{idx_add, Frame};
use super::poly::{Atom, Poly};

/// Derivative of a leaf atom. `Structural` lets the engine recurse into
/// applied functions and radicals with their built-in rules.
pub enum LeafD {
    Zero,
    One,
    Expr(Expr),
}

pub fn derive_with(e: &Expr, leaf: &dyn Fn(&Atom) -> Option<LeafD>, rec: &dyn Fn(&Expr) -> Expr) -> Expr {
    // d(N / prod f^e) = dN/den - N * sum e_i dF_i / (F_i * den)
    let base_den = Expr { num: Poly::one(), den: e.den.clone() };
    let mut acc = derive_poly(&e.num, leaf, rec).mul(&base_den);
    if !e.den.is_empty() && !e.num.is_zero() {
        for (f, &k) in &e.den {
            let df = derive_poly(f, leaf, rec);
            if df.is_zero() {
                continue;
            }
            let term = Expr::from_poly(e.num.clone())
                .mul(&df)
                .scale(&big(k as i64))
                .mul(&base_den)
                .div(&Expr::from_poly(f.clone()))
                .expect("denominator factor is nonzero");
            acc = acc.sub(&term);
        }
    }
    acc
}

fn derive_poly(p: &Poly, leaf: &dyn Fn(&Atom) -> Option<LeafD>, rec: &dyn Fn(&Expr) -> Expr) -> Expr {
    let mut acc = Expr::zero();
    for (mono, coeff) in &p.0 {
        for (a, &e) in &mono.0 {
            let da = derive_atom(a, leaf, rec);
            if da.is_zero() {
                continue;
            }
            // coeff * e * mono/a^1 * da
            let mut rest = mono.clone();
            let have = rest.0.get_mut(a).unwrap();
            *have -= 1;
            if *have == 0 {
                rest.0.remove(a);
            }
            let rest_poly = rest.reduce(coeff * BigRational::from_integer(e.into()));
            acc = acc.add(&Expr::from_poly(rest_poly).mul(&da));
        }
    }
    acc
}

fn derive_atom(a: &Atom, leaf: &dyn Fn(&Atom) -> Option<LeafD>, rec: &dyn Fn(&Expr) -> Expr) -> Expr {
    if let Some(d) = leaf(a) {
        return match d {
            LeafD::Zero => Expr::zero(),
            LeafD::One => Expr::one(),
            LeafD::Expr(e) => e,
        };
    }
    match a {
        Atom::Apply(name, dord, args) => {
            // chain rule over argument slots
            let mut acc = Expr::zero();
            for (slot, arg) in args.iter().enumerate() {
                let darg = rec(arg);
                if darg.is_zero() {
                    continue;
                }
                let mut d2 = dord.clone();
                d2[slot] += 1;
                let bumped = Expr::apply(name, d2, args.clone());
                acc = acc.add(&bumped.mul(&darg));
            }
            acc
        }
        Atom::Rad(base, r) => {
            // d(base^(1/r)) = rad * d(base) / (r * base)
            let dbase = derive_poly(base, leaf, rec);
            if dbase.is_zero() {
                return Expr::zero();
            }
            Expr::from_atom(a.clone())
                .mul(&dbase)
                .scale(&BigRational::new(1.into(), (*r).into()))
                .div(&Expr::from_poly((**base).clone()))
                .expect("radical base is nonzero")
        }
        _ => Expr::zero(),
    }
}

impl Expr {
    /// Total derivative in the direction of variable slot `slot` of `frame`:
    /// jet multi-indices increment, parameters vanish, applied symbols follow
    /// the chain rule through their arguments.
    pub fn total_derivative(&self, slot: usize, frame: &Frame) -> Expr {
        fn go(e: &Expr, slot: usize, frame: &Frame) -> Expr {
            let leaf = |a: &Atom| -> Option<LeafD> {
                match a {
                    Atom::Var(v) => Some(if frame.slot(v) == Some(slot) {
                        LeafD::One
                    } else {
                        LeafD::Zero
                    }),
                    Atom::Param(_) => Some(LeafD::Zero),
                    Atom::Jet(func, idx) => Some(if frame.depends(func, slot) {
                        LeafD::Expr(Expr::jet(func, idx_add(*idx, slot)))
                    } else {
                        LeafD::Zero
                    }),
                    _ => None,
                }
            };
            let rec = |e: &Expr| go(e, slot, frame);
            derive_with(e, &leaf, &rec)
        }
        go(self, slot, frame)
    }

    /// Total derivative by variable name.
    pub fn d(&self, var: &str, frame: &Frame) -> Expr {
        let slot = frame.slot(var).expect("unknown direction");
        self.total_derivative(slot, frame)
    }

    /// Iterated total derivative by a jet multi-index.
    pub fn d_idx(&self, idx: [u32; 2], frame: &Frame) -> Expr {
        let mut e = self.clone();
        for _ in 0..idx[0] {
            e = e.total_derivative(0, frame);
        }
        for _ in 0..idx[1] {
            e = e.total_derivative(1, frame);
        }
        e
    }

    /// Explicit partial derivative w.r.t. a variable: jets held constant,
    /// applied symbols still chain through their arguments.
    pub fn partial_var(&self, slot: usize, frame: &Frame) -> Expr {
        fn go(e: &Expr, slot: usize, frame: &Frame) -> Expr {
            let leaf = |a: &Atom| -> Option<LeafD> {
                match a {
                    Atom::Var(v) => Some(if frame.slot(v) == Some(slot) {
                        LeafD::One
                    } else {
                        LeafD::Zero
                    }),
                    Atom::Param(_) | Atom::Jet(_, _) => Some(LeafD::Zero),
                    _ => None,
                }
            };
            let rec = |e: &Expr| go(e, slot, frame);
            derive_with(e, &leaf, &rec)
        }
        go(self, slot, frame)
    }

    /// Polynomial partial derivative w.r.t. a single atom; every other leaf
    /// is held constant and applied-symbol arguments are not entered.
    pub fn partial_atom(&self, target: &Atom) -> Expr {
        let leaf = |a: &Atom| -> Option<LeafD> {
            Some(if a == target { LeafD::One } else { LeafD::Zero })
        };
        let rec = |_: &Expr| Expr::zero();
        derive_with(self, &leaf, &rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::frame::Frame;

    #[test]
    fn jet_increments() {
        let fr = Frame::yz();
        let w = Expr::func("w");
        let wy = w.d("y", &fr);
        assert_eq!(wy, Expr::jet("w", [1, 0]));
        // mixed partials commute structurally
        assert_eq!(wy.d("z", &fr), w.d("z", &fr).d("y", &fr));
    }

    #[test]
    fn dependency_declaration() {
        let fr = Frame::yz().with_dep("R", [true, false]);
        let r = Expr::func("R");
        assert!(r.d("z", &fr).is_zero());
        assert_eq!(r.d("y", &fr), Expr::jet("R", [1, 0]));
    }

    #[test]
    fn quotient_rule() {
        let fr = Frame::yz();
        let w = Expr::func("w");
        let y = Expr::var("y");
        // d/dy (w / y) = w_y/y - w/y^2
        let q = w.div(&y).unwrap();
        let dq = q.d("y", &fr);
        let expect = Expr::jet("w", [1, 0])
            .div(&y)
            .unwrap()
            .sub(&w.div(&y.powi(2).unwrap()).unwrap());
        assert!(dq.equivalent(&expect));
    }

    #[test]
    fn chain_rule_applied_symbol() {
        let fr = Frame::yz().with_dep("S", [false, true]);
        let s = Expr::func("S");
        let f_of_s = Expr::apply("f", vec![0], vec![s.clone()]);
        let d = f_of_s.d("z", &fr);
        let expect = Expr::apply("f", vec![1], vec![s.clone()]).mul(&Expr::jet("S", [0, 1]));
        assert_eq!(d, expect);
        assert!(f_of_s.d("y", &fr).is_zero());
    }

    #[test]
    fn radical_rule() {
        let fr = Frame::yz().with_dep("R", [true, false]);
        let asm = crate::expr::Assumptions::new();
        // d/dy sqrt(R_y) = R_yy / (2 sqrt(R_y))
        let ry = Expr::jet("R", [1, 0]);
        let s = ry.sqrt(&asm).unwrap();
        let d = s.d("y", &fr);
        let expect = Expr::jet("R", [2, 0])
            .div(&s.scale(&big(2)))
            .unwrap();
        assert!(d.equivalent(&expect));
        // h(z)*sqrt(R_y) has zero z-derivative only through h
        let h = Expr::func("h");
        let fr2 = Frame::yz().with_dep("R", [true, false]).with_dep("h", [false, true]);
        let l = h.mul(&s);
        let dz = l.d("z", &fr2);
        assert_eq!(dz, Expr::jet("h", [0, 1]).mul(&s));
    }
}
