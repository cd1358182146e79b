//! Coefficient collection: write an expression as a polynomial in the jet
//! atoms of one unknown function (or the derivative symbols of one applied
//! function) and read off the coefficients.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::canon::Expr;
use super::frame::{Idx2, JetIdx};
use super::poly::{Atom, Mono, Poly};

impl Expr {
    /// Collect an expression linear in the jets of `func`: returns
    /// (coefficient per jet index, part free of the family). Errors if the
    /// family occurs inside radicals or denominators, or nonlinearly.
    pub fn collect_jets(&self, func: &str) -> Result<(BTreeMap<JetIdx, Expr>, Expr)> {
        let in_family = |a: &Atom| matches!(a, Atom::Jet(f, _) if f == func);
        self.check_polynomial(&in_family, func)?;
        let mut coeffs: BTreeMap<JetIdx, Poly> = BTreeMap::new();
        let mut free = Poly::zero();
        for (mono, c) in &self.num.0 {
            let fam: Vec<(&Atom, u32)> = mono
                .0
                .iter()
                .filter(|(a, _)| in_family(a))
                .map(|(a, &e)| (a, e))
                .collect();
            match fam.len() {
                0 => free.add_term(mono.clone(), c.clone()),
                1 if fam[0].1 == 1 => {
                    let idx = match fam[0].0 {
                        Atom::Jet(_, i) => *i,
                        _ => unreachable!(),
                    };
                    let mut rest = mono.clone();
                    rest.0.remove(fam[0].0);
                    coeffs.entry(JetIdx(idx)).or_insert_with(Poly::zero).add_term(rest, c.clone());
                }
                _ => {
                    return Err(Error::NotLinear(func.to_string()));
                }
            }
        }
        let den = self.den.clone();
        let wrap = |p: Poly| Expr::normalized(p, den.clone());
        let coeffs = coeffs.into_iter().map(|(k, p)| (k, wrap(p))).collect();
        Ok((coeffs, wrap(free)))
    }

    /// Collect linearly over the derivative symbols of applied function
    /// `name` (keyed by derivative order), e.g. the f, f', f'' coefficients.
    pub fn collect_applied(&self, name: &str) -> Result<(BTreeMap<Vec<u32>, Expr>, Expr)> {
        let in_family = |a: &Atom| matches!(a, Atom::Apply(f, _, _) if f == name);
        self.check_polynomial(&in_family, name)?;
        let mut coeffs: BTreeMap<Vec<u32>, Poly> = BTreeMap::new();
        let mut free = Poly::zero();
        for (mono, c) in &self.num.0 {
            let fam: Vec<(&Atom, u32)> = mono
                .0
                .iter()
                .filter(|(a, _)| in_family(a))
                .map(|(a, &e)| (a, e))
                .collect();
            match fam.len() {
                0 => free.add_term(mono.clone(), c.clone()),
                1 if fam[0].1 == 1 => {
                    let dord = match fam[0].0 {
                        Atom::Apply(_, d, _) => d.clone(),
                        _ => unreachable!(),
                    };
                    let mut rest = mono.clone();
                    rest.0.remove(fam[0].0);
                    coeffs.entry(dord).or_insert_with(Poly::zero).add_term(rest, c.clone());
                }
                _ => return Err(Error::NotLinear(name.to_string())),
            }
        }
        let den = self.den.clone();
        let wrap = |p: Poly| Expr::normalized(p, den.clone());
        let coeffs = coeffs.into_iter().map(|(k, p)| (k, wrap(p))).collect();
        Ok((coeffs, wrap(free)))
    }

    /// Reassemble a jet collection: sum of coefficient * jet plus free part.
    pub fn assemble_jets(coeffs: &BTreeMap<JetIdx, Expr>, free: &Expr, func: &str) -> Expr {
        let mut acc = free.clone();
        for (JetIdx(idx), c) in coeffs {
            acc = acc.add(&c.mul(&Expr::jet(func, *idx)));
        }
        acc
    }

    fn check_polynomial(&self, in_family: &dyn Fn(&Atom) -> bool, what: &str) -> Result<()> {
        // family atoms may not appear in denominators or under radicals
        for f in self.den.keys() {
            if f.any_atom(in_family) {
                return Err(Error::NotPolynomial(format!("{} occurs in a denominator", what)));
            }
        }
        let deep = |a: &Atom| -> bool {
            match a {
                Atom::Rad(base, _) => base.any_atom(in_family),
                _ => false,
            }
        };
        if self.num.any_atom(&deep) || self.den.keys().any(|f| f.any_atom(&deep)) {
            return Err(Error::NotPolynomial(format!("{} occurs under a radical", what)));
        }
        Ok(())
    }

    /// Coefficient of a single jet atom in a linear collection; zero when
    /// absent.
    pub fn jet_coefficient(&self, func: &str, idx: Idx2) -> Result<Expr> {
        let (coeffs, _) = self.collect_jets(func)?;
        Ok(coeffs.get(&JetIdx(idx)).cloned().unwrap_or_else(Expr::zero))
    }
}

/// Helper: does the monomial mention any atom of the family?
#[allow(dead_code)]
fn mono_mentions(m: &Mono, pred: &dyn Fn(&Atom) -> bool) -> bool {
    m.0.keys().any(pred)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_collection() {
        // a*w_zzzz + b*w -> {(0,4): a, (0,0): b}
        let e = Expr::param("a")
            .mul(&Expr::jet("w", [0, 4]))
            .add(&Expr::param("b").mul(&Expr::func("w")));
        let (coeffs, free) = e.collect_jets("w").unwrap();
        assert!(free.is_zero());
        assert_eq!(coeffs.len(), 2);
        assert_eq!(coeffs[&JetIdx([0, 4])], Expr::param("a"));
        assert_eq!(coeffs[&JetIdx([0, 0])], Expr::param("b"));
    }

    #[test]
    fn roundtrip() {
        let e = Expr::param("a")
            .mul(&Expr::jet("w", [2, 0]))
            .add(&Expr::var("y").mul(&Expr::jet("w", [1, 1])))
            .add(&Expr::param("c"))
            .div(&Expr::param("d"))
            .unwrap();
        let (coeffs, free) = e.collect_jets("w").unwrap();
        let back = Expr::assemble_jets(&coeffs, &free, "w");
        assert_eq!(back, e);
    }

    #[test]
    fn rejects_nonpolynomial() {
        let w = Expr::func("w");
        let e = Expr::one().div(&w).unwrap();
        assert!(matches!(e.collect_jets("w"), Err(Error::NotPolynomial(_))));
        let e2 = w.mul(&w);
        assert!(matches!(e2.collect_jets("w"), Err(Error::NotLinear(_))));
    }

    #[test]
    fn applied_family() {
        // a*f''(S) + b*f(S) + c
        let s = Expr::func("S");
        let e = Expr::param("a")
            .mul(&Expr::apply("f", vec![2], vec![s.clone()]))
            .add(&Expr::param("b").mul(&Expr::apply("f", vec![0], vec![s.clone()])))
            .add(&Expr::param("c"));
        let (coeffs, free) = e.collect_applied("f").unwrap();
        assert_eq!(coeffs[&vec![2]], Expr::param("a"));
        assert_eq!(coeffs[&vec![0]], Expr::param("b"));
        assert_eq!(free, Expr::param("c"));
    }
}
