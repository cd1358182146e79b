//! Registered sign assumptions on parameter combinations.
//!
//! Radical rewrites that assert a sign (extracting a root from a perfect
//! power, splitting a composite radicand along a registered factor) consult
//! this set and are refused when the needed assumption is absent. Atomic
//! quantities (single parameters, jet indeterminates such as S_z) are treated
//! as positive by default; only multi-term combinations like k2 - k3*k4 need
//! to be registered.

use std::collections::BTreeSet;

use num::traits::Signed;

use super::canon::Expr;
use super::poly::Poly;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assumptions {
    /// Primitive, positive-lead polynomials asserted positive.
    positive: BTreeSet<Poly>,
}

impl Assumptions {
    pub fn new() -> Self {
        Assumptions::default()
    }

    /// Register positivity of an expression. Only the polynomial content is
    /// recorded: for a quotient, numerator and denominator factors are each
    /// registered (a quotient is positive only with consistent signs, and the
    /// canonical orientation takes all parts positive).
    pub fn assume_positive(&mut self, e: &Expr) {
        let (_, prim) = e.num().primitive();
        self.insert_poly(prim);
        for base in e.den().keys() {
            self.insert_poly(base.clone());
        }
    }

    fn insert_poly(&mut self, p: Poly) {
        if p.is_zero() || p.as_constant().is_some() {
            return;
        }
        self.positive.insert(p);
    }

    /// Is this primitive polynomial known positive? Constants and single
    /// monomials with positive coefficient count by the default-positive-atom
    /// convention.
    pub fn is_positive_poly(&self, p: &Poly) -> bool {
        if let Some(c) = p.as_constant() {
            return c.is_positive();
        }
        if let Some((_, c)) = p.as_single_term() {
            return c.is_positive();
        }
        if self.positive.contains(p) {
            return true;
        }
        // product of registered positives
        let mut rest = p.clone();
        let mut progressed = true;
        while progressed && rest.as_constant().is_none() {
            progressed = false;
            for g in &self.positive {
                if let Some(q) = rest.exact_div(g) {
                    rest = q;
                    progressed = true;
                    break;
                }
            }
        }
        matches!(rest.as_constant(), Some(c) if c.is_positive())
    }

    pub fn registered(&self) -> impl Iterator<Item = &Poly> {
        self.positive.iter()
    }

    /// Union in all assumptions registered on another set.
    pub fn merge(&mut self, other: &Assumptions) {
        for p in &other.positive {
            self.positive.insert(p.clone());
        }
    }
}
