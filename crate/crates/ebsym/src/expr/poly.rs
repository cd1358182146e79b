//! Expanded multivariate polynomials over the atom alphabet with exact
//! rational coefficients. This is the carrier of the canonical form: every
//! expression normalizes to a quotient of these.

use std::collections::BTreeMap;

use num::bigint::BigInt;
use num::integer::Integer;
use num::traits::{One, Signed, Zero};
use num::BigRational;

use super::canon::Expr;
use super::frame::Idx2;

/// An indeterminate of the polynomial ring.
///
/// Radical atoms carry their base polynomial; a `Rad(p, r)` stands for the
/// principal r-th root of `p` and satisfies `Rad(p, r)^r = p`, a relation the
/// monomial arithmetic applies eagerly so exponents of radical atoms always
/// stay below `r`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    /// Independent variable.
    Var(String),
    /// Constant parameter; zero derivative in every direction.
    Param(String),
    /// Jet indeterminate: Jet("R", [2, 0]) is R_yy in the (y, z) chart.
    Jet(String, Idx2),
    /// Applied function symbol with a derivative-order tag per argument slot:
    /// Apply("f", [2], [S]) is f''(S).
    Apply(String, Vec<u32>, Vec<Expr>),
    /// Principal r-th root of a primitive polynomial.
    Rad(Box<Poly>, u32),
}

impl Atom {
    pub fn var(name: &str) -> Self {
        Atom::Var(name.to_string())
    }
    pub fn param(name: &str) -> Self {
        Atom::Param(name.to_string())
    }
    pub fn jet(func: &str, idx: Idx2) -> Self {
        Atom::Jet(func.to_string(), idx)
    }
}

/// Power product of atoms; exponents are strictly positive.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default, Hash)]
pub struct Mono(pub BTreeMap<Atom, u32>);

impl Mono {
    pub fn one() -> Self {
        Mono(BTreeMap::new())
    }

    pub fn atom(a: Atom) -> Self {
        let mut m = BTreeMap::new();
        m.insert(a, 1);
        Mono(m)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u64 {
        self.0.values().map(|&e| e as u64).sum()
    }

    pub fn insert(&mut self, a: Atom, e: u32) {
        if e == 0 {
            return;
        }
        *self.0.entry(a).or_insert(0) += e;
    }

    /// Raw product without radical reduction.
    fn mul_raw(&self, other: &Mono) -> Mono {
        let mut m = self.clone();
        for (a, &e) in &other.0 {
            m.insert(a.clone(), e);
        }
        m
    }

    /// Does `self` divide `other` in the free commutative monoid?
    pub fn divides(&self, other: &Mono) -> bool {
        self.0
            .iter()
            .all(|(a, &e)| other.0.get(a).copied().unwrap_or(0) >= e)
    }

    /// Exact quotient; caller must ensure `self.divides(other)`.
    pub fn div_exact(other: &Mono, den: &Mono) -> Mono {
        let mut m = other.clone();
        for (a, &e) in &den.0 {
            let have = m.0.get_mut(a).expect("monomial division");
            *have -= e;
            if *have == 0 {
                m.0.remove(a);
            }
        }
        m
    }

    /// Componentwise gcd of exponent vectors.
    pub fn gcd(&self, other: &Mono) -> Mono {
        let mut m = BTreeMap::new();
        for (a, &e) in &self.0 {
            if let Some(&f) = other.0.get(a) {
                m.insert(a.clone(), e.min(f));
            }
        }
        Mono(m)
    }

    /// Lexicographic monomial order over the atom alphabet (exponent of the
    /// smallest atom compared first, missing atoms count as zero). Unlike the
    /// derived map order this is compatible with multiplication, which the
    /// division algorithm needs.
    pub fn cmp_lex(&self, other: &Mono) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        let mut ia = self.0.iter().peekable();
        let mut ib = other.0.iter().peekable();
        loop {
            match (ia.peek(), ib.peek()) {
                (None, None) => return Ordering::Equal,
                (Some(_), None) => return Ordering::Greater,
                (None, Some(_)) => return Ordering::Less,
                (Some((aa, ea)), Some((ab, eb))) => match aa.cmp(ab) {
                    Ordering::Less => return Ordering::Greater,
                    Ordering::Greater => return Ordering::Less,
                    Ordering::Equal => {
                        if ea != eb {
                            return ea.cmp(eb);
                        }
                        ia.next();
                        ib.next();
                    }
                },
            }
        }
    }

    /// Rewrite radical atoms with exponent >= root via Rad(p,r)^r = p. The
    /// result is a polynomial because the base may have several terms.
    pub fn reduce(self, coeff: BigRational) -> Poly {
        for (a, &e) in &self.0 {
            if let Atom::Rad(base, r) = a {
                if e >= *r {
                    let q = e / r;
                    let rem = e % r;
                    let mut rest = self.clone();
                    rest.0.remove(a);
                    if rem > 0 {
                        rest.0.insert(a.clone(), rem);
                    }
                    let base_pow = base.pow(q);
                    // rest may still contain further reducible radicals
                    let rest_poly = rest.reduce(coeff);
                    return rest_poly.mul(&base_pow);
                }
            }
        }
        let mut p = Poly::zero();
        if !coeff.is_zero() {
            p.0.insert(self, coeff);
        }
        p
    }
}

/// Sum of monomials with nonzero rational coefficients, kept in a canonical
/// expanded form (BTreeMap keyed by the monomial, lex order on atoms).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default, Hash)]
pub struct Poly(pub BTreeMap<Mono, BigRational>);

impl Poly {
    pub fn zero() -> Self {
        Poly(BTreeMap::new())
    }

    pub fn one() -> Self {
        Poly::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = Poly::zero();
        if !c.is_zero() {
            p.0.insert(Mono::one(), c);
        }
        p
    }

    pub fn atom(a: Atom) -> Self {
        let mut p = Poly::zero();
        p.0.insert(Mono::atom(a), BigRational::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.0.len() == 1
            && self
                .0
                .get(&Mono::one())
                .map(|c| c.is_one())
                .unwrap_or(false)
    }

    /// The constant value if the polynomial is constant.
    pub fn as_constant(&self) -> Option<BigRational> {
        if self.is_zero() {
            return Some(BigRational::zero());
        }
        if self.0.len() == 1 {
            if let Some(c) = self.0.get(&Mono::one()) {
                return Some(c.clone());
            }
        }
        None
    }

    /// The single (monomial, coefficient) pair if there is exactly one term.
    pub fn as_single_term(&self) -> Option<(&Mono, &BigRational)> {
        if self.0.len() == 1 {
            self.0.iter().next()
        } else {
            None
        }
    }

    pub fn add_term(&mut self, m: Mono, c: BigRational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.0.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let s = o.get().clone() + c;
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut p = self.clone();
        for (m, c) in &other.0 {
            p.add_term(m.clone(), c.clone());
        }
        p
    }

    pub fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|(m, c)| (m.clone(), -c.clone())).collect())
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &BigRational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly(
            self.0
                .iter()
                .map(|(m, k)| (m.clone(), k.clone() * c))
                .collect(),
        )
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut acc = Poly::zero();
        for (m1, c1) in &self.0 {
            for (m2, c2) in &other.0 {
                let raw = m1.mul_raw(m2);
                let reduced = raw.reduce(c1.clone() * c2.clone());
                acc = acc.add(&reduced);
            }
        }
        acc
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut acc = Poly::one();
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Leading term in the lex monomial order.
    pub fn leading(&self) -> Option<(&Mono, &BigRational)> {
        self.0
            .iter()
            .max_by(|(m1, _), (m2, _)| m1.cmp_lex(m2))
    }

    /// Content with the sign of the leading coefficient: dividing by it makes
    /// the polynomial integer-primitive with a positive leading coefficient.
    pub fn content(&self) -> BigRational {
        let mut num_gcd = BigInt::zero();
        let mut den_lcm = BigInt::one();
        for c in self.0.values() {
            num_gcd = num_gcd.gcd(&c.numer().abs());
            den_lcm = den_lcm.lcm(c.denom());
        }
        if num_gcd.is_zero() {
            return BigRational::one();
        }
        let mut content = BigRational::new(num_gcd, den_lcm);
        if let Some((_, lead)) = self.leading() {
            if lead.is_negative() {
                content = -content;
            }
        }
        content
    }

    /// Split into (content, primitive part); `self == content * primitive`.
    pub fn primitive(&self) -> (BigRational, Poly) {
        if self.is_zero() {
            return (BigRational::one(), Poly::zero());
        }
        let c = self.content();
        (c.clone(), self.scale(&(BigRational::one() / c)))
    }

    /// Gcd of all monomials: the largest monomial dividing every term.
    pub fn monomial_content(&self) -> Mono {
        let mut it = self.0.keys();
        let mut acc = match it.next() {
            Some(m) => m.clone(),
            None => return Mono::one(),
        };
        for m in it {
            acc = acc.gcd(m);
            if acc.is_one() {
                break;
            }
        }
        acc
    }

    /// Divide every term by `m`; caller must ensure divisibility.
    pub fn div_mono(&self, m: &Mono) -> Poly {
        Poly(
            self.0
                .iter()
                .map(|(k, c)| (Mono::div_exact(k, m), c.clone()))
                .collect(),
        )
    }

    /// Exact polynomial division: Some(q) with self == q * d, or None.
    ///
    /// Works term by term against the lex-leading term of `d`. Radical
    /// reduction during the multiply-back step keeps representations
    /// consistent because both operands are already reduced.
    pub fn exact_div(&self, d: &Poly) -> Option<Poly> {
        if d.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Poly::zero());
        }
        if let Some(c) = d.as_constant() {
            return Some(self.scale(&(BigRational::one() / c)));
        }
        let (dm, dc) = d.leading().unwrap();
        let mut rem = self.clone();
        let mut quot = Poly::zero();
        // Degree bound guards against non-terminating corner cases that the
        // radical relation could otherwise introduce.
        let mut steps = 0usize;
        let max_steps = 16 + self.0.len() * (d.0.len() + 4) * 64;
        while !rem.is_zero() {
            steps += 1;
            if steps > max_steps {
                return None;
            }
            let (rm, rc) = rem.leading().unwrap();
            if !dm.divides(rm) {
                return None;
            }
            let qm = Mono::div_exact(rm, dm);
            let qc = rc / dc;
            let qt = qm.reduce(qc);
            quot = quot.add(&qt);
            rem = rem.sub(&qt.mul(d));
        }
        Some(quot)
    }

    /// Is `self` an exact n-th power of a polynomial? Returns the root.
    pub fn nth_root(&self, n: u32) -> Option<Poly> {
        if n == 1 {
            return Some(self.clone());
        }
        if self.is_zero() {
            return Some(Poly::zero());
        }
        if let Some(c) = self.as_constant() {
            return rational_nth_root(&c, n).map(Poly::constant);
        }
        let (lm, lc) = self.leading().unwrap();
        // root of the leading monomial
        let mut rm = BTreeMap::new();
        for (a, &e) in &lm.0 {
            if e % n != 0 {
                return None;
            }
            rm.insert(a.clone(), e / n);
        }
        let rc = rational_nth_root(lc, n)?;
        let mut root = Poly::zero();
        root.0.insert(Mono(rm), rc);
        // Iteratively fix the next-highest discrepancy. The correction for a
        // remainder lead t is t / (n * lead(root)^(n-1)).
        let lead_pow = {
            let mut p = Poly::zero();
            let (m, c) = root.leading().unwrap();
            p.0.insert(m.clone(), c.clone());
            p.pow(n - 1)
                .scale(&BigRational::from_integer(BigInt::from(n)))
        };
        let mut guard = 0usize;
        loop {
            guard += 1;
            if guard > 4 * self.0.len() + 16 {
                return None;
            }
            let rem = self.sub(&root.pow(n));
            if rem.is_zero() {
                return Some(root);
            }
            let (rm, rc) = rem.leading().unwrap();
            let (pm, pc) = lead_pow.leading().unwrap();
            if !pm.divides(rm) {
                return None;
            }
            let tm = Mono::div_exact(rm, pm);
            let t = tm.reduce(rc / pc);
            if t.is_zero() {
                return None;
            }
            root = root.add(&t);
        }
    }

    /// All atoms appearing anywhere in the polynomial (not descending into
    /// radical bases or applied-function arguments).
    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.0.keys().flat_map(|m| m.0.keys())
    }

    pub fn any_atom(&self, pred: &dyn Fn(&Atom) -> bool) -> bool {
        self.0.keys().any(|m| m.0.keys().any(|a| pred(a)))
    }

    pub fn max_degree(&self) -> u64 {
        self.0.keys().map(|m| m.degree()).max().unwrap_or(0)
    }
}

/// Exact n-th root of a rational, if it exists. Negative values root exactly
/// only for odd n.
pub fn rational_nth_root(c: &BigRational, n: u32) -> Option<BigRational> {
    if c.is_zero() {
        return Some(BigRational::zero());
    }
    let negative = c.is_negative();
    if negative && n % 2 == 0 {
        return None;
    }
    let a = c.numer().abs();
    let b = c.denom().clone();
    let ra = num::integer::Roots::nth_root(&a, n);
    let rb = num::integer::Roots::nth_root(&b, n);
    if num::pow::pow(ra.clone(), n as usize) == a && num::pow::pow(rb.clone(), n as usize) == b {
        let mut r = BigRational::new(ra, rb);
        if negative {
            r = -r;
        }
        Some(r)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Poly {
        Poly::atom(Atom::param("a"))
    }
    fn y() -> Poly {
        Poly::atom(Atom::param("b"))
    }
    fn int(n: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(n))
    }

    #[test]
    fn expand_and_divide() {
        // (a + b)^2 / (a + b) == a + b
        let s = x().add(&y());
        let sq = s.pow(2);
        assert_eq!(sq.0.len(), 3);
        let q = sq.exact_div(&s).unwrap();
        assert_eq!(q, s);
        // (a^2 - b^2) / (a - b) == a + b
        let diff = x().pow(2).sub(&y().pow(2));
        let d = x().sub(&y());
        assert_eq!(diff.exact_div(&d).unwrap(), s);
        // non-divisible
        assert!(x().add(&Poly::one()).exact_div(&y()).is_none());
    }

    #[test]
    fn radical_reduction() {
        // sqrt(a)^2 == a, sqrt(a)^3 == a*sqrt(a)
        let r = Atom::Rad(Box::new(x()), 2);
        let sq = Poly::atom(r.clone()).mul(&Poly::atom(r.clone()));
        assert_eq!(sq, x());
        let cube = sq.mul(&Poly::atom(r.clone()));
        let mut expect = Mono::atom(r);
        expect.insert(Atom::param("a"), 1);
        assert_eq!(cube.0.keys().next().unwrap(), &expect);
    }

    #[test]
    fn content_and_primitive() {
        // -4a - 8b: content -4, primitive a + 2b
        let p = x().scale(&int(-4)).add(&y().scale(&int(-8)));
        let (c, prim) = p.primitive();
        assert_eq!(c, int(-4));
        assert_eq!(prim, x().add(&y().scale(&int(2))));
        assert_eq!(prim.scale(&c), p);
    }

    #[test]
    fn perfect_square_root() {
        // (a + 2b)^2
        let base = x().add(&y().scale(&int(2)));
        let sq = base.pow(2);
        assert_eq!(sq.nth_root(2).unwrap(), base);
        assert!(sq.add(&Poly::one()).nth_root(2).is_none());
        assert_eq!(
            rational_nth_root(&BigRational::new(BigInt::from(9), BigInt::from(4)), 2),
            Some(BigRational::new(BigInt::from(3), BigInt::from(2)))
        );
    }
}
