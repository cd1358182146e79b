//! Canonical expressions: a quotient of expanded polynomials over the atom
//! alphabet, with the denominator kept as a factor list. Every constructor
//! and operation returns a normalized value, so `Expr` values are canonical
//! by construction and normalization is idempotent for free.
//!
//! Equality of canonical structure implies mathematical equality. The
//! converse holds whenever both operands were produced through the same
//! division history (the denominator factor bases then agree); the universal
//! decision procedure is `a.equivalent(b)`, i.e. `(a - b).is_zero()`, which
//! cross-multiplies and is insensitive to how denominators were factored.

use std::collections::BTreeMap;

use num::bigint::BigInt;
use num::traits::{One, Signed, Zero};
use num::BigRational;

use crate::error::{Error, Result};

use super::assume::Assumptions;
use super::frame::Idx2;
use super::poly::{rational_nth_root, Atom, Mono, Poly};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Expr {
    pub(crate) num: Poly,
    /// Denominator factors: primitive, positive-lead, non-constant
    /// polynomials with positive integer exponents.
    pub(crate) den: BTreeMap<Poly, u32>,
}

pub fn big(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl Expr {
    // ---- constructors ----

    pub fn zero() -> Self {
        Expr::default()
    }

    pub fn one() -> Self {
        Expr::from_poly(Poly::one())
    }

    pub fn int(n: i64) -> Self {
        Expr::from_poly(Poly::constant(big(n)))
    }

    pub fn rat(n: i64, d: i64) -> Self {
        assert!(d != 0);
        Expr::from_poly(Poly::constant(BigRational::new(BigInt::from(n), BigInt::from(d))))
    }

    pub fn from_rational(c: BigRational) -> Self {
        Expr::from_poly(Poly::constant(c))
    }

    pub fn from_poly(p: Poly) -> Self {
        Expr { num: p, den: BTreeMap::new() }
    }

    pub fn from_atom(a: Atom) -> Self {
        Expr::from_poly(Poly::atom(a))
    }

    pub fn var(name: &str) -> Self {
        Expr::from_atom(Atom::var(name))
    }

    pub fn param(name: &str) -> Self {
        Expr::from_atom(Atom::param(name))
    }

    pub fn jet(func: &str, idx: Idx2) -> Self {
        Expr::from_atom(Atom::jet(func, idx))
    }

    /// An unknown function applied to jet-function value, e.g. `func("w")`
    /// is the zeroth jet w itself.
    pub fn func(name: &str) -> Self {
        Expr::jet(name, [0, 0])
    }

    /// Applied function symbol with derivative tag, e.g. f''(S).
    pub fn apply(name: &str, dord: Vec<u32>, args: Vec<Expr>) -> Self {
        Expr::from_atom(Atom::Apply(name.to_string(), dord, args))
    }

    // ---- accessors ----

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &BTreeMap<Poly, u32> {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.den.is_empty() && self.num.is_one()
    }

    /// Constant rational value, if the expression is constant.
    pub fn as_rational(&self) -> Option<BigRational> {
        if self.den.is_empty() {
            self.num.as_constant()
        } else if self.num.is_zero() {
            Some(BigRational::zero())
        } else {
            None
        }
    }

    /// True when no atom in the expression satisfies `pred` (denominator
    /// factors included).
    pub fn free_of(&self, pred: &dyn Fn(&Atom) -> bool) -> bool {
        !self.num.any_atom(pred) && !self.den.keys().any(|f| f.any_atom(pred))
    }

    // ---- normalization plumbing ----

    pub(crate) fn normalized(num: Poly, den: BTreeMap<Poly, u32>) -> Expr {
        let mut e = Expr { num, den };
        e.fix();
        e
    }

    fn fix(&mut self) {
        if self.num.is_zero() {
            self.den.clear();
            return;
        }
        self.cancel();
    }

    fn cancel(&mut self) {
        let bases: Vec<Poly> = self.den.keys().cloned().collect();
        for base in bases {
            loop {
                let exp = match self.den.get(&base) {
                    Some(&e) if e > 0 => e,
                    _ => break,
                };
                match self.num.exact_div(&base) {
                    Some(q) => {
                        self.num = q;
                        if exp == 1 {
                            self.den.remove(&base);
                        } else {
                            self.den.insert(base.clone(), exp - 1);
                        }
                    }
                    None => break,
                }
                if self.num.is_zero() {
                    self.den.clear();
                    return;
                }
            }
        }
    }

    /// Divide by `base^exp`, decomposing the base into canonical factors.
    fn push_den(&mut self, base: &Poly, exp: u32) {
        if exp == 0 {
            return;
        }
        debug_assert!(!base.is_zero());
        let (content, prim) = base.primitive();
        // constant part
        let cpow = num::pow::pow(content, exp as usize);
        self.num = self.num.scale(&(BigRational::one() / cpow));
        if prim.is_one() {
            return;
        }
        // split off the monomial content atom by atom
        let mc = prim.monomial_content();
        let rest = prim.div_mono(&mc);
        for (a, &e) in &mc.0 {
            self.push_den_atom(a, e * exp);
        }
        if !rest.is_one() {
            *self.den.entry(rest).or_insert(0) += exp;
        }
    }

    fn push_den_atom(&mut self, a: &Atom, k: u32) {
        if k == 0 {
            return;
        }
        match a {
            Atom::Rad(b, r) => {
                // 1/rad^k: clear the radical from the denominator using
                // rad^r = base.
                let s = k % r;
                let whole = k / r;
                if s > 0 {
                    // rad^(r - s) in the numerator, one extra base downstairs
                    let mut m = Mono::one();
                    m.insert(a.clone(), r - s);
                    let liftp = m.reduce(BigRational::one());
                    self.num = self.num.mul(&liftp);
                    self.push_den(&b.clone(), whole + 1);
                } else {
                    self.push_den(&b.clone(), whole);
                }
            }
            _ => {
                *self.den.entry(Poly::atom(a.clone())).or_insert(0) += k;
            }
        }
    }

    // ---- arithmetic ----

    pub fn add(&self, other: &Expr) -> Expr {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        // common denominator: factorwise max
        let mut den: BTreeMap<Poly, u32> = self.den.clone();
        for (f, &e) in &other.den {
            let cur = den.entry(f.clone()).or_insert(0);
            *cur = (*cur).max(e);
        }
        let mut lhs = self.num.clone();
        let mut rhs = other.num.clone();
        for (f, &e) in &den {
            let es = self.den.get(f).copied().unwrap_or(0);
            let eo = other.den.get(f).copied().unwrap_or(0);
            if e > es {
                lhs = lhs.mul(&f.pow(e - es));
            }
            if e > eo {
                rhs = rhs.mul(&f.pow(e - eo));
            }
        }
        let mut r = Expr { num: lhs.add(&rhs), den };
        r.fix();
        r
    }

    pub fn neg(&self) -> Expr {
        Expr { num: self.num.neg(), den: self.den.clone() }
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        if self.is_zero() || other.is_zero() {
            return Expr::zero();
        }
        let mut den = self.den.clone();
        for (f, &e) in &other.den {
            *den.entry(f.clone()).or_insert(0) += e;
        }
        let mut r = Expr { num: self.num.mul(&other.num), den };
        r.fix();
        r
    }

    pub fn scale(&self, c: &BigRational) -> Expr {
        let mut r = Expr { num: self.num.scale(c), den: self.den.clone() };
        r.fix();
        r
    }

    pub fn inverse(&self) -> Result<Expr> {
        if self.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let mut num = Poly::one();
        for (f, &e) in &self.den {
            num = num.mul(&f.pow(e));
        }
        let mut r = Expr { num, den: BTreeMap::new() };
        r.push_den(&self.num, 1);
        r.fix();
        Ok(r)
    }

    pub fn div(&self, other: &Expr) -> Result<Expr> {
        Ok(self.mul(&other.inverse()?))
    }

    pub fn powi(&self, n: i64) -> Result<Expr> {
        if n == 0 {
            if self.is_zero() {
                return Err(Error::DivisionByZero);
            }
            return Ok(Expr::one());
        }
        let base = if n < 0 { self.inverse()? } else { self.clone() };
        let k = n.unsigned_abs() as u32;
        let mut den = BTreeMap::new();
        for (f, &e) in &base.den {
            den.insert(f.clone(), e * k);
        }
        let mut r = Expr { num: base.num.pow(k), den };
        r.fix();
        Ok(r)
    }

    /// Raise to an exact rational power. Non-integer exponents create or
    /// rewrite radicals and may require registered sign assumptions:
    /// extracting a root from a perfect power or splitting a radicand along a
    /// registered factor asserts positivity of the extracted part.
    pub fn powq(&self, q: &BigRational, asm: &Assumptions) -> Result<Expr> {
        if q.is_integer() {
            let n = q
                .to_integer()
                .try_into()
                .map_err(|_| Error::DomainError("exponent too large".into()))?;
            return self.powi(n);
        }
        if self.is_zero() {
            if q.is_positive() {
                return Ok(Expr::zero());
            }
            return Err(Error::DivisionByZero);
        }
        let (content, prim) = self.num.primitive();
        let mut acc = constant_pow_rational(&content, q)?;
        // monomial content of the primitive numerator
        let mc = prim.monomial_content();
        let rest = prim.div_mono(&mc);
        for (a, &e) in &mc.0 {
            let ex = q * big(e as i64);
            acc = acc.mul(&atom_pow_rational(a, &ex, asm)?);
        }
        if !rest.is_one() {
            acc = acc.mul(&poly_pow_rational(&rest, q, asm)?);
        }
        for (f, &e) in &self.den {
            let ex = -q * big(e as i64);
            acc = acc.mul(&poly_pow_rational(f, &ex, asm)?);
        }
        Ok(acc)
    }

    pub fn sqrt(&self, asm: &Assumptions) -> Result<Expr> {
        self.powq(&BigRational::new(BigInt::one(), BigInt::from(2)), asm)
    }

    pub fn is_zero_expr(&self) -> bool {
        self.is_zero()
    }

    /// Mathematical equality: difference normalizes to zero.
    pub fn equivalent(&self, other: &Expr) -> bool {
        self.sub(other).is_zero()
    }
}

/// c^q for an exact rational c. Exact roots are taken when they exist;
/// otherwise the root-free part stays under a constant-base radical.
fn constant_pow_rational(c: &BigRational, q: &BigRational) -> Result<Expr> {
    if c.is_one() {
        return Ok(Expr::one());
    }
    let r: u32 = q
        .denom()
        .try_into()
        .map_err(|_| Error::DomainError("radical index too large".into()))?;
    let p: i64 = q
        .numer()
        .try_into()
        .map_err(|_| Error::DomainError("exponent too large".into()))?;
    let (sign, mag) = if c.is_negative() {
        if r % 2 == 0 {
            return Err(Error::NegativeRadicand(format!("{}^({})", c, q)));
        }
        (-BigRational::one(), -c.clone())
    } else {
        (BigRational::one(), c.clone())
    };
    let signed = |e: Expr| -> Result<Expr> {
        if sign.is_negative() && p % 2 != 0 {
            Ok(e.neg())
        } else {
            Ok(e)
        }
    };
    if let Some(root) = rational_nth_root(&mag, r) {
        let mut v = BigRational::one();
        let k = p.unsigned_abs() as usize;
        v = v * num::pow::pow(root, k);
        if p < 0 {
            v = BigRational::one() / v;
        }
        return signed(Expr::from_rational(v));
    }
    // keep |c|^(1/r) as a radical with a constant base
    let atom = Atom::Rad(Box::new(Poly::constant(mag)), r);
    signed(Expr::from_atom(atom).powi(p)?)
}

/// atom^q for a rational q = a + s/r with 0 <= s < r.
fn atom_pow_rational(a: &Atom, q: &BigRational, asm: &Assumptions) -> Result<Expr> {
    if let Atom::Rad(base, r0) = a {
        // merge exponents on the shared base
        let inner = q / big(*r0 as i64);
        return poly_pow_rational(base, &inner, asm);
    }
    let (whole, s, r) = split_exponent(q)?;
    let mut acc = Expr::from_atom(a.clone()).powi(whole)?;
    if s > 0 {
        let rad = Atom::Rad(Box::new(Poly::atom(a.clone())), r);
        acc = acc.mul(&Expr::from_atom(rad).powi(s as i64)?);
    }
    Ok(acc)
}

/// p^q for a primitive positive-lead polynomial p.
fn poly_pow_rational(p: &Poly, q: &BigRational, asm: &Assumptions) -> Result<Expr> {
    if q.is_integer() {
        let n: i64 = q
            .to_integer()
            .try_into()
            .map_err(|_| Error::DomainError("exponent too large".into()))?;
        return Expr::from_poly(p.clone()).powi(n);
    }
    if let Some((m, c)) = p.as_single_term() {
        debug_assert!(c.is_one());
        let mut acc = Expr::one();
        for (a, &e) in &m.0 {
            acc = acc.mul(&atom_pow_rational(a, &(q * big(e as i64)), asm)?);
        }
        return Ok(acc);
    }
    let (whole, s, r) = split_exponent(q)?;
    let mut acc = Expr::from_poly(p.clone()).powi(whole)?;
    // fractional part p^(s/r)
    if let Some(root) = p.nth_root(r) {
        if !asm.is_positive_poly(&root) && !asm.is_positive_poly(p) {
            return Err(Error::AssumptionMissing(format!(
                "positivity needed to extract a {}-th root from a perfect power",
                r
            )));
        }
        return Ok(acc.mul(&Expr::from_poly(root).powi(s as i64)?));
    }
    // split along registered positive factors
    let mut rest = p.clone();
    let mut pieces: Vec<Poly> = Vec::new();
    let mut progressed = true;
    while progressed {
        progressed = false;
        for g in asm.registered() {
            if g == &rest {
                continue;
            }
            if let Some(qq) = rest.exact_div(g) {
                pieces.push(g.clone());
                rest = qq;
                progressed = true;
                break;
            }
        }
    }
    let frac = BigRational::new(BigInt::from(s), BigInt::from(r));
    for g in pieces {
        acc = acc.mul(&poly_pow_rational(&g, &frac, asm)?);
    }
    let (content, rest) = rest.primitive();
    acc = acc.mul(&constant_pow_rational(&content, &frac)?);
    if rest.is_one() {
        return Ok(acc);
    }
    if let Some((m, _)) = rest.as_single_term() {
        for (a, &e) in &m.0 {
            acc = acc.mul(&atom_pow_rational(a, &(&frac * big(e as i64)), asm)?);
        }
        return Ok(acc);
    }
    // leftover multi-term radicand: principal root, taken positive by the
    // default orientation
    let rad = Atom::Rad(Box::new(rest), r);
    Ok(acc.mul(&Expr::from_atom(rad).powi(s as i64)?))
}

/// q = whole + s/r with 0 <= s < r.
fn split_exponent(q: &BigRational) -> Result<(i64, u32, u32)> {
    let fl = q.floor();
    let whole: i64 = fl
        .to_integer()
        .try_into()
        .map_err(|_| Error::DomainError("exponent too large".into()))?;
    let frac = q - fl;
    let r: u32 = frac
        .denom()
        .try_into()
        .map_err(|_| Error::DomainError("radical index too large".into()))?;
    let s: u32 = frac
        .numer()
        .try_into()
        .map_err(|_| Error::DomainError("radical index too large".into()))?;
    Ok((whole, s, r))
}

impl std::ops::Add for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        Expr::add(self, rhs)
    }
}

impl std::ops::Sub for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl std::ops::Mul for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        Expr::mul(self, rhs)
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a() -> Expr {
        Expr::param("a")
    }
    fn b() -> Expr {
        Expr::param("b")
    }

    #[test]
    fn ring_identity() {
        // (a+b)^2 - a^2 - 2ab - b^2 == 0
        let s = a().add(&b()).powi(2).unwrap();
        let expand = a()
            .powi(2)
            .unwrap()
            .add(&a().mul(&b()).scale(&big(2)))
            .add(&b().powi(2).unwrap());
        assert!(s.sub(&expand).is_zero());
    }

    #[test]
    fn quotient_cancellation() {
        // (a^2 - b^2)/(a - b) == a + b
        let num = a().powi(2).unwrap().sub(&b().powi(2).unwrap());
        let q = num.div(&a().sub(&b())).unwrap();
        assert_eq!(q, a().add(&b()));
        // a/b * b == a
        let r = a().div(&b()).unwrap().mul(&b());
        assert_eq!(r, a());
    }

    #[test]
    fn add_then_subtract_is_structural_identity() {
        let e1 = a().div(&b().add(&Expr::one())).unwrap();
        let e2 = b().div(&a().mul(&a())).unwrap();
        let r = e1.add(&e2).sub(&e2);
        assert_eq!(r, e1);
    }

    #[test]
    fn sqrt_squares() {
        let asm = Assumptions::new();
        // sqrt(a)^2 == a (radical reduction, atom treated positive)
        let s = a().sqrt(&asm).unwrap();
        assert_eq!(s.mul(&s), a());
        // sqrt(4/9) == 2/3
        assert_eq!(Expr::rat(4, 9).sqrt(&asm).unwrap(), Expr::rat(2, 3));
        // sqrt(a^2*b) == a*sqrt(b)
        let e = a().powi(2).unwrap().mul(&b());
        assert_eq!(e.sqrt(&asm).unwrap(), a().mul(&b().sqrt(&asm).unwrap()));
    }

    #[test]
    fn perfect_power_extraction_needs_assumption() {
        let base = a().add(&Expr::one()); // a + 1
        let sq = base.powi(2).unwrap();
        let empty = Assumptions::new();
        assert!(matches!(
            sq.sqrt(&empty),
            Err(Error::AssumptionMissing(_))
        ));
        let mut asm = Assumptions::new();
        asm.assume_positive(&base);
        assert_eq!(sq.sqrt(&asm).unwrap(), base);
    }

    #[test]
    fn composite_radicand_splits_along_registered_factors() {
        let mut asm = Assumptions::new();
        let f1 = a().add(&Expr::one());
        let f2 = b().add(&Expr::int(2));
        asm.assume_positive(&f1);
        asm.assume_positive(&f2);
        let prod = f1.mul(&f2);
        let s = prod.sqrt(&asm).unwrap();
        let expect = f1.sqrt(&asm).unwrap().mul(&f2.sqrt(&asm).unwrap());
        assert_eq!(s, expect);
    }

    #[test]
    fn negative_even_radicand_rejected() {
        let asm = Assumptions::new();
        assert!(matches!(
            Expr::int(-4).sqrt(&asm),
            Err(Error::NegativeRadicand(_))
        ));
    }

    #[test]
    fn inverse_of_radical_monomial() {
        let asm = Assumptions::new();
        // 1/sqrt(a) == sqrt(a)/a
        let s = a().sqrt(&asm).unwrap();
        let inv = s.inverse().unwrap();
        assert_eq!(inv.mul(&s), Expr::one());
        assert_eq!(inv, s.div(&a()).unwrap());
        // and via powq with exponent -1/2
        let direct = a()
            .powq(&BigRational::new(BigInt::from(-1), BigInt::from(2)), &asm)
            .unwrap();
        assert_eq!(direct, inv);
    }
}
