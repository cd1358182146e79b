//! Application of point transformations to the beam equation and detection
//! of beam form in the result.

use std::collections::BTreeMap;

use num::traits::Zero;
use num::BigRational;

use crate::error::{Error, Result};
use crate::expr::poly::{Atom, Poly};
use crate::expr::{Assumptions, Expr, Frame, Idx2, JetIdx};
use crate::jet::solve_operator_system;
use crate::linsolve;

/// Coefficient flavor of the source equation:
/// classic has f = f(x), m = m(x); generalized has f = f(t,x), m = m(t,x).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    Classic,
    Generalized,
}

/// The source equation d^2/dx^2 (f u_xx) + m u_tt = 0 with symbolic
/// coefficient functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EbEquation {
    pub flavor: Flavor,
}

impl EbEquation {
    pub fn classic() -> Self {
        EbEquation {
            flavor: Flavor::Classic,
        }
    }

    pub fn generalized() -> Self {
        EbEquation {
            flavor: Flavor::Generalized,
        }
    }

    /// The coefficient symbol `name` evaluated at the transformed point:
    /// f(S) in the classic flavor, f(R,S) in the generalized one.
    pub fn coeff_at(&self, name: &str, r: &Expr, s: &Expr) -> Expr {
        match self.flavor {
            Flavor::Classic => Expr::apply(name, vec![0], vec![s.clone()]),
            Flavor::Generalized => Expr::apply(name, vec![0, 0], vec![r.clone(), s.clone()]),
        }
    }
}

/// A point transformation t = R(y,z), x = S(y,z), u = L(y,z) w + J(y,z).
#[derive(Debug, Clone, PartialEq)]
pub struct PointTransformation {
    pub r: Expr,
    pub s: Expr,
    pub l: Expr,
    pub j: Expr,
}

impl PointTransformation {
    pub fn new(r: Expr, s: Expr, l: Expr, j: Expr) -> Self {
        PointTransformation { r, s, l, j }
    }

    /// Invertibility: the Jacobian of (R, S) and the factor L must not
    /// vanish identically.
    pub fn validate(&self, frame: &Frame) -> Result<()> {
        let ry = self.r.total_derivative(0, frame);
        let rz = self.r.total_derivative(1, frame);
        let sy = self.s.total_derivative(0, frame);
        let sz = self.s.total_derivative(1, frame);
        let jac = ry.mul(&sz).sub(&rz.mul(&sy));
        if jac.is_zero() {
            return Err(Error::SingularJacobian);
        }
        if self.l.is_zero() {
            return Err(Error::NonInvertible("L vanishes identically".into()));
        }
        Ok(())
    }
}

/// A PDE linear in the jets of w: coefficient per multi-index plus the
/// w-free inhomogeneous part.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPde {
    pub coeffs: BTreeMap<JetIdx, Expr>,
    pub inhom: Expr,
}

impl LinearPde {
    pub fn coeff(&self, idx: Idx2) -> Expr {
        self.coeffs
            .get(&JetIdx(idx))
            .cloned()
            .unwrap_or_else(Expr::zero)
    }

    /// Sum of coefficient times jet plus the inhomogeneous part.
    pub fn residual(&self) -> Expr {
        Expr::assemble_jets(&self.coeffs, &self.inhom, "w")
    }

    /// Drop coefficients that are identically zero.
    pub fn pruned(mut self) -> Self {
        self.coeffs.retain(|_, c| !c.is_zero());
        self
    }
}

/// Substitute u = Lw + J, t = R, x = S into the source equation and collect
/// the result as a linear PDE in w over the target chart.
pub fn transform_pde(eq: &EbEquation, t: &PointTransformation, frame: &Frame) -> Result<LinearPde> {
    t.validate(frame)?;
    let (dt, dx) = solve_operator_system(&t.r, &t.s, frame)?;
    let u = t.l.mul(&Expr::func("w")).add(&t.j);
    let f_at = eq.coeff_at("f", &t.r, &t.s);
    let m_at = eq.coeff_at("m", &t.r, &t.s);
    let uxx = dx.power(&u, 2, frame);
    let flex = dx.power(&f_at.mul(&uxx), 2, frame);
    let inertia = m_at.mul(&dt.power(&u, 2, frame));
    let residual = flex.add(&inertia);
    let (coeffs, inhom) = residual.collect_jets("w")?;
    Ok(LinearPde { coeffs, inhom }.pruned())
}

/// The w-free part of the transformed equation: what the source operator
/// does to u = J alone.
pub fn constant_component(
    eq: &EbEquation,
    t: &PointTransformation,
    frame: &Frame,
) -> Result<Expr> {
    let (dt, dx) = solve_operator_system(&t.r, &t.s, frame)?;
    let f_at = eq.coeff_at("f", &t.r, &t.s);
    let m_at = eq.coeff_at("m", &t.r, &t.s);
    let jxx = dx.power(&t.j, 2, frame);
    Ok(dx
        .power(&f_at.mul(&jxx), 2, frame)
        .add(&m_at.mul(&dt.power(&t.j, 2, frame))))
}

/// Outcome of beam-form detection.
#[derive(Debug, Clone, PartialEq)]
pub enum EbForm {
    /// pde == mu * (F w_zzzz + 2 F_z w_zzz + F_zz w_zz + M w_yy), all parts
    /// explicit.
    Explicit { f: Expr, m: Expr, mu: Expr },
    /// The divergence-form consistency conditions hold but no explicit
    /// rational gauge factor mu was reconstructed.
    Consistent,
    /// Not of beam form.
    No,
}

/// Decide whether a homogeneous linear PDE is a multiple of the beam form
/// d^2/dz^2 (F w_zz) + M w_yy. The gauge factor mu(y,z) is made explicit
/// whenever it is a rational monomial in the coefficient denominators.
pub fn match_eb_form(pde: &LinearPde, frame: &Frame) -> Result<EbForm> {
    if !pde.inhom.is_zero() {
        return Ok(EbForm::No);
    }
    let c4 = pde.coeff([0, 4]);
    let c3 = pde.coeff([0, 3]);
    let c2 = pde.coeff([0, 2]);
    let cyy = pde.coeff([2, 0]);
    if c4.is_zero() || cyy.is_zero() {
        return Ok(EbForm::No);
    }
    for (JetIdx(idx), c) in &pde.coeffs {
        let expected = matches!(idx, [0, 4] | [0, 3] | [0, 2] | [2, 0]);
        if !expected && !c.is_zero() {
            return Ok(EbForm::No);
        }
    }

    // mu = 1 gauge: plain divergence form
    let c4z = c4.total_derivative(1, frame);
    if c3.equivalent(&c4z.scale(&crate::expr::big(2)))
        && c2.equivalent(&c4z.total_derivative(1, frame))
    {
        return Ok(EbForm::Explicit {
            f: c4,
            m: cyy,
            mu: Expr::one(),
        });
    }

    // general gauge: with F = c4/mu the two shape conditions read
    //   c3 = 2 D_z c4 - 2 c4 g,   c2 = D_z(c4_z - c4 g) - (c4_z - c4 g) g
    // where g = mu_z/mu. The first determines g by exact division; the
    // second is the mu-free consistency condition.
    let g = c4z.scale(&crate::expr::big(2)).sub(&c3).div(&c4.scale(&crate::expr::big(2)))?;
    let v1 = c4z.sub(&c4.mul(&g));
    let c2_expected = v1.total_derivative(1, frame).sub(&v1.mul(&g));
    if !c2.equivalent(&c2_expected) {
        return Ok(EbForm::No);
    }
    match log_derivative_antiderivative(&g, frame) {
        Some(mu) => {
            let f = c4.div(&mu)?;
            let m = cyy.div(&mu)?;
            Ok(EbForm::Explicit { f, m, mu })
        }
        None => Ok(EbForm::Consistent),
    }
}

/// Verification mode: check pde == mu * (F w_zzzz + 2 F_z w_zzz + F_zz w_zz
/// + M w_yy) for the given candidate F, M; returns mu on success. All checks
/// are cross-multiplied so no division by the candidates is needed.
pub fn verify_eb_form(
    pde: &LinearPde,
    f: &Expr,
    m: &Expr,
    frame: &Frame,
) -> Result<Option<Expr>> {
    if !pde.inhom.is_zero() || f.is_zero() {
        return Ok(None);
    }
    let c4 = pde.coeff([0, 4]);
    let c3 = pde.coeff([0, 3]);
    let c2 = pde.coeff([0, 2]);
    let cyy = pde.coeff([2, 0]);
    for (JetIdx(idx), c) in &pde.coeffs {
        let expected = matches!(idx, [0, 4] | [0, 3] | [0, 2] | [2, 0]);
        if !expected && !c.is_zero() {
            return Ok(None);
        }
    }
    let fz = f.total_derivative(1, frame);
    let fzz = fz.total_derivative(1, frame);
    let ok = c3.mul(f).equivalent(&fz.scale(&crate::expr::big(2)).mul(&c4))
        && c2.mul(f).equivalent(&fzz.mul(&c4))
        && cyy.mul(f).equivalent(&m.mul(&c4));
    if !ok {
        return Ok(None);
    }
    Ok(Some(c4.div(f)?))
}

/// Find a rational expression mu with D_z(mu)/mu == g, searching products of
/// integer powers of the denominator factors of g. Returns None when no such
/// product exists.
fn log_derivative_antiderivative(g: &Expr, frame: &Frame) -> Option<Expr> {
    if g.is_zero() {
        return Some(Expr::one());
    }
    // candidate factors p_i: denominator factors of g, as expressions
    let cands: Vec<Expr> = g
        .den()
        .keys()
        .map(|p| Expr::normalized(p.clone(), BTreeMap::new()))
        .collect();
    if cands.is_empty() {
        return None;
    }
    // solve g = sum n_i D_z(p_i)/p_i for rational n_i by matching monomials
    let names: Vec<String> = (0..cands.len()).map(|i| format!("_n{}", i)).collect();
    let mut resid = g.neg();
    for (p, n) in cands.iter().zip(&names) {
        let term = Expr::param(n).mul(&p.total_derivative(1, frame).div(p).ok()?);
        resid = resid.add(&term);
    }
    let ns = solve_constant_params(&resid, &names)?;
    let mut mu = Expr::one();
    for (p, n) in cands.iter().zip(&ns) {
        if !n.is_integer() {
            return None;
        }
        let k: i64 = n.to_integer().try_into().ok()?;
        mu = mu.mul(&p.powi(k).ok()?);
    }
    // confirm, since the monomial matching is only necessary
    let check = mu.total_derivative(1, frame).div(&mu).ok()?;
    if check.equivalent(g) {
        Some(mu)
    } else {
        None
    }
}

/// Solve `e == 0` for constant parameters appearing linearly, by matching
/// coefficients of every monomial in the remaining atoms. Returns None when
/// the system is inconsistent or underdetermined.
pub fn solve_constant_params(e: &Expr, params: &[String]) -> Option<Vec<BigRational>> {
    // group numerator monomials by their non-parameter part
    let is_param = |a: &Atom| matches!(a, Atom::Param(p) if params.iter().any(|q| q == p));
    let mut rows: BTreeMap<crate::expr::poly::Mono, (Vec<BigRational>, BigRational)> =
        BTreeMap::new();
    for (mono, c) in &e.num().0 {
        let mut rest = mono.clone();
        let mut which: Option<usize> = None;
        for (a, &exp) in &mono.0 {
            if is_param(a) {
                if which.is_some() || exp != 1 {
                    return None;
                }
                let name = match a {
                    Atom::Param(p) => p,
                    _ => unreachable!(),
                };
                which = Some(params.iter().position(|q| q == name).unwrap());
                rest.0.remove(a);
            }
        }
        let entry = rows
            .entry(rest)
            .or_insert_with(|| (vec![BigRational::zero(); params.len()], BigRational::zero()));
        match which {
            Some(i) => entry.0[i] += c,
            None => entry.1 += c,
        }
    }
    // exact least-structure solve: rref over Expr constants via linsolve
    let a: Vec<Vec<Expr>> = rows
        .values()
        .map(|(coeffs, _)| coeffs.iter().map(|c| Expr::from_rational(c.clone())).collect())
        .collect();
    let b: Vec<Expr> = rows
        .values()
        .map(|(_, free)| Expr::from_rational(-free.clone()))
        .collect();
    let mut aug: Vec<Vec<Expr>> = a
        .iter()
        .zip(&b)
        .map(|(row, rhs)| {
            let mut v = row.clone();
            v.push(rhs.clone());
            v
        })
        .collect();
    let pivots = linsolve::rref(&mut aug, params.len()).ok()?;
    if pivots.len() != params.len() {
        return None;
    }
    // inconsistency: a zero row with nonzero rhs
    for row in aug.iter().skip(pivots.len()) {
        if row[..params.len()].iter().all(|e| e.is_zero()) && !row[params.len()].is_zero() {
            return None;
        }
    }
    let mut out = vec![BigRational::zero(); params.len()];
    for (ri, &pc) in pivots.iter().enumerate() {
        out[pc] = aug[ri][params.len()].as_rational()?;
    }
    Some(out)
}

/// Replace every applied occurrence of `name` by the concrete `body`:
/// differentiate the body per the derivative tag (formals name the variables
/// standing for the argument slots, in order) and evaluate at the call
/// arguments.
pub fn instantiate_applied(
    e: &Expr,
    name: &str,
    formals: &[&str],
    body: &Expr,
    frame: &Frame,
    asm: &Assumptions,
) -> Result<Expr> {
    let mut acc = inst_poly(e.num(), name, formals, body, frame, asm)?;
    for (f, &k) in e.den() {
        let fv = inst_poly(f, name, formals, body, frame, asm)?;
        if fv.is_zero() {
            return Err(Error::SingularSubstitution(format!("{:?}", f)));
        }
        acc = acc.mul(&fv.powi(-(k as i64))?);
    }
    Ok(acc)
}

fn inst_poly(
    p: &Poly,
    name: &str,
    formals: &[&str],
    body: &Expr,
    frame: &Frame,
    asm: &Assumptions,
) -> Result<Expr> {
    let mut acc = Expr::zero();
    for (mono, coeff) in &p.0 {
        let mut term = Expr::from_rational(coeff.clone());
        for (a, &e) in &mono.0 {
            let av = inst_atom(a, name, formals, body, frame, asm)?;
            term = term.mul(&av.powi(e as i64)?);
        }
        acc = acc.add(&term);
    }
    Ok(acc)
}

fn inst_atom(
    a: &Atom,
    name: &str,
    formals: &[&str],
    body: &Expr,
    frame: &Frame,
    asm: &Assumptions,
) -> Result<Expr> {
    match a {
        Atom::Apply(n, dord, args) if n == name => {
            if args.len() != formals.len() || dord.len() != formals.len() {
                return Err(Error::NotPolynomial(format!(
                    "arity mismatch instantiating {}",
                    name
                )));
            }
            let mut d = body.clone();
            for (formal, &reps) in formals.iter().zip(dord) {
                for _ in 0..reps {
                    d = d.d(formal, frame);
                }
            }
            let mut b = crate::expr::Bindings::new();
            for (formal, arg) in formals.iter().zip(args) {
                let inst = instantiate_applied(arg, name, formals, body, frame, asm)?;
                b = b.var(formal, inst);
            }
            d.substitute(&b, frame, asm)
        }
        Atom::Apply(n, dord, args) => {
            let mut new_args = Vec::with_capacity(args.len());
            for arg in args {
                new_args.push(instantiate_applied(arg, name, formals, body, frame, asm)?);
            }
            Ok(Expr::apply(n, dord.clone(), new_args))
        }
        Atom::Rad(base, r) => {
            let bv = inst_poly(base, name, formals, body, frame, asm)?;
            bv.powq(&BigRational::new(1.into(), (*r).into()), asm)
        }
        _ => Ok(Expr::from_atom(a.clone())),
    }
}
