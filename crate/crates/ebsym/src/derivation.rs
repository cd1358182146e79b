//! The derivation pipeline: replays the chain of coefficient constraints
//! that pins down the equivalence group of the beam equation, step by step,
//! verifying every printed closed form by substitution.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::expr::poly::{Atom, Poly};
use crate::expr::{Assumptions, Bindings, Expr, Frame};
use crate::group::Moebius;
use crate::linsolve;
use crate::transform::{
    constant_component, transform_pde, verify_eb_form, EbEquation, LinearPde,
    PointTransformation,
};

fn k(i: u32) -> Expr {
    Expr::param(&format!("k{}", i))
}

/// The positivity hypotheses used throughout: multi-term quantities whose
/// signs the derivation fixes. Single symbols (k1, k5, R_y, S_z, ...) are
/// positive by the default orientation convention.
pub fn standard_assumptions() -> Assumptions {
    let mut asm = Assumptions::new();
    let y = Expr::var("y");
    let z = Expr::var("z");
    for e in [
        k(2).sub(&k(3).mul(&k(4))),
        k(5).sub(&k(6).mul(&k(7))),
        Expr::one().add(&k(4).mul(&z)),
        Expr::one().add(&k(7).mul(&y)),
    ] {
        asm.assume_positive(&e);
    }
    asm
}

/// Certified-nonzero vocabulary for "equal up to a nonzero factor"
/// comparisons: named atoms (jets, parameters, applied coefficient symbols)
/// plus multi-term polynomial factors. Radical atoms are always accepted:
/// their radicands are positive wherever they were introduced.
#[derive(Debug, Clone, Default)]
pub struct Nonzero {
    pub params: BTreeSet<String>,
    pub jets: BTreeSet<(String, [u32; 2])>,
    pub applied: BTreeSet<String>,
    pub polys: Vec<Poly>,
}

impl Nonzero {
    /// The vocabulary appearing in the derivation chain.
    pub fn standard() -> Self {
        let mut nz = Nonzero::default();
        for p in ["k1", "k2", "k4", "k5", "k7"] {
            nz.params.insert(p.to_string());
        }
        for (f, idx) in [("R", [1, 0]), ("S", [0, 1]), ("L", [0, 0]), ("h", [0, 0])] {
            nz.jets.insert((f.to_string(), idx));
        }
        for f in ["f", "m"] {
            nz.applied.insert(f.to_string());
        }
        for e in [
            k(2).sub(&k(3).mul(&k(4))),
            k(5).sub(&k(6).mul(&k(7))),
            Expr::one().add(&k(4).mul(&Expr::var("z"))),
            Expr::one().add(&k(7).mul(&Expr::var("y"))),
        ] {
            nz.polys.push(e.num().clone());
        }
        nz
    }

    fn atom_ok(&self, a: &Atom) -> bool {
        match a {
            Atom::Param(p) => self.params.contains(p),
            Atom::Jet(f, idx) => self.jets.contains(&(f.clone(), *idx)),
            Atom::Apply(f, _, _) => self.applied.contains(f),
            Atom::Rad(_, _) => true,
            Atom::Var(_) => false,
        }
    }

    /// Is the expression a product of certified-nonzero pieces (times a
    /// nonzero constant)? Denominator factors are nonzero wherever the
    /// expression is defined, so only the numerator is examined.
    pub fn certifies(&self, e: &Expr) -> bool {
        if e.is_zero() {
            return false;
        }
        let mut p = e.num().primitive().1;
        loop {
            if let Some((mono, _)) = p.as_single_term() {
                return mono.0.keys().all(|a| self.atom_ok(a));
            }
            let mut divided = false;
            for q in &self.polys {
                if let Some(next) = p.exact_div(q) {
                    p = next;
                    divided = true;
                    break;
                }
            }
            if !divided {
                return false;
            }
        }
    }
}

/// If a == factor * b with a certified-nonzero factor, return the factor.
pub fn proportionality_factor(a: &Expr, b: &Expr, nz: &Nonzero) -> Result<Option<Expr>> {
    if b.is_zero() {
        return Ok(if a.is_zero() { Some(Expr::one()) } else { None });
    }
    let ratio = a.div(b)?;
    Ok(if nz.certifies(&ratio) { Some(ratio) } else { None })
}

/// One replayed derivation step: the extracted constraint, what solved form
/// the chain adopts, and the check that the solved form kills it.
#[derive(Debug, Clone)]
pub struct DerivationStep {
    pub name: String,
    pub constraint: Expr,
    pub solved_form: String,
    pub note: String,
}

#[derive(Debug, Clone, Default)]
pub struct DerivationTrace {
    pub steps: Vec<DerivationStep>,
}

impl DerivationTrace {
    pub fn push(&mut self, name: &str, constraint: Expr, solved: &str, note: String) {
        self.steps.push(DerivationStep {
            name: name.to_string(),
            constraint,
            solved_form: solved.to_string(),
            note,
        });
    }
}

/// Frame for the ansatz t = R(y,z), x = S(z), u = L w + J.
fn frame_stage0() -> Frame {
    Frame::yz().with_dep("S", [false, true]).with_dep("h", [false, true])
}

/// Frame once R = R(y) is established.
fn frame_stage1() -> Frame {
    frame_stage0().with_dep("R", [true, false])
}

fn generic_ansatz() -> PointTransformation {
    PointTransformation::new(
        Expr::func("R"),
        Expr::func("S"),
        Expr::func("L"),
        Expr::func("J"),
    )
}

/// Step 1: the coefficient of w_yyyy forces R = R(y).
pub fn step_gamma1() -> Result<(Expr, Expr)> {
    let frame = frame_stage0();
    let pde = transform_pde(&EbEquation::classic(), &generic_ansatz(), &frame)?;
    let gamma1 = pde.coeff([4, 0]);
    let printed = Expr::apply("f", vec![0], vec![Expr::func("S")])
        .mul(&Expr::jet("R", [0, 1]).powi(4)?)
        .mul(&Expr::func("L"))
        .div(
            &Expr::jet("R", [1, 0])
                .powi(4)?
                .mul(&Expr::jet("S", [0, 1]).powi(4)?),
        )?;
    Ok((gamma1, printed))
}

/// Step 2: with R = R(y), the w_y coefficient is proportional to
/// 2 R_y L_y - L R_yy, solved by L = h(z) sqrt(R_y).
pub fn step_wy_condition() -> Result<(Expr, Expr)> {
    let frame = frame_stage1();
    let pde = transform_pde(&EbEquation::classic(), &generic_ansatz(), &frame)?;
    let coeff = pde.coeff([1, 0]);
    let printed = Expr::int(2)
        .mul(&Expr::jet("R", [1, 0]))
        .mul(&Expr::jet("L", [1, 0]))
        .sub(&Expr::func("L").mul(&Expr::jet("R", [2, 0])));
    Ok((coeff, printed))
}

/// The solved form L = h(z) sqrt(R_y) as an expression.
pub fn solved_l(asm: &Assumptions) -> Result<Expr> {
    Ok(Expr::func("h").mul(&Expr::jet("R", [1, 0]).sqrt(asm)?))
}

/// Step 3: with L = h sqrt(R_y), the f''-coefficient of the w_z coefficient
/// is proportional to 2 h_z S_z - h S_zz, solved by h = k1 sqrt(S_z).
pub fn step_delta1(asm: &Assumptions) -> Result<(Expr, Expr)> {
    let frame = frame_stage1();
    let t = PointTransformation::new(
        Expr::func("R"),
        Expr::func("S"),
        solved_l(asm)?,
        Expr::func("J"),
    );
    let pde = transform_pde(&EbEquation::classic(), &t, &frame)?;
    let gamma2 = pde.coeff([0, 1]);
    let (fc, _) = gamma2.collect_applied("f")?;
    let delta1 = fc.get(&vec![2u32]).cloned().unwrap_or_else(Expr::zero);
    let printed = Expr::jet("S", [0, 1]).powi(4)?.mul(
        &Expr::int(2)
            .mul(&Expr::jet("h", [0, 1]))
            .mul(&Expr::jet("S", [0, 1]))
            .sub(&Expr::func("h").mul(&Expr::jet("S", [0, 2]))),
    );
    Ok((delta1, printed))
}

/// The solved form h = k1 sqrt(S_z).
pub fn solved_h(asm: &Assumptions) -> Result<Expr> {
    Ok(k(1).mul(&Expr::jet("S", [0, 1]).sqrt(asm)?))
}

/// Step 4: with h = k1 sqrt(S_z), the f'-coefficient of the w_z coefficient
/// is proportional to -3 S_zz^2 + 2 S_z S_zzz, whose solutions are the
/// Moebius maps in z.
pub fn step_fs_condition(asm: &Assumptions) -> Result<(Expr, Expr)> {
    let frame = frame_stage1();
    let l = k(1)
        .mul(&Expr::jet("R", [1, 0]).sqrt(asm)?)
        .mul(&Expr::jet("S", [0, 1]).sqrt(asm)?);
    let t = PointTransformation::new(Expr::func("R"), Expr::func("S"), l, Expr::func("J"));
    let pde = transform_pde(&EbEquation::classic(), &t, &frame)?;
    let gamma2 = pde.coeff([0, 1]);
    let (fc, _) = gamma2.collect_applied("f")?;
    let coeff = fc.get(&vec![1u32]).cloned().unwrap_or_else(Expr::zero);
    let printed = Expr::int(-3)
        .mul(&Expr::jet("S", [0, 2]).powi(2)?)
        .add(
            &Expr::int(2)
                .mul(&Expr::jet("S", [0, 1]))
                .mul(&Expr::jet("S", [0, 3])),
        );
    Ok((coeff, printed))
}

/// The Moebius solution for x = S(z).
pub fn moebius_s() -> Moebius {
    Moebius::in_chart(k(2), k(3), k(4))
}

/// The Moebius solution for t = R(y), in the variable y.
pub fn moebius_r() -> Moebius {
    Moebius::in_chart(k(5), k(6), k(7))
}

/// Step 5: with S the Moebius map and L = k1 sqrt(R_y S_z), the coefficient
/// of w is proportional to m (3 R_yy^2 - 2 R_y R_yyy). Returns the engine
/// coefficient, the paper's printed form, and the engine/printed ratio.
pub fn step_gamma3(asm: &Assumptions) -> Result<(Expr, Expr, Expr)> {
    let frame = frame_stage1();
    let z = Expr::var("z");
    let s = moebius_s().apply(&z)?;
    let sz = s.total_derivative(1, &frame);
    let l = k(1)
        .mul(&Expr::jet("R", [1, 0]).sqrt(asm)?)
        .mul(&sz.sqrt(asm)?);
    let t = PointTransformation::new(Expr::func("R"), s.clone(), l, Expr::zero());
    let pde = transform_pde(&EbEquation::classic(), &t, &frame)?;
    let gamma3 = pde.coeff([0, 0]);
    let shape = Expr::int(3)
        .mul(&Expr::jet("R", [2, 0]).powi(2)?)
        .sub(
            &Expr::int(2)
                .mul(&Expr::jet("R", [1, 0]))
                .mul(&Expr::jet("R", [3, 0])),
        );
    let m_at = Expr::apply("m", vec![0], vec![s]);
    let det = k(2).sub(&k(3).mul(&k(4)));
    let den = Expr::one().add(&k(4).mul(&z));
    let printed = Expr::int(-4)
        .mul(&det.powi(8)?)
        .mul(&m_at.clone())
        .mul(&shape.clone())
        .div(&den.powi(16)?)?;
    let ratio = if printed.is_zero() {
        Expr::zero()
    } else {
        gamma3.div(&printed)?
    };
    let _ = m_at;
    Ok((gamma3, printed.mul(&Expr::one()), ratio))
}

/// The target shape of step 5 (what the Moebius family must annihilate).
pub fn gamma3_shape() -> Expr {
    let ryy = Expr::jet("R", [2, 0]);
    Expr::int(3).mul(&ryy).mul(&ryy).sub(
        &Expr::int(2)
            .mul(&Expr::jet("R", [1, 0]))
            .mul(&Expr::jet("R", [3, 0])),
    )
}

/// The printed J for the k7 != 0 chart.
pub fn j1_expr() -> Result<Expr> {
    let y = Expr::var("y");
    let z = Expr::var("z");
    let k7sq = k(7).powi(2)?;
    let num = k(8)
        .sub(&k(10).mul(&k7sq).mul(&y))
        .add(&k(4).mul(&k(11).mul(&k7sq).mul(&y).sub(&k(9))))
        .add(
            &k(4)
                .powi(2)?
                .mul(&k(11).mul(&k7sq).mul(&y).mul(&z).sub(&k(9).mul(&z))),
        );
    let den = k(4)
        .mul(&k(7))
        .mul(&Expr::one().add(&k(7).mul(&y)))
        .mul(&Expr::one().add(&k(4).mul(&z)));
    num.div(&den)
}

/// The printed J for the k7 = 0 chart.
pub fn j2_expr() -> Result<Expr> {
    let y = Expr::var("y");
    let z = Expr::var("z");
    let head = k(8).add(&k(10).mul(&y));
    let num = k(0)
        .neg()
        .sub(&k(9).mul(&y))
        .add(&k(4).mul(&head))
        .add(&k(4).powi(2)?.mul(&head).mul(&z));
    let den = k(4).mul(&Expr::one().add(&k(4).mul(&z)));
    num.div(&den)
}

/// The full k7-generic chart (the intermediate family before k7 = 0 is
/// forced), with the supplied J.
pub fn chart_k7(j: Expr, asm: &Assumptions) -> Result<PointTransformation> {
    let y = Expr::var("y");
    let z = Expr::var("z");
    let r = moebius_r().apply(&y)?;
    let s = moebius_s().apply(&z)?;
    let det_s = k(2).sub(&k(3).mul(&k(4)));
    let det_r = k(5).sub(&k(6).mul(&k(7)));
    let l = k(1)
        .mul(&det_s.sqrt(asm)?)
        .mul(&det_r.sqrt(asm)?)
        .div(
            &Expr::one()
                .add(&k(7).mul(&y))
                .mul(&Expr::one().add(&k(4).mul(&z))),
        )?;
    Ok(PointTransformation::new(r, s, l, j))
}

/// The Theorem-1 chart (k7 = 0), with the supplied J.
pub fn chart_theorem1(j: Expr, asm: &Assumptions) -> Result<PointTransformation> {
    let y = Expr::var("y");
    let z = Expr::var("z");
    let r = k(5).mul(&y).add(&k(6));
    let s = moebius_s().apply(&z)?;
    let det = k(2).sub(&k(3).mul(&k(4)));
    let l = k(1)
        .mul(&det.mul(&k(5)).sqrt(asm)?)
        .div(&Expr::one().add(&k(4).mul(&z)))?;
    Ok(PointTransformation::new(r, s, l, j))
}

/// Verify that the printed J annihilates the constant component of the
/// matching chart. `k7_zero` selects between the two printed forms.
pub fn compute_j(k7_zero: bool, asm: &Assumptions) -> Result<Expr> {
    let frame = Frame::yz();
    let eq = EbEquation::classic();
    let (j, t) = if k7_zero {
        let j = j2_expr()?;
        (j.clone(), chart_theorem1(j, asm)?)
    } else {
        let j = j1_expr()?;
        (j.clone(), chart_k7(j, asm)?)
    };
    let cc = constant_component(&eq, &t, &frame)?;
    if !cc.is_zero() {
        return Err(Error::NonInvertible(
            "printed J does not kill the constant component".into(),
        ));
    }
    Ok(j)
}

/// Re-solve the constant-component equation mechanically at the degenerate
/// chart k4 = k7 = 0 (where the printed J forms are undefined): polynomial
/// ansatz, linear nullspace. Returns the basis of admissible J monomials.
pub fn compute_j_degenerate() -> Result<Vec<Expr>> {
    let frame = Frame::yz();
    let y = Expr::var("y");
    let z = Expr::var("z");
    let r = k(5).mul(&y).add(&k(6));
    let s = k(2).mul(&z).add(&k(3));
    // cubic ansatz in y and z
    let mut names = Vec::new();
    let mut ansatz = Expr::zero();
    for i in 0..4u32 {
        for jd in 0..4u32 {
            let name = format!("_c{}{}", i, jd);
            let term = Expr::param(&name)
                .mul(&y.powi(i as i64)?)
                .mul(&z.powi(jd as i64)?);
            ansatz = ansatz.add(&term);
            names.push(name);
        }
    }
    let t = PointTransformation::new(r, s, Expr::one(), ansatz.clone());
    let cc = constant_component(&EbEquation::classic(), &t, &frame)?;
    // the component must vanish for arbitrary f and m: every applied
    // coefficient must vanish identically
    let (fc, rest) = cc.collect_applied("f")?;
    let (mc, rest2) = rest.collect_applied("m")?;
    if !rest2.is_zero() {
        return Err(Error::NonInvertible("unexpected coefficient-free part".into()));
    }
    let mut rows: Vec<Vec<Expr>> = Vec::new();
    for coeff in fc.values().chain(mc.values()) {
        collect_param_rows(coeff, &names, &mut rows)?;
    }
    let basis = linsolve::nullspace(&rows, names.len())?;
    let mut out = Vec::new();
    for v in basis {
        let mut j = Expr::zero();
        for (coef, name) in v.iter().zip(&names) {
            if coef.is_zero() {
                continue;
            }
            let i: u32 = name[2..3].parse().unwrap();
            let jd: u32 = name[3..4].parse().unwrap();
            j = j.add(&coef.mul(&y.powi(i as i64)?).mul(&z.powi(jd as i64)?));
        }
        out.push(j);
    }
    Ok(out)
}

/// Append monomial-matching rows for an expression that is linear and
/// homogeneous in the given parameters.
fn collect_param_rows(e: &Expr, names: &[String], rows: &mut Vec<Vec<Expr>>) -> Result<()> {
    use std::collections::BTreeMap;
    let is_param = |a: &Atom| matches!(a, Atom::Param(p) if names.iter().any(|q| q == p));
    let mut grouped: BTreeMap<crate::expr::poly::Mono, Vec<Expr>> = BTreeMap::new();
    for (mono, c) in &e.num().0 {
        let mut rest = mono.clone();
        let mut which = None;
        for (a, &exp) in &mono.0 {
            if is_param(a) {
                if which.is_some() || exp != 1 {
                    return Err(Error::NotLinear("ansatz parameters".into()));
                }
                let name = match a {
                    Atom::Param(p) => p.clone(),
                    _ => unreachable!(),
                };
                which = Some(names.iter().position(|q| *q == name).unwrap());
                rest.0.remove(a);
            }
        }
        let i = which.ok_or_else(|| {
            Error::NotLinear("constant-component has a parameter-free term".into())
        })?;
        let row = grouped
            .entry(rest)
            .or_insert_with(|| vec![Expr::zero(); names.len()]);
        row[i] = row[i].add(&Expr::from_rational(c.clone()));
    }
    rows.extend(grouped.into_values());
    Ok(())
}

/// The F and M of the normal-form image of the Theorem-1 chart. The M
/// exponent on (k2 - k3 k4) is 4: the 5th-power variant fails the F/M ratio
/// check and is inconsistent with the k7 = 0 specialization of the
/// generalized image (see `theorem1_m_overshoot` in the tests).
pub fn theorem1_f_m(asm: &Assumptions) -> Result<(Expr, Expr)> {
    let (f_big, m_big, _) = theorem1_f_m_variants(asm)?;
    Ok((f_big, m_big))
}

/// As `theorem1_f_m`, also returning the inconsistent 5th-power M variant
/// used as a negative control.
pub fn theorem1_f_m_variants(asm: &Assumptions) -> Result<(Expr, Expr, Expr)> {
    let z = Expr::var("z");
    let s = moebius_s().apply(&z)?;
    let det = k(2).sub(&k(3).mul(&k(4)));
    let den = Expr::one().add(&k(4).mul(&z));
    let root = det.mul(&k(5)).sqrt(asm)?.div(&den)?;
    let f_at = Expr::apply("f", vec![0], vec![s.clone()]);
    let m_at = Expr::apply("m", vec![0], vec![s]);
    let f_big = den.powi(5)?.mul(&root).mul(&f_at);
    let m_big = det
        .powi(4)?
        .div(&k(5).powi(2)?.mul(&den.powi(3)?))?
        .mul(&root)
        .mul(&m_at);
    let m_overshoot = m_big.mul(&det);
    Ok((f_big, m_big, m_overshoot))
}

/// Assemble the Theorem-1 transformation, transform the equation, and
/// verify the printed normal form. Returns the chart, the verified F and M,
/// and the gauge factor.
pub fn assemble_theorem1(asm: &Assumptions) -> Result<(PointTransformation, Expr, Expr, Expr)> {
    let frame = Frame::yz();
    let t = chart_theorem1(j2_expr()?, asm)?;
    let pde = transform_pde(&EbEquation::classic(), &t, &frame)?;
    let (f_big, m_big) = theorem1_f_m(asm)?;
    let mu = verify_eb_form(&pde, &f_big, &m_big, &frame)?
        .ok_or_else(|| Error::NonInvertible("normal form verification failed".into()))?;
    // the normal form must not depend on y
    if !f_big.total_derivative(0, &frame).is_zero()
        || !m_big.total_derivative(0, &frame).is_zero()
    {
        return Err(Error::NonInvertible("normal form depends on y".into()));
    }
    Ok((t, f_big, m_big, mu))
}

/// The printed F and M of the generalized image (the k7-generic chart).
pub fn eubytr_f_m() -> Result<(Expr, Expr)> {
    let y = Expr::var("y");
    let z = Expr::var("z");
    let r = moebius_r().apply(&y)?;
    let s = moebius_s().apply(&z)?;
    let dz = Expr::one().add(&k(4).mul(&z));
    let dy = Expr::one().add(&k(7).mul(&y));
    let det_s = k(2).sub(&k(3).mul(&k(4)));
    let det_r = k(5).sub(&k(6).mul(&k(7)));
    let f_at = Expr::apply("f", vec![0, 0], vec![r.clone(), s.clone()]);
    let m_at = Expr::apply("m", vec![0, 0], vec![r, s]);
    let f_big = dz.powi(5)?.div(&dy.mul(&dz))?.mul(&f_at);
    let m_big = dy
        .powi(3)?
        .mul(&dz.powi(3)?)
        .mul(&det_s.powi(4)?)
        .div(&det_r.powi(2)?.mul(&dz.powi(7)?))?
        .mul(&m_at);
    Ok((f_big, m_big))
}

/// Replay the generalized-flavor argument. Returns the trace; the final
/// entry records the verified normal form of the full generalized chart.
pub fn verify_theorem2_generalized(asm: &Assumptions) -> Result<DerivationTrace> {
    let mut trace = DerivationTrace::default();
    let eq = EbEquation::generalized();

    // (a) generic R(y,z), S(y,z): the w_yyyy coefficient carries R_z^4
    let frame = Frame::yz();
    let t0 = PointTransformation::new(
        Expr::func("R"),
        Expr::func("S"),
        Expr::one(),
        Expr::zero(),
    );
    let pde0 = transform_pde(&eq, &t0, &frame)?;
    let c_yyyy = pde0.coeff([4, 0]);
    let varpi = Expr::jet("R", [1, 0])
        .mul(&Expr::jet("S", [0, 1]))
        .sub(&Expr::jet("R", [0, 1]).mul(&Expr::jet("S", [1, 0])));
    let expected = Expr::apply("f", vec![0, 0], vec![Expr::func("R"), Expr::func("S")])
        .mul(&Expr::jet("R", [0, 1]).powi(4)?)
        .div(&varpi.powi(4)?)?;
    if !c_yyyy.equivalent(&expected) {
        return Err(Error::NonInvertible("w_yyyy coefficient mismatch".into()));
    }
    trace.push(
        "w_yyyy forces R = R(y)",
        c_yyyy,
        "R_z = 0",
        "engine coefficient is f R_z^4 / varpi^4 (4th power of the Jacobian, \
         not the printed 1st)"
            .into(),
    );

    // (b) with R = R(y): the w_yz coefficient of the u_tt image
    let frame_b = Frame::yz().with_dep("R", [true, false]);
    let (dt, _) = crate::jet::solve_operator_system(
        &Expr::func("R"),
        &Expr::func("S"),
        &frame_b,
    )?;
    let lw = Expr::func("L").mul(&Expr::func("w"));
    let utt = dt.power(&lw, 2, &frame_b);
    let c_yz = utt.jet_coefficient("w", [1, 1])?;
    let printed_yz = Expr::int(-2)
        .mul(&Expr::jet("S", [1, 0]))
        .mul(&Expr::func("L"))
        .div(
            &Expr::jet("R", [1, 0])
                .powi(2)?
                .mul(&Expr::jet("S", [0, 1])),
        )?;
    if !c_yz.equivalent(&printed_yz) {
        return Err(Error::NonInvertible("w_yz coefficient mismatch".into()));
    }
    trace.push(
        "w_yz forces S = S(z)",
        c_yz,
        "S_y = 0",
        "coefficient -2 S_y L / (R_y^2 S_z) as printed".into(),
    );

    // (c) the full k7-generic chart maps the generalized equation to the
    // printed beam form
    let t = chart_k7(j1_expr()?, asm)?;
    let pde = transform_pde(&eq, &t, &frame)?;
    if !pde.inhom.is_zero() {
        return Err(Error::NonInvertible("constant component survives".into()));
    }
    let (f_big, m_big) = eubytr_f_m()?;
    let mu = verify_eb_form(&pde, &f_big, &m_big, &frame)?
        .ok_or_else(|| Error::NonInvertible("generalized image is not of beam form".into()))?;
    let f_y = f_big.total_derivative(0, &frame);
    let m_y = m_big.total_derivative(0, &frame);
    if f_y.is_zero() && m_y.is_zero() {
        return Err(Error::NonInvertible(
            "expected y-dependence for symbolic k7".into(),
        ));
    }
    trace.push(
        "full chart image",
        mu,
        "beam form with y-dependent F, M; y-independence forces k7 = 0",
        "printed F, M verified up to the overall gauge factor".into(),
    );
    Ok(trace)
}

/// Run the whole classic chain and return its trace.
pub fn run_derivation(asm: &Assumptions) -> Result<DerivationTrace> {
    let mut trace = DerivationTrace::default();
    let nz = Nonzero::standard();
    let frame = Frame::yz();

    let (g1, printed1) = step_gamma1()?;
    if !g1.equivalent(&printed1) {
        return Err(Error::NonInvertible("gamma1 mismatch".into()));
    }
    trace.push(
        "gamma1",
        g1,
        "R = R(y)",
        "coefficient of w_yyyy equals f R_z^4 L / (R_y^4 S_z^4)".into(),
    );

    let (wy, printed2) = step_wy_condition()?;
    let factor = proportionality_factor(&wy, &printed2, &nz)?
        .ok_or_else(|| Error::NonInvertible("w_y constraint mismatch".into()))?;
    let killed = printed2
        .substitute(
            &Bindings::new().func("L", solved_l(asm)?),
            &frame_stage1(),
            asm,
        )?
        .is_zero();
    if !killed {
        return Err(Error::NonInvertible("L = h sqrt(R_y) does not solve w_y".into()));
    }
    trace.push(
        "w_y condition",
        printed2,
        "L = h(z) sqrt(R_y)",
        format!("engine coefficient = printed * {}", factor.pretty(&frame)),
    );

    let (d1, printed3) = step_delta1(asm)?;
    let factor = proportionality_factor(&d1, &printed3, &nz)?
        .ok_or_else(|| Error::NonInvertible("delta1 mismatch".into()))?;
    let killed = printed3
        .substitute(
            &Bindings::new().func("h", solved_h(asm)?),
            &frame_stage1(),
            asm,
        )?
        .is_zero();
    if !killed {
        return Err(Error::NonInvertible("h = k1 sqrt(S_z) does not solve delta1".into()));
    }
    trace.push(
        "delta1",
        printed3,
        "h = k1 sqrt(S_z)",
        format!("engine coefficient = printed * {}", factor.pretty(&frame)),
    );

    let (fs, printed4) = step_fs_condition(asm)?;
    let factor = proportionality_factor(&fs, &printed4, &nz)?
        .ok_or_else(|| Error::NonInvertible("f_S constraint mismatch".into()))?;
    let z = Expr::var("z");
    let s_sol = moebius_s().apply(&z)?;
    let killed = printed4
        .substitute(&Bindings::new().func("S", s_sol), &frame_stage1(), asm)?
        .is_zero();
    if !killed {
        return Err(Error::NonInvertible("Moebius S does not solve f_S".into()));
    }
    trace.push(
        "f_S condition",
        printed4,
        "S = (k2 z + k3)/(k4 z + 1)",
        format!("engine coefficient = printed * {}", factor.pretty(&frame)),
    );

    let (g3, printed5, ratio) = step_gamma3(asm)?;
    let shape = gamma3_shape();
    let m_shape = Expr::apply("m", vec![0], vec![moebius_s().apply(&z)?]).mul(&shape.clone());
    let factor = proportionality_factor(&g3, &m_shape, &nz)?
        .ok_or_else(|| Error::NonInvertible("gamma3 shape mismatch".into()))?;
    let y = Expr::var("y");
    let r_sol = moebius_r().apply(&y)?;
    let killed = shape
        .substitute(&Bindings::new().func("R", r_sol), &frame_stage1(), asm)?
        .is_zero();
    if !killed {
        return Err(Error::NonInvertible("Moebius R does not solve gamma3".into()));
    }
    let note = if ratio.equivalent(&Expr::one()) {
        "printed prefactor reproduced exactly".to_string()
    } else {
        format!(
            "engine gamma3 = m(S)(3 R_yy^2 - 2 R_y R_yyy) * {}; the printed \
             prefactor differs by a nonzero factor",
            factor.pretty(&frame)
        )
    };
    trace.push(
        "gamma3",
        m_shape,
        "R = (k5 y + k6)/(k7 y + 1)",
        note,
    );
    let _ = printed5;
    Ok(trace)
}

/// Gauge-invariant sanity check used by tests: a Moebius map satisfies
/// 3 M''^2 - 2 M' M''' = 0 identically.
pub fn schwarzian_condition(m: &Moebius, var: &str, frame: &Frame) -> Result<Expr> {
    let v = Expr::var(var);
    let e = m.apply(&v)?;
    let slot = frame.slot(var).ok_or(Error::ChartBoundary)?;
    let d1 = e.total_derivative(slot, frame);
    let d2 = d1.total_derivative(slot, frame);
    let d3 = d2.total_derivative(slot, frame);
    Ok(Expr::int(3)
        .mul(&d2.powi(2)?)
        .sub(&Expr::int(2).mul(&d1).mul(&d3)))
}

/// Check that a PDE matches the LinearPde reassembly identity (used in
/// pipeline tests).
pub fn reassembles(pde: &LinearPde, original: &Expr) -> bool {
    pde.residual().equivalent(original)
}
