//! Group structure of the equivalence family: projective Moebius maps for
//! the x-part, affine maps for the t-part, and composition and inversion of
//! whole family elements.


use crate::error::{Error, Result};
use crate::expr::{Assumptions, Bindings, Expr, Frame};
use crate::linsolve;
use crate::transform::PointTransformation;

/// A Moebius map v -> (a v + b)/(c v + d), kept in projective (4-parameter)
/// form so that composition is a plain matrix product. The family chart used
/// by the derivation normalizes d = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Moebius {
    pub a: Expr,
    pub b: Expr,
    pub c: Expr,
    pub d: Expr,
}

impl Moebius {
    pub fn new(a: Expr, b: Expr, c: Expr, d: Expr) -> Self {
        Moebius { a, b, c, d }
    }

    pub fn identity() -> Self {
        Moebius::new(Expr::one(), Expr::zero(), Expr::zero(), Expr::one())
    }

    /// The (k2 z + k3)/(k4 z + 1) chart.
    pub fn in_chart(a: Expr, b: Expr, c: Expr) -> Self {
        Moebius::new(a, b, c, Expr::one())
    }

    pub fn det(&self) -> Expr {
        self.a.mul(&self.d).sub(&self.b.mul(&self.c))
    }

    pub fn apply(&self, v: &Expr) -> Result<Expr> {
        self.a
            .mul(v)
            .add(&self.b)
            .div(&self.c.mul(v).add(&self.d))
    }

    /// self after other: (self . other)(v) = self(other(v)).
    pub fn compose(&self, other: &Moebius) -> Moebius {
        Moebius::new(
            self.a.mul(&other.a).add(&self.b.mul(&other.c)),
            self.a.mul(&other.b).add(&self.b.mul(&other.d)),
            self.c.mul(&other.a).add(&self.d.mul(&other.c)),
            self.c.mul(&other.b).add(&self.d.mul(&other.d)),
        )
    }

    /// Projective inverse (adjugate matrix; the determinant scale drops out).
    pub fn inverse(&self) -> Moebius {
        Moebius::new(self.d.clone(), self.b.neg(), self.c.neg(), self.a.clone())
    }

    /// Rescale so that d = 1. Fails at the chart boundary d = 0.
    pub fn normalize(&self) -> Result<Moebius> {
        if self.d.is_zero() {
            return Err(Error::ChartBoundary);
        }
        Ok(Moebius::new(
            self.a.div(&self.d)?,
            self.b.div(&self.d)?,
            self.c.div(&self.d)?,
            Expr::one(),
        ))
    }
}

/// Parameters of a Theorem-1 family element
///   t = k5 y + k6,
///   x = (k2 z + k3)/(k4 z + 1),
///   u = k1 ((k2 - k3 k4) k5 / (1 + k4 z)^2)^(1/2) w + J,
///   J = k8 + k10 y - (k0 + k9 y)/(k4 (1 + k4 z)).
#[derive(Debug, Clone, PartialEq)]
pub struct EquivParams {
    pub k0: Expr,
    pub k1: Expr,
    pub k2: Expr,
    pub k3: Expr,
    pub k4: Expr,
    pub k5: Expr,
    pub k6: Expr,
    pub k8: Expr,
    pub k9: Expr,
    pub k10: Expr,
}

impl EquivParams {
    pub fn identity() -> Self {
        EquivParams {
            k0: Expr::zero(),
            k1: Expr::one(),
            k2: Expr::one(),
            k3: Expr::zero(),
            k4: Expr::zero(),
            k5: Expr::one(),
            k6: Expr::zero(),
            k8: Expr::zero(),
            k9: Expr::zero(),
            k10: Expr::zero(),
        }
    }

    /// All parameters left symbolic.
    pub fn symbolic() -> Self {
        let p = |n: &str| Expr::param(n);
        EquivParams {
            k0: p("k0"),
            k1: p("k1"),
            k2: p("k2"),
            k3: p("k3"),
            k4: p("k4"),
            k5: p("k5"),
            k6: p("k6"),
            k8: p("k8"),
            k9: p("k9"),
            k10: p("k10"),
        }
    }

    pub fn from_rationals(ks: &[(i64, i64); 10]) -> Self {
        let e = |p: (i64, i64)| Expr::rat(p.0, p.1);
        EquivParams {
            k0: e(ks[0]),
            k1: e(ks[1]),
            k2: e(ks[2]),
            k3: e(ks[3]),
            k4: e(ks[4]),
            k5: e(ks[5]),
            k6: e(ks[6]),
            k8: e(ks[7]),
            k9: e(ks[8]),
            k10: e(ks[9]),
        }
    }

    pub fn moebius(&self) -> Moebius {
        Moebius::in_chart(self.k2.clone(), self.k3.clone(), self.k4.clone())
    }

    pub fn det(&self) -> Expr {
        self.k2.sub(&self.k3.mul(&self.k4))
    }

    /// The J part of the chart. At k4 = 0 the printed form is undefined;
    /// only the k0 = k9 = 0 limit stays in the family.
    pub fn j_part(&self) -> Result<Expr> {
        let y = Expr::var("y");
        let head = self.k8.add(&self.k10.mul(&y));
        if self.k4.is_zero() {
            if self.k0.is_zero() && self.k9.is_zero() {
                return Ok(head);
            }
            return Err(Error::DegenerateChart("printed J family undefined at k4 = 0".into()));
        }
        let z = Expr::var("z");
        let den = self
            .k4
            .mul(&Expr::one().add(&self.k4.mul(&z)));
        Ok(head.sub(&self.k0.add(&self.k9.mul(&y)).div(&den)?))
    }

    /// Build the point transformation of this family element.
    pub fn chart(&self, asm: &Assumptions) -> Result<PointTransformation> {
        let y = Expr::var("y");
        let z = Expr::var("z");
        let r = self.k5.mul(&y).add(&self.k6);
        let s = self.moebius().apply(&z)?;
        let den = Expr::one().add(&self.k4.mul(&z));
        let rad = self.det().mul(&self.k5).sqrt(asm)?;
        let l = self.k1.mul(&rad).div(&den)?;
        Ok(PointTransformation::new(r, s, l, self.j_part()?))
    }

    /// Composition: the element whose chart equals applying `self` after
    /// `inner` (substituting inner's chart into self's).
    pub fn compose(&self, inner: &EquivParams, asm: &Assumptions) -> Result<EquivParams> {
        let frame = Frame::yz();
        let outer = self.chart(asm)?;
        let inner_t = inner.chart(asm)?;
        let composed = compose_charts(&outer, &inner_t, &frame, asm)?;
        let mob = self.moebius().compose(&inner.moebius()).normalize()?;
        let k5 = self.k5.mul(&inner.k5);
        let k6 = self.k5.mul(&inner.k6).add(&self.k6);
        extract_params(&composed, mob, k5, k6, asm)
    }

    /// The inverse element, constructed from the inverse chart.
    pub fn inverse(&self, asm: &Assumptions) -> Result<EquivParams> {
        let frame = Frame::yz();
        let t = self.chart(asm)?;
        let inv = invert_chart(&t, self, asm)?;
        let mob = self.moebius().inverse().normalize()?;
        let k5 = self.k5.inverse()?;
        let k6 = self.k6.div(&self.k5)?.neg();
        let _ = &frame;
        extract_params(&inv, mob, k5, k6, asm)
    }
}

/// Chart of `outer` applied after `inner`: substitute y -> inner.r,
/// z -> inner.s into outer and compose the w-parts.
pub fn compose_charts(
    outer: &PointTransformation,
    inner: &PointTransformation,
    frame: &Frame,
    asm: &Assumptions,
) -> Result<PointTransformation> {
    let b = Bindings::new()
        .var("y", inner.r.clone())
        .var("z", inner.s.clone());
    let r = outer.r.substitute(&b, frame, asm)?;
    let s = outer.s.substitute(&b, frame, asm)?;
    let lo = outer.l.substitute(&b, frame, asm)?;
    let jo = outer.j.substitute(&b, frame, asm)?;
    Ok(PointTransformation::new(
        r,
        s,
        lo.mul(&inner.l),
        lo.mul(&inner.j).add(&jo),
    ))
}

/// Invert a family chart symbolically: y and z parts invert as affine and
/// Moebius maps, the w part as w = (u - J)/L re-expressed in the new
/// variables.
fn invert_chart(
    t: &PointTransformation,
    p: &EquivParams,
    asm: &Assumptions,
) -> Result<PointTransformation> {
    let frame = Frame::yz();
    let y = Expr::var("y");
    let z = Expr::var("z");
    let r_inv = y.sub(&p.k6).div(&p.k5)?;
    let s_inv = p.moebius().inverse().normalize()?.apply(&z)?;
    let back = Bindings::new().var("y", r_inv.clone()).var("z", s_inv.clone());
    let l_at = t.l.substitute(&back, &frame, asm)?;
    let j_at = t.j.substitute(&back, &frame, asm)?;
    let l_inv = l_at.inverse()?;
    Ok(PointTransformation::new(
        r_inv,
        s_inv,
        l_inv.clone(),
        j_at.mul(&l_inv).neg(),
    ))
}

/// Read family parameters off a composed chart. The Moebius and affine
/// parts are supplied exactly; the scale and J parts are re-extracted from
/// the chart expressions.
fn extract_params(
    t: &PointTransformation,
    mob: Moebius,
    k5: Expr,
    k6: Expr,
    asm: &Assumptions,
) -> Result<EquivParams> {
    let frame = Frame::yz();
    let k2 = mob.a.clone();
    let k3 = mob.b.clone();
    let k4 = mob.c.clone();
    // scale: the family chart forces l = k1 * sqrt(det k5) / (1 + k4 z), so
    // k1 is l at z = 0 divided by sqrt(det k5)
    let det = k2.sub(&k3.mul(&k4));
    let rad0 = det.mul(&k5).sqrt(asm)?;
    let at0 = Bindings::new().var("z", Expr::zero()).var("y", Expr::var("y"));
    let l0 = t.l.substitute(&at0, &frame, asm)?;
    let k1 = l0.div(&rad0)?;
    // J part: j = A + B y + (C + D y)/(1 + k4 z); sample four points
    let (a, bq, c, d) = extract_j_coeffs(&t.j, &k4, asm)?;
    let params = if k4.is_zero() {
        if !c.is_zero() || !d.is_zero() {
            return Err(Error::DegenerateChart("printed J family undefined at k4 = 0".into()));
        }
        EquivParams {
            k0: Expr::zero(),
            k9: Expr::zero(),
            k1,
            k2,
            k3,
            k4,
            k5,
            k6,
            k8: a,
            k10: bq,
        }
    } else {
        EquivParams {
            k0: c.mul(&k4).neg(),
            k9: d.mul(&k4).neg(),
            k1,
            k2,
            k3,
            k4,
            k5,
            k6,
            k8: a,
            k10: bq,
        }
    };
    Ok(params)
}

/// Solve j == A + B y + (C + D y)/(1 + k4 z) by evaluating at four sample
/// points; then confirm the fit identically.
fn extract_j_coeffs(
    j: &Expr,
    k4: &Expr,
    asm: &Assumptions,
) -> Result<(Expr, Expr, Expr, Expr)> {
    let frame = Frame::yz();
    if k4.is_zero() {
        // basis degenerates to {1, y}: fit j = A + B y
        let at = |yv: Expr| -> Result<Expr> {
            let b = Bindings::new().var("y", yv).var("z", Expr::var("z"));
            j.substitute(&b, &frame, asm)
        };
        let a = at(Expr::zero())?;
        let bq = at(Expr::one())?.sub(&a);
        let fit = a.add(&bq.mul(&Expr::var("y")));
        if !fit.equivalent(j) {
            return Err(Error::NonInvertible(
                "composed J left the printed family".into(),
            ));
        }
        return Ok((a, bq, Expr::zero(), Expr::zero()));
    }
    // pick z samples where 1 + k4 z is nonzero as an expression
    let z_samples = [Expr::zero(), pick_regular_z(k4)?];
    let y_samples = [Expr::zero(), Expr::one()];
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for zv in &z_samples {
        let den = Expr::one().add(&k4.mul(zv));
        let inv = den.inverse()?;
        for yv in &y_samples {
            rows.push(vec![
                Expr::one(),
                yv.clone(),
                inv.clone(),
                yv.mul(&inv),
            ]);
            let b = Bindings::new().var("y", yv.clone()).var("z", zv.clone());
            rhs.push(j.substitute(&b, &frame, asm)?);
        }
    }
    let sol = linsolve::solve(&rows, &rhs)?;
    let (a, bq, c, d) = (sol[0].clone(), sol[1].clone(), sol[2].clone(), sol[3].clone());
    // identity check over the whole chart, not just the samples
    let y = Expr::var("y");
    let z = Expr::var("z");
    let den = Expr::one().add(&k4.mul(&z));
    let fit = a
        .add(&bq.mul(&y))
        .add(&c.add(&d.mul(&y)).div(&den)?);
    if !fit.equivalent(j) {
        return Err(Error::NonInvertible(
            "composed J left the printed family".into(),
        ));
    }
    Ok((a, bq, c, d))
}

/// A rational z with 1 + k4 z nonzero: z = 1 works unless k4 = -1, where
/// z = 2 does.
fn pick_regular_z(k4: &Expr) -> Result<Expr> {
    for cand in [1i64, 2, 3] {
        let den = Expr::one().add(&k4.scale(&crate::expr::big(cand)));
        if !den.is_zero() {
            return Ok(Expr::int(cand));
        }
    }
    Err(Error::ChartBoundary)
}

/// Equality of two family charts as maps: exact equality of r, s, j, and of
/// l through its square (the square removes radical-representation
/// ambiguity; both scale factors are positive by construction).
pub fn charts_equal(a: &PointTransformation, b: &PointTransformation) -> bool {
    a.r.equivalent(&b.r)
        && a.s.equivalent(&b.s)
        && a.j.equivalent(&b.j)
        && a.l.mul(&a.l).equivalent(&b.l.mul(&b.l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Frame;

    fn asm() -> Assumptions {
        let mut a = Assumptions::new();
        let z = Expr::var("z");
        for p in [
            Expr::param("k2").sub(&Expr::param("k3").mul(&Expr::param("k4"))),
            Expr::one().add(&Expr::param("k4").mul(&z)),
        ] {
            a.assume_positive(&p);
        }
        a
    }

    fn sample_p() -> EquivParams {
        EquivParams::from_rationals(&[
            (1, 2),  // k0
            (2, 1),  // k1
            (3, 1),  // k2
            (1, 1),  // k3
            (1, 2),  // k4
            (2, 1),  // k5
            (-1, 1), // k6
            (1, 3),  // k8
            (2, 1),  // k9
            (-1, 2), // k10
        ])
    }

    fn sample_q() -> EquivParams {
        EquivParams::from_rationals(&[
            (-1, 1), // k0
            (1, 1),  // k1
            (2, 1),  // k2
            (-1, 2), // k3
            (1, 3),  // k4
            (1, 2),  // k5
            (3, 1),  // k6
            (0, 1),  // k8
            (1, 1),  // k9
            (1, 1),  // k10
        ])
    }

    #[test]
    fn moebius_matrix_composition_matches_substitution() {
        let asm = Assumptions::new();
        let frame = Frame::yz();
        let z = Expr::var("z");
        let m1 = Moebius::in_chart(Expr::int(2), Expr::int(1), Expr::rat(1, 2));
        let m2 = Moebius::in_chart(Expr::int(3), Expr::int(-1), Expr::int(1));
        let direct = m1.compose(&m2).apply(&z).unwrap();
        let inner = m2.apply(&z).unwrap();
        let b = Bindings::new().var("z", inner);
        let subst = m1.apply(&z).unwrap().substitute(&b, &frame, &asm).unwrap();
        assert!(direct.equivalent(&subst));
    }

    #[test]
    fn moebius_inverse_round_trip() {
        let m = Moebius::in_chart(Expr::int(3), Expr::int(1), Expr::int(2));
        let id = m.compose(&m.inverse()).normalize().unwrap();
        assert!(id.a.equivalent(&Expr::one()));
        assert!(id.b.is_zero());
        assert!(id.c.is_zero());
    }

    #[test]
    fn chart_boundary_detected() {
        // compose two maps whose product has d = 0
        let m1 = Moebius::in_chart(Expr::int(1), Expr::int(1), Expr::int(1));
        let m2 = Moebius::in_chart(Expr::int(1), Expr::int(-1), Expr::int(1));
        // d' = c1*b2 + d1*d2 = -1 + 1 = 0
        assert!(matches!(m1.compose(&m2).normalize(), Err(Error::ChartBoundary)));
    }

    #[test]
    fn compose_with_identity_is_identity_on_charts() {
        let asm = asm();
        let p = sample_p();
        let id = EquivParams::identity();
        let c = p.compose(&id, &asm).unwrap();
        assert!(charts_equal(
            &c.chart(&asm).unwrap(),
            &p.chart(&asm).unwrap()
        ));
        let c2 = id.compose(&p, &asm).unwrap();
        assert!(charts_equal(
            &c2.chart(&asm).unwrap(),
            &p.chart(&asm).unwrap()
        ));
    }

    #[test]
    fn composition_equals_chart_substitution() {
        let asm = asm();
        let frame = Frame::yz();
        let p = sample_p();
        let q = sample_q();
        let composed = p.compose(&q, &asm).unwrap();
        let direct = compose_charts(
            &p.chart(&asm).unwrap(),
            &q.chart(&asm).unwrap(),
            &frame,
            &asm,
        )
        .unwrap();
        assert!(charts_equal(&composed.chart(&asm).unwrap(), &direct));
    }

    #[test]
    fn inverse_composes_to_identity_chart() {
        let asm = asm();
        let frame = Frame::yz();
        let p = sample_p();
        let inv = p.inverse(&asm).unwrap();
        let c = p.compose(&inv, &asm).unwrap();
        let chart = c.chart(&asm).unwrap();
        assert!(chart.r.equivalent(&Expr::var("y")));
        assert!(chart.s.equivalent(&Expr::var("z")));
        assert!(chart.j.is_zero());
        assert!(chart.l.mul(&chart.l).equivalent(&Expr::one()));
        let _ = frame;
    }
}
