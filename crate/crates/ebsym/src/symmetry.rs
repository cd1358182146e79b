//! Lie point symmetries of the beam equation in the source chart (t, x):
//! infinitesimal generators with fourth prolongation, on-shell reduction,
//! and the finite symmetry group with its composition law.

use crate::error::{Error, Result};
use crate::expr::poly::{Atom, Poly};
use crate::expr::{Bindings, Expr, Frame, Idx2};
use crate::transform::PointTransformation;

/// The source frame: u = u(t, x), f = f(x), m = m(x).
pub fn source_frame() -> Frame {
    Frame::tx()
        .with_dep("f", [false, true])
        .with_dep("m", [false, true])
}

/// The beam operator Delta[u] = (f u_xx)_xx + m u_tt in the source frame.
pub fn beam_delta(frame: &Frame) -> Expr {
    let f = Expr::func("f");
    let m = Expr::func("m");
    let u_xx = Expr::jet("u", [0, 2]);
    let inner = f.mul(&u_xx);
    inner
        .total_derivative(1, frame)
        .total_derivative(1, frame)
        .add(&m.mul(&Expr::jet("u", [2, 0])))
}

/// A point vector field v = xi_t d/dt + xi_x d/dx + phi d/du. The
/// coefficients may involve t, x and the zeroth jet of u.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub xi_t: Expr,
    pub xi_x: Expr,
    pub phi: Expr,
}

impl VectorField {
    pub fn vertical(phi: Expr) -> Self {
        VectorField {
            xi_t: Expr::zero(),
            xi_x: Expr::zero(),
            phi,
        }
    }

    /// The characteristic Q = phi - xi_t u_t - xi_x u_x.
    pub fn characteristic(&self) -> Expr {
        self.phi
            .sub(&self.xi_t.mul(&Expr::jet("u", [1, 0])))
            .sub(&self.xi_x.mul(&Expr::jet("u", [0, 1])))
    }

    /// Prolonged coefficient phi^J = D_J Q + xi_t u_{J+t} + xi_x u_{J+x}.
    pub fn prolonged(&self, idx: Idx2, frame: &Frame) -> Expr {
        let dq = self.characteristic().d_idx(idx, frame);
        let up_t = Expr::jet("u", [idx[0] + 1, idx[1]]);
        let up_x = Expr::jet("u", [idx[0], idx[1] + 1]);
        dq.add(&self.xi_t.mul(&up_t)).add(&self.xi_x.mul(&up_x))
    }

    /// Apply the fourth prolongation to an expression of jet order <= 4,
    /// using the characteristic form
    /// pr v (e) = xi_t D_t e + xi_x D_x e + sum_J (D_J Q) de/du_J.
    pub fn apply_prolonged(&self, e: &Expr, frame: &Frame) -> Expr {
        let q = self.characteristic();
        let mut out = self
            .xi_t
            .mul(&e.total_derivative(0, frame))
            .add(&self.xi_x.mul(&e.total_derivative(1, frame)));
        for a in 0..=4u32 {
            for b in 0..=(4 - a) {
                let atom = Atom::Jet("u".to_string(), [a, b]);
                let de = e.partial_atom(&atom);
                if de.is_zero() {
                    continue;
                }
                out = out.add(&q.d_idx([a, b], frame).mul(&de));
            }
        }
        out
    }
}

fn jets_with_high_t_order(p: &Poly, found: &mut Vec<Idx2>) {
    for mono in p.0.keys() {
        for atom in mono.0.keys() {
            match atom {
                Atom::Jet(f, idx) if f == "u" && idx[0] >= 2 => {
                    if !found.contains(idx) {
                        found.push(*idx);
                    }
                }
                Atom::Rad(q, _) => jets_with_high_t_order(q, found),
                Atom::Apply(_, _, args) => {
                    for a in args {
                        jets_with_high_t_order(a.num(), found);
                    }
                }
                _ => {}
            }
        }
    }
}

/// Reduce an expression modulo the equation: every jet u_{(a,b)} with a >= 2
/// is replaced by the corresponding total derivative of
/// u_tt = -(f u_xx)_xx / m.
pub fn reduce_on_shell(e: &Expr, frame: &Frame) -> Result<Expr> {
    let f = Expr::func("f");
    let m = Expr::func("m");
    let inner = f.mul(&Expr::jet("u", [0, 2]));
    let rhs = inner
        .total_derivative(1, frame)
        .total_derivative(1, frame)
        .neg()
        .div(&m)?;
    let mut cur = e.clone();
    for _ in 0..12 {
        let mut offending = Vec::new();
        jets_with_high_t_order(cur.num(), &mut offending);
        for p in cur.den().keys() {
            jets_with_high_t_order(p, &mut offending);
        }
        if offending.is_empty() {
            return Ok(cur);
        }
        let mut b = Bindings::new();
        for idx in offending {
            b = b.jet("u", idx, rhs.d_idx([idx[0] - 2, idx[1]], frame));
        }
        cur = cur.substitute(&b, frame, &crate::expr::Assumptions::new())?;
    }
    Err(Error::NonInvertible("on-shell reduction did not terminate".into()))
}

/// The on-shell residual of pr^(4) v applied to the beam operator. The field
/// is a symmetry exactly when this vanishes identically.
pub fn symmetry_defect(v: &VectorField, frame: &Frame) -> Result<Expr> {
    let delta = beam_delta(frame);
    let e = v.apply_prolonged(&delta, frame);
    reduce_on_shell(&e, frame)
}

pub fn is_symmetry(v: &VectorField, frame: &Frame) -> Result<bool> {
    Ok(symmetry_defect(v, frame)?.is_zero())
}

/// Parameters of the symmetry group: u-scaling p5, t-translation p6, and the
/// four-parameter affine family p1 tx + p2 t + p3 x + p4 added to u.
#[derive(Debug, Clone)]
pub struct SymmetryParams {
    pub p: [Expr; 6],
}

impl SymmetryParams {
    pub fn identity() -> Self {
        let mut p = [
            Expr::zero(),
            Expr::zero(),
            Expr::zero(),
            Expr::zero(),
            Expr::one(),
            Expr::zero(),
        ];
        p[4] = Expr::one();
        SymmetryParams { p }
    }

    pub fn symbolic() -> Self {
        SymmetryParams {
            p: std::array::from_fn(|i| Expr::param(&format!("p{}", i + 1))),
        }
    }

    pub fn from_ints(v: [i64; 6]) -> Self {
        SymmetryParams {
            p: std::array::from_fn(|i| Expr::int(v[i])),
        }
    }

    fn p(&self, i: usize) -> &Expr {
        &self.p[i - 1]
    }

    /// The affine inhomogeneity J = p2 t + p4 + x (p1 t + p3), written in the
    /// chart variables (y, z) standing for (t, x).
    pub fn j_part(&self) -> Expr {
        let y = Expr::var("y");
        let z = Expr::var("z");
        self.p(2)
            .mul(&y)
            .add(self.p(4))
            .add(&z.mul(&self.p(1).mul(&y).add(self.p(3))))
    }

    /// The generator of the one-parameter subgroups through these values:
    /// v = p6 d/dt + (p4 + p2 t + p3 x + p1 tx + p5 u) d/du.
    pub fn generator(&self) -> VectorField {
        let t = Expr::var("t");
        let x = Expr::var("x");
        let u = Expr::jet("u", [0, 0]);
        let phi = self
            .p(4)
            .add(&self.p(2).mul(&t))
            .add(&self.p(3).mul(&x))
            .add(&self.p(1).mul(&t).mul(&x))
            .add(&self.p(5).mul(&u));
        VectorField {
            xi_t: self.p(6).clone(),
            xi_x: Expr::zero(),
            phi,
        }
    }

    /// The finite transformation t = y + p6, x = z, u = p5 w + J.
    pub fn finite(&self) -> Result<PointTransformation> {
        if self.p(5).is_zero() {
            return Err(Error::NonInvertible("u-scaling p5 must be nonzero".into()));
        }
        let y = Expr::var("y");
        let z = Expr::var("z");
        Ok(PointTransformation::new(
            y.add(self.p(6)),
            z,
            self.p(5).clone(),
            self.j_part(),
        ))
    }

    /// Group law: the composite acts as outer after inner. Translations add,
    /// scalings multiply, and the affine part transforms affinely.
    pub fn compose(&self, inner: &SymmetryParams) -> Result<SymmetryParams> {
        let frame = Frame::yz();
        let y = Expr::var("y");
        // J_outer evaluated at the inner image (t, x) = (y + q6, z)
        let shifted = self.j_part().substitute(
            &Bindings::new().var("y", y.add(inner.p(6))),
            &frame,
            &crate::expr::Assumptions::new(),
        )?;
        let j = self.p(5).mul(&inner.j_part()).add(&shifted);
        let p5 = self.p(5).mul(inner.p(5));
        let p6 = self.p(6).add(inner.p(6));
        params_from_affine(&j, p5, p6)
    }

    pub fn inverse(&self) -> Result<SymmetryParams> {
        let frame = Frame::yz();
        let y = Expr::var("y");
        let p5 = Expr::one().div(self.p(5))?;
        let p6 = self.p(6).neg();
        // solve p5 w + J(t, x) = u for w at (t, x) = (y - p6_new, z)
        let shifted = self.j_part().substitute(
            &Bindings::new().var("y", y.sub(self.p(6))),
            &frame,
            &crate::expr::Assumptions::new(),
        )?;
        let j = shifted.neg().div(self.p(5))?;
        params_from_affine(&j, p5, p6)
    }
}

/// Recover p1..p4 from an affine J = p2 y + p4 + z (p1 y + p3).
fn params_from_affine(j: &Expr, p5: Expr, p6: Expr) -> Result<SymmetryParams> {
    let frame = Frame::yz();
    let asm = crate::expr::Assumptions::new();
    let at = |e: &Expr, yv: i64, zv: i64| -> Result<Expr> {
        e.substitute(
            &Bindings::new()
                .var("y", Expr::int(yv))
                .var("z", Expr::int(zv)),
            &frame,
            &asm,
        )
    };
    let p4 = at(j, 0, 0)?;
    let p2 = at(j, 1, 0)?.sub(&p4);
    let p3 = at(j, 0, 1)?.sub(&p4);
    let p1 = at(j, 1, 1)?.sub(&p4).sub(&p2).sub(&p3);
    // confirm the fit: J must be exactly affine of this shape
    let y = Expr::var("y");
    let z = Expr::var("z");
    let rebuilt = p2
        .mul(&y)
        .add(&p4)
        .add(&z.mul(&p1.mul(&y).add(&p3)));
    if !rebuilt.equivalent(j) {
        return Err(Error::NonInvertible("inhomogeneity is not of the affine symmetry form".into()));
    }
    Ok(SymmetryParams {
        p: [p1, p2, p3, p4, p5, p6],
    })
}

pub fn symmetry_params_equal(a: &SymmetryParams, b: &SymmetryParams) -> bool {
    a.p.iter().zip(&b.p).all(|(x, y)| x.equivalent(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Assumptions;
    use crate::transform::{transform_pde, verify_eb_form, EbEquation};

    #[test]
    fn prolongation_of_tx_vertical_field() {
        // frozen oracle: v = t x d/du has phi^{tx} = 1 and no other
        // second-or-higher coefficients
        let frame = source_frame();
        let v = VectorField::vertical(Expr::var("t").mul(&Expr::var("x")));
        assert!(v.prolonged([1, 1], &frame).equivalent(&Expr::one()));
        for idx in [[2, 0], [0, 2], [0, 4], [2, 2]] {
            assert!(v.prolonged(idx, &frame).is_zero(), "phi^{:?}", idx);
        }
    }

    #[test]
    fn prolongation_tracks_scaling() {
        // v = u d/du prolongs to phi^J = u_J
        let frame = source_frame();
        let v = VectorField::vertical(Expr::jet("u", [0, 0]));
        for idx in [[1, 0], [0, 2], [2, 0], [0, 4]] {
            assert!(v.prolonged(idx, &frame).equivalent(&Expr::jet("u", idx)));
        }
    }

    #[test]
    fn full_generator_is_a_symmetry() {
        let frame = source_frame();
        let v = SymmetryParams::symbolic().generator();
        assert!(is_symmetry(&v, &frame).unwrap());
    }

    #[test]
    fn time_translation_is_a_symmetry_but_x_scaling_is_not() {
        let frame = source_frame();
        let dt = VectorField {
            xi_t: Expr::one(),
            xi_x: Expr::zero(),
            phi: Expr::zero(),
        };
        assert!(is_symmetry(&dt, &frame).unwrap());
        let x_scale = VectorField {
            xi_t: Expr::zero(),
            xi_x: Expr::var("x"),
            phi: Expr::zero(),
        };
        assert!(!is_symmetry(&x_scale, &frame).unwrap());
    }

    #[test]
    fn affine_inhomogeneity_solves_the_equation() {
        // J = p2 t + p4 + x (p1 t + p3) has vanishing u_xx and u_tt
        let frame = source_frame();
        let j = SymmetryParams::symbolic().j_part();
        // move into (t, x) naming for the check
        let asm = Assumptions::new();
        let jtx = j
            .substitute(
                &Bindings::new()
                    .var("y", Expr::var("t"))
                    .var("z", Expr::var("x")),
                &frame,
                &asm,
            )
            .unwrap();
        let b = Bindings::new().func("u", jtx);
        let residual = beam_delta(&frame).substitute(&b, &frame, &asm).unwrap();
        assert!(residual.is_zero());
    }

    #[test]
    fn finite_symmetry_preserves_the_equation() {
        let frame = Frame::yz();
        let t = SymmetryParams::symbolic().finite().unwrap();
        let pde = transform_pde(&EbEquation::classic(), &t, &frame).unwrap();
        assert!(pde.inhom.is_zero());
        let f = Expr::apply("f", vec![0], vec![Expr::var("z")]);
        let m = Expr::apply("m", vec![0], vec![Expr::var("z")]);
        let mu = verify_eb_form(&pde, &f, &m, &frame).unwrap();
        // gauge factor is exactly the u-scaling
        assert!(mu.unwrap().equivalent(&Expr::param("p5")));
    }

    #[test]
    fn superposition_with_a_solution_is_a_symmetry() {
        // u = w + h(t, x) leaves the equation unchanged and shifts it by
        // Delta[h], so the shift vanishes exactly when h is a solution
        let frame = Frame::yz();
        let t = PointTransformation::new(
            Expr::var("y"),
            Expr::var("z"),
            Expr::one(),
            Expr::func("h"),
        );
        let pde = transform_pde(&EbEquation::classic(), &t, &frame).unwrap();
        let f = Expr::apply("f", vec![0], vec![Expr::var("z")]);
        let m = Expr::apply("m", vec![0], vec![Expr::var("z")]);
        // the homogeneous part is untouched
        let mut homog = pde.clone();
        homog.inhom = Expr::zero();
        let mu = verify_eb_form(&homog, &f, &m, &frame).unwrap().unwrap();
        assert!(mu.equivalent(&Expr::one()));
        // the inhomogeneity is the beam operator applied to h
        let expected = f
            .mul(&Expr::jet("h", [0, 2]))
            .d_idx([0, 2], &frame)
            .add(&m.mul(&Expr::jet("h", [2, 0])));
        assert!(pde.inhom.equivalent(&expected));
    }

    #[test]
    fn degenerate_scaling_is_rejected() {
        let mut p = SymmetryParams::identity();
        p.p[4] = Expr::zero();
        assert!(matches!(p.finite(), Err(Error::NonInvertible(_))));
    }

    #[test]
    fn group_law_translations_add_and_scalings_multiply() {
        let a = SymmetryParams::from_ints([1, 2, 3, 4, 5, 6]);
        let b = SymmetryParams::from_ints([-2, 1, 0, 7, 3, -1]);
        let c = a.compose(&b).unwrap();
        assert!(c.p[4].equivalent(&Expr::int(15)));
        assert!(c.p[5].equivalent(&Expr::int(5)));
        // composition matches chart composition
        let frame = Frame::yz();
        let asm = Assumptions::new();
        let ta = a.finite().unwrap();
        let tb = b.finite().unwrap();
        let tc = c.finite().unwrap();
        let composed = crate::group::compose_charts(&ta, &tb, &frame, &asm).unwrap();
        assert!(crate::group::charts_equal(&composed, &tc));
    }

    #[test]
    fn inverse_composes_to_identity() {
        let a = SymmetryParams::from_ints([1, -2, 3, 0, 2, 5]);
        let inv = a.inverse().unwrap();
        let id = a.compose(&inv).unwrap();
        assert!(symmetry_params_equal(&id, &SymmetryParams::identity()));
        let id2 = inv.compose(&a).unwrap();
        assert!(symmetry_params_equal(&id2, &SymmetryParams::identity()));
    }

    #[test]
    fn finite_action_linearizes_to_the_generator() {
        // with p5 = 1 + eps and the affine part scaled by eps, the image
        // equation is (1 + eps) times the original: the first-order term in
        // eps acts exactly like the vertical generator
        let frame = Frame::yz();
        let eps = Expr::param("eps");
        let mut p = SymmetryParams::symbolic();
        for i in 0..4 {
            p.p[i] = p.p[i].mul(&eps);
        }
        p.p[4] = Expr::one().add(&eps);
        p.p[5] = Expr::zero();
        let t = p.finite().unwrap();
        let pde = transform_pde(&EbEquation::classic(), &t, &frame).unwrap();
        assert!(pde.inhom.is_zero());
        let scale = Expr::one().add(&eps);
        let base = transform_pde(
            &EbEquation::classic(),
            &SymmetryParams::identity().finite().unwrap(),
            &frame,
        )
        .unwrap();
        for (idx, c) in &pde.coeffs {
            assert!(c.equivalent(&scale.mul(&base.coeff(idx.0))));
        }
    }
}
