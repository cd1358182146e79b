//! First-order differential operators on the jet space of the active chart,
//! and the change-of-variables solve that expresses the source derivatives
//! through the target ones.

use crate::error::{Error, Result};
use crate::expr::{Expr, Frame};

/// A linear first-order operator `sum_i c_i * D_i` where `D_i` is the total
/// derivative in frame direction `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinOp {
    pub terms: Vec<(Expr, usize)>,
}

impl LinOp {
    pub fn new(terms: Vec<(Expr, usize)>) -> Self {
        LinOp { terms }
    }

    /// Total derivative in a single direction.
    pub fn total(slot: usize) -> Self {
        LinOp {
            terms: vec![(Expr::one(), slot)],
        }
    }

    /// Apply the operator to an expression.
    pub fn apply(&self, e: &Expr, frame: &Frame) -> Expr {
        let mut acc = Expr::zero();
        for (c, slot) in &self.terms {
            acc = acc.add(&c.mul(&e.total_derivative(*slot, frame)));
        }
        acc
    }

    /// Apply the operator `n` times. Coefficients are differentiated along
    /// the way, so this is a genuine operator power, not a pointwise one.
    pub fn power(&self, e: &Expr, n: u32, frame: &Frame) -> Expr {
        let mut acc = e.clone();
        for _ in 0..n {
            acc = self.apply(&acc, frame);
        }
        acc
    }
}

/// Invert the chain-rule system for a point change of the independent
/// variables `t = R(y,z)`, `x = S(y,z)`:
///
///   D_y = R_y dt + S_y dx
///   D_z = R_z dt + S_z dx
///
/// Returns `(dt, dx)` as operators in the `(y, z)` directions, by Cramer on
/// the Jacobian `w = R_y S_z - R_z S_y`. Fails when the Jacobian vanishes
/// identically. `r` and `s` may be unknown functions or concrete expressions.
pub fn solve_operator_system(r: &Expr, s: &Expr, frame: &Frame) -> Result<(LinOp, LinOp)> {
    let ry = r.total_derivative(0, frame);
    let rz = r.total_derivative(1, frame);
    let sy = s.total_derivative(0, frame);
    let sz = s.total_derivative(1, frame);

    let jac = ry.mul(&sz).sub(&rz.mul(&sy));
    if jac.is_zero() {
        return Err(Error::SingularJacobian);
    }

    let dt = LinOp::new(vec![
        (sz.div(&jac)?, 0),
        (sy.div(&jac)?.neg(), 1),
    ]);
    let dx = LinOp::new(vec![
        (rz.div(&jac)?.neg(), 0),
        (ry.div(&jac)?, 1),
    ]);
    Ok((dt, dx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame() -> Frame {
        Frame::yz()
            .with_dep("R", [true, false])
            .with_dep("S", [false, true])
            .with_dep("h", [false, true])
    }

    fn ops(fr: &Frame) -> (LinOp, LinOp) {
        solve_operator_system(&Expr::func("R"), &Expr::func("S"), fr).unwrap()
    }

    #[test]
    fn operators_annihilate_the_opposite_variable() {
        let fr = frame();
        let (dt, dx) = ops(&fr);
        let r = Expr::func("R");
        let s = Expr::func("S");
        assert!(dt.apply(&r, &fr).equivalent(&Expr::one()));
        assert!(dt.apply(&s, &fr).is_zero());
        assert!(dx.apply(&s, &fr).equivalent(&Expr::one()));
        assert!(dx.apply(&r, &fr).is_zero());
    }

    #[test]
    fn general_chart_round_trip() {
        // R and S both depend on (y, z); the solved operators still invert
        // the chain rule exactly.
        let fr = Frame::yz();
        let (dt, dx) = ops(&fr);
        let w = Expr::func("w");
        // D_y w = R_y (dt w) + S_y (dx w)
        let ry = Expr::jet("R", [1, 0]);
        let sy = Expr::jet("S", [1, 0]);
        let lhs = w.total_derivative(0, &fr);
        let rhs = ry.mul(&dt.apply(&w, &fr)).add(&sy.mul(&dx.apply(&w, &fr)));
        assert!(lhs.equivalent(&rhs));
    }

    #[test]
    fn singular_jacobian_detected() {
        // S a function of y only and R of y only: the Jacobian is
        // identically zero.
        let fr = Frame::yz()
            .with_dep("R", [true, false])
            .with_dep("S", [true, false]);
        assert!(matches!(
            solve_operator_system(&Expr::func("R"), &Expr::func("S"), &fr),
            Err(Error::SingularJacobian)
        ));
    }

    #[test]
    fn second_power_in_separated_chart() {
        // Frozen expected value: with S = S(z),
        //   ((1/S_z) D_z)^2 w = w_zz / S_z^2 - S_zz w_z / S_z^3.
        let fr = frame();
        let (_, dx) = ops(&fr);
        let w = Expr::func("w");
        let got = dx.power(&w, 2, &fr);
        let sz = Expr::jet("S", [0, 1]);
        let szz = Expr::jet("S", [0, 2]);
        let expect = Expr::jet("w", [0, 2])
            .div(&sz.powi(2).unwrap())
            .unwrap()
            .sub(
                &szz.mul(&Expr::jet("w", [0, 1]))
                    .div(&sz.powi(3).unwrap())
                    .unwrap(),
            );
        assert!(got.equivalent(&expect));
    }

    #[test]
    fn fourth_power_leading_coefficient() {
        // In the separated chart the 4th power of dx applied to w has
        // w_zzzz coefficient 1/S_z^4.
        let fr = frame();
        let (_, dx) = ops(&fr);
        let w = Expr::func("w");
        let got = dx.power(&w, 4, &fr);
        let (coeffs, rest) = got.collect_jets("w").unwrap();
        assert!(rest.is_zero());
        let lead = coeffs.get(&crate::expr::JetIdx([0, 4])).unwrap();
        let sz4 = Expr::jet("S", [0, 1]).powi(4).unwrap();
        assert!(lead.mul(&sz4).equivalent(&Expr::one()));
    }
}
