//! Deterministic pretty-printer. The output reparses to the same canonical
//! expression (see the parser round-trip property).

use num::traits::{One, Signed};
use num::BigRational;

use super::canon::Expr;
use super::frame::Frame;
use super::poly::{Atom, Mono, Poly};

impl Expr {
    pub fn pretty(&self, frame: &Frame) -> String {
        if self.num.is_zero() {
            return "0".to_string();
        }
        let num = poly_str(&self.num, frame);
        if self.den.is_empty() {
            return num;
        }
        let mut den_parts: Vec<String> = Vec::new();
        for (f, &e) in &self.den {
            let base = format!("({})", poly_str(f, frame));
            if e == 1 {
                den_parts.push(base);
            } else {
                den_parts.push(format!("{}^{}", base, e));
            }
        }
        // multiple factors need an extra paren layer so `/` keeps them all
        let den = if den_parts.len() > 1 {
            format!("({})", den_parts.join("*"))
        } else {
            den_parts.pop().unwrap()
        };
        let num_wrapped = if self.num.0.len() > 1 {
            format!("({})", num)
        } else {
            num
        };
        format!("{}/{}", num_wrapped, den)
    }
}

fn rat_str(c: &BigRational) -> String {
    if c.is_integer() {
        format!("{}", c.numer())
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

pub(crate) fn poly_str(p: &Poly, frame: &Frame) -> String {
    let mut out = String::new();
    // descending so the lex-leading term comes first
    for (i, (mono, coeff)) in p.0.iter().rev().enumerate() {
        let mag = coeff.abs();
        if i == 0 {
            if coeff.is_negative() {
                out.push('-');
            }
        } else if coeff.is_negative() {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        out.push_str(&term_str(mono, &mag, frame));
    }
    out
}

fn term_str(mono: &Mono, mag: &BigRational, frame: &Frame) -> String {
    let mut parts: Vec<String> = Vec::new();
    if mono.is_one() || !mag.is_one() {
        parts.push(rat_str(mag));
    }
    for (a, &e) in &mono.0 {
        parts.push(atom_pow_str(a, e, frame));
    }
    parts.join("*")
}

fn atom_pow_str(a: &Atom, e: u32, frame: &Frame) -> String {
    match a {
        Atom::Rad(base, r) => {
            format!("({})^({}/{})", poly_str(base, frame), e, r)
        }
        _ => {
            let s = atom_str(a, frame);
            if e == 1 {
                s
            } else {
                format!("{}^{}", s, e)
            }
        }
    }
}

fn atom_str(a: &Atom, frame: &Frame) -> String {
    match a {
        Atom::Var(v) | Atom::Param(v) => v.clone(),
        Atom::Jet(f, idx) => {
            if *idx == [0, 0] {
                f.clone()
            } else {
                let mut s = format!("{}_", f);
                for _ in 0..idx[0] {
                    s.push_str(&frame.vars[0]);
                }
                for _ in 0..idx[1] {
                    s.push_str(&frame.vars[1]);
                }
                s
            }
        }
        Atom::Apply(f, dord, args) => {
            let args_s: Vec<String> = args.iter().map(|e| e.pretty(frame)).collect();
            let head = match dord.as_slice() {
                [0] => f.clone(),
                [d] if *d <= 3 => format!("{}{}", f, "'".repeat(*d as usize)),
                [d] => format!("{}^({})", f, d),
                d2 => {
                    if d2.iter().all(|&k| k == 0) {
                        f.clone()
                    } else {
                        let tags: Vec<String> = d2.iter().map(|k| k.to_string()).collect();
                        format!("{}^({})", f, tags.join(","))
                    }
                }
            };
            format!("{}({})", head, args_s.join(", "))
        }
        Atom::Rad(_, _) => unreachable!("handled in atom_pow_str"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_forms() {
        let fr = Frame::yz();
        let e = Expr::param("a")
            .mul(&Expr::jet("w", [0, 4]))
            .sub(&Expr::rat(3, 2).mul(&Expr::func("w")));
        let s = e.pretty(&fr);
        assert!(s.contains("w_zzzz"));
        assert!(s.contains("3/2"));
        assert_eq!(Expr::zero().pretty(&fr), "0");
    }

    #[test]
    fn quotient_and_radical() {
        let fr = Frame::yz();
        let asm = super::super::assume::Assumptions::new();
        let e = Expr::jet("S", [0, 1])
            .sqrt(&asm)
            .unwrap()
            .div(&Expr::jet("R", [1, 0]).powi(2).unwrap())
            .unwrap();
        let s = e.pretty(&fr);
        assert_eq!(s, "(S_z)^(1/2)/(R_y)^2");
    }
}
