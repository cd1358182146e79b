//! Small infix expression grammar: identifiers, exact rationals,
//! `+ - * / ^`, function application `f(x)`, jet suffixes like `R_yy`, and
//! total derivatives `D[y](expr)`. `^` is right-associative and unary minus
//! binds tighter than `+`.

use std::collections::BTreeSet;

use num::bigint::BigInt;
use num::traits::One;
use num::BigRational;

use crate::error::{Error, Result};
use crate::expr::ast::{Ast, Sym};
use crate::expr::{Assumptions, Expr, Frame};

/// Symbol classification used while parsing: frame variables, declared jet
/// functions, everything else a parameter.
#[derive(Debug, Clone)]
pub struct SymTable {
    pub frame: Frame,
    pub funcs: BTreeSet<String>,
}

impl SymTable {
    pub fn new(frame: Frame) -> Self {
        let funcs = ["R", "S", "L", "J", "h", "w", "u", "F", "M"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        SymTable { frame, funcs }
    }

    pub fn with_func(mut self, name: &str) -> Self {
        self.funcs.insert(name.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Prime(usize),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
}

fn lex(src: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                out.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                out.push(Tok::Star);
                i += 1;
            }
            '/' => {
                out.push(Tok::Slash);
                i += 1;
            }
            '^' => {
                out.push(Tok::Caret);
                i += 1;
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            '[' => {
                out.push(Tok::LBracket);
                i += 1;
            }
            ']' => {
                out.push(Tok::RBracket);
                i += 1;
            }
            ',' => {
                out.push(Tok::Comma);
                i += 1;
            }
            '\'' => {
                let mut n = 0;
                while i < chars.len() && chars[i] == '\'' {
                    n += 1;
                    i += 1;
                }
                out.push(Tok::Prime(n));
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                out.push(Tok::Num(parse_number(&text)?));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Tok::Ident(chars[start..i].iter().collect()));
            }
            other => return Err(Error::Parse(format!("unexpected character '{}'", other))),
        }
    }
    Ok(out)
}

fn parse_number(text: &str) -> Result<BigRational> {
    if let Some(dot) = text.find('.') {
        let int_part = &text[..dot];
        let frac_part = &text[dot + 1..];
        if frac_part.contains('.') {
            return Err(Error::Parse(format!("bad number '{}'", text)));
        }
        let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
        let int_v: BigInt = if int_part.is_empty() {
            BigInt::from(0)
        } else {
            int_part
                .parse()
                .map_err(|_| Error::Parse(format!("bad number '{}'", text)))?
        };
        let frac_v: BigInt = if frac_part.is_empty() {
            BigInt::from(0)
        } else {
            frac_part
                .parse()
                .map_err(|_| Error::Parse(format!("bad number '{}'", text)))?
        };
        Ok(BigRational::new(int_v * &scale + frac_v, scale))
    } else {
        let v: BigInt = text
            .parse()
            .map_err(|_| Error::Parse(format!("bad number '{}'", text)))?;
        Ok(BigRational::from_integer(v))
    }
}

struct Parser<'a> {
    toks: Vec<Tok>,
    pos: usize,
    table: &'a SymTable,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok) -> Result<()> {
        match self.next() {
            Some(got) if got == t => Ok(()),
            got => Err(Error::Parse(format!("expected {:?}, got {:?}", t, got))),
        }
    }

    fn expr(&mut self) -> Result<Ast> {
        let mut terms = vec![self.term()?];
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.next();
                    terms.push(self.term()?);
                }
                Some(Tok::Minus) => {
                    self.next();
                    terms.push(self.term()?.neg());
                }
                _ => break,
            }
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Ast::Sum(terms)
        })
    }

    fn term(&mut self) -> Result<Ast> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.next();
                    let rhs = self.unary()?;
                    acc = Ast::Product(vec![acc, rhs]);
                }
                Some(Tok::Slash) => {
                    self.next();
                    let rhs = self.unary()?;
                    acc = Ast::Product(vec![acc, Ast::Power(Box::new(rhs), -BigRational::one())]);
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Ast> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.next();
            return Ok(self.unary()?.neg());
        }
        self.power()
    }

    fn power(&mut self) -> Result<Ast> {
        let base = self.primary()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            let save = self.pos;
            self.next();
            match self.exponent() {
                Ok(q) => return Ok(Ast::Power(Box::new(base), q)),
                Err(_) => {
                    self.pos = save;
                }
            }
        }
        Ok(base)
    }

    /// Exact rational exponent: `2`, `-2`, `(1/2)`, `(-3/2)`.
    fn exponent(&mut self) -> Result<BigRational> {
        let neg = if matches!(self.peek(), Some(Tok::Minus)) {
            self.next();
            true
        } else {
            false
        };
        let q = match self.next() {
            Some(Tok::Num(n)) => n,
            Some(Tok::LParen) => {
                let inner_neg = if matches!(self.peek(), Some(Tok::Minus)) {
                    self.next();
                    true
                } else {
                    false
                };
                let n = match self.next() {
                    Some(Tok::Num(n)) => n,
                    got => return Err(Error::Parse(format!("bad exponent: {:?}", got))),
                };
                let v = if matches!(self.peek(), Some(Tok::Slash)) {
                    self.next();
                    let d = match self.next() {
                        Some(Tok::Num(d)) => d,
                        got => return Err(Error::Parse(format!("bad exponent: {:?}", got))),
                    };
                    n / d
                } else {
                    n
                };
                self.expect(Tok::RParen)?;
                if inner_neg {
                    -v
                } else {
                    v
                }
            }
            got => return Err(Error::Parse(format!("bad exponent: {:?}", got))),
        };
        Ok(if neg { -q } else { q })
    }

    fn args(&mut self) -> Result<Vec<Ast>> {
        self.expect(Tok::LParen)?;
        let mut args = vec![self.expr()?];
        while matches!(self.peek(), Some(Tok::Comma)) {
            self.next();
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen)?;
        Ok(args)
    }

    fn primary(&mut self) -> Result<Ast> {
        match self.next() {
            Some(Tok::Num(n)) => Ok(Ast::Const(n)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => self.ident(name),
            got => Err(Error::Parse(format!("unexpected token {:?}", got))),
        }
    }

    fn ident(&mut self, name: String) -> Result<Ast> {
        // D[y](expr): total derivative
        if name == "D" && matches!(self.peek(), Some(Tok::LBracket)) {
            self.next();
            let var = match self.next() {
                Some(Tok::Ident(v)) => v,
                got => return Err(Error::Parse(format!("bad derivative direction {:?}", got))),
            };
            self.expect(Tok::RBracket)?;
            let mut args = self.args()?;
            if args.len() != 1 {
                return Err(Error::Parse("D[...] takes one argument".into()));
            }
            return Ok(Ast::Deriv(var, Box::new(args.pop().unwrap())));
        }
        // f'(x), f''(x)
        if let Some(Tok::Prime(n)) = self.peek().cloned() {
            self.next();
            let args = self.args()?;
            return Ok(Ast::Apply(name, vec![n as u32], args));
        }
        // f^(a)(x) or f^(a,b)(x,y): derivative tag, distinguished from a
        // power by the second parenthesis group
        if matches!(self.peek(), Some(Tok::Caret)) {
            let save = self.pos;
            self.next();
            if matches!(self.peek(), Some(Tok::LParen)) {
                if let Ok(tag) = self.deriv_tag() {
                    if matches!(self.peek(), Some(Tok::LParen)) {
                        let args = self.args()?;
                        if args.len() == tag.len() {
                            return Ok(Ast::Apply(name, tag, args));
                        }
                    }
                }
            }
            self.pos = save;
        }
        // plain application f(x)
        if matches!(self.peek(), Some(Tok::LParen)) && !self.is_known_symbol(&name) {
            let args = self.args()?;
            let dord = vec![0; args.len()];
            return Ok(Ast::Apply(name, dord, args));
        }
        self.symbol(name)
    }

    fn deriv_tag(&mut self) -> Result<Vec<u32>> {
        self.expect(Tok::LParen)?;
        let mut tag = Vec::new();
        loop {
            match self.next() {
                Some(Tok::Num(n)) if n.is_integer() => {
                    tag.push(n.to_integer().try_into().map_err(|_| Error::Parse("tag too large".into()))?)
                }
                got => return Err(Error::Parse(format!("bad derivative tag {:?}", got))),
            }
            match self.next() {
                Some(Tok::Comma) => continue,
                Some(Tok::RParen) => break,
                got => return Err(Error::Parse(format!("bad derivative tag {:?}", got))),
            }
        }
        Ok(tag)
    }

    fn is_known_symbol(&self, name: &str) -> bool {
        self.table.frame.slot(name).is_some() || self.table.funcs.contains(name)
    }

    fn symbol(&mut self, name: String) -> Result<Ast> {
        // jet suffix: R_yy
        if let Some(pos) = name.find('_') {
            let (func, suffix) = name.split_at(pos);
            let suffix = &suffix[1..];
            let v0 = &self.table.frame.vars[0];
            let v1 = &self.table.frame.vars[1];
            let mut idx = [0u32, 0u32];
            let mut ok = !suffix.is_empty();
            for ch in suffix.chars() {
                let s = ch.to_string();
                if &s == v0 {
                    idx[0] += 1;
                } else if &s == v1 {
                    idx[1] += 1;
                } else {
                    ok = false;
                    break;
                }
            }
            if ok {
                return Ok(Ast::Sym(Sym::Jet(func.to_string(), idx)));
            }
            return Err(Error::Parse(format!("bad jet suffix in '{}'", name)));
        }
        if self.table.frame.slot(&name).is_some() {
            return Ok(Ast::Sym(Sym::Var(name)));
        }
        if self.table.funcs.contains(&name) {
            return Ok(Ast::Sym(Sym::Jet(name, [0, 0])));
        }
        Ok(Ast::Sym(Sym::Param(name)))
    }
}

/// Parse source text to a raw tree.
pub fn parse_ast(src: &str, table: &SymTable) -> Result<Ast> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, table };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(Error::Parse(format!("trailing input at token {}", p.pos)));
    }
    Ok(e)
}

/// Parse and normalize in one step.
pub fn parse_expr(src: &str, table: &SymTable, asm: &Assumptions) -> Result<Expr> {
    parse_ast(src, table)?.normalize(&table.frame, asm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> SymTable {
        SymTable::new(Frame::yz())
    }

    #[test]
    fn arithmetic_and_precedence() {
        let t = table();
        let asm = Assumptions::new();
        let e = parse_expr("3/2*k1 + z^2 - -z", &t, &asm).unwrap();
        let expect = Expr::rat(3, 2)
            .mul(&Expr::param("k1"))
            .add(&Expr::var("z").powi(2).unwrap())
            .add(&Expr::var("z"));
        assert_eq!(e, expect);
        // unary minus binds tighter than +, looser than ^
        let e2 = parse_expr("-z^2", &t, &asm).unwrap();
        assert_eq!(e2, Expr::var("z").powi(2).unwrap().neg());
    }

    #[test]
    fn jets_and_applications() {
        let t = table();
        let asm = Assumptions::new();
        let e = parse_expr("2*R_y*L_y - L*R_yy", &t, &asm).unwrap();
        let expect = Expr::int(2)
            .mul(&Expr::jet("R", [1, 0]))
            .mul(&Expr::jet("L", [1, 0]))
            .sub(&Expr::func("L").mul(&Expr::jet("R", [2, 0])));
        assert_eq!(e, expect);
        let f = parse_expr("f''(S)*S_z^4", &t, &asm).unwrap();
        let expect_f = Expr::apply("f", vec![2], vec![Expr::func("S")])
            .mul(&Expr::jet("S", [0, 1]).powi(4).unwrap());
        assert_eq!(f, expect_f);
        let g = parse_expr("f^(1,0)(R, S)", &t, &asm).unwrap();
        assert_eq!(
            g,
            Expr::apply("f", vec![1, 0], vec![Expr::func("R"), Expr::func("S")])
        );
    }

    #[test]
    fn rational_powers_and_derivatives() {
        let t = table();
        let asm = Assumptions::new();
        let e = parse_expr("S_z^(1/2)", &t, &asm).unwrap();
        assert_eq!(e, Expr::jet("S", [0, 1]).sqrt(&asm).unwrap());
        let d = parse_expr("D[z](w_y)", &t, &asm).unwrap();
        assert_eq!(d, Expr::jet("w", [1, 1]));
        let q = parse_expr("(k2*z + k3)/(k4*z + 1)", &t, &asm).unwrap();
        let num = Expr::param("k2").mul(&Expr::var("z")).add(&Expr::param("k3"));
        let den = Expr::param("k4").mul(&Expr::var("z")).add(&Expr::one());
        assert_eq!(q, num.div(&den).unwrap());
    }

    #[test]
    fn print_parse_roundtrip() {
        let t = table();
        let asm = Assumptions::new();
        for src in [
            "(f(S)*R_z^4*L)/(R_y^4*S_z^4)",
            "3*S_zz^2 - 2*S_z*S_zzz",
            "k1*S_z^(1/2)*R_y^(1/2)",
            "w_yz/(1 + k4*z)^2 - 7/3",
        ] {
            let e = parse_expr(src, &t, &asm).unwrap();
            let printed = e.pretty(&t.frame);
            let back = parse_expr(&printed, &t, &asm).unwrap();
            assert_eq!(e, back, "roundtrip failed for {} -> {}", src, printed);
        }
    }
}
