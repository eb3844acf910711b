//! Small arithmetic-expression language used for fields in input documents and CLI flags.
//!
//! Grammar (lowest to highest precedence): `+ -`, `* /`, unary `-`, `^`
//! (right associative, so `-x^2 = -(x^2)` and `2^-1` is accepted).
//! Functions: `exp log ln sin cos tan sqrt atan atan2 sinh cosh tanh abs`.
//! Constants: `pi`, `e`, and `i` when parsed in complex mode. Variable
//! names shadow constants.
//!
//! A parsed [`Expr`] evaluates over any [`Scalar`]: plain `f64`, [`Jet`]
//! (giving derivatives for free) or [`CJet`].

use crate::cjet::CJet;
use crate::error::{Error, Result};
use crate::jet::Jet;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Number type an [`Expr`] can be evaluated over.
pub trait Scalar:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn imag_unit() -> Result<Self> {
        Err(Error::Parse("imaginary unit is only available for complex expressions".into()))
    }
    fn exp(&self) -> Result<Self>;
    fn ln(&self) -> Result<Self>;
    fn sin(&self) -> Result<Self>;
    fn cos(&self) -> Result<Self>;
    fn tan(&self) -> Result<Self> {
        Ok(self.sin()? / self.cos()?)
    }
    fn sqrt(&self) -> Result<Self>;
    fn atan(&self) -> Result<Self>;
    fn atan2(y: &Self, x: &Self) -> Result<Self>;
    fn sinh(&self) -> Result<Self>;
    fn cosh(&self) -> Result<Self>;
    fn tanh(&self) -> Result<Self> {
        Ok(self.sinh()? / self.cosh()?)
    }
    fn abs(&self) -> Result<Self>;
    fn powf(&self, p: f64) -> Result<Self>;
    fn pow(&self, p: &Self) -> Result<Self> {
        (p.clone() * self.ln()?).exp()
    }
    fn finite(&self) -> bool;
}

fn real_only<T>(name: &str) -> Result<T> {
    Err(Error::Invalid(format!("function '{name}' is not defined for complex arguments")))
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn exp(&self) -> Result<Self> {
        Ok(f64::exp(*self))
    }
    fn ln(&self) -> Result<Self> {
        Ok(f64::ln(*self))
    }
    fn sin(&self) -> Result<Self> {
        Ok(f64::sin(*self))
    }
    fn cos(&self) -> Result<Self> {
        Ok(f64::cos(*self))
    }
    fn tan(&self) -> Result<Self> {
        Ok(f64::tan(*self))
    }
    fn sqrt(&self) -> Result<Self> {
        Ok(f64::sqrt(*self))
    }
    fn atan(&self) -> Result<Self> {
        Ok(f64::atan(*self))
    }
    fn atan2(y: &Self, x: &Self) -> Result<Self> {
        Ok(y.atan2(*x))
    }
    fn sinh(&self) -> Result<Self> {
        Ok(f64::sinh(*self))
    }
    fn cosh(&self) -> Result<Self> {
        Ok(f64::cosh(*self))
    }
    fn tanh(&self) -> Result<Self> {
        Ok(f64::tanh(*self))
    }
    fn abs(&self) -> Result<Self> {
        Ok(f64::abs(*self))
    }
    fn powf(&self, p: f64) -> Result<Self> {
        if p.fract() == 0.0 && p.abs() < 64.0 {
            Ok(self.powi(p as i32))
        } else {
            Ok(f64::powf(*self, p))
        }
    }
    fn pow(&self, p: &Self) -> Result<Self> {
        Ok(f64::powf(*self, *p))
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Jet {
    fn from_f64(v: f64) -> Self {
        Jet::cst(v)
    }
    fn exp(&self) -> Result<Self> {
        Ok(Jet::exp(self))
    }
    fn ln(&self) -> Result<Self> {
        Ok(Jet::ln(self))
    }
    fn sin(&self) -> Result<Self> {
        Ok(Jet::sin(self))
    }
    fn cos(&self) -> Result<Self> {
        Ok(Jet::cos(self))
    }
    fn tan(&self) -> Result<Self> {
        Ok(Jet::tan(self))
    }
    fn sqrt(&self) -> Result<Self> {
        Ok(Jet::sqrt(self))
    }
    fn atan(&self) -> Result<Self> {
        Ok(Jet::atan(self))
    }
    fn atan2(y: &Self, x: &Self) -> Result<Self> {
        Ok(Jet::atan2(y, x))
    }
    fn sinh(&self) -> Result<Self> {
        Ok(Jet::sinh(self))
    }
    fn cosh(&self) -> Result<Self> {
        Ok(Jet::cosh(self))
    }
    fn tanh(&self) -> Result<Self> {
        Ok(Jet::tanh(self))
    }
    fn abs(&self) -> Result<Self> {
        Ok(Jet::abs(self))
    }
    fn powf(&self, p: f64) -> Result<Self> {
        Ok(Jet::powf(self, p))
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
}

impl Scalar for CJet {
    fn from_f64(v: f64) -> Self {
        CJet::cst(v, 0.0)
    }
    fn imag_unit() -> Result<Self> {
        Ok(CJet::i())
    }
    fn exp(&self) -> Result<Self> {
        Ok(CJet::exp(self))
    }
    fn ln(&self) -> Result<Self> {
        Ok(CJet::ln(self))
    }
    fn sin(&self) -> Result<Self> {
        Ok(CJet::sin(self))
    }
    fn cos(&self) -> Result<Self> {
        Ok(CJet::cos(self))
    }
    fn sqrt(&self) -> Result<Self> {
        Ok((self.ln().scale(0.5)).exp())
    }
    fn atan(&self) -> Result<Self> {
        real_only("atan")
    }
    fn atan2(_: &Self, _: &Self) -> Result<Self> {
        real_only("atan2")
    }
    fn sinh(&self) -> Result<Self> {
        Ok(CJet::sinh(self))
    }
    fn cosh(&self) -> Result<Self> {
        Ok(CJet::cosh(self))
    }
    fn abs(&self) -> Result<Self> {
        real_only("abs")
    }
    fn powf(&self, p: f64) -> Result<Self> {
        if p.fract() == 0.0 && p.abs() < 64.0 {
            Ok(self.powi(p as i32))
        } else {
            Ok(self.powc(&CJet::cst(p, 0.0)))
        }
    }
    fn pow(&self, p: &Self) -> Result<Self> {
        Ok(self.powc(p))
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Tan,
    Sqrt,
    Atan,
    Atan2,
    Sinh,
    Cosh,
    Tanh,
    Abs,
}

impl Func {
    fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" | "ln" => Func::Ln,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "sqrt" => Func::Sqrt,
            "atan" => Func::Atan,
            "atan2" => Func::Atan2,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn arity(self) -> usize {
        if self == Func::Atan2 {
            2
        } else {
            1
        }
    }

    fn apply<T: Scalar>(self, args: &[T]) -> Result<T> {
        let a = &args[0];
        match self {
            Func::Exp => a.exp(),
            Func::Ln => a.ln(),
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Tan => a.tan(),
            Func::Sqrt => a.sqrt(),
            Func::Atan => a.atan(),
            Func::Atan2 => T::atan2(&args[0], &args[1]),
            Func::Sinh => a.sinh(),
            Func::Cosh => a.cosh(),
            Func::Tanh => a.tanh(),
            Func::Abs => a.abs(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Debug)]
enum Node {
    Num(f64),
    Var(usize),
    Imag,
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
}

impl Node {
    fn eval<T: Scalar>(&self, args: &[T]) -> Result<T> {
        Ok(match self {
            Node::Num(v) => T::from_f64(*v),
            Node::Var(i) => args[*i].clone(),
            Node::Imag => T::imag_unit()?,
            Node::Neg(a) => -a.eval(args)?,
            Node::Bin(op, a, b) => {
                if *op == BinOp::Pow {
                    let base = a.eval(args)?;
                    return match **b {
                        Node::Num(p) => base.powf(p),
                        _ => base.pow(&b.eval(args)?),
                    };
                }
                let (x, y) = (a.eval(args)?, b.eval(args)?);
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => x / y,
                    BinOp::Pow => unreachable!(),
                }
            }
            Node::Call(f, a) => {
                let vals = a.iter().map(|n| n.eval(args)).collect::<Result<Vec<T>>>()?;
                f.apply(&vals)?
            }
        })
    }

    /// Folds subtrees that contain only numbers.
    fn fold(self) -> Node {
        match self {
            Node::Neg(a) => match a.fold() {
                Node::Num(v) => Node::Num(-v),
                other => Node::Neg(Box::new(other)),
            },
            Node::Bin(op, a, b) => {
                let (a, b) = (a.fold(), b.fold());
                if let (Node::Num(x), Node::Num(y)) = (&a, &b) {
                    let n = Node::Bin(op, Box::new(Node::Num(*x)), Box::new(Node::Num(*y)));
                    if let Ok(v) = n.eval::<f64>(&[]) {
                        return Node::Num(v);
                    }
                }
                Node::Bin(op, Box::new(a), Box::new(b))
            }
            Node::Call(f, args) => {
                let args: Vec<Node> = args.into_iter().map(Node::fold).collect();
                if args.iter().all(|a| matches!(a, Node::Num(_))) {
                    let n = Node::Call(f, args.clone());
                    if let Ok(v) = n.eval::<f64>(&[]) {
                        return Node::Num(v);
                    }
                }
                Node::Call(f, args)
            }
            other => other,
        }
    }
}

/// A parsed expression over named variables.
#[derive(Clone, Debug)]
pub struct Expr {
    source: String,
    vars: Vec<String>,
    root: Node,
}

impl Expr {
    /// Parses a real expression in the given variables.
    pub fn parse(src: &str, vars: &[&str]) -> Result<Expr> {
        Self::parse_impl(src, vars, false)
    }

    /// Parses an expression where `i` denotes the imaginary unit.
    pub fn parse_complex(src: &str, vars: &[&str]) -> Result<Expr> {
        Self::parse_impl(src, vars, true)
    }

    fn parse_impl(src: &str, vars: &[&str], complex: bool) -> Result<Expr> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0, vars, complex };
        let root = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Parse(format!("unexpected token {:?} in '{src}'", p.tokens[p.pos])));
        }
        Ok(Expr { source: src.to_string(), vars: vars.iter().map(|s| s.to_string()).collect(), root: root.fold() })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    /// The value if the expression contains no variables.
    pub fn as_constant(&self) -> Option<f64> {
        match self.root {
            Node::Num(v) => Some(v),
            _ => None,
        }
    }

    pub fn eval<T: Scalar>(&self, args: &[T]) -> Result<T> {
        if args.len() != self.vars.len() {
            return Err(Error::Invalid(format!(
                "expression '{}' expects {} arguments, got {}",
                self.source,
                self.vars.len(),
                args.len()
            )));
        }
        let v = self.root.eval(args)?;
        if !v.finite() {
            return Err(Error::NonFinite(self.source.clone()));
        }
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent only when followed by digits, so `2e` stays `2 e`
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{text}'")))?;
            out.push(Tok::Num(v));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else {
            out.push(match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                _ => return Err(Error::Parse(format!("unexpected character '{c}' in '{src}'"))),
            });
            i += 1;
        }
    }
    if out.is_empty() {
        return Err(Error::Parse("empty expression".into()));
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Tok>,
    pos: usize,
    vars: &'a [&'a str],
    complex: bool,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, t: Tok) -> Result<()> {
        match self.next() {
            Some(ref got) if *got == t => Ok(()),
            got => Err(Error::Parse(format!("expected {t:?}, found {got:?}"))),
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(Tok::Op(c @ ('+' | '-'))) = self.peek() {
            let op = if *c == '+' { BinOp::Add } else { BinOp::Sub };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(Tok::Op(c @ ('*' | '/'))) = self.peek() {
            let op = if *c == '*' { BinOp::Mul } else { BinOp::Div };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        match self.peek() {
            Some(Tok::Op('-')) => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Op('+')) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(Node::Num(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                if let Some(Tok::LParen) = self.peek() {
                    let f = Func::lookup(&name).ok_or_else(|| Error::Parse(format!("unknown function '{name}'")))?;
                    self.pos += 1;
                    let mut args = vec![self.expr()?];
                    while let Some(Tok::Comma) = self.peek() {
                        self.pos += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen)?;
                    if args.len() != f.arity() {
                        return Err(Error::Parse(format!(
                            "'{name}' takes {} argument(s), got {}",
                            f.arity(),
                            args.len()
                        )));
                    }
                    return Ok(Node::Call(f, args));
                }
                if let Some(i) = self.vars.iter().position(|v| *v == name) {
                    return Ok(Node::Var(i));
                }
                match name.as_str() {
                    "pi" => Ok(Node::Num(std::f64::consts::PI)),
                    "e" => Ok(Node::Num(std::f64::consts::E)),
                    "i" if self.complex => Ok(Node::Imag),
                    _ => Err(Error::Parse(format!("unknown identifier '{name}'"))),
                }
            }
            t => Err(Error::Parse(format!("unexpected {t:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(src: &str, vars: &[&str], args: &[f64]) -> f64 {
        Expr::parse(src, vars).unwrap().eval(args).unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", &[], &[]), 7.0);
        assert_eq!(ev("2^3^2", &[], &[]), 512.0);
        assert_eq!(ev("-x^2", &["x"], &[3.0]), -9.0);
        assert_eq!(ev("2^-1", &[], &[]), 0.5);
        assert_eq!(ev("(1 - 2) - 3", &[], &[]), -4.0);
        assert_eq!(ev("8 / 4 / 2", &[], &[]), 1.0);
        assert_eq!(ev("1.5e-3 * 2e2", &[], &[]), 0.3);
    }

    #[test]
    fn constants_and_functions() {
        assert!((ev("cos(pi)", &[], &[]) + 1.0).abs() < 1e-15);
        assert!((ev("log(e)", &[], &[]) - 1.0).abs() < 1e-15);
        assert!(Expr::parse("2e", &[]).is_err());
        assert!((ev("atan2(1, -1)", &[], &[]) - 0.75 * std::f64::consts::PI).abs() < 1e-15);
        assert!((ev("sqrt(x) * exp(y)", &["x", "y"], &[4.0, 0.0]) - 2.0).abs() < 1e-15);
        // a variable named e shadows the constant
        assert_eq!(ev("e + 1", &["e"], &[1.0]), 2.0);
    }

    #[test]
    fn parse_errors() {
        for bad in ["", "1 +", "foo(1)", "(1", "x", "atan2(1)", "1 $ 2"] {
            assert!(matches!(Expr::parse(bad, &[]), Err(Error::Parse(_))), "{bad}");
        }
        assert!(Expr::parse("i", &[]).is_err());
    }

    #[test]
    fn jets_give_derivatives() {
        let e = Expr::parse("x^2 * sin(y)", &["x", "y"]).unwrap();
        let x = Jet::seed(&[2.0, 0.5], 2);
        let v = e.eval(&x).unwrap();
        assert!((v.d1(0) - 4.0 * 0.5f64.sin()).abs() < 1e-14);
        assert!((v.d2(1, 1) + 4.0 * 0.5f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn complex_expressions() {
        let e = Expr::parse_complex("exp(i * z)", &["z"]).unwrap();
        let v = e.eval(&[CJet::cst(0.3, 0.0)]).unwrap();
        assert!((v.re.value() - 0.3f64.cos()).abs() < 1e-15);
        assert!((v.im.value() - 0.3f64.sin()).abs() < 1e-15);
        assert!(Expr::parse_complex("abs(z)", &["z"]).unwrap().eval(&[CJet::cst(1.0, 0.0)]).is_err());
    }

    #[test]
    fn non_finite_is_an_error() {
        assert!(matches!(Expr::parse("log(x)", &["x"]).unwrap().eval(&[-1.0]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn constant_folding() {
        assert_eq!(Expr::parse("1/sqrt(4)", &[]).unwrap().as_constant(), Some(0.5));
        assert_eq!(Expr::parse("x", &["x"]).unwrap().as_constant(), None);
    }
}
