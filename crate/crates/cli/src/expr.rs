//! Arithmetic expressions for data given in the config.
//!
//! ```text
//! expr    := term (("+" | "-") term)*
//! term    := unary (("*" | "/") unary)*
//! unary   := "-" unary | power
//! power   := atom ("^" unary)?
//! atom    := number | "inf" | var | func "(" expr ("," expr)* ")" | "(" expr ")"
//!          | "piecewise" "(" branch ("," branch)* ")"
//! branch  := expr "in" ("[" | "(") expr "," expr ("]" | ")") "=>" expr
//!          | "else" "=>" expr
//! ```
//!
//! Functions are `abs`, `pow`, `sin` and `cos`. A piecewise expression takes
//! the first branch whose interval contains its subject, then the `else`
//! branch, then 0.

use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub struct ExprError {
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: {}", self.column, self.message)
    }
}

impl std::error::Error for ExprError {}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    T,
}

impl Var {
    fn name(self) -> &'static str {
        match self {
            Var::X => "x",
            Var::Y => "y",
            Var::T => "t",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Func {
    Abs,
    Pow,
    Sin,
    Cos,
}

#[derive(Clone, Debug, PartialEq)]
struct Branch {
    subject: Expr,
    lo: Expr,
    hi: Expr,
    lo_closed: bool,
    hi_closed: bool,
    value: Expr,
}

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Vec<Node>),
    Piecewise(Vec<Branch>, Option<Box<Node>>),
}

/// A parsed expression in the variables x, y and t.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    root: Node,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    Arrow,
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
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
            let v: f64 = text.parse().map_err(|_| ExprError {
                column: col,
                message: format!("bad number `{text}`"),
            })?;
            out.push((Tok::Num(v), col));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), col));
        } else if c == '=' && chars.get(i + 1) == Some(&'>') {
            out.push((Tok::Arrow, col));
            i += 2;
        } else if "+-*/^()[],".contains(c) {
            out.push((Tok::Sym(c), col));
            i += 1;
        } else {
            return Err(ExprError {
                column: col,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    allowed: &'a [Var],
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn column(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.1).unwrap_or(self.end)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError {
            column: self.column(),
            message: message.into(),
        })
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), ExprError> {
        if self.eat_sym(c) {
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn expr(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Sym(c)) if *c == '+' || *c == '-' => *c,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Node, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Sym(c)) if *c == '*' || *c == '/' => *c,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node, ExprError> {
        if self.eat_sym('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat_sym('^') {
            return Ok(Node::Bin('^', Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node, ExprError> {
        let col = self.column();
        match self.toks.get(self.pos).map(|t| t.0.clone()) {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                let var = match name.as_str() {
                    "x" => Some(Var::X),
                    "y" => Some(Var::Y),
                    "t" => Some(Var::T),
                    _ => None,
                };
                if let Some(v) = var {
                    if !self.allowed.contains(&v) {
                        let names: Vec<&str> = self.allowed.iter().map(|v| v.name()).collect();
                        return Err(ExprError {
                            column: col,
                            message: format!("variable `{name}` not available here (allowed: {})", names.join(", ")),
                        });
                    }
                    return Ok(Node::Var(v));
                }
                let (func, arity) = match name.as_str() {
                    "inf" => return Ok(Node::Num(f64::INFINITY)),
                    "piecewise" => return self.piecewise(),
                    "abs" => (Func::Abs, 1),
                    "pow" => (Func::Pow, 2),
                    "sin" => (Func::Sin, 1),
                    "cos" => (Func::Cos, 1),
                    _ => {
                        return Err(ExprError {
                            column: col,
                            message: format!("unknown name `{name}`"),
                        })
                    }
                };
                self.expect_sym('(')?;
                let mut args = vec![self.expr()?];
                while self.eat_sym(',') {
                    args.push(self.expr()?);
                }
                self.expect_sym(')')?;
                if args.len() != arity {
                    return Err(ExprError {
                        column: col,
                        message: format!("`{name}` takes {arity} argument(s), got {}", args.len()),
                    });
                }
                Ok(Node::Call(func, args))
            }
            Some(_) => self.err("expected a number, variable, function or `(`"),
            None => self.err("unexpected end of expression"),
        }
    }

    fn piecewise(&mut self) -> Result<Node, ExprError> {
        self.expect_sym('(')?;
        let mut branches = Vec::new();
        let mut other = None;
        loop {
            if other.is_some() {
                return self.err("`else` must be the last branch");
            }
            if self.peek() == Some(&Tok::Ident("else".into())) {
                self.pos += 1;
                self.expect_arrow()?;
                other = Some(Box::new(self.expr()?));
            } else {
                let subject = self.expr()?;
                if self.peek() != Some(&Tok::Ident("in".into())) {
                    return self.err("expected `in`");
                }
                self.pos += 1;
                let lo_closed = if self.eat_sym('[') {
                    true
                } else if self.eat_sym('(') {
                    false
                } else {
                    return self.err("expected `[` or `(` to open an interval");
                };
                let lo = self.expr()?;
                self.expect_sym(',')?;
                let hi = self.expr()?;
                let hi_closed = if self.eat_sym(']') {
                    true
                } else if self.eat_sym(')') {
                    false
                } else {
                    return self.err("expected `]` or `)` to close an interval");
                };
                self.expect_arrow()?;
                let value = self.expr()?;
                branches.push(Branch {
                    subject: Expr { root: subject },
                    lo: Expr { root: lo },
                    hi: Expr { root: hi },
                    lo_closed,
                    hi_closed,
                    value: Expr { root: value },
                });
            }
            if !self.eat_sym(',') {
                break;
            }
        }
        self.expect_sym(')')?;
        Ok(Node::Piecewise(branches, other))
    }

    fn expect_arrow(&mut self) -> Result<(), ExprError> {
        if self.peek() == Some(&Tok::Arrow) {
            self.pos += 1;
            Ok(())
        } else {
            self.err("expected `=>`")
        }
    }
}

/// Values of the variables at an evaluation point.
#[derive(Clone, Copy, Debug, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

fn eval(n: &Node, p: &Point) -> f64 {
    match n {
        Node::Num(v) => *v,
        Node::Var(Var::X) => p.x,
        Node::Var(Var::Y) => p.y,
        Node::Var(Var::T) => p.t,
        Node::Neg(a) => -eval(a, p),
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, p), eval(b, p));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' => a / b,
                _ => a.powf(b),
            }
        }
        Node::Call(f, args) => {
            let a = eval(&args[0], p);
            match f {
                Func::Abs => a.abs(),
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Pow => a.powf(eval(&args[1], p)),
            }
        }
        Node::Piecewise(branches, other) => {
            for b in branches {
                let s = eval(&b.subject.root, p);
                let lo = eval(&b.lo.root, p);
                let hi = eval(&b.hi.root, p);
                let above = if b.lo_closed { s >= lo } else { s > lo };
                let below = if b.hi_closed { s <= hi } else { s < hi };
                if above && below {
                    return eval(&b.value.root, p);
                }
            }
            other.as_ref().map(|e| eval(e, p)).unwrap_or(0.0)
        }
    }
}

fn mentions(n: &Node, v: Var) -> bool {
    match n {
        Node::Num(_) => false,
        Node::Var(w) => *w == v,
        Node::Neg(a) => mentions(a, v),
        Node::Bin(_, a, b) => mentions(a, v) || mentions(b, v),
        Node::Call(_, args) => args.iter().any(|a| mentions(a, v)),
        Node::Piecewise(bs, other) => {
            bs.iter().any(|b| {
                [&b.subject, &b.lo, &b.hi, &b.value]
                    .iter()
                    .any(|e| mentions(&e.root, v))
            }) || other.as_ref().is_some_and(|e| mentions(e, v))
        }
    }
}

impl Expr {
    /// Parses `src`, accepting only the variables in `allowed`.
    pub fn parse(src: &str, allowed: &[Var]) -> Result<Expr, ExprError> {
        let toks = tokenize(src)?;
        let mut p = Parser {
            toks,
            pos: 0,
            end: src.chars().count() + 1,
            allowed,
        };
        let root = p.expr()?;
        if p.pos != p.toks.len() {
            return p.err("unexpected trailing input");
        }
        Ok(Expr { root })
    }

    pub fn eval(&self, p: &Point) -> f64 {
        eval(&self.root, p)
    }

    pub fn at_x(&self, x: f64) -> f64 {
        self.eval(&Point { x, ..Default::default() })
    }

    pub fn at_tx(&self, t: f64, x: f64) -> f64 {
        self.eval(&Point { x, t, ..Default::default() })
    }

    pub fn mentions(&self, v: Var) -> bool {
        mentions(&self.root, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const X: &[Var] = &[Var::X];

    fn ev(src: &str, x: f64) -> f64 {
        Expr::parse(src, X).unwrap().at_x(x)
    }

    #[test]
    fn precedence_and_literals() {
        assert_eq!(ev("1 + 2 * 3", 0.0), 7.0);
        assert_eq!(ev("-2^2", 0.0), -4.0);
        assert_eq!(ev("2^3^2", 0.0), 512.0);
        assert_eq!(ev("(1 + x) / 4", 1.0), 0.5);
        assert_eq!(ev("1.5e-1 * 2E1", 0.0), 3.0);
        assert_eq!(ev("x - -x", 2.0), 4.0);
    }

    #[test]
    fn functions() {
        assert_eq!(ev("abs(x)", -3.0), 3.0);
        assert_eq!(ev("pow(x, 0.5)", 4.0), 2.0);
        assert_eq!(ev("cos(0) + sin(0)", 0.0), 1.0);
        let e = Expr::parse("0.75 + 0.25 * cos(t)", &[Var::T]).unwrap();
        assert_eq!(e.at_tx(0.0, 9.0), 1.0);
        assert!(e.mentions(Var::T) && !e.mentions(Var::X));
    }

    #[test]
    fn piecewise_intervals() {
        let src = "piecewise(abs(x) in (1, 2) => pow(abs(x) - 1, 0.25), x in [5, inf) => 7, else => -1)";
        assert_eq!(ev(src, 0.0), -1.0);
        assert_eq!(ev(src, 1.0), -1.0);
        assert_eq!(ev(src, -1.0625), 0.5);
        assert_eq!(ev(src, 5.0), 7.0);
        assert_eq!(ev("piecewise(x in [0, 1] => 1)", 1.0), 1.0);
        assert_eq!(ev("piecewise(x in [0, 1) => 1)", 1.0), 0.0);
    }

    #[test]
    fn errors_carry_columns() {
        let e = Expr::parse("1 + y", X).unwrap_err();
        assert_eq!(e.column, 5);
        assert!(e.message.contains("not available"));
        assert_eq!(Expr::parse("exp(x)", X).unwrap_err().column, 1);
        assert_eq!(Expr::parse("pow(x)", X).unwrap_err().column, 1);
        assert!(Expr::parse("1 +", X).is_err());
        assert!(Expr::parse("(1", X).is_err());
        assert!(Expr::parse("1 2", X).is_err());
        assert!(Expr::parse("1 $ 2", X).is_err());
        assert!(Expr::parse("piecewise(else => 1, x in [0, 1] => 2)", X).is_err());
    }
}
