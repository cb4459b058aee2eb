//! Drift expressions over `x` and `y`.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := ('-' | '+') factor | base ('^' integer)?
//! base   := number | 'x' | 'y' | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | tanh | exp
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tanh,
    Exp,
}

impl Func {
    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Tanh => v.tanh(),
            Func::Exp => v.exp(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X,
    Y,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser { src: src.as_bytes(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos < p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::X => x,
            Expr::Y => y,
            Expr::Neg(a) => -a.eval(x, y)?,
            Expr::Add(a, b) => a.eval(x, y)? + b.eval(x, y)?,
            Expr::Sub(a, b) => a.eval(x, y)? - b.eval(x, y)?,
            Expr::Mul(a, b) => a.eval(x, y)? * b.eval(x, y)?,
            Expr::Div(a, b) => {
                let den = b.eval(x, y)?;
                if den == 0.0 {
                    return Err(Error::Eval(format!("division by zero at ({x}, {y})")));
                }
                a.eval(x, y)? / den
            }
            Expr::Pow(a, n) => {
                let base = a.eval(x, y)?;
                if base == 0.0 && *n < 0 {
                    return Err(Error::Eval(format!("zero to a negative power at ({x}, {y})")));
                }
                base.powi(*n)
            }
            Expr::Call(f, a) => f.apply(a.eval(x, y)?),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Eval(format!("non-finite value at ({x}, {y})")))
        }
    }

    pub fn is_constant_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::X => write!(f, "x"),
            Expr::Y => write!(f, "y"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, n) => write!(f, "({a}^{n})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Parse { pos: self.pos, msg: msg.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        if self.eat(b'+') {
            return self.factor();
        }
        let base = self.base()?;
        if self.eat(b'^') {
            let n = self.integer()?;
            return Ok(Expr::Pow(Box::new(base), n));
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<i32> {
        self.skip_ws();
        let start = self.pos;
        if matches!(self.src.get(self.pos), Some(b'-') | Some(b'+')) {
            self.pos += 1;
        }
        let digits = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits {
            self.pos = start;
            return Err(self.error("expected an integer exponent"));
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
        text.parse::<i32>().map_err(|_| Error::Parse { pos: start, msg: "exponent out of range".into() })
    }

    fn base(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let ident = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii");
                let func = match ident {
                    "x" => return Ok(Expr::X),
                    "y" => return Ok(Expr::Y),
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "tanh" => Func::Tanh,
                    "exp" => Func::Exp,
                    _ => {
                        return Err(Error::Parse { pos: start, msg: format!("unknown identifier '{ident}'") })
                    }
                };
                if !self.eat(b'(') {
                    return Err(self.error("expected '(' after function name"));
                }
                let arg = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(Expr::Call(func, Box::new(arg)))
            }
            Some(_) => Err(self.error("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let s = self.src;
        let digits = |p: &mut usize| {
            while *p < s.len() && s[*p].is_ascii_digit() {
                *p += 1;
            }
        };
        digits(&mut self.pos);
        if self.pos < s.len() && s[self.pos] == b'.' {
            self.pos += 1;
            digits(&mut self.pos);
        }
        if self.pos < s.len() && (s[self.pos] == b'e' || s[self.pos] == b'E') {
            let mark = self.pos;
            self.pos += 1;
            if self.pos < s.len() && (s[self.pos] == b'+' || s[self.pos] == b'-') {
                self.pos += 1;
            }
            let exp_start = self.pos;
            digits(&mut self.pos);
            if self.pos == exp_start {
                self.pos = mark;
            }
        }
        let text = std::str::from_utf8(&s[start..self.pos]).expect("ascii");
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| Error::Parse { pos: start, msg: format!("malformed number '{text}'") })
    }
}

/// Axis-aligned working box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn square(half_width: f64) -> Self {
        Self { x_min: -half_width, x_max: half_width, y_min: -half_width, y_max: half_width }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }
}

/// Nodes per axis for the Lipschitz scan.
pub const LIPSCHITZ_GRID: usize = 200;

/// A parsed drift with its Lipschitz estimate on the working box.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftFn {
    source: String,
    expr: Expr,
    lipschitz: f64,
    domain: Rect,
}

impl DriftFn {
    pub fn zero(domain: Rect) -> Self {
        Self { source: "0".into(), expr: Expr::Num(0.0), lipschitz: 0.0, domain }
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        self.expr.eval(x, y)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    /// Largest forward-difference gradient norm over the box grid.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn is_zero(&self) -> bool {
        self.expr.is_constant_zero()
    }
}

/// Parse a drift and scan its difference quotients on a 200×200 box grid.
pub fn parse_drift(src: &str, domain: Rect) -> Result<DriftFn> {
    let expr = Expr::parse(src)?;
    let n = LIPSCHITZ_GRID;
    let hx = (domain.x_max - domain.x_min) / (n - 1) as f64;
    let hy = (domain.y_max - domain.y_min) / (n - 1) as f64;
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        let x = domain.x_min + i as f64 * hx;
        for j in 0..n {
            let y = domain.y_min + j as f64 * hy;
            values[i * n + j] = expr.eval(x, y)?;
        }
    }
    let mut lip = 0.0_f64;
    for i in 0..n - 1 {
        for j in 0..n - 1 {
            let v = values[i * n + j];
            let gx = (values[(i + 1) * n + j] - v) / hx;
            let gy = (values[i * n + j + 1] - v) / hy;
            lip = lip.max(gx.hypot(gy));
        }
    }
    Ok(DriftFn { source: src.to_string(), expr, lipschitz: lip, domain })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_drift_lipschitz_is_sqrt2() {
        let d = parse_drift("-x - y", Rect::square(5.0)).unwrap();
        assert!((d.lipschitz() - 2f64.sqrt()).abs() < 1e-9, "{}", d.lipschitz());
        assert_eq!(d.eval(1.0, 2.0).unwrap(), -3.0);
    }

    #[test]
    fn zero_drift() {
        let d = parse_drift("0", Rect::square(5.0)).unwrap();
        assert_eq!(d.lipschitz(), 0.0);
        assert!(d.is_zero());
    }

    #[test]
    fn singular_drift_is_eval_error() {
        assert!(matches!(parse_drift("x / (x - x)", Rect::square(5.0)), Err(Error::Eval(_))));
    }

    #[test]
    fn precedence_and_functions() {
        let e = Expr::parse("2 + 3 * x ^ 2 - sin(y) / exp(0)").unwrap();
        let v = e.eval(2.0, 0.5).unwrap();
        assert!((v - (2.0 + 12.0 - 0.5f64.sin())).abs() < 1e-15);
        assert_eq!(Expr::parse("-x^2").unwrap().eval(3.0, 0.0).unwrap(), -9.0);
        assert_eq!(Expr::parse("1/(1+x^2+y^2)").unwrap().eval(1.0, 1.0).unwrap(), 1.0 / 3.0);
        assert_eq!(Expr::parse("2.5e-1*x").unwrap().eval(4.0, 0.0).unwrap(), 1.0);
        assert_eq!(Expr::parse("x^-1").unwrap().eval(4.0, 0.0).unwrap(), 0.25);
    }

    #[test]
    fn parse_errors_carry_positions() {
        assert!(matches!(Expr::parse("x + * y"), Err(Error::Parse { pos: 4, .. })));
        assert!(matches!(Expr::parse("foo(x)"), Err(Error::Parse { pos: 0, .. })));
        assert!(matches!(Expr::parse("(x + y"), Err(Error::Parse { pos: 6, .. })));
        assert!(matches!(Expr::parse("x ^ y"), Err(Error::Parse { .. })));
        assert!(matches!(Expr::parse("x y"), Err(Error::Parse { pos: 2, .. })));
    }
}
