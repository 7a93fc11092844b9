use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Magnitude at which evaluation saturates.
pub const SATURATION: f64 = 1e100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnaryOp {
    Cos,
    Sin,
    Exp,
    Abs,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    /// `atan2(y, x)` with `atan2(0, 0) = 0`.
    Atan2,
}

pub const UNARY: [UnaryOp; 5] = [UnaryOp::Cos, UnaryOp::Sin, UnaryOp::Exp, UnaryOp::Abs, UnaryOp::Square];
pub const BINARY: [BinaryOp; 4] = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Atan2];

impl UnaryOp {
    pub fn apply(self, a: f64) -> f64 {
        match self {
            UnaryOp::Cos => a.cos(),
            UnaryOp::Sin => a.sin(),
            UnaryOp::Exp => a.exp(),
            UnaryOp::Abs => a.abs(),
            UnaryOp::Square => a * a,
        }
    }

    fn name(self) -> &'static str {
        match self {
            UnaryOp::Cos => "cos",
            UnaryOp::Sin => "sin",
            UnaryOp::Exp => "exp",
            UnaryOp::Abs => "abs",
            UnaryOp::Square => "square",
        }
    }
}

impl BinaryOp {
    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Atan2 => {
                if a == 0.0 && b == 0.0 {
                    0.0
                } else {
                    a.atan2(b)
                }
            }
        }
    }
}

fn saturate(v: f64) -> (f64, bool) {
    if v.is_nan() {
        (SATURATION, true)
    } else if v.abs() >= SATURATION {
        (SATURATION.copysign(v), true)
    } else {
        (v, false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

/// Value with a flag set when any node saturated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluated {
    pub value: f64,
    pub saturated: bool,
}

impl Expr {
    pub fn var(i: usize) -> Self {
        Expr::Var(i)
    }

    pub fn unary(op: UnaryOp, a: Expr) -> Self {
        Expr::Unary(op, Box::new(a))
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Self {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    /// Node count.
    pub fn complexity(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Unary(_, a) => 1 + a.complexity(),
            Expr::Binary(_, a, b) => 1 + a.complexity() + b.complexity(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Unary(_, a) => 1 + a.depth(),
            Expr::Binary(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Sorted distinct feature indices.
    pub fn variables(&self) -> Vec<usize> {
        fn go(e: &Expr, out: &mut Vec<usize>) {
            match e {
                Expr::Const(_) => {}
                Expr::Var(i) => out.push(*i),
                Expr::Unary(_, a) => go(a, out),
                Expr::Binary(_, a, b) => {
                    go(a, out);
                    go(b, out);
                }
            }
        }
        let mut v = Vec::new();
        go(self, &mut v);
        v.sort_unstable();
        v.dedup();
        v
    }

    fn eval_raw(&self, x: &[f64], sat: &mut bool) -> f64 {
        let (v, s) = match self {
            Expr::Const(c) => (*c, false),
            Expr::Var(i) => (x[*i], false),
            Expr::Unary(op, a) => saturate(op.apply(a.eval_raw(x, sat))),
            Expr::Binary(op, a, b) => saturate(op.apply(a.eval_raw(x, sat), b.eval_raw(x, sat))),
        };
        *sat |= s;
        v
    }

    pub fn eval(&self, x: &[f64]) -> Result<Evaluated> {
        if let Some(&m) = self.variables().last() {
            if m >= x.len() {
                return Err(Error::Schema(format!(
                    "feature x{m} not present in a row of {}",
                    x.len()
                )));
            }
        }
        let mut saturated = false;
        let value = self.eval_raw(x, &mut saturated);
        Ok(Evaluated { value, saturated })
    }

    /// Column-wise evaluation; `None` if any node saturated.
    pub fn eval_columns(&self, cols: &[Vec<f64>], n: usize) -> Option<Vec<f64>> {
        let mut ok = true;
        let v = self.eval_cols(cols, n, &mut ok);
        ok.then_some(v)
    }

    fn eval_cols(&self, cols: &[Vec<f64>], n: usize, ok: &mut bool) -> Vec<f64> {
        let mut v = match self {
            Expr::Const(c) => vec![*c; n],
            Expr::Var(i) => cols[*i].clone(),
            Expr::Unary(op, a) => {
                let mut v = a.eval_cols(cols, n, ok);
                v.iter_mut().for_each(|e| *e = op.apply(*e));
                v
            }
            Expr::Binary(op, a, b) => {
                let mut v = a.eval_cols(cols, n, ok);
                let w = b.eval_cols(cols, n, ok);
                v.iter_mut().zip(&w).for_each(|(e, f)| *e = op.apply(*e, *f));
                v
            }
        };
        for e in v.iter_mut() {
            let (s, flag) = saturate(*e);
            if flag {
                *ok = false;
            }
            *e = s;
        }
        v
    }

    /// Preorder node `k`.
    pub fn node(&self, k: usize) -> &Expr {
        fn go<'a>(e: &'a Expr, k: &mut usize) -> Option<&'a Expr> {
            if *k == 0 {
                return Some(e);
            }
            *k -= 1;
            match e {
                Expr::Const(_) | Expr::Var(_) => None,
                Expr::Unary(_, a) => go(a, k),
                Expr::Binary(_, a, b) => go(a, k).or_else(|| go(b, k)),
            }
        }
        let mut k = k;
        go(self, &mut k).expect("node index within complexity")
    }

    pub fn node_mut(&mut self, k: usize) -> &mut Expr {
        fn go<'a>(e: &'a mut Expr, k: &mut usize) -> Option<&'a mut Expr> {
            if *k == 0 {
                return Some(e);
            }
            *k -= 1;
            match e {
                Expr::Const(_) | Expr::Var(_) => None,
                Expr::Unary(_, a) => go(a, k),
                Expr::Binary(_, a, b) => {
                    let size = a.complexity();
                    if *k < size {
                        go(a, k)
                    } else {
                        *k -= size;
                        go(b, k)
                    }
                }
            }
        }
        let mut k = k;
        go(self, &mut k).expect("node index within complexity")
    }

    pub fn constants_mut(&mut self) -> Vec<&mut f64> {
        fn go<'a>(e: &'a mut Expr, out: &mut Vec<&'a mut f64>) {
            match e {
                Expr::Const(c) => out.push(c),
                Expr::Var(_) => {}
                Expr::Unary(_, a) => go(a, out),
                Expr::Binary(_, a, b) => {
                    go(a, out);
                    go(b, out);
                }
            }
        }
        let mut v = Vec::new();
        go(self, &mut v);
        v
    }

    /// Identity rules and constant folding; never increases complexity.
    pub fn simplify(&self) -> Expr {
        match self {
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Unary(op, a) => match a.simplify() {
                Expr::Const(c) => {
                    let (v, sat) = saturate(op.apply(c));
                    if sat {
                        Expr::unary(*op, Expr::Const(c))
                    } else {
                        Expr::Const(v)
                    }
                }
                s => Expr::unary(*op, s),
            },
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.simplify(), b.simplify());
                match (op, &a, &b) {
                    (_, Expr::Const(x), Expr::Const(y)) => {
                        let (v, sat) = saturate(op.apply(*x, *y));
                        if sat {
                            Expr::binary(*op, a, b)
                        } else {
                            Expr::Const(v)
                        }
                    }
                    (BinaryOp::Add, Expr::Const(z), _) if *z == 0.0 => b,
                    (BinaryOp::Add | BinaryOp::Sub, _, Expr::Const(z)) if *z == 0.0 => a,
                    (BinaryOp::Mul, Expr::Const(o), _) if *o == 1.0 => b,
                    (BinaryOp::Mul, _, Expr::Const(o)) if *o == 1.0 => a,
                    _ => Expr::binary(*op, a, b),
                }
            }
        }
    }

    /// Infix rendering with `names` for the variables.
    pub fn to_infix(&self, names: &[String]) -> String {
        let nm = |i: usize| names.get(i).cloned().unwrap_or_else(|| format!("x{i}"));
        match self {
            Expr::Const(c) => {
                if *c < 0.0 {
                    format!("({c:e})")
                } else {
                    format!("{c:e}")
                }
            }
            Expr::Var(i) => nm(*i),
            Expr::Unary(op, a) => format!("{}({})", op.name(), a.to_infix(names)),
            Expr::Binary(BinaryOp::Atan2, a, b) => format!("atan2({}, {})", a.to_infix(names), b.to_infix(names)),
            Expr::Binary(op, a, b) => {
                let sym = match op {
                    BinaryOp::Add => "+",
                    BinaryOp::Sub => "-",
                    _ => "*",
                };
                let wrap = |e: &Expr, right: bool| {
                    let s = e.to_infix(names);
                    let needs = match e {
                        Expr::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => {
                            *op == BinaryOp::Mul || (right && *op == BinaryOp::Sub)
                        }
                        _ => false,
                    };
                    if needs {
                        format!("({s})")
                    } else {
                        s
                    }
                };
                format!("{} {sym} {}", wrap(a, false), wrap(b, true))
            }
        }
    }

    /// Parses the infix grammar of [`Expr::to_infix`]; identifiers resolve against `names`.
    pub fn parse(text: &str, names: &[String]) -> Result<Expr> {
        let mut p = Parser {
            s: text.as_bytes(),
            i: 0,
            names,
        };
        let e = p.sum()?;
        p.ws();
        if p.i != p.s.len() {
            return Err(Error::Syntax(format!("unexpected `{}` at {}", &text[p.i..], p.i)));
        }
        Ok(e)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_infix(&[]))
    }
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
    names: &'a [String],
}

impl Parser<'_> {
    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.ws();
        if self.s.get(self.i) == Some(&c) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(Error::Syntax(format!("expected `{}` at {}", c as char, self.i)))
        }
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut e = self.product()?;
        loop {
            if self.eat(b'+') {
                e = Expr::binary(BinaryOp::Add, e, self.product()?);
            } else if self.eat(b'-') {
                e = Expr::binary(BinaryOp::Sub, e, self.product()?);
            } else {
                return Ok(e);
            }
        }
    }

    fn product(&mut self) -> Result<Expr> {
        let mut e = self.atom()?;
        while self.eat(b'*') {
            e = Expr::binary(BinaryOp::Mul, e, self.atom()?);
        }
        Ok(e)
    }

    fn atom(&mut self) -> Result<Expr> {
        self.ws();
        if self.eat(b'(') {
            let e = self.sum()?;
            self.expect(b')')?;
            return Ok(e);
        }
        if self.eat(b'-') {
            let a = self.atom()?;
            return Ok(match a {
                Expr::Const(c) => Expr::Const(-c),
                a => Expr::binary(BinaryOp::Sub, Expr::Const(0.0), a),
            });
        }
        let start = self.i;
        let c = *self
            .s
            .get(self.i)
            .ok_or_else(|| Error::Syntax("unexpected end of expression".into()))?;
        if c.is_ascii_digit() || c == b'.' {
            while self.i < self.s.len() {
                let ch = self.s[self.i];
                let exp_sign = (ch == b'-' || ch == b'+') && matches!(self.s[self.i - 1], b'e' | b'E');
                if ch.is_ascii_digit() || ch == b'.' || ch == b'e' || ch == b'E' || exp_sign {
                    self.i += 1;
                } else {
                    break;
                }
            }
            let tok = std::str::from_utf8(&self.s[start..self.i]).expect("ascii");
            return tok
                .parse()
                .map(Expr::Const)
                .map_err(|_| Error::Syntax(format!("bad number `{tok}`")));
        }
        if !(c.is_ascii_alphabetic() || c == b'_') {
            return Err(Error::Syntax(format!("unexpected `{}` at {}", c as char, self.i)));
        }
        while self.i < self.s.len() && (self.s[self.i].is_ascii_alphanumeric() || self.s[self.i] == b'_') {
            self.i += 1;
        }
        let id = std::str::from_utf8(&self.s[start..self.i]).expect("ascii");
        if self.eat(b'(') {
            let a = self.sum()?;
            let e = match id {
                "atan2" => {
                    self.expect(b',')?;
                    Expr::binary(BinaryOp::Atan2, a, self.sum()?)
                }
                _ => {
                    let op = UNARY
                        .into_iter()
                        .find(|u| u.name() == id)
                        .ok_or_else(|| Error::Syntax(format!("unknown function `{id}`")))?;
                    Expr::unary(op, a)
                }
            };
            self.expect(b')')?;
            return Ok(e);
        }
        if let Some(k) = self.names.iter().position(|n| n == id) {
            return Ok(Expr::Var(k));
        }
        if let Some(k) = id.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
            if self.names.is_empty() {
                return Ok(Expr::Var(k));
            }
        }
        Err(Error::Schema(format!("unresolved feature `{id}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        Expr::parse(s, &[]).unwrap()
    }

    #[test]
    fn evaluates_basic_expressions() {
        assert_eq!(p("x0 + x1").eval(&[2.0, 3.0]).unwrap().value, 5.0);
        assert!((p("atan2(1, 1)").eval(&[]).unwrap().value - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert_eq!(p("atan2(0, 0)").eval(&[]).unwrap().value, 0.0);
        let e = p("exp(1000)").eval(&[]).unwrap();
        assert!(e.saturated && e.value == SATURATION);
    }

    #[test]
    fn simplification_rules() {
        assert_eq!(p("x0 + 0").simplify(), p("x0"));
        assert_eq!(p("2 * 3").simplify(), Expr::Const(6.0));
        assert_eq!(p("sin(x0) * 1").simplify(), p("sin(x0)"));
    }

    #[test]
    fn infix_round_trips() {
        let names = vec!["a".to_string(), "b".to_string()];
        for s in [
            "a - (b - a)",
            "(a + b) * sin(b)",
            "atan2(a, square(b)) - (-2.5e-1)",
            "abs(cos(a)) * exp(b)",
        ] {
            let e = Expr::parse(s, &names).unwrap();
            assert_eq!(Expr::parse(&e.to_infix(&names), &names).unwrap(), e, "{s}");
        }
    }

    #[test]
    fn unknown_identifier_is_schema_error() {
        let names = vec!["a".to_string()];
        assert!(matches!(Expr::parse("a + zz", &names), Err(Error::Schema(_))));
        assert!(matches!(Expr::parse("a +", &names), Err(Error::Syntax(_))));
        assert!(matches!(p("x3").eval(&[1.0]), Err(Error::Schema(_))));
    }
}
