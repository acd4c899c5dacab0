//! A small deterministic expression language for per-component data:
//! arithmetic over frame variables (`s` on segments, `u`, `v` on patches,
//! plus `t` when time-dependent data is allowed), numeric literals, `sin`,
//! `cos`, `exp`, and powers via `^`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    /// Evaluate with the variable values bound in declaration order.
    pub fn eval(&self, vars: &[f64]) -> Result<f64> {
        let v = self.eval_raw(vars);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Eval(format!("expression evaluated to {v} at {vars:?}")))
        }
    }

    fn eval_raw(&self, vars: &[f64]) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => vars[*i],
            Expr::Add(a, b) => a.eval_raw(vars) + b.eval_raw(vars),
            Expr::Sub(a, b) => a.eval_raw(vars) - b.eval_raw(vars),
            Expr::Mul(a, b) => a.eval_raw(vars) * b.eval_raw(vars),
            Expr::Div(a, b) => a.eval_raw(vars) / b.eval_raw(vars),
            Expr::Pow(a, b) => a.eval_raw(vars).powf(b.eval_raw(vars)),
            Expr::Neg(a) => -a.eval_raw(vars),
            Expr::Sin(a) => a.eval_raw(vars).sin(),
            Expr::Cos(a) => a.eval_raw(vars).cos(),
            Expr::Exp(a) => a.eval_raw(vars).exp(),
        }
    }
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    vars: &'a [&'a str],
}

impl<'a> Parser<'a> {
    fn error(&self, msg: &str) -> Error {
        Error::Expr(format!("{msg} at position {} in '{}'", self.pos, self.src))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        let base = self.unary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            // Right-associative power.
            let exp = self.factor()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            _ => Err(self.error("expected a number, variable, function, or '('")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E')
                && self.pos > start
                && self
                    .bytes
                    .get(self.pos + 1)
                    .is_some_and(|&d| d.is_ascii_digit() || d == b'+' || d == b'-')
            {
                self.pos += 2;
            } else {
                break;
            }
        }
        self.src[start..self.pos]
            .parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| self.error("malformed number"))
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let arg = self.expr()?;
            if self.peek() != Some(b')') {
                return Err(self.error("expected ')'"));
            }
            self.pos += 1;
            let arg = Box::new(arg);
            return match name {
                "sin" => Ok(Expr::Sin(arg)),
                "cos" => Ok(Expr::Cos(arg)),
                "exp" => Ok(Expr::Exp(arg)),
                _ => {
                    self.pos = start;
                    Err(self.error(&format!("unknown function '{name}'")))
                }
            };
        }
        match self.vars.iter().position(|v| *v == name) {
            Some(i) => Ok(Expr::Var(i)),
            None => {
                self.pos = start;
                Err(self.error(&format!(
                    "unknown variable '{name}' (allowed: {})",
                    self.vars.join(", ")
                )))
            }
        }
    }
}

/// Parse an expression over the given variable names (in binding order).
pub fn parse_expression(text: &str, vars: &[&str]) -> Result<Expr> {
    let mut p = Parser {
        src: text,
        bytes: text.as_bytes(),
        pos: 0,
        vars,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(p.error("trailing input"));
    }
    Ok(e)
}

/// Variable names for a component dimension: `s` for segments, `u`, `v` for
/// patches; `with_time` appends `t`.
pub fn frame_vars(dim: u8, with_time: bool) -> Vec<&'static str> {
    let mut v: Vec<&'static str> = if dim == 1 { vec!["s"] } else { vec!["u", "v"] };
    if with_time {
        v.push("t");
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_coordinate() {
        let e = parse_expression("s", &["s"]).unwrap();
        assert_eq!(e.eval(&[0.75]).unwrap(), 0.75);
    }

    #[test]
    fn radial_cosine() {
        let e = parse_expression("cos(3.14159265358979*(u*u+v*v))", &["u", "v"]).unwrap();
        let got = e.eval(&[0.3, 0.4]).unwrap();
        assert!((got - (std::f64::consts::PI * 0.25).cos()).abs() < 1e-5);
    }

    #[test]
    fn division_by_zero_reports_eval_error() {
        let e = parse_expression("1/0", &["s"]).unwrap();
        assert!(e.eval(&[0.0]).is_err());
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_expression("s + * 2", &["s"]).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("position 4"), "{msg}");
    }

    #[test]
    fn unknown_variable_rejected() {
        assert!(parse_expression("x + 1", &["s"]).is_err());
    }

    #[test]
    fn powers_and_precedence() {
        let e = parse_expression("2*s^3 - s/2 + 1", &["s"]).unwrap();
        assert!((e.eval(&[2.0]).unwrap() - (16.0 - 1.0 + 1.0)).abs() < 1e-14);
        // Right-associative power.
        let e = parse_expression("2^3^2", &[]).unwrap();
        assert_eq!(e.eval(&[]).unwrap(), 512.0);
    }
}
