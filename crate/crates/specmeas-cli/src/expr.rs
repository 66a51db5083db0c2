//! A small complex expression language for `funcalc`.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Names: the spectral variable `l` (alias `x`), `i`, `pi`, `e` and any
//! variable bound by the caller (such as `t`). Functions: `exp`, `sin`,
//! `cos`, `sqrt`, `abs`, `log`, `pow(a, b)` and the window `chi(a, b)`, which
//! is 1 when `a <= Re l <= b` and 0 otherwise.

use std::collections::BTreeMap;
use std::f64::consts::{E, PI};

use num_complex::Complex64 as C64;

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Bin(char, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Sym(char),
}

fn lex(s: &str) -> Result<Vec<Tok>, CliError> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        if c.is_whitespace() {
            k += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = k;
            while k < chars.len() && (chars[k].is_ascii_digit() || chars[k] == '.') {
                k += 1;
            }
            // Exponent part: 1e-3, 2.5E+4.
            if k < chars.len() && (chars[k] == 'e' || chars[k] == 'E') {
                let mut j = k + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    k = j;
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                }
            }
            let text: String = chars[start..k].iter().collect();
            let v = text.parse().map_err(|_| CliError::Usage(format!("bad number `{text}` in expression")))?;
            out.push(Tok::Num(v));
        } else if c.is_alphabetic() || c == '_' || c == 'χ' {
            let start = k;
            while k < chars.len() && (chars[k].is_alphanumeric() || chars[k] == '_' || chars[k] == 'χ') {
                k += 1;
            }
            out.push(Tok::Name(chars[start..k].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Tok::Sym(c));
            k += 1;
        } else {
            return Err(CliError::Usage(format!("unexpected `{c}` in expression")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, CliError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat('+') {
                lhs = Expr::Bin('+', Box::new(lhs), Box::new(self.term()?));
            } else if self.eat('-') {
                lhs = Expr::Bin('-', Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, CliError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat('*') {
                lhs = Expr::Bin('*', Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat('/') {
                lhs = Expr::Bin('/', Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, CliError> {
        if self.eat('-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Expr::Bin('^', Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, CliError> {
        match self.toks.get(self.pos).cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::Name(n)) => {
                self.pos += 1;
                if self.eat('(') {
                    let mut args = vec![self.expr()?];
                    while self.eat(',') {
                        args.push(self.expr()?);
                    }
                    if !self.eat(')') {
                        return Err(CliError::Usage(format!("missing `)` after arguments of `{n}`")));
                    }
                    Ok(Expr::Call(n, args))
                } else {
                    Ok(Expr::Var(n))
                }
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(')') {
                    return Err(CliError::Usage("unbalanced parentheses".into()));
                }
                Ok(e)
            }
            Some(t) => Err(CliError::Usage(format!("unexpected token {t:?} in expression"))),
            None => Err(CliError::Usage("expression ended early".into())),
        }
    }
}

const FUNCTIONS: [(&str, usize); 9] =
    [("exp", 1), ("sin", 1), ("cos", 1), ("sqrt", 1), ("abs", 1), ("log", 1), ("pow", 2), ("chi", 2), ("χ", 2)];

/// Parses and checks names against the spectral variable and `bound`.
pub fn parse(s: &str, bound: &[&str]) -> Result<Expr, CliError> {
    let mut p = Parser { toks: lex(s)?, pos: 0 };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(CliError::Usage(format!("trailing input in expression `{s}`")));
    }
    check(&e, bound)?;
    Ok(e)
}

fn check(e: &Expr, bound: &[&str]) -> Result<(), CliError> {
    match e {
        Expr::Num(_) => Ok(()),
        Expr::Var(v) => {
            if ["l", "x", "i", "pi", "e"].contains(&v.as_str()) || bound.contains(&v.as_str()) {
                Ok(())
            } else {
                Err(CliError::Usage(format!("unknown variable `{v}`")))
            }
        }
        Expr::Neg(a) => check(a, bound),
        Expr::Bin(_, a, b) => {
            check(a, bound)?;
            check(b, bound)
        }
        Expr::Call(f, args) => {
            match FUNCTIONS.iter().find(|(n, _)| n == f) {
                None => return Err(CliError::Usage(format!("unknown function `{f}`"))),
                Some((_, arity)) if *arity != args.len() => {
                    return Err(CliError::Usage(format!("`{f}` takes {arity} argument(s)")))
                }
                _ => {}
            }
            args.iter().try_for_each(|a| check(a, bound))
        }
    }
}

/// Evaluates at `l` with the given variable bindings.
pub fn eval(e: &Expr, l: C64, vars: &BTreeMap<String, f64>) -> C64 {
    match e {
        Expr::Num(v) => C64::new(*v, 0.0),
        Expr::Var(v) => match v.as_str() {
            "l" | "x" => l,
            "i" => C64::new(0.0, 1.0),
            "pi" => C64::new(PI, 0.0),
            "e" => C64::new(E, 0.0),
            other => C64::new(vars.get(other).copied().unwrap_or(f64::NAN), 0.0),
        },
        Expr::Neg(a) => -eval(a, l, vars),
        Expr::Bin(op, a, b) => {
            let (x, y) = (eval(a, l, vars), eval(b, l, vars));
            match op {
                '+' => x + y,
                '-' => x - y,
                '*' => x * y,
                '/' => x / y,
                _ => {
                    if y.im == 0.0 && y.re.fract() == 0.0 && y.re.abs() <= 64.0 {
                        x.powi(y.re as i32)
                    } else {
                        x.powc(y)
                    }
                }
            }
        }
        Expr::Call(f, args) => {
            let a: Vec<C64> = args.iter().map(|x| eval(x, l, vars)).collect();
            match f.as_str() {
                "exp" => a[0].exp(),
                "sin" => a[0].sin(),
                "cos" => a[0].cos(),
                "sqrt" => a[0].sqrt(),
                "abs" => C64::new(a[0].norm(), 0.0),
                "log" => a[0].ln(),
                "pow" => a[0].powc(a[1]),
                _ => {
                    let inside = l.re >= a[0].re && l.re <= a[1].re;
                    C64::new(if inside { 1.0 } else { 0.0 }, 0.0)
                }
            }
        }
    }
}
