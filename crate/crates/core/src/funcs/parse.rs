//! Text syntax for expressions:
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary ('*' unary)*
//! unary := '-' unary | power
//! power := atom ('^' int)?
//! atom  := number | 'z' | 'i' | 'exp' '(' expr ')' | 'pow1mz' '(' num ')'
//!        | 'tower' '(' int ',' num ',' num ')' | 'const' '(' num [',' num] ')'
//!        | '(' expr ')'
//! ```

use num_complex::Complex64;

use super::{build_tower, Expr, TowerSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
}

fn lex(s: &str) -> Result<Vec<(usize, Tok)>> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
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
            let v = text
                .parse()
                .map_err(|_| Error::Parse(format!("bad number '{text}' at {start}")))?;
            out.push((start, Tok::Num(v)));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((start, Tok::Ident(chars[start..i].iter().collect())));
        } else if "+-*^(),".contains(c) {
            out.push((i, Tok::Sym(c)));
            i += 1;
        } else {
            return Err(Error::Parse(format!("unexpected character '{c}' at {i}")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn at(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.len)
    }

    fn err<T>(&self, what: &str) -> Result<T> {
        Err(Error::Parse(format!("{what} at position {}", self.at())))
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(&format!("expected '{c}'"))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                acc = acc.add(&self.term()?);
            } else if self.eat('-') {
                acc = acc.sub(&self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.unary()?;
        while self.eat('*') {
            acc = acc.mul(&self.unary()?);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.eat('-') {
            return Ok(self.unary()?.neg());
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.eat('^') {
            let n = self.number()?;
            if n < 0.0 || n.fract() != 0.0 || n > u32::MAX as f64 {
                return self.err("exponent must be a non-negative integer");
            }
            return Ok(base.powi(n as u32));
        }
        Ok(base)
    }

    /// A possibly signed numeric literal.
    fn number(&mut self) -> Result<f64> {
        let sign = if self.eat('-') { -1.0 } else { 1.0 };
        match self.peek() {
            Some(Tok::Num(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(sign * v)
            }
            _ => self.err("expected a number"),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of input");
        };
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Expr::real(v)),
            Tok::Sym('(') => {
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "z" => Ok(Expr::z()),
                "i" => Ok(Expr::constant(Complex64::new(0.0, 1.0))),
                "exp" => {
                    self.expect('(')?;
                    let e = self.expr()?;
                    self.expect(')')?;
                    Ok(e.exp())
                }
                "pow1mz" => {
                    self.expect('(')?;
                    let mu = self.number()?;
                    self.expect(')')?;
                    Ok(Expr::pow1mz(mu))
                }
                "tower" => {
                    self.expect('(')?;
                    let level = self.number()?;
                    self.expect(',')?;
                    let c = self.number()?;
                    self.expect(',')?;
                    let mu = self.number()?;
                    self.expect(')')?;
                    if level.fract() != 0.0 || level < 0.0 {
                        return self.err("tower level must be an integer");
                    }
                    let spec = TowerSpec::new(level as u32, c, mu)
                        .map_err(|e| Error::Parse(e.to_string()))?;
                    Ok(build_tower(&spec))
                }
                "const" => {
                    self.expect('(')?;
                    let re = self.number()?;
                    let im = if self.eat(',') { self.number()? } else { 0.0 };
                    self.expect(')')?;
                    Ok(Expr::constant(Complex64::new(re, im)))
                }
                other => {
                    self.pos -= 1;
                    self.err(&format!("unknown name '{other}'"))
                }
            },
            Tok::Sym(c) => {
                self.pos -= 1;
                self.err(&format!("unexpected '{c}'"))
            }
        }
    }
}

pub fn parse_expr(s: &str) -> Result<Expr> {
    let toks = lex(s)?;
    let mut p = Parser {
        toks,
        pos: 0,
        len: s.len(),
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return p.err("trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn at(s: &str, z: Complex64) -> Complex64 {
        parse_expr(s).unwrap().eval_complex(z)
    }

    #[test]
    fn grammar_examples() {
        let z = Complex64::new(0.3, -0.2);
        let one = Complex64::new(1.0, 0.0);
        assert!((at("1 + 2*z - 3*z^2", z) - (1.0 + 2.0 * z - 3.0 * z * z)).norm() < 1e-15);
        assert!((at("exp(pow1mz(1))", z) - (one / (one - z)).exp()).norm() < 1e-13);
        assert!((at("-z^2", z) + z * z).norm() < 1e-15);
        assert!((at("const(1,-2) * i", z) - Complex64::new(2.0, 1.0)).norm() < 1e-15);
        assert!((at("1.5e-1*z", z) - 0.15 * z).norm() < 1e-15);
        assert!((at("pow1mz(-1)", z) - (one - z)).norm() < 1e-15);
        let t = at("tower(2,1,1)", z);
        assert!((t - (one / (one - z)).exp().exp()).norm() < 1e-12 * t.norm());
    }

    #[test]
    fn display_round_trips() {
        for s in ["exp(z)*pow1mz(2) - 3*z", "tower(3,1,0.5)", "const(1,-2)*(z+1)^3", "-exp(-z)"] {
            let e = parse_expr(s).unwrap();
            let again = parse_expr(&e.to_string()).unwrap();
            let z = Complex64::new(0.1, 0.2);
            assert!((e.eval_complex(z) - again.eval_complex(z)).norm() < 1e-14, "{s} -> {e}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        for s in ["", "z +", "foo(z)", "z^-1", "z^1.5", "tower(4,1,1)", "tower(2,-1,1)", "(z", "z)", "z # 2", "exp z"] {
            assert!(matches!(parse_expr(s), Err(Error::Parse(_))), "{s}");
        }
    }
}
