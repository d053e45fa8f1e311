//! Initial-data expressions: signed sums of `c`, `a*abs(x)`, `a*cos(k*x)`,
//! `a*sin(k*x)` and `a*x^2`. In 2-D the variables are `x0` and `x1`; `x`
//! is an alias for `x0`.

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};

const WHAT: &str = "initial data";
const MAX_TERMS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Atom {
    One,
    Abs(usize),
    Cos(f64, usize),
    Sin(f64, usize),
    Square(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    terms: Vec<(f64, Atom)>,
}

impl InitialData {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser { src: src.as_bytes(), pos: 0 };
        let mut terms = Vec::new();
        p.skip_ws();
        let mut sign = match p.peek() {
            Some(b'-') => {
                p.pos += 1;
                -1.0
            }
            Some(b'+') => {
                p.pos += 1;
                1.0
            }
            _ => 1.0,
        };
        loop {
            let (c, atom) = p.term()?;
            if terms.len() == MAX_TERMS {
                return Err(Error::parse(WHAT, "too many terms"));
            }
            terms.push((sign * c, atom));
            p.skip_ws();
            sign = match p.peek() {
                None => break,
                Some(b'+') => 1.0,
                Some(b'-') => -1.0,
                Some(_) => return Err(p.error("expected `+` or `-`")),
            };
            p.pos += 1;
        }
        Ok(InitialData { terms })
    }

    /// Highest variable index used, plus one.
    pub fn dim(&self) -> usize {
        self.terms
            .iter()
            .map(|(_, a)| match *a {
                Atom::One => 0,
                Atom::Abs(k) | Atom::Cos(_, k) | Atom::Sin(_, k) | Atom::Square(k) => k + 1,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, a)| {
                c * match *a {
                    Atom::One => 1.0,
                    Atom::Abs(k) => x[k].abs(),
                    Atom::Cos(w, k) => (w * x[k]).cos(),
                    Atom::Sin(w, k) => (w * x[k]).sin(),
                    Atom::Square(k) => x[k] * x[k],
                }
            })
            .sum()
    }

    pub fn sample(&self, grid: GridSpec) -> Result<GridFunction> {
        if self.dim() > grid.dim() {
            return Err(Error::parse(
                WHAT,
                format!("expression uses x{} on a {}-D grid", self.dim() - 1, grid.dim()),
            ));
        }
        GridFunction::from_fn(grid, |x| self.eval(x))
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::parse(WHAT, format!("{msg} at byte {}", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|b| b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, lit: &str) -> Result<()> {
        self.skip_ws();
        if self.src[self.pos..].starts_with(lit.as_bytes()) {
            self.pos += lit.len();
            Ok(())
        } else {
            Err(self.error(&format!("expected `{lit}`")))
        }
    }

    fn at_number(&mut self) -> bool {
        self.skip_ws();
        self.peek().is_some_and(|b| b.is_ascii_digit() || b == b'.')
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while let Some(b) = self.peek() {
            let exp_sign = matches!(b, b'+' | b'-')
                && self.pos > start
                && matches!(self.src[self.pos - 1], b'e' | b'E');
            if b.is_ascii_digit() || b == b'.' || b == b'e' || b == b'E' || exp_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.error(&format!("bad number `{text}`"))),
        }
    }

    fn var(&mut self) -> Result<usize> {
        self.skip_ws();
        if self.peek() != Some(b'x') {
            return Err(self.error("expected variable `x`, `x0` or `x1`"));
        }
        self.pos += 1;
        match self.peek() {
            Some(b'0') => {
                self.pos += 1;
                Ok(0)
            }
            Some(b'1') => {
                self.pos += 1;
                Ok(1)
            }
            Some(b) if b.is_ascii_alphanumeric() => Err(self.error("unknown variable")),
            _ => Ok(0),
        }
    }

    fn term(&mut self) -> Result<(f64, Atom)> {
        if self.at_number() {
            let c = self.number()?;
            self.skip_ws();
            if self.peek() == Some(b'*') {
                self.pos += 1;
                return Ok((c, self.atom()?));
            }
            return Ok((c, Atom::One));
        }
        Ok((1.0, self.atom()?))
    }

    fn atom(&mut self) -> Result<Atom> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        if rest.starts_with(b"abs") {
            self.pos += 3;
            self.expect("(")?;
            let k = self.var()?;
            self.expect(")")?;
            Ok(Atom::Abs(k))
        } else if rest.starts_with(b"cos") || rest.starts_with(b"sin") {
            let is_cos = rest[0] == b'c';
            self.pos += 3;
            self.expect("(")?;
            let w = if self.at_number() {
                let w = self.number()?;
                self.expect("*")?;
                w
            } else {
                1.0
            };
            let k = self.var()?;
            self.expect(")")?;
            Ok(if is_cos { Atom::Cos(w, k) } else { Atom::Sin(w, k) })
        } else {
            let k = self.var()?;
            self.expect("^2")?;
            Ok(Atom::Square(k))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Boundary;

    fn eval(src: &str, x: &[f64]) -> f64 {
        InitialData::parse(src).unwrap().eval(x)
    }

    #[test]
    fn grammar_examples() {
        assert_eq!(eval("1", &[3.0]), 1.0);
        assert_eq!(eval("abs(x)", &[-2.0]), 2.0);
        assert_eq!(eval("0.5*x^2 - 1", &[2.0]), 1.0);
        assert!((eval("cos(2*x)", &[0.5]) - 1f64.cos()).abs() < 1e-15);
        assert!((eval("-sin(x) + 2*abs(x)", &[-1.0]) - (1f64.sin() + 2.0)).abs() < 1e-15);
        assert_eq!(eval("1e-1*x^2", &[1.0]), 0.1);
        assert_eq!(eval("2.5e+0", &[0.0]), 2.5);
    }

    #[test]
    fn two_dimensional_variables() {
        let f = InitialData::parse("x0^2 + abs(x1)").unwrap();
        assert_eq!(f.dim(), 2);
        assert_eq!(f.eval(&[2.0, -3.0]), 7.0);
        let g = GridSpec::new(1, 1.0, 5, Boundary::Clamped).unwrap();
        assert!(f.sample(g).is_err());
    }

    #[test]
    fn rejects_malformed_input() {
        for src in ["", "abs(y)", "cos(2*x", "x^3", "1 2", "tan(x)", "x2^2", "1e400", "--1", "abs(x)*2"] {
            assert!(InitialData::parse(src).is_err(), "{src}");
        }
    }

    #[test]
    fn samples_on_grid() {
        let g = GridSpec::new(1, 4.0, 201, Boundary::Clamped).unwrap();
        let u = InitialData::parse("abs(x)").unwrap().sample(g).unwrap();
        assert_eq!(u.values()[0], 4.0);
        assert_eq!(u.values()[100], 0.0);
    }
}
