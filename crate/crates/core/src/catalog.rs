//! Named test Hamiltonians and the `name(key=value,...)` selector syntax.
//!
//! Selectors nest through an `of=` argument, e.g.
//! `shift(c=1,of=discount(alpha=1))` or `scale(k=2,of=contact)`.

use std::fmt;

use crate::error::{Error, Result};
use crate::hamiltonian::{self, HamiltonianSpec, ScalarMap, UStructure};

const MAX_DEPTH: usize = 16;

pub fn quadratic() -> HamiltonianSpec {
    HamiltonianSpec::new("quadratic", |_, p, _| 0.5 * dot(p, p))
        .with_grad_x(|_, _, _, out| out.fill(0.0))
        .with_grad_p(|_, p, _, out| out.copy_from_slice(p))
        .with_grad_u(|_, _, _| 0.0)
        .with_u_structure(UStructure::Independent)
        .convex()
        .superlinear()
}

/// `|p|^2/2 + V(x)` with `V(x) = sum_k (1 - cos x_k)`.
pub fn quadratic_potential() -> HamiltonianSpec {
    HamiltonianSpec::new("quadratic_potential", |x, p, _| 0.5 * dot(p, p) + potential(x))
        .with_grad_x(|x, _, _, out| grad_potential(x, out))
        .with_grad_p(|_, p, _, out| out.copy_from_slice(p))
        .with_grad_u(|_, _, _| 0.0)
        .with_u_structure(UStructure::Independent)
        .convex()
        .superlinear()
}

/// `|p|^2/2 + alpha u`.
pub fn discount(alpha: f64) -> HamiltonianSpec {
    HamiltonianSpec::new(format!("discount(alpha={alpha})"), move |_, p, u| {
        0.5 * dot(p, p) + alpha * u
    })
    .with_grad_x(|_, _, _, out| out.fill(0.0))
    .with_grad_p(|_, p, _, out| out.copy_from_slice(p))
    .with_grad_u(move |_, _, _| alpha)
    .with_u_lipschitz(alpha.abs())
    .with_u_structure(UStructure::Affine { slope: alpha })
    .convex()
    .superlinear()
}

/// `|p|^2/2 + alpha u + V(x)`, the full contact test case.
pub fn contact(alpha: f64) -> HamiltonianSpec {
    HamiltonianSpec::new(format!("contact(alpha={alpha})"), move |x, p, u| {
        0.5 * dot(p, p) + alpha * u + potential(x)
    })
    .with_grad_x(|x, _, _, out| grad_potential(x, out))
    .with_grad_p(|_, p, _, out| out.copy_from_slice(p))
    .with_grad_u(move |_, _, _| alpha)
    .with_u_lipschitz(alpha.abs())
    .with_u_structure(UStructure::Affine { slope: alpha })
    .convex()
    .superlinear()
}

/// `a |p| + sin u`. Convex but only linearly growing in `p`, so the
/// semigroup solvers reject it; it exists for bracket scans.
pub fn eikonal_sine(a: f64) -> HamiltonianSpec {
    HamiltonianSpec::new(format!("eikonal_sine(a={a})"), move |_, p, u| {
        a * dot(p, p).sqrt() + u.sin()
    })
    .with_grad_x(|_, _, _, out| out.fill(0.0))
    .with_grad_p(move |_, p, _, out| {
        let n = dot(p, p).sqrt();
        for (o, pk) in out.iter_mut().zip(p) {
            *o = if n > 0.0 { a * pk / n } else { 0.0 };
        }
    })
    .with_grad_u(|_, _, u| u.cos())
    .with_u_lipschitz(1.0)
    .convex()
}

/// `H = p_k` (0-based axis `k`).
pub fn momentum_probe(k: usize) -> HamiltonianSpec {
    HamiltonianSpec::new(format!("p{}", k + 1), move |_, p, _| p[k])
        .with_grad_x(|_, _, _, out| out.fill(0.0))
        .with_grad_p(move |_, _, _, out| {
            out.fill(0.0);
            out[k] = 1.0;
        })
        .with_grad_u(|_, _, _| 0.0)
        .with_u_structure(UStructure::Independent)
        .with_axes(k + 1)
        .convex()
}

/// `H = x_k` (0-based axis `k`).
pub fn position_probe(k: usize) -> HamiltonianSpec {
    HamiltonianSpec::new(format!("x{}", k + 1), move |x, _, _| x[k])
        .with_grad_x(move |_, _, _, out| {
            out.fill(0.0);
            out[k] = 1.0;
        })
        .with_grad_p(|_, _, _, out| out.fill(0.0))
        .with_grad_u(|_, _, _| 0.0)
        .with_u_structure(UStructure::Independent)
        .with_axes(k + 1)
        .convex()
}

/// `H = u`.
pub fn value_probe() -> HamiltonianSpec {
    HamiltonianSpec::new("u", |_, _, u| u)
        .with_grad_x(|_, _, _, out| out.fill(0.0))
        .with_grad_p(|_, _, _, out| out.fill(0.0))
        .with_grad_u(|_, _, _| 1.0)
        .with_u_lipschitz(1.0)
        .with_u_structure(UStructure::Affine { slope: 1.0 })
        .convex()
}

/// `f(t) = t^2`, declared increasing and convex on `[0, bound]`.
pub fn square_map(bound: f64) -> ScalarMap {
    ScalarMap::new("square", |t| t * t, 2.0 * bound)
        .with_derivative(|t| 2.0 * t)
        .increasing_convex()
}

/// The default catalog. Every entry is addressable through [`resolve`] by its name.
pub fn builtin_catalog() -> Vec<HamiltonianSpec> {
    [
        "quadratic",
        "quadratic_potential",
        "discount(alpha=1)",
        "contact(alpha=1)",
        "shift(c=1,of=discount(alpha=1))",
        "scale(k=2,of=quadratic)",
        "scale(k=2,of=contact(alpha=1))",
        "eikonal_sine(a=1)",
        "p1",
        "x1",
        "u",
    ]
    .iter()
    .map(|s| resolve(s).expect("builtin selector"))
    .collect()
}

/// Looks up a Hamiltonian by selector string. The returned spec is named by
/// the canonical form of the selector.
pub fn resolve(selector: &str) -> Result<HamiltonianSpec> {
    let sel = Selector::parse(selector)?;
    build(&sel, 0)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArgValue {
    Number(f64),
    Nested(Selector),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selector {
    pub name: String,
    pub args: Vec<(String, ArgValue)>,
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, (k, v)) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                match v {
                    ArgValue::Number(x) => write!(f, "{k}={x}")?,
                    ArgValue::Nested(s) => write!(f, "{k}={s}")?,
                }
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl Selector {
    pub fn parse(input: &str) -> Result<Selector> {
        let mut p = SelectorParser {
            src: input.as_bytes(),
            pos: 0,
        };
        p.skip_ws();
        let sel = p.selector(0)?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("trailing characters"));
        }
        Ok(sel)
    }

    fn number(&self, key: &str, default: f64) -> Result<f64> {
        match self.arg(key) {
            None => Ok(default),
            Some(ArgValue::Number(x)) => Ok(*x),
            Some(ArgValue::Nested(_)) => Err(Error::parse(
                "hamiltonian selector",
                format!("`{}`: `{key}` must be a number", self.name),
            )),
        }
    }

    fn nested(&self, key: &str) -> Result<&Selector> {
        match self.arg(key) {
            Some(ArgValue::Nested(s)) => Ok(s),
            _ => Err(Error::parse(
                "hamiltonian selector",
                format!("`{}` requires `{key}=<hamiltonian>`", self.name),
            )),
        }
    }

    fn arg(&self, key: &str) -> Option<&ArgValue> {
        self.args.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for (k, _) in &self.args {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::parse(
                    "hamiltonian selector",
                    format!("`{}` does not take `{k}`", self.name),
                ));
            }
        }
        Ok(())
    }
}

fn build(sel: &Selector, depth: usize) -> Result<HamiltonianSpec> {
    if depth > MAX_DEPTH {
        return Err(Error::parse("hamiltonian selector", "nesting too deep"));
    }
    let finite = |key: &str, v: f64| -> Result<f64> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::parse(
                "hamiltonian selector",
                format!("`{key}` must be finite"),
            ))
        }
    };
    let name = sel.name.as_str();
    let spec = match name {
        "quadratic" => {
            sel.check_keys(&[])?;
            quadratic()
        }
        "quadratic_potential" => {
            sel.check_keys(&[])?;
            quadratic_potential()
        }
        "discount" => {
            sel.check_keys(&["alpha"])?;
            discount(finite("alpha", sel.number("alpha", 1.0)?)?)
        }
        "contact" => {
            sel.check_keys(&["alpha"])?;
            contact(finite("alpha", sel.number("alpha", 1.0)?)?)
        }
        "eikonal_sine" => {
            sel.check_keys(&["a"])?;
            let a = finite("a", sel.number("a", 1.0)?)?;
            if a <= 0.0 {
                return Err(Error::parse("hamiltonian selector", "`a` must be positive"));
            }
            eikonal_sine(a)
        }
        "u" => {
            sel.check_keys(&[])?;
            value_probe()
        }
        "scale" => {
            sel.check_keys(&["k", "of"])?;
            let k = finite("k", sel.number("k", 1.0)?)?;
            hamiltonian::scale(&build(sel.nested("of")?, depth + 1)?, k)
        }
        "shift" => {
            sel.check_keys(&["c", "of"])?;
            let c = finite("c", sel.number("c", 0.0)?)?;
            hamiltonian::shift(&build(sel.nested("of")?, depth + 1)?, c)
        }
        "square" => {
            sel.check_keys(&["of", "bound"])?;
            let bound = finite("bound", sel.number("bound", 10.0)?)?;
            hamiltonian::compose_scalar(&build(sel.nested("of")?, depth + 1)?, &square_map(bound))
        }
        _ => match probe_axis(name) {
            Some((kind, k)) if sel.args.is_empty() => {
                if kind == 'p' {
                    momentum_probe(k)
                } else {
                    position_probe(k)
                }
            }
            _ => return Err(Error::UnknownHamiltonian(sel.to_string())),
        },
    };
    Ok(spec.renamed(sel.to_string()))
}

fn probe_axis(name: &str) -> Option<(char, usize)> {
    let mut chars = name.chars();
    let kind = chars.next()?;
    if kind != 'p' && kind != 'x' {
        return None;
    }
    let rest = chars.as_str();
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) || rest.len() > 2 {
        return None;
    }
    let k: usize = rest.parse().ok()?;
    if k == 0 {
        return None;
    }
    Some((kind, k - 1))
}

struct SelectorParser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl SelectorParser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::parse(
            "hamiltonian selector",
            format!("{msg} at byte {}", self.pos),
        )
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        while let Some(b) = self.peek() {
            if b.is_ascii_alphanumeric() || b == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        if start == self.pos || self.src[start].is_ascii_digit() {
            return Err(self.error("expected identifier"));
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn selector(&mut self, depth: usize) -> Result<Selector> {
        if depth > MAX_DEPTH {
            return Err(self.error("nesting too deep"));
        }
        let name = self.ident()?;
        let mut args = Vec::new();
        if self.eat(b'(')
            && !self.eat(b')') {
                loop {
                    let key = self.ident()?;
                    if !self.eat(b'=') {
                        return Err(self.error("expected `=`"));
                    }
                    self.skip_ws();
                    let value = match self.peek() {
                        Some(b) if b.is_ascii_digit() || b == b'-' || b == b'+' || b == b'.' => {
                            ArgValue::Number(self.number()?)
                        }
                        _ => ArgValue::Nested(self.selector(depth + 1)?),
                    };
                    if args.iter().any(|(k, _): &(String, ArgValue)| *k == key) {
                        return Err(self.error("duplicate key"));
                    }
                    args.push((key, value));
                    if self.eat(b')') {
                        break;
                    }
                    if !self.eat(b',') {
                        return Err(self.error("expected `,` or `)`"));
                    }
                }
            }
        Ok(Selector { name, args })
    }

    fn number(&mut self) -> Result<f64> {
        let start = self.pos;
        while let Some(b) = self.peek() {
            if b.is_ascii_digit() || matches!(b, b'-' | b'+' | b'.' | b'e' | b'E') {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        text.parse::<f64>()
            .map_err(|_| self.error(&format!("bad number `{text}`")))
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn potential(x: &[f64]) -> f64 {
    x.iter().map(|xk| 1.0 - xk.cos()).sum()
}

fn grad_potential(x: &[f64], out: &mut [f64]) {
    for (o, xk) in out.iter_mut().zip(x) {
        *o = xk.sin();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn find<'a>(cat: &'a [HamiltonianSpec], name: &str) -> &'a HamiltonianSpec {
        cat.iter().find(|h| h.name() == name).unwrap_or_else(|| panic!("{name} missing"))
    }

    #[test]
    fn catalog_contents() {
        let cat = builtin_catalog();
        assert!(find(&cat, "quadratic").flags().u_independent);
        assert_eq!(find(&cat, "discount(alpha=1)").u_lipschitz(), 1.0);
        let es = find(&cat, "eikonal_sine(a=1)");
        assert!(!es.flags().superlinear_in_p);
        assert!(!es.is_admissible());
        for name in ["quadratic_potential", "shift(c=1,of=discount(alpha=1))", "scale(k=2,of=quadratic)"] {
            assert!(find(&cat, name).is_admissible(), "{name}");
        }
    }

    #[test]
    fn selectors_round_trip_through_display() {
        for s in ["discount(alpha=0.5)", "scale(k=2,of=contact(alpha=1))", "p2", "square(of=discount(alpha=1),bound=3)"] {
            let sel = Selector::parse(s).unwrap();
            assert_eq!(Selector::parse(&sel.to_string()).unwrap(), sel);
        }
    }

    #[test]
    fn whitespace_is_tolerated() {
        let h = resolve(" shift( c = 2 , of = quadratic ) ").unwrap();
        assert_eq!(h.value(&[0.0], &[2.0], 0.0), 4.0);
        assert_eq!(h.name(), "shift(c=2,of=quadratic)");
    }

    #[test]
    fn resolve_errors() {
        assert!(matches!(resolve("nope"), Err(Error::UnknownHamiltonian(_))));
        assert!(resolve("discount(beta=1)").is_err());
        assert!(resolve("discount(alpha=1").is_err());
        assert!(resolve("discount(alpha=1,alpha=2)").is_err());
        assert!(resolve("scale(k=2)").is_err());
        assert!(resolve("discount(alpha=inf)").is_err());
        assert!(resolve("p0").is_err());
        assert!(resolve("").is_err());
    }

    #[test]
    fn deep_nesting_is_rejected() {
        let mut s = String::from("quadratic");
        for _ in 0..40 {
            s = format!("shift(c=1,of={s})");
        }
        assert!(resolve(&s).is_err());
    }

    #[test]
    fn probes_index_axes() {
        let p2 = resolve("p2").unwrap();
        assert_eq!(p2.value(&[0.0, 0.0], &[3.0, 5.0], 0.0), 5.0);
        let x1 = resolve("x1").unwrap();
        assert_eq!(x1.value(&[-1.5], &[3.0], 0.0), -1.5);
    }

    #[test]
    fn probes_reject_too_small_dimensions() {
        let x5 = resolve("shift(c=1,of=x5)").unwrap();
        assert_eq!(x5.axes(), 5);
        assert!(x5.check_dim(2).is_err());
        assert!(x5.check_dim(5).is_ok());
        let sum = crate::hamiltonian::combination(&[(1.0, &resolve("p2").unwrap()), (1.0, &resolve("quadratic").unwrap())]);
        assert_eq!(sum.axes(), 2);
        assert!(crate::bracket::bracket_scan(
            &resolve("p2").unwrap(),
            &resolve("x1").unwrap(),
            &crate::bracket::PhaseBox::parse("x=-1:1,p=-1:1,u=0:0", 1).unwrap(),
            &crate::bracket::ScanOptions::default(),
        )
        .is_err());
    }
}
