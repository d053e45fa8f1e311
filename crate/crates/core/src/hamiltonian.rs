//! Contact Hamiltonians `H(x, p, u)` and their first derivatives.
//!
//! A [`HamiltonianSpec`] is an immutable bundle of closures plus the structural
//! facts the solvers rely on: convexity and superlinearity in `p`, the uniform
//! Lipschitz bound in `u`, and how `H` depends on `u` at all. Everything is
//! `Send + Sync`; specs are cheap to clone and may be shared across workers.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// `H(x, p, u)`.
pub type ScalarField = Arc<dyn Fn(&[f64], &[f64], f64) -> f64 + Send + Sync>;

/// Writes a gradient (in `x` or in `p`) of `H` at `(x, p, u)` into the output slice.
pub type VectorField = Arc<dyn Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync>;

/// Default central-difference step used when analytic derivatives are absent.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Flags {
    pub convex_in_p: bool,
    pub superlinear_in_p: bool,
    pub u_independent: bool,
}

/// How `H` depends on its value argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UStructure {
    /// `H(x, p, u) = H(x, p, 0)`.
    Independent,
    /// `H(x, p, u) = H(x, p, 0) + slope * u`.
    Affine { slope: f64 },
    General,
}

#[derive(Clone)]
pub struct HamiltonianSpec {
    name: String,
    eval: ScalarField,
    grad_x: Option<VectorField>,
    grad_p: Option<VectorField>,
    grad_u: Option<ScalarField>,
    u_lipschitz: f64,
    flags: Flags,
    u_structure: UStructure,
    axes: usize,
}

impl fmt::Debug for HamiltonianSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianSpec")
            .field("name", &self.name)
            .field("u_lipschitz", &self.u_lipschitz)
            .field("flags", &self.flags)
            .field("u_structure", &self.u_structure)
            .field("analytic_grad_x", &self.grad_x.is_some())
            .field("analytic_grad_p", &self.grad_p.is_some())
            .field("analytic_grad_u", &self.grad_u.is_some())
            .finish()
    }
}

impl HamiltonianSpec {
    /// A spec with no analytic derivatives, general `u`-dependence and no
    /// structural flags. Use the `with_*` builders to declare more.
    pub fn new<F>(name: impl Into<String>, eval: F) -> Self
    where
        F: Fn(&[f64], &[f64], f64) -> f64 + Send + Sync + 'static,
    {
        HamiltonianSpec {
            name: name.into(),
            eval: Arc::new(eval),
            grad_x: None,
            grad_p: None,
            grad_u: None,
            u_lipschitz: 0.0,
            flags: Flags::default(),
            u_structure: UStructure::General,
            axes: 1,
        }
    }

    pub fn with_grad_x<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync + 'static,
    {
        self.grad_x = Some(Arc::new(f));
        self
    }

    pub fn with_grad_p<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], &[f64], f64, &mut [f64]) + Send + Sync + 'static,
    {
        self.grad_p = Some(Arc::new(f));
        self
    }

    pub fn with_grad_u<F>(mut self, f: F) -> Self
    where
        F: Fn(&[f64], &[f64], f64) -> f64 + Send + Sync + 'static,
    {
        self.grad_u = Some(Arc::new(f));
        self
    }

    pub fn with_u_lipschitz(mut self, c: f64) -> Self {
        self.u_lipschitz = c;
        self
    }

    pub fn with_u_structure(mut self, s: UStructure) -> Self {
        self.u_structure = s;
        self.flags.u_independent = matches!(s, UStructure::Independent);
        if let UStructure::Affine { slope } = s {
            self.u_lipschitz = self.u_lipschitz.max(slope.abs());
        }
        self
    }

    /// Declares convexity in `p`.
    pub fn convex(mut self) -> Self {
        self.flags.convex_in_p = true;
        self
    }

    /// Declares superlinear growth in `p`.
    pub fn superlinear(mut self) -> Self {
        self.flags.superlinear_in_p = true;
        self
    }

    /// The spec reads coordinates up to axis `n - 1`.
    pub fn with_axes(mut self, n: usize) -> Self {
        self.axes = self.axes.max(n);
        self
    }

    /// Smallest dimension the spec can be evaluated in.
    pub fn axes(&self) -> usize {
        self.axes
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        if d < self.axes {
            return Err(Error::Precondition(format!(
                "`{}` needs dimension at least {}, got {d}",
                self.name, self.axes
            )));
        }
        Ok(())
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn flags(&self) -> Flags {
        self.flags
    }

    pub fn u_structure(&self) -> UStructure {
        self.u_structure
    }

    /// The constant of the uniform Lipschitz bound in `u`; also the growth
    /// rate used by the barrier functions.
    pub fn u_lipschitz(&self) -> f64 {
        self.u_lipschitz
    }

    pub fn has_analytic_gradients(&self) -> bool {
        self.grad_x.is_some() && self.grad_p.is_some() && self.grad_u.is_some()
    }

    /// Convex and superlinear in `p`: the semigroup solvers accept exactly these.
    pub fn is_admissible(&self) -> bool {
        self.flags.convex_in_p && self.flags.superlinear_in_p
    }

    /// Raw evaluation, no finiteness check. Hot loops use this.
    #[inline]
    pub fn value(&self, x: &[f64], p: &[f64], u: f64) -> f64 {
        (self.eval)(x, p, u)
    }

    pub(crate) fn overflow(&self, x: &[f64], p: &[f64], u: f64) -> Error {
        Error::HamiltonianOverflow {
            name: self.name.clone(),
            x: x.to_vec(),
            p: p.to_vec(),
            u,
        }
    }
}

/// Evaluates `H(x, p, u)`, rejecting non-finite results.
pub fn eval_hamiltonian(spec: &HamiltonianSpec, x: &[f64], p: &[f64], u: f64) -> Result<f64> {
    let h = spec.value(x, p, u);
    if h.is_finite() {
        Ok(h)
    } else {
        Err(spec.overflow(x, p, u))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub dx: Vec<f64>,
    pub dp: Vec<f64>,
    pub du: f64,
}

/// `(D_x H, D_p H, dH/du)` at `(x, p, u)`. Analytic pieces are used when the
/// spec supplies them; every missing piece falls back to central differences
/// with step `fd_step` in each coordinate.
pub fn eval_gradients(
    spec: &HamiltonianSpec,
    x: &[f64],
    p: &[f64],
    u: f64,
    fd_step: f64,
) -> Result<Gradients> {
    let d = x.len();
    let stencil_failure = || Error::GradientStencil {
        name: spec.name.clone(),
        x: x.to_vec(),
        p: p.to_vec(),
        u,
    };
    let needs_fd = spec.grad_x.is_none() || spec.grad_p.is_none() || spec.grad_u.is_none();
    if needs_fd && !(fd_step > 0.0 && fd_step.is_finite()) {
        return Err(Error::Precondition(format!(
            "fd_step must be positive, got {fd_step}"
        )));
    }

    let mut dx = vec![0.0; d];
    match &spec.grad_x {
        Some(g) => g(x, p, u, &mut dx),
        None => {
            let mut xs = x.to_vec();
            for k in 0..d {
                xs[k] = x[k] + fd_step;
                let hi = spec.value(&xs, p, u);
                xs[k] = x[k] - fd_step;
                let lo = spec.value(&xs, p, u);
                xs[k] = x[k];
                dx[k] = (hi - lo) / (2.0 * fd_step);
            }
        }
    }

    let mut dp = vec![0.0; p.len()];
    match &spec.grad_p {
        Some(g) => g(x, p, u, &mut dp),
        None => {
            let mut ps = p.to_vec();
            for k in 0..p.len() {
                ps[k] = p[k] + fd_step;
                let hi = spec.value(x, &ps, u);
                ps[k] = p[k] - fd_step;
                let lo = spec.value(x, &ps, u);
                ps[k] = p[k];
                dp[k] = (hi - lo) / (2.0 * fd_step);
            }
        }
    }

    let du = match &spec.grad_u {
        Some(g) => g(x, p, u),
        None => {
            let hi = spec.value(x, p, u + fd_step);
            let lo = spec.value(x, p, u - fd_step);
            (hi - lo) / (2.0 * fd_step)
        }
    };

    if dx.iter().chain(dp.iter()).all(|v| v.is_finite()) && du.is_finite() {
        Ok(Gradients { dx, dp, du })
    } else {
        Err(stencil_failure())
    }
}

/// A scalar map `f: R -> R` for building `f(H)`.
#[derive(Clone)]
pub struct ScalarMap {
    pub name: String,
    pub f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub df: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
    /// Caller asserts `f` is increasing and convex on the range of `H` that
    /// the composed spec will see.
    pub increasing_convex: bool,
    /// `sup |f'|` over that range; scales the `u`-Lipschitz constant.
    pub slope_bound: f64,
}

impl ScalarMap {
    pub fn new<F>(name: impl Into<String>, f: F, slope_bound: f64) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        ScalarMap {
            name: name.into(),
            f: Arc::new(f),
            df: None,
            increasing_convex: false,
            slope_bound,
        }
    }

    pub fn with_derivative<F>(mut self, df: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.df = Some(Arc::new(df));
        self
    }

    pub fn increasing_convex(mut self) -> Self {
        self.increasing_convex = true;
        self
    }
}

/// `f(H)`, with chain-rule derivatives when both `f'` and the derivatives of
/// `H` are available. Convexity and superlinearity carry over only when the
/// map is declared increasing and convex.
pub fn compose_scalar(spec: &HamiltonianSpec, map: &ScalarMap) -> HamiltonianSpec {
    let inner = spec.eval.clone();
    let f = map.f.clone();
    let mut out = HamiltonianSpec::new(format!("{}({})", map.name, spec.name), move |x, p, u| {
        f(inner(x, p, u))
    });

    if let Some(df) = &map.df {
        let chain_vec = |g: &VectorField| -> VectorField {
            let g = g.clone();
            let df = df.clone();
            let inner = spec.eval.clone();
            Arc::new(move |x: &[f64], p: &[f64], u: f64, out: &mut [f64]| {
                g(x, p, u, out);
                let s = df(inner(x, p, u));
                out.iter_mut().for_each(|v| *v *= s);
            })
        };
        out.grad_x = spec.grad_x.as_ref().map(chain_vec);
        out.grad_p = spec.grad_p.as_ref().map(chain_vec);
        if let Some(gu) = &spec.grad_u {
            let gu = gu.clone();
            let df = df.clone();
            let inner = spec.eval.clone();
            out.grad_u = Some(Arc::new(move |x: &[f64], p: &[f64], u: f64| {
                df(inner(x, p, u)) * gu(x, p, u)
            }));
        }
    }

    out.u_lipschitz = map.slope_bound * spec.u_lipschitz;
    out.u_structure = match spec.u_structure {
        UStructure::Independent => UStructure::Independent,
        _ => UStructure::General,
    };
    out.flags = Flags {
        convex_in_p: map.increasing_convex && spec.flags.convex_in_p,
        superlinear_in_p: map.increasing_convex && spec.flags.superlinear_in_p,
        u_independent: spec.flags.u_independent,
    };
    out.axes = spec.axes;
    out
}

/// `k H`. For `k > 0` every structural flag is preserved.
pub fn scale(spec: &HamiltonianSpec, k: f64) -> HamiltonianSpec {
    let out = combination(&[(k, spec)]);
    out.renamed(format!("{k}*{}", spec.name))
}

/// `H + c`.
pub fn shift(spec: &HamiltonianSpec, c: f64) -> HamiltonianSpec {
    let inner = spec.eval.clone();
    let mut out = HamiltonianSpec::new(format!("{}+{c}", spec.name), move |x, p, u| {
        inner(x, p, u) + c
    });
    out.grad_x = spec.grad_x.clone();
    out.grad_p = spec.grad_p.clone();
    out.grad_u = spec.grad_u.clone();
    out.u_lipschitz = spec.u_lipschitz;
    out.flags = spec.flags;
    out.u_structure = spec.u_structure;
    out.axes = spec.axes;
    out
}

/// `sum_i w_i H_i`. Convexity needs every weighted term convex with `w >= 0`;
/// superlinearity additionally needs one strictly weighted superlinear term.
pub fn combination(terms: &[(f64, &HamiltonianSpec)]) -> HamiltonianSpec {
    let evals: Vec<(f64, ScalarField)> = terms.iter().map(|(w, s)| (*w, s.eval.clone())).collect();
    let name = terms
        .iter()
        .map(|(w, s)| format!("{w}*{}", s.name))
        .collect::<Vec<_>>()
        .join("+");
    let mut out = HamiltonianSpec::new(name, move |x, p, u| {
        evals.iter().map(|(w, e)| w * e(x, p, u)).sum()
    });

    let all = |pick: &dyn Fn(&HamiltonianSpec) -> bool| terms.iter().all(|(_, s)| pick(s));

    if all(&|s| s.grad_x.is_some()) {
        out.grad_x = Some(sum_vector_fields(terms, |s| s.grad_x.clone().unwrap()));
    }
    if all(&|s| s.grad_p.is_some()) {
        out.grad_p = Some(sum_vector_fields(terms, |s| s.grad_p.clone().unwrap()));
    }
    if all(&|s| s.grad_u.is_some()) {
        let gus: Vec<(f64, ScalarField)> = terms
            .iter()
            .map(|(w, s)| (*w, s.grad_u.clone().unwrap()))
            .collect();
        out.grad_u = Some(Arc::new(move |x: &[f64], p: &[f64], u: f64| {
            gus.iter().map(|(w, g)| w * g(x, p, u)).sum()
        }));
    }

    out.u_lipschitz = terms.iter().map(|(w, s)| w.abs() * s.u_lipschitz).sum();
    out.axes = terms.iter().map(|(_, s)| s.axes).max().unwrap_or(1);
    let convex = terms
        .iter()
        .all(|(w, s)| *w == 0.0 || (*w > 0.0 && s.flags.convex_in_p));
    let superlinear = convex
        && terms
            .iter()
            .any(|(w, s)| *w > 0.0 && s.flags.superlinear_in_p);

    let mut slope = 0.0;
    let mut structure = UStructure::Independent;
    for (w, s) in terms {
        match s.u_structure {
            UStructure::Independent => {}
            UStructure::Affine { slope: a } => {
                slope += w * a;
                if structure == UStructure::Independent {
                    structure = UStructure::Affine { slope: 0.0 };
                }
            }
            UStructure::General if *w != 0.0 => structure = UStructure::General,
            UStructure::General => {}
        }
    }
    if let UStructure::Affine { .. } = structure {
        structure = UStructure::Affine { slope };
    }
    out.u_structure = structure;
    out.flags = Flags {
        convex_in_p: convex,
        superlinear_in_p: superlinear,
        u_independent: structure == UStructure::Independent,
    };
    out
}

fn sum_vector_fields(
    terms: &[(f64, &HamiltonianSpec)],
    pick: impl Fn(&HamiltonianSpec) -> VectorField,
) -> VectorField {
    let fields: Vec<(f64, VectorField)> = terms.iter().map(|(w, s)| (*w, pick(s))).collect();
    Arc::new(move |x: &[f64], p: &[f64], u: f64, out: &mut [f64]| {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut buf = vec![0.0; out.len()];
        for (w, g) in &fields {
            g(x, p, u, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += w * b;
            }
        }
    })
}
