//! The forced system with impulse effects: vector field `f(x, u)`, reset
//! `Delta(x, v)` and switching surface `S = {H(x) = 0}`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::norm::{all_finite, euclidean};

/// A state vector in `R^n`.
pub type State = Vec<f64>;

/// Failure raised by a user evaluator.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{0}")]
pub struct EvalError(pub String);

impl EvalError {
    pub fn new(msg: impl Into<String>) -> Self {
        EvalError(msg.into())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("evaluator `{which}` failed: {source}")]
    Evaluator { which: &'static str, source: EvalError },
    #[error("evaluator `{which}` returned a non-finite value")]
    NonFinite { which: &'static str },
    #[error("evaluator failure at probe {probe}: {source}")]
    EvaluatorFailure { probe: usize, source: Box<SystemError> },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

type VectorFieldFn = dyn Fn(&[f64], &[f64], &mut [f64]) -> Result<(), EvalError> + Send + Sync;
type ResetFn = dyn Fn(&[f64], &[f64], &mut [f64]) -> Result<(), EvalError> + Send + Sync;
type SurfaceFn = dyn Fn(&[f64]) -> Result<f64, EvalError> + Send + Sync;
type GradientFn = dyn Fn(&[f64], &mut [f64]) -> Result<(), EvalError> + Send + Sync;

/// How the discrete phase relates to the switching surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResetKind {
    /// A genuine impulse: `Delta` must move the state off `S` into `S+`
    /// (or onto `S` with the flow leaving into `S+`).
    Impulsive,
    /// A continuous-time system observed through a Poincare section: the
    /// reset is the identity on `x` and ignores `v`, so the state stays on
    /// `S` and only a later `+ -> -` crossing counts as the next impact.
    SectionAdapter,
}

/// The triple `(f, Delta, H)` with dimensions `(n, p, q)`.
///
/// Immutable once built and cheap to clone.
#[derive(Clone)]
pub struct HybridSystemDef {
    name: String,
    n: usize,
    p: usize,
    q: usize,
    f: Arc<VectorFieldFn>,
    delta: Arc<ResetFn>,
    h: Arc<SurfaceFn>,
    grad_h: Option<Arc<GradientFn>>,
    reset_kind: ResetKind,
}

impl fmt::Debug for HybridSystemDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HybridSystemDef")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("p", &self.p)
            .field("q", &self.q)
            .field("analytic_gradient", &self.grad_h.is_some())
            .field("reset_kind", &self.reset_kind)
            .finish()
    }
}

impl HybridSystemDef {
    pub fn new<F, D, H>(name: impl Into<String>, dims: (usize, usize, usize), f: F, delta: D, h: H) -> Self
    where
        F: Fn(&[f64], &[f64], &mut [f64]) -> Result<(), EvalError> + Send + Sync + 'static,
        D: Fn(&[f64], &[f64], &mut [f64]) -> Result<(), EvalError> + Send + Sync + 'static,
        H: Fn(&[f64]) -> Result<f64, EvalError> + Send + Sync + 'static,
    {
        let (n, p, q) = dims;
        Self {
            name: name.into(),
            n,
            p,
            q,
            f: Arc::new(f),
            delta: Arc::new(delta),
            h: Arc::new(h),
            grad_h: None,
            reset_kind: ResetKind::Impulsive,
        }
    }

    pub fn with_gradient<G>(mut self, grad: G) -> Self
    where
        G: Fn(&[f64], &mut [f64]) -> Result<(), EvalError> + Send + Sync + 'static,
    {
        self.grad_h = Some(Arc::new(grad));
        self
    }

    pub fn as_section_adapter(mut self) -> Self {
        self.reset_kind = ResetKind::SectionAdapter;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn p(&self) -> usize {
        self.p
    }
    pub fn q(&self) -> usize {
        self.q
    }
    pub fn reset_kind(&self) -> ResetKind {
        self.reset_kind
    }
    pub fn has_analytic_gradient(&self) -> bool {
        self.grad_h.is_some()
    }

    /// `f(x, u)` into `out`.
    pub fn vector_field_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) -> Result<(), SystemError> {
        (self.f)(x, u, out).map_err(|source| SystemError::Evaluator { which: "f", source })?;
        if !all_finite(out) {
            return Err(SystemError::NonFinite { which: "f" });
        }
        Ok(())
    }

    pub fn vector_field(&self, x: &[f64], u: &[f64]) -> Result<State, SystemError> {
        let mut out = vec![0.0; self.n];
        self.vector_field_into(x, u, &mut out)?;
        Ok(out)
    }

    /// `Delta(x, v)`.
    pub fn reset(&self, x: &[f64], v: &[f64]) -> Result<State, SystemError> {
        let mut out = vec![0.0; self.n];
        (self.delta)(x, v, &mut out).map_err(|source| SystemError::Evaluator {
            which: "delta",
            source,
        })?;
        if !all_finite(&out) {
            return Err(SystemError::NonFinite { which: "delta" });
        }
        Ok(out)
    }

    /// `H(x)`.
    pub fn surface(&self, x: &[f64]) -> Result<f64, SystemError> {
        let h = (self.h)(x).map_err(|source| SystemError::Evaluator { which: "h", source })?;
        if !h.is_finite() {
            return Err(SystemError::NonFinite { which: "h" });
        }
        Ok(h)
    }

    /// `dH/dx`, analytic when provided, central differences otherwise.
    pub fn surface_gradient(&self, x: &[f64]) -> Result<State, SystemError> {
        match &self.grad_h {
            Some(g) => {
                let mut out = vec![0.0; self.n];
                g(x, &mut out).map_err(|source| SystemError::Evaluator {
                    which: "grad_h",
                    source,
                })?;
                if !all_finite(&out) {
                    return Err(SystemError::NonFinite { which: "grad_h" });
                }
                Ok(out)
            }
            None => self.fd_surface_gradient(x),
        }
    }

    /// Central differences with `h_i = 1e-6 * max(1, |x_i|)`.
    pub fn fd_surface_gradient(&self, x: &[f64]) -> Result<State, SystemError> {
        let mut xp = x.to_vec();
        let mut grad = vec![0.0; self.n];
        for i in 0..self.n {
            let step = 1e-6 * x[i].abs().max(1.0);
            xp[i] = x[i] + step;
            let hp = self.surface(&xp)?;
            xp[i] = x[i] - step;
            let hm = self.surface(&xp)?;
            xp[i] = x[i];
            grad[i] = (hp - hm) / (2.0 * step);
        }
        Ok(grad)
    }

    /// Lie derivative `L_f H = (dH/dx) f(x, u)`.
    pub fn lie_derivative(&self, x: &[f64], u: &[f64]) -> Result<f64, SystemError> {
        let g = self.surface_gradient(x)?;
        let f = self.vector_field(x, u)?;
        Ok(crate::norm::dot(&g, &f))
    }

    pub(crate) fn check_state(&self, x: &[f64]) -> Result<(), SystemError> {
        if x.len() != self.n {
            return Err(SystemError::Dimension(format!(
                "state has length {} but n = {}",
                x.len(),
                self.n
            )));
        }
        if !all_finite(x) {
            return Err(SystemError::Dimension("state has non-finite entries".into()));
        }
        Ok(())
    }
}

/// Per-probe outcome of [`validate_system`].
#[derive(Debug, Clone, Serialize)]
pub struct ProbeCheck {
    pub index: usize,
    pub f_finite: bool,
    pub reset_finite: bool,
    pub h_finite: bool,
    pub h_value: f64,
    pub on_surface: bool,
    pub gradient_norm: f64,
    /// Relative mismatch between the analytic gradient and central differences.
    pub gradient_mismatch: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub system: String,
    pub probes: Vec<ProbeCheck>,
    pub max_gradient_mismatch: f64,
    /// `||dH/dx|| < 1e-12` at some probe on `S`: the surface is not an
    /// embedded codimension-one submanifold there.
    pub degenerate_gradient: bool,
}

impl ValidationReport {
    pub fn all_finite(&self) -> bool {
        self.probes.iter().all(|p| p.f_finite && p.reset_finite && p.h_finite)
    }

    pub fn passed(&self) -> bool {
        self.all_finite() && !self.degenerate_gradient && self.max_gradient_mismatch <= GRADIENT_MISMATCH_TOL
    }
}

/// Relative tolerance for analytic-vs-FD gradient agreement.
pub const GRADIENT_MISMATCH_TOL: f64 = 1e-5;

/// Tolerance deciding whether a probe lies on `S`.
pub const SURFACE_PROBE_TOL: f64 = 1e-10;

/// Spot-checks smoothness and well-posedness of a system at probe states.
pub fn validate_system(sys: &HybridSystemDef, probes: &[State]) -> Result<ValidationReport, SystemError> {
    if probes.is_empty() {
        return Err(SystemError::Dimension("no probe states given".into()));
    }
    let u0 = vec![0.0; sys.p()];
    let v0 = vec![0.0; sys.q()];
    let mut checks = Vec::with_capacity(probes.len());
    for (index, x) in probes.iter().enumerate() {
        let wrap = |e: SystemError| SystemError::EvaluatorFailure {
            probe: index,
            source: Box::new(e),
        };
        sys.check_state(x).map_err(wrap)?;
        let mut fx = vec![0.0; sys.n()];
        (sys.f)(x, &u0, &mut fx)
            .map_err(|source| wrap(SystemError::Evaluator { which: "f", source }))?;
        let mut dx = vec![0.0; sys.n()];
        (sys.delta)(x, &v0, &mut dx)
            .map_err(|source| wrap(SystemError::Evaluator { which: "delta", source }))?;
        let h = (sys.h)(x).map_err(|source| wrap(SystemError::Evaluator { which: "h", source }))?;
        let fd = sys.fd_surface_gradient(x).map_err(wrap)?;
        let gradient_mismatch = if sys.has_analytic_gradient() {
            let g = sys.surface_gradient(x).map_err(wrap)?;
            let diff: Vec<f64> = g.iter().zip(&fd).map(|(a, b)| a - b).collect();
            Some(euclidean(&diff) / euclidean(&fd).max(1.0))
        } else {
            None
        };
        let gradient_norm = euclidean(&sys.surface_gradient(x).map_err(wrap)?);
        checks.push(ProbeCheck {
            index,
            f_finite: all_finite(&fx),
            reset_finite: all_finite(&dx),
            h_finite: h.is_finite(),
            h_value: h,
            on_surface: h.abs() <= SURFACE_PROBE_TOL,
            gradient_norm,
            gradient_mismatch,
        });
    }
    let max_gradient_mismatch = checks
        .iter()
        .filter_map(|c| c.gradient_mismatch)
        .fold(0.0, f64::max);
    let degenerate_gradient = checks.iter().any(|c| c.on_surface && c.gradient_norm < 1e-12);
    Ok(ValidationReport {
        system: sys.name().to_string(),
        probes: checks,
        max_gradient_mismatch,
        degenerate_gradient,
    })
}
