//! The forced Poincaré map, on-surface coordinates, Newton fixed-point
//! search and the spectral stability verdict.

pub mod eigen;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{time_to_impact, EventError, SolverConfig, TimeToImpact};
use crate::norm::{distance, euclidean};
use crate::signal::ContinuousSignal;
use crate::system::{HybridSystemDef, State, SystemError};

pub use eigen::{eigenvalues, spectral_radius, EigenError, Eigenvalue};

/// Below this partial derivative the eliminated coordinate is not a chart.
pub const CHART_SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Error)]
pub enum PoincareError {
    #[error(transparent)]
    Event(#[from] EventError),
    #[error("no impact within {horizon} time units")]
    NoImpact { horizon: f64 },
    #[error("Newton iteration failed after {} iterates: {reason}", .iterates.len())]
    NewtonDiverged {
        reason: String,
        iterates: Vec<State>,
        residuals: Vec<f64>,
    },
    #[error("chart is singular: |dH/dx_{index}| = {value:e}")]
    ChartSingular { index: usize, value: f64 },
    #[error("chart embedding did not converge (|H| = {h:e})")]
    EmbedFailed { h: f64 },
    #[error(transparent)]
    Eigen(#[from] EigenError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl From<SystemError> for PoincareError {
    fn from(e: SystemError) -> Self {
        PoincareError::Event(EventError::System(e))
    }
}

/// Local coordinates on `S`: drop coordinate `index`, recover it by
/// solving `H = 0` along that coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceChart {
    pub index: usize,
    /// Point on `S` whose eliminated coordinate seeds the embedding solve.
    pub reference: State,
}

impl SurfaceChart {
    /// Chart eliminating the coordinate with the largest `|dH/dx_j|` at `x_ref`.
    pub fn at(sys: &HybridSystemDef, x_ref: &[f64]) -> Result<Self, PoincareError> {
        let g = sys.surface_gradient(x_ref)?;
        let mut index = 0;
        for (j, gj) in g.iter().enumerate() {
            if gj.abs() > g[index].abs() {
                index = j;
            }
        }
        Self::with_index(sys, x_ref, index)
    }

    pub fn with_index(sys: &HybridSystemDef, x_ref: &[f64], index: usize) -> Result<Self, PoincareError> {
        if x_ref.len() != sys.n() || index >= sys.n() {
            return Err(PoincareError::InvalidInput(format!(
                "chart index {index} for a state of length {}",
                x_ref.len()
            )));
        }
        if sys.n() < 2 {
            return Err(PoincareError::InvalidInput("the surface of a scalar system is a point".into()));
        }
        let value = sys.surface_gradient(x_ref)?[index];
        if value.abs() < CHART_SINGULAR_TOL {
            return Err(PoincareError::ChartSingular { index, value });
        }
        let mut chart = SurfaceChart {
            index,
            reference: x_ref.to_vec(),
        };
        chart.reference = chart.embed(sys, &chart.project(x_ref))?;
        Ok(chart)
    }

    pub fn dim(&self) -> usize {
        self.reference.len() - 1
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .filter(|(j, _)| *j != self.index)
            .map(|(_, v)| *v)
            .collect()
    }

    /// The point of `S` with chart coordinates `z`.
    pub fn embed(&self, sys: &HybridSystemDef, z: &[f64]) -> Result<State, PoincareError> {
        if z.len() != self.dim() {
            return Err(PoincareError::InvalidInput(format!(
                "chart coordinates of length {}, expected {}",
                z.len(),
                self.dim()
            )));
        }
        let mut x = Vec::with_capacity(z.len() + 1);
        x.extend_from_slice(&z[..self.index]);
        x.push(self.reference[self.index]);
        x.extend_from_slice(&z[self.index..]);
        let j = self.index;
        let mut h = sys.surface(&x)?;
        for _ in 0..50 {
            if h == 0.0 {
                return Ok(x);
            }
            let d = sys.surface_gradient(&x)?[j];
            if d.abs() < CHART_SINGULAR_TOL {
                return Err(PoincareError::ChartSingular { index: j, value: d });
            }
            let step = h / d;
            x[j] -= step;
            h = sys.surface(&x)?;
            if step.abs() <= 4.0 * f64::EPSILON * x[j].abs().max(1.0) {
                break;
            }
        }
        if h.abs() > 1e-12 * x[j].abs().max(1.0) {
            return Err(PoincareError::EmbedFailed { h });
        }
        Ok(x)
    }
}

/// Result of one application of the forced Poincaré map.
#[derive(Debug, Clone)]
pub struct MapStep {
    pub x_next: State,
    /// Time from the impact at `x` to the next one.
    pub dwell: f64,
}

/// `P(x, u, v)`: the pre-impact state of the first crossing after `Delta(x, v)`,
/// with the continuous phase starting at global time `t0`.
pub fn poincare_map_from(
    sys: &HybridSystemDef,
    x: &[f64],
    u: &ContinuousSignal,
    v: &[f64],
    t0: f64,
    cfg: &SolverConfig,
) -> Result<MapStep, PoincareError> {
    match time_to_impact(sys, x, u, v, t0, cfg)? {
        TimeToImpact::Hit { duration, x_next, .. } => Ok(MapStep { x_next, dwell: duration }),
        TimeToImpact::Infinite { horizon } => Err(PoincareError::NoImpact { horizon }),
    }
}

/// `P(x, u, v)` with the input clock starting at zero.
pub fn poincare_map(
    sys: &HybridSystemDef,
    x: &[f64],
    u: &ContinuousSignal,
    v: &[f64],
    cfg: &SolverConfig,
) -> Result<State, PoincareError> {
    poincare_map_from(sys, x, u, v, 0.0, cfg).map(|s| s.x_next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "LES")]
    Les,
    #[serde(rename = "LAS-marginal")]
    LasMarginal,
    #[serde(rename = "unstable")]
    Unstable,
}

impl Verdict {
    pub fn classify(spectral_radius: f64, margin: f64) -> Self {
        if spectral_radius < 1.0 - margin {
            Verdict::Les
        } else if (spectral_radius - 1.0).abs() <= margin {
            Verdict::LasMarginal
        } else {
            Verdict::Unstable
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Les => "LES",
            Verdict::LasMarginal => "LAS-marginal",
            Verdict::Unstable => "unstable",
        }
    }
}

/// Newton and finite-difference settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedPointConfig {
    pub solver: SolverConfig,
    /// Converged when `||F(z)|| <= newton_tol * max(1, ||z||)`.
    pub newton_tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Width of the band around 1 that yields the LAS-marginal verdict.
    pub margin: f64,
    /// Integrator tolerances used for map evaluations inside Newton and the
    /// finite-difference Jacobian. The map must be resolved well below
    /// `newton_tol` for the residual test to be meaningful.
    pub map_rtol: f64,
    pub map_atol: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            newton_tol: 1e-10,
            max_iter: 50,
            max_halvings: 20,
            margin: 1e-6,
            map_rtol: 1e-12,
            map_atol: 1e-14,
        }
    }
}

impl FixedPointConfig {
    pub fn with_solver(solver: SolverConfig) -> Self {
        Self {
            solver,
            ..Self::default()
        }
    }

    fn map_solver(&self) -> SolverConfig {
        let mut s = self.solver.clone();
        s.integrator.rtol = s.integrator.rtol.min(self.map_rtol);
        s.integrator.atol = s.integrator.atol.min(self.map_atol);
        s
    }
}

/// Fixed point, period and spectral verdict of the zero-input map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub model: String,
    pub x_star: State,
    pub t_star: f64,
    pub chart: SurfaceChart,
    /// Jacobian of the reduced map in chart coordinates, row-major.
    pub jacobian: Vec<Vec<f64>>,
    pub eigenvalues: Vec<Eigenvalue>,
    pub spectral_radius: f64,
    pub verdict: Option<Verdict>,
    pub margin: f64,
    /// `||F(z_k)||` for every Newton iterate, the last one converged.
    pub newton_residuals: Vec<f64>,
    /// Finite-difference steps used per chart coordinate.
    pub fd_steps: Vec<f64>,
    /// Largest componentwise difference between the Jacobians at steps `h` and `h/2`.
    pub richardson_estimate: f64,
    /// `||P(x*, 0, 0) - x*||` at the default solver tolerances.
    pub fixed_point_residual: f64,
}

impl StabilityReport {
    pub fn is_linearized(&self) -> bool {
        self.verdict.is_some()
    }
}

struct ReducedMap<'a> {
    sys: &'a HybridSystemDef,
    chart: &'a SurfaceChart,
    solver: SolverConfig,
    zero_v: Vec<f64>,
}

impl ReducedMap<'_> {
    fn eval(&self, z: &[f64]) -> Result<Vec<f64>, PoincareError> {
        let x = self.chart.embed(self.sys, z)?;
        let next = poincare_map(self.sys, &x, &ContinuousSignal::Zero, &self.zero_v, &self.solver)?;
        Ok(self.chart.project(&next))
    }

    fn residual(&self, z: &[f64]) -> Result<Vec<f64>, PoincareError> {
        let g = self.eval(z)?;
        Ok(g.iter().zip(z).map(|(a, b)| a - b).collect())
    }

    fn fd_step(zj: f64, scale: f64) -> f64 {
        f64::EPSILON.cbrt() * zj.abs().max(1.0) * scale
    }

    /// Central-difference Jacobian of `z -> project(P(embed(z)))`; column `j`
    /// uses step `scale * eps^(1/3) * max(1, |z_j|)`.
    fn jacobian(&self, z: &[f64], scale: f64) -> Result<Vec<Vec<f64>>, PoincareError> {
        let m = z.len();
        let cols: Vec<Result<Vec<f64>, PoincareError>> = (0..m)
            .into_par_iter()
            .map(|j| {
                let h = Self::fd_step(z[j], scale);
                let mut zp = z.to_vec();
                let mut zm = z.to_vec();
                zp[j] += h;
                zm[j] -= h;
                let gp = self.eval(&zp)?;
                let gm = self.eval(&zm)?;
                let width = zp[j] - zm[j];
                Ok(gp.iter().zip(&gm).map(|(a, b)| (a - b) / width).collect())
            })
            .collect();
        let mut jac = vec![vec![0.0; m]; m];
        for (j, col) in cols.into_iter().enumerate() {
            for (i, v) in col?.into_iter().enumerate() {
                jac[i][j] = v;
            }
        }
        Ok(jac)
    }
}

fn solve_linear(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let m = b.len();
    let mat = nalgebra::DMatrix::from_fn(m, m, |i, j| a[i][j]);
    let rhs = nalgebra::DVector::from_column_slice(b);
    let sol = mat.lu().solve(&rhs)?;
    sol.iter().all(|v| v.is_finite()).then(|| sol.iter().copied().collect())
}

/// Newton iteration on `F(z) = project(P(embed(z), 0, 0)) - z`. The returned
/// report has `x_star`, `t_star` and the residual history filled; call
/// [`linearize`] for the spectrum.
pub fn find_fixed_point(
    sys: &HybridSystemDef,
    x_guess: &[f64],
    cfg: &FixedPointConfig,
) -> Result<StabilityReport, PoincareError> {
    sys.check_state(x_guess)?;
    let chart = SurfaceChart::at(sys, x_guess)?;
    let map = ReducedMap {
        sys,
        chart: &chart,
        solver: cfg.map_solver(),
        zero_v: vec![0.0; sys.q()],
    };
    let mut z = chart.project(x_guess);
    let mut iterates = vec![chart.embed(sys, &z)?];
    let mut f = map.residual(&z)?;
    let mut r = euclidean(&f);
    let mut residuals = vec![r];
    let diverged = |reason: String, iterates: Vec<State>, residuals: Vec<f64>| PoincareError::NewtonDiverged {
        reason,
        iterates,
        residuals,
    };
    let mut converged = r <= cfg.newton_tol * euclidean(&z).max(1.0);
    let mut iter = 0;
    while !converged {
        if iter == cfg.max_iter {
            return Err(diverged(format!("no convergence in {} steps", cfg.max_iter), iterates, residuals));
        }
        iter += 1;
        let mut jac = match map.jacobian(&z, 1.0) {
            Ok(j) => j,
            Err(e) => return Err(diverged(format!("Jacobian evaluation failed: {e}"), iterates, residuals)),
        };
        for (i, row) in jac.iter_mut().enumerate() {
            row[i] -= 1.0;
        }
        let neg_f: Vec<f64> = f.iter().map(|v| -v).collect();
        let Some(dz) = solve_linear(&jac, &neg_f) else {
            return Err(diverged("singular Newton matrix".into(), iterates, residuals));
        };
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let trial: Vec<f64> = z.iter().zip(&dz).map(|(a, d)| a + lambda * d).collect();
            if let Ok(ft) = map.residual(&trial) {
                let rt = euclidean(&ft);
                if rt < r {
                    accepted = Some((trial, ft, rt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((zn, fnew, rn)) = accepted else {
            return Err(diverged("line search failed".into(), iterates, residuals));
        };
        z = zn;
        f = fnew;
        r = rn;
        residuals.push(r);
        iterates.push(chart.embed(sys, &z)?);
        converged = r <= cfg.newton_tol * euclidean(&z).max(1.0);
    }
    let x_star = chart.embed(sys, &z)?;
    let zero_v = vec![0.0; sys.q()];
    let step = poincare_map_from(sys, &x_star, &ContinuousSignal::Zero, &zero_v, 0.0, &cfg.solver)?;
    let chart = SurfaceChart::with_index(sys, &x_star, chart.index)?;
    Ok(StabilityReport {
        model: sys.name().to_string(),
        fixed_point_residual: distance(&step.x_next, &x_star),
        x_star,
        t_star: step.dwell,
        chart,
        jacobian: Vec::new(),
        eigenvalues: Vec::new(),
        spectral_radius: f64::NAN,
        verdict: None,
        margin: cfg.margin,
        newton_residuals: residuals,
        fd_steps: Vec::new(),
        richardson_estimate: f64::NAN,
    })
}

/// Fills the Jacobian, eigenvalues and verdict of `report` in its own chart.
pub fn linearize(
    sys: &HybridSystemDef,
    report: &StabilityReport,
    cfg: &FixedPointConfig,
) -> Result<StabilityReport, PoincareError> {
    linearize_in_chart(sys, report, &report.chart, cfg)
}

/// As [`linearize`], eliminating a caller-chosen coordinate instead.
pub fn linearize_with_index(
    sys: &HybridSystemDef,
    report: &StabilityReport,
    index: usize,
    cfg: &FixedPointConfig,
) -> Result<StabilityReport, PoincareError> {
    let chart = SurfaceChart::with_index(sys, &report.x_star, index)?;
    linearize_in_chart(sys, report, &chart, cfg)
}

fn linearize_in_chart(
    sys: &HybridSystemDef,
    report: &StabilityReport,
    chart: &SurfaceChart,
    cfg: &FixedPointConfig,
) -> Result<StabilityReport, PoincareError> {
    let map = ReducedMap {
        sys,
        chart,
        solver: cfg.map_solver(),
        zero_v: vec![0.0; sys.q()],
    };
    let z = chart.project(&report.x_star);
    let jac = map.jacobian(&z, 1.0)?;
    let half = map.jacobian(&z, 0.5)?;
    let richardson = jac
        .iter()
        .flatten()
        .zip(half.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let eigs = eigenvalues(&jac)?;
    let rho = spectral_radius(&eigs);
    let mut out = report.clone();
    out.chart = chart.clone();
    out.fd_steps = z.iter().map(|zj| ReducedMap::fd_step(*zj, 1.0)).collect();
    out.jacobian = jac;
    out.eigenvalues = eigs;
    out.spectral_radius = rho;
    out.verdict = Some(Verdict::classify(rho, cfg.margin));
    out.margin = cfg.margin;
    out.richardson_estimate = richardson;
    Ok(out)
}

/// [`find_fixed_point`] followed by [`linearize`].
pub fn analyze_orbit(
    sys: &HybridSystemDef,
    x_guess: &[f64],
    cfg: &FixedPointConfig,
) -> Result<StabilityReport, PoincareError> {
    let report = find_fixed_point(sys, x_guess, cfg)?;
    linearize(sys, &report, cfg)
}
