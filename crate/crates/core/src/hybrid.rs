//! Hybrid execution: alternating flow and reset with a right-continuous
//! solution and runtime guards against Zeno and beating behaviour.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{check_reset_landing, flow_to_impact, EventError, SolverConfig};
use crate::flow::{FlowError, FlowSegment};
use crate::signal::{ContinuousSignal, DiscreteSequence};
use crate::system::{HybridSystemDef, State, SystemError};

#[derive(Debug, Clone, Error)]
pub enum SimError {
    #[error("invalid simulation request: {0}")]
    InvalidInput(String),
    #[error("initial state lies in S- (H = {h:e})")]
    InitialStateInSMinus { h: f64 },
    #[error("trajectory has no impacts")]
    NoImpacts,
    #[error(transparent)]
    System(#[from] SystemError),
}

/// Runtime guards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuardConfig {
    pub enabled: bool,
    /// Maximum number of impacts.
    pub k_max: usize,
    /// Minimum time between impacts; defaults to `1e-6 T*` when the period is
    /// known, else `1e-9 t_final`.
    pub min_dwell: Option<f64>,
    pub reference_period: Option<f64>,
    /// Number of consecutive shrinking dwell times that signal accumulation.
    pub accumulation_window: usize,
    /// Each of those dwell times must be at most this fraction of the previous one.
    pub accumulation_ratio: f64,
}

impl Default for GuardConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            k_max: 10_000,
            min_dwell: None,
            reference_period: None,
            accumulation_window: 10,
            accumulation_ratio: 0.9,
        }
    }
}

impl GuardConfig {
    pub fn with_period(mut self, period: f64) -> Self {
        self.reference_period = Some(period);
        self
    }

    pub fn min_dwell(&self, t_final: f64) -> f64 {
        self.min_dwell.unwrap_or(match self.reference_period {
            Some(p) => 1e-6 * p,
            None => 1e-9 * t_final,
        })
    }
}

/// Why a simulation stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Termination {
    HorizonReached,
    ZenoGuard {
        k: usize,
        reason: String,
        /// Extrapolated accumulation time, when the dwell sequence is geometric.
        accumulation_time: Option<f64>,
    },
    BeatingGuard {
        k: usize,
    },
    Escape {
        t: f64,
        norm: f64,
    },
    Error {
        message: String,
    },
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Termination::HorizonReached => "horizon-reached",
            Termination::ZenoGuard { .. } => "zeno-guard",
            Termination::BeatingGuard { .. } => "beating-guard",
            Termination::Escape { .. } => "escape",
            Termination::Error { .. } => "error",
        }
    }

    pub fn is_guard(&self) -> bool {
        matches!(self, Termination::ZenoGuard { .. } | Termination::BeatingGuard { .. })
    }
}

/// One impact `(k, t_k, x_k^-, v_k, x_k^+)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Impact {
    pub k: usize,
    pub t: f64,
    pub x_minus: State,
    pub v: State,
    pub x_plus: State,
    /// `L_f H` at the crossing (`NaN` for an initial state placed on `S`).
    pub lfh: f64,
}

/// Right-continuous hybrid solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HybridTrajectory {
    pub segments: Vec<FlowSegment>,
    pub impacts: Vec<Impact>,
    pub t_final: f64,
    pub termination: Termination,
}

impl HybridTrajectory {
    /// `x(t)`; at an impact time this is the post-impact state.
    pub fn eval(&self, t: f64) -> Option<State> {
        let idx = self.segments.partition_point(|s| s.t0 <= t);
        if idx == 0 {
            return None;
        }
        let seg = &self.segments[idx - 1];
        if t > seg.t1 {
            return None;
        }
        Some(seg.eval(t))
    }

    /// `t_{k+1} - t_k` for consecutive impacts.
    pub fn dwell_times(&self) -> Vec<f64> {
        self.impacts.windows(2).map(|w| w[1].t - w[0].t).collect()
    }

    /// End time actually reached.
    pub fn t_end(&self) -> f64 {
        self.segments.last().map(|s| s.t1).unwrap_or(0.0)
    }
}

/// The discrete iterates `x_k`, i.e. the pre-impact states.
pub fn poincare_sequence(traj: &HybridTrajectory) -> Result<Vec<(usize, State)>, SimError> {
    if traj.impacts.is_empty() {
        return Err(SimError::NoImpacts);
    }
    Ok(traj.impacts.iter().map(|i| (i.k, i.x_minus.clone())).collect())
}

enum ImpactOutcome {
    Continue(State),
    Stop(Termination),
}

/// Simulates `psi(t, x0, u, vbar)` on `[0, t_final]`.
///
/// A state on `S` is reset immediately with `v_0`. Impacts within
/// `1e-9 max(1, t_final)` past the horizon are still recorded so that a
/// crossing landing exactly on `t_final` is not lost to rounding.
pub fn simulate(
    sys: &HybridSystemDef,
    x0: &[f64],
    u: &ContinuousSignal,
    vbar: &DiscreteSequence,
    t_final: f64,
    guards: &GuardConfig,
    cfg: &SolverConfig,
) -> Result<HybridTrajectory, SimError> {
    sys.check_state(x0)?;
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(SimError::InvalidInput(format!("t_final must be positive, got {t_final}")));
    }
    u.check(sys.p()).map_err(SimError::InvalidInput)?;
    vbar.check(sys.q()).map_err(SimError::InvalidInput)?;

    let mut traj = HybridTrajectory {
        segments: Vec::new(),
        impacts: Vec::new(),
        t_final,
        termination: Termination::HorizonReached,
    };
    let slack = 1e-9 * t_final.max(1.0);
    let min_dwell = guards.min_dwell(t_final);

    let h0 = sys.surface(x0)?;
    let mut t = 0.0;
    let mut x = x0.to_vec();
    if h0.abs() <= cfg.event_tol {
        match apply_impact(sys, &mut traj, 0.0, x0.to_vec(), f64::NAN, u, vbar, guards, min_dwell, t_final, cfg) {
            ImpactOutcome::Continue(xp) => x = xp,
            ImpactOutcome::Stop(term) => {
                traj.termination = term;
                return Ok(traj);
            }
        }
    } else if h0 < 0.0 {
        return Err(SimError::InitialStateInSMinus { h: h0 });
    }

    loop {
        let limit = t_final + slack;
        match flow_to_impact(sys, &x, u, t, limit, cfg) {
            Ok((mut seg, Some(ev))) => {
                let t_hit = ev.t_hit;
                let x_minus = seg.x1.clone();
                if seg.t1 > seg.t0 {
                    traj.segments.push(seg);
                } else {
                    seg.t1 = seg.t0;
                }
                match apply_impact(sys, &mut traj, t_hit, x_minus, ev.lfh, u, vbar, guards, min_dwell, t_final, cfg) {
                    ImpactOutcome::Continue(xp) => {
                        t = t_hit;
                        x = xp;
                        if t >= t_final {
                            // closing zero-length record at the horizon
                            traj.segments.push(FlowSegment {
                                t0: t,
                                t1: t,
                                x0: x.clone(),
                                x1: x.clone(),
                                steps: Vec::new(),
                                stats: Default::default(),
                            });
                            traj.termination = Termination::HorizonReached;
                            return Ok(traj);
                        }
                    }
                    ImpactOutcome::Stop(term) => {
                        traj.termination = term;
                        return Ok(traj);
                    }
                }
            }
            Ok((mut seg, None)) => {
                if seg.t1 > t_final {
                    seg.truncate(t_final);
                }
                traj.segments.push(seg);
                traj.termination = Termination::HorizonReached;
                return Ok(traj);
            }
            Err(EventError::Flow(FlowError::Blowup { t, norm, partial })) => {
                traj.segments.push(*partial);
                traj.termination = Termination::Escape { t, norm };
                return Ok(traj);
            }
            Err(e) => {
                traj.termination = Termination::Error { message: e.to_string() };
                return Ok(traj);
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn apply_impact(
    sys: &HybridSystemDef,
    traj: &mut HybridTrajectory,
    t_hit: f64,
    x_minus: State,
    lfh: f64,
    u: &ContinuousSignal,
    vbar: &DiscreteSequence,
    guards: &GuardConfig,
    min_dwell: f64,
    t_final: f64,
    cfg: &SolverConfig,
) -> ImpactOutcome {
    let k = traj.impacts.len();
    let v = vbar.value(k, sys.q());
    let x_plus = match sys.reset(&x_minus, &v) {
        Ok(xp) => xp,
        Err(e) => return ImpactOutcome::Stop(Termination::Error { message: e.to_string() }),
    };
    let u_now = u.eval(t_hit, sys.p());
    let landing = check_reset_landing(sys, &x_plus, &u_now, cfg);
    traj.impacts.push(Impact {
        k,
        t: t_hit,
        x_minus,
        v,
        x_plus: x_plus.clone(),
        lfh,
    });
    match landing {
        Ok(()) => {}
        Err(EventError::ResetNotInSPlus { .. }) if guards.enabled => {
            return ImpactOutcome::Stop(Termination::BeatingGuard { k });
        }
        Err(EventError::ResetNotInSPlus { .. }) => {}
        Err(e) => return ImpactOutcome::Stop(Termination::Error { message: e.to_string() }),
    }
    if guards.enabled {
        if let Some(term) = zeno_check(traj, guards, min_dwell, t_final) {
            return ImpactOutcome::Stop(term);
        }
    }
    ImpactOutcome::Continue(x_plus)
}

fn zeno_check(traj: &HybridTrajectory, guards: &GuardConfig, min_dwell: f64, t_final: f64) -> Option<Termination> {
    let k = traj.impacts.len() - 1;
    if traj.impacts.len() > guards.k_max {
        return Some(Termination::ZenoGuard {
            k,
            reason: format!("more than {} impacts", guards.k_max),
            accumulation_time: None,
        });
    }
    let n = traj.impacts.len();
    if n >= 2 {
        let dwell = traj.impacts[n - 1].t - traj.impacts[n - 2].t;
        if dwell < min_dwell {
            return Some(Termination::ZenoGuard {
                k,
                reason: format!("dwell time {dwell:e} below {min_dwell:e}"),
                accumulation_time: accumulation_estimate(traj),
            });
        }
    }
    let w = guards.accumulation_window;
    if w >= 2 && n > w {
        let dwells: Vec<f64> = traj.impacts[n - w - 1..]
            .windows(2)
            .map(|p| p[1].t - p[0].t)
            .collect();
        let shrinking = dwells
            .windows(2)
            .all(|d| d[0] > 0.0 && d[1] <= guards.accumulation_ratio * d[0]);
        if shrinking {
            if let Some(t_acc) = accumulation_estimate(traj) {
                if t_acc < t_final {
                    return Some(Termination::ZenoGuard {
                        k,
                        reason: format!("impact times accumulate near t = {t_acc}"),
                        accumulation_time: Some(t_acc),
                    });
                }
            }
        }
    }
    None
}

/// Geometric extrapolation of the impact times from the last three impacts.
fn accumulation_estimate(traj: &HybridTrajectory) -> Option<f64> {
    let n = traj.impacts.len();
    if n < 3 {
        return None;
    }
    let d1 = traj.impacts[n - 2].t - traj.impacts[n - 3].t;
    let d2 = traj.impacts[n - 1].t - traj.impacts[n - 2].t;
    let r = d2 / d1;
    if !(r > 0.0 && r < 1.0) {
        return None;
    }
    Some(traj.impacts[n - 1].t + d2 * r / (1.0 - r))
}
