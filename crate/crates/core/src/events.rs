//! Crossings of the switching surface and the time-to-impact maps.
//!
//! Only `+ -> -` crossings of `H` count as impacts. A crossing is bracketed
//! on the dense output between the last sample with `H > event_tol` and the
//! first later sample with `H <= 0`, bisected to width
//! `1e-13 * max(1, t)` and finished with one Newton step on `L_f H`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{integrate_observed, DenseStep, FlowError, FlowSegment, IntegratorConfig, StepControl};
use crate::norm::{dot, euclidean};
use crate::signal::ContinuousSignal;
use crate::system::{HybridSystemDef, ResetKind, State, SystemError};

#[derive(Debug, Clone, Error)]
pub enum EventError {
    #[error("tangential graze of the switching surface at t = {t} (L_f H = {lfh:e})")]
    GrazeDetected { t: f64, lfh: f64 },
    #[error("H keeps its sign on the searched interval")]
    NoCrossing,
    #[error("state is not on the switching surface (H = {h:e})")]
    NotOnSurface { h: f64 },
    #[error("state is not strictly inside S+ (H = {h:e})")]
    NotInSPlus { h: f64 },
    #[error("reset does not land in S+ (H(Delta(x, v)) = {h:e})")]
    ResetNotInSPlus { h: f64 },
    #[error("crossing at t = {t} could not be localised (|H| = {h:e})")]
    Localization { t: f64, h: f64 },
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// Integrator settings plus event-location tolerances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub integrator: IntegratorConfig,
    /// Crossings satisfy `|H(x_minus)| <= event_tol`.
    pub event_tol: f64,
    /// Crossings with `|L_f H| < graze_factor * ||f|| * ||dH/dx||` are grazes.
    pub graze_factor: f64,
    /// Horizon after which the time to impact is reported as infinite.
    pub t_cap: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::default(),
            event_tol: 1e-10,
            graze_factor: 1e-8,
            t_cap: 100.0,
        }
    }
}

impl SolverConfig {
    pub fn with_t_cap(mut self, t_cap: f64) -> Self {
        self.t_cap = t_cap;
        self
    }
}

/// A transversal `+ -> -` crossing of `S`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImpactEvent {
    pub t_hit: f64,
    pub x_minus: State,
    /// `L_f H` at `(x_minus, u(t_hit))`; negative for accepted events.
    pub lfh: f64,
    /// Width of the final bisection bracket.
    pub width: f64,
}

const SAMPLES_PER_STEP: usize = 8;

/// Incremental bracket search over consecutive dense steps.
pub(crate) struct CrossingScanner<'a> {
    sys: &'a HybridSystemDef,
    u: &'a ContinuousSignal,
    cfg: &'a SolverConfig,
    from_t: f64,
    last_positive: Option<f64>,
    buf: Vec<f64>,
    ubuf: Vec<f64>,
}

impl<'a> CrossingScanner<'a> {
    pub(crate) fn new(
        sys: &'a HybridSystemDef,
        u: &'a ContinuousSignal,
        cfg: &'a SolverConfig,
        from_t: f64,
    ) -> Self {
        Self {
            sys,
            u,
            cfg,
            from_t,
            last_positive: None,
            buf: vec![0.0; sys.n()],
            ubuf: vec![0.0; sys.p()],
        }
    }

    fn h_at(&mut self, seg: &FlowSegment, t: f64) -> Result<f64, EventError> {
        seg.eval_into(t, &mut self.buf);
        Ok(self.sys.surface(&self.buf)?)
    }

    /// Scans `step` (the newest step of `seg`) for the first crossing after `from_t`.
    pub(crate) fn scan(&mut self, seg: &FlowSegment, step: &DenseStep) -> Result<Option<ImpactEvent>, EventError> {
        let (ta, tb) = (step.t, step.t_end().min(seg.t1));
        if tb < self.from_t {
            return Ok(None);
        }
        let start = ta.max(self.from_t);
        for i in 0..=SAMPLES_PER_STEP {
            let t = if i == SAMPLES_PER_STEP {
                tb
            } else {
                start + (tb - start) * i as f64 / SAMPLES_PER_STEP as f64
            };
            if i == 0 && self.last_positive.is_some() {
                continue;
            }
            let h = self.h_at(seg, t)?;
            if h > self.cfg.event_tol {
                self.last_positive = Some(t);
            } else if h <= 0.0 {
                if let Some(left) = self.last_positive {
                    return self.refine(seg, left, t).map(Some);
                }
            }
        }
        Ok(None)
    }

    fn refine(&mut self, seg: &FlowSegment, mut a: f64, mut b: f64) -> Result<ImpactEvent, EventError> {
        while b - a > 1e-13 * b.abs().max(1.0) {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if self.h_at(seg, mid)? > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        let width = b - a;
        let mid = 0.5 * (a + b);
        let hm = self.h_at(seg, mid)?;
        self.u.eval_into(mid, &mut self.ubuf);
        let lfh_mid = self.sys.lie_derivative(&self.buf, &self.ubuf)?;
        let mut t_hit = b;
        if lfh_mid != 0.0 {
            let newton = mid - hm / lfh_mid;
            if newton >= a && newton <= b {
                t_hit = newton;
            }
        }
        let x_minus = seg.eval(t_hit);
        let h = self.sys.surface(&x_minus)?;
        self.u.eval_into(t_hit, &mut self.ubuf);
        let grad = self.sys.surface_gradient(&x_minus)?;
        let f = self.sys.vector_field(&x_minus, &self.ubuf)?;
        let lfh = dot(&grad, &f);
        let graze_tol = self.cfg.graze_factor * euclidean(&f) * euclidean(&grad);
        if !(lfh < 0.0) || lfh.abs() < graze_tol {
            return Err(EventError::GrazeDetected { t: t_hit, lfh });
        }
        if h.abs() > self.cfg.event_tol {
            return Err(EventError::Localization { t: t_hit, h });
        }
        Ok(ImpactEvent {
            t_hit,
            x_minus,
            lfh,
            width,
        })
    }
}

/// First `+ -> -` crossing of `S` along `seg` strictly after `from_t`.
pub fn locate_crossing(
    seg: &FlowSegment,
    sys: &HybridSystemDef,
    u: &ContinuousSignal,
    from_t: f64,
    cfg: &SolverConfig,
) -> Result<ImpactEvent, EventError> {
    if !(from_t >= seg.t0 && from_t <= seg.t1) {
        return Err(EventError::Flow(FlowError::InvalidRequest(format!(
            "from_t = {from_t} outside [{}, {}]",
            seg.t0, seg.t1
        ))));
    }
    let mut scanner = CrossingScanner::new(sys, u, cfg, from_t);
    for step in &seg.steps {
        if let Some(ev) = scanner.scan(seg, step)? {
            return Ok(ev);
        }
    }
    Err(EventError::NoCrossing)
}

/// Flows from `x_start` at time `t_start` until the first crossing of `S` or
/// until `t_limit`, whichever comes first. The returned segment ends at the
/// crossing when there is one.
pub fn flow_to_impact(
    sys: &HybridSystemDef,
    x_start: &[f64],
    u: &ContinuousSignal,
    t_start: f64,
    t_limit: f64,
    cfg: &SolverConfig,
) -> Result<(FlowSegment, Option<ImpactEvent>), EventError> {
    let mut scanner = CrossingScanner::new(sys, u, cfg, t_start);
    let mut found: Option<ImpactEvent> = None;
    let (seg, _) = integrate_observed(sys, x_start, u, t_start, t_limit, &cfg.integrator, |seg, step| {
        match scanner.scan(seg, step)? {
            Some(ev) => {
                let t = ev.t_hit;
                found = Some(ev);
                Ok::<_, EventError>(StepControl::StopAt(t))
            }
            None => Ok(StepControl::Continue),
        }
    })?;
    if let Some(ev) = found.as_mut() {
        // the truncated segment ends exactly at the stored pre-impact state
        ev.x_minus = seg.x1.clone();
    }
    Ok((seg, found))
}

/// Result of a time-to-impact query.
#[derive(Debug, Clone)]
pub enum TimeToImpact {
    Hit {
        /// Elapsed time from the start of the query to the crossing.
        duration: f64,
        /// Pre-impact state at the crossing.
        x_next: State,
        event: ImpactEvent,
        segment: FlowSegment,
    },
    /// No crossing before `t_cap`; stands in for the infinite branch.
    Infinite { horizon: f64 },
}

impl TimeToImpact {
    pub fn duration(&self) -> f64 {
        match self {
            TimeToImpact::Hit { duration, .. } => *duration,
            TimeToImpact::Infinite { .. } => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, TimeToImpact::Infinite { .. })
    }
}

/// Checks that `Delta(x, v)` starts the next continuous phase properly:
/// strictly inside `S+`, or on `S` with the flow leaving into `S+`.
/// Section adapters are exempt because their identity reset stays on `S`.
pub(crate) fn check_reset_landing(
    sys: &HybridSystemDef,
    x_plus: &[f64],
    u_now: &[f64],
    cfg: &SolverConfig,
) -> Result<(), EventError> {
    if sys.reset_kind() == ResetKind::SectionAdapter {
        return Ok(());
    }
    let h = sys.surface(x_plus)?;
    if h > cfg.event_tol {
        return Ok(());
    }
    if h.abs() <= cfg.event_tol {
        let grad = sys.surface_gradient(x_plus)?;
        let f = sys.vector_field(x_plus, u_now)?;
        let lfh = dot(&grad, &f);
        if lfh > cfg.graze_factor * euclidean(&f) * euclidean(&grad) {
            return Ok(());
        }
    }
    Err(EventError::ResetNotInSPlus { h })
}

/// `T_I(x, u, v)`: time until `phi(., Delta(x, v), u)` reaches `S`, with the
/// continuous phase starting at global time `t0`.
pub fn time_to_impact(
    sys: &HybridSystemDef,
    x: &[f64],
    u: &ContinuousSignal,
    v: &[f64],
    t0: f64,
    cfg: &SolverConfig,
) -> Result<TimeToImpact, EventError> {
    sys.check_state(x)?;
    let h = sys.surface(x)?;
    if h.abs() > cfg.event_tol {
        return Err(EventError::NotOnSurface { h });
    }
    let x_plus = sys.reset(x, v)?;
    let u_now = u.eval(t0, sys.p());
    check_reset_landing(sys, &x_plus, &u_now, cfg)?;
    flow_until_surface(sys, &x_plus, u, t0, cfg)
}

/// `T^_I(x, u)`: time until `phi(., x, u)` reaches `S` from a state in `S+`.
pub fn time_to_impact_from_splus(
    sys: &HybridSystemDef,
    x: &[f64],
    u: &ContinuousSignal,
    t0: f64,
    cfg: &SolverConfig,
) -> Result<TimeToImpact, EventError> {
    sys.check_state(x)?;
    let h = sys.surface(x)?;
    if !(h > cfg.event_tol) {
        return Err(EventError::NotInSPlus { h });
    }
    flow_until_surface(sys, x, u, t0, cfg)
}

fn flow_until_surface(
    sys: &HybridSystemDef,
    x_start: &[f64],
    u: &ContinuousSignal,
    t0: f64,
    cfg: &SolverConfig,
) -> Result<TimeToImpact, EventError> {
    let (segment, event) = flow_to_impact(sys, x_start, u, t0, t0 + cfg.t_cap, cfg)?;
    Ok(match event {
        Some(event) => TimeToImpact::Hit {
            duration: event.t_hit - t0,
            x_next: event.x_minus.clone(),
            event,
            segment,
        },
        None => TimeToImpact::Infinite { horizon: cfg.t_cap },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::integrate;
    use std::f64::consts::{FRAC_PI_8, LN_2};

    fn linear_reset() -> HybridSystemDef {
        HybridSystemDef::new(
            "lr",
            (2, 1, 1),
            |x, u, dx| {
                dx[0] = 1.0;
                dx[1] = -LN_2 * x[1] + u[0];
                Ok(())
            },
            |x, v, out| {
                out[0] = 0.0;
                out[1] = x[1] + v[0];
                Ok(())
            },
            |x| Ok(1.0 - x[0]),
        )
    }

    fn wheel() -> HybridSystemDef {
        let (alpha, gamma) = (FRAC_PI_8, 0.08);
        HybridSystemDef::new(
            "wheel",
            (2, 1, 1),
            |x, u, dx| {
                dx[0] = x[1];
                dx[1] = 9.81 * x[0].sin() + u[0];
                Ok(())
            },
            move |x, v, out| {
                out[0] = gamma - alpha;
                out[1] = (2.0 * alpha).cos() * x[1] + v[0];
                Ok(())
            },
            move |x| Ok(gamma + alpha - x[0]),
        )
    }

    #[test]
    fn linear_reset_crossing() {
        let sys = linear_reset();
        let cfg = SolverConfig::default();
        let seg = integrate(&sys, &[0.0, 0.4], &ContinuousSignal::Zero, 1.5, &cfg.integrator).unwrap();
        let ev = locate_crossing(&seg, &sys, &ContinuousSignal::Zero, 0.0, &cfg).unwrap();
        assert!((ev.t_hit - 1.0).abs() < 1e-12);
        assert!((ev.x_minus[1] - 0.2).abs() < 1e-9);
        assert!((ev.lfh + 1.0).abs() < 1e-9);
    }

    #[test]
    fn no_crossing_in_splus() {
        let sys = linear_reset();
        let cfg = SolverConfig::default();
        let seg = integrate(&sys, &[0.0, 0.4], &ContinuousSignal::Zero, 0.9, &cfg.integrator).unwrap();
        assert!(matches!(
            locate_crossing(&seg, &sys, &ContinuousSignal::Zero, 0.0, &cfg),
            Err(EventError::NoCrossing)
        ));
    }

    #[test]
    fn wheel_crossing_matches_energy_balance() {
        let (alpha, gamma) = (FRAC_PI_8, 0.08);
        let sys = wheel();
        let cfg = SolverConfig::default();
        let w_plus = 1.0957;
        let seg = integrate(&sys, &[gamma - alpha, w_plus], &ContinuousSignal::Zero, 2.0, &cfg.integrator).unwrap();
        let ev = locate_crossing(&seg, &sys, &ContinuousSignal::Zero, 0.0, &cfg).unwrap();
        let w_minus = (w_plus * w_plus + 2.0 * 9.81 * ((gamma - alpha).cos() - (gamma + alpha).cos())).sqrt();
        assert!((ev.x_minus[0] - (gamma + alpha)).abs() < 1e-9);
        assert!((ev.x_minus[1] - w_minus).abs() < 1e-7);
    }

    #[test]
    fn time_to_impact_at_fixed_point() {
        let sys = linear_reset();
        let cfg = SolverConfig::default();
        let r = time_to_impact(&sys, &[1.0, 0.0], &ContinuousSignal::Zero, &[0.0], 0.0, &cfg).unwrap();
        assert!((r.duration() - 1.0).abs() < 1e-12);
        let forced = time_to_impact(&sys, &[1.0, 0.0], &ContinuousSignal::constant(vec![0.7]), &[0.0], 0.0, &cfg).unwrap();
        assert!((forced.duration() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn time_to_impact_infinite_when_moving_away() {
        let sys = HybridSystemDef::new(
            "away",
            (1, 1, 1),
            |_, _, dx| {
                dx[0] = 1.0;
                Ok(())
            },
            |_, _, out| {
                out[0] = 1.0;
                Ok(())
            },
            |x| Ok(x[0]),
        );
        let cfg = SolverConfig::default().with_t_cap(5.0);
        let r = time_to_impact(&sys, &[0.0], &ContinuousSignal::Zero, &[0.0], 0.0, &cfg).unwrap();
        assert!(r.is_infinite());
        assert_eq!(r.duration(), f64::INFINITY);
    }

    #[test]
    fn reset_into_surface_is_rejected() {
        let sys = HybridSystemDef::new(
            "stuck",
            (2, 1, 1),
            |_, _, dx| {
                dx[0] = -1.0;
                dx[1] = 0.0;
                Ok(())
            },
            |x, _, out| {
                out.copy_from_slice(x);
                Ok(())
            },
            |x| Ok(x[0]),
        );
        let r = time_to_impact(&sys, &[0.0, 0.0], &ContinuousSignal::Zero, &[0.0], 0.0, &SolverConfig::default());
        assert!(matches!(r, Err(EventError::ResetNotInSPlus { .. })));
    }

    #[test]
    fn from_splus_timer() {
        let sys = linear_reset();
        let r = time_to_impact_from_splus(&sys, &[0.25, 0.0], &ContinuousSignal::Zero, 0.0, &SolverConfig::default()).unwrap();
        match r {
            TimeToImpact::Hit { duration, x_next, .. } => {
                assert!((duration - 0.75).abs() < 1e-12);
                assert!((x_next[0] - 1.0).abs() < 1e-10 && x_next[1].abs() < 1e-15);
            }
            _ => panic!("expected a hit"),
        }
        assert!(matches!(
            time_to_impact_from_splus(&sys, &[1.0, 0.0], &ContinuousSignal::Zero, 0.0, &SolverConfig::default()),
            Err(EventError::NotInSPlus { .. })
        ));
    }

    #[test]
    fn graze_is_an_error() {
        // H = x2 drifts through zero at speed 1e-9 while |f| ~ 1
        let sys = HybridSystemDef::new(
            "graze",
            (2, 1, 1),
            |_, _, dx| {
                dx[0] = 1.0;
                dx[1] = -1e-9;
                Ok(())
            },
            |x, _, out| {
                out.copy_from_slice(x);
                Ok(())
            },
            |x| Ok(x[1]),
        );
        let cfg = SolverConfig::default();
        let seg = integrate(&sys, &[0.0, 1e-10 + 1e-10], &ContinuousSignal::Zero, 1.0, &cfg.integrator).unwrap();
        let r = locate_crossing(&seg, &sys, &ContinuousSignal::Zero, 0.0, &cfg);
        assert!(matches!(r, Err(EventError::GrazeDetected { .. })), "{r:?}");
    }

}
