//! Continuous phase: the forced flow `phi(t, x0, u)` computed with the
//! Dormand-Prince 5(4) pair and its free fourth-order dense output.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::norm::{euclidean, sub};
use crate::signal::ContinuousSignal;
use crate::system::{HybridSystemDef, State, SystemError};

#[derive(Debug, Clone, Error)]
pub enum FlowError {
    #[error("step limit of {max_steps} exceeded at t = {t}")]
    StepLimitExceeded { t: f64, max_steps: usize },
    #[error("state norm {norm:e} exceeded the blow-up bound at t = {t}")]
    Blowup {
        t: f64,
        norm: f64,
        partial: Box<FlowSegment>,
    },
    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },
    #[error("at t = {t}: {source}")]
    Evaluator { t: f64, source: SystemError },
    #[error("invalid integration request: {0}")]
    InvalidRequest(String),
}

/// Tolerances and budgets for the adaptive integrator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// `null` in JSON means unbounded.
    #[serde(with = "unbounded")]
    pub max_step: f64,
    pub max_steps: usize,
    pub blowup_bound: f64,
}

mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-11,
            max_step: f64::INFINITY,
            max_steps: 1_000_000,
            blowup_bound: 1e8,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        if !(self.rtol > 0.0 && self.atol > 0.0 && self.max_step > 0.0 && self.max_steps > 0) {
            return Err(FlowError::InvalidRequest(
                "rtol, atol, max_step and max_steps must be positive".into(),
            ));
        }
        Ok(())
    }
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense output (Hairer & Wanner, dopri5 continuous extension).
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its continuous extension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseStep {
    pub t: f64,
    pub h: f64,
    /// Five coefficient vectors of length `n`, concatenated.
    rcont: Vec<f64>,
}

impl DenseStep {
    pub fn t_end(&self) -> f64 {
        self.t + self.h
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let n = out.len();
        let theta = (t - self.t) / self.h;
        let theta1 = 1.0 - theta;
        let r = &self.rcont;
        for i in 0..n {
            out[i] = r[i]
                + theta
                    * (r[n + i]
                        + theta1 * (r[2 * n + i] + theta * (r[3 * n + i] + theta1 * r[4 * n + i])));
        }
    }

    pub fn start_state(&self, n: usize) -> &[f64] {
        &self.rcont[..n]
    }
}

/// Step statistics of one integration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub min_step: f64,
    pub max_step: f64,
}

/// Dense solution of the continuous phase over `[t0, t1]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlowSegment {
    pub t0: f64,
    pub t1: f64,
    pub x0: State,
    pub x1: State,
    pub steps: Vec<DenseStep>,
    pub stats: StepStats,
}

impl FlowSegment {
    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    /// `x(t)` for `t` in `[t0, t1]` (clamped outside).
    pub fn eval(&self, t: f64) -> State {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        if t <= self.t0 || self.steps.is_empty() {
            out.copy_from_slice(&self.x0);
            return;
        }
        if t >= self.t1 {
            out.copy_from_slice(&self.x1);
            return;
        }
        let idx = self.steps.partition_point(|s| s.t <= t).saturating_sub(1);
        self.steps[idx].eval_into(t, out);
    }

    /// Accepted step boundaries inside the segment, including both ends.
    pub fn mesh(&self) -> Vec<f64> {
        let mut m: Vec<f64> = self.steps.iter().map(|s| s.t).collect();
        if m.is_empty() {
            m.push(self.t0);
        }
        m.push(self.t1);
        m
    }

    /// Shortens the segment to end at `t_stop` (must lie inside).
    pub(crate) fn truncate(&mut self, t_stop: f64) {
        let keep = self.steps.partition_point(|s| s.t < t_stop).max(1);
        self.steps.truncate(keep);
        let mut x = vec![0.0; self.dim()];
        if let Some(last) = self.steps.last() {
            last.eval_into(t_stop, &mut x);
        }
        self.t1 = t_stop;
        self.x1 = x;
    }
}

/// Decision returned by a step observer.
pub enum StepControl {
    Continue,
    /// Stop the integration at the given time inside the last step.
    StopAt(f64),
}

struct Rhs<'a> {
    sys: &'a HybridSystemDef,
    u: &'a ContinuousSignal,
    ubuf: Vec<f64>,
}

impl Rhs<'_> {
    fn eval(&mut self, t: f64, y: &[f64], out: &mut [f64]) -> Result<(), FlowError> {
        self.u.eval_into(t, &mut self.ubuf);
        self.sys
            .vector_field_into(y, &self.ubuf, out)
            .map_err(|source| FlowError::Evaluator { t, source })
    }
}

fn rms_scaled(v: &[f64], y: &[f64], cfg: &IntegratorConfig) -> f64 {
    let n = v.len() as f64;
    (v.iter()
        .zip(y)
        .map(|(vi, yi)| {
            let sc = cfg.atol + cfg.rtol * yi.abs();
            (vi / sc) * (vi / sc)
        })
        .sum::<f64>()
        / n)
        .sqrt()
}

/// Integrates the forced flow over `[0, t_end]`.
pub fn integrate(
    sys: &HybridSystemDef,
    x0: &[f64],
    u: &ContinuousSignal,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<FlowSegment, FlowError> {
    integrate_from(sys, x0, u, 0.0, t_end, cfg)
}

/// Integrates over `[t0, t_end]` on the global clock of `u`.
pub fn integrate_from(
    sys: &HybridSystemDef,
    x0: &[f64],
    u: &ContinuousSignal,
    t0: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<FlowSegment, FlowError> {
    integrate_observed(sys, x0, u, t0, t_end, cfg, |_: &FlowSegment, _: &DenseStep| {
        Ok::<_, FlowError>(StepControl::Continue)
    })
    .map(|(seg, _)| seg)
}

/// Integrates over `[t0, t_end]`, handing every accepted step to `observer`,
/// which may stop the integration inside that step. Returns the segment and
/// whether the observer stopped it.
pub fn integrate_observed<E, O>(
    sys: &HybridSystemDef,
    x0: &[f64],
    u: &ContinuousSignal,
    t0: f64,
    t_end: f64,
    cfg: &IntegratorConfig,
    mut observer: O,
) -> Result<(FlowSegment, bool), E>
where
    E: From<FlowError>,
    O: FnMut(&FlowSegment, &DenseStep) -> Result<StepControl, E>,
{
    cfg.validate()?;
    sys.check_state(x0)
        .map_err(|e| FlowError::InvalidRequest(e.to_string()))?;
    if !(t_end >= t0) || !t0.is_finite() || !t_end.is_finite() {
        return Err(FlowError::InvalidRequest(format!("bad time span [{t0}, {t_end}]")).into());
    }
    let n = sys.n();
    let mut seg = FlowSegment {
        t0,
        t1: t0,
        x0: x0.to_vec(),
        x1: x0.to_vec(),
        steps: Vec::new(),
        stats: StepStats {
            min_step: f64::INFINITY,
            ..StepStats::default()
        },
    };
    if t_end == t0 {
        seg.stats.min_step = 0.0;
        return Ok((seg, false));
    }
    let mut rhs = Rhs {
        sys,
        u,
        ubuf: vec![0.0; sys.p()],
    };

    let mut t = t0;
    let mut y = x0.to_vec();
    let mut k1 = vec![0.0; n];
    rhs.eval(t, &y, &mut k1)?;
    let mut h = initial_step(&mut rhs, t, &y, &k1, cfg)?.min(t_end - t);

    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    let mut ytmp = vec![0.0; n];
    let mut y5 = vec![0.0; n];
    let mut last_rejected = false;
    let mut attempts = 0usize;

    while t < t_end {
        if attempts >= cfg.max_steps {
            return Err(FlowError::StepLimitExceeded {
                t,
                max_steps: cfg.max_steps,
            }
            .into());
        }
        attempts += 1;
        h = h.min(cfg.max_step);
        if t + 1.01 * h >= t_end {
            h = t_end - t;
        }
        if h <= 1e-14 * t.abs().max(1.0) {
            return Err(FlowError::StepSizeUnderflow { t }.into());
        }

        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        rhs.eval(t + C2 * h, &ytmp, &mut k2)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        rhs.eval(t + C3 * h, &ytmp, &mut k3)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        rhs.eval(t + C4 * h, &ytmp, &mut k4)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        rhs.eval(t + C5 * h, &ytmp, &mut k5)?;
        for i in 0..n {
            ytmp[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if h == t_end - t { t_end } else { t + h };
        rhs.eval(t_new, &ytmp, &mut k6)?;
        for i in 0..n {
            y5[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        rhs.eval(t_new, &y5, &mut k7)?;

        let mut err_sq = 0.0;
        for i in 0..n {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = cfg.atol + cfg.rtol * y[i].abs().max(y5[i].abs());
            err_sq += (e / sc) * (e / sc);
        }
        let err = (err_sq / n as f64).sqrt();

        if err <= 1.0 {
            let mut rcont = vec![0.0; 5 * n];
            for i in 0..n {
                let ydiff = y5[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                rcont[i] = y[i];
                rcont[n + i] = ydiff;
                rcont[2 * n + i] = bspl;
                rcont[3 * n + i] = ydiff - h * k7[i] - bspl;
                rcont[4 * n + i] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                        + D7 * k7[i]);
            }
            let step = DenseStep { t, h, rcont };
            seg.stats.accepted += 1;
            seg.stats.min_step = seg.stats.min_step.min(h);
            seg.stats.max_step = seg.stats.max_step.max(h);
            t = t_new;
            std::mem::swap(&mut y, &mut y5);
            std::mem::swap(&mut k1, &mut k7);
            seg.steps.push(step);
            seg.t1 = t;
            seg.x1.copy_from_slice(&y);

            let norm = euclidean(&y);
            if !(norm <= cfg.blowup_bound) {
                return Err(FlowError::Blowup {
                    t,
                    norm,
                    partial: Box::new(seg),
                }
                .into());
            }
            let last = seg.steps.last().expect("just pushed");
            if let StepControl::StopAt(ts) = observer(&seg, last)? {
                let ts = ts.clamp(last.t, t);
                if ts < t {
                    seg.truncate(ts);
                }
                return Ok((seg, true));
            }

            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h *= fac;
            last_rejected = false;
        } else {
            seg.stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            last_rejected = true;
        }
    }
    Ok((seg, false))
}

fn initial_step(
    rhs: &mut Rhs<'_>,
    t: f64,
    y: &[f64],
    f0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<f64, FlowError> {
    let d0 = rms_scaled(y, y, cfg);
    let d1 = rms_scaled(f0, y, cfg);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(cfg.max_step);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(yi, fi)| yi + h0 * fi).collect();
    let mut f1 = vec![0.0; y.len()];
    rhs.eval(t + h0, &y1, &mut f1)?;
    let d2 = rms_scaled(&sub(&f1, f0), y, cfg) / h0;
    let dmax = d1.max(d2);
    let h1 = if dmax <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dmax).powf(0.2)
    };
    // a tiny but nonzero state makes d0 / d1 collapse; keep the guess well
    // clear of the underflow threshold and let step control shrink it
    let floor = 1e-10 * t.abs().max(1.0);
    Ok((100.0 * h0).min(h1).max(floor).min(cfg.max_step))
}

/// Directional derivative of `x -> phi(T, x, u)` by central differences.
#[derive(Debug, Clone, Serialize)]
pub struct Sensitivity {
    /// Central difference with step `h`.
    pub derivative: State,
    /// Central difference with step `h / 2`.
    pub half_step: State,
    pub step: f64,
    /// `||D_h - D_{h/2}|| / 3`, the Richardson estimate of the error in `D_{h/2}`.
    pub richardson_estimate: f64,
}

pub fn flow_sensitivity(
    sys: &HybridSystemDef,
    x0: &[f64],
    u: &ContinuousSignal,
    t_end: f64,
    cfg: &IntegratorConfig,
    direction: &[f64],
) -> Result<Sensitivity, FlowError> {
    let dn = euclidean(direction);
    if (dn - 1.0).abs() > 1e-9 {
        return Err(FlowError::InvalidRequest("direction must have unit norm".into()));
    }
    if t_end == 0.0 {
        return Ok(Sensitivity {
            derivative: direction.to_vec(),
            half_step: direction.to_vec(),
            step: 0.0,
            richardson_estimate: 0.0,
        });
    }
    let h = f64::EPSILON.cbrt() * euclidean(x0).max(1.0);
    let central = |step: f64| -> Result<State, FlowError> {
        let xp: State = x0.iter().zip(direction).map(|(x, d)| x + step * d).collect();
        let xm: State = x0.iter().zip(direction).map(|(x, d)| x - step * d).collect();
        let fp = integrate(sys, &xp, u, t_end, cfg)?.x1;
        let fm = integrate(sys, &xm, u, t_end, cfg)?.x1;
        Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * step)).collect())
    };
    let derivative = central(h)?;
    let half_step = central(0.5 * h)?;
    let richardson_estimate = euclidean(&sub(&derivative, &half_step)) / 3.0;
    Ok(Sensitivity {
        derivative,
        half_step,
        step: h,
        richardson_estimate,
    })
}
