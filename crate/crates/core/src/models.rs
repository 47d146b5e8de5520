//! Built-in systems with closed-form (or reference) oracles.
//!
//! | name            | state        | surface `H`         | reset `Delta`                     |
//! |-----------------|--------------|---------------------|-----------------------------------|
//! | `linear-reset`  | `(x1, x2)`   | `1 - x1`            | `(0, x2 + v)`                     |
//! | `rimless-wheel` | `(theta, w)` | `gamma + alpha - theta` | `(gamma - alpha, cos(2 alpha) w + v)` |
//! | `vdp-adapter`   | `(x1, x2)`   | `x2`, `+ -> -` only | identity (section adapter)        |
//! | `bouncing-ball` | `(h, hdot)`  | `h`                 | `(0, -e hdot)`                    |
//!
//! The bouncing ball is a negative control: its impacts accumulate (Zeno) and
//! its reset lands on the surface, so it is excluded from stability suites.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_8, LN_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{flow_to_impact, time_to_impact, SolverConfig, TimeToImpact};
use crate::flow::IntegratorConfig;
use crate::norm::{distance, dot};
use crate::signal::{ContinuousSignal, DiscreteSequence};
use crate::system::{HybridSystemDef, State};

pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("model `{model}` has no parameter `{param}`")]
    UnknownParam { model: String, param: String },
    #[error("parameter `{param}` = {value} outside ({min}, {max})")]
    ParamOutOfRange { param: String, value: f64, min: f64, max: f64 },
    #[error("oracle evaluation failed: {0}")]
    Oracle(String),
}

/// One parameter of a catalog model; valid values lie in the open interval `(min, max)`.
#[derive(Debug, Clone, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    pub default: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelCatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub params: Vec<ParamSpec>,
    /// Which standing assumptions the model satisfies or violates.
    pub assumptions: &'static str,
    /// Whether the model may enter stability and ISS suites.
    pub iss_eligible: bool,
}

pub fn catalog() -> Vec<ModelCatalogEntry> {
    vec![
        ModelCatalogEntry {
            name: "linear-reset",
            description: "timer x1' = 1 with x2' = -a x2 + u; impact at x1 = 1 resets (0, x2 + v)",
            params: vec![ParamSpec { name: "a", default: LN_2, min: 0.0, max: 1e3 }],
            assumptions: "transversal orbit with reset landing in S+; the orbit is the segment {(t, 0): t in [0, 1)}",
            iss_eligible: true,
        },
        ModelCatalogEntry {
            name: "rimless-wheel",
            description: "stance phase theta'' = (g/l) sin theta + u; support transfer at theta = gamma + alpha",
            params: vec![
                ParamSpec { name: "alpha", default: FRAC_PI_8, min: 0.0, max: PI / 2.0 },
                ParamSpec { name: "gamma", default: 0.08, min: 0.0, max: PI / 2.0 },
                ParamSpec { name: "g_over_l", default: 9.81, min: 0.0, max: 1e4 },
            ],
            assumptions: "transversal orbit with reset landing in S+ for gamma < alpha; speeds below the capture speed never reach S",
            iss_eligible: true,
        },
        ModelCatalogEntry {
            name: "vdp-adapter",
            description: "Van der Pol oscillator observed on the section x2 = 0, x1 > 0 with identity reset",
            params: vec![ParamSpec { name: "mu", default: 0.2, min: -1e-12, max: 10.0 }],
            assumptions: "continuous-time limit cycle; identity reset lands on S by construction, the crossing direction keeps one crossing per cycle",
            iss_eligible: true,
        },
        ModelCatalogEntry {
            name: "bouncing-ball",
            description: "h' = hdot, hdot' = -g; impact at h = 0 resets (0, -e hdot)",
            params: vec![
                ParamSpec { name: "g", default: 9.81, min: 0.0, max: 1e4 },
                ParamSpec { name: "restitution", default: 0.5, min: 0.0, max: 1.0 },
                ParamSpec { name: "drop_height", default: 1.0, min: 0.0, max: 1e6 },
            ],
            assumptions: "reset lands on S with upward speed and there is no periodic orbit; Zeno by design",
            iss_eligible: false,
        },
    ]
}

pub fn entry(name: &str) -> Result<ModelCatalogEntry, ModelError> {
    catalog()
        .into_iter()
        .find(|e| e.name == name)
        .ok_or_else(|| ModelError::UnknownModel(name.to_string()))
}

/// Merges `params` over the defaults, rejecting unknown or out-of-range values.
pub fn resolve_params(name: &str, params: &Params) -> Result<Params, ModelError> {
    let e = entry(name)?;
    for key in params.keys() {
        if !e.params.iter().any(|p| p.name == key) {
            return Err(ModelError::UnknownParam {
                model: name.to_string(),
                param: key.clone(),
            });
        }
    }
    let mut out = Params::new();
    for spec in &e.params {
        let value = params.get(spec.name).copied().unwrap_or(spec.default);
        if !(value > spec.min && value < spec.max) {
            return Err(ModelError::ParamOutOfRange {
                param: spec.name.to_string(),
                value,
                min: spec.min,
                max: spec.max,
            });
        }
        out.insert(spec.name.to_string(), value);
    }
    Ok(out)
}

/// Builds a catalog model.
pub fn model(name: &str, params: &Params) -> Result<HybridSystemDef, ModelError> {
    let p = resolve_params(name, params)?;
    Ok(match name {
        "linear-reset" => linear_reset(p["a"]),
        "rimless-wheel" => rimless_wheel(p["alpha"], p["gamma"], p["g_over_l"]),
        "vdp-adapter" => vdp_adapter(p["mu"]),
        "bouncing-ball" => bouncing_ball(p["g"], p["restitution"]),
        _ => unreachable!("resolve_params checked the name"),
    })
}

pub fn linear_reset(a: f64) -> HybridSystemDef {
    HybridSystemDef::new(
        "linear-reset",
        (2, 1, 1),
        move |x, u, dx| {
            dx[0] = 1.0;
            dx[1] = -a * x[1] + u[0];
            Ok(())
        },
        |x, v, out| {
            out[0] = 0.0;
            out[1] = x[1] + v[0];
            Ok(())
        },
        |x| Ok(1.0 - x[0]),
    )
    .with_gradient(|_, g| {
        g[0] = -1.0;
        g[1] = 0.0;
        Ok(())
    })
}

pub fn rimless_wheel(alpha: f64, gamma: f64, g_over_l: f64) -> HybridSystemDef {
    let c2a = (2.0 * alpha).cos();
    HybridSystemDef::new(
        "rimless-wheel",
        (2, 1, 1),
        move |x, u, dx| {
            dx[0] = x[1];
            dx[1] = g_over_l * x[0].sin() + u[0];
            Ok(())
        },
        move |x, v, out| {
            out[0] = gamma - alpha;
            out[1] = c2a * x[1] + v[0];
            Ok(())
        },
        move |x| Ok(gamma + alpha - x[0]),
    )
    .with_gradient(|_, g| {
        g[0] = -1.0;
        g[1] = 0.0;
        Ok(())
    })
}

/// Van der Pol with the section `x2 = 0`. `H = x2` decreases through zero
/// only where `x1 > 0`, so the `+ -> -` rule is the half-plane gate.
pub fn vdp_adapter(mu: f64) -> HybridSystemDef {
    HybridSystemDef::new(
        "vdp-adapter",
        (2, 1, 1),
        move |x, u, dx| {
            dx[0] = x[1];
            dx[1] = mu * (1.0 - x[0] * x[0]) * x[1] - x[0] + u[0];
            Ok(())
        },
        |x, _, out| {
            out.copy_from_slice(x);
            Ok(())
        },
        |x| Ok(x[1]),
    )
    .with_gradient(|_, g| {
        g[0] = 0.0;
        g[1] = 1.0;
        Ok(())
    })
    .as_section_adapter()
}

pub fn bouncing_ball(g: f64, restitution: f64) -> HybridSystemDef {
    HybridSystemDef::new(
        "bouncing-ball",
        (2, 1, 1),
        move |x, _, dx| {
            dx[0] = x[1];
            dx[1] = -g;
            Ok(())
        },
        move |x, _, out| {
            out[0] = 0.0;
            out[1] = -restitution * x[1];
            Ok(())
        },
        |x| Ok(x[0]),
    )
    .with_gradient(|_, gr| {
        gr[0] = 1.0;
        gr[1] = 0.0;
        Ok(())
    })
}

/// Experiment defaults attached to a catalog model.
#[derive(Debug, Clone, Serialize)]
pub struct ModelProfile {
    /// Starting point for the fixed-point search (or the initial state for
    /// models without an orbit).
    pub fixed_point_guess: State,
    /// Characteristic time; the default impact horizon is ten of these.
    pub time_scale: f64,
    /// Unit-amplitude continuous input template.
    pub u_template: ContinuousSignal,
    /// Unit-bound discrete input template.
    pub v_template: DiscreteSequence,
    /// Amplitudes considered "1x model scale" for `u` and `v`.
    pub u_scale: f64,
    pub v_scale: f64,
}

pub fn profile(name: &str, params: &Params) -> Result<ModelProfile, ModelError> {
    let p = resolve_params(name, params)?;
    let uniform = DiscreteSequence::IidUniform { bound: vec![1.0], seed: 0 };
    Ok(match name {
        "linear-reset" => ModelProfile {
            fixed_point_guess: vec![1.0, 0.7],
            time_scale: 1.0,
            u_template: ContinuousSignal::constant(vec![1.0]),
            v_template: uniform,
            u_scale: 1.0,
            v_scale: 1.0,
        },
        "rimless-wheel" => ModelProfile {
            fixed_point_guess: vec![p["gamma"] + p["alpha"], 1.6],
            time_scale: 1.0,
            u_template: ContinuousSignal::sinusoid(vec![1.0], 4.0, 0.0),
            v_template: uniform,
            u_scale: 1.0,
            v_scale: 0.2,
        },
        "vdp-adapter" => ModelProfile {
            fixed_point_guess: vec![2.0, 0.0],
            time_scale: 2.0 * PI,
            u_template: ContinuousSignal::sinusoid(vec![1.0], 4.0, 0.0),
            v_template: DiscreteSequence::Zero,
            u_scale: 1.0,
            v_scale: 1.0,
        },
        "bouncing-ball" => ModelProfile {
            fixed_point_guess: vec![p["drop_height"], 0.0],
            time_scale: (2.0 * p["drop_height"] / p["g"]).sqrt(),
            u_template: ContinuousSignal::Zero,
            v_template: DiscreteSequence::Zero,
            u_scale: 0.0,
            v_scale: 0.0,
        },
        _ => unreachable!(),
    })
}

/// Ground truth for a catalog model, computed without the fixed-point solver.
#[derive(Debug, Clone, Default, Serialize)]
pub struct OraclePack {
    pub x_star: Option<State>,
    pub period: Option<f64>,
    /// Eigenvalues of the on-surface linearisation at `x_star`.
    pub eigenvalues: Vec<f64>,
    /// Discrete forced fixed point per unit constant `u` (deviation of the
    /// reduced coordinate), when the model is linear in that input.
    pub forced_gain_u: Option<f64>,
    /// Same for a constant discrete input `v`.
    pub forced_gain_v: Option<f64>,
    /// Relative band around `period` that numerical results must fall into.
    pub period_rel_band: Option<f64>,
    /// Minimal pre-impact speed that still reaches the surface.
    pub capture_threshold: Option<f64>,
    /// Accumulation time of the impact sequence (Zeno point).
    pub accumulation_time: Option<f64>,
    pub notes: &'static str,
}

pub fn oracle(name: &str, params: &Params) -> Result<Option<OraclePack>, ModelError> {
    let p = resolve_params(name, params)?;
    match name {
        "linear-reset" => {
            let a = p["a"];
            let decay = (-a).exp();
            Ok(Some(OraclePack {
                x_star: Some(vec![1.0, 0.0]),
                period: Some(1.0),
                eigenvalues: vec![decay],
                forced_gain_u: Some(1.0 / a),
                forced_gain_v: Some(decay / (1.0 - decay)),
                notes: "variation of constants: x2 -> e^-a (x2 + v) + u (1 - e^-a) / a",
                ..OraclePack::default()
            }))
        }
        "rimless-wheel" => {
            let w = WheelOracle::new(p["alpha"], p["gamma"], p["g_over_l"]);
            Ok(Some(OraclePack {
                x_star: Some(vec![p["gamma"] + p["alpha"], w.omega_star()]),
                period: Some(w.period(w.omega_star())),
                eigenvalues: vec![w.restitution() * w.restitution()],
                capture_threshold: Some(w.capture_threshold()),
                notes: "energy balance: w-^2 = cos^2(2 alpha) w-^2 + 2 (g/l)(cos(gamma - alpha) - cos(gamma + alpha))",
                ..OraclePack::default()
            }))
        }
        "vdp-adapter" => {
            let mu = p["mu"];
            let asymptotic = 2.0 * PI * (1.0 + mu * mu / 16.0);
            if mu.abs() < 1e-12 {
                return Ok(Some(OraclePack {
                    x_star: None,
                    period: Some(2.0 * PI),
                    eigenvalues: vec![1.0],
                    period_rel_band: Some(0.0),
                    notes: "harmonic oscillator: every section point is fixed, period 2 pi",
                    ..OraclePack::default()
                }));
            }
            let (x_star, period) = vdp_reference_cycle(mu).map_err(ModelError::Oracle)?;
            if mu <= 0.5 && ((period - asymptotic) / asymptotic).abs() > 5e-3 {
                return Err(ModelError::Oracle(format!(
                    "reference period {period} disagrees with the small-mu asymptote {asymptotic}"
                )));
            }
            Ok(Some(OraclePack {
                x_star: Some(x_star),
                period: Some(period),
                period_rel_band: Some(5e-3),
                notes: "reference integration at 1e-3 x default tolerance; small-mu period 2 pi (1 + mu^2 / 16)",
                ..OraclePack::default()
            }))
        }
        "bouncing-ball" => {
            let (g, e, h0) = (p["g"], p["restitution"], p["drop_height"]);
            let t0 = (2.0 * h0 / g).sqrt();
            let v0 = (2.0 * g * h0).sqrt();
            Ok(Some(OraclePack {
                accumulation_time: Some(t0 + 2.0 * e * v0 / (g * (1.0 - e))),
                notes: "dwell times 2 e^k v0 / g form a geometric series",
                ..OraclePack::default()
            }))
        }
        _ => Ok(None),
    }
}

/// Closed forms for the rimless wheel.
#[derive(Debug, Clone, Copy)]
pub struct WheelOracle {
    pub alpha: f64,
    pub gamma: f64,
    pub g_over_l: f64,
}

impl WheelOracle {
    pub fn new(alpha: f64, gamma: f64, g_over_l: f64) -> Self {
        Self { alpha, gamma, g_over_l }
    }

    pub fn restitution(&self) -> f64 {
        (2.0 * self.alpha).cos()
    }

    /// Squared-speed gain over one stance phase.
    fn energy_gain(&self) -> f64 {
        2.0 * self.g_over_l * ((self.gamma - self.alpha).cos() - (self.gamma + self.alpha).cos())
    }

    pub fn omega_star(&self) -> f64 {
        let c = self.restitution();
        (self.energy_gain() / (1.0 - c * c)).sqrt()
    }

    /// Pre-impact speed map `w- -> w-'` for zero input.
    pub fn map(&self, w_minus: f64) -> Option<f64> {
        let w_plus = self.restitution() * w_minus;
        if w_plus <= self.top_speed() {
            return None;
        }
        Some((w_plus * w_plus + self.energy_gain()).sqrt())
    }

    /// Post-impact speed needed to pass the vertical.
    fn top_speed(&self) -> f64 {
        (2.0 * self.g_over_l * (1.0 - (self.gamma - self.alpha).cos())).sqrt()
    }

    pub fn capture_threshold(&self) -> f64 {
        self.top_speed() / self.restitution()
    }

    /// Stance duration for pre-impact speed `w_minus`, by quadrature of
    /// `dt = dtheta / w(theta)` with `w` from energy conservation.
    pub fn period(&self, w_minus: f64) -> f64 {
        let w_plus = self.restitution() * w_minus;
        let (a, b) = (self.gamma - self.alpha, self.gamma + self.alpha);
        let speed = |th: f64| (w_plus * w_plus + 2.0 * self.g_over_l * (a.cos() - th.cos())).sqrt();
        gauss_legendre(|th| 1.0 / speed(th), a, b, 400)
    }
}

/// Composite 5-point Gauss-Legendre quadrature.
fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    const X: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|i| {
            let mid = a + (i as f64 + 0.5) * h;
            X.iter()
                .zip(W)
                .map(|(x, w)| w * f(mid + 0.5 * h * x))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}

/// Converges onto the Van der Pol cycle by long tight-tolerance integration
/// and measures the section point and period between two crossings.
fn vdp_reference_cycle(mu: f64) -> Result<(State, f64), String> {
    let sys = vdp_adapter(mu);
    let cfg = SolverConfig {
        integrator: IntegratorConfig::with_tolerances(1e-12, 1e-14),
        t_cap: 100.0,
        ..SolverConfig::default()
    };
    let u = ContinuousSignal::Zero;
    // start off the section and let transients die out
    let mut x = vec![2.0, 0.5];
    let mut t = 0.0;
    let mut crossings: Vec<(f64, State)> = Vec::new();
    let needed = 40;
    while crossings.len() < needed {
        let (_, ev) = flow_to_impact(&sys, &x, &u, t, t + cfg.t_cap, &cfg).map_err(|e| e.to_string())?;
        let ev = ev.ok_or("no section crossing in reference integration")?;
        t = ev.t_hit;
        x = ev.x_minus.clone();
        crossings.push((t, x.clone()));
    }
    let (t_a, _) = &crossings[needed - 2];
    let (t_b, x_b) = &crossings[needed - 1];
    Ok((x_b.clone(), t_b - t_a))
}

/// Outcome of checking the standing orbit assumptions at a candidate `x*`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// `Delta(x*, 0)` lies strictly inside `S+`.
    pub reset_in_splus: bool,
    /// `L_f H(x*, 0) < 0`.
    pub transversal: bool,
    /// The zero-input flow from `Delta(x*, 0)` returns to `x*`.
    pub orbit_closes: bool,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.reset_in_splus && self.transversal && self.orbit_closes
    }
}

/// Checks reset landing, transversality and orbit closure directly at `x_star`. Section adapters are
/// checked for closure and transversality only.
pub fn check_assumptions(sys: &HybridSystemDef, x_star: &[f64], cfg: &SolverConfig) -> AssumptionReport {
    let zero_v = vec![0.0; sys.q()];
    let zero_u = vec![0.0; sys.p()];
    let reset_in_splus = match sys.reset_kind() {
        crate::system::ResetKind::SectionAdapter => true,
        crate::system::ResetKind::Impulsive => sys
            .reset(x_star, &zero_v)
            .and_then(|xp| sys.surface(&xp))
            .map(|h| h > cfg.event_tol)
            .unwrap_or(false),
    };
    let transversal = sys
        .surface_gradient(x_star)
        .and_then(|g| sys.vector_field(x_star, &zero_u).map(|f| dot(&g, &f)))
        .map(|lfh| lfh < 0.0)
        .unwrap_or(false);
    let orbit_closes = match time_to_impact(sys, x_star, &ContinuousSignal::Zero, &zero_v, 0.0, cfg) {
        Ok(TimeToImpact::Hit { x_next, .. }) => distance(&x_next, x_star) <= 1e-6 * x_star.iter().map(|v| v.abs()).fold(1.0, f64::max),
        _ => false,
    };
    AssumptionReport {
        reset_in_splus,
        transversal,
        orbit_closes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> Params {
        Params::new()
    }

    #[test]
    fn unknown_model_and_params() {
        assert!(matches!(model("biped", &defaults()), Err(ModelError::UnknownModel(_))));
        let mut p = Params::new();
        p.insert("b".into(), 1.0);
        assert!(matches!(model("linear-reset", &p), Err(ModelError::UnknownParam { .. })));
        p.clear();
        p.insert("a".into(), -1.0);
        assert!(matches!(model("linear-reset", &p), Err(ModelError::ParamOutOfRange { .. })));
    }

    #[test]
    fn wheel_closed_form_values() {
        let w = WheelOracle::new(FRAC_PI_8, 0.08, 9.81);
        // w*^2 = 4 (g/l) sin(alpha) sin(gamma) / sin^2(2 alpha), an equivalent form
        let alt = (4.0 * 9.81 * FRAC_PI_8.sin() * 0.08f64.sin()).sqrt() / (2.0 * FRAC_PI_8).sin();
        assert!((w.omega_star() - alt).abs() < 1e-12);
        assert!((w.omega_star() - 1.5492).abs() < 1e-3);
        assert!((w.map(w.omega_star()).unwrap() - w.omega_star()).abs() < 1e-12);
        assert!((w.restitution().powi(2) - 0.5).abs() < 1e-15);
        assert!(w.map(1.2).is_none(), "1.2 is below the capture speed {}", w.capture_threshold());
    }

    #[test]
    fn wheel_period_quadrature_matches_integration() {
        let w = WheelOracle::new(FRAC_PI_8, 0.08, 9.81);
        let sys = rimless_wheel(FRAC_PI_8, 0.08, 9.81);
        let x_star = [0.08 + FRAC_PI_8, w.omega_star()];
        let r = time_to_impact(&sys, &x_star, &ContinuousSignal::Zero, &[0.0], 0.0, &SolverConfig::default().with_t_cap(10.0)).unwrap();
        assert!((r.duration() - w.period(w.omega_star())).abs() < 1e-8);
    }

    #[test]
    fn oracle_models_satisfy_orbit_assumptions() {
        let cfg = SolverConfig::default().with_t_cap(50.0);
        for name in ["linear-reset", "rimless-wheel", "vdp-adapter"] {
            let sys = model(name, &defaults()).unwrap();
            let pack = oracle(name, &defaults()).unwrap().unwrap();
            let x_star = pack.x_star.unwrap();
            let rep = check_assumptions(&sys, &x_star, &cfg);
            assert!(rep.all_hold(), "{name}: {rep:?}");
        }
    }

    #[test]
    fn bouncing_ball_fails_orbit_assumptions() {
        let sys = model("bouncing-ball", &defaults()).unwrap();
        let rep = check_assumptions(&sys, &[0.0, -1.0], &SolverConfig::default());
        assert!(!rep.reset_in_splus);
        assert!(!rep.orbit_closes);
        assert!(!rep.all_hold());
        assert!(!entry("bouncing-ball").unwrap().iss_eligible);
    }

    #[test]
    fn vdp_reference_period_in_asymptotic_band() {
        let mut p = Params::new();
        p.insert("mu".into(), 0.2);
        let pack = oracle("vdp-adapter", &p).unwrap().unwrap();
        let t = pack.period.unwrap();
        assert!((t - 6.2989).abs() / 6.2989 < 5e-3, "{t}");
        let x = pack.x_star.unwrap();
        assert!(x[0] > 1.9 && x[0] < 2.1 && x[1].abs() < 1e-10);
    }

    #[test]
    fn linear_reset_oracle() {
        let pack = oracle("linear-reset", &defaults()).unwrap().unwrap();
        assert_eq!(pack.x_star, Some(vec![1.0, 0.0]));
        assert!((pack.eigenvalues[0] - 0.5).abs() < 1e-15);
        assert!((pack.forced_gain_u.unwrap() - 1.0 / LN_2).abs() < 1e-15);
        assert!((pack.forced_gain_v.unwrap() - 1.0).abs() < 1e-12);
    }
}
