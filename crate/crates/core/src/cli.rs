//! Command-line front end: strict JSON run configs, experiment
//! orchestration and CSV / JSON report emission.
//!
//! Exit codes: 0 ok, 1 usage or config error, 2 guard termination,
//! 3 solver failure, 4 failed certification.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::SolverConfig;
use crate::hybrid::{simulate, GuardConfig, HybridTrajectory, Termination};
use crate::iss::{check_equivalence, run_sweep, EquivalenceConfig, IssSweepReport, SweepConfig};
use crate::models::{self, check_assumptions, AssumptionReport, ModelProfile, Params};
use crate::orbit::{build_orbit, certify_prop1, default_radii, dist_to_orbit, OrbitSettings, OrbitStats, PeriodicOrbit};
use crate::poincare::{find_fixed_point, linearize, FixedPointConfig, PoincareError, StabilityReport};
use crate::signal::{ContinuousSignal, DiscreteSequence, SplitMix64};
use crate::system::{validate_system, HybridSystemDef, State};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_GUARD: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_CERTIFICATION: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("guard termination: {0}")]
    Guard(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => EXIT_CONFIG,
            CliError::Guard(_) => EXIT_GUARD,
            CliError::Solver(_) => EXIT_SOLVER,
            CliError::Certification(_) => EXIT_CERTIFICATION,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "sie", version, about = "Forced systems with impulse effects")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config's `out`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed (overrides the config's `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true, env = "SIE_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Simulate one hybrid trajectory.
    Simulate,
    /// Find the periodic orbit and classify its stability.
    Orbit,
    /// Check the distance sandwich around the orbit on the switching surface.
    #[command(name = "certify-prop1")]
    CertifyProp1,
    /// Sweep input amplitudes and initial offsets.
    #[command(name = "iss-sweep")]
    IssSweep,
    /// Spot-check a model definition and its orbit assumptions.
    Validate,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<ContinuousSignal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<DiscreteSequence>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    /// Horizon in time units; takes precedence over `periods`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Horizon in reference periods of the model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<State>,
    /// `orbit.json` from a previous `orbit` run; adds a `dist_to_orbit` column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit_file: Option<PathBuf>,
    /// Extra dense-output rows per integrator step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substeps: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guess: Option<State>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newton_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ds_fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_per_radius: Option<usize>,
    /// Radii in units of the orbit diameter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub offsets: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub u_amps: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub v_amps: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<[f64; 2]>>,
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_periods: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transient_cutoff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_per_step: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_max: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probes: Option<Vec<State>>,
}

/// Contents of a `--config` file. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guards: Option<GuardConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<InputSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit: Option<OrbitBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify: Option<CertifyBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateBlock>,
}

impl RunConfig {
    pub fn new(model: &str) -> Self {
        Self {
            model: model.to_string(),
            params: Params::new(),
            seed: None,
            out: None,
            solver: None,
            guards: None,
            inputs: None,
            simulate: None,
            orbit: None,
            certify: None,
            sweep: None,
            validate: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Everything a command needs, resolved from the config and the flags.
pub struct Context {
    pub config: RunConfig,
    pub sys: HybridSystemDef,
    pub profile: ModelProfile,
    pub solver: SolverConfig,
    pub seed: u64,
    pub out: PathBuf,
}

impl Context {
    pub fn new(mut config: RunConfig, out: Option<PathBuf>, seed: Option<u64>) -> Result<Self, CliError> {
        let sys = models::model(&config.model, &config.params).map_err(|e| CliError::Config(e.to_string()))?;
        let profile = models::profile(&config.model, &config.params).map_err(|e| CliError::Config(e.to_string()))?;
        config.params = models::resolve_params(&config.model, &config.params).map_err(|e| CliError::Config(e.to_string()))?;
        let solver = config
            .solver
            .clone()
            .unwrap_or_else(|| SolverConfig::default().with_t_cap(10.0 * profile.time_scale));
        solver
            .integrator
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let seed = seed.or(config.seed).unwrap_or(0);
        let out = out.or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
        Ok(Self {
            config,
            sys,
            profile,
            solver,
            seed,
            out,
        })
    }

    fn fixed_point_config(&self) -> FixedPointConfig {
        let mut fp = FixedPointConfig::with_solver(self.solver.clone());
        if let Some(b) = &self.config.orbit {
            if let Some(v) = b.newton_tol {
                fp.newton_tol = v;
            }
            if let Some(v) = b.max_iter {
                fp.max_iter = v;
            }
            if let Some(v) = b.margin {
                fp.margin = v;
            }
        }
        fp
    }

    fn orbit_settings(&self) -> OrbitSettings {
        let mut s = OrbitSettings::default();
        if let Some(f) = self.config.orbit.as_ref().and_then(|b| b.ds_fraction) {
            s.ds_fraction = f;
        }
        s
    }

    fn guess(&self) -> State {
        self.config
            .orbit
            .as_ref()
            .and_then(|b| b.guess.clone())
            .unwrap_or_else(|| self.profile.fixed_point_guess.clone())
    }

    fn guards(&self) -> GuardConfig {
        self.config.guards.clone().unwrap_or_default()
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CliError::Io { path, source }
        };
        fs::create_dir_all(&self.out).map_err(io(&self.out))?;
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(io(&path))?;
        Ok(path)
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Fixed point and spectrum; on Newton failure writes `newton_trace.csv`.
    fn stability(&self) -> Result<StabilityReport, CliError> {
        let fp = self.fixed_point_config();
        let report = find_fixed_point(&self.sys, &self.guess(), &fp).map_err(|e| {
            if let PoincareError::NewtonDiverged { iterates, residuals, .. } = &e {
                let mut csv = String::from("iteration,residual");
                for j in 1..=self.sys.n() {
                    let _ = write!(csv, ",x_{j}");
                }
                csv.push('\n');
                for (i, (x, r)) in iterates.iter().zip(residuals).enumerate() {
                    let mut row = vec![i.to_string(), fmt_f64(*r)];
                    row.extend(x.iter().map(|v| fmt_f64(*v)));
                    csv.push_str(&row.join(","));
                    csv.push('\n');
                }
                if let Err(io) = self.write("newton_trace.csv", &csv) {
                    eprintln!("{io}");
                }
            }
            CliError::Solver(e.to_string())
        })?;
        linearize(&self.sys, &report, &fp).map_err(|e| CliError::Solver(e.to_string()))
    }

    fn orbit(&self, report: &StabilityReport) -> Result<PeriodicOrbit, CliError> {
        build_orbit(&self.sys, report, &self.orbit_settings()).map_err(|e| CliError::Solver(e.to_string()))
    }
}

/// 17 significant digits, `NaN` / `inf` spelled out.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn header(cols: &[String]) -> String {
    let mut s = cols.join(",");
    s.push('\n');
    s
}

fn indexed(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}_{i}")).collect()
}

/// On-disk form of `orbit.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitFile {
    pub model: String,
    pub params: Params,
    pub report: StabilityReport,
    pub orbit: OrbitStats,
    pub assumptions: AssumptionReport,
}

#[derive(Debug, Clone, Serialize)]
struct SimulateMeta<'a> {
    model: &'a str,
    params: &'a Params,
    seed: u64,
    horizon: f64,
    t_end: f64,
    impacts: usize,
    termination: &'a Termination,
    termination_label: &'a str,
    timestamp_unix: u64,
    version: &'static str,
}

fn timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn reference_period(ctx: &Context) -> f64 {
    models::oracle(&ctx.config.model, &ctx.config.params)
        .ok()
        .flatten()
        .and_then(|o| o.period)
        .unwrap_or(ctx.profile.time_scale)
}

fn initial_state(ctx: &Context) -> Result<State, CliError> {
    if let Some(x0) = ctx.config.simulate.as_ref().and_then(|b| b.x0.clone()) {
        return Ok(x0);
    }
    // the catalog guess, or its reset image when it sits on the surface
    let guess = ctx.profile.fixed_point_guess.clone();
    let h = ctx.sys.surface(&guess).map_err(|e| CliError::Config(e.to_string()))?;
    if h > ctx.solver.event_tol {
        return Ok(guess);
    }
    ctx.sys
        .reset(&guess, &vec![0.0; ctx.sys.q()])
        .map_err(|e| CliError::Config(e.to_string()))
}

fn inputs(ctx: &Context) -> (ContinuousSignal, DiscreteSequence) {
    let spec = ctx.config.inputs.clone().unwrap_or_default();
    let u = spec.u.unwrap_or(ContinuousSignal::Zero);
    let v = spec.v.unwrap_or(DiscreteSequence::Zero).reseeded(ctx.seed);
    (u, v)
}

/// Rows of `trajectory.csv`: every integrator step start plus `substeps`
/// interior points, and each segment end.
pub fn trajectory_csv(traj: &HybridTrajectory, substeps: usize, orbit: Option<&PeriodicOrbit>) -> String {
    let n = traj.segments.first().map(|s| s.dim()).unwrap_or(0);
    let mut cols = vec!["t".to_string()];
    cols.extend(indexed("x", n));
    if orbit.is_some() {
        cols.push("dist_to_orbit".into());
    }
    cols.push("segment_index".into());
    let mut out = header(&cols);
    let mut row = |t: f64, x: &[f64], seg: usize| {
        let mut fields = vec![fmt_f64(t)];
        fields.extend(x.iter().map(|v| fmt_f64(*v)));
        if let Some(o) = orbit {
            fields.push(fmt_f64(dist_to_orbit(o, x).dist));
        }
        fields.push(seg.to_string());
        out.push_str(&fields.join(","));
        out.push('\n');
    };
    for (si, seg) in traj.segments.iter().enumerate() {
        let mut x = vec![0.0; n];
        for step in &seg.steps {
            for j in 0..=substeps {
                let t = step.t + step.h * j as f64 / (substeps + 1) as f64;
                if t >= seg.t1 {
                    break;
                }
                seg.eval_into(t, &mut x);
                row(t, &x, si);
            }
        }
        row(seg.t1, &seg.x1, si);
    }
    out
}

/// Rows of `impacts.csv`; `T_I` is the length of the flow phase ending at
/// the impact (`NaN` for an initial state placed on the surface).
pub fn impacts_csv(traj: &HybridTrajectory, n: usize, q: usize) -> String {
    let mut cols = vec!["k".to_string(), "t_k".to_string()];
    cols.extend(indexed("x_minus", n));
    cols.extend(indexed("v", q));
    cols.extend(indexed("x_plus", n));
    cols.push("T_I_k".into());
    let mut out = header(&cols);
    let mut prev = 0.0;
    for imp in &traj.impacts {
        let dwell = if imp.lfh.is_nan() { f64::NAN } else { imp.t - prev };
        prev = imp.t;
        let mut fields = vec![imp.k.to_string(), fmt_f64(imp.t)];
        fields.extend(imp.x_minus.iter().map(|v| fmt_f64(*v)));
        fields.extend(imp.v.iter().map(|v| fmt_f64(*v)));
        fields.extend(imp.x_plus.iter().map(|v| fmt_f64(*v)));
        fields.push(fmt_f64(dwell));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn cmd_simulate(ctx: &Context) -> Result<i32, CliError> {
    let block = ctx.config.simulate.clone().unwrap_or_default();
    let horizon = match (block.horizon, block.periods) {
        (Some(h), _) => h,
        (None, Some(p)) => p * reference_period(ctx),
        (None, None) => 10.0 * reference_period(ctx),
    };
    let x0 = initial_state(ctx)?;
    let (u, v) = inputs(ctx);
    let orbit = match &block.orbit_file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
            let file: OrbitFile = serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
            Some(ctx.orbit(&file.report)?)
        }
        None => None,
    };
    let traj = simulate(&ctx.sys, &x0, &u, &v, horizon, &ctx.guards(), &ctx.solver)
        .map_err(|e| CliError::Config(e.to_string()))?;
    ctx.write(
        "trajectory.csv",
        &trajectory_csv(&traj, block.substeps.unwrap_or(3), orbit.as_ref()),
    )?;
    ctx.write("impacts.csv", &impacts_csv(&traj, ctx.sys.n(), ctx.sys.q()))?;
    let meta = SimulateMeta {
        model: &ctx.config.model,
        params: &ctx.config.params,
        seed: ctx.seed,
        horizon,
        t_end: traj.t_end(),
        impacts: traj.impacts.len(),
        termination: &traj.termination,
        termination_label: traj.termination.label(),
        timestamp_unix: timestamp(),
        version: env!("CARGO_PKG_VERSION"),
    };
    ctx.write_json("meta.json", &meta)?;
    println!("termination={} impacts={}", traj.termination.label(), traj.impacts.len());
    match &traj.termination {
        Termination::HorizonReached => Ok(EXIT_OK),
        t if t.is_guard() => Err(CliError::Guard(t.label().into())),
        Termination::Escape { t, norm } => Err(CliError::Solver(format!("escape at t = {t} (|x| = {norm:e})"))),
        Termination::Error { message } => Err(CliError::Solver(message.clone())),
        _ => unreachable!(),
    }
}

pub fn cmd_orbit(ctx: &Context) -> Result<i32, CliError> {
    let report = ctx.stability()?;
    let orbit = ctx.orbit(&report)?;
    let assumptions = check_assumptions(&ctx.sys, &report.x_star, &ctx.solver);
    let file = OrbitFile {
        model: ctx.config.model.clone(),
        params: ctx.config.params.clone(),
        report: report.clone(),
        orbit: orbit.stats.clone(),
        assumptions,
    };
    ctx.write_json("orbit.json", &file)?;
    let mut cols = vec!["tau".to_string(), "tau_backward".to_string()];
    cols.extend(indexed("x", ctx.sys.n()));
    let mut csv = header(&cols);
    for (tau, y) in orbit.taus.iter().zip(&orbit.samples) {
        let mut fields = vec![fmt_f64(*tau), fmt_f64(orbit.backward_tau(*tau))];
        fields.extend(y.iter().map(|v| fmt_f64(*v)));
        csv.push_str(&fields.join(","));
        csv.push('\n');
    }
    ctx.write("orbit_samples.csv", &csv)?;
    let verdict = report.verdict.map(|v| v.label()).unwrap_or("unclassified");
    println!("{verdict}: spectral_radius={}", fmt_f64(report.spectral_radius));
    Ok(EXIT_OK)
}

pub fn cmd_certify_prop1(ctx: &Context) -> Result<i32, CliError> {
    let report = ctx.stability()?;
    let orbit = ctx.orbit(&report)?;
    let block = ctx.config.certify.clone().unwrap_or_default();
    let radii = match block.radii {
        Some(r) => r.iter().map(|k| k * orbit.stats.diameter).collect(),
        None => default_radii(&orbit),
    };
    let n = block.samples_per_radius.unwrap_or(1250);
    match certify_prop1(&orbit, &ctx.sys, n, &radii, ctx.seed) {
        Ok(rep) => {
            ctx.write_json("prop1.json", &rep)?;
            println!(
                "lambda_hat={} violations={} samples={}",
                fmt_f64(rep.lambda_hat),
                rep.violations,
                rep.n_samples
            );
            Ok(EXIT_OK)
        }
        Err(crate::orbit::OrbitError::UpperBoundViolation { x, dist, radius, count }) => {
            ctx.write_json(
                "prop1.json",
                &serde_json::json!({ "violations": count, "first_violation": { "x": x, "dist": dist, "radius": radius } }),
            )?;
            Err(CliError::Certification(format!("{count} upper-bound violations")))
        }
        Err(e) => Err(CliError::Solver(e.to_string())),
    }
}

pub fn cells_csv(report: &IssSweepReport) -> String {
    let cols: Vec<String> = [
        "cell",
        "offset",
        "u_amp",
        "v_amp",
        "trials",
        "seed",
        "ultimate_orbital",
        "ultimate_discrete",
        "peak_orbital",
        "cross_ratio",
        "N_orbital",
        "omega",
        "N_discrete",
        "rho",
        "horizon_reached",
        "zeno_guard",
        "beating_guard",
        "escape",
        "error",
        "min_dwell",
        "max_dwell",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut out = header(&cols);
    for c in &report.cells {
        let (no, om, nd, rho) = match &c.fit {
            Some(f) => (f.orbital.n_coef, f.orbital.rate, f.discrete.n_coef, f.rho),
            None => (f64::NAN, f64::NAN, f64::NAN, f64::NAN),
        };
        let fields = [
            c.index.to_string(),
            fmt_f64(c.offset),
            fmt_f64(c.u_amp),
            fmt_f64(c.v_amp),
            c.trials.to_string(),
            c.seed.to_string(),
            fmt_f64(c.ultimate_orbital),
            fmt_f64(c.ultimate_discrete),
            fmt_f64(c.peak_orbital),
            fmt_f64(c.cross_ratio.unwrap_or(f64::NAN)),
            fmt_f64(no),
            fmt_f64(om),
            fmt_f64(nd),
            fmt_f64(rho),
            c.guards.horizon_reached.to_string(),
            c.guards.zeno_guard.to_string(),
            c.guards.beating_guard.to_string(),
            c.guards.escape.to_string(),
            c.guards.error.to_string(),
            fmt_f64(c.min_dwell),
            fmt_f64(c.max_dwell),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn sweep_config(ctx: &Context) -> Result<SweepConfig, CliError> {
    let block = ctx
        .config
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("iss-sweep needs a `sweep` block".into()))?;
    let spec = ctx.config.inputs.clone().unwrap_or_default();
    let mut s = SweepConfig::new(
        spec.u.unwrap_or_else(|| ctx.profile.u_template.clone()),
        spec.v.unwrap_or_else(|| ctx.profile.v_template.clone()),
    );
    s.offsets = block.offsets;
    s.pairs = block.pairs;
    s.u_amps = if block.u_amps.is_empty() { vec![0.0] } else { block.u_amps };
    s.v_amps = if block.v_amps.is_empty() { vec![0.0] } else { block.v_amps };
    s.trials = block.trials;
    s.seed = ctx.seed;
    if let Some(v) = block.horizon_periods {
        s.horizon_periods = v;
    }
    if let Some(v) = block.transient_cutoff {
        s.transient_cutoff = v;
    }
    if let Some(v) = block.samples_per_step {
        s.samples_per_step = v;
    }
    if let Some(v) = block.fit_floor {
        s.fit_floor = v;
    }
    s.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(s)
}

pub fn cmd_iss_sweep(ctx: &Context) -> Result<i32, CliError> {
    let sweep = sweep_config(ctx)?;
    let report = ctx.stability()?;
    let orbit = ctx.orbit(&report)?;
    let out = run_sweep(&ctx.sys, &orbit, &report, &sweep, &ctx.solver).map_err(|e| CliError::Solver(e.to_string()))?;
    let mut eq = EquivalenceConfig {
        seed: ctx.seed,
        ..EquivalenceConfig::default()
    };
    if let Some(f) = ctx.config.sweep.as_ref().and_then(|b| b.f_max) {
        eq.f_max = f;
    }
    let verdict = check_equivalence(&out, &eq);
    ctx.write("cells.csv", &cells_csv(&out))?;
    ctx.write_json("summary.json", &serde_json::json!({ "sweep": out, "equivalence": verdict }))?;
    println!(
        "cells={} guards={} monotone={} factor={} (F={}) zero_input={}",
        out.cells.len(),
        out.guard_total.guards(),
        verdict.monotone.pass,
        verdict.factor.pass,
        fmt_f64(verdict.f),
        verdict.zero_input.pass
    );
    if verdict.pass() {
        Ok(EXIT_OK)
    } else {
        Err(CliError::Certification("equivalence clauses failed; see summary.json".into()))
    }
}

#[derive(Debug, Clone, Serialize)]
struct ValidateOutput {
    model: String,
    validation: crate::system::ValidationReport,
    passed: bool,
    orbit: Option<OrbitCheck>,
}

#[derive(Debug, Clone, Serialize)]
struct OrbitCheck {
    x_star: State,
    assumptions: AssumptionReport,
}

pub fn cmd_validate(ctx: &Context) -> Result<i32, CliError> {
    let probes = match ctx.config.validate.as_ref().and_then(|b| b.probes.clone()) {
        Some(p) => p,
        None => {
            let g = ctx.profile.fixed_point_guess.clone();
            let mut rng = SplitMix64::new(ctx.seed);
            let mut p = vec![g.clone()];
            for _ in 0..8 {
                p.push(g.iter().map(|c| c + 0.1 * (2.0 * rng.next_f64() - 1.0)).collect());
            }
            p
        }
    };
    let validation = validate_system(&ctx.sys, &probes).map_err(|e| CliError::Config(e.to_string()))?;
    let entry = models::entry(&ctx.config.model).map_err(|e| CliError::Config(e.to_string()))?;
    let orbit = if entry.iss_eligible {
        let report = ctx.stability()?;
        Some(OrbitCheck {
            assumptions: check_assumptions(&ctx.sys, &report.x_star, &ctx.solver),
            x_star: report.x_star,
        })
    } else {
        None
    };
    let passed = validation.passed() && orbit.as_ref().is_none_or(|o| o.assumptions.all_hold());
    ctx.write_json(
        "validation.json",
        &ValidateOutput {
            model: ctx.config.model.clone(),
            validation,
            passed,
            orbit,
        },
    )?;
    println!("validation {}", if passed { "passed" } else { "failed" });
    if passed {
        Ok(EXIT_OK)
    } else {
        Err(CliError::Certification("model validation failed; see validation.json".into()))
    }
}

pub fn execute(command: Command, ctx: &Context) -> Result<i32, CliError> {
    match command {
        Command::Simulate => cmd_simulate(ctx),
        Command::Orbit => cmd_orbit(ctx),
        Command::CertifyProp1 => cmd_certify_prop1(ctx),
        Command::IssSweep => cmd_iss_sweep(ctx),
        Command::Validate => cmd_validate(ctx),
    }
}

/// Parses `args` (including the program name) and runs the command;
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = (|| {
        let path = cli
            .config
            .as_ref()
            .ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
        let config = RunConfig::load(path)?;
        let ctx = Context::new(config, cli.out.clone(), cli.seed)?;
        match cli.threads {
            Some(0) => Err(CliError::Config("--threads must be positive".into())),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| CliError::Config(e.to_string()))?;
                pool.install(|| execute(cli.command, &ctx))
            }
            None => execute(cli.command, &ctx),
        }
    })();
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips() {
        let text = r#"{
            "model": "rimless-wheel",
            "params": {"alpha": 0.39269908169872414},
            "seed": 7,
            "inputs": {"u": {"kind": "sinusoid", "amplitude": [1.0], "omega": 4.0, "phase": 0.0}},
            "sweep": {"offsets": [0.05], "pairs": [[0.05, 0.01], [0.1, 0.02]], "trials": 3}
        }"#;
        let cfg = RunConfig::from_json(text).unwrap();
        let again = RunConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"model": "linear-reset", "horizon": 3}"#).is_err());
        assert!(RunConfig::from_json(r#"{"model": "linear-reset", "simulate": {"periodz": 3}}"#).is_err());
    }

    #[test]
    fn float_format_has_17_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(f64::NAN), "NaN");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
    }

    #[test]
    fn unknown_model_is_a_config_error() {
        let err = Context::new(RunConfig::new("biped"), None, None).err().unwrap();
        assert_eq!(err.exit_code(), EXIT_CONFIG);
        assert!(err.to_string().contains("unknown model"));
    }
}
