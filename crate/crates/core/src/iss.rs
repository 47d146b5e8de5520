//! Input-to-state stability experiments around a periodic orbit: amplitude
//! sweeps, ultimate bounds, exponential decay fits and the consistency
//! checks between the orbital and the discrete (impact-map) pictures.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::SolverConfig;
use crate::hybrid::{simulate, GuardConfig, HybridTrajectory, Termination};
use crate::norm::{axpy, distance};
use crate::orbit::{dist_to_orbit, PeriodicOrbit};
use crate::poincare::{PoincareError, StabilityReport, SurfaceChart};
use crate::signal::{derive_seed, ContinuousSignal, DiscreteSequence, SplitMix64};
use crate::system::{HybridSystemDef, State};

#[derive(Debug, Clone, Error)]
pub enum IssError {
    #[error("invalid sweep configuration: {0}")]
    InvalidConfig(String),
    #[error("decay fit is degenerate: {0}")]
    FitDegenerate(String),
    #[error(transparent)]
    Chart(#[from] PoincareError),
}

/// Grid of initial offsets and input amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Initial distances from `x*`, measured in chart coordinates on `S`.
    pub offsets: Vec<f64>,
    pub u_amps: Vec<f64>,
    pub v_amps: Vec<f64>,
    /// Explicit `(u_amp, v_amp)` pairs replacing the `u_amps x v_amps` product.
    #[serde(default)]
    pub pairs: Option<Vec<[f64; 2]>>,
    pub trials: usize,
    /// Horizon in multiples of `T*`.
    pub horizon_periods: f64,
    /// Fraction of the horizon treated as transient.
    #[serde(default = "default_cutoff")]
    pub transient_cutoff: f64,
    pub seed: u64,
    /// Unit-amplitude continuous input; scaled by each `u_amp`.
    pub u_template: ContinuousSignal,
    /// Unit-bound discrete input; scaled by each `v_amp` and reseeded per trial.
    pub v_template: DiscreteSequence,
    /// Dense samples per inter-impact interval for the orbital supremum.
    #[serde(default = "default_samples_per_step")]
    pub samples_per_step: usize,
    /// Deviations below this are left out of decay fits; keep it well above
    /// the deviation the integrator tolerance alone produces.
    #[serde(default = "default_fit_floor")]
    pub fit_floor: f64,
}

fn default_cutoff() -> f64 {
    0.5
}

fn default_samples_per_step() -> usize {
    16
}

fn default_fit_floor() -> f64 {
    1e-7
}

impl SweepConfig {
    pub fn new(u_template: ContinuousSignal, v_template: DiscreteSequence) -> Self {
        Self {
            offsets: vec![0.1],
            u_amps: vec![0.0],
            v_amps: vec![0.0],
            pairs: None,
            trials: 10,
            horizon_periods: 40.0,
            transient_cutoff: default_cutoff(),
            seed: 0,
            u_template,
            v_template,
            samples_per_step: default_samples_per_step(),
            fit_floor: default_fit_floor(),
        }
    }

    pub fn validate(&self) -> Result<(), IssError> {
        let sorted = |name: &str, v: &[f64]| -> Result<(), IssError> {
            if v.is_empty() {
                return Err(IssError::InvalidConfig(format!("{name} is empty")));
            }
            if v.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
                return Err(IssError::InvalidConfig(format!("{name} must be finite and non-negative")));
            }
            if v.windows(2).any(|w| w[1] < w[0]) {
                return Err(IssError::InvalidConfig(format!("{name} must be sorted ascending")));
            }
            Ok(())
        };
        sorted("offsets", &self.offsets)?;
        match &self.pairs {
            Some(pairs) => {
                let us: Vec<f64> = pairs.iter().map(|p| p[0]).collect();
                let vs: Vec<f64> = pairs.iter().map(|p| p[1]).collect();
                sorted("pairs (u component)", &us)?;
                sorted("pairs (v component)", &vs)?;
            }
            None => {
                sorted("u_amps", &self.u_amps)?;
                sorted("v_amps", &self.v_amps)?;
            }
        }
        if self.trials == 0 {
            return Err(IssError::InvalidConfig("trials must be at least 1".into()));
        }
        if !(self.horizon_periods > 0.0 && self.horizon_periods.is_finite()) {
            return Err(IssError::InvalidConfig("horizon_periods must be positive".into()));
        }
        if !(self.transient_cutoff > 0.0 && self.transient_cutoff < 1.0) {
            return Err(IssError::InvalidConfig("transient_cutoff must lie in (0, 1)".into()));
        }
        if self.samples_per_step == 0 {
            return Err(IssError::InvalidConfig("samples_per_step must be positive".into()));
        }
        Ok(())
    }

    /// `(u_amp, v_amp)` grid in cell order.
    pub fn amplitude_grid(&self) -> Vec<(f64, f64)> {
        match &self.pairs {
            Some(p) => p.iter().map(|a| (a[0], a[1])).collect(),
            None => self
                .u_amps
                .iter()
                .flat_map(|u| self.v_amps.iter().map(move |v| (*u, *v)))
                .collect(),
        }
    }
}

/// Termination counts over the trials of a cell.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardTally {
    pub horizon_reached: usize,
    pub zeno_guard: usize,
    pub beating_guard: usize,
    pub escape: usize,
    pub error: usize,
}

impl GuardTally {
    fn add(&mut self, t: &Termination) {
        match t {
            Termination::HorizonReached => self.horizon_reached += 1,
            Termination::ZenoGuard { .. } => self.zeno_guard += 1,
            Termination::BeatingGuard { .. } => self.beating_guard += 1,
            Termination::Escape { .. } => self.escape += 1,
            Termination::Error { .. } => self.error += 1,
        }
    }

    pub fn guards(&self) -> usize {
        self.zeno_guard + self.beating_guard
    }

    pub fn abnormal(&self) -> usize {
        self.zeno_guard + self.beating_guard + self.escape + self.error
    }
}

/// Deviation history of one zero-input run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayRun {
    /// `dist(x(0), O)`.
    pub orbital0: f64,
    /// `||x_0 - x*||`.
    pub discrete0: f64,
    /// Start time and supremum of `dist(x(t), O)` for each inter-impact interval.
    pub step_times: Vec<f64>,
    pub step_sup: Vec<f64>,
    /// `||x_k^- - x*||` for `k = 0, 1, ...`.
    pub discrete: Vec<f64>,
    pub dwell_times: Vec<f64>,
}

/// Per-cell statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellReport {
    pub index: usize,
    pub offset: f64,
    pub u_amp: f64,
    pub v_amp: f64,
    pub trials: usize,
    /// Seed from which all trial seeds of this cell derive.
    pub seed: u64,
    pub horizon: f64,
    /// Median over completed trials of the post-transient maximum of `dist(x(t), O)`.
    pub ultimate_orbital: f64,
    /// Same for `||x_k - x*||`.
    pub ultimate_discrete: f64,
    /// Median over completed trials of the overall maximum of `dist(x(t), O)`.
    pub peak_orbital: f64,
    pub trial_orbital: Vec<f64>,
    pub trial_discrete: Vec<f64>,
    /// `ultimate_orbital / ultimate_discrete`, when the latter is positive.
    pub cross_ratio: Option<f64>,
    pub guards: GuardTally,
    /// Message of the first trial that ended in an error, if any.
    pub first_error: Option<String>,
    pub min_dwell: f64,
    pub max_dwell: f64,
    /// Decay fit for zero-input cells.
    pub fit: Option<DecayFit>,
}

impl CellReport {
    pub fn is_zero_input(&self) -> bool {
        self.u_amp == 0.0 && self.v_amp == 0.0
    }
}

/// Least-squares fit of `log(deviation / initial) = log N - rate * s`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateFit {
    pub n_coef: f64,
    pub rate: f64,
    /// RMS residual in log space.
    pub residual: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayFit {
    /// `dist(x(t), O) ~ N s e^{-omega t}`; `rate` is `omega`.
    pub orbital: RateFit,
    /// `||x_k - x*|| ~ N s e^{-omega_d k}`.
    pub discrete: RateFit,
    /// `e^{-omega_d}`.
    pub rho: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GainFit {
    /// Slope through the origin of ultimate bound against amplitude.
    pub c_orbital: f64,
    pub c_discrete: f64,
    pub residual_orbital: f64,
    pub residual_discrete: f64,
    pub points: usize,
}

/// Check that the fitted discrete ratio lies in `[e^{-2 omega T_hi}, e^{-omega T_lo / 2}]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateBandCheck {
    pub omega: f64,
    pub rho: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub band: (f64, f64),
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IssSweepReport {
    pub model: String,
    pub x_star: State,
    pub t_star: f64,
    pub config: SweepConfig,
    pub cells: Vec<CellReport>,
    /// Pooled fit over every zero-input cell with a positive offset.
    pub decay: Option<DecayFit>,
    pub decay_error: Option<String>,
    /// Smallest and largest dwell time observed over all completed trials.
    pub dwell_bounds: (f64, f64),
    pub rate_band: Option<RateBandCheck>,
    pub gain_u: Option<GainFit>,
    pub gain_v: Option<GainFit>,
    pub guard_total: GuardTally,
}

struct TrialOutcome {
    termination: Termination,
    ult_orbital: f64,
    ult_discrete: f64,
    peak_orbital: f64,
    run: DecayRun,
}

pub(crate) fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Supremum of `dist(x(t), O)` on each flow segment of `traj`, sampled at
/// `samples + 2` evenly spaced times including both ends.
pub fn step_deviation(orbit: &PeriodicOrbit, traj: &HybridTrajectory, samples: usize) -> Vec<(f64, f64)> {
    traj.segments
        .iter()
        .filter(|s| s.t1 > s.t0)
        .map(|seg| {
            let sup = (0..=samples + 1)
                .map(|i| {
                    let t = seg.t0 + (seg.t1 - seg.t0) * i as f64 / (samples + 1) as f64;
                    dist_to_orbit(orbit, &seg.eval(t)).dist
                })
                .fold(0.0, f64::max);
            (seg.t0, sup)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn run_trial(
    sys: &HybridSystemDef,
    orbit: &PeriodicOrbit,
    chart: &SurfaceChart,
    sweep: &SweepConfig,
    offset: f64,
    u_amp: f64,
    v_amp: f64,
    trial_seed: u64,
    horizon: f64,
    guards: &GuardConfig,
    cfg: &SolverConfig,
) -> Result<TrialOutcome, IssError> {
    let z_star = chart.project(&orbit.x_star);
    let mut rng = SplitMix64::new(trial_seed);
    let dir = rng.unit_vector(z_star.len());
    let x0 = chart.embed(sys, &axpy(offset, &dir, &z_star))?;
    let u = sweep.u_template.scaled(u_amp);
    let v = sweep
        .v_template
        .scaled(v_amp)
        .reseeded(derive_seed(trial_seed, &[1]));
    let mut run = DecayRun {
        orbital0: dist_to_orbit(orbit, &x0).dist,
        discrete0: distance(&x0, &orbit.x_star),
        step_times: Vec::new(),
        step_sup: Vec::new(),
        discrete: Vec::new(),
        dwell_times: Vec::new(),
    };
    let traj = match simulate(sys, &x0, &u, &v, horizon, guards, cfg) {
        Ok(t) => t,
        Err(e) => {
            return Ok(TrialOutcome {
                termination: Termination::Error { message: e.to_string() },
                ult_orbital: f64::NAN,
                ult_discrete: f64::NAN,
                peak_orbital: f64::NAN,
                run,
            })
        }
    };
    let cut = sweep.transient_cutoff * horizon;
    let steps = step_deviation(orbit, &traj, sweep.samples_per_step);
    let mut ult_orbital: f64 = 0.0;
    let mut peak_orbital: f64 = 0.0;
    for (t0, sup) in &steps {
        peak_orbital = peak_orbital.max(*sup);
        if *t0 >= cut {
            ult_orbital = ult_orbital.max(*sup);
        }
        run.step_times.push(*t0);
        run.step_sup.push(*sup);
    }
    let mut ult_discrete: f64 = 0.0;
    for imp in &traj.impacts {
        let d = distance(&imp.x_minus, &orbit.x_star);
        run.discrete.push(d);
        if imp.t >= cut {
            ult_discrete = ult_discrete.max(d);
        }
    }
    // the impact at t = 0 is the placed initial state, not a dwell
    run.dwell_times = traj.dwell_times().into_iter().filter(|d| *d > 0.0).collect();
    Ok(TrialOutcome {
        termination: traj.termination.clone(),
        ult_orbital,
        ult_discrete,
        peak_orbital,
        run,
    })
}

/// Simulates every cell of the sweep and aggregates the statistics. Guard
/// terminations are tallied, never fatal.
pub fn run_sweep(
    sys: &HybridSystemDef,
    orbit: &PeriodicOrbit,
    report: &StabilityReport,
    sweep: &SweepConfig,
    cfg: &SolverConfig,
) -> Result<IssSweepReport, IssError> {
    sweep.validate()?;
    sweep
        .u_template
        .check(sys.p())
        .map_err(IssError::InvalidConfig)?;
    sweep
        .v_template
        .check(sys.q())
        .map_err(IssError::InvalidConfig)?;
    let chart = SurfaceChart::at(sys, &orbit.x_star)?;
    let horizon = sweep.horizon_periods * orbit.t_star;
    let guards = GuardConfig::default().with_period(orbit.t_star);
    let grid = sweep.amplitude_grid();
    let cells: Vec<(f64, f64, f64)> = sweep
        .offsets
        .iter()
        .flat_map(|o| grid.iter().map(move |(u, v)| (*o, *u, *v)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..sweep.trials).map(move |t| (c, t)))
        .collect();
    let outcomes: Vec<Result<TrialOutcome, IssError>> = jobs
        .par_iter()
        .map(|&(c, t)| {
            let (offset, u_amp, v_amp) = cells[c];
            let seed = derive_seed(sweep.seed, &[c as u64, t as u64]);
            run_trial(
                sys, orbit, &chart, sweep, offset, u_amp, v_amp, seed, horizon, &guards, cfg,
            )
        })
        .collect();
    let mut outcomes = outcomes.into_iter();

    let mut cell_reports = Vec::with_capacity(cells.len());
    let mut guard_total = GuardTally::default();
    let mut zero_runs = Vec::new();
    let mut dwell_lo = f64::INFINITY;
    let mut dwell_hi: f64 = 0.0;
    for (index, &(offset, u_amp, v_amp)) in cells.iter().enumerate() {
        let mut guards_cell = GuardTally::default();
        let mut trial_orbital = Vec::new();
        let mut trial_discrete = Vec::new();
        let mut peaks = Vec::new();
        let mut runs = Vec::new();
        let mut cell_lo = f64::INFINITY;
        let mut cell_hi: f64 = 0.0;
        let mut first_error = None;
        for _ in 0..sweep.trials {
            let out = outcomes.next().expect("one outcome per job")?;
            guards_cell.add(&out.termination);
            guard_total.add(&out.termination);
            if let Termination::Error { message } = &out.termination {
                first_error.get_or_insert_with(|| message.clone());
            }
            if out.termination != Termination::HorizonReached {
                continue;
            }
            trial_orbital.push(out.ult_orbital);
            trial_discrete.push(out.ult_discrete);
            peaks.push(out.peak_orbital);
            for d in &out.run.dwell_times {
                cell_lo = cell_lo.min(*d);
                cell_hi = cell_hi.max(*d);
            }
            runs.push(out.run);
        }
        dwell_lo = dwell_lo.min(cell_lo);
        dwell_hi = dwell_hi.max(cell_hi);
        let zero_input = u_amp == 0.0 && v_amp == 0.0;
        let fit = if zero_input && offset > 0.0 {
            fit_decay(&runs, sweep.fit_floor).ok()
        } else {
            None
        };
        if zero_input && offset > 0.0 {
            zero_runs.extend(runs);
        }
        let ultimate_orbital = median(&trial_orbital);
        let ultimate_discrete = median(&trial_discrete);
        cell_reports.push(CellReport {
            index,
            offset,
            u_amp,
            v_amp,
            trials: sweep.trials,
            seed: derive_seed(sweep.seed, &[index as u64]),
            horizon,
            ultimate_orbital,
            ultimate_discrete,
            peak_orbital: median(&peaks),
            trial_orbital,
            trial_discrete,
            cross_ratio: (ultimate_discrete > 0.0).then(|| ultimate_orbital / ultimate_discrete),
            guards: guards_cell,
            first_error,
            min_dwell: cell_lo,
            max_dwell: cell_hi,
            fit,
        });
    }

    let (decay, decay_error) = if zero_runs.is_empty() {
        (None, Some("no zero-input cell with a positive offset".to_string()))
    } else {
        match fit_decay(&zero_runs, sweep.fit_floor) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    let rate_band = decay
        .as_ref()
        .filter(|_| dwell_lo.is_finite() && dwell_hi > 0.0)
        .map(|f| rate_band_check(f, dwell_lo, dwell_hi));
    let gain_u = gain_fit(&cell_reports, |c| c.v_amp == 0.0 && c.u_amp > 0.0, |c| c.u_amp);
    let gain_v = gain_fit(&cell_reports, |c| c.u_amp == 0.0 && c.v_amp > 0.0, |c| c.v_amp);
    Ok(IssSweepReport {
        model: sys.name().to_string(),
        x_star: orbit.x_star.clone(),
        t_star: report.t_star,
        config: sweep.clone(),
        cells: cell_reports,
        decay,
        decay_error,
        dwell_bounds: (dwell_lo, dwell_hi),
        rate_band,
        gain_u,
        gain_v,
        guard_total,
    })
}

fn line_fit(points: &[(f64, f64)]) -> RateFit {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = points
        .iter()
        .map(|p| {
            let r = p.1 - intercept - slope * p.0;
            r * r
        })
        .sum();
    RateFit {
        n_coef: intercept.exp(),
        rate: -slope,
        residual: (ss / n).sqrt(),
        points: points.len(),
    }
}

/// Pooled log-linear fits of the orbital and discrete decay of zero-input runs.
pub fn fit_decay(runs: &[DecayRun], floor: f64) -> Result<DecayFit, IssError> {
    if runs.len() < 5 {
        return Err(IssError::FitDegenerate(format!("{} runs, need at least 5", runs.len())));
    }
    let mut orbital = Vec::new();
    let mut discrete = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        if !(run.orbital0 > floor && run.discrete0 > floor) {
            return Err(IssError::FitDegenerate(format!("run {i} starts at the noise floor")));
        }
        let o: Vec<(f64, f64)> = run
            .step_times
            .iter()
            .zip(&run.step_sup)
            .filter(|(_, d)| **d > floor)
            .map(|(t, d)| (*t, (d / run.orbital0).ln()))
            .collect();
        let d: Vec<(f64, f64)> = run
            .discrete
            .iter()
            .enumerate()
            .filter(|(_, d)| **d > floor)
            .map(|(k, d)| (k as f64, (d / run.discrete0).ln()))
            .collect();
        if o.len() < 10 || d.len() < 10 {
            return Err(IssError::FitDegenerate(format!(
                "run {i} reaches the floor {floor:e} after {} orbital / {} discrete points; use a larger offset",
                o.len(),
                d.len()
            )));
        }
        orbital.extend(o);
        discrete.extend(d);
    }
    let orbital = line_fit(&orbital);
    let discrete = line_fit(&discrete);
    Ok(DecayFit {
        rho: (-discrete.rate).exp(),
        orbital,
        discrete,
        runs: runs.len(),
    })
}

pub fn rate_band_check(fit: &DecayFit, t_lo: f64, t_hi: f64) -> RateBandCheck {
    let omega = fit.orbital.rate;
    let band = ((-2.0 * omega * t_hi).exp(), (-omega * t_lo / 2.0).exp());
    RateBandCheck {
        omega,
        rho: fit.rho,
        t_lo,
        t_hi,
        band,
        pass: fit.rho >= band.0 && fit.rho <= band.1,
    }
}

fn gain_fit<S, A>(cells: &[CellReport], select: S, amp: A) -> Option<GainFit>
where
    S: Fn(&CellReport) -> bool,
    A: Fn(&CellReport) -> f64,
{
    let pts: Vec<(f64, f64, f64)> = cells
        .iter()
        .filter(|c| select(c) && c.ultimate_orbital.is_finite() && c.ultimate_discrete.is_finite())
        .map(|c| (amp(c), c.ultimate_orbital, c.ultimate_discrete))
        .collect();
    if pts.is_empty() {
        return None;
    }
    let srr: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let c_o = pts.iter().map(|p| p.0 * p.1).sum::<f64>() / srr;
    let c_d = pts.iter().map(|p| p.0 * p.2).sum::<f64>() / srr;
    let rms = |c: f64, pick: fn(&(f64, f64, f64)) -> f64| {
        (pts.iter().map(|p| (pick(p) - c * p.0).powi(2)).sum::<f64>() / pts.len() as f64).sqrt()
    };
    Some(GainFit {
        c_orbital: c_o,
        c_discrete: c_d,
        residual_orbital: rms(c_o, |p| p.1),
        residual_discrete: rms(c_d, |p| p.2),
        points: pts.len(),
    })
}

/// Percentile bootstrap interval for `median(b) - median(a)`.
pub fn bootstrap_median_diff(a: &[f64], b: &[f64], resamples: usize, level: f64, seed: u64) -> (f64, f64) {
    if a.is_empty() || b.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mut rng = SplitMix64::new(seed);
    let mut draw = |x: &[f64]| -> Vec<f64> {
        (0..x.len())
            .map(|_| x[(rng.next_u64() % x.len() as u64) as usize])
            .collect()
    };
    let mut diffs: Vec<f64> = (0..resamples)
        .map(|_| {
            let ra = draw(a);
            let rb = draw(b);
            median(&rb) - median(&ra)
        })
        .collect();
    diffs.sort_by(|x, y| x.total_cmp(y));
    let q = |p: f64| diffs[((p * (resamples - 1) as f64).round() as usize).min(resamples - 1)];
    let tail = 0.5 * (1.0 - level);
    (q(tail), q(1.0 - tail))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceConfig {
    /// Largest acceptable orbital/discrete ratio in either direction.
    pub f_max: f64,
    /// Ultimate bounds at zero input must not exceed this.
    pub floor: f64,
    pub resamples: usize,
    pub level: f64,
    pub seed: u64,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        Self {
            f_max: 10.0,
            floor: 1e-6,
            resamples: 1000,
            level: 0.95,
            seed: 0x5EED,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Clause {
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceVerdict {
    /// (a) ultimate bounds do not decrease significantly with amplitude.
    pub monotone: Clause,
    /// (b) orbital and discrete bounds within factor `F`.
    pub factor: Clause,
    pub f: f64,
    /// (c) both bounds vanish at zero input.
    pub zero_input: Clause,
}

impl EquivalenceVerdict {
    pub fn pass(&self) -> bool {
        self.monotone.pass && self.factor.pass && self.zero_input.pass
    }
}

/// Chains of cells along which exactly one amplitude knob grows.
fn amplitude_chains(report: &IssSweepReport) -> Vec<Vec<usize>> {
    let cells = &report.cells;
    let mut chains = Vec::new();
    let mut offsets: Vec<f64> = cells.iter().map(|c| c.offset).collect();
    offsets.dedup();
    for off in offsets {
        let at: Vec<&CellReport> = cells.iter().filter(|c| c.offset == off).collect();
        if report.config.pairs.is_some() {
            chains.push(at.iter().map(|c| c.index).collect());
            continue;
        }
        for v in &report.config.v_amps {
            chains.push(at.iter().filter(|c| c.v_amp == *v).map(|c| c.index).collect());
        }
        for u in &report.config.u_amps {
            chains.push(at.iter().filter(|c| c.u_amp == *u).map(|c| c.index).collect());
        }
    }
    chains.retain(|c: &Vec<usize>| c.len() > 1);
    chains
}

/// Evaluates the three agreement clauses between the orbital and discrete
/// ultimate bounds of a sweep.
pub fn check_equivalence(report: &IssSweepReport, cfg: &EquivalenceConfig) -> EquivalenceVerdict {
    let cells = &report.cells;

    let mut failures = Vec::new();
    let mut compared = 0;
    for chain in amplitude_chains(report) {
        for w in chain.windows(2) {
            let (a, b) = (&cells[w[0]], &cells[w[1]]);
            let families = [("orbital", &a.trial_orbital, &b.trial_orbital), ("discrete", &a.trial_discrete, &b.trial_discrete)];
            for (name, ta, tb) in families {
                compared += 1;
                let seed = derive_seed(cfg.seed, &[w[0] as u64, w[1] as u64]);
                let (_, hi) = bootstrap_median_diff(ta, tb, cfg.resamples, cfg.level, seed);
                if !(hi >= -cfg.floor) {
                    failures.push(format!("{name} bound drops from cell {} to cell {} (CI upper {hi:e})", w[0], w[1]));
                }
            }
        }
    }
    let monotone = Clause {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("{compared} neighbouring comparisons, none significantly decreasing")
        } else {
            failures.join("; ")
        },
    };

    let mut f: f64 = 1.0;
    let mut worst = None;
    for c in cells {
        let (o, d) = (c.ultimate_orbital, c.ultimate_discrete);
        if !(o.is_finite() && d.is_finite()) {
            f = f64::INFINITY;
            worst = Some(c.index);
            continue;
        }
        if o <= cfg.floor && d <= cfg.floor {
            continue;
        }
        let ratio = (o / d).max(d / o);
        if ratio > f {
            f = ratio;
            worst = Some(c.index);
        }
    }
    let factor = Clause {
        pass: f <= cfg.f_max,
        detail: match worst {
            Some(i) => format!("F = {f:.4} attained at cell {i}"),
            None => "F = 1 (all cells at the floor)".into(),
        },
    };

    let zero: Vec<&CellReport> = cells.iter().filter(|c| c.is_zero_input()).collect();
    let zmax = zero
        .iter()
        .map(|c| c.ultimate_orbital.max(c.ultimate_discrete))
        .fold(0.0, |m: f64, v| if v.is_nan() { f64::INFINITY } else { m.max(v) });
    let zero_input = Clause {
        pass: zmax <= cfg.floor,
        detail: if zero.is_empty() {
            "no zero-input cell in the sweep".into()
        } else {
            format!("largest zero-input bound {zmax:e} over {} cells", zero.len())
        },
    };
    EquivalenceVerdict {
        monotone,
        factor,
        f,
        zero_input,
    }
}
