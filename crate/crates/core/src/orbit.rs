//! The periodic orbit as a sampled curve: nearest-point queries,
//! point-to-orbit distance and the distance sandwich certificate on `S`.
//!
//! Samples run forward from `Delta(x*, 0)` at `tau = 0` to `x*` at
//! `tau = T*`; [`PeriodicOrbit::backward_tau`] converts to the indexing that
//! starts at `x*` and runs against the flow.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{integrate, FlowError, FlowSegment, IntegratorConfig};
use crate::norm::{distance, distance_sq, dot, euclidean};
use crate::poincare::{PoincareError, StabilityReport, SurfaceChart};
use crate::signal::{derive_seed, SplitMix64};
use crate::system::{HybridSystemDef, State, SystemError};

/// Samples closer to `x*` than this are left out of ratio statistics.
pub const DEGENERATE_RADIUS: f64 = 1e-12;
/// Points of `tau_set` lie within this distance of the minimum.
pub const TAU_SET_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Error)]
pub enum OrbitError {
    #[error("orbit does not close: ||phi(T*) - x*|| = {error:e} exceeds {tol:e}")]
    ClosureError { error: f64, tol: f64 },
    #[error("report has no usable fixed point: {0}")]
    InvalidReport(String),
    #[error("dist(x, O) = {dist:e} exceeds ||x - x*|| = {radius:e} at {x:?} ({count} violations)")]
    UpperBoundViolation {
        x: State,
        dist: f64,
        radius: f64,
        count: usize,
    },
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Chart(#[from] PoincareError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitSettings {
    pub integrator: IntegratorConfig,
    /// Sample spacing as a fraction of the orbit diameter.
    pub ds_fraction: f64,
    /// Allowed closure error relative to `max(1, ||x*||)`.
    pub closure_tol: f64,
}

impl Default for OrbitSettings {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::with_tolerances(1e-12, 1e-14),
            ds_fraction: 1e-3,
            closure_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitStats {
    pub n_samples: usize,
    pub diameter: f64,
    pub ds_max: f64,
    /// Largest distance between consecutive samples.
    pub max_gap: f64,
    pub closure_error: f64,
    pub min_speed: f64,
    pub max_speed: f64,
}

/// The zero-input periodic orbit through `x*`.
#[derive(Debug, Clone)]
pub struct PeriodicOrbit {
    pub x_star: State,
    pub t_star: f64,
    pub taus: Vec<f64>,
    pub samples: Vec<State>,
    pub segment: FlowSegment,
    pub stats: OrbitStats,
    speeds: Vec<f64>,
}

impl PeriodicOrbit {
    /// `y(tau)`, forward from `Delta(x*, 0)`; `y(T*) = x*`.
    pub fn point(&self, tau: f64) -> State {
        if tau >= self.t_star {
            return self.x_star.clone();
        }
        self.segment.eval(tau)
    }

    pub fn backward_tau(&self, tau: f64) -> f64 {
        self.t_star - tau
    }

    pub fn dim(&self) -> usize {
        self.x_star.len()
    }
}

/// Integrates the zero-input flow from `Delta(x*, 0)` over one period and
/// samples it with spacing at most `ds_fraction * diameter`.
pub fn build_orbit(
    sys: &HybridSystemDef,
    report: &StabilityReport,
    settings: &OrbitSettings,
) -> Result<PeriodicOrbit, OrbitError> {
    let x_star = &report.x_star;
    if x_star.len() != sys.n() || !(report.t_star.is_finite() && report.t_star > 0.0) {
        return Err(OrbitError::InvalidReport(format!(
            "x* of length {} and T* = {}",
            x_star.len(),
            report.t_star
        )));
    }
    let zero_u = crate::signal::ContinuousSignal::Zero;
    let x_plus = sys.reset(x_star, &vec![0.0; sys.q()])?;
    let segment = integrate(sys, &x_plus, &zero_u, report.t_star, &settings.integrator)?;
    let closure_error = distance(&segment.x1, x_star);
    let tol = settings.closure_tol * euclidean(x_star).max(1.0);
    if !(closure_error <= tol) {
        return Err(OrbitError::ClosureError {
            error: closure_error,
            tol,
        });
    }

    // coarse pass: step boundaries and midpoints
    let mesh = segment.mesh();
    let mut coarse = Vec::with_capacity(2 * mesh.len());
    for w in mesh.windows(2) {
        coarse.push(segment.eval(w[0]));
        coarse.push(segment.eval(0.5 * (w[0] + w[1])));
    }
    coarse.push(x_star.clone());
    let mut diameter: f64 = 0.0;
    for i in 0..coarse.len() {
        for j in (i + 1)..coarse.len() {
            diameter = diameter.max(distance(&coarse[i], &coarse[j]));
        }
    }
    let ds_max = if diameter > 0.0 {
        settings.ds_fraction * diameter
    } else {
        settings.ds_fraction
    };

    let mut taus = Vec::new();
    let mut samples = Vec::new();
    for w in mesh.windows(2) {
        let (a, b) = (w[0], w[1]);
        let ya = segment.eval(a);
        let yb = if b >= report.t_star { x_star.clone() } else { segment.eval(b) };
        let mut k = ((distance(&ya, &yb) / ds_max).ceil() as usize).max(1);
        loop {
            let pts: Vec<(f64, State)> = (0..k)
                .map(|i| {
                    let t = a + (b - a) * i as f64 / k as f64;
                    (t, segment.eval(t))
                })
                .collect();
            let ok = pts
                .windows(2)
                .all(|p| distance(&p[0].1, &p[1].1) <= ds_max)
                && distance(&pts[k - 1].1, &yb) <= ds_max;
            if ok || k > 1 << 20 {
                for (t, y) in pts {
                    taus.push(t);
                    samples.push(y);
                }
                break;
            }
            k *= 2;
        }
    }
    taus.push(report.t_star);
    samples.push(x_star.clone());

    let zero = vec![0.0; sys.p()];
    let mut speeds = Vec::with_capacity(samples.len());
    for y in &samples {
        speeds.push(euclidean(&sys.vector_field(y, &zero)?));
    }
    let max_gap = samples
        .windows(2)
        .map(|p| distance(&p[0], &p[1]))
        .fold(0.0, f64::max);
    let stats = OrbitStats {
        n_samples: samples.len(),
        diameter,
        ds_max,
        max_gap,
        closure_error,
        min_speed: speeds.iter().copied().fold(f64::INFINITY, f64::min),
        max_speed: speeds.iter().copied().fold(0.0, f64::max),
    };
    Ok(PeriodicOrbit {
        x_star: x_star.clone(),
        t_star: report.t_star,
        taus,
        samples,
        segment,
        stats,
        speeds,
    })
}

/// Nearest-point query result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitDistance {
    pub dist: f64,
    /// Every minimiser `tau` (within [`TAU_SET_TOL`] of `dist`), ascending.
    pub tau_set: Vec<f64>,
}

fn golden_min<F: Fn(f64) -> f64>(g: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut gc = g(c);
    let mut gd = g(d);
    while (b - a).abs() > tol {
        if gc <= gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
    }
    if gc <= gd {
        (c, gc)
    } else {
        (d, gd)
    }
}

/// `dist(x, O)` and the set of nearest parameters.
pub fn dist_to_orbit(orbit: &PeriodicOrbit, x: &[f64]) -> OrbitDistance {
    let n = orbit.samples.len();
    let g: Vec<f64> = orbit.samples.iter().map(|y| distance_sq(x, y)).collect();
    let g_min = g.iter().copied().fold(f64::INFINITY, f64::min);
    let reach = g_min.sqrt() + 2.0 * orbit.stats.ds_max;
    let reach_sq = reach * reach;

    let sq = |tau: f64| distance_sq(x, &orbit.point(tau));
    let mut candidates: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        let left = if i > 0 { g[i - 1] } else { f64::INFINITY };
        let right = if i + 1 < n { g[i + 1] } else { f64::INFINITY };
        if g[i] > left || g[i] > right || g[i] > reach_sq {
            continue;
        }
        candidates.push((orbit.taus[i], g[i]));
        // at either end of the parameter range only the inner neighbour brackets
        let lo = orbit.taus[i.saturating_sub(1)];
        let hi = orbit.taus[(i + 1).min(n - 1)];
        let tol = 1e-12 * orbit.t_star.max(1.0);
        let (tau, val) = golden_min(sq, lo, hi, tol);
        if tau - lo <= 2.0 * tol || hi - tau <= 2.0 * tol {
            // minimum sits on a sample already in the candidate list
            continue;
        }
        candidates.push((tau, val));
        if let Some((tp, vp)) = parabolic_polish(&sq, tau, tol, lo, hi) {
            if vp < val {
                candidates.push((tp, vp));
            }
        }
    }
    let best = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min).max(0.0);
    let dist = best.sqrt();
    let mut tau_set: Vec<f64> = candidates
        .iter()
        .filter(|c| c.1.max(0.0).sqrt() <= dist + TAU_SET_TOL)
        .map(|c| c.0)
        .collect();
    tau_set.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let merge = 1e-9 * orbit.t_star.max(1.0);
    tau_set.dedup_by(|a, b| (*a - *b).abs() <= merge);
    OrbitDistance { dist, tau_set }
}

fn parabolic_polish<F: Fn(f64) -> f64>(g: &F, tau: f64, h: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    let h = h.max(1e-9 * (hi - lo));
    let (a, b, c) = (tau - h, tau, tau + h);
    if a < lo || c > hi {
        return None;
    }
    let (ga, gb, gc) = (g(a), g(b), g(c));
    let denom = ga - 2.0 * gb + gc;
    if !(denom > 0.0) {
        return None;
    }
    let t = b + 0.5 * h * (ga - gc) / denom;
    (t >= lo && t <= hi).then(|| (t, g(t)))
}

/// Result of the distance sandwich check `lambda ||x - x*|| <= dist(x, O) <= ||x - x*||`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prop1Report {
    /// Smallest observed `dist(x, O) / ||x - x*||`.
    pub lambda_hat: f64,
    pub violations: usize,
    /// Smallest `||x - x*|| - dist(x, O)` over all samples.
    pub upper_bound_margin: f64,
    pub n_samples: usize,
    pub n_skipped: usize,
    pub per_radius: Vec<RadiusStats>,
    /// Sample attaining `lambda_hat`.
    pub argmin: State,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiusStats {
    pub radius: f64,
    pub n: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Radii from `1e-4` to `1e3` orbit diameters, one per decade.
pub fn default_radii(orbit: &PeriodicOrbit) -> Vec<f64> {
    let d = orbit.stats.diameter.max(1e-12);
    (-4..=3).map(|k| d * 10f64.powi(k)).collect()
}

/// Samples points of `S` at each radius (in chart coordinates) around `x*`
/// and checks the distance sandwich on every one of them.
pub fn certify_prop1(
    orbit: &PeriodicOrbit,
    sys: &HybridSystemDef,
    n_samples: usize,
    radii: &[f64],
    seed: u64,
) -> Result<Prop1Report, OrbitError> {
    let chart = SurfaceChart::at(sys, &orbit.x_star)?;
    let z_star = chart.project(&orbit.x_star);
    let m = z_star.len();
    let jobs: Vec<(usize, usize)> = (0..radii.len())
        .flat_map(|r| (0..n_samples).map(move |s| (r, s)))
        .collect();
    let results: Vec<Option<(usize, State, f64, f64)>> = jobs
        .par_iter()
        .map(|&(ri, si)| {
            let mut rng = SplitMix64::new(derive_seed(seed, &[ri as u64, si as u64]));
            let dir = rng.unit_vector(m);
            let z: Vec<f64> = z_star.iter().zip(&dir).map(|(a, d)| a + radii[ri] * d).collect();
            let x = chart.embed(sys, &z).ok()?;
            let radius = distance(&x, &orbit.x_star);
            if radius < DEGENERATE_RADIUS {
                return None;
            }
            let d = dist_to_orbit(orbit, &x).dist;
            Some((ri, x, d, radius))
        })
        .collect();

    let mut per_radius: Vec<RadiusStats> = radii
        .iter()
        .map(|r| RadiusStats {
            radius: *r,
            n: 0,
            min_ratio: f64::INFINITY,
            max_ratio: 0.0,
        })
        .collect();
    let mut lambda_hat = f64::INFINITY;
    let mut argmin = orbit.x_star.clone();
    let mut margin = f64::INFINITY;
    let mut violations = 0;
    let mut first_violation = None;
    let mut n_used = 0;
    for (ri, x, d, radius) in results.iter().flatten() {
        n_used += 1;
        let ratio = d / radius;
        let stats = &mut per_radius[*ri];
        stats.n += 1;
        stats.min_ratio = stats.min_ratio.min(ratio);
        stats.max_ratio = stats.max_ratio.max(ratio);
        margin = margin.min(radius - d);
        if *d > radius + 1e-9 {
            violations += 1;
            first_violation.get_or_insert((x.clone(), *d, *radius));
        }
        if ratio < lambda_hat {
            lambda_hat = ratio;
            argmin = x.clone();
        }
    }
    if let Some((x, dist, radius)) = first_violation {
        return Err(OrbitError::UpperBoundViolation {
            x,
            dist,
            radius,
            count: violations,
        });
    }
    Ok(Prop1Report {
        lambda_hat,
        violations,
        upper_bound_margin: margin,
        n_samples: n_used,
        n_skipped: results.len() - n_used,
        per_radius,
        argmin,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InjectivityReport {
    /// Sample pairs far apart in `tau` but closer than the floor in state space.
    pub violations: usize,
    /// Smallest state distance among the pairs that were compared.
    pub min_separation: f64,
}

/// Flags self-intersections: samples more than `2 ds_max / min ||f||` apart
/// in `tau` must stay at least `floor` apart in state space. Orbits whose
/// reset is continuous at `x*` are compared with cyclic `tau` distance.
pub fn check_injectivity(orbit: &PeriodicOrbit, floor: f64) -> InjectivityReport {
    let n = orbit.samples.len();
    let min_speed = orbit.speeds.iter().copied().fold(f64::INFINITY, f64::min).max(1e-300);
    let gap = 2.0 * orbit.stats.ds_max / min_speed;
    let cyclic = distance(&orbit.samples[0], &orbit.samples[n - 1]) <= floor;
    let t = orbit.t_star;
    let rows: Vec<(usize, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut count = 0;
            let mut min_sep = f64::INFINITY;
            for j in (i + 1)..n {
                let mut dt = orbit.taus[j] - orbit.taus[i];
                if cyclic {
                    dt = dt.min(t - dt);
                }
                if dt <= gap {
                    continue;
                }
                let d = distance(&orbit.samples[i], &orbit.samples[j]);
                min_sep = min_sep.min(d);
                if d < floor {
                    count += 1;
                }
            }
            (count, min_sep)
        })
        .collect();
    InjectivityReport {
        violations: rows.iter().map(|r| r.0).sum(),
        min_separation: rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min),
    }
}

/// `(x - y(tau)) . f(y(tau), 0)`, which vanishes at interior minimisers of
/// the distance.
pub fn stationarity(orbit: &PeriodicOrbit, sys: &HybridSystemDef, x: &[f64], tau: f64) -> Result<f64, OrbitError> {
    let y = orbit.point(tau);
    let f = sys.vector_field(&y, &vec![0.0; sys.p()])?;
    let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
    Ok(dot(&diff, &f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{linear_reset, rimless_wheel, vdp_adapter};
    use crate::poincare::{analyze_orbit, FixedPointConfig};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_8, LN_2};
    use std::sync::OnceLock;

    fn lr_orbit() -> &'static (HybridSystemDef, PeriodicOrbit) {
        static CELL: OnceLock<(HybridSystemDef, PeriodicOrbit)> = OnceLock::new();
        CELL.get_or_init(|| {
            let sys = linear_reset(LN_2);
            let rep = analyze_orbit(&sys, &[1.0, 0.7], &FixedPointConfig::default()).unwrap();
            let orbit = build_orbit(&sys, &rep, &OrbitSettings::default()).unwrap();
            (sys, orbit)
        })
    }

    fn wheel_orbit() -> &'static (HybridSystemDef, StabilityReport, PeriodicOrbit) {
        static CELL: OnceLock<(HybridSystemDef, StabilityReport, PeriodicOrbit)> = OnceLock::new();
        CELL.get_or_init(|| {
            let sys = rimless_wheel(FRAC_PI_8, 0.08, 9.81);
            let rep = analyze_orbit(&sys, &[0.08 + FRAC_PI_8, 1.6], &FixedPointConfig::default()).unwrap();
            let orbit = build_orbit(&sys, &rep, &OrbitSettings::default()).unwrap();
            (sys, rep, orbit)
        })
    }

    #[test]
    fn nearest_point_inside_the_last_sample_interval() {
        let (_, rep, orbit) = wheel_orbit();
        let x_star = &rep.x_star;
        let t = orbit.t_star;
        let last = orbit.taus[orbit.taus.len() - 2];
        for r in [1e-5, 1e-4, -1e-5, -1e-4, -3e-4] {
            let x = [x_star[0], x_star[1] + r];
            let brute = (0..=100_000)
                .map(|i| distance(&x, &orbit.point(last + (t - last) * i as f64 / 100_000.0)))
                .fold(f64::INFINITY, f64::min);
            let d = dist_to_orbit(orbit, &x).dist;
            assert!((d - brute).abs() < 1e-9 * r.abs().max(1e-3), "r = {r}: {d} vs {brute}");
        }
        // behind x* the orbit passes closer than x* itself
        assert!(dist_to_orbit(orbit, &[x_star[0], x_star[1] - 1e-4]).dist < 0.5e-4);
    }

    #[test]
    fn linear_reset_orbit_is_the_unit_segment() {
        let (_, orbit) = lr_orbit();
        assert!((orbit.stats.diameter - 1.0).abs() < 1e-9);
        assert!(orbit.stats.max_gap <= orbit.stats.ds_max);
        for (t, y) in orbit.taus.iter().zip(&orbit.samples) {
            assert!((y[0] - t).abs() < 1e-9 && y[1].abs() < 1e-9);
        }
        let q = dist_to_orbit(orbit, &[0.5, 0.2]);
        assert!((q.dist - 0.2).abs() < 1e-9);
        assert_eq!(q.tau_set.len(), 1);
        assert!((q.tau_set[0] - 0.5).abs() < 1e-6, "{:?}", q.tau_set);
    }

    #[test]
    fn closure_point_and_samples_are_on_the_orbit() {
        let (_, orbit) = lr_orbit();
        let q = dist_to_orbit(orbit, &orbit.x_star);
        assert_eq!(q.dist, 0.0);
        assert!(q.tau_set.contains(&orbit.t_star));
        for i in [0, 17, orbit.samples.len() / 2] {
            let q = dist_to_orbit(orbit, &orbit.samples[i]);
            assert!(q.dist <= 1e-10);
            assert!(q.tau_set.iter().any(|t| (t - orbit.taus[i]).abs() < 1e-6));
        }
        assert_eq!(orbit.backward_tau(orbit.t_star), 0.0);
    }

    #[test]
    fn wheel_orbit_conserves_energy() {
        let (_, rep, orbit) = wheel_orbit();
        let energy = |y: &State| 0.5 * y[1] * y[1] + 9.81 * y[0].cos();
        let e0 = energy(&orbit.samples[0]);
        for y in &orbit.samples {
            assert!((energy(y) - e0).abs() < 1e-8);
        }
        let c = (2.0 * FRAC_PI_8).cos();
        assert!((orbit.samples[0][0] - (0.08 - FRAC_PI_8)).abs() < 1e-15);
        assert!((orbit.samples[0][1] - c * rep.x_star[1]).abs() < 1e-14);
        assert_eq!(orbit.samples.last().unwrap(), &rep.x_star);
        assert!(check_injectivity(orbit, 1e-6).violations == 0);
    }

    #[test]
    fn stale_report_does_not_close() {
        let (sys, rep, _) = wheel_orbit();
        let mut bad = rep.clone();
        bad.x_star[1] += 1e-2;
        assert!(matches!(
            build_orbit(sys, &bad, &OrbitSettings::default()),
            Err(OrbitError::ClosureError { .. })
        ));
    }

    #[test]
    fn distance_matches_brute_force_oversampling() {
        let (_, _, orbit) = wheel_orbit();
        let fine: Vec<State> = (0..=1_000_000)
            .map(|i| orbit.point(orbit.t_star * i as f64 / 1e6))
            .collect();
        let mut rng = SplitMix64::new(11);
        for _ in 0..100 {
            let x = vec![-0.5 + 1.2 * rng.next_f64(), 0.5 + 1.5 * rng.next_f64()];
            let brute = fine.iter().map(|y| distance(&x, y)).fold(f64::INFINITY, f64::min);
            let q = dist_to_orbit(orbit, &x);
            // the oversampled minimum overestimates by at most half a fine gap
            assert!(q.dist <= brute + 1e-12, "{} vs {}", q.dist, brute);
            assert!(q.dist >= brute - 1e-5, "{} vs {}", q.dist, brute);
            let stat = stationarity(orbit, &wheel_orbit().0, &x, q.tau_set[0]).unwrap();
            if q.tau_set[0] > 0.0 && q.tau_set[0] < orbit.t_star {
                assert!(stat.abs() < 1e-6, "{stat}");
            }
        }
    }

    #[test]
    fn linear_reset_sandwich_is_tight() {
        let (sys, orbit) = lr_orbit();
        let rep = certify_prop1(orbit, sys, 50, &default_radii(orbit), 1).unwrap();
        assert_eq!(rep.violations, 0);
        // x* carries the Newton residual (~3e-11), which shows up relative to
        // the smallest radii
        assert!((rep.lambda_hat - 1.0).abs() < 1e-6, "{}", rep.lambda_hat);
    }

    #[test]
    fn wheel_sandwich_holds() {
        let (sys, _, orbit) = wheel_orbit();
        let rep = certify_prop1(orbit, sys, 1250, &default_radii(orbit), 2).unwrap();
        assert_eq!(rep.n_samples + rep.n_skipped, 10_000);
        assert!(rep.lambda_hat > 0.0 && rep.lambda_hat <= 1.0 + 1e-12, "{}", rep.lambda_hat);
        assert!(rep.upper_bound_margin >= -1e-9);
    }

    #[test]
    fn vdp_orbit_is_closed_and_injective() {
        let sys = vdp_adapter(0.2);
        let cfg = FixedPointConfig::default();
        let rep = analyze_orbit(&sys, &[2.0, 0.0], &cfg).unwrap();
        let orbit = build_orbit(&sys, &rep, &OrbitSettings::default()).unwrap();
        assert!(orbit.stats.diameter > 3.5);
        assert_eq!(check_injectivity(&orbit, 1e-3).violations, 0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn distance_is_one_lipschitz(a in -2.0..3.0f64, b in -2.0..2.0f64, c in -2.0..3.0f64, d in -2.0..2.0f64) {
            let (_, _, orbit) = wheel_orbit();
            let x = [a, b + 1.0];
            let y = [c, d + 1.0];
            let dx = dist_to_orbit(orbit, &x).dist;
            let dy = dist_to_orbit(orbit, &y).dist;
            prop_assert!((dx - dy).abs() <= distance(&x, &y) + 1e-12);
        }

        #[test]
        fn refinement_never_exceeds_sample_minimum(a in -2.0..3.0f64, b in -1.0..3.0f64) {
            let (_, _, orbit) = wheel_orbit();
            let x = [a, b];
            let coarse = orbit.samples.iter().map(|y| distance(&x, y)).fold(f64::INFINITY, f64::min);
            prop_assert!(dist_to_orbit(orbit, &x).dist <= coarse);
        }
    }
}
