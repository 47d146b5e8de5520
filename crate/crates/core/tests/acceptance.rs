//! End-to-end acceptance suite. Prints one PASS / FAIL line per criterion
//! and exits nonzero if any criterion fails.

use std::f64::consts::{FRAC_PI_8, LN_2};
use std::panic;
use std::path::Path;
use std::time::Instant;

use sie::events::SolverConfig;
use sie::flow::{integrate, IntegratorConfig};
use sie::hybrid::{simulate, GuardConfig, Termination};
use sie::iss::{check_equivalence, run_sweep, EquivalenceConfig, IssSweepReport, SweepConfig};
use sie::models::{self, bouncing_ball, linear_reset, rimless_wheel, vdp_adapter, Params};
use sie::norm::{distance, euclidean};
use sie::orbit::{build_orbit, certify_prop1, dist_to_orbit, OrbitSettings, PeriodicOrbit};
use sie::poincare::{analyze_orbit, FixedPointConfig, StabilityReport, SurfaceChart, Verdict};
use sie::signal::{ContinuousSignal, DiscreteSequence, SplitMix64};
use sie::system::HybridSystemDef;

const ALPHA: f64 = FRAC_PI_8;
const GAMMA: f64 = 0.08;
const G_OVER_L: f64 = 9.81;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(checks: &[(bool, String)]) -> Self {
        let pass = checks.iter().all(|(ok, _)| *ok);
        let detail = checks
            .iter()
            .map(|(ok, s)| if *ok { s.clone() } else { format!("{s} [failed]") })
            .collect::<Vec<_>>()
            .join("; ");
        Self { pass, detail }
    }
}

struct Model {
    name: &'static str,
    sys: HybridSystemDef,
    report: StabilityReport,
    orbit: PeriodicOrbit,
}

fn setup(name: &'static str, sys: HybridSystemDef, guess: &[f64]) -> Model {
    let report = analyze_orbit(&sys, guess, &FixedPointConfig::default()).expect("fixed point");
    let orbit = build_orbit(&sys, &report, &OrbitSettings::default()).expect("orbit");
    Model {
        name,
        sys,
        report,
        orbit,
    }
}

fn lr() -> Model {
    setup("linear-reset", linear_reset(LN_2), &[1.0, 0.7])
}

fn wheel() -> Model {
    setup("rimless-wheel", rimless_wheel(ALPHA, GAMMA, G_OVER_L), &[GAMMA + ALPHA, 1.6])
}

fn vdp() -> Model {
    setup("vdp-adapter", vdp_adapter(0.2), &[2.0, 0.0])
}

/// Energy balance over one stance phase plus the angular-momentum reset.
fn wheel_omega_star() -> f64 {
    let c2 = (2.0 * ALPHA).cos().powi(2);
    let k = 2.0 * G_OVER_L * ((GAMMA - ALPHA).cos() - (GAMMA + ALPHA).cos());
    (k / (1.0 - c2)).sqrt()
}

fn sweep(m: &Model, template: (ContinuousSignal, DiscreteSequence), f: impl FnOnce(&mut SweepConfig)) -> IssSweepReport {
    let mut s = SweepConfig::new(template.0, template.1);
    f(&mut s);
    run_sweep(&m.sys, &m.orbit, &m.report, &s, &SolverConfig::default()).expect("sweep")
}

fn profile_template(name: &str) -> (ContinuousSignal, DiscreteSequence, f64, f64) {
    let p = models::profile(name, &Params::new()).unwrap();
    (p.u_template, p.v_template, p.u_scale, p.v_scale)
}

/// Sweep over `{0, 0.01, 0.02, 0.05, 0.1}` times the model's input scale.
fn amplitude_sweep(m: &Model) -> IssSweepReport {
    let (u, v, us, vs) = profile_template(m.name);
    sweep(m, (u, v), |s| {
        s.offsets = vec![0.05];
        s.pairs = Some([0.0, 0.01, 0.02, 0.05, 0.1].iter().map(|a| [a * us, a * vs]).collect());
        s.trials = 50;
        s.seed = 2024;
    })
}

fn criterion_1() -> Outcome {
    let m = lr();
    let x2 = m.report.x_star[1];
    let lam = m.report.eigenvalues[0].re;
    let out = sweep(
        &m,
        (ContinuousSignal::constant(vec![1.0]), DiscreteSequence::Zero),
        |s| {
            s.u_amps = vec![0.01, 0.1];
            s.trials = 5;
        },
    );
    let mut checks = vec![
        ((x2).abs() <= 1e-8, format!("x2* = {x2:.3e}")),
        ((m.report.t_star - 1.0).abs() <= 1e-8, format!("T* - 1 = {:.3e}", m.report.t_star - 1.0)),
        ((lam - 0.5).abs() <= 1e-6, format!("lambda = {lam:.10}")),
    ];
    for c in &out.cells {
        let expected = c.u_amp / LN_2;
        let rel = (c.ultimate_discrete - expected).abs() / expected;
        checks.push((rel <= 0.02, format!("u={} bound rel err {rel:.2e}", c.u_amp)));
    }
    Outcome::new(&checks)
}

fn criterion_2() -> Outcome {
    let m = wheel();
    let w = wheel_omega_star();
    let rel = (m.report.x_star[1] - w).abs() / w;
    let lam = m.report.eigenvalues[0].re;
    let expected = (2.0 * ALPHA).cos().powi(2);
    let (u, v, _, _) = profile_template(m.name);
    let out = sweep(&m, (u, v), |s| {
        s.offsets = vec![0.05];
        s.trials = 10;
    });
    let rho = out.decay.as_ref().map(|d| d.rho).unwrap_or(f64::NAN);
    Outcome::new(&[
        (rel <= 1e-5, format!("omega* rel err {rel:.2e}")),
        ((lam - expected).abs() <= 1e-4, format!("lambda = {lam:.8}")),
        ((rho - 0.5).abs() <= 0.05, format!("rho fit = {rho:.4}")),
    ])
}

/// Dense uniform sampling of the orbit at tight tolerance.
fn brute_force_distance(m: &Model, points: &[Vec<f64>]) -> Vec<f64> {
    let cfg = IntegratorConfig::with_tolerances(1e-12, 1e-14);
    let start = m.sys.reset(&m.report.x_star, &[0.0]).unwrap();
    let seg = integrate(&m.sys, &start, &ContinuousSignal::Zero, m.report.t_star, &cfg).unwrap();
    let n = 1_000_000;
    let mut best = vec![f64::INFINITY; points.len()];
    let mut y = vec![0.0; m.sys.n()];
    for i in 0..=n {
        seg.eval_into(m.report.t_star * i as f64 / n as f64, &mut y);
        for (b, p) in best.iter_mut().zip(points) {
            *b = b.min(distance(&y, p));
        }
    }
    best
}

fn criterion_3() -> Outcome {
    let mut checks = Vec::new();
    for m in [lr(), wheel()] {
        let d = m.orbit.stats.diameter;
        let radii: Vec<f64> = (-4..=0).map(|k| d * 10f64.powi(k)).collect();
        match certify_prop1(&m.orbit, &m.sys, 2000, &radii, 11) {
            Ok(rep) => checks.push((
                rep.violations == 0 && rep.lambda_hat > 0.0 && rep.n_samples + rep.n_skipped == 10_000,
                format!("{}: {} samples, lambda_hat {:.3e}, violations {}", m.name, rep.n_samples, rep.lambda_hat, rep.violations),
            )),
            Err(e) => checks.push((false, format!("{}: {e}", m.name))),
        }
        let chart = SurfaceChart::at(&m.sys, &m.report.x_star).unwrap();
        let z = chart.project(&m.report.x_star);
        let mut rng = SplitMix64::new(5);
        let points: Vec<Vec<f64>> = (0..100)
            .filter_map(|_| {
                let r = d * 10f64.powf(-4.0 + 4.0 * rng.next_f64());
                let dir = rng.unit_vector(z.len());
                let zz: Vec<f64> = z.iter().zip(&dir).map(|(a, b)| a + r * b).collect();
                chart.embed(&m.sys, &zz).ok()
            })
            .collect();
        let brute = brute_force_distance(&m, &points);
        let worst = points
            .iter()
            .zip(&brute)
            .map(|(p, b)| (dist_to_orbit(&m.orbit, p).dist - b).abs())
            .fold(0.0, f64::max);
        checks.push((
            points.len() == 100 && worst <= 1e-6,
            format!("{}: brute-force spot check max diff {worst:.2e}", m.name),
        ));
    }
    Outcome::new(&checks)
}

fn criterion_4_to_7() -> (Outcome, Outcome, Outcome, Outcome) {
    let mut c4 = Vec::new();
    let mut c5 = Vec::new();
    let mut c6 = Vec::new();
    let mut c7 = Vec::new();
    for m in [lr(), wheel(), vdp()] {
        let les = m.report.verdict == Some(Verdict::Les);
        c4.push((les, format!("{} verdict {:?}", m.name, m.report.verdict)));
        // zero input, deviation over the 20th period
        let (u, v, _, _) = profile_template(m.name);
        let zero = sweep(&m, (u, v), |s| {
            s.offsets = vec![0.05];
            s.trials = 10;
            s.horizon_periods = 20.0;
            s.transient_cutoff = 0.95;
        });
        let worst = zero.cells[0].trial_orbital.iter().cloned().fold(0.0, f64::max);
        c4.push((worst < 1e-6, format!("{} zero-input deviation after 20 periods {worst:.2e}", m.name)));

        let out = amplitude_sweep(&m);
        let verdict = check_equivalence(&out, &EquivalenceConfig::default());
        let finite = out.cells.iter().all(|c| c.ultimate_orbital.is_finite() && c.ultimate_discrete.is_finite());
        c4.push((
            finite && verdict.monotone.pass,
            format!("{} bounds finite and monotone ({})", m.name, verdict.monotone.detail),
        ));
        let guards = out.guard_total.guards() + zero.guard_total.guards();
        c7.push((guards == 0, format!("{} guard terminations {guards}", m.name)));
        if m.name == "vdp-adapter" {
            continue;
        }
        let f_ok = verdict.f <= 10.0 && (m.name != "linear-reset" || verdict.f <= 3.0);
        c5.push((f_ok, format!("{} F = {:.3}", m.name, verdict.f)));
        match &out.rate_band {
            Some(c) => c6.push((
                c.pass,
                format!(
                    "{}: rho {:.4} in [{:.4}, {:.4}] (omega {:.4}, T in [{:.4}, {:.4}])",
                    m.name, c.rho, c.band.0, c.band.1, c.omega, c.t_lo, c.t_hi
                ),
            )),
            None => c6.push((false, format!("{}: no decay fit ({:?})", m.name, out.decay_error))),
        }
    }
    let ball = bouncing_ball(9.81, 0.5);
    let start = Instant::now();
    let traj = simulate(
        &ball,
        &[1.0, 0.0],
        &ContinuousSignal::Zero,
        &DiscreteSequence::Zero,
        10.0,
        &GuardConfig::default(),
        &SolverConfig::default(),
    );
    let elapsed = start.elapsed().as_secs_f64();
    let zeno = matches!(traj.as_ref().map(|t| &t.termination), Ok(Termination::ZenoGuard { .. }));
    c7.push((zeno && elapsed < 1.0, format!("bouncing ball zeno-guard={zeno} in {elapsed:.3} s")));
    (Outcome::new(&c4), Outcome::new(&c5), Outcome::new(&c6), Outcome::new(&c7))
}

fn semigroup_cases() -> (usize, usize, f64) {
    let cfg = IntegratorConfig::default();
    let systems = [
        linear_reset(LN_2),
        rimless_wheel(ALPHA, GAMMA, G_OVER_L),
        vdp_adapter(0.2),
        bouncing_ball(9.81, 0.5),
    ];
    let mut rng = SplitMix64::new(8);
    let mut fails = 0;
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let sys = &systems[case % systems.len()];
        let x: Vec<f64> = (0..sys.n()).map(|_| 2.0 * rng.next_f64() - 1.0).collect();
        let t = 2.0 * rng.next_f64();
        let s = 2.0 * rng.next_f64();
        let u = if sys.p() == 0 {
            ContinuousSignal::Zero
        } else {
            ContinuousSignal::sinusoid(vec![0.5; sys.p()], 4.0, rng.next_f64())
        };
        let direct = integrate(sys, &x, &u, t + s, &cfg).unwrap().x1;
        let mid = integrate(sys, &x, &u, t, &cfg).unwrap().x1;
        let split = integrate(sys, &mid, &u.shifted(t), s, &cfg).unwrap().x1;
        let err = distance(&direct, &split);
        let tol = 50.0 * (cfg.rtol * euclidean(&x) + cfg.atol);
        worst = worst.max(err / tol);
        if err > tol {
            fails += 1;
        }
    }
    (100, fails, worst)
}

fn csv_bytes(dir: &Path, threads: &str) -> (Vec<u8>, Vec<u8>, Vec<u8>) {
    let config = dir.join("run.json");
    std::fs::write(
        &config,
        r#"{"model": "rimless-wheel", "seed": 42,
            "simulate": {"periods": 6},
            "inputs": {"u": {"kind": "sinusoid", "amplitude": [0.05], "omega": 4.0, "phase": 0.0},
                       "v": {"kind": "iid-uniform", "bound": [0.01], "seed": 0}},
            "sweep": {"offsets": [0.05], "pairs": [[0.0, 0.0], [0.05, 0.01]], "trials": 8}}"#,
    )
    .unwrap();
    let out = dir.join(format!("out-{threads}"));
    for cmd in ["simulate", "iss-sweep"] {
        let code = sie::cli::run([
            "sie",
            cmd,
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert_eq!(code, 0, "{cmd} exit code");
    }
    let read = |name: &str| std::fs::read(out.join(name)).unwrap();
    (read("trajectory.csv"), read("impacts.csv"), read("cells.csv"))
}

fn criterion_8() -> Outcome {
    let (n, fails, worst) = semigroup_cases();
    let mut checks = vec![(fails == 0, format!("semigroup {}/{n} within 50x tol (worst {worst:.2})", n - fails))];

    for m in [lr(), wheel(), vdp()] {
        let rich = m.report.richardson_estimate;
        checks.push((rich.is_finite() && rich < 1e-5, format!("{} Richardson estimate {rich:.2e}", m.name)));
        let chart = SurfaceChart::at(&m.sys, &m.report.x_star).unwrap();
        let z = chart.project(&m.report.x_star);
        let mut rng = SplitMix64::new(3);
        let mut worst_rt: f64 = 0.0;
        for _ in 0..100 {
            let dir = rng.unit_vector(z.len());
            let r = 0.1 * rng.next_f64();
            let zz: Vec<f64> = z.iter().zip(&dir).map(|(a, b)| a + r * b).collect();
            let x = chart.embed(&m.sys, &zz).unwrap();
            worst_rt = worst_rt.max(distance(&chart.project(&x), &zz));
            worst_rt = worst_rt.max(distance(&chart.embed(&m.sys, &chart.project(&x)).unwrap(), &x));
        }
        checks.push((worst_rt <= 1e-10, format!("{} chart round-trip {worst_rt:.1e}", m.name)));
    }

    let dir = tempfile::tempdir().unwrap();
    let a = csv_bytes(dir.path(), "1");
    let b = csv_bytes(dir.path(), "4");
    checks.push((a == b, "CSVs byte-identical across runs and thread counts".to_string()));
    Outcome::new(&checks)
}

fn criterion_9() -> Outcome {
    let m = wheel();
    let (u, v, us, vs) = profile_template(m.name);
    let out = sweep(&m, (u, v), |s| {
        s.offsets = vec![0.05];
        s.pairs = Some(vec![[0.0, 0.0], [0.05 * us, 0.05 * vs], [0.1 * us, 0.1 * vs]]);
        s.trials = 50;
        s.seed = 9;
    });
    let zero = &out.cells[0];
    let small = &out.cells[1];
    let large = &out.cells[2];
    Outcome::new(&[
        (
            zero.ultimate_orbital <= 1e-6,
            format!("zero-input ultimate bound {:.2e}", zero.ultimate_orbital),
        ),
        (
            small.ultimate_orbital.is_finite() && large.ultimate_orbital >= small.ultimate_orbital,
            format!(
                "ultimate bounds small {:.4e} <= large {:.4e}",
                small.ultimate_orbital, large.ultimate_orbital
            ),
        ),
        (out.guard_total.guards() == 0, format!("guards {}", out.guard_total.guards())),
    ])
}

fn guarded(f: impl FnOnce() -> Outcome + panic::UnwindSafe) -> Outcome {
    panic::catch_unwind(f).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Outcome {
            pass: false,
            detail: format!("panicked: {msg}"),
        }
    })
}

fn main() {
    let started = Instant::now();
    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "linear-reset oracle", guarded(criterion_1)),
        (2, "rimless wheel oracle", guarded(criterion_2)),
        (3, "distance sandwich certificate", guarded(criterion_3)),
    ];
    let (c4, c5, c6, c7) = match panic::catch_unwind(criterion_4_to_7) {
        Ok(r) => r,
        Err(_) => {
            let failed = || Outcome {
                pass: false,
                detail: "sweep panicked".into(),
            };
            (failed(), failed(), failed(), failed())
        }
    };
    results.push((4, "LES implies bounded forced response", c4));
    results.push((5, "orbital vs discrete bounds", c5));
    results.push((6, "rate consistency", c6));
    results.push((7, "guards", c7));
    results.push((8, "numerical hygiene", guarded(criterion_8)));
    results.push((9, "two disturbance pairs on the wheel", guarded(criterion_9)));

    let mut failed = 0;
    for (n, name, o) in &results {
        println!("criterion {n} ({name}): {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!(
        "acceptance: {}/{} criteria passed in {:.1} s",
        results.len() - failed,
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
