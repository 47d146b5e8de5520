//! Two disturbance pairs on the rimless wheel: a sinusoidal hip torque plus
//! uniformly random impulses at each impact. Prints ultimate bounds, decay
//! fits and the equivalence verdict.

use std::f64::consts::FRAC_PI_8;

use sie::events::SolverConfig;
use sie::iss::{check_equivalence, run_sweep, EquivalenceConfig, SweepConfig};
use sie::models::rimless_wheel;
use sie::orbit::{build_orbit, OrbitSettings};
use sie::poincare::{analyze_orbit, FixedPointConfig};
use sie::signal::{ContinuousSignal, DiscreteSequence};

fn main() {
    let sys = rimless_wheel(FRAC_PI_8, 0.08, 9.81);
    let report = analyze_orbit(&sys, &[0.08 + FRAC_PI_8, 1.6], &FixedPointConfig::default()).expect("fixed point");
    let orbit = build_orbit(&sys, &report, &OrbitSettings::default()).expect("orbit");

    let sweep = SweepConfig {
        offsets: vec![0.05],
        pairs: Some(vec![[0.0, 0.0], [0.05, 0.01], [0.1, 0.02]]),
        trials: 20,
        seed: 1,
        ..SweepConfig::new(
            ContinuousSignal::sinusoid(vec![1.0], 4.0, 0.0),
            DiscreteSequence::IidUniform { bound: vec![1.0], seed: 0 },
        )
    };
    let out = run_sweep(&sys, &orbit, &report, &sweep, &SolverConfig::default()).expect("sweep");

    println!("{:>6} {:>6} {:>12} {:>12} {:>8}", "u", "v", "orbital", "discrete", "ratio");
    for c in &out.cells {
        println!(
            "{:>6} {:>6} {:>12.4e} {:>12.4e} {:>8.3}",
            c.u_amp,
            c.v_amp,
            c.ultimate_orbital,
            c.ultimate_discrete,
            c.cross_ratio.unwrap_or(f64::NAN)
        );
    }
    if let Some(fit) = &out.decay {
        println!("orbital rate {:.4}, discrete ratio {:.4}", fit.orbital.rate, fit.rho);
    }
    if let Some(c) = &out.rate_band {
        println!("ratio band [{:.4}, {:.4}] holds: {}", c.band.0, c.band.1, c.pass);
    }
    let v = check_equivalence(&out, &EquivalenceConfig::default());
    println!("monotone: {} ({})", v.monotone.pass, v.monotone.detail);
    println!("factor:   {} ({})", v.factor.pass, v.factor.detail);
    println!("zero:     {} ({})", v.zero_input.pass, v.zero_input.detail);
}
