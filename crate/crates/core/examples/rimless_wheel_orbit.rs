//! Locates the rimless-wheel walking cycle by Newton shooting on the forced
//! Poincare map and compares it with the energy-balance closed form.

use std::f64::consts::FRAC_PI_8;

use sie::models::{rimless_wheel, WheelOracle};
use sie::poincare::{analyze_orbit, FixedPointConfig, PoincareError};

fn main() {
    let (alpha, gamma, g_over_l) = (FRAC_PI_8, 0.08, 9.81);
    let sys = rimless_wheel(alpha, gamma, g_over_l);
    let oracle = WheelOracle::new(alpha, gamma, g_over_l);
    let cfg = FixedPointConfig::default();

    let report = analyze_orbit(&sys, &[gamma + alpha, 1.6], &cfg).expect("fixed point");
    println!("x*        = {:?}", report.x_star);
    println!("T*        = {:.12}", report.t_star);
    println!("omega*    = {:.12} (closed form {:.12})", report.x_star[1], oracle.omega_star());
    for e in &report.eigenvalues {
        println!("eigenvalue {:+.10} {:+.10}i", e.re, e.im);
    }
    println!(
        "verdict   = {} (spectral radius {:.10}, Richardson estimate {:.1e})",
        report.verdict.map(|v| v.label()).unwrap_or("-"),
        report.spectral_radius,
        report.richardson_estimate
    );
    println!("Newton residuals: {:?}", report.newton_residuals);

    // below the capture speed the wheel rocks back and never reaches the next step
    println!("capture threshold {:.4}", oracle.capture_threshold());
    match analyze_orbit(&sys, &[gamma + alpha, 1.2], &cfg) {
        Err(e @ (PoincareError::NoImpact { .. } | PoincareError::NewtonDiverged { .. })) => {
            println!("guess omega = 1.2 fails as expected: {e}")
        }
        other => println!("unexpected: {other:?}"),
    }
}
