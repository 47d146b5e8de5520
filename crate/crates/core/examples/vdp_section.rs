//! Treats the Van der Pol limit cycle as a hybrid orbit by cutting it with
//! an identity-reset section, then reads off period and Floquet multiplier.

use std::f64::consts::PI;

use sie::models::vdp_adapter;
use sie::poincare::{analyze_orbit, FixedPointConfig};

fn main() {
    for mu in [0.0, 0.2, 1.0] {
        let sys = vdp_adapter(mu);
        let report = analyze_orbit(&sys, &[2.0, 0.0], &FixedPointConfig::default()).expect("fixed point");
        println!(
            "mu = {mu:.1}: x* = ({:.8}, {:.1e}), T* = {:.8} (small-mu estimate {:.8}), multiplier {:.8}, {}",
            report.x_star[0],
            report.x_star[1],
            report.t_star,
            2.0 * PI * (1.0 + mu * mu / 16.0),
            report.eigenvalues[0].re,
            report.verdict.map(|v| v.label()).unwrap_or("-")
        );
    }
}
