//! Builds the sampled orbit of the rimless wheel, queries the distance to it
//! and certifies the on-surface distance sandwich.

use std::f64::consts::FRAC_PI_8;

use sie::models::rimless_wheel;
use sie::orbit::{build_orbit, certify_prop1, check_injectivity, default_radii, dist_to_orbit, OrbitSettings};
use sie::poincare::{analyze_orbit, FixedPointConfig};

fn main() {
    let sys = rimless_wheel(FRAC_PI_8, 0.08, 9.81);
    let report = analyze_orbit(&sys, &[0.08 + FRAC_PI_8, 1.6], &FixedPointConfig::default()).expect("fixed point");
    let orbit = build_orbit(&sys, &report, &OrbitSettings::default()).expect("orbit");
    let s = &orbit.stats;
    println!(
        "{} samples, diameter {:.4}, max gap {:.2e}, closure error {:.1e}",
        s.n_samples, s.diameter, s.max_gap, s.closure_error
    );

    for x in [[0.0, 1.3], [0.3, 0.9], [0.4727, 1.5492]] {
        let d = dist_to_orbit(&orbit, &x);
        println!("dist({x:?}) = {:.6e} at tau {:?}", d.dist, d.tau_set);
    }

    let inj = check_injectivity(&orbit, 1e-6);
    println!("injectivity: {inj:?}");

    let rep = certify_prop1(&orbit, &sys, 500, &default_radii(&orbit), 7).expect("certificate");
    println!("lambda_hat = {:.4}, violations = {}", rep.lambda_hat, rep.violations);
    for r in &rep.per_radius {
        println!(
            "  radius {:.1e}: n = {:4}, dist / |x - x*| in [{:.4}, {:.4}]",
            r.radius, r.n, r.min_ratio, r.max_ratio
        );
    }
}
