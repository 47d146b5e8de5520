//! Simulates the linear-reset system under a constant continuous input and
//! prints the impact log. The pre-impact coordinate x2 settles at u / ln 2.

use std::f64::consts::LN_2;

use sie::events::SolverConfig;
use sie::hybrid::{simulate, GuardConfig};
use sie::models::linear_reset;
use sie::signal::{ContinuousSignal, DiscreteSequence};

fn main() {
    let sys = linear_reset(LN_2);
    let u_bar = 0.1;
    let traj = simulate(
        &sys,
        &[0.0, 0.7],
        &ContinuousSignal::constant(vec![u_bar]),
        &DiscreteSequence::Zero,
        12.0,
        &GuardConfig::default(),
        &SolverConfig::default(),
    )
    .expect("simulation");

    println!("{:>3} {:>10} {:>14}", "k", "t_k", "x2 (pre)");
    for imp in &traj.impacts {
        println!("{:>3} {:>10.6} {:>14.10}", imp.k, imp.t, imp.x_minus[1]);
    }
    println!("termination: {}", traj.termination.label());
    println!("forced equilibrium u/ln2 = {:.10}", u_bar / LN_2);
}
