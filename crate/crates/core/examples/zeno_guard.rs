//! A bouncing ball with restitution 0.5 accumulates infinitely many impacts
//! in finite time; the simulator stops it with a Zeno guard.

use sie::events::SolverConfig;
use sie::hybrid::{simulate, GuardConfig, Termination};
use sie::models::bouncing_ball;
use sie::signal::{ContinuousSignal, DiscreteSequence};

fn main() {
    let (g, e, h0) = (9.81, 0.5, 1.0);
    let sys = bouncing_ball(g, e);
    let traj = simulate(
        &sys,
        &[h0, 0.0],
        &ContinuousSignal::Zero,
        &DiscreteSequence::Zero,
        10.0,
        &GuardConfig::default(),
        &SolverConfig::default(),
    )
    .expect("simulation");

    for (k, dwell) in traj.dwell_times().iter().enumerate() {
        println!("flight {k:2}: {dwell:.6}");
    }
    // t_inf = sqrt(2 h0 / g) (1 + e) / (1 - e)
    let t_inf = (2.0 * h0 / g).sqrt() * (1.0 + e) / (1.0 - e);
    match &traj.termination {
        Termination::ZenoGuard { k, reason, .. } => {
            println!("stopped after {k} impacts: {reason}");
            println!("closed-form accumulation time {t_inf:.10}");
        }
        other => println!("unexpected termination {other:?}"),
    }
}
