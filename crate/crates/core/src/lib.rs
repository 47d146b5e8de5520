//! Simulation and stability analysis for forced systems with impulse
//! effects: ODE flows that are reset whenever the state reaches a switching
//! surface, driven by a continuous input and a discrete input applied at
//! each reset.
//!
//! The modules build on each other: [`system`] and [`signal`] define models
//! and inputs, [`flow`] and [`events`] integrate to the surface, [`hybrid`]
//! strings phases together, [`poincare`] finds and linearizes periodic
//! orbits, [`orbit`] measures distance to them and [`iss`] runs disturbance
//! sweeps. [`models`] holds the built-in catalog and [`cli`] the `sie`
//! command-line front end.

// `!(a < b)` is used on purpose so that NaN falls into the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod events;
pub mod flow;
pub mod hybrid;
pub mod iss;
pub mod models;
pub mod norm;
pub mod orbit;
pub mod poincare;
pub mod signal;
pub mod system;
