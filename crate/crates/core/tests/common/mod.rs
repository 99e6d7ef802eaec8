#![allow(dead_code)]

use std::f64::consts::TAU;

use proptest::prelude::*;
use rand::Rng;
use roamscope::dynamics::{resolve_momentum_on_constraint, FixedMomentum, PhaseState};
use roamscope::ModelParams;

pub fn params() -> ModelParams {
    ModelParams::default()
}

/// Constrained state from (r, θ, p_r/√μ, sign of p_θ).
pub fn constrained(p: &ModelParams, r: f64, theta: f64, u: f64, positive: bool) -> PhaseState {
    let p_r = u * p.reduced_mass().sqrt();
    resolve_momentum_on_constraint(p, r, theta, FixedMomentum::PR(p_r), positive).unwrap()
}

pub fn random_state<R: Rng>(p: &ModelParams, rng: &mut R) -> PhaseState {
    let r = rng.gen_range(1.5..14.0);
    let theta = rng.gen_range(0.0..TAU);
    let u = rng.gen_range(-0.95..0.95);
    constrained(p, r, theta, u, rng.gen_bool(0.5))
}

pub fn state_strategy() -> impl Strategy<Value = PhaseState> {
    (1.5f64..14.0, 0.0f64..TAU, -0.95f64..0.95, any::<bool>())
        .prop_map(|(r, theta, u, positive)| constrained(&params(), r, theta, u, positive))
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}
