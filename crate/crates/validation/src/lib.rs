//! Support for the `acceptance` target: a PASS/FAIL checklist and seeded
//! sampling of constrained states.

use std::f64::consts::TAU;
use std::fmt::Display;
use std::process::ExitCode;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roamscope::dynamics::{resolve_momentum_on_constraint, FixedMomentum, PhaseState};
use roamscope::ModelParams;

/// Prints each verdict as it is recorded.
#[derive(Debug, Default)]
pub struct Checklist {
    verdicts: Vec<(String, bool)>,
}

impl Checklist {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn heading(&self, title: &str) {
        println!("\n== {title}");
    }

    pub fn record(&mut self, name: &str, pass: bool, detail: impl Display) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.verdicts.push((name.to_string(), pass));
    }

    /// Indented supporting line under the last verdict.
    pub fn note(&self, text: impl Display) {
        println!("     {text}");
    }

    pub fn failures(&self) -> Vec<&str> {
        self.verdicts.iter().filter(|(_, ok)| !ok).map(|(n, _)| n.as_str()).collect()
    }

    pub fn finish(&self) -> ExitCode {
        let failed = self.failures();
        println!("\n{} of {} checks passed", self.verdicts.len() - failed.len(), self.verdicts.len());
        if failed.is_empty() {
            ExitCode::SUCCESS
        } else {
            println!("failing: {}", failed.join("; "));
            ExitCode::FAILURE
        }
    }
}

/// Seeded states on KE = ½ with r ∈ [1.5, 14), θ ∈ [0, 2π), |p_r| < √μ.
pub fn constrained_states(params: &ModelParams, count: usize, seed: u64) -> Vec<PhaseState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root_mu = params.reduced_mass().sqrt();
    (0..count)
        .map(|_| {
            let r = rng.gen_range(1.5..14.0);
            let theta = rng.gen_range(0.0..TAU);
            let p_r = rng.gen_range(-0.999..0.999) * root_mu;
            resolve_momentum_on_constraint(params, r, theta, FixedMomentum::PR(p_r), rng.gen_bool(0.5))
                .expect("|p_r| below the budget")
        })
        .collect()
}
