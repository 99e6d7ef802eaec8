//! Lagrangian descriptors built from a periodic-orbit parametrisation:
//! the integral of |ḟ| for a function f that vanishes on the orbit.

use std::fmt;
use std::sync::Arc;

use crate::dynamics::PhaseState;
use crate::error::{Error, Result};
use crate::integrate::{ld_quadrature, Direction, IntegratorSettings, RateIntegrand};
use crate::model::ModelParams;
use crate::orbits::{inner_pbar_r_prime, inner_rbar_prime, INNER_C, INNER_D};

/// User-supplied rate |ḟ|; receives the state and its forward-time field.
pub type RateFn = Arc<dyn Fn(&ModelParams, &[f64; 4], &[f64; 4]) -> f64 + Send + Sync>;

/// What gets integrated.
#[derive(Clone)]
pub enum Integrand {
    /// |ṙ − r̄′(θ) θ̇| for the cosine series with coefficients `c`.
    InnerF1Rate { c: [f64; 6] },
    /// |ṗ_r − p̄_r′(θ) θ̇| for the odd polynomial with coefficients `d`.
    InnerF2Rate { d: [f64; 6] },
    /// |ṙ|, vanishing on the circular orbit.
    RadialRate,
    User { name: String, rate: RateFn },
}

impl Integrand {
    pub fn inner_f1() -> Self {
        Integrand::InnerF1Rate { c: INNER_C }
    }

    pub fn inner_f2() -> Self {
        Integrand::InnerF2Rate { d: INNER_D }
    }

    pub fn id(&self) -> &str {
        match self {
            Integrand::InnerF1Rate { .. } => "inner-f1-rate",
            Integrand::InnerF2Rate { .. } => "inner-f2-rate",
            Integrand::RadialRate => "radial-rate",
            Integrand::User { name, .. } => name,
        }
    }

    /// Registered integrands by id, with the published orbit coefficients.
    pub fn parse(id: &str) -> Option<Self> {
        match id {
            "inner-f1-rate" => Some(Self::inner_f1()),
            "inner-f2-rate" => Some(Self::inner_f2()),
            "radial-rate" => Some(Integrand::RadialRate),
            _ => None,
        }
    }

    /// The direction whose descriptor is minimised by the manifold the
    /// integrand is meant for: backward for the inner orbit, forward for the
    /// outer one.
    pub fn natural_direction(&self) -> Direction {
        match self {
            Integrand::InnerF1Rate { .. } | Integrand::InnerF2Rate { .. } => Direction::Backward,
            _ => Direction::Forward,
        }
    }
}

impl fmt::Debug for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl PartialEq for Integrand {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Integrand::InnerF1Rate { c: a }, Integrand::InnerF1Rate { c: b }) => a == b,
            (Integrand::InnerF2Rate { d: a }, Integrand::InnerF2Rate { d: b }) => a == b,
            (Integrand::RadialRate, Integrand::RadialRate) => true,
            (Integrand::User { name: a, rate: ra }, Integrand::User { name: b, rate: rb }) => {
                a == b && Arc::ptr_eq(ra, rb)
            }
            _ => false,
        }
    }
}

impl RateIntegrand for Integrand {
    #[inline]
    fn rate(&self, params: &ModelParams, y: &[f64; 4], y_dot: &[f64; 4]) -> f64 {
        match self {
            Integrand::InnerF1Rate { c } => y_dot[0] - inner_rbar_prime(c, y[2]) * y_dot[2],
            Integrand::InnerF2Rate { d } => y_dot[1] - inner_pbar_r_prime(d, y[2]) * y_dot[2],
            Integrand::RadialRate => y_dot[0],
            Integrand::User { rate, .. } => rate(params, y, y_dot),
        }
    }
}

/// Integrand, time direction and horizon of a descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSpec {
    pub integrand: Integrand,
    pub direction: Direction,
    pub tau: f64,
}

impl DescriptorSpec {
    pub fn new(integrand: Integrand, direction: Direction, tau: f64) -> Result<Self> {
        let spec = Self { integrand, direction, tau };
        spec.validate()?;
        Ok(spec)
    }

    /// LD_i: inner f₁ rate, backward.
    pub fn inner(tau: f64) -> Self {
        Self { integrand: Integrand::inner_f1(), direction: Direction::Backward, tau }
    }

    /// LD_o: |ṙ|, forward.
    pub fn outer(tau: f64) -> Self {
        Self { integrand: Integrand::RadialRate, direction: Direction::Forward, tau }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidParameter(format!("tau must be finite and non-negative, got {}", self.tau)));
        }
        Ok(())
    }
}

/// Descriptor value at one initial condition; +∞ flags a failed trajectory.
pub fn ld_value(params: &ModelParams, state: &PhaseState, spec: &DescriptorSpec, settings: &IntegratorSettings) -> f64 {
    ld_quadrature(params, state, spec.tau, spec.direction, &spec.integrand, settings)
}

/// The f₁-rate and f₂-rate descriptors (both backward) at one state.
pub fn equivalent_integrands_check(
    params: &ModelParams,
    state: &PhaseState,
    tau: f64,
    settings: &IntegratorSettings,
) -> (f64, f64) {
    let f1 = DescriptorSpec { integrand: Integrand::inner_f1(), direction: Direction::Backward, tau };
    let f2 = DescriptorSpec { integrand: Integrand::inner_f2(), direction: Direction::Backward, tau };
    (ld_value(params, state, &f1, settings), ld_value(params, state, &f2, settings))
}
