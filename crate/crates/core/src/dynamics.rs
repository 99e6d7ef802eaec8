//! Microcanonical and isokinetic Hamiltonians, the constant-kinetic-energy
//! constraint, and the isokinetic equations of motion in (r, p_r, θ, p_θ).

use log::warn;

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Kinetic energy fixed by the thermostat.
pub const KINETIC_TARGET: f64 = 0.5;

/// Tolerance on |KE − ½| for a state to count as constrained.
pub const CONSTRAINT_TOL: f64 = 1e-9;

/// Drift beyond which the field is evaluated off the constraint surface.
pub const CONSTRAINT_WARN: f64 = 1e-6;

/// A phase-space point (r, p_r, θ, p_θ) at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseState {
    pub r: f64,
    pub p_r: f64,
    pub theta: f64,
    pub p_theta: f64,
    pub t: f64,
}

impl PhaseState {
    pub fn new(r: f64, p_r: f64, theta: f64, p_theta: f64) -> Self {
        Self { r, p_r, theta, p_theta, t: 0.0 }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.r, self.p_r, self.theta, self.p_theta]
    }

    pub fn from_array(y: &[f64], t: f64) -> Self {
        Self { r: y[0], p_r: y[1], theta: y[2], p_theta: y[3], t }
    }

    /// Reflection (θ, p_θ) → (−θ, −p_θ).
    pub fn reflected(&self) -> Self {
        Self { theta: -self.theta, p_theta: -self.p_theta, ..*self }
    }

    /// Rotation θ → θ + π.
    pub fn rotated_half_turn(&self) -> Self {
        Self { theta: self.theta + std::f64::consts::PI, ..*self }
    }

    pub fn is_isokinetic(&self, params: &ModelParams) -> bool {
        (kinetic_energy(params, self) - KINETIC_TARGET).abs() < CONSTRAINT_TOL
    }
}

/// Inverse rotational inertia factor 1/(μr²) + 1/I_CH3.
#[inline]
pub(crate) fn angular_factor(params: &ModelParams, r: f64) -> f64 {
    1.0 / (params.reduced_mass() * r * r) + 1.0 / params.i_ch3
}

/// ½p_r²/μ + ½p_θ²(1/(μr²) + 1/I_CH3)
pub fn kinetic_energy(params: &ModelParams, state: &PhaseState) -> f64 {
    let mu = params.reduced_mass();
    0.5 * state.p_r * state.p_r / mu + 0.5 * state.p_theta * state.p_theta * angular_factor(params, state.r)
}

/// Total microcanonical energy H = KE + U.
pub fn hamiltonian_micro(params: &ModelParams, state: &PhaseState) -> Result<f64> {
    Ok(kinetic_energy(params, state) + params.potential(state.r, state.theta)?)
}

fn exp_guarded(u: f64) -> Result<f64> {
    if u.abs() > 700.0 {
        Err(Error::Overflow(u.abs()))
    } else {
        Ok(u.exp())
    }
}

/// Isokinetic Hamiltonian K in the (r, π_r, θ, π_θ) chart.
pub fn isokinetic_k(params: &ModelParams, r: f64, pi_r: f64, theta: f64, pi_theta: f64) -> Result<f64> {
    let u = params.potential(r, theta)?;
    let eu = exp_guarded(u)?;
    let mu = params.reduced_mass();
    Ok(0.5 * eu * (pi_r * pi_r / mu + pi_theta * pi_theta * angular_factor(params, r)) - 0.5 / eu)
}

/// (π_r, π_θ) = e^{−U}(p_r, p_θ).
pub fn momenta_to_pi(params: &ModelParams, state: &PhaseState) -> Result<(f64, f64)> {
    let w = exp_guarded(-params.potential(state.r, state.theta)?)?;
    Ok((w * state.p_r, w * state.p_theta))
}

/// Inverse of [`momenta_to_pi`].
pub fn pi_to_momenta(
    params: &ModelParams,
    r: f64,
    pi_r: f64,
    theta: f64,
    pi_theta: f64,
) -> Result<PhaseState> {
    let w = exp_guarded(params.potential(r, theta)?)?;
    Ok(PhaseState::new(r, w * pi_r, theta, w * pi_theta))
}

/// Right-hand side of the isokinetic equations on the KE = ½ surface.
#[inline]
pub(crate) fn field(params: &ModelParams, y: &[f64; 4]) -> [f64; 4] {
    let [r, p_r, theta, p_theta] = *y;
    let mu = params.reduced_mass();
    let [u_r, u_t] = params.gradient_unchecked(r, theta);
    let r_dot = p_r / mu;
    let theta_dot = p_theta * angular_factor(params, r);
    let power = u_r * r_dot + u_t * theta_dot;
    [
        r_dot,
        p_r * power + p_theta * p_theta / (mu * r * r * r) - u_r,
        theta_dot,
        p_theta * power - u_t,
    ]
}

fn check_constrained(params: &ModelParams, state: &PhaseState) -> Result<()> {
    if !(state.r > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {}", state.r)));
    }
    let drift = (kinetic_energy(params, state) - KINETIC_TARGET).abs();
    if drift > CONSTRAINT_WARN {
        warn!("isokinetic field evaluated off the constraint: |KE - 1/2| = {drift:.3e}");
    }
    Ok(())
}

/// d/dt (r, p_r, θ, p_θ) under the isokinetic thermostat.
pub fn vector_field(params: &ModelParams, state: &PhaseState) -> Result<[f64; 4]> {
    check_constrained(params, state)?;
    Ok(field(params, &state.to_array()))
}

#[inline]
pub(crate) fn jacobian_array(params: &ModelParams, y: &[f64; 4]) -> [[f64; 4]; 4] {
    let [r, p_r, theta, p_theta] = *y;
    let mu = params.reduced_mass();
    let [u_r, u_t] = params.gradient_unchecked(r, theta);
    let [[u_rr, u_rt], [_, u_tt]] = params.hessian_unchecked(r, theta);
    let g = angular_factor(params, r);
    let dg = -2.0 / (mu * r * r * r);
    let r_dot = p_r / mu;
    let theta_dot = p_theta * g;
    let power = u_r * r_dot + u_t * theta_dot;

    let dthd_dr = p_theta * dg;
    let ds = [
        u_rr * r_dot + u_rt * theta_dot + u_t * dthd_dr,
        u_r / mu,
        u_rt * r_dot + u_tt * theta_dot,
        u_t * g,
    ];
    let mr3 = mu * r * r * r;
    [
        [0.0, 1.0 / mu, 0.0, 0.0],
        [
            p_r * ds[0] - 3.0 * p_theta * p_theta / (mr3 * r) - u_rr,
            power + p_r * ds[1],
            p_r * ds[2] - u_rt,
            p_r * ds[3] + 2.0 * p_theta / mr3,
        ],
        [dthd_dr, 0.0, 0.0, g],
        [p_theta * ds[0] - u_rt, p_theta * ds[1], p_theta * ds[2] - u_tt, power + p_theta * ds[3]],
    ]
}

/// Analytic Jacobian of [`vector_field`] with respect to (r, p_r, θ, p_θ).
pub fn jacobian(params: &ModelParams, state: &PhaseState) -> Result<[[f64; 4]; 4]> {
    check_constrained(params, state)?;
    Ok(jacobian_array(params, &state.to_array()))
}

/// Which momentum is prescribed when solving KE = ½ for the other.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FixedMomentum {
    /// p_θ given; solve for p_r (radial sections, crossing sign of ṙ).
    PTheta(f64),
    /// p_r given; solve for p_θ (angular sections, crossing sign of θ̇).
    PR(f64),
}

/// Complete a state on KE = ½ by solving for the free momentum. `positive`
/// selects the root whose crossing velocity (ṙ or θ̇) is positive.
pub fn resolve_momentum_on_constraint(
    params: &ModelParams,
    r: f64,
    theta: f64,
    fixed: FixedMomentum,
    positive: bool,
) -> Result<PhaseState> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    let mu = params.reduced_mass();
    let g = angular_factor(params, r);
    let sign = if positive { 1.0 } else { -1.0 };
    match fixed {
        FixedMomentum::PTheta(p_theta) => {
            let budget = 1.0 - p_theta * p_theta * g;
            if budget < 0.0 {
                return Err(Error::OutsideEnergyShell(format!("p_theta = {p_theta} at r = {r}")));
            }
            Ok(PhaseState::new(r, sign * (mu * budget).sqrt(), theta, p_theta))
        }
        FixedMomentum::PR(p_r) => {
            let budget = 1.0 - p_r * p_r / mu;
            if budget < 0.0 {
                return Err(Error::OutsideEnergyShell(format!("p_r = {p_r} exceeds sqrt(mu)")));
            }
            Ok(PhaseState::new(r, p_r, theta, sign * (budget / g).sqrt()))
        }
    }
}

/// Largest |p_θ| allowed on KE = ½ at radius r.
pub fn max_angular_momentum(params: &ModelParams, r: f64) -> f64 {
    (1.0 / angular_factor(params, r)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::default()
    }

    #[test]
    fn micro_hamiltonian_at_well() {
        let h = hamiltonian_micro(&params(), &PhaseState::new(1.1, 0.0, 0.0, 0.0)).unwrap();
        assert!((h + 47.0).abs() < 1e-10);
        assert!(hamiltonian_micro(&params(), &PhaseState::new(0.0, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn kinetic_closed_forms() {
        let p = params();
        let mu = p.reduced_mass();
        assert_eq!(kinetic_energy(&p, &PhaseState::new(2.0, 0.0, 0.3, 0.0)), 0.0);
        let ke = kinetic_energy(&p, &PhaseState::new(2.0, mu.sqrt(), 0.3, 0.0));
        assert!((ke - 0.5).abs() < 1e-15);
    }

    #[test]
    fn doubling_momenta_quadruples_kinetic_part() {
        let p = params();
        let s = PhaseState::new(2.3, 0.2, 0.7, -0.4);
        let d = PhaseState::new(2.3, 0.4, 0.7, -0.8);
        let u = p.potential(2.3, 0.7).unwrap();
        let h1 = hamiltonian_micro(&p, &s).unwrap() - u;
        let h2 = hamiltonian_micro(&p, &d).unwrap() - u;
        assert!((h2 - 4.0 * h1).abs() < 1e-14);
    }

    #[test]
    fn k_closed_form_and_overflow() {
        let p = params();
        // U ≈ 0 far out
        let k = isokinetic_k(&p, 1e4, 0.0, 0.0, 0.0).unwrap();
        assert!((k + 0.5).abs() < 1e-9);
        // deep inside the unphysical core U is far below -700
        assert!(matches!(isokinetic_k(&p, 0.2, 0.0, 0.0, 0.0), Err(Error::Overflow(_))));
    }

    #[test]
    fn pi_ratio_at_well() {
        let p = params();
        let s = PhaseState::new(1.1, 0.3, 0.0, 0.0);
        let (pi_r, _) = momenta_to_pi(&p, &s).unwrap();
        let ratio = pi_r / s.p_r;
        assert!((ratio / 47f64.exp() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resolve_radial_section() {
        let p = params();
        let mu = p.reduced_mass();
        let s = resolve_momentum_on_constraint(&p, 3.6, 1.0, FixedMomentum::PTheta(0.0), true).unwrap();
        assert!((s.p_r - mu.sqrt()).abs() < 1e-15);
        let err = resolve_momentum_on_constraint(&p, 3.6, 0.0, FixedMomentum::PR(1.1 * mu.sqrt()), true);
        assert!(matches!(err, Err(Error::OutsideEnergyShell(_))));
    }

    #[test]
    fn resolve_angular_section() {
        let p = params();
        let mu = p.reduced_mass();
        let s = resolve_momentum_on_constraint(&p, 6.0, 0.0, FixedMomentum::PR(0.0), true).unwrap();
        let want = 1.0 / (1.0 / (mu * 36.0) + 1.0 / p.i_ch3).sqrt();
        assert!((s.p_theta - want).abs() < 1e-14);
        let neg = resolve_momentum_on_constraint(&p, 6.0, 0.0, FixedMomentum::PR(0.0), false).unwrap();
        assert_eq!(neg.p_theta, -s.p_theta);
    }

    #[test]
    fn reflection_equivariance_of_field() {
        let p = params();
        let s = resolve_momentum_on_constraint(&p, 2.7, 0.4, FixedMomentum::PR(0.3), true).unwrap();
        let f = vector_field(&p, &s).unwrap();
        let g = vector_field(&p, &s.reflected()).unwrap();
        assert!((f[0] - g[0]).abs() < 1e-15);
        assert!((f[1] - g[1]).abs() < 1e-13);
        assert!((f[2] + g[2]).abs() < 1e-15);
        assert!((f[3] + g[3]).abs() < 1e-13);
    }

    #[test]
    fn jacobian_reflection() {
        let p = params();
        let s = resolve_momentum_on_constraint(&p, 2.2, 0.9, FixedMomentum::PR(-0.2), true).unwrap();
        let j = jacobian(&p, &s).unwrap();
        let js = jacobian(&p, &s.reflected()).unwrap();
        let sign = [1.0, 1.0, -1.0, -1.0];
        for a in 0..4 {
            for b in 0..4 {
                let want = sign[a] * j[a][b] * sign[b];
                assert!((js[a][b] - want).abs() < 1e-10 * (1.0 + want.abs()));
            }
        }
    }
}
