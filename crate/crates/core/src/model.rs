//! Chesnavich's CH4+ potential energy surface.
//!
//! Units throughout are kcal/mol, u, Å and rad. Time is the derived unit of
//! that system and no conversion constant appears anywhere.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use crate::error::{Error, Result};

/// Physical constants of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Mass of the hydrogen atom (u).
    pub m_h: f64,
    /// Mass of the rigid CH3+ core (u).
    pub m_ch3: f64,
    /// Moment of inertia of the core (u Å²).
    pub i_ch3: f64,
    /// Dissociation energy (kcal/mol).
    pub d_e: f64,
    pub c1: f64,
    pub c2: f64,
    /// Equilibrium C-H distance (Å).
    pub r_e: f64,
    /// Rotor barrier height at equilibrium (kcal/mol).
    pub u_e: f64,
    /// Range of the hindered-rotor coupling (Å⁻²).
    pub a: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        let m_h = 1.007825;
        Self {
            m_h,
            m_ch3: 3.0 * m_h + 12.0,
            i_ch3: 2.373409,
            d_e: 47.0,
            c1: 7.37,
            c2: 1.61,
            r_e: 1.1,
            u_e: 55.0,
            a: 1.0,
        }
    }
}

/// Keys of the `[model]` configuration section, in canonical order.
pub const MODEL_KEYS: [&str; 9] = ["m_H", "m_CH3", "I_CH3", "D_e", "c1", "c2", "r_e", "U_e", "a"];

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m_H", self.m_h),
            ("m_CH3", self.m_ch3),
            ("I_CH3", self.i_ch3),
            ("D_e", self.d_e),
            ("r_e", self.r_e),
            ("U_e", self.u_e),
            ("a", self.a),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.c1.is_finite() && self.c1 > 6.0) {
            return Err(Error::InvalidParameter(format!("c1 must exceed 6, got {}", self.c1)));
        }
        if !self.c2.is_finite() {
            return Err(Error::InvalidParameter("c2 must be finite".into()));
        }
        Ok(())
    }

    /// Get a parameter by its configuration key.
    pub fn get(&self, key: &str) -> Option<f64> {
        Some(match key {
            "m_H" => self.m_h,
            "m_CH3" => self.m_ch3,
            "I_CH3" => self.i_ch3,
            "D_e" => self.d_e,
            "c1" => self.c1,
            "c2" => self.c2,
            "r_e" => self.r_e,
            "U_e" => self.u_e,
            "a" => self.a,
            _ => return None,
        })
    }

    /// Set a parameter by its configuration key; returns false for unknown keys.
    pub fn set(&mut self, key: &str, value: f64) -> bool {
        let slot = match key {
            "m_H" => &mut self.m_h,
            "m_CH3" => &mut self.m_ch3,
            "I_CH3" => &mut self.i_ch3,
            "D_e" => &mut self.d_e,
            "c1" => &mut self.c1,
            "c2" => &mut self.c2,
            "r_e" => &mut self.r_e,
            "U_e" => &mut self.u_e,
            "a" => &mut self.a,
            _ => return false,
        };
        *slot = value;
        true
    }

    /// μ = m_CH3 m_H / (m_CH3 + m_H)
    pub fn reduced_mass(&self) -> f64 {
        self.m_ch3 * self.m_h / (self.m_ch3 + self.m_h)
    }

    /// Long-range radial term and its first two derivatives in r.
    fn radial_terms(&self, r: f64) -> [f64; 3] {
        let x = r / self.r_e;
        let pre = self.d_e / (self.c1 - 6.0);
        let rep = 2.0 * (3.0 - self.c2);
        let six = 4.0 * self.c2 - self.c1 * self.c2 + self.c1;
        let four = (self.c1 - 6.0) * self.c2;
        let ex = (self.c1 * (1.0 - x)).exp();
        let x2 = x * x;
        let xm4 = 1.0 / (x2 * x2);
        let xm6 = xm4 / x2;
        let u = pre * (rep * ex - six * xm6 - four * xm4);
        let du = pre / self.r_e * (-rep * self.c1 * ex + 6.0 * six * xm6 / x + 4.0 * four * xm4 / x);
        let d2u = pre / (self.r_e * self.r_e)
            * (rep * self.c1 * self.c1 * ex - 42.0 * six * xm6 / x2 - 20.0 * four * xm4 / x2);
        [u, du, d2u]
    }

    fn gaussian(&self, r: f64) -> f64 {
        let dr = r - self.r_e;
        (-self.a * dr * dr).exp()
    }

    /// U(r, θ) = U_CH(r) + U_coup(r, θ).
    pub fn potential(&self, r: f64, theta: f64) -> Result<f64> {
        check_radius(r)?;
        Ok(self.potential_unchecked(r, theta))
    }

    pub(crate) fn potential_unchecked(&self, r: f64, theta: f64) -> f64 {
        let [u_ch, _, _] = self.radial_terms(r);
        u_ch + 0.5 * self.u_e * self.gaussian(r) * (1.0 - (2.0 * theta).cos())
    }

    /// Analytic (∂U/∂r, ∂U/∂θ).
    pub fn gradient(&self, r: f64, theta: f64) -> Result<[f64; 2]> {
        check_radius(r)?;
        Ok(self.gradient_unchecked(r, theta))
    }

    pub(crate) fn gradient_unchecked(&self, r: f64, theta: f64) -> [f64; 2] {
        let [_, du_ch, _] = self.radial_terms(r);
        let g = self.gaussian(r);
        let (s2, c2) = (2.0 * theta).sin_cos();
        let dg = -2.0 * self.a * (r - self.r_e) * g;
        [du_ch + 0.5 * self.u_e * dg * (1.0 - c2), self.u_e * g * s2]
    }

    /// Analytic second partials `[[U_rr, U_rθ], [U_θr, U_θθ]]`.
    pub fn hessian(&self, r: f64, theta: f64) -> Result<[[f64; 2]; 2]> {
        check_radius(r)?;
        Ok(self.hessian_unchecked(r, theta))
    }

    pub(crate) fn hessian_unchecked(&self, r: f64, theta: f64) -> [[f64; 2]; 2] {
        let [_, _, d2u_ch] = self.radial_terms(r);
        let g = self.gaussian(r);
        let dr = r - self.r_e;
        let dg = -2.0 * self.a * dr * g;
        let d2g = (4.0 * self.a * self.a * dr * dr - 2.0 * self.a) * g;
        let (s2, c2) = (2.0 * theta).sin_cos();
        let u_rr = d2u_ch + 0.5 * self.u_e * d2g * (1.0 - c2);
        let u_rt = self.u_e * dg * s2;
        let u_tt = 2.0 * self.u_e * g * c2;
        [[u_rr, u_rt], [u_rt, u_tt]]
    }

    /// Locate the stationary points of U, one representative per symmetry class.
    pub fn stationary_points(&self) -> Result<Vec<StationaryPoint>> {
        stationary_points(self)
    }
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("radius must be positive, got {r}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Well,
    Saddle,
    Maximum,
    Degenerate,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Well => "well",
            Classification::Saddle => "saddle",
            Classification::Maximum => "maximum",
            Classification::Degenerate => "degenerate",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryPoint {
    pub r: f64,
    pub theta: f64,
    pub energy: f64,
    pub class: Classification,
    pub gradient_norm: f64,
}

/// Eigenvalue magnitude below which the Hessian is reported as degenerate.
pub const DEGENERATE_EIGENVALUE: f64 = 1e-8;

fn classify(h: [[f64; 2]; 2]) -> Classification {
    let tr = h[0][0] + h[1][1];
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let disc = ((h[0][0] - h[1][1]).powi(2) + 4.0 * h[0][1] * h[1][0]).max(0.0).sqrt();
    let (l1, l2) = (0.5 * (tr - disc), 0.5 * (tr + disc));
    if l1.abs() < DEGENERATE_EIGENVALUE || l2.abs() < DEGENERATE_EIGENVALUE || det == 0.0 {
        Classification::Degenerate
    } else if l1 > 0.0 {
        Classification::Well
    } else if l2 < 0.0 {
        Classification::Maximum
    } else {
        Classification::Saddle
    }
}

/// Map θ into the fundamental domain [0, π/2] of the four-fold symmetry.
pub fn fold_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(std::f64::consts::PI);
    if t > FRAC_PI_2 {
        std::f64::consts::PI - t
    } else {
        t
    }
}

fn newton_stationary(params: &ModelParams, mut r: f64, mut theta: f64) -> Option<(f64, f64)> {
    for _ in 0..100 {
        if !(0.5..=20.0).contains(&r) {
            return None;
        }
        let [gr, gt] = params.gradient_unchecked(r, theta);
        if gr.hypot(gt) < 1e-12 {
            return Some((r, theta));
        }
        let h = params.hessian_unchecked(r, theta);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        if det.abs() < 1e-14 {
            return None;
        }
        let dr = (h[1][1] * gr - h[0][1] * gt) / det;
        let dt = (h[0][0] * gt - h[1][0] * gr) / det;
        // damp wild steps so seeds stay near their basin
        let scale = (0.5 / dr.abs().max(dt.abs())).min(1.0);
        r -= scale * dr;
        theta -= scale * dt;
    }
    let [gr, gt] = params.gradient_unchecked(r, theta);
    (gr.hypot(gt) < 1e-8).then_some((r, theta))
}

/// Inner radius of the seed grid; below it the radial term turns over into
/// an unphysical region with no bearing on the chemistry.
const SEED_R_MIN: f64 = 0.95;
const SEED_R_MAX: f64 = 6.0;

fn stationary_points(params: &ModelParams) -> Result<Vec<StationaryPoint>> {
    params.validate()?;
    let mut found: Vec<StationaryPoint> = Vec::new();
    let mut residuals = Vec::new();
    let (nr, nt) = (41, 9);
    for i in 0..nr {
        let r0 = SEED_R_MIN + (SEED_R_MAX - SEED_R_MIN) * i as f64 / (nr - 1) as f64;
        for j in 0..nt {
            let t0 = FRAC_PI_2 * j as f64 / (nt - 1) as f64;
            let Some((r, theta)) = newton_stationary(params, r0, t0) else {
                let [gr, gt] = params.gradient_unchecked(r0, t0);
                residuals.push(gr.hypot(gt));
                continue;
            };
            if r < SEED_R_MIN - 0.05 {
                continue;
            }
            let theta = fold_angle(theta);
            let [gr, gt] = params.gradient_unchecked(r, theta);
            let point = StationaryPoint {
                r,
                theta,
                energy: params.potential_unchecked(r, theta),
                class: classify(params.hessian_unchecked(r, theta)),
                gradient_norm: gr.hypot(gt),
            };
            if !found
                .iter()
                .any(|p| (p.r - r).abs() < 1e-6 && (p.theta - theta).abs() < 1e-6)
            {
                found.push(point);
            }
        }
    }
    if found.is_empty() {
        return Err(Error::Convergence(format!(
            "Newton failed from every seed; smallest seed residual {:.3e}",
            residuals.iter().cloned().fold(f64::INFINITY, f64::min)
        )));
    }
    found.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(found)
}

/// One reference stationary point with the tolerance it is checked at.
#[derive(Debug, Clone, Copy)]
pub struct ReferencePoint {
    pub label: &'static str,
    pub r: f64,
    pub theta: f64,
    pub energy: f64,
    pub energy_tol: f64,
    pub class: Classification,
}

/// Published equilibria of the potential with default parameters.
pub const REFERENCE_POINTS: [ReferencePoint; 4] = [
    ReferencePoint { label: "q0+", r: 1.1, theta: 0.0, energy: -47.0, energy_tol: 0.1, class: Classification::Well },
    ReferencePoint { label: "q1+", r: 3.45, theta: FRAC_PI_2, energy: -0.63, energy_tol: 0.02, class: Classification::Saddle },
    ReferencePoint { label: "~q1+", r: 1.1, theta: FRAC_PI_2, energy: 8.0, energy_tol: 0.1, class: Classification::Saddle },
    ReferencePoint { label: "q2+", r: 1.63, theta: FRAC_PI_2, energy: 22.27, energy_tol: 0.05, class: Classification::Maximum },
];

#[derive(Debug, Clone)]
pub struct ReferenceCheck {
    pub reference: ReferencePoint,
    pub found: Option<StationaryPoint>,
    pub delta_r: f64,
    pub delta_theta: f64,
    pub delta_energy: f64,
    pub ok: bool,
}

/// Match computed stationary points against the published table
/// (|Δr| ≤ 0.01 Å, |Δθ| ≤ 0.01 rad and the per-row energy tolerance).
pub fn check_reference_points(points: &[StationaryPoint]) -> Vec<ReferenceCheck> {
    REFERENCE_POINTS
        .iter()
        .map(|reference| {
            let best = points.iter().min_by(|a, b| {
                let da = (a.r - reference.r).abs() + (a.theta - reference.theta).abs();
                let db = (b.r - reference.r).abs() + (b.theta - reference.theta).abs();
                da.total_cmp(&db)
            });
            match best {
                Some(p) => {
                    let delta_r = p.r - reference.r;
                    let delta_theta = p.theta - reference.theta;
                    let delta_energy = p.energy - reference.energy;
                    let ok = delta_r.abs() <= 0.01
                        && delta_theta.abs() <= 0.01
                        && delta_energy.abs() <= reference.energy_tol
                        && p.class == reference.class;
                    ReferenceCheck { reference: *reference, found: Some(*p), delta_r, delta_theta, delta_energy, ok }
                }
                None => ReferenceCheck {
                    reference: *reference,
                    found: None,
                    delta_r: f64::NAN,
                    delta_theta: f64::NAN,
                    delta_energy: f64::NAN,
                    ok: false,
                },
            }
        })
        .collect()
}

/// Fails when the parameters no longer reproduce the published equilibria.
pub fn validate_reference(params: &ModelParams) -> Result<Vec<ReferenceCheck>> {
    let points = params.stationary_points()?;
    let checks = check_reference_points(&points);
    if checks.iter().all(|c| c.ok) {
        Ok(checks)
    } else {
        let rows: Vec<String> = checks
            .iter()
            .filter(|c| !c.ok)
            .map(|c| {
                format!(
                    "{}: dr={:.4} dtheta={:.4} dU={:.4}",
                    c.reference.label, c.delta_r, c.delta_theta, c.delta_energy
                )
            })
            .collect();
        Err(Error::ReferenceMismatch(rows.join("; ")))
    }
}
