//! The two isokinetic periodic orbits: the inner orbit bounding the wells,
//! parametrised by a cosine series r̄(θ) and an odd polynomial p̄_r(θ), and
//! the outer circular orbit on the centrifugal barrier.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rayon::prelude::*;

use crate::dynamics::{angular_factor, field, max_angular_momentum, PhaseState};
use crate::error::{Error, Result};
use crate::integrate::{advance, flow_map, fundamental_matrix, IntegratorSettings};
use crate::model::ModelParams;

/// Published cosine-series coefficients of r̄(θ) for the inner orbit (Å).
pub const INNER_C: [f64; 6] = [2.78147867, 0.98235111, -0.17161848, -0.00486657, 0.01628185, -0.00393858];

/// Published odd-polynomial coefficients of p̄_r(θ) for the inner orbit
/// with p_θ > 0.
pub const INNER_D: [f64; 6] = [-1.06278495, -0.42089795, 1.38849679, -1.11654771, 0.40789372, -0.05122644];

/// Published radius of the outer orbit.
pub const OUTER_RADIUS_REFERENCE: f64 = 13.430_924_140_191_070_9;

/// r̄(θ) = Σ c_k cos(2kθ)
pub fn inner_rbar(c: &[f64; 6], theta: f64) -> f64 {
    c.iter().enumerate().map(|(k, ck)| ck * (2.0 * k as f64 * theta).cos()).sum()
}

/// dr̄/dθ
pub fn inner_rbar_prime(c: &[f64; 6], theta: f64) -> f64 {
    c.iter()
        .enumerate()
        .map(|(k, ck)| {
            let w = 2.0 * k as f64;
            -ck * w * (w * theta).sin()
        })
        .sum()
}

/// Reduce θ into (−π/2, π/2] by the period π.
pub fn reduce_half_period(theta: f64) -> f64 {
    let mut t = theta - PI * (theta / PI).round();
    if t <= -FRAC_PI_2 {
        t += PI;
    } else if t > FRAC_PI_2 {
        t -= PI;
    }
    t
}

/// p̄_r(θ) = Σ d_k θ^(2k+1) on (−π/2, π/2], extended with period π.
pub fn inner_pbar_r(d: &[f64; 6], theta: f64) -> f64 {
    let t = reduce_half_period(theta);
    let t2 = t * t;
    d.iter().rev().fold(0.0, |acc, dk| acc * t2 + dk) * t
}

/// dp̄_r/dθ on the open interval; the slope jump at ±π/2 is ignored.
pub fn inner_pbar_r_prime(d: &[f64; 6], theta: f64) -> f64 {
    let t = reduce_half_period(theta);
    let t2 = t * t;
    d.iter()
        .enumerate()
        .rev()
        .fold(0.0, |acc, (k, dk)| acc * t2 + (2 * k + 1) as f64 * dk)
}

/// Sense of rotation of an orbit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// p_θ > 0
    Plus,
    /// p_θ < 0
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "plus" | "+" => Some(Branch::Plus),
            "minus" | "-" => Some(Branch::Minus),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OrbitShape {
    /// r = r̄(θ), p_r = p̄_r(θ), coefficients as evaluated for this branch.
    Inner { c: [f64; 6], d: [f64; 6] },
    /// r = r_out, p_r = 0.
    Outer { r_out: f64 },
}

/// A periodic orbit of the isokinetic flow described as a curve over θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitCurve {
    pub shape: OrbitShape,
    pub branch: Branch,
    /// Time for θ to advance by 2π; NaN until refined or estimated.
    pub period: f64,
}

impl OrbitCurve {
    /// Inner orbit from the published coefficients.
    pub fn published_inner(branch: Branch) -> Self {
        let curve = Self { shape: OrbitShape::Inner { c: INNER_C, d: INNER_D }, branch: Branch::Plus, period: f64::NAN };
        match branch {
            Branch::Plus => curve,
            Branch::Minus => curve.mirrored(),
        }
    }

    pub fn outer(r_out: f64, branch: Branch) -> Self {
        Self { shape: OrbitShape::Outer { r_out }, branch, period: f64::NAN }
    }

    /// Image under (θ, p_θ) → (−θ, −p_θ).
    pub fn mirrored(&self) -> Self {
        let shape = match self.shape {
            OrbitShape::Inner { c, d } => OrbitShape::Inner { c, d: d.map(|v| -v) },
            outer => outer,
        };
        let branch = match self.branch {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        };
        Self { shape, branch, period: self.period }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.shape {
            OrbitShape::Inner { .. } => "inner",
            OrbitShape::Outer { .. } => "outer",
        }
    }

    pub fn radius(&self, theta: f64) -> f64 {
        match &self.shape {
            OrbitShape::Inner { c, .. } => inner_rbar(c, theta),
            OrbitShape::Outer { r_out } => *r_out,
        }
    }

    pub fn radius_prime(&self, theta: f64) -> f64 {
        match &self.shape {
            OrbitShape::Inner { c, .. } => inner_rbar_prime(c, theta),
            OrbitShape::Outer { .. } => 0.0,
        }
    }

    pub fn radial_momentum(&self, theta: f64) -> f64 {
        match &self.shape {
            OrbitShape::Inner { d, .. } => inner_pbar_r(d, theta),
            OrbitShape::Outer { .. } => 0.0,
        }
    }

    pub fn radial_momentum_prime(&self, theta: f64) -> f64 {
        match &self.shape {
            OrbitShape::Inner { d, .. } => inner_pbar_r_prime(d, theta),
            OrbitShape::Outer { .. } => 0.0,
        }
    }

    /// On-curve state at angle θ, with p_θ recovered from KE = ½ on this
    /// branch. p_r is clipped to the energy budget if the fit overshoots it.
    pub fn state_at(&self, params: &ModelParams, theta: f64) -> PhaseState {
        let r = self.radius(theta);
        let mu = params.reduced_mass();
        let lim = mu.sqrt() * (1.0 - 1e-12);
        let p_r = self.radial_momentum(theta).clamp(-lim, lim);
        let budget = 1.0 - p_r * p_r / mu;
        let p_theta = self.branch.sign() * (budget / angular_factor(params, r)).sqrt();
        PhaseState::new(r, p_r, theta, p_theta)
    }

    /// Period from ∫ dθ/θ̇ along the curve (periodic trapezoid rule).
    pub fn quadrature_period(&self, params: &ModelParams) -> f64 {
        cumulative_time(self, params, 4096).last().copied().unwrap_or(f64::NAN)
    }

    /// Text block: `kind`, `period`, `branch`, then coefficients or `r_out`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "kind = {}", self.kind_name());
        let _ = writeln!(s, "period = {}", fmt17(self.period));
        let _ = writeln!(s, "branch = {}", self.branch.name());
        match &self.shape {
            OrbitShape::Inner { c, d } => {
                for (k, v) in c.iter().enumerate() {
                    let _ = writeln!(s, "c{k} = {}", fmt17(*v));
                }
                for (k, v) in d.iter().enumerate() {
                    let _ = writeln!(s, "d{k} = {}", fmt17(*v));
                }
            }
            OrbitShape::Outer { r_out } => {
                let _ = writeln!(s, "r_out = {}", fmt17(*r_out));
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut kv = std::collections::HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format { line: i + 1, msg: format!("expected key = value, got {line:?}") })?;
            kv.insert(k.trim().to_string(), (i + 1, v.trim().to_string()));
        }
        let get = |k: &str| kv.get(k).ok_or_else(|| Error::Format { line: 0, msg: format!("missing key {k}") });
        let num = |k: &str| -> Result<f64> {
            let (line, v) = get(k)?;
            parse_f64(v).ok_or_else(|| Error::Format { line: *line, msg: format!("bad number for {k}: {v}") })
        };
        let (bl, b) = get("branch")?;
        let branch = Branch::parse(b).ok_or_else(|| Error::Format { line: *bl, msg: format!("bad branch {b}") })?;
        let period = num("period")?;
        let (kl, kind) = get("kind")?;
        let shape = match kind.as_str() {
            "inner" => {
                let mut c = [0.0; 6];
                let mut d = [0.0; 6];
                for k in 0..6 {
                    c[k] = num(&format!("c{k}"))?;
                    d[k] = num(&format!("d{k}"))?;
                }
                OrbitShape::Inner { c, d }
            }
            "outer" => OrbitShape::Outer { r_out: num("r_out")? },
            other => return Err(Error::Format { line: *kl, msg: format!("unknown orbit kind {other}") }),
        };
        Ok(Self { shape, branch, period })
    }
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt17(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

pub fn parse_f64(s: &str) -> Option<f64> {
    match s.trim() {
        "nan" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        t => t.parse().ok(),
    }
}

/// Cumulative time t(θ_j) at θ_j = 2π j / n (sign of rotation folded in).
fn cumulative_time(curve: &OrbitCurve, params: &ModelParams, n: usize) -> Vec<f64> {
    let s = curve.branch.sign();
    let inv_rate = |theta: f64| {
        let st = curve.state_at(params, theta);
        1.0 / (st.p_theta * angular_factor(params, st.r)).abs()
    };
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let h = TAU / n as f64;
    let mut acc = 0.0;
    for j in 0..n {
        let a = s * h * j as f64;
        let b = s * h * (j + 1) as f64;
        // Simpson on each panel
        acc += h / 6.0 * (inv_rate(a) + 4.0 * inv_rate(0.5 * (a + b)) + inv_rate(b));
        out.push(acc);
    }
    out
}

/// Radius of the circular orbit: root of p_θ²/(μr³) − ∂U/∂r with p_θ fixed
/// by KE = ½ and p_r = 0.
pub fn outer_radius(params: &ModelParams) -> Result<f64> {
    params.validate()?;
    let mu = params.reduced_mass();
    let g = |r: f64| {
        let denom = r + mu * r * r * r / params.i_ch3;
        1.0 / denom - params.gradient_unchecked(r, 0.0)[0]
    };
    let dg = |r: f64| {
        let denom = r + mu * r * r * r / params.i_ch3;
        -(1.0 + 3.0 * mu * r * r / params.i_ch3) / (denom * denom) - params.hessian_unchecked(r, 0.0)[0][0]
    };
    let (mut lo, mut hi) = (5.0, 50.0);
    let (g_lo, g_hi) = (g(lo), g(hi));
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::Convergence(format!(
            "no centrifugal barrier: no sign change on [5, 50] (g = {g_lo:.3e}, {g_hi:.3e})"
        )));
    }
    let increasing = g_hi > g_lo;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if (g(mid) > 0.0) == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-6 {
            break;
        }
    }
    let mut r = 0.5 * (lo + hi);
    for _ in 0..50 {
        let step = g(r) / dg(r);
        let next = (r - step).clamp(lo, hi);
        if (next - r).abs() <= 1e-15 * r {
            r = next;
            break;
        }
        r = next;
    }
    Ok(r)
}

/// Outcome of a multiple-shooting refinement.
#[derive(Debug, Clone)]
pub struct RefinedOrbit {
    pub curve: OrbitCurve,
    /// Segment start states; node 0 has θ = 0.
    pub nodes: Vec<PhaseState>,
    pub period: f64,
    /// Euclidean norm of the matching conditions at convergence.
    pub residual: f64,
    pub iterations: usize,
    /// Ratio of the largest to the smallest non-negligible singular value of
    /// the last Newton matrix.
    pub condition: f64,
    /// Number of negligible singular values of that matrix.
    pub nullity: usize,
    /// Largest deviation between the refitted and the seed r̄(θ).
    pub refit_deviation: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ShootingOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub settings: IntegratorSettings,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 30,
            settings: IntegratorSettings { rel_tol: 1e-13, abs_tol: 1e-13, ..IntegratorSettings::precise() },
        }
    }
}

fn seed_nodes(curve: &OrbitCurve, params: &ModelParams, n_segments: usize) -> (Vec<PhaseState>, f64) {
    let n = 4096;
    let cum = cumulative_time(curve, params, n);
    let period = cum[n];
    let s = curve.branch.sign();
    let nodes = (0..n_segments)
        .map(|k| {
            let target = period * k as f64 / n_segments as f64;
            let j = cum.partition_point(|t| *t <= target).clamp(1, n);
            let frac = (target - cum[j - 1]) / (cum[j] - cum[j - 1]);
            let theta = s * TAU * (j as f64 - 1.0 + frac) / n as f64;
            curve.state_at(params, theta)
        })
        .collect();
    (nodes, period)
}

/// Default number of shooting segments. Coarser meshes leave the arc past
/// the repulsive core under-resolved and Newton can lock onto spurious
/// solutions.
pub const DEFAULT_SEGMENTS: usize = 80;

const NULL_SINGULAR: f64 = 1e-12;

/// Node on the constraint surface from (r, p_r, θ), p_θ taking the sign of
/// the branch.
fn constrained_node(params: &ModelParams, r: f64, p_r: f64, theta: f64, sign: f64) -> Option<PhaseState> {
    let budget = 1.0 - p_r * p_r / params.reduced_mass();
    if !(r > 0.0) || !(budget > 0.0) {
        return None;
    }
    Some(PhaseState::new(r, p_r, theta, sign * (budget / angular_factor(params, r)).sqrt()))
}

/// Matching defect of one segment in (r, p_r, θ).
fn defect(end: &PhaseState, target: &PhaseState, shift: f64) -> [f64; 3] {
    [end.r - target.r, end.p_r - target.p_r, end.theta - target.theta - shift]
}

/// Refine a periodic orbit by multiple shooting on equal-time segments.
///
/// Nodes live on the constraint surface: each is stored as (r, p_r, θ) with
/// p_θ recovered from KE = ½, so only three components are matched per
/// segment. With the period as an extra unknown and the phase condition
/// θ₀ = 0 the Newton system is square; it is solved through an SVD so that
/// the condition number comes for free.
pub fn refine_orbit(
    params: &ModelParams,
    initial: &OrbitCurve,
    n_segments: usize,
    options: &ShootingOptions,
) -> Result<RefinedOrbit> {
    if n_segments < 2 {
        return Err(Error::InvalidParameter("at least two shooting segments required".into()));
    }
    let (mut nodes, mut period) = seed_nodes(initial, params, n_segments);
    let n = n_segments;
    let mu = params.reduced_mass();
    let sign = initial.branch.sign();
    let shift = sign * TAU;
    let settings = options.settings.with_direction(crate::integrate::Direction::Forward);
    let mut condition = f64::NAN;
    let mut nullity = 0;
    let mut residual_norm = f64::INFINITY;

    for iteration in 0..=options.max_iterations {
        let h = period / n as f64;
        let segments: Vec<(PhaseState, [[f64; 4]; 4])> = nodes
            .par_iter()
            .map(|x| fundamental_matrix(params, x, h, &settings))
            .collect::<Result<_>>()?;

        let dim = 3 * n + 1;
        let mut jac = DMatrix::<f64>::zeros(dim, dim);
        let mut res = DVector::<f64>::zeros(dim);
        let mut per_segment = Vec::with_capacity(n);
        for k in 0..n {
            let (end, phi) = &segments[k];
            let next = (k + 1) % n;
            let x = &nodes[k];
            let g = angular_factor(params, x.r);
            // ∂p_θ/∂r and ∂p_θ/∂p_r on the constraint
            let dpt_dr = x.p_theta / (mu * x.r.powi(3) * g);
            let dpt_dpr = -x.p_r / (mu * g * x.p_theta);
            let d = defect(end, &nodes[next], if next == 0 { shift } else { 0.0 });
            let f_end = field(params, &end.to_array());
            for a in 0..3 {
                res[3 * k + a] = d[a];
                jac[(3 * k + a, 3 * k)] = phi[a][0] + phi[a][3] * dpt_dr;
                jac[(3 * k + a, 3 * k + 1)] = phi[a][1] + phi[a][3] * dpt_dpr;
                jac[(3 * k + a, 3 * k + 2)] = phi[a][2];
                jac[(3 * k + a, 3 * next + a)] -= 1.0;
                jac[(3 * k + a, 3 * n)] = f_end[a] / n as f64;
            }
            per_segment.push(d.iter().fold(0.0f64, |acc, v| acc.hypot(*v)));
        }
        res[3 * n] = nodes[0].theta;
        jac[(3 * n, 2)] = 1.0;

        residual_norm = res.rows(0, 3 * n).norm();
        log::debug!("shooting iteration {iteration}: residual {residual_norm:.3e}, period {period:.12}");
        if residual_norm < options.tolerance {
            let mut curve = match initial.shape {
                OrbitShape::Inner { .. } => refit_inner(params, &nodes, period, initial.branch, &settings)?,
                OrbitShape::Outer { .. } => {
                    let r_mean = nodes.iter().map(|s| s.r).sum::<f64>() / n as f64;
                    OrbitCurve::outer(r_mean, initial.branch)
                }
            };
            curve.period = period;
            let refit_deviation = (0..720)
                .map(|j| {
                    let th = TAU * j as f64 / 720.0;
                    (curve.radius(th) - initial.radius(th)).abs()
                })
                .fold(0.0, f64::max);
            return Ok(RefinedOrbit {
                curve,
                nodes,
                period,
                residual: residual_norm,
                iterations: iteration,
                condition,
                nullity,
                refit_deviation,
            });
        }
        if iteration == options.max_iterations || !residual_norm.is_finite() {
            let listing: Vec<String> = per_segment.iter().enumerate().map(|(k, v)| format!("{k}:{v:.2e}")).collect();
            return Err(Error::Convergence(format!(
                "multiple shooting stalled at residual {residual_norm:.3e} (cond {condition:.2e}); segments {}",
                listing.join(" ")
            )));
        }

        let svd = jac.svd(true, true);
        let sv = &svd.singular_values;
        let smax = sv.max();
        let floor = smax * NULL_SINGULAR;
        nullity = sv.iter().filter(|s| **s <= floor).count();
        condition = smax / sv.iter().copied().filter(|s| *s > floor).fold(f64::INFINITY, f64::min);
        let delta = svd
            .solve(&(-&res), floor)
            .map_err(|e| Error::Convergence(format!("Newton solve failed: {e}")))?;

        let full = res.norm();
        let mut step = 1.0;
        loop {
            let trial_nodes: Option<Vec<PhaseState>> = nodes
                .iter()
                .enumerate()
                .map(|(k, x)| {
                    constrained_node(
                        params,
                        x.r + step * delta[3 * k],
                        x.p_r + step * delta[3 * k + 1],
                        x.theta + step * delta[3 * k + 2],
                        sign,
                    )
                })
                .collect();
            let trial_period = period + step * delta[3 * n];
            let trial = match &trial_nodes {
                Some(t) if trial_period > 0.0 => shooting_residual(params, t, trial_period, shift, &settings).ok(),
                _ => None,
            };
            if let (Some(norm), Some(t)) = (trial, trial_nodes) {
                if norm < full || step < 1.0 / 64.0 {
                    nodes = t;
                    period = trial_period;
                    break;
                }
            }
            step *= 0.5;
            if step < 1.0 / 1024.0 {
                return Err(Error::Convergence(format!(
                    "line search failed at residual {residual_norm:.3e} (cond {condition:.2e})"
                )));
            }
        }
    }
    Err(Error::Convergence(format!("multiple shooting did not converge (residual {residual_norm:.3e})")))
}

fn shooting_residual(
    params: &ModelParams,
    nodes: &[PhaseState],
    period: f64,
    shift: f64,
    settings: &IntegratorSettings,
) -> Result<f64> {
    let n = nodes.len();
    let h = period / n as f64;
    let ends: Vec<PhaseState> = nodes.par_iter().map(|x| flow_map(params, x, h, settings)).collect::<Result<_>>()?;
    let mut norm = nodes[0].theta.abs();
    for k in 0..n {
        let next = (k + 1) % n;
        for v in defect(&ends[k], &nodes[next], if next == 0 { shift } else { 0.0 }) {
            norm = norm.hypot(v);
        }
    }
    Ok(norm)
}

/// Sample the converged orbit densely and least-squares fit the cosine
/// series and the odd polynomial.
fn refit_inner(
    params: &ModelParams,
    nodes: &[PhaseState],
    period: f64,
    branch: Branch,
    settings: &IntegratorSettings,
) -> Result<OrbitCurve> {
    let h = period / nodes.len() as f64;
    let per_segment = 64;
    let samples: Vec<PhaseState> = nodes
        .par_iter()
        .map(|x| -> Result<Vec<PhaseState>> {
            let traj = advance(params, x, &settings.with_t_max(h))?;
            Ok((0..per_segment)
                .filter_map(|j| traj.at(x.t + h * j as f64 / per_segment as f64))
                .collect())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let m = samples.len();
    let mut a = DMatrix::<f64>::zeros(m, 6);
    let mut b = DVector::<f64>::zeros(m);
    for (i, s) in samples.iter().enumerate() {
        for k in 0..6 {
            a[(i, k)] = (2.0 * k as f64 * s.theta).cos();
        }
        b[i] = s.r;
    }
    let c = least_squares(a, b)?;

    let mut a = DMatrix::<f64>::zeros(m, 6);
    let mut b = DVector::<f64>::zeros(m);
    for (i, s) in samples.iter().enumerate() {
        let t = reduce_half_period(s.theta);
        for k in 0..6 {
            a[(i, k)] = t.powi(2 * k as i32 + 1);
        }
        b[i] = s.p_r;
    }
    let d = least_squares(a, b)?;
    Ok(OrbitCurve {
        shape: OrbitShape::Inner { c: std::array::from_fn(|k| c[k]), d: std::array::from_fn(|k| d[k]) },
        branch,
        period,
    })
}

fn least_squares(a: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    a.svd(true, true)
        .solve(&b, 1e-13)
        .map_err(|e| Error::Convergence(format!("least-squares fit failed: {e}")))
}

/// Floquet multipliers of a periodic orbit, largest magnitude first.
#[derive(Debug, Clone, PartialEq)]
pub struct FloquetSpectrum {
    /// log10 |λ| for each multiplier.
    pub log10_abs: [f64; 4],
    /// Sign of each (real) multiplier.
    pub signs: [f64; 4],
}

impl FloquetSpectrum {
    fn sorted(mut pairs: Vec<(f64, f64)>) -> Self {
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        Self { log10_abs: std::array::from_fn(|i| pairs[i].0), signs: std::array::from_fn(|i| pairs[i].1) }
    }

    pub fn multipliers(&self) -> [f64; 4] {
        std::array::from_fn(|i| self.signs[i] * 10f64.powf(self.log10_abs[i]))
    }

    pub fn log10_max(&self) -> f64 {
        self.log10_abs[0]
    }

    /// λ_max λ_min, exactly one for a reciprocal pair.
    pub fn reciprocal_product(&self) -> f64 {
        self.signs[0] * self.signs[3] * 10f64.powf(self.log10_abs[0] + self.log10_abs[3])
    }

    /// Number of multipliers within `rel` of +1.
    pub fn count_near_unity(&self, rel: f64) -> usize {
        self.multipliers().iter().filter(|m| (*m - 1.0).abs() <= rel).count()
    }

    /// Largest difference in log10 |λ| against another spectrum.
    pub fn log_distance(&self, other: &Self) -> f64 {
        (0..4).map(|i| (self.log10_abs[i] - other.log10_abs[i]).abs()).fold(0.0, f64::max)
    }
}

/// Eigenvalues of the ordered product A_{n−1} ⋯ A_0 by periodic QR
/// (treppen) iteration. The product is never formed, so multipliers spanning
/// many orders of magnitude stay resolved. Sweeps repeat until the logarithms
/// settle, at a rate set by the ratio of neighbouring multipliers, or until
/// `max_sweeps`. Returns (log10 |λ|, sign) pairs; real eigenvalues are
/// assumed.
pub fn product_spectrum(factors: &[DMatrix<f64>], max_sweeps: usize) -> Vec<(f64, f64)> {
    let Some(first) = factors.first() else { return Vec::new() };
    let dim = first.ncols();
    let mut q = DMatrix::<f64>::identity(dim, dim);
    let mut logs = vec![0.0; dim];
    let mut start = q.clone();
    for sweep in 0..max_sweeps.max(1) {
        let previous = std::mem::replace(&mut logs, vec![0.0; dim]);
        start = q.clone();
        for a in factors {
            let qr = (a * &q).qr();
            let mut qn = qr.q();
            let r = qr.r();
            for i in 0..dim {
                let d = r[(i, i)];
                if d < 0.0 {
                    qn.column_mut(i).neg_mut();
                }
                logs[i] += d.abs().log10();
            }
            q = qn;
        }
        let change = logs.iter().zip(&previous).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if sweep > 0 && change < SWEEP_SETTLED {
            break;
        }
    }
    // with a positive R diagonal the basis returns to itself up to the sign
    // of each multiplier
    let overlap = start.transpose() * &q;
    (0..dim).map(|i| (logs[i], if overlap[(i, i)] < 0.0 { -1.0 } else { 1.0 })).collect()
}

const SWEEP_SETTLED: f64 = 1e-14;

/// One shooting segment: its fundamental matrix together with the flow
/// vector and the constraint gradient at both ends, all in one chart.
struct Segment {
    a: Matrix4<f64>,
    f_in: Vector4<f64>,
    f_out: Vector4<f64>,
    g_in: Vector4<f64>,
    g_out: Vector4<f64>,
}

/// Basis [f̂, w₁, w₂, ĝ] with w₁, w₂ spanning the part of the constraint
/// tangent space orthogonal to the flow.
fn adapted_basis(f: &Vector4<f64>, g: &Vector4<f64>) -> Matrix4<f64> {
    let fh = f.normalize();
    let gh = g.normalize();
    let mut set = vec![gh, fh];
    for _ in 0..2 {
        let best = (0..4)
            .map(|i| {
                let mut v = Vector4::<f64>::zeros();
                v[i] = 1.0;
                for u in &set {
                    v -= u * u.dot(&v);
                }
                v
            })
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap_or_else(Vector4::zeros);
        // repeat the projection once for orthogonality to working precision
        let mut v = best;
        for u in &set {
            v -= u * u.dot(&v);
        }
        set.push(v.normalize());
    }
    Matrix4::from_columns(&[fh, set[2], set[3], gh])
}

/// Split each segment into the flow direction, the transverse tangent plane
/// and the constraint normal; the product is block triangular in this basis
/// so its spectrum is the union of the blockwise products.
fn reduced_spectrum(segments: &[Segment]) -> Result<FloquetSpectrum> {
    let mut log_flow = 0.0;
    let mut sign_flow = 1.0;
    let mut log_normal = 0.0;
    let mut sign_normal = 1.0;
    let mut blocks = Vec::with_capacity(segments.len());
    for seg in segments {
        let s_in = adapted_basis(&seg.f_in, &seg.g_in);
        let s_out = adapted_basis(&seg.f_out, &seg.g_out);
        let inv = s_out
            .try_inverse()
            .ok_or_else(|| Error::Convergence("degenerate frame along the orbit".into()))?;
        let c = inv * seg.a * s_in;
        log_flow += c[(0, 0)].abs().log10();
        sign_flow *= c[(0, 0)].signum();
        log_normal += c[(3, 3)].abs().log10();
        sign_normal *= c[(3, 3)].signum();
        blocks.push(DMatrix::from_fn(2, 2, |i, j| c[(i + 1, j + 1)]));
    }
    let mut pairs = product_spectrum(&blocks, FLOQUET_SWEEPS);
    pairs.push((log_flow, sign_flow));
    pairs.push((log_normal, sign_normal));
    Ok(FloquetSpectrum::sorted(pairs))
}

fn constraint_gradient(params: &ModelParams, x: &PhaseState) -> Vector4<f64> {
    let mu = params.reduced_mass();
    Vector4::new(
        -x.p_theta * x.p_theta / (mu * x.r * x.r * x.r),
        x.p_r / mu,
        0.0,
        x.p_theta * angular_factor(params, x.r),
    )
}

fn segments(params: &ModelParams, orbit: &RefinedOrbit, settings: &IntegratorSettings) -> Result<Vec<Segment>> {
    let n = orbit.nodes.len();
    let mats = segment_matrices(params, orbit, settings)?;
    Ok((0..n)
        .map(|k| {
            let x_in = &orbit.nodes[k];
            let x_out = &orbit.nodes[(k + 1) % n];
            Segment {
                a: mats[k],
                f_in: Vector4::from(field(params, &x_in.to_array())),
                f_out: Vector4::from(field(params, &x_out.to_array())),
                g_in: constraint_gradient(params, x_in),
                g_out: constraint_gradient(params, x_out),
            }
        })
        .collect())
}

/// Per-segment fundamental matrices along a refined orbit, in the
/// (r, p_r, θ, p_θ) chart.
pub fn segment_matrices(params: &ModelParams, orbit: &RefinedOrbit, settings: &IntegratorSettings) -> Result<Vec<Matrix4<f64>>> {
    let h = orbit.period / orbit.nodes.len() as f64;
    let settings = settings.with_direction(crate::integrate::Direction::Forward);
    orbit
        .nodes
        .par_iter()
        .map(|x| {
            let (_, phi) = fundamental_matrix(params, x, h, &settings)?;
            Ok(Matrix4::from_fn(|a, b| phi[a][b]))
        })
        .collect()
}

const FLOQUET_SWEEPS: usize = 5000;

/// Floquet multipliers of a refined orbit.
pub fn floquet(params: &ModelParams, orbit: &RefinedOrbit, settings: &IntegratorSettings) -> Result<FloquetSpectrum> {
    reduced_spectrum(&segments(params, orbit, settings)?)
}

/// Jacobian of (r, p_r, θ, p_θ) → (r, π_r, θ, π_θ).
fn pi_chart_jacobian(params: &ModelParams, x: &PhaseState) -> Result<Matrix4<f64>> {
    let u = params.potential(x.r, x.theta)?;
    if u.abs() > 700.0 {
        return Err(Error::Overflow(u.abs()));
    }
    let [u_r, u_t] = params.gradient_unchecked(x.r, x.theta);
    let w = (-u).exp();
    let mut m = Matrix4::<f64>::identity();
    m[(1, 0)] = -u_r * w * x.p_r;
    m[(1, 1)] = w;
    m[(1, 2)] = -u_t * w * x.p_r;
    m[(3, 0)] = -u_r * w * x.p_theta;
    m[(3, 2)] = -u_t * w * x.p_theta;
    m[(3, 3)] = w;
    Ok(m)
}

/// Floquet multipliers with every segment conjugated into the
/// (r, π_r, θ, π_θ) chart.
pub fn floquet_pi_chart(params: &ModelParams, orbit: &RefinedOrbit, settings: &IntegratorSettings) -> Result<FloquetSpectrum> {
    let n = orbit.nodes.len();
    let charts: Vec<Matrix4<f64>> = orbit.nodes.iter().map(|x| pi_chart_jacobian(params, x)).collect::<Result<_>>()?;
    let inverses: Vec<Matrix4<f64>> = charts
        .iter()
        .map(|d| d.try_inverse().ok_or_else(|| Error::Convergence("singular chart Jacobian".into())))
        .collect::<Result<_>>()?;
    let conj = segments(params, orbit, settings)?
        .into_iter()
        .enumerate()
        .map(|(k, seg)| {
            let (d_in, d_out) = (&charts[k], &charts[(k + 1) % n]);
            let (inv_in, inv_out) = (&inverses[k], &inverses[(k + 1) % n]);
            Segment {
                a: d_out * seg.a * inv_in,
                f_in: d_in * seg.f_in,
                f_out: d_out * seg.f_out,
                g_in: inv_in.transpose() * seg.g_in,
                g_out: inv_out.transpose() * seg.g_out,
            }
        })
        .collect::<Vec<_>>();
    reduced_spectrum(&conj)
}

/// The circular orbit as a ready-made refined orbit (no Newton needed when
/// the radius comes from [`outer_radius`]).
pub fn outer_orbit(params: &ModelParams, branch: Branch) -> Result<OrbitCurve> {
    let r_out = outer_radius(params)?;
    let mut curve = OrbitCurve::outer(r_out, branch);
    let p_theta = max_angular_momentum(params, r_out);
    curve.period = TAU / (p_theta * angular_factor(params, r_out));
    Ok(curve)
}

/// The circular orbit cut into `n_segments` equal-time arcs, ready for
/// [`floquet`]. The reported residual is the shooting defect of the exact
/// circle.
pub fn outer_refined(params: &ModelParams, branch: Branch, n_segments: usize, settings: &IntegratorSettings) -> Result<RefinedOrbit> {
    if n_segments < 2 {
        return Err(Error::InvalidParameter("at least two shooting segments required".into()));
    }
    let curve = outer_orbit(params, branch)?;
    let s = branch.sign();
    let nodes: Vec<PhaseState> =
        (0..n_segments).map(|k| curve.state_at(params, s * TAU * k as f64 / n_segments as f64)).collect();
    let residual = shooting_residual(params, &nodes, curve.period, s * TAU, settings)?;
    Ok(RefinedOrbit {
        period: curve.period,
        curve,
        nodes,
        residual,
        iterations: 0,
        condition: 1.0,
        nullity: 0,
        refit_deviation: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rbar_at_zero_is_coefficient_sum() {
        let sum: f64 = INNER_C.iter().sum();
        assert!((inner_rbar(&INNER_C, 0.0) - sum).abs() < 1e-15);
        assert!((sum - 3.599688).abs() < 1e-12);
        assert_eq!(inner_rbar_prime(&INNER_C, 0.0), 0.0);
    }

    #[test]
    fn rbar_symmetries() {
        for k in 0..50 {
            let t = -3.0 + 0.123 * k as f64;
            let r = inner_rbar(&INNER_C, t);
            assert!((r - inner_rbar(&INNER_C, -t)).abs() < 1e-13);
            assert!((r - inner_rbar(&INNER_C, PI - t)).abs() < 1e-13);
            assert!(r > 0.0);
        }
    }

    #[test]
    fn pbar_polynomial_and_period() {
        assert_eq!(inner_pbar_r(&INNER_D, 0.0), 0.0);
        let t: f64 = 0.3;
        let direct: f64 = INNER_D.iter().enumerate().map(|(k, d)| d * t.powi(2 * k as i32 + 1)).sum();
        assert!((inner_pbar_r(&INNER_D, t) - direct).abs() < 1e-15);
        for k in 0..40 {
            let t = -4.0 + 0.2 * k as f64 + 0.01;
            assert!((inner_pbar_r(&INNER_D, t) - inner_pbar_r(&INNER_D, t + PI)).abs() < 1e-12);
        }
    }

    #[test]
    fn pbar_prime_matches_difference_quotient() {
        for &t in &[-1.2, -0.4, 0.0, 0.7, 1.3, 2.5] {
            let h = 1e-6;
            let fd = (inner_pbar_r(&INNER_D, t + h) - inner_pbar_r(&INNER_D, t - h)) / (2.0 * h);
            assert!((fd - inner_pbar_r_prime(&INNER_D, t)).abs() < 1e-7);
            let fd = (inner_rbar(&INNER_C, t + h) - inner_rbar(&INNER_C, t - h)) / (2.0 * h);
            assert!((fd - inner_rbar_prime(&INNER_C, t)).abs() < 1e-7);
        }
    }

    #[test]
    fn half_period_reduction() {
        assert_eq!(reduce_half_period(FRAC_PI_2), FRAC_PI_2);
        assert!((reduce_half_period(-FRAC_PI_2) - FRAC_PI_2).abs() < 1e-15);
        assert!((reduce_half_period(PI + 0.2) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn outer_radius_reference() {
        let r = outer_radius(&ModelParams::default()).unwrap();
        assert!((r / OUTER_RADIUS_REFERENCE - 1.0).abs() <= 1e-12, "{r:.17}");
    }

    #[test]
    fn outer_radius_responds_to_well_depth() {
        let base = ModelParams::default();
        let r0 = outer_radius(&base).unwrap();
        let r1 = outer_radius(&ModelParams { d_e: base.d_e * 1.01, ..base }).unwrap();
        let r2 = outer_radius(&ModelParams { d_e: base.d_e * 1.02, ..base }).unwrap();
        // deeper attraction pushes the barrier outwards, smoothly
        assert!(r1 > r0 && r2 > r1);
        assert!(((r2 - r1) - (r1 - r0)).abs() < 0.1 * (r1 - r0));
    }

    #[test]
    fn no_barrier_is_reported() {
        // strong short-range repulsion only: no sign change in [5, 50]
        let p = ModelParams { c2: 3.0, ..ModelParams::default() };
        if let Err(e) = outer_radius(&p) {
            assert!(matches!(e, Error::Convergence(_)));
        }
    }

    #[test]
    fn on_curve_states_are_constrained() {
        let p = ModelParams::default();
        for branch in [Branch::Plus, Branch::Minus] {
            let curve = OrbitCurve::published_inner(branch);
            for k in 0..32 {
                let s = curve.state_at(&p, 0.2 * k as f64);
                assert!(s.is_isokinetic(&p));
                assert_eq!(s.p_theta.signum(), branch.sign());
            }
        }
    }

    #[test]
    fn quadrature_period_near_published() {
        let p = ModelParams::default();
        let t = OrbitCurve::published_inner(Branch::Plus).quadrature_period(&p);
        assert!((t - 11.84).abs() < 0.1, "{t}");
        let outer = outer_orbit(&p, Branch::Plus).unwrap();
        assert!((outer.period - 9.61).abs() < 0.01);
    }

    #[test]
    fn text_block_round_trip() {
        let mut c = OrbitCurve::published_inner(Branch::Minus);
        c.period = 11.8412345678901234;
        let back = OrbitCurve::from_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
        let o = OrbitCurve { period: 9.61, ..OrbitCurve::outer(OUTER_RADIUS_REFERENCE, Branch::Plus) };
        assert_eq!(OrbitCurve::from_text(&o.to_text()).unwrap(), o);
        assert!(OrbitCurve::from_text("kind = torus\nperiod = 1\nbranch = plus\n").is_err());
    }

    #[test]
    fn product_spectrum_of_known_factors() {
        // A_k = R(φ_{k+1}) diag(10, −0.1, 1) R(−φ_k): the product is similar
        // to diag(10^n, (−0.1)^n, 1) and the rotations hide that from each factor
        let rot = |a: f64| {
            let (s, c) = a.sin_cos();
            DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s * 0.6, c * 0.6, 0.8, -s * 0.8, -c * 0.8, 0.6])
        };
        let base = DMatrix::from_diagonal(&DVector::from_vec(vec![10.0, -0.1, 1.0]));
        let n = 25;
        let factors: Vec<DMatrix<f64>> = (0..n)
            .map(|k| {
                let phi = |j: usize| if j % n == 0 { 0.0 } else { 0.37 * j as f64 };
                rot(phi(k + 1)) * &base * rot(phi(k)).transpose()
            })
            .collect();
        let mut spec = product_spectrum(&factors, 30);
        spec.sort_by(|a, b| b.0.total_cmp(&a.0));
        assert!((spec[0].0 - 25.0).abs() < 1e-9 && spec[0].1 > 0.0);
        assert!(spec[1].0.abs() < 1e-9 && spec[1].1 > 0.0);
        assert!((spec[2].0 + 25.0).abs() < 1e-9 && spec[2].1 < 0.0);
    }
}
