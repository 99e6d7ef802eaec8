//! Trajectories of the isokinetic field: dense output, section crossings,
//! descriptor quadrature and variational equations.

mod solver;
mod tableau;

pub use solver::{propagate, DenseStep, OdeSystem, Outcome, Status, StepControl, Stepper};

use crate::dynamics::{field, jacobian_array, kinetic_energy, PhaseState, CONSTRAINT_WARN, KINETIC_TARGET};
use crate::error::{Error, Result};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "forward" => Some(Direction::Forward),
            "backward" => Some(Direction::Backward),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub t_max: f64,
    pub direction: Direction,
    pub max_steps: usize,
    /// Rescale the momenta back onto KE = ½ after every accepted step.
    pub project: bool,
}

impl IntegratorSettings {
    /// Tight tolerances used for orbits and monodromy.
    pub fn precise() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-12,
            max_step: 0.5,
            t_max: 30.0,
            direction: Direction::Forward,
            max_steps: 200_000,
            project: true,
        }
    }

    /// Tolerances used for grid sweeps.
    pub fn sweep() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-10, ..Self::precise() }
    }

    pub fn with_t_max(self, t_max: f64) -> Self {
        Self { t_max, ..self }
    }

    pub fn with_direction(self, direction: Direction) -> Self {
        Self { direction, ..self }
    }

    pub fn with_projection(self, project: bool) -> Self {
        Self { project, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(v > 0.0 && v <= 1e-3) {
                return Err(Error::InvalidParameter(format!("{name} must lie in (0, 1e-3], got {v}")));
            }
        }
        if !(self.t_max > 0.0) {
            return Err(Error::InvalidParameter(format!("t_max must be positive, got {}", self.t_max)));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidParameter(format!("max_step must be positive, got {}", self.max_step)));
        }
        Ok(())
    }

    pub(crate) fn control(&self) -> StepControl {
        StepControl {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            max_steps: self.max_steps,
        }
    }
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self::precise()
    }
}

/// The isokinetic field, optionally reversed in time.
#[derive(Debug, Clone, Copy)]
pub struct IsokineticFlow<'a> {
    pub params: &'a ModelParams,
    sign: f64,
    project: bool,
}

impl<'a> IsokineticFlow<'a> {
    pub fn new(params: &'a ModelParams, direction: Direction) -> Self {
        Self { params, sign: direction.sign(), project: false }
    }

    pub fn projected(self, project: bool) -> Self {
        Self { project, ..self }
    }
}

/// Off-constraint perturbations grow like e^{2ΔU}, so a trajectory that
/// visits a well bottom and climbs out again amplifies rounding errors in
/// KE by many orders of magnitude. Rescaling both momenta removes the
/// normal component after each step.
fn project_momenta(params: &ModelParams, y: &mut [f64]) -> bool {
    let ke = kinetic_energy(params, &PhaseState::from_array(y, 0.0));
    if (ke - KINETIC_TARGET).abs() <= PROJECTION_SLACK || !(ke > 0.0) || !ke.is_finite() {
        return false;
    }
    let scale = (KINETIC_TARGET / ke).sqrt();
    y[1] *= scale;
    y[3] *= scale;
    true
}

const PROJECTION_SLACK: f64 = 1e-14;

fn physical_check(y: &[f64]) -> Option<Status> {
    if y.iter().any(|v| !v.is_finite()) {
        Some(Status::NonFinite)
    } else if y[0] <= 0.0 {
        Some(Status::Collision)
    } else {
        None
    }
}

impl OdeSystem<4> for IsokineticFlow<'_> {
    #[inline]
    fn rhs(&self, y: &[f64; 4]) -> [f64; 4] {
        let mut f = field(self.params, y);
        for v in &mut f {
            *v *= self.sign;
        }
        f
    }

    fn check(&self, y: &[f64; 4]) -> Option<Status> {
        physical_check(y)
    }

    fn project(&self, y: &mut [f64; 4]) -> bool {
        self.project && project_momenta(self.params, y)
    }
}

/// A finished integration with its continuous extension.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub direction: Direction,
    pub start: PhaseState,
    pub end: PhaseState,
    pub status: Status,
    /// Largest |KE − ½| seen at accepted steps.
    pub max_drift: f64,
    steps: Vec<DenseStep<4>>,
}

impl Trajectory {
    /// False when the integration failed or the state drifted off the
    /// constraint by more than 1e-6.
    pub fn is_valid(&self) -> bool {
        !self.status.is_failure() && self.max_drift <= CONSTRAINT_WARN
    }

    /// Elapsed physical time (negative for backward runs).
    pub fn duration(&self) -> f64 {
        self.end.t - self.start.t
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Dense-output state at physical time `t` inside the integrated span.
    pub fn at(&self, t: f64) -> Option<PhaseState> {
        let s = (t - self.start.t) * self.direction.sign();
        let span = self.steps.last().map_or(0.0, |d| d.t_new());
        if !(0.0..=span).contains(&s) {
            return if s == 0.0 { Some(self.start) } else { None };
        }
        let idx = self.steps.partition_point(|d| d.t_new() < s).min(self.steps.len() - 1);
        let y = self.steps[idx].eval(s);
        Some(PhaseState::from_array(&y, t))
    }

    /// States at the accepted step boundaries.
    pub fn nodes(&self) -> impl Iterator<Item = PhaseState> + '_ {
        let sign = self.direction.sign();
        let t0 = self.start.t;
        std::iter::once(self.start).chain(
            self.steps.iter().map(move |d| PhaseState::from_array(&d.eval(d.t_new()), t0 + sign * d.t_new())),
        )
    }
}

fn drift(params: &ModelParams, y: &[f64]) -> f64 {
    (kinetic_energy(params, &PhaseState::from_array(y, 0.0)) - KINETIC_TARGET).abs()
}

/// Integrate for `settings.t_max` in `settings.direction`, keeping dense output.
pub fn advance(params: &ModelParams, state: &PhaseState, settings: &IntegratorSettings) -> Result<Trajectory> {
    settings.validate()?;
    if !(state.r > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {}", state.r)));
    }
    let flow = IsokineticFlow::new(params, settings.direction).projected(settings.project);
    let mut steps = Vec::new();
    let mut max_drift = drift(params, &state.to_array());
    let out = propagate(&flow, state.to_array(), settings.t_max, settings.control(), |st| {
        max_drift = max_drift.max(drift(params, &st.y));
        steps.push(st.dense());
        true
    });
    let sign = settings.direction.sign();
    Ok(Trajectory {
        direction: settings.direction,
        start: *state,
        end: PhaseState::from_array(&out.y, state.t + sign * out.t),
        status: out.status,
        max_drift: max_drift.max(drift(params, &out.y)),
        steps,
    })
}

/// Non-negative rate integrated by a Lagrangian descriptor. Receives the
/// state and the forward-time field at that state.
pub trait RateIntegrand: Sync {
    fn rate(&self, params: &ModelParams, y: &[f64; 4], y_dot: &[f64; 4]) -> f64;
}

impl<F> RateIntegrand for F
where
    F: Fn(&ModelParams, &[f64; 4], &[f64; 4]) -> f64 + Sync,
{
    fn rate(&self, params: &ModelParams, y: &[f64; 4], y_dot: &[f64; 4]) -> f64 {
        self(params, y, y_dot)
    }
}

struct AugmentedFlow<'a, I: ?Sized> {
    params: &'a ModelParams,
    sign: f64,
    integrand: &'a I,
    project: bool,
}

impl<I: RateIntegrand + ?Sized> OdeSystem<5> for AugmentedFlow<'_, I> {
    #[inline]
    fn rhs(&self, y: &[f64; 5]) -> [f64; 5] {
        let x = [y[0], y[1], y[2], y[3]];
        let f = field(self.params, &x);
        let rate = self.integrand.rate(self.params, &x, &f).abs();
        let s = self.sign;
        [s * f[0], s * f[1], s * f[2], s * f[3], rate]
    }

    fn check(&self, y: &[f64; 5]) -> Option<Status> {
        physical_check(y)
    }

    fn project(&self, y: &mut [f64; 5]) -> bool {
        self.project && project_momenta(self.params, &mut y[..4])
    }
}

/// ∫|rate| dt over `tau` time units in `direction`, integrated as a fifth
/// component alongside the flow. Failed or drifting trajectories give +∞.
pub fn ld_quadrature<I: RateIntegrand + ?Sized>(
    params: &ModelParams,
    state: &PhaseState,
    tau: f64,
    direction: Direction,
    integrand: &I,
    settings: &IntegratorSettings,
) -> f64 {
    if tau == 0.0 {
        return 0.0;
    }
    if !(tau > 0.0) || !(state.r > 0.0) {
        return f64::INFINITY;
    }
    let flow = AugmentedFlow { params, sign: direction.sign(), integrand, project: settings.project };
    let y0 = [state.r, state.p_r, state.theta, state.p_theta, 0.0];
    let mut ok = true;
    let out = propagate(&flow, y0, tau, settings.control(), |st| {
        if drift(params, &st.y[..4]) > CONSTRAINT_WARN {
            ok = false;
            return false;
        }
        true
    });
    if ok && out.status == Status::Completed {
        out.y[4]
    } else {
        f64::INFINITY
    }
}

/// Scalar event function g on phase space with its crossing direction.
pub trait EventFunction {
    fn value(&self, y: &[f64; 4]) -> f64;

    /// dg/dt along the forward field.
    fn rate(&self, y: &[f64; 4], y_dot: &[f64; 4]) -> f64;

    /// Extra acceptance test at a located root (e.g. angular branch).
    fn accepts(&self, _y: &[f64; 4], _y_dot: &[f64; 4]) -> bool {
        true
    }
}

/// Surface of section: θ = θ₀ (mod 2π) with θ̇ > 0, or r = r₀ with ṙ > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SectionKind {
    Theta { theta0: f64 },
    Radial { r0: f64 },
}

impl EventFunction for SectionKind {
    fn value(&self, y: &[f64; 4]) -> f64 {
        match *self {
            SectionKind::Theta { theta0 } => (y[2] - theta0).sin(),
            SectionKind::Radial { r0 } => y[0] - r0,
        }
    }

    fn rate(&self, y: &[f64; 4], y_dot: &[f64; 4]) -> f64 {
        match *self {
            SectionKind::Theta { theta0 } => (y[2] - theta0).cos() * y_dot[2],
            SectionKind::Radial { .. } => y_dot[0],
        }
    }

    fn accepts(&self, y: &[f64; 4], y_dot: &[f64; 4]) -> bool {
        match *self {
            SectionKind::Theta { theta0 } => (y[2] - theta0).cos() > 0.0 && y_dot[2] > 0.0,
            SectionKind::Radial { .. } => y_dot[0] > 0.0,
        }
    }
}

/// Residual required of a refined event.
pub const EVENT_TOL: f64 = 1e-10;
/// |ġ| below which a crossing is flagged as grazing.
pub const GRAZING_RATE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionEvent {
    pub state: PhaseState,
    /// Index of the event function that fired.
    pub event: usize,
    /// Running count of crossings of this event function.
    pub index: usize,
    pub residual: f64,
    pub grazing: bool,
}

/// Root of g on a dense step, bracketed by [lo, hi] with g(lo) < 0 ≤ g(hi).
fn refine_root<E: EventFunction + ?Sized>(event: &E, dense: &DenseStep<4>, mut lo: f64, mut hi: f64) -> (f64, [f64; 4]) {
    let g = |s: f64| event.value(&dense.eval(s));
    let (mut g_lo, mut g_hi) = (g(lo), g(hi));
    let mut side = 0i8;
    for _ in 0..200 {
        // Illinois variant of regula falsi
        let mut s = if g_hi != g_lo { hi - g_hi * (hi - lo) / (g_hi - g_lo) } else { 0.5 * (lo + hi) };
        if !(s > lo && s < hi) {
            s = 0.5 * (lo + hi);
        }
        let gs = g(s);
        if gs.abs() < EVENT_TOL * 1e-2 || hi - lo < 1e-15 * (1.0 + hi.abs()) {
            return (s, dense.eval(s));
        }
        if gs < 0.0 {
            lo = s;
            g_lo = gs;
            if side == -1 {
                g_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = s;
            g_hi = gs;
            if side == 1 {
                g_lo *= 0.5;
            }
            side = 1;
        }
    }
    let s = if g_lo.abs() < g_hi.abs() { lo } else { hi };
    (s, dense.eval(s))
}

/// Trajectory summary returned alongside located events.
#[derive(Debug, Clone, Copy)]
pub struct ScanSummary {
    pub end: PhaseState,
    pub status: Status,
    pub max_drift: f64,
}

/// Integrate forward, locating every upward crossing of each event function
/// in (0, t_max]. The callback sees each event in time order and may stop the
/// scan by returning `false`.
pub fn scan_events(
    params: &ModelParams,
    state: &PhaseState,
    events: &[&dyn EventFunction],
    settings: &IntegratorSettings,
    mut on_event: impl FnMut(&SectionEvent) -> bool,
) -> Result<ScanSummary> {
    settings.validate()?;
    let flow = IsokineticFlow::new(params, settings.direction).projected(settings.project);
    let sign = settings.direction.sign();
    let mut counts = vec![0usize; events.len()];
    let mut prev: Vec<f64> = events.iter().map(|e| e.value(&state.to_array())).collect();
    let mut max_drift = drift(params, &state.to_array());
    let out = propagate(&flow, state.to_array(), settings.t_max, settings.control(), |st| {
        max_drift = max_drift.max(drift(params, &st.y));
        let current: Vec<f64> = events.iter().map(|e| e.value(&st.y)).collect();
        let mut found: Vec<SectionEvent> = Vec::new();
        let mut dense: Option<DenseStep<4>> = None;
        for (k, e) in events.iter().enumerate() {
            // upward crossing in physical time; backward runs see it reversed
            let crosses = if sign > 0.0 {
                prev[k] < 0.0 && current[k] >= 0.0
            } else {
                prev[k] >= 0.0 && current[k] < 0.0
            };
            if !crosses {
                continue;
            }
            let d = *dense.get_or_insert_with(|| st.dense());
            let (s, y) = if sign > 0.0 {
                refine_root(*e, &d, d.t_old, d.t_new())
            } else {
                refine_root(&Negated(*e), &d, d.t_old, d.t_new())
            };
            let y_dot = field(params, &y);
            if !e.accepts(&y, &y_dot) {
                continue;
            }
            let rate = e.rate(&y, &y_dot);
            found.push(SectionEvent {
                state: PhaseState::from_array(&y, state.t + sign * s),
                event: k,
                index: 0,
                residual: e.value(&y),
                grazing: rate.abs() < GRAZING_RATE,
            });
        }
        prev = current;
        found.sort_by(|a, b| (sign * a.state.t).total_cmp(&(sign * b.state.t)));
        for mut ev in found {
            ev.index = counts[ev.event];
            counts[ev.event] += 1;
            if !on_event(&ev) {
                return false;
            }
        }
        true
    });
    Ok(ScanSummary {
        end: PhaseState::from_array(&out.y, state.t + sign * out.t),
        status: out.status,
        max_drift: max_drift.max(drift(params, &out.y)),
    })
}

struct Negated<'a>(&'a dyn EventFunction);

impl EventFunction for Negated<'_> {
    fn value(&self, y: &[f64; 4]) -> f64 {
        -self.0.value(y)
    }
    fn rate(&self, y: &[f64; 4], y_dot: &[f64; 4]) -> f64 {
        -self.0.rate(y, y_dot)
    }
}

/// All crossings of a surface of section in (0, t_max].
pub fn section_crossings(
    params: &ModelParams,
    state: &PhaseState,
    section: &SectionKind,
    settings: &IntegratorSettings,
) -> Result<(Vec<SectionEvent>, ScanSummary)> {
    let mut events = Vec::new();
    let summary = scan_events(params, state, &[section], settings, |e| {
        events.push(*e);
        true
    })?;
    if summary.status.is_failure() {
        return Err(Error::Integration(format!(
            "{:?} at t = {} after {} crossings",
            summary.status,
            summary.end.t,
            events.len()
        )));
    }
    Ok((events, summary))
}

struct VariationalFlow<'a> {
    params: &'a ModelParams,
    sign: f64,
}

impl OdeSystem<20> for VariationalFlow<'_> {
    fn rhs(&self, y: &[f64; 20]) -> [f64; 20] {
        let x = [y[0], y[1], y[2], y[3]];
        let f = field(self.params, &x);
        let j = jacobian_array(self.params, &x);
        let mut out = [0.0; 20];
        for i in 0..4 {
            out[i] = self.sign * f[i];
        }
        // Φ stored row-major in y[4..20]; Φ' = ±J Φ
        for a in 0..4 {
            for b in 0..4 {
                let mut acc = 0.0;
                for c in 0..4 {
                    acc += j[a][c] * y[4 + 4 * c + b];
                }
                out[4 + 4 * a + b] = self.sign * acc;
            }
        }
        out
    }

    fn check(&self, y: &[f64; 20]) -> Option<Status> {
        physical_check(y)
    }
}

/// Flow map and fundamental matrix over `duration` (in `settings.direction`).
pub fn fundamental_matrix(
    params: &ModelParams,
    state: &PhaseState,
    duration: f64,
    settings: &IntegratorSettings,
) -> Result<(PhaseState, [[f64; 4]; 4])> {
    let flow = VariationalFlow { params, sign: settings.direction.sign() };
    let mut y0 = [0.0; 20];
    y0[..4].copy_from_slice(&state.to_array());
    for i in 0..4 {
        y0[4 + 5 * i] = 1.0;
    }
    let out = propagate(&flow, y0, duration, settings.control(), |_| true);
    if out.status != Status::Completed {
        return Err(Error::Integration(format!("variational equations: {:?} at t = {}", out.status, out.t)));
    }
    let mut phi = [[0.0; 4]; 4];
    for a in 0..4 {
        for b in 0..4 {
            phi[a][b] = out.y[4 + 4 * a + b];
        }
    }
    let t = state.t + settings.direction.sign() * duration;
    Ok((PhaseState::from_array(&out.y[..4], t), phi))
}

/// Flow map only.
pub fn flow_map(
    params: &ModelParams,
    state: &PhaseState,
    duration: f64,
    settings: &IntegratorSettings,
) -> Result<PhaseState> {
    let flow = IsokineticFlow::new(params, settings.direction);
    let out = propagate(&flow, state.to_array(), duration, settings.control(), |_| true);
    if out.status != Status::Completed {
        return Err(Error::Integration(format!("{:?} at t = {}", out.status, out.t)));
    }
    Ok(PhaseState::from_array(&out.y, state.t + settings.direction.sign() * duration))
}
