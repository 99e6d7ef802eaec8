//! Trajectory classes on the radial section from the sequence of well,
//! section and dissociation events.

use rayon::prelude::*;

use super::section::{seed_grid, SectionSpec, RADIAL_SECTION_R};
use crate::dynamics::PhaseState;
use crate::error::{Error, Result};
use crate::integrate::{scan_events, Direction, EventFunction, IntegratorSettings};
use crate::model::ModelParams;
use crate::orbits::{inner_rbar, inner_rbar_prime, outer_radius, INNER_C};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClassKind {
    DirectDissociation,
    Roaming,
    Isomerising,
    Nonreactive,
    ResidentTimeout,
}

impl ClassKind {
    pub const ALL: [ClassKind; 5] = [
        ClassKind::DirectDissociation,
        ClassKind::Roaming,
        ClassKind::Isomerising,
        ClassKind::Nonreactive,
        ClassKind::ResidentTimeout,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ClassKind::DirectDissociation => "direct-dissociation",
            ClassKind::Roaming => "roaming",
            ClassKind::Isomerising => "isomerising",
            ClassKind::Nonreactive => "nonreactive",
            ClassKind::ResidentTimeout => "resident-timeout",
        }
    }

    /// Integer code written to class-grid files.
    pub fn code(self) -> u8 {
        match self {
            ClassKind::DirectDissociation => 0,
            ClassKind::Roaming => 1,
            ClassKind::Isomerising => 2,
            ClassKind::Nonreactive => 3,
            ClassKind::ResidentTimeout => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Where the trajectory came from (backward in time) or goes (forward).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminus {
    /// Crosses r = r̄(θ), the inner orbit's radius curve.
    Well,
    /// Crosses r = r_out moving away from the interaction region.
    Asymptotic,
    /// Neither within t_max.
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryClass {
    pub kind: ClassKind,
    /// Crossings of the radial section in either direction between the two
    /// termini, the initial point included.
    pub crossings: usize,
    pub origin: Terminus,
    pub fate: Terminus,
    /// Integration failed before both termini were found.
    pub failed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassRules {
    /// Time budget for each of the backward and forward halves.
    pub t_max: f64,
    pub section_r: f64,
    pub dissociation_r: f64,
    /// Section crossings at or above which a well-to-asymptote trajectory
    /// counts as roaming.
    pub roaming_crossings: usize,
    pub settings: IntegratorSettings,
}

impl ClassRules {
    /// r = 3.6 section, dissociation at the outer orbit, roaming from three
    /// crossings, 50 time units each way.
    pub fn standard(params: &ModelParams) -> Result<Self> {
        Ok(Self {
            t_max: 50.0,
            section_r: RADIAL_SECTION_R,
            dissociation_r: outer_radius(params)?,
            roaming_crossings: 3,
            settings: IntegratorSettings::sweep(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_max must be positive, got {}", self.t_max)));
        }
        if !(self.dissociation_r > self.section_r && self.section_r > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < section radius {} < dissociation radius {}",
                self.section_r, self.dissociation_r
            )));
        }
        if self.roaming_crossings < 2 {
            return Err(Error::InvalidParameter("roaming needs at least two section crossings".into()));
        }
        self.settings.validate()
    }

    /// Class from the two termini and the crossing count.
    pub fn decide(&self, origin: Terminus, fate: Terminus, crossings: usize) -> ClassKind {
        use Terminus::*;
        match (origin, fate) {
            (Unresolved, _) | (_, Unresolved) => ClassKind::ResidentTimeout,
            (Well, Well) => ClassKind::Isomerising,
            (Asymptotic, Asymptotic) => ClassKind::Nonreactive,
            // leaving the well for the asymptote, or the time reverse
            _ if crossings >= self.roaming_crossings => ClassKind::Roaming,
            _ => ClassKind::DirectDissociation,
        }
    }
}

/// Zero set r = level; `sign` = +1 fires on outward motion.
struct Radius {
    level: f64,
    sign: f64,
}

impl EventFunction for Radius {
    fn value(&self, y: &[f64; 4]) -> f64 {
        self.sign * (y[0] - self.level)
    }
    fn rate(&self, _y: &[f64; 4], y_dot: &[f64; 4]) -> f64 {
        self.sign * y_dot[0]
    }
}

/// Zero set r = r̄(θ).
struct WellBoundary {
    sign: f64,
}

impl EventFunction for WellBoundary {
    fn value(&self, y: &[f64; 4]) -> f64 {
        self.sign * (y[0] - inner_rbar(&INNER_C, y[2]))
    }
    fn rate(&self, y: &[f64; 4], y_dot: &[f64; 4]) -> f64 {
        self.sign * (y_dot[0] - inner_rbar_prime(&INNER_C, y[2]) * y_dot[2])
    }
}

/// Events closer than this to the start are the start itself.
const START_SLACK: f64 = 1e-9;

/// Follow one half of the trajectory until it reaches the well or the
/// asymptote. Returns the terminus, the number of section crossings on the
/// way, and whether the integration failed.
fn half(params: &ModelParams, state: &PhaseState, rules: &ClassRules, direction: Direction) -> (Terminus, usize, bool) {
    let forward = direction == Direction::Forward;
    // physical-time orientation: forward looks for inward well entry and
    // outward escape, backward for outward well exit and inward arrival
    let s = if forward { 1.0 } else { -1.0 };
    let out = Radius { level: rules.section_r, sign: 1.0 };
    let inward = Radius { level: rules.section_r, sign: -1.0 };
    let well = WellBoundary { sign: -s };
    let far = Radius { level: rules.dissociation_r, sign: s };
    let events: [&dyn EventFunction; 4] = [&out, &inward, &well, &far];
    let settings = rules.settings.with_direction(direction).with_t_max(rules.t_max);
    let mut crossings = 0;
    let mut terminus = Terminus::Unresolved;
    let summary = scan_events(params, state, &events, &settings, |e| {
        if (e.state.t - state.t).abs() < START_SLACK {
            return true;
        }
        match e.event {
            0 | 1 => {
                crossings += 1;
                true
            }
            2 => {
                terminus = Terminus::Well;
                false
            }
            _ => {
                terminus = Terminus::Asymptotic;
                false
            }
        }
    });
    let failed = match summary {
        Ok(s) => terminus == Terminus::Unresolved && s.status.is_failure(),
        Err(_) => true,
    };
    (terminus, crossings, failed)
}

/// Classify the full trajectory through `state`: backward to where it came
/// from, forward to where it goes, counting radial-section crossings in
/// between.
pub fn classify_trajectory(params: &ModelParams, state: &PhaseState, rules: &ClassRules) -> TrajectoryClass {
    let (origin, back, failed_back) = half(params, state, rules, Direction::Backward);
    let (fate, ahead, failed_ahead) = half(params, state, rules, Direction::Forward);
    let on_section = (state.r - rules.section_r).abs() < 1e-9;
    let crossings = back + ahead + usize::from(on_section);
    let failed = failed_back || failed_ahead;
    let kind = if failed { ClassKind::ResidentTimeout } else { rules.decide(origin, fate, crossings) };
    TrajectoryClass { kind, crossings, origin, fate, failed }
}

/// Classes over a section grid; `None` marks cells outside the kinetic
/// budget. Index = row · n + column.
#[derive(Debug, Clone)]
pub struct ClassGrid {
    pub section: SectionSpec,
    pub rules: ClassRules,
    pub cells: Vec<Option<TrajectoryClass>>,
}

impl ClassGrid {
    pub fn count(&self, kind: ClassKind) -> usize {
        self.cells.iter().flatten().filter(|c| c.kind == kind).count()
    }

    pub fn fraction(&self, kind: ClassKind) -> f64 {
        let live = self.cells.iter().flatten().count();
        if live == 0 {
            0.0
        } else {
            self.count(kind) as f64 / live as f64
        }
    }

    pub fn failed_count(&self) -> usize {
        self.cells.iter().flatten().filter(|c| c.failed).count()
    }
}

pub fn classify_grid(params: &ModelParams, section: &SectionSpec, rules: &ClassRules) -> Result<ClassGrid> {
    params.validate()?;
    rules.validate()?;
    let seeds = seed_grid(params, section)?;
    let cells = seeds.par_iter().map(|s| s.as_ref().map(|s| classify_trajectory(params, s, rules))).collect();
    Ok(ClassGrid { section: *section, rules: *rules, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{resolve_momentum_on_constraint, FixedMomentum};

    #[test]
    fn codes_round_trip() {
        for k in ClassKind::ALL {
            assert_eq!(ClassKind::from_code(k.code()), Some(k));
            assert_eq!(ClassKind::parse(k.name()), Some(k));
        }
        assert_eq!(ClassKind::from_code(5), None);
    }

    #[test]
    fn decision_table() {
        let r = ClassRules::standard(&ModelParams::default()).unwrap();
        use Terminus::*;
        assert_eq!(r.decide(Well, Asymptotic, 1), ClassKind::DirectDissociation);
        assert_eq!(r.decide(Well, Asymptotic, 3), ClassKind::Roaming);
        assert_eq!(r.decide(Well, Well, 2), ClassKind::Isomerising);
        assert_eq!(r.decide(Asymptotic, Asymptotic, 2), ClassKind::Nonreactive);
        assert_eq!(r.decide(Unresolved, Asymptotic, 1), ClassKind::ResidentTimeout);
        assert_eq!(r.decide(Well, Unresolved, 1), ClassKind::ResidentTimeout);
    }

    #[test]
    fn radial_escape_is_direct() {
        let p = ModelParams::default();
        let rules = ClassRules::standard(&p).unwrap();
        let s = resolve_momentum_on_constraint(&p, RADIAL_SECTION_R, 0.0, FixedMomentum::PTheta(0.0), true).unwrap();
        let c = classify_trajectory(&p, &s, &rules);
        assert_eq!((c.origin, c.fate), (Terminus::Well, Terminus::Asymptotic));
        assert_eq!(c.kind, ClassKind::DirectDissociation);
        assert_eq!(c.crossings, 1);
        assert!(!c.failed);
    }

    #[test]
    fn bad_rules_rejected() {
        let mut r = ClassRules::standard(&ModelParams::default()).unwrap();
        r.dissociation_r = 2.0;
        assert!(r.validate().is_err());
    }
}
