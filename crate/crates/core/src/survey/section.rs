use std::f64::consts::{FRAC_PI_2, PI};

use crate::dynamics::{max_angular_momentum, resolve_momentum_on_constraint, FixedMomentum, PhaseState};
use crate::error::{Error, Result};
use crate::integrate::SectionKind;
use crate::model::ModelParams;

/// Radius of the radial surface of section used throughout.
pub const RADIAL_SECTION_R: f64 = 3.6;

/// A surface of section with a uniform n×n grid over its two free
/// coordinates. On the θ-section the axes are (r, p_r); on the radial
/// section they are (θ, p_θ).
///
/// Row j holds axis-2 value j, column i holds axis-1 value i. The angular
/// axis of the radial section is periodic and sampled at lo + i·h with
/// h = (hi − lo)/n; every other axis is sampled at cell centres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionSpec {
    pub kind: SectionKind,
    pub axis1: (f64, f64),
    pub axis2: (f64, f64),
    pub resolution: usize,
}

impl SectionSpec {
    /// θ = 0, θ̇ > 0 over r ∈ [2, 14], p_r ∈ [−√μ, √μ].
    pub fn theta_default(params: &ModelParams, resolution: usize) -> Self {
        let s = params.reduced_mass().sqrt();
        Self { kind: SectionKind::Theta { theta0: 0.0 }, axis1: (2.0, 14.0), axis2: (-s, s), resolution }
    }

    /// r = 3.6, ṙ > 0 over θ ∈ [−π/2, 3π/2), p_θ ∈ ±p_θ^max(3.6).
    pub fn radial_default(params: &ModelParams, resolution: usize) -> Self {
        let pm = max_angular_momentum(params, RADIAL_SECTION_R);
        Self {
            kind: SectionKind::Radial { r0: RADIAL_SECTION_R },
            axis1: (-FRAC_PI_2, 3.0 * FRAC_PI_2),
            axis2: (-pm, pm),
            resolution,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            SectionKind::Theta { .. } => "theta",
            SectionKind::Radial { .. } => "radial",
        }
    }

    /// Value of the fixed coordinate (θ₀ or r₀).
    pub fn level(&self) -> f64 {
        match self.kind {
            SectionKind::Theta { theta0 } => theta0,
            SectionKind::Radial { r0 } => r0,
        }
    }

    pub fn axis_names(&self) -> (&'static str, &'static str) {
        match self.kind {
            SectionKind::Theta { .. } => ("r", "p_r"),
            SectionKind::Radial { .. } => ("theta", "p_theta"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::InvalidParameter(format!("resolution must be at least 2, got {}", self.resolution)));
        }
        for (name, (lo, hi)) in [("axis1", self.axis1), ("axis2", self.axis2)] {
            if !lo.is_finite() || !hi.is_finite() || !(hi > lo) {
                return Err(Error::InvalidParameter(format!("{name} range [{lo}, {hi}] must be finite and increasing")));
            }
        }
        if !self.level().is_finite() {
            return Err(Error::InvalidParameter("section level must be finite".into()));
        }
        if let SectionKind::Radial { r0 } = self.kind {
            if !(r0 > 0.0) {
                return Err(Error::InvalidParameter(format!("section radius must be positive, got {r0}")));
            }
        }
        if let SectionKind::Theta { .. } = self.kind {
            if !(self.axis1.0 > 0.0) {
                return Err(Error::InvalidParameter("radius axis must stay positive".into()));
            }
        }
        Ok(())
    }

    /// The angular axis of the radial section wraps around.
    pub fn periodic_axis1(&self) -> bool {
        matches!(self.kind, SectionKind::Radial { .. })
    }

    pub fn axis1_value(&self, i: usize) -> f64 {
        let (lo, hi) = self.axis1;
        let h = (hi - lo) / self.resolution as f64;
        if self.periodic_axis1() {
            lo + h * i as f64
        } else {
            lo + h * (i as f64 + 0.5)
        }
    }

    pub fn axis2_value(&self, j: usize) -> f64 {
        let (lo, hi) = self.axis2;
        lo + (hi - lo) / self.resolution as f64 * (j as f64 + 0.5)
    }

    /// Fractional column index of an axis-1 coordinate, inverse of
    /// [`Self::axis1_value`].
    pub fn axis1_index(&self, a1: f64) -> f64 {
        let x = (a1 - self.axis1.0) / self.axis1_step();
        if self.periodic_axis1() {
            x
        } else {
            x - 0.5
        }
    }

    pub fn axis2_index(&self, a2: f64) -> f64 {
        (a2 - self.axis2.0) / self.axis2_step() - 0.5
    }

    /// Axis-1 coordinate at a fractional column index.
    pub fn axis1_at(&self, index: f64) -> f64 {
        let offset = if self.periodic_axis1() { 0.0 } else { 0.5 };
        self.axis1.0 + self.axis1_step() * (index + offset)
    }

    pub fn axis1_step(&self) -> f64 {
        (self.axis1.1 - self.axis1.0) / self.resolution as f64
    }

    pub fn axis2_step(&self) -> f64 {
        (self.axis2.1 - self.axis2.0) / self.resolution as f64
    }

    pub fn cells(&self) -> usize {
        self.resolution * self.resolution
    }

    /// Constrained initial condition for (axis1, axis2).
    pub fn state(&self, params: &ModelParams, a1: f64, a2: f64) -> Result<PhaseState> {
        match self.kind {
            SectionKind::Theta { theta0 } => resolve_momentum_on_constraint(params, a1, theta0, FixedMomentum::PR(a2), true),
            SectionKind::Radial { r0 } => resolve_momentum_on_constraint(params, r0, a1, FixedMomentum::PTheta(a2), true),
        }
    }

    /// Whether the angular axis maps onto itself under θ → θ + π with a whole
    /// number of cells.
    pub fn half_turn_shift(&self) -> Option<usize> {
        let span = self.axis1.1 - self.axis1.0;
        if self.periodic_axis1() && (span - 2.0 * PI).abs() < 1e-12 && self.resolution % 2 == 0 {
            Some(self.resolution / 2)
        } else {
            None
        }
    }
}

/// Constrained seeds on a section; `None` marks cells outside the kinetic
/// budget. Index = row · n + column.
pub fn seed_grid(params: &ModelParams, section: &SectionSpec) -> Result<Vec<Option<PhaseState>>> {
    section.validate()?;
    let n = section.resolution;
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        let a2 = section.axis2_value(j);
        for i in 0..n {
            let a1 = section.axis1_value(i);
            match section.state(params, a1, a2) {
                Ok(s) => out.push(Some(s)),
                Err(Error::OutsideEnergyShell(_)) => out.push(None),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}
