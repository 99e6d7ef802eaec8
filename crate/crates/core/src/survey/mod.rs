//! Surfaces of section, descriptor sweeps over them, manifold extraction,
//! trajectory classification and the manifold overlay.

mod classify;
mod extract;
mod field;
mod overlay;
mod section;

pub use classify::{classify_grid, classify_trajectory, ClassGrid, ClassKind, ClassRules, Terminus, TrajectoryClass};
pub use extract::{
    extract_gradient_ridges, extract_minima, profile_minima, ManifoldTrace, MinimaOptions, ProfileMinimum,
    RidgeCensus, RidgeExtraction, RidgeOptions, TraceChain, TraceLabel,
};
pub use field::{compute_field, compute_field_serial, LDField};
pub use overlay::{intersection_overlay, OverlayReport};
pub use section::{seed_grid, SectionSpec, RADIAL_SECTION_R};
