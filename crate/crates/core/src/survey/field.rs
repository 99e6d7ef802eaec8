use rayon::prelude::*;

use super::section::{seed_grid, SectionSpec};
use crate::error::Result;
use crate::integrate::IntegratorSettings;
use crate::ld::{ld_value, DescriptorSpec};
use crate::model::ModelParams;

/// Descriptor values over a section grid, row-major (row = axis 2).
/// Masked cells hold NaN; failed trajectories hold +∞.
#[derive(Debug, Clone)]
pub struct LDField {
    pub section: SectionSpec,
    pub descriptor: DescriptorSpec,
    pub settings: IntegratorSettings,
    pub values: Vec<f64>,
}

impl LDField {
    pub fn n(&self) -> usize {
        self.section.resolution
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n() + col]
    }

    pub fn is_masked(&self, row: usize, col: usize) -> bool {
        self.at(row, col).is_nan()
    }

    pub fn masked_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    pub fn failed_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_infinite()).count()
    }

    /// Fraction of unmasked cells whose trajectory failed.
    pub fn failed_fraction(&self) -> f64 {
        let live = self.values.len() - self.masked_count();
        if live == 0 {
            0.0
        } else {
            self.failed_count() as f64 / live as f64
        }
    }

    /// Smallest and largest finite value.
    pub fn finite_range(&self) -> Option<(f64, f64)> {
        let mut it = self.values.iter().copied().filter(|v| v.is_finite());
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }

    pub fn row(&self, row: usize) -> &[f64] {
        let n = self.n();
        &self.values[row * n..(row + 1) * n]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n()).map(|j| self.at(j, col)).collect()
    }
}

/// Evaluate a descriptor at every unmasked seed. Cells are computed in
/// parallel and gathered by index, so the result does not depend on the
/// number of worker threads.
pub fn compute_field(
    params: &ModelParams,
    section: &SectionSpec,
    descriptor: &DescriptorSpec,
    settings: &IntegratorSettings,
) -> Result<LDField> {
    params.validate()?;
    descriptor.validate()?;
    settings.validate()?;
    let seeds = seed_grid(params, section)?;
    let values: Vec<f64> = seeds
        .par_iter()
        .map(|seed| match seed {
            Some(s) => ld_value(params, s, descriptor, settings),
            None => f64::NAN,
        })
        .collect();
    Ok(LDField { section: *section, descriptor: descriptor.clone(), settings: *settings, values })
}

/// Serial reference implementation of [`compute_field`].
pub fn compute_field_serial(
    params: &ModelParams,
    section: &SectionSpec,
    descriptor: &DescriptorSpec,
    settings: &IntegratorSettings,
) -> Result<LDField> {
    params.validate()?;
    descriptor.validate()?;
    settings.validate()?;
    let values = seed_grid(params, section)?
        .iter()
        .map(|seed| seed.as_ref().map_or(f64::NAN, |s| ld_value(params, s, descriptor, settings)))
        .collect();
    Ok(LDField { section: *section, descriptor: descriptor.clone(), settings: *settings, values })
}
