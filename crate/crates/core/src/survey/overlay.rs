//! Superposition of W_i^u and W_o^s traces on the radial section.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::extract::{ManifoldTrace, TraceLabel};
use super::section::SectionSpec;
use crate::error::{Error, Result};

/// Cell sets on the common n×n grid, row-major like the fields.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlayReport {
    pub resolution: usize,
    /// Cells between the two S-shapes around (0, 0), together with the cells
    /// around (π, 0) bounded by their images under θ → θ + π.
    pub well_region: Vec<bool>,
    /// Cells between the two W_o^s traces.
    pub band: Vec<bool>,
    pub overlap: Vec<bool>,
    /// Ids of the W_i^u chains bounding the region, left then right, per seed.
    pub bounding_chains: Vec<(usize, usize)>,
    /// Whether the overlap maps onto itself under θ → θ + π; `None` when the
    /// grid has no whole-cell half-turn.
    pub half_turn_symmetric: Option<bool>,
}

impl OverlayReport {
    pub fn well_region_cells(&self) -> usize {
        self.well_region.iter().filter(|&&b| b).count()
    }

    pub fn band_cells(&self) -> usize {
        self.band.iter().filter(|&&b| b).count()
    }

    pub fn overlap_cells(&self) -> usize {
        self.overlap.iter().filter(|&&b| b).count()
    }

    pub fn roaming_present(&self) -> bool {
        self.overlap_cells() > 0
    }
}

/// Grid (row, fractional column) of every point of every chain with the
/// given label.
fn grid_points(trace: &ManifoldTrace, label: TraceLabel) -> Vec<(usize, Vec<(usize, f64)>)> {
    let s = &trace.section;
    let n = s.resolution;
    trace
        .labeled(label)
        .map(|c| {
            let points = c
                .points
                .iter()
                .filter_map(|&(a1, a2)| {
                    let row = s.axis2_index(a2).round();
                    (row >= 0.0 && row < n as f64).then(|| (row as usize, s.axis1_index(a1).rem_euclid(n as f64)))
                })
                .collect();
            (c.id, points)
        })
        .collect()
}

/// Rows ordered by distance of their centre from zero momentum.
fn rows_from_zero(s: &SectionSpec) -> Vec<usize> {
    let mut rows: Vec<usize> = (0..s.resolution).collect();
    rows.sort_by(|&a, &b| s.axis2_value(a).abs().total_cmp(&s.axis2_value(b).abs()).then(a.cmp(&b)));
    rows
}

/// The pair of chains bracketing column position `c` in the nearest row to
/// zero momentum that has two distinct chains on either side.
fn bracket(chains: &[(usize, HashMap<usize, f64>)], s: &SectionSpec, c: f64) -> Option<(usize, usize)> {
    let n = s.resolution as f64;
    for row in rows_from_zero(s) {
        let mut left: Option<(f64, usize)> = None;
        let mut right: Option<(f64, usize)> = None;
        for (k, (_, rows)) in chains.iter().enumerate() {
            let Some(&pos) = rows.get(&row) else { continue };
            let dl = (c - pos).rem_euclid(n);
            let dr = (pos - c).rem_euclid(n);
            if dl > 0.0 && left.map_or(true, |(d, _)| dl < d) {
                left = Some((dl, k));
            }
            if dr > 0.0 && right.map_or(true, |(d, _)| dr < d) {
                right = Some((dr, k));
            }
        }
        if let (Some((_, l)), Some((_, r))) = (left, right) {
            if l != r {
                return Some((l, r));
            }
        }
    }
    None
}

/// Superpose W_i^u (from the ridge trace) and W_o^s (from the minima trace).
///
/// The region of W_i^u is the set of cells lying, row by row, between the two
/// S-shapes that bracket θ = 0 closest to p_θ = 0; the same construction at
/// θ = π gives its symmetric copy. The band of W_o^s is, column by column,
/// the cells strictly between the lowest and highest trace points. A
/// nonempty overlap signals that the manifolds intersect.
pub fn intersection_overlay(inner: &ManifoldTrace, outer: &ManifoldTrace) -> Result<OverlayReport> {
    let s = &inner.section;
    if *s != outer.section {
        return Err(Error::InvalidParameter("traces come from different sections".into()));
    }
    if !s.periodic_axis1() {
        return Err(Error::InvalidParameter("the overlay needs the radial section".into()));
    }
    if inner.count(TraceLabel::InnerUnstable) == 0 {
        return Err(Error::Extraction("no W_i^u chains to overlay".into()));
    }
    if outer.count(TraceLabel::OuterStable) == 0 {
        return Err(Error::Extraction("no W_o^s chains to overlay".into()));
    }
    let n = s.resolution;
    let nf = n as f64;

    let s_chains: Vec<(usize, HashMap<usize, f64>)> = grid_points(inner, TraceLabel::InnerUnstable)
        .into_iter()
        .map(|(id, points)| (id, points.into_iter().collect()))
        .collect();
    let mut well_region = vec![false; n * n];
    let mut bounding_chains = Vec::new();
    for theta in [0.0, PI] {
        let c = s.axis1_index(theta).rem_euclid(nf);
        let Some((l, r)) = bracket(&s_chains, s, c) else { continue };
        bounding_chains.push((s_chains[l].0, s_chains[r].0));
        for (&row, &el) in &s_chains[l].1 {
            let Some(&er) = s_chains[r].1.get(&row) else { continue };
            let width = (er - el).rem_euclid(nf);
            for col in 0..n {
                let offset = (col as f64 - el).rem_euclid(nf);
                if offset > 0.0 && offset < width {
                    well_region[row * n + col] = true;
                }
            }
        }
    }

    let mut band = vec![false; n * n];
    let mut rows_by_col: Vec<Vec<f64>> = vec![Vec::new(); n];
    for (_, points) in grid_points(outer, TraceLabel::OuterStable) {
        for (row, col) in points {
            let col = col.round().rem_euclid(nf) as usize;
            rows_by_col[col].push(row as f64);
        }
    }
    for (col, rows) in rows_by_col.iter().enumerate() {
        if rows.len() < 2 {
            continue;
        }
        let lo = rows.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = rows.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for row in 0..n {
            let r = row as f64;
            if r > lo && r < hi {
                band[row * n + col] = true;
            }
        }
    }

    let overlap: Vec<bool> = well_region.iter().zip(&band).map(|(&a, &b)| a && b).collect();
    let half_turn_symmetric = s.half_turn_shift().map(|shift| {
        (0..n).all(|row| (0..n).all(|col| overlap[row * n + col] == overlap[row * n + (col + shift) % n]))
    });
    Ok(OverlayReport { resolution: n, well_region, band, overlap, bounding_chains, half_turn_symmetric })
}
