//! Manifold traces read off descriptor fields: valleys of LD_o along p at
//! fixed angle, and steep edges of the clamped LD_i field along θ.

use std::f64::consts::FRAC_PI_2;

use super::field::LDField;
use super::section::SectionSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraceLabel {
    InnerUnstable,
    OuterStable,
    AxisAsymptotic,
}

impl TraceLabel {
    pub fn name(self) -> &'static str {
        match self {
            TraceLabel::InnerUnstable => "W_i^u",
            TraceLabel::OuterStable => "W_o^s",
            TraceLabel::AxisAsymptotic => "axis-asymptotic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "W_i^u" => Some(TraceLabel::InnerUnstable),
            "W_o^s" => Some(TraceLabel::OuterStable),
            "axis-asymptotic" => Some(TraceLabel::AxisAsymptotic),
            _ => None,
        }
    }
}

/// A connected run of extracted points, in section coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceChain {
    pub id: usize,
    pub label: TraceLabel,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldTrace {
    pub section: SectionSpec,
    /// "minima" or "gradient-ridges".
    pub method: String,
    /// Clamp level applied before differencing, if any.
    pub cutoff: Option<f64>,
    pub tau: f64,
    pub chains: Vec<TraceChain>,
}

impl ManifoldTrace {
    pub fn count(&self, label: TraceLabel) -> usize {
        self.chains.iter().filter(|c| c.label == label).count()
    }

    pub fn labeled(&self, label: TraceLabel) -> impl Iterator<Item = &TraceChain> + '_ {
        self.chains.iter().filter(move |c| c.label == label)
    }

    pub fn point_count(&self) -> usize {
        self.chains.iter().map(|c| c.points.len()).sum()
    }
}

/// A strict interior local minimum of a profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileMinimum {
    pub index: usize,
    pub value: f64,
    /// Depth below the lower of the two bounding peaks.
    pub prominence: f64,
}

/// Strict interior local minima whose prominence is at least
/// `prominence_fraction` of the finite range of the profile. Non-finite
/// samples end the search for a bounding peak, like the ends of the profile.
pub fn profile_minima(values: &[f64], prominence_fraction: f64) -> Vec<ProfileMinimum> {
    let finite = values.iter().copied().filter(|v| v.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        return Vec::new();
    }
    let threshold = prominence_fraction * (hi - lo);
    let n = values.len();
    let mut out = Vec::new();
    for j in 1..n.saturating_sub(1) {
        let (a, v, b) = (values[j - 1], values[j], values[j + 1]);
        if !(a.is_finite() && v.is_finite() && b.is_finite()) || !(v < a && v < b) {
            continue;
        }
        let peak = |step: isize| {
            let mut k = j as isize;
            let mut top = v;
            loop {
                k += step;
                if k < 0 || k >= n as isize || !values[k as usize].is_finite() {
                    break;
                }
                let w = values[k as usize];
                if w < v {
                    break;
                }
                top = top.max(w);
            }
            top
        };
        let prominence = peak(-1).min(peak(1)) - v;
        if prominence >= threshold {
            out.push(ProfileMinimum { index: j, value: v, prominence });
        }
    }
    out
}

/// Link per-line candidate positions into chains. Lines are visited in order
/// and every open chain is extended by the nearest candidate on the next line
/// within `jump`; conflicts go to the closest pair first. With
/// `periodic_positions` distances wrap modulo `n`.
fn link(lines: &[Vec<f64>], n: usize, periodic_positions: bool, jump: f64) -> Vec<Vec<(usize, f64)>> {
    let distance = |a: f64, b: f64| {
        let d = (a - b).abs();
        if periodic_positions {
            d.min(n as f64 - d)
        } else {
            d
        }
    };
    let mut done: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut open: Vec<Vec<(usize, f64)>> = Vec::new();
    for (line, candidates) in lines.iter().enumerate() {
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (k, chain) in open.iter().enumerate() {
            let last = chain[chain.len() - 1].1;
            for (i, &c) in candidates.iter().enumerate() {
                let d = distance(c, last);
                if d <= jump + 1e-9 {
                    pairs.push((d, k, i));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut chain_used = vec![false; open.len()];
        let mut cand_used = vec![false; candidates.len()];
        for (_, k, i) in pairs {
            if chain_used[k] || cand_used[i] {
                continue;
            }
            chain_used[k] = true;
            cand_used[i] = true;
            open[k].push((line, candidates[i]));
        }
        let mut next = Vec::with_capacity(open.len() + candidates.len());
        for (k, chain) in open.into_iter().enumerate() {
            if chain_used[k] {
                next.push(chain);
            } else {
                done.push(chain);
            }
        }
        for (i, &c) in candidates.iter().enumerate() {
            if !cand_used[i] {
                next.push(vec![(line, c)]);
            }
        }
        open = next;
    }
    done.extend(open);
    done.sort_by(|a, b| a[0].0.cmp(&b[0].0).then(a[0].1.total_cmp(&b[0].1)));
    done
}

/// Join chains that run off the last line onto chains starting on line 0.
fn close_periodic_lines(mut chains: Vec<Vec<(usize, f64)>>, lines: usize, jump: f64) -> Vec<Vec<(usize, f64)>> {
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for (a, ca) in chains.iter().enumerate() {
            let (last_line, last_pos) = ca[ca.len() - 1];
            if last_line != lines - 1 {
                continue;
            }
            for (b, cb) in chains.iter().enumerate() {
                if a == b || cb[0].0 != 0 {
                    continue;
                }
                let d = (cb[0].1 - last_pos).abs();
                if d <= jump + 1e-9 && best.map_or(true, |(bd, _, _)| d < bd) {
                    best = Some((d, a, b));
                }
            }
        }
        let Some((_, a, b)) = best else { return chains };
        let tail = chains[b].clone();
        chains[a].extend(tail);
        chains.remove(b);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimaOptions {
    /// Minimum prominence as a fraction of each column's finite range.
    pub prominence_fraction: f64,
    /// Largest row jump between neighbouring columns within a chain.
    pub jump: usize,
    /// Chains with fewer points are dropped.
    pub min_chain: usize,
}

impl Default for MinimaOptions {
    fn default() -> Self {
        Self { prominence_fraction: 0.1, jump: 3, min_chain: 10 }
    }
}

/// W_o^s from an LD_o field: in every column the most prominent surviving
/// minimum on each side of zero momentum, linked across columns into one
/// trace per momentum sign.
pub fn extract_minima(field: &LDField, options: &MinimaOptions) -> Result<ManifoldTrace> {
    let s = &field.section;
    let n = s.resolution;
    let mut halves = [vec![Vec::new(); n], vec![Vec::new(); n]];
    let mut found = 0usize;
    for i in 0..n {
        let minima = profile_minima(&field.column(i), options.prominence_fraction);
        found += minima.len();
        for (side, half) in halves.iter_mut().enumerate() {
            let best = minima
                .iter()
                .filter(|m| (s.axis2_value(m.index) >= 0.0) == (side == 1))
                .max_by(|a, b| a.prominence.total_cmp(&b.prominence).then(b.value.total_cmp(&a.value)));
            if let Some(m) = best {
                half[i].push(m.index as f64);
            }
        }
    }
    if found == 0 {
        return Err(Error::Extraction("no interior minima in any column".into()));
    }
    let mut chains = Vec::new();
    for half in &halves {
        let mut linked = link(half, n, false, options.jump as f64);
        if s.periodic_axis1() {
            linked = close_periodic_lines(linked, n, options.jump as f64);
        }
        for c in linked.into_iter().filter(|c| c.len() >= options.min_chain) {
            let points = c.iter().map(|&(col, row)| (s.axis1_value(col), s.axis2_value(row as usize))).collect();
            chains.push(TraceChain { id: chains.len(), label: TraceLabel::OuterStable, points });
        }
    }
    Ok(ManifoldTrace { section: *s, method: "minima".into(), cutoff: None, tau: field.descriptor.tau, chains })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeOptions {
    /// Clamp level as a fraction of the way from the minimum to the maximum.
    pub cutoff_fraction: f64,
    /// Sub-cutoff runs separated by clamped gaps no wider than this fraction
    /// of the row (rounded up to whole cells) count as one band.
    pub merge_fraction: f64,
    /// Largest column jump between neighbouring rows within a chain.
    pub jump: usize,
    pub min_chain: usize,
}

impl RidgeOptions {
    pub fn merge_gap(&self, resolution: usize) -> usize {
        (self.merge_fraction * resolution as f64 - 1e-9).ceil().max(0.0) as usize
    }
}

impl Default for RidgeOptions {
    fn default() -> Self {
        Self { cutoff_fraction: 0.5, merge_fraction: 0.03, jump: 3, min_chain: 10 }
    }
}

/// Chain counts from a ridge extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RidgeCensus {
    /// Per-row maxima of |Δ_θ| over the whole field.
    pub maxima: usize,
    /// Chains along band edges, reported as W_i^u.
    pub edge_chains: usize,
    /// Chains of maxima inside the bands.
    pub interior_chains: usize,
    /// Interior chains reaching an axis point (π/2, 0) or (3π/2, 0).
    pub axis_asymptotic: usize,
    /// Chains shorter than the minimum length.
    pub discarded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeExtraction {
    pub trace: ManifoldTrace,
    pub census: RidgeCensus,
}

impl RidgeExtraction {
    pub fn s_shapes(&self) -> usize {
        self.trace.count(TraceLabel::InnerUnstable)
    }

    pub fn warning(&self) -> Option<String> {
        let c = &self.census;
        (self.s_shapes() < 4).then(|| {
            format!(
                "expected four S-shaped chains, found {} (maxima {}, interior chains {}, axis-asymptotic {}, discarded {})",
                c.edge_chains, c.maxima, c.interior_chains, c.axis_asymptotic, c.discarded
            )
        })
    }
}

/// Runs of `true` as inclusive (start, end) pairs; on a periodic row a run
/// may wrap, in which case start > end.
fn runs(mask: &[bool], periodic: bool, merge_gap: usize) -> Vec<(usize, usize)> {
    let n = mask.len();
    let mut out: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < n {
        if mask[i] {
            let start = i;
            while i < n && mask[i] {
                i += 1;
            }
            match out.last_mut() {
                Some(last) if start - last.1 - 1 <= merge_gap => last.1 = i - 1,
                _ => out.push((start, i - 1)),
            }
        } else {
            i += 1;
        }
    }
    if periodic && out.len() > 1 {
        let (first, last) = (out[0], out[out.len() - 1]);
        if first.0 + n - last.1 - 1 <= merge_gap {
            out.pop();
            out[0] = (last.0, first.1);
        }
    }
    out
}

/// W_i^u from an LD_i field on the radial section.
///
/// Values above the cutoff are clamped and the first difference along θ is
/// taken in every row. The largest jumps of |Δ_θ| sit where a sub-cutoff band
/// meets the clamped plateau, and these band edges are chained across rows.
/// The remaining per-row maxima, strictly inside bands, are chained
/// separately and kept only when they run into one of the axis points
/// (π/2, 0), (3π/2, 0).
pub fn extract_gradient_ridges(field: &LDField, options: &RidgeOptions) -> Result<RidgeExtraction> {
    if !(options.cutoff_fraction > 0.0 && options.cutoff_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "cutoff fraction must lie in (0, 1], got {}",
            options.cutoff_fraction
        )));
    }
    let s = &field.section;
    let n = s.resolution;
    let periodic = s.periodic_axis1();
    let (lo, hi) = field.finite_range().ok_or_else(|| Error::Extraction("field has no finite values".into()))?;
    let cutoff = lo + options.cutoff_fraction * (hi - lo);
    let diffs = if periodic { n } else { n - 1 };
    let merge_gap = options.merge_gap(n);

    let mut edge_lines = vec![Vec::new(); n];
    let mut interior_lines = vec![Vec::new(); n];
    let mut census = RidgeCensus::default();
    for j in 0..n {
        let row = field.row(j);
        let clamped: Vec<f64> = row.iter().map(|&v| if v.is_finite() { v.min(cutoff) } else { cutoff }).collect();
        let d: Vec<f64> = (0..diffs).map(|k| (clamped[(k + 1) % n] - clamped[k]).abs()).collect();
        let at = |k: isize| -> f64 {
            if periodic {
                d[k.rem_euclid(diffs as isize) as usize]
            } else if k < 0 || k >= diffs as isize {
                0.0
            } else {
                d[k as usize]
            }
        };
        let is_max = |k: usize| d[k] > 0.0 && d[k] >= at(k as isize - 1) && d[k] > at(k as isize + 1);
        let maxima: Vec<usize> = (0..diffs).filter(|&k| is_max(k)).collect();
        census.maxima += maxima.len();

        let low: Vec<bool> = row.iter().map(|&v| v.is_finite() && v < cutoff).collect();
        let mut edges = Vec::new();
        for (a, b) in runs(&low, periodic, merge_gap) {
            let width = if b >= a { b - a + 1 } else { b + n - a + 1 };
            if width >= n {
                continue;
            }
            // difference index k separates cells k and k + 1
            if periodic || a > 0 {
                edges.push((a + n - 1) % n);
            }
            if periodic || b < n - 1 {
                edges.push(b);
            }
        }
        edges.sort_unstable();
        edges.dedup();
        interior_lines[j] = maxima.iter().filter(|k| !edges.contains(k)).map(|&k| k as f64 + 0.5).collect();
        edge_lines[j] = edges.into_iter().map(|k| k as f64 + 0.5).collect();
    }

    let jump = options.jump as f64;
    let to_points = |c: &[(usize, f64)]| -> Vec<(f64, f64)> {
        c.iter().map(|&(row, pos)| (s.axis1_at(pos), s.axis2_value(row))).collect()
    };
    let mut chains = Vec::new();
    for c in link(&edge_lines, n, periodic, jump) {
        if c.len() < options.min_chain {
            census.discarded += 1;
            continue;
        }
        census.edge_chains += 1;
        chains.push(TraceChain { id: chains.len(), label: TraceLabel::InnerUnstable, points: to_points(&c) });
    }
    let axis_points: Vec<(f64, f64)> = if periodic {
        [FRAC_PI_2, 3.0 * FRAC_PI_2]
            .iter()
            .filter(|&&t| t >= s.axis1.0 && t < s.axis1.1)
            .map(|&t| (s.axis1_index(t), s.axis2_index(0.0)))
            .collect()
    } else {
        Vec::new()
    };
    for c in link(&interior_lines, n, periodic, jump) {
        if c.len() < options.min_chain {
            census.discarded += 1;
            continue;
        }
        census.interior_chains += 1;
        let near_axis = c.iter().any(|&(row, pos)| {
            axis_points.iter().any(|&(ac, ar)| {
                let dc = (pos - ac).abs();
                let dc = if periodic { dc.min(n as f64 - dc) } else { dc };
                dc.max((row as f64 - ar).abs()) <= jump
            })
        });
        if near_axis {
            census.axis_asymptotic += 1;
            chains.push(TraceChain { id: chains.len(), label: TraceLabel::AxisAsymptotic, points: to_points(&c) });
        }
    }
    let trace = ManifoldTrace {
        section: *s,
        method: "gradient-ridges".into(),
        cutoff: Some(cutoff),
        tau: field.descriptor.tau,
        chains,
    };
    Ok(RidgeExtraction { trace, census })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prominence_ignores_shallow_wiggles() {
        let v = [5.0, 3.0, 4.0, 3.9, 4.1, 1.0, 6.0];
        let all = profile_minima(&v, 0.0);
        assert_eq!(all.iter().map(|m| m.index).collect::<Vec<_>>(), vec![1, 3, 5]);
        assert!((all[1].prominence - 0.1).abs() < 1e-12);
        let strong = profile_minima(&v, 0.1);
        assert_eq!(strong.iter().map(|m| m.index).collect::<Vec<_>>(), vec![1, 5]);
    }

    #[test]
    fn plateau_is_not_a_strict_minimum() {
        assert!(profile_minima(&[2.0, 1.0, 1.0, 2.0], 0.0).is_empty());
        assert!(profile_minima(&[1.0, 1.0, 1.0], 0.0).is_empty());
    }

    #[test]
    fn nonfinite_cells_bound_the_search() {
        let v = [f64::NAN, 2.0, 1.0, 3.0, f64::INFINITY];
        let m = profile_minima(&v, 0.0);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].prominence, 1.0);
    }

    #[test]
    fn linking_follows_nearest_and_respects_jump() {
        let lines = vec![vec![1.0, 10.0], vec![2.0, 14.5], vec![3.0, 15.0]];
        let chains = link(&lines, 20, false, 3.0);
        assert_eq!(chains.len(), 3);
        assert_eq!(chains[0], vec![(0, 1.0), (1, 2.0), (2, 3.0)]);
    }

    #[test]
    fn linking_wraps_periodic_positions() {
        let lines = vec![vec![19.5], vec![0.5], vec![1.5]];
        assert_eq!(link(&lines, 20, true, 3.0).len(), 1);
        assert_eq!(link(&lines, 20, false, 3.0).len(), 2);
    }

    #[test]
    fn runs_merge_small_gaps_and_wrap() {
        let m = [true, false, true, false, false, false, false, true];
        assert_eq!(runs(&m, false, 1), vec![(0, 2), (7, 7)]);
        assert_eq!(runs(&m, true, 1), vec![(7, 2)]);
        assert_eq!(runs(&m, true, 0), vec![(7, 0), (2, 2)]);
    }
}
