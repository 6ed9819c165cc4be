//! Range labels for missing pixels by minimizing local costs over a discrete
//! label set.
//!
//! * Segments with a plane fit label each missing pixel `p` with
//!   `argmin_z |z - z_pl(p)| + λ_p Σ_{q ∈ V_p} |z - z_q|`, where `V_p` are the
//!   visible 8-neighbors of `p` in the same segment.
//! * Segments with too few visible pixels for a plane receive one label,
//!   `argmin_z |z - z_m| + Σ_a w_a |z - z_{m_a}|`, with `z_m` the median of the
//!   segment's visible values, `z_{m_a}` those of its adjacent segments and
//!   `w_a = λ_m / Σ|mean color difference|`.
//!
//! Both costs are convex and piecewise linear in `z`, so every label below the
//! smallest breakpoint or above the largest one is strictly worse than the
//! label bracketing it. The scan covers exactly that bracket; ties resolve to
//! the smaller label.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planefit::Plane;
use crate::raster::{
    neighbors, Neighborhood, PixelState, RangeImage, SegmentMap, SegmentStats, VisibilityMask,
    VisibilityPolicy,
};

/// Ascending, duplicate-free candidate range values.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    labels: Vec<f32>,
}

impl LabelSet {
    /// Sorts and deduplicates `values`. Fails on an empty or non-finite input.
    pub fn from_values(mut values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("label set has no values"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("label values must be finite"));
        }
        values.sort_by(f32::total_cmp);
        values.dedup();
        Ok(Self { labels: values })
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn contains(&self, v: f32) -> bool {
        self.labels.binary_search_by(|l| l.total_cmp(&v)).is_ok()
    }

    /// Labels in `[lo, hi]` widened by the nearest label outside on each side.
    fn bracket(&self, lo: f64, hi: f64) -> &[f32] {
        let start = self
            .labels
            .partition_point(|l| f64::from(*l) <= lo)
            .saturating_sub(1);
        let end = (self.labels.partition_point(|l| f64::from(*l) < hi) + 1).min(self.labels.len());
        &self.labels[start..end.max(start + 1)]
    }
}

/// Every observed value plus a uniform grid of step `quant` spanning the
/// observed range.
pub fn build_label_set(range: &RangeImage, mask: &VisibilityMask, quant: f64) -> Result<LabelSet> {
    if !(quant.is_finite() && quant > 0.0) {
        return Err(Error::param(format!(
            "label quantization must be > 0, got {quant}"
        )));
    }
    let observed: Vec<f32> = range
        .data()
        .iter()
        .zip(mask.states())
        .filter(|(_, s)| **s == PixelState::Observed)
        .map(|(v, _)| *v)
        .collect();
    if observed.is_empty() {
        return Err(Error::EmptyInput("no observed range pixels"));
    }
    let lo = observed.iter().copied().fold(f32::INFINITY, f32::min);
    let hi = observed.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let steps = ((f64::from(hi) - f64::from(lo)) / quant).floor() as usize;
    let mut values = observed;
    values.extend((0..=steps).map(|k| (f64::from(lo) + k as f64 * quant) as f32));
    LabelSet::from_values(values)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Weight of the neighbor smoothness term in the planar cost.
    pub lambda_p: f64,
    /// Numerator of the contextual weight between adjacent segments.
    pub lambda_m: f64,
    /// Minimum visible pixels for the plane-fit path.
    pub n_pl: usize,
    /// Lower bound on the color distance in the contextual weight.
    pub color_eps: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self {
            lambda_p: 0.5,
            lambda_m: 1.0,
            n_pl: 9,
            color_eps: 1.0,
        }
    }
}

impl CostParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_p.is_finite() && self.lambda_p >= 0.0) {
            return Err(Error::param("lambda_p must be >= 0"));
        }
        if !(self.lambda_m.is_finite() && self.lambda_m >= 0.0) {
            return Err(Error::param("lambda_m must be >= 0"));
        }
        if self.n_pl < 3 {
            return Err(Error::param("n_pl must be >= 3"));
        }
        if !(self.color_eps.is_finite() && self.color_eps > 0.0) {
            return Err(Error::param("color_eps must be > 0"));
        }
        Ok(())
    }
}

#[inline]
pub fn planar_cost(z: f64, z_pl: f64, neighbor_zs: &[f64], lambda_p: f64) -> f64 {
    (z - z_pl).abs() + lambda_p * neighbor_zs.iter().map(|q| (z - q).abs()).sum::<f64>()
}

/// `λ_m / max(color_eps, L1 distance of the mean colors)`.
#[inline]
pub fn context_weight(mean_s: [f64; 3], mean_a: [f64; 3], lambda_m: f64, color_eps: f64) -> f64 {
    let l1: f64 = (0..3).map(|c| (mean_s[c] - mean_a[c]).abs()).sum();
    lambda_m / l1.max(color_eps)
}

/// `adj` holds `(z_ma, w_a)` for every adjacent segment with visible data.
#[inline]
pub fn median_cost(z: f64, z_m: f64, adj: &[(f64, f64)]) -> f64 {
    (z - z_m).abs() + adj.iter().map(|(z_a, w)| w * (z - z_a).abs()).sum::<f64>()
}

fn argmin_label(candidates: &[f32], cost: impl Fn(f64) -> f64) -> f32 {
    let mut best = candidates[0];
    let mut best_cost = cost(f64::from(best));
    for &z in &candidates[1..] {
        let c = cost(f64::from(z));
        if c < best_cost {
            best = z;
            best_cost = c;
        }
    }
    best
}

/// Minimizer of [`planar_cost`] over `labels`, ties toward the smaller label.
pub fn best_planar_label(labels: &LabelSet, z_pl: f64, neighbor_zs: &[f64], lambda_p: f64) -> f32 {
    let (lo, hi) = neighbor_zs
        .iter()
        .fold((z_pl, z_pl), |(lo, hi), q| (lo.min(*q), hi.max(*q)));
    argmin_label(labels.bracket(lo, hi), |z| {
        planar_cost(z, z_pl, neighbor_zs, lambda_p)
    })
}

/// Minimizer of [`median_cost`] over `labels`, ties toward the smaller label.
pub fn best_median_label(labels: &LabelSet, z_m: f64, adj: &[(f64, f64)]) -> f32 {
    let (lo, hi) = adj
        .iter()
        .fold((z_m, z_m), |(lo, hi), (z, _)| (lo.min(*z), hi.max(*z)));
    argmin_label(labels.bracket(lo, hi), |z| median_cost(z, z_m, adj))
}

/// Lower median (element `(n-1)/2` of the sorted values).
pub fn lower_median(values: &mut [f32]) -> Option<f32> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f32::total_cmp);
    Some(values[(values.len() - 1) / 2])
}

/// Snapshot of one labeling pass. Every assignment reads only this frozen
/// state, so segments can be processed in any order.
pub struct PassContext<'a> {
    pub range: &'a RangeImage,
    pub mask: &'a VisibilityMask,
    pub segments: &'a SegmentMap,
    pub stats: &'a [SegmentStats],
    pub members: &'a [Vec<usize>],
    pub policy: VisibilityPolicy,
    pub neighborhood: Neighborhood,
    medians: Vec<Option<f32>>,
}

impl<'a> PassContext<'a> {
    pub fn new(
        range: &'a RangeImage,
        mask: &'a VisibilityMask,
        segments: &'a SegmentMap,
        stats: &'a [SegmentStats],
        members: &'a [Vec<usize>],
        policy: VisibilityPolicy,
        neighborhood: Neighborhood,
    ) -> Self {
        let medians = members
            .iter()
            .map(|pixels| {
                let mut vals: Vec<f32> = pixels
                    .iter()
                    .filter(|&&i| policy.admits(mask.at(i)))
                    .map(|&i| range.data()[i])
                    .collect();
                lower_median(&mut vals)
            })
            .collect();
        Self {
            range,
            mask,
            segments,
            stats,
            members,
            policy,
            neighborhood,
            medians,
        }
    }

    /// Lower median of the visible values of `seg`, if it has any.
    pub fn median(&self, seg: u32) -> Option<f32> {
        self.medians[seg as usize]
    }

    /// `(x, y, z)` of every visible pixel of `seg`, row-major.
    pub fn visible_samples(&self, seg: u32) -> Vec<(usize, usize, f32)> {
        let w = self.range.width();
        self.members[seg as usize]
            .iter()
            .filter(|&&i| self.policy.admits(self.mask.at(i)))
            .map(|&i| (i % w, i / w, self.range.data()[i]))
            .collect()
    }

    pub fn missing_pixels(&self, seg: u32) -> impl Iterator<Item = usize> + '_ {
        self.members[seg as usize]
            .iter()
            .copied()
            .filter(|&i| self.mask.at(i) == PixelState::Missing)
    }

    /// Values of the visible neighbors of pixel `index` inside `seg`.
    pub fn visible_neighbor_values(&self, index: usize, seg: u32) -> Vec<f64> {
        let (w, h) = self.range.dims();
        neighbors(index % w, index / w, w, h, self.neighborhood)
            .filter(|&(x, y)| {
                self.segments.id(x, y) == seg && self.policy.admits(self.mask.get(x, y))
            })
            .map(|(x, y)| f64::from(self.range.get(x, y)))
            .collect()
    }

    /// Per-pixel planar-cost labels for every missing pixel of `seg`.
    pub fn assign_planar_segment(
        &self,
        seg: u32,
        plane: &Plane,
        labels: &LabelSet,
        lambda_p: f64,
    ) -> Vec<(usize, f32)> {
        let w = self.range.width();
        self.missing_pixels(seg)
            .map(|i| {
                let z_pl = plane.eval((i % w) as f64, (i / w) as f64);
                let nbrs = self.visible_neighbor_values(i, seg);
                (i, best_planar_label(labels, z_pl, &nbrs, lambda_p))
            })
            .collect()
    }

    /// `(z_ma, w_a)` for the adjacent segments of `seg` that have visible data.
    pub fn adjacent_terms(&self, seg: u32, p: &CostParams) -> Vec<(f64, f64)> {
        let own = &self.stats[seg as usize];
        own.adjacency
            .iter()
            .filter_map(|&a| {
                let z = self.medians[a as usize]?;
                let w = context_weight(
                    own.mean_rgb,
                    self.stats[a as usize].mean_rgb,
                    p.lambda_m,
                    p.color_eps,
                );
                Some((f64::from(z), w))
            })
            .collect()
    }

    /// The single median-cost label of `seg`, or `None` if it has no visible
    /// pixels.
    pub fn median_segment_label(&self, seg: u32, labels: &LabelSet, p: &CostParams) -> Option<f32> {
        let z_m = self.medians[seg as usize]?;
        let adj = self.adjacent_terms(seg, p);
        Some(best_median_label(labels, f64::from(z_m), &adj))
    }

    /// Assigns the median-cost label to every missing pixel of `seg`.
    pub fn assign_median_segment(
        &self,
        seg: u32,
        labels: &LabelSet,
        p: &CostParams,
    ) -> Vec<(usize, f32)> {
        match self.median_segment_label(seg, labels, p) {
            Some(z) => self.missing_pixels(seg).map(|i| (i, z)).collect(),
            None => Vec::new(),
        }
    }
}
