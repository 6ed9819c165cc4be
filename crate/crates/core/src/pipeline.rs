//! The iterative super-resolution loop.
//!
//! Each pass segments the color guide with bandwidths grown by `bw_growth`,
//! then labels the missing pixels of every segment that holds visible data:
//! plane fit plus per-pixel cost when it has at least `n_pl` visible pixels,
//! a single median-cost label otherwise. Coarser segmentations in later
//! passes absorb segments that had no data earlier. Labels are final once
//! assigned.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::{build_label_set, CostParams, LabelSet, PassContext};
use crate::lift::{lift_sparse, Anchor, SrFactor};
use crate::meanshift::{segment, MsParams};
use crate::planefit::{ransac_plane, RansacParams, Sample};
use crate::raster::{
    segment_stats, ColorImage, Neighborhood, PixelState, RangeImage, VisibilityMask,
    VisibilityPolicy,
};

/// Passes beyond this count are worth a note: complete labeling normally
/// takes four or five.
pub const TYPICAL_MAX_PASSES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrConfig {
    pub factor: SrFactor,
    pub anchor: Anchor,
    /// Segmentation parameters of the first pass.
    pub ms: MsParams,
    pub bw_growth: f64,
    pub max_passes: usize,
    pub cost: CostParams,
    pub ransac: RansacParams,
    pub visibility: VisibilityPolicy,
    pub neighborhood: Neighborhood,
    /// Grid step of the label set, range levels.
    pub quant: f64,
}

impl Default for SrConfig {
    fn default() -> Self {
        Self {
            factor: SrFactor::new(4).expect("4 is a valid factor"),
            anchor: Anchor::TopLeft,
            ms: MsParams::default(),
            bw_growth: 1.25,
            max_passes: 8,
            cost: CostParams::default(),
            ransac: RansacParams::default(),
            visibility: VisibilityPolicy::ObservedOnly,
            neighborhood: Neighborhood::Eight,
            quant: 1.0,
        }
    }
}

impl SrConfig {
    pub fn validate(&self) -> Result<()> {
        self.ms.validate()?;
        self.cost.validate()?;
        if !(self.bw_growth.is_finite() && self.bw_growth > 1.0) {
            return Err(Error::param(format!(
                "bw_growth must be > 1, got {}",
                self.bw_growth
            )));
        }
        if self.max_passes < 1 {
            return Err(Error::param("max_passes must be >= 1"));
        }
        if self.ransac.iters < 1 {
            return Err(Error::param("ransac.iters must be >= 1"));
        }
        if !(self.ransac.inlier_tol.is_finite() && self.ransac.inlier_tol > 0.0) {
            return Err(Error::param("ransac.inlier_tol must be > 0"));
        }
        if !(self.ransac.min_inlier_frac > 0.0 && self.ransac.min_inlier_frac <= 1.0) {
            return Err(Error::param("ransac.min_inlier_frac must be in (0, 1]"));
        }
        if !(self.quant.is_finite() && self.quant > 0.0) {
            return Err(Error::param("quant must be > 0"));
        }
        Ok(())
    }
}

/// Segmentation parameters for pass `k`: both bandwidths and the minimum
/// region size scaled by `growth^k`.
pub fn bandwidth_schedule(ms0: &MsParams, growth: f64, k: usize) -> MsParams {
    let g = growth.powi(k as i32);
    MsParams {
        spatial: ms0.spatial * g,
        color: ms0.color * g,
        min_region: (ms0.min_region as f64 * g).ceil() as usize,
        ..*ms0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassReport {
    pub pass: usize,
    pub spatial_bandwidth: f64,
    pub color_bandwidth: f64,
    pub segments: usize,
    pub planar_segments: usize,
    pub median_segments: usize,
    pub labeled: usize,
    pub missing: usize,
}

impl fmt::Display for PassReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "pass {} h_s={:.4} h_r={:.4} segments={} planar={} median={} labeled={} missing={}",
            self.pass,
            self.spatial_bandwidth,
            self.color_bandwidth,
            self.segments,
            self.planar_segments,
            self.median_segments,
            self.labeled,
            self.missing
        )
    }
}

#[derive(Debug, Clone)]
pub struct SrOutput {
    pub range: RangeImage,
    pub mask: VisibilityMask,
    pub passes: Vec<PassReport>,
    /// Pixels still missing after `max_passes`, filled from the nearest
    /// labeled pixel. Zero when the loop completed on its own.
    pub fallback_pixels: usize,
    pub labels: LabelSet,
}

impl SrOutput {
    pub fn completed_without_fallback(&self) -> bool {
        self.fallback_pixels == 0
    }
}

/// Super-resolves `lr` onto the grid of `color`.
pub fn super_resolve(lr: &RangeImage, color: &ColorImage, cfg: &SrConfig) -> Result<SrOutput> {
    cfg.validate()?;
    let (w, h) = (color.width(), color.height());
    let (range, mask) = lift_sparse(lr, cfg.factor, w, h, cfg.anchor)?;
    complete_sparse(range, mask, color, cfg)
}

/// Fills every `Missing` pixel of a sparse HR range image.
pub fn complete_sparse(
    mut range: RangeImage,
    mut mask: VisibilityMask,
    color: &ColorImage,
    cfg: &SrConfig,
) -> Result<SrOutput> {
    cfg.validate()?;
    let dims = range.dims();
    for found in [
        (color.width(), color.height()),
        (mask.width(), mask.height()),
    ] {
        if found != dims {
            return Err(Error::Size {
                expected: dims,
                found,
            });
        }
    }
    let labels = build_label_set(&range, &mask, cfg.quant)?;
    let mut missing = mask.count(PixelState::Missing);
    let mut passes = Vec::new();

    for k in 0..cfg.max_passes {
        if missing == 0 {
            break;
        }
        let ms = bandwidth_schedule(&cfg.ms, cfg.bw_growth, k);
        let segments = segment(color, &ms)?;
        let stats = segment_stats(&segments, color, &mask, cfg.visibility)?;
        let members = segments.members();
        let ctx = PassContext::new(
            &range,
            &mask,
            &segments,
            &stats,
            &members,
            cfg.visibility,
            cfg.neighborhood,
        );

        let results: Vec<(Path, Vec<(usize, f32)>)> = (0..segments.len() as u32)
            .into_par_iter()
            .map(|s| label_segment(&ctx, s, &labels, cfg))
            .collect();

        let mut report = PassReport {
            pass: k,
            spatial_bandwidth: ms.spatial,
            color_bandwidth: ms.color,
            segments: segments.len(),
            planar_segments: 0,
            median_segments: 0,
            labeled: 0,
            missing: 0,
        };
        for (path, assigned) in results {
            match path {
                Path::Planar => report.planar_segments += 1,
                Path::Median => report.median_segments += 1,
                Path::Skipped => {}
            }
            for (i, z) in assigned {
                debug_assert_eq!(mask.at(i), PixelState::Missing);
                range.set_index(i, z);
                mask.set_index(i, PixelState::Labeled);
                report.labeled += 1;
            }
        }
        missing -= report.labeled;
        report.missing = missing;
        log::debug!("{report}");
        passes.push(report);
    }

    let fallback_pixels = missing;
    if missing > 0 {
        log::warn!(
            "{missing} pixels still missing after {} passes; filling from nearest labeled pixel",
            cfg.max_passes
        );
        fill_from_nearest(&mut range, &mut mask);
    } else if passes.len() > TYPICAL_MAX_PASSES {
        log::info!(
            "complete labeling took {} passes (more than the typical {TYPICAL_MAX_PASSES})",
            passes.len()
        );
    }

    Ok(SrOutput {
        range,
        mask,
        passes,
        fallback_pixels,
        labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Path {
    Planar,
    Median,
    Skipped,
}

fn label_segment(
    ctx: &PassContext<'_>,
    seg: u32,
    labels: &LabelSet,
    cfg: &SrConfig,
) -> (Path, Vec<(usize, f32)>) {
    let n_a = ctx.stats[seg as usize].visible_count;
    if n_a == 0 || ctx.missing_pixels(seg).next().is_none() {
        return (Path::Skipped, Vec::new());
    }
    if n_a >= cfg.cost.n_pl {
        let samples: Vec<Sample> = ctx
            .visible_samples(seg)
            .into_iter()
            .map(|(x, y, z)| Sample {
                x: x as f64,
                y: y as f64,
                z: f64::from(z),
            })
            .collect();
        let params = RansacParams {
            seed: cfg.ransac.seed ^ u64::from(seg),
            ..cfg.ransac
        };
        match ransac_plane(&samples, &params) {
            Ok(plane) => {
                return (
                    Path::Planar,
                    ctx.assign_planar_segment(seg, &plane, labels, cfg.cost.lambda_p),
                )
            }
            Err(e) => log::trace!("segment {seg}: {e}; using median cost"),
        }
    }
    (
        Path::Median,
        ctx.assign_median_segment(seg, labels, &cfg.cost),
    )
}

/// Copies into every `Missing` pixel the value of the nearest non-missing
/// pixel (Euclidean; ties resolved by row-major order) and marks it
/// `Labeled`.
pub fn fill_from_nearest(range: &mut RangeImage, mask: &mut VisibilityMask) {
    let (w, h) = range.dims();
    let known: Vec<bool> = mask
        .states()
        .iter()
        .map(|s| *s != PixelState::Missing)
        .collect();
    if !known.iter().any(|k| *k) {
        return;
    }
    let fills: Vec<(usize, f32)> = (0..w * h)
        .into_par_iter()
        .filter(|&i| !known[i])
        .map(|i| {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            let mut best: Option<(isize, usize)> = None;
            let max_r = w.max(h) as isize;
            for r in 1..=max_r {
                if best.is_some_and(|(d2, _)| r * r > d2) {
                    break;
                }
                for dy in -r..=r {
                    let ny = y + dy;
                    if ny < 0 || ny >= h as isize {
                        continue;
                    }
                    let step = if dy.abs() == r { 1 } else { 2 * r };
                    let mut dx = -r;
                    while dx <= r {
                        let nx = x + dx;
                        if nx >= 0 && nx < w as isize {
                            let j = ny as usize * w + nx as usize;
                            if known[j] {
                                let d2 = dx * dx + dy * dy;
                                if best.is_none_or(|(bd, bj)| d2 < bd || (d2 == bd && j < bj)) {
                                    best = Some((d2, j));
                                }
                            }
                        }
                        dx += step;
                    }
                }
            }
            let (_, j) = best.expect("at least one known pixel");
            (i, range.data()[j])
        })
        .collect();
    for (i, z) in fills {
        range.set_index(i, z);
        mask.set_index(i, PixelState::Labeled);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lift::decimate;

    #[test]
    fn schedule_examples() {
        let ms0 = MsParams::default();
        let k0 = bandwidth_schedule(&ms0, 1.25, 0);
        assert_eq!((k0.spatial, k0.color, k0.min_region), (7.0, 6.5, 20));
        let k2 = bandwidth_schedule(&ms0, 1.25, 2);
        assert_eq!((k2.spatial, k2.color), (10.9375, 10.15625));
        assert_eq!(k2.min_region, 32);
        for k in 0..10 {
            let a = bandwidth_schedule(&ms0, 1.25, k);
            let b = bandwidth_schedule(&ms0, 1.25, k + 1);
            assert!(b.spatial > a.spatial && b.color > a.color);
        }
    }

    #[test]
    fn factor_one_is_identity() {
        let truth = RangeImage::from_fn(12, 9, |x, y| (x * 3 + y) as f32);
        let color = ColorImage::filled(12, 9, [50, 60, 70]);
        let cfg = SrConfig {
            factor: SrFactor::new(1).unwrap(),
            ..SrConfig::default()
        };
        let out = super_resolve(&truth, &color, &cfg).unwrap();
        assert_eq!(out.range, truth);
        assert!(out.passes.is_empty());
        assert!(out.completed_without_fallback());
    }

    #[test]
    fn dimension_mismatch() {
        let lr = RangeImage::zeros(3, 3);
        let color = ColorImage::filled(8, 8, [0, 0, 0]);
        assert!(matches!(
            super_resolve(&lr, &color, &SrConfig::default()),
            Err(Error::Size { .. })
        ));
    }

    #[test]
    fn nearest_fill() {
        let mut range = RangeImage::zeros(5, 1);
        range.set(0, 0, 3.0);
        range.set(4, 0, 9.0);
        let mut mask = VisibilityMask::new(5, 1, PixelState::Missing);
        mask.set(0, 0, PixelState::Observed);
        mask.set(4, 0, PixelState::Labeled);
        fill_from_nearest(&mut range, &mut mask);
        assert_eq!(range.data(), &[3.0, 3.0, 3.0, 9.0, 9.0]);
        assert_eq!(mask.count(PixelState::Missing), 0);
        assert_eq!(mask.get(0, 0), PixelState::Observed);
    }

    #[test]
    fn forced_fallback_is_reported() {
        // One pass with a tiny region budget cannot reach every pixel of a
        // noisy image; the remainder is filled and flagged.
        let truth = RangeImage::from_fn(32, 32, |x, _| if x < 16 { 20.0 } else { 80.0 });
        let color = ColorImage::from_fn(32, 32, |x, y| {
            let v = ((x * 7 + y * 13) % 5) as u8 * 50;
            [v, 255 - v, (x * 8) as u8]
        });
        let cfg = SrConfig {
            max_passes: 1,
            ms: MsParams {
                spatial: 1.0,
                color: 1.0,
                min_region: 1,
                ..MsParams::default()
            },
            ..SrConfig::default()
        };
        let lr = decimate(&truth, cfg.factor, cfg.anchor);
        let out = super_resolve(&lr, &color, &cfg).unwrap();
        assert!(out.fallback_pixels > 0);
        assert_eq!(out.mask.count(PixelState::Missing), 0);
        assert_eq!(out.passes.len(), 1);
    }

    #[test]
    fn invalid_config() {
        let cfg = SrConfig {
            bw_growth: 1.0,
            ..SrConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SrConfig {
            quant: 0.0,
            ..SrConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
