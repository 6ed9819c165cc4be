//! Mean-shift color segmentation.
//!
//! Every pixel is a point `(x/h_s, y/h_s, c/h_r)` in a joint spatial-color
//! space, with `c` in CIE L\*u\*v\* (or raw RGB). Each point climbs to a mode of
//! the density estimated with a flat kernel of unit radius. Neighboring
//! pixels whose modes lie within unit distance are fused into one region,
//! and regions below `min_region` pixels are absorbed by their most similar
//! neighbor.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ColorImage, SegmentMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ColorSpace {
    #[default]
    Luv,
    Rgb,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsParams {
    /// Spatial bandwidth `h_s`, pixels.
    pub spatial: f64,
    /// Color bandwidth `h_r`, in units of the chosen color space.
    pub color: f64,
    pub min_region: usize,
    pub max_iters: usize,
    /// Convergence threshold on the normalized step length.
    pub converge_tol: f64,
    pub color_space: ColorSpace,
}

impl Default for MsParams {
    fn default() -> Self {
        Self {
            spatial: 7.0,
            color: 6.5,
            min_region: 20,
            max_iters: 100,
            converge_tol: 0.01,
            color_space: ColorSpace::Luv,
        }
    }
}

impl MsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.spatial.is_finite() && self.spatial > 0.0) {
            return Err(Error::param(format!(
                "spatial bandwidth must be > 0, got {}",
                self.spatial
            )));
        }
        if !(self.color.is_finite() && self.color > 0.0) {
            return Err(Error::param(format!(
                "color bandwidth must be > 0, got {}",
                self.color
            )));
        }
        if self.min_region < 1 {
            return Err(Error::param("min_region must be >= 1"));
        }
        if self.max_iters < 1 {
            return Err(Error::param("max_iters must be >= 1"));
        }
        if !(self.converge_tol.is_finite() && self.converge_tol > 0.0) {
            return Err(Error::param("converge_tol must be > 0"));
        }
        Ok(())
    }
}

/// A converged point in the joint domain, original units: `[x, y, c0, c1, c2]`.
pub type Mode = [f64; 5];

/// sRGB (D65) to CIE L\*u\*v\*.
pub fn rgb_to_luv(rgb: [u8; 3]) -> [f64; 3] {
    fn linear(c: u8) -> f64 {
        let c = f64::from(c) / 255.0;
        if c <= 0.04045 {
            c / 12.92
        } else {
            ((c + 0.055) / 1.055).powf(2.4)
        }
    }
    const XN: f64 = 0.95047;
    const YN: f64 = 1.0;
    const ZN: f64 = 1.08883;
    let (r, g, b) = (linear(rgb[0]), linear(rgb[1]), linear(rgb[2]));
    let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;

    let yr = y / YN;
    let l = if yr > 216.0 / 24389.0 {
        116.0 * yr.cbrt() - 16.0
    } else {
        24389.0 / 27.0 * yr
    };
    let denom = x + 15.0 * y + 3.0 * z;
    if denom <= 0.0 {
        return [0.0, 0.0, 0.0];
    }
    let un = 4.0 * XN / (XN + 15.0 * YN + 3.0 * ZN);
    let vn = 9.0 * YN / (XN + 15.0 * YN + 3.0 * ZN);
    let u = 13.0 * l * (4.0 * x / denom - un);
    let v = 13.0 * l * (9.0 * y / denom - vn);
    [l, u, v]
}

/// Per-pixel color features in the configured color space.
pub fn color_features(img: &ColorImage, space: ColorSpace) -> Vec<[f32; 3]> {
    (0..img.width() * img.height())
        .map(|i| {
            let px = img.pixel_at(i);
            match space {
                ColorSpace::Luv => {
                    let luv = rgb_to_luv(px);
                    [luv[0] as f32, luv[1] as f32, luv[2] as f32]
                }
                ColorSpace::Rgb => [f32::from(px[0]), f32::from(px[1]), f32::from(px[2])],
            }
        })
        .collect()
}

/// Iterates the flat-kernel mean shift starting at pixel `start` until the
/// normalized step falls below `converge_tol` or `max_iters` is reached.
pub fn mode_seek(
    features: &[[f32; 3]],
    width: usize,
    height: usize,
    start: usize,
    p: &MsParams,
) -> Mode {
    let inv_hs2 = 1.0 / (p.spatial * p.spatial);
    let inv_hr2 = 1.0 / (p.color * p.color);
    let tol2 = p.converge_tol * p.converge_tol;

    let c0 = features[start];
    let mut mode: Mode = [
        (start % width) as f64,
        (start / width) as f64,
        f64::from(c0[0]),
        f64::from(c0[1]),
        f64::from(c0[2]),
    ];
    for _ in 0..p.max_iters {
        let y0 = (mode[1] - p.spatial).ceil().max(0.0) as usize;
        let y1 = ((mode[1] + p.spatial).floor().max(0.0) as usize).min(height - 1);
        let (mc0, mc1, mc2) = (mode[2], mode[3], mode[4]);

        let (mut sx, mut sy) = (0usize, 0usize);
        let mut sc = [0.0f64; 3];
        let mut n = 0usize;
        for y in y0..=y1 {
            let dy = y as f64 - mode[1];
            let dy2 = dy * dy * inv_hs2;
            if dy2 > 1.0 {
                continue;
            }
            // Candidate columns of the spatial disc on this row, widened by one
            // pixel; the exact test below decides membership.
            let half = ((1.0 - dy2).sqrt() * p.spatial).floor() + 1.0;
            let x0 = (mode[0] - half).ceil().max(0.0) as usize;
            let x1 = ((mode[0] + half).floor() as isize).min(width as isize - 1);
            if x1 < x0 as isize {
                continue;
            }
            let row = &features[y * width..(y + 1) * width];
            for (x, c) in row.iter().enumerate().take(x1 as usize + 1).skip(x0) {
                let dx = x as f64 - mode[0];
                let ds = dx * dx * inv_hs2 + dy2;
                if ds > 1.0 {
                    continue;
                }
                let d0 = f64::from(c[0]) - mc0;
                let d1 = f64::from(c[1]) - mc1;
                let d2 = f64::from(c[2]) - mc2;
                if ds + (d0 * d0 + d1 * d1 + d2 * d2) * inv_hr2 <= 1.0 {
                    sx += x;
                    sy += y;
                    sc[0] += f64::from(c[0]);
                    sc[1] += f64::from(c[1]);
                    sc[2] += f64::from(c[2]);
                    n += 1;
                }
            }
        }
        if n == 0 {
            break;
        }
        let inv_n = 1.0 / n as f64;
        let next: Mode = [
            sx as f64 * inv_n,
            sy as f64 * inv_n,
            sc[0] * inv_n,
            sc[1] * inv_n,
            sc[2] * inv_n,
        ];
        let step2 = normalized_dist2(&mode, &next, inv_hs2, inv_hr2);
        mode = next;
        if step2 < tol2 {
            break;
        }
    }
    mode
}

#[inline]
fn normalized_dist2(a: &Mode, b: &Mode, inv_hs2: f64, inv_hr2: f64) -> f64 {
    let s = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    let c = (a[2] - b[2]).powi(2) + (a[3] - b[3]).powi(2) + (a[4] - b[4]).powi(2);
    s * inv_hs2 + c * inv_hr2
}

/// Runs [`mode_seek`] for every pixel. Parallel over pixels; each pixel's
/// computation is sequential, so the result does not depend on thread count.
pub fn seek_all_modes(
    features: &[[f32; 3]],
    width: usize,
    height: usize,
    p: &MsParams,
) -> Vec<Mode> {
    (0..width * height)
        .into_par_iter()
        .map(|i| mode_seek(features, width, height, i, p))
        .collect()
}

struct DisjointSet {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut a: u32) -> u32 {
        while self.parent[a as usize] != a {
            let grand = self.parent[self.parent[a as usize] as usize];
            self.parent[a as usize] = grand;
            a = grand;
        }
        a
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        let (big, small) = if self.size[ra as usize] >= self.size[rb as usize] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small as usize] = big;
        self.size[big as usize] += self.size[small as usize];
        big
    }
}

/// Fuses 4-adjacent pixels whose modes are within unit normalized distance.
/// Returns dense region labels numbered by first appearance in row-major
/// order. Every region is 4-connected.
pub fn fuse_modes(modes: &[Mode], width: usize, height: usize, p: &MsParams) -> Vec<u32> {
    let edges: Vec<(usize, usize)> = grid_edges(width, height).collect();
    fuse_modes_over(modes, width, height, p, &edges)
}

fn grid_edges(width: usize, height: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..height).flat_map(move |y| {
        (0..width).flat_map(move |x| {
            let i = y * width + x;
            let right = (x + 1 < width).then_some((i, i + 1));
            let down = (y + 1 < height).then_some((i, i + width));
            right.into_iter().chain(down)
        })
    })
}

fn fuse_modes_over(
    modes: &[Mode],
    width: usize,
    height: usize,
    p: &MsParams,
    edges: &[(usize, usize)],
) -> Vec<u32> {
    let inv_hs2 = 1.0 / (p.spatial * p.spatial);
    let inv_hr2 = 1.0 / (p.color * p.color);
    let mut ds = DisjointSet::new(width * height);
    for &(a, b) in edges {
        if normalized_dist2(&modes[a], &modes[b], inv_hs2, inv_hr2) <= 1.0 {
            ds.union(a as u32, b as u32);
        }
    }
    canonical_labels(&mut ds, width * height)
}

fn canonical_labels(ds: &mut DisjointSet, n: usize) -> Vec<u32> {
    let mut remap = vec![u32::MAX; n];
    let mut next = 0u32;
    (0..n as u32)
        .map(|i| {
            let r = ds.find(i) as usize;
            if remap[r] == u32::MAX {
                remap[r] = next;
                next += 1;
            }
            remap[r]
        })
        .collect()
}

/// Absorbs every region smaller than `min_region` into the adjacent region
/// with the closest mean color, sweeping until no small region with a
/// neighbor remains. Ties go to the smaller region id. Input labels must be
/// dense; output labels are dense and canonical.
pub fn enforce_min_region(
    labels: &[u32],
    features: &[[f32; 3]],
    width: usize,
    height: usize,
    min_region: usize,
) -> Vec<u32> {
    let mut labels = labels.to_vec();
    loop {
        let count = labels.iter().max().map_or(0, |m| *m as usize + 1);
        let mut size = vec![0usize; count];
        let mut sum = vec![[0.0f64; 3]; count];
        for (i, &l) in labels.iter().enumerate() {
            size[l as usize] += 1;
            for c in 0..3 {
                sum[l as usize][c] += f64::from(features[i][c]);
            }
        }
        if size.iter().all(|s| *s >= min_region) || count <= 1 {
            return labels;
        }
        let mean: Vec<[f64; 3]> = sum
            .iter()
            .zip(&size)
            .map(|(s, n)| s.map(|v| v / *n as f64))
            .collect();
        let mut adj = vec![Vec::new(); count];
        for (a, b) in grid_edges(width, height) {
            let (la, lb) = (labels[a], labels[b]);
            if la != lb {
                adj[la as usize].push(lb);
                adj[lb as usize].push(la);
            }
        }
        let mut ds = DisjointSet::new(count);
        for (r, n) in ds.size.iter_mut().zip(&size) {
            *r = *n as u32;
        }
        let mut merged_any = false;
        for r in 0..count {
            if ds.find(r as u32) != r as u32 || (ds.size[r] as usize) >= min_region {
                continue;
            }
            let mut best: Option<(f64, u32)> = None;
            for &a in &adj[r] {
                let d: f64 = (0..3)
                    .map(|c| (mean[r][c] - mean[a as usize][c]).powi(2))
                    .sum();
                let better = match best {
                    None => true,
                    Some((bd, ba)) => d < bd || (d == bd && a < ba),
                };
                if better {
                    best = Some((d, a));
                }
            }
            if let Some((_, target)) = best {
                ds.union(r as u32, target);
                merged_any = true;
            }
        }
        if !merged_any {
            return labels;
        }
        let region = canonical_labels(&mut ds, count);
        let mut first = vec![u32::MAX; count];
        let mut next = 0;
        for l in labels.iter_mut() {
            let g = region[*l as usize] as usize;
            if first[g] == u32::MAX {
                first[g] = next;
                next += 1;
            }
            *l = first[g];
        }
    }
}

/// Full segmentation: mode seeking, fusion and small-region absorption.
pub fn segment(img: &ColorImage, p: &MsParams) -> Result<SegmentMap> {
    p.validate()?;
    let (w, h) = (img.width(), img.height());
    let features = color_features(img, p.color_space);
    let modes = seek_all_modes(&features, w, h, p);
    let labels = fuse_modes(&modes, w, h, p);
    let labels = enforce_min_region(&labels, &features, w, h, p.min_region);
    SegmentMap::from_ids(w, h, labels)
}
