//! Raster types shared by every stage: the color guide, range images, the
//! per-pixel visibility state, segment maps and their statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// High-resolution 8-bit RGB guidance image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl ColorImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height * 3 {
            return Err(Error::format(format!(
                "color payload has {} bytes, expected {}",
                data.len(),
                width * height * 3
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        Self::from_fn(width, height, |_, _| rgb)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn pixel_at(&self, index: usize) -> [u8; 3] {
        let i = index * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// Range raster. Values are non-negative, finite, unitless levels.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl RangeImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        check_dims(width, height)?;
        if data.len() != width * height {
            return Err(Error::format(format!(
                "range payload has {} values, expected {}",
                data.len(),
                width * height
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::format(format!(
                "range value {v} is not a finite non-negative level"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    /// Panics if `f` yields a negative or non-finite value.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data).expect("from_fn produced an invalid range image")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Panics on negative or non-finite values.
    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        assert!(v.is_finite() && v >= 0.0, "invalid range value {v}");
        self.data[y * self.width + x] = v;
    }

    #[inline]
    pub(crate) fn set_index(&mut self, index: usize, v: f32) {
        debug_assert!(v.is_finite() && v >= 0.0);
        self.data[index] = v;
    }
}

/// Provenance of a range pixel on the high-resolution grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PixelState {
    /// Carries a sample lifted from the low-resolution observation.
    Observed,
    /// Received a label from the cost minimization.
    Labeled,
    /// No value yet; the stored range is a placeholder.
    Missing,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisibilityMask {
    width: usize,
    height: usize,
    states: Vec<PixelState>,
}

impl VisibilityMask {
    pub fn new(width: usize, height: usize, fill: PixelState) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            states: vec![fill; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn states(&self) -> &[PixelState] {
        &self.states
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> PixelState {
        self.states[y * self.width + x]
    }

    #[inline]
    pub fn at(&self, index: usize) -> PixelState {
        self.states[index]
    }

    #[inline]
    pub(crate) fn set_index(&mut self, index: usize, s: PixelState) {
        self.states[index] = s;
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, s: PixelState) {
        self.states[y * self.width + x] = s;
    }

    pub fn count(&self, state: PixelState) -> usize {
        self.states.iter().filter(|s| **s == state).count()
    }
}

/// Which pixel states count as "visible" data for plane fits, medians and
/// smoothness neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum VisibilityPolicy {
    #[default]
    ObservedOnly,
    ObservedAndLabeled,
}

impl VisibilityPolicy {
    #[inline]
    pub fn admits(self, state: PixelState) -> bool {
        match self {
            VisibilityPolicy::ObservedOnly => state == PixelState::Observed,
            VisibilityPolicy::ObservedAndLabeled => state != PixelState::Missing,
        }
    }
}

/// Pixel neighborhood used for the smoothness term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Neighborhood {
    /// First order: left, right, up, down.
    Four,
    /// Second order: the 4-neighborhood plus diagonals.
    #[default]
    Eight,
}

const OFFSETS_8: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

const OFFSETS_4: [(isize, isize); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];

impl Neighborhood {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Neighborhood::Four => &OFFSETS_4,
            Neighborhood::Eight => &OFFSETS_8,
        }
    }
}

/// In-bounds neighbors of `(x, y)` in a `width`×`height` grid, in row-major order.
pub fn neighbors(
    x: usize,
    y: usize,
    width: usize,
    height: usize,
    nb: Neighborhood,
) -> impl Iterator<Item = (usize, usize)> {
    nb.offsets().iter().filter_map(move |&(dx, dy)| {
        let nx = x.checked_add_signed(dx)?;
        let ny = y.checked_add_signed(dy)?;
        (nx < width && ny < height).then_some((nx, ny))
    })
}

/// The 8-connected neighborhood of `(x, y)`.
pub fn neighbors2(
    x: usize,
    y: usize,
    width: usize,
    height: usize,
) -> impl Iterator<Item = (usize, usize)> {
    neighbors(x, y, width, height, Neighborhood::Eight)
}

/// Per-pixel segment ids, dense in `0..len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentMap {
    width: usize,
    height: usize,
    ids: Vec<u32>,
    count: usize,
}

impl SegmentMap {
    /// Builds a map from raw ids. Ids must cover `0..S` without gaps.
    pub fn from_ids(width: usize, height: usize, ids: Vec<u32>) -> Result<Self> {
        check_dims(width, height)?;
        if ids.len() != width * height {
            return Err(Error::Size {
                expected: (width, height),
                found: (ids.len(), 1),
            });
        }
        let count = ids.iter().max().map_or(0, |m| *m as usize + 1);
        let mut seen = vec![false; count];
        for &id in &ids {
            seen[id as usize] = true;
        }
        if let Some(gap) = seen.iter().position(|s| !s) {
            return Err(Error::format(format!(
                "segment id {gap} is unused; ids must be contiguous"
            )));
        }
        Ok(Self {
            width,
            height,
            ids,
            count,
        })
    }

    /// Renumbers arbitrary labels to dense ids in order of first appearance
    /// (row-major).
    pub fn canonicalize(width: usize, height: usize, labels: &[u32]) -> Self {
        let mut remap = std::collections::HashMap::new();
        let ids: Vec<u32> = labels
            .iter()
            .map(|l| {
                let next = remap.len() as u32;
                *remap.entry(*l).or_insert(next)
            })
            .collect();
        let count = remap.len();
        Self {
            width,
            height,
            ids,
            count,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    #[inline]
    pub fn id(&self, x: usize, y: usize) -> u32 {
        self.ids[y * self.width + x]
    }

    /// Number of segments.
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Pixel indices of every segment, each list in row-major order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.count];
        for (i, &id) in self.ids.iter().enumerate() {
            out[id as usize].push(i);
        }
        out
    }

    /// Sorted adjacency lists; two segments are adjacent when some pair of
    /// 4-connected pixels carries their ids.
    pub fn adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.count];
        let w = self.width;
        for y in 0..self.height {
            for x in 0..w {
                let a = self.ids[y * w + x];
                if x + 1 < w {
                    let b = self.ids[y * w + x + 1];
                    if a != b {
                        adj[a as usize].push(b);
                        adj[b as usize].push(a);
                    }
                }
                if y + 1 < self.height {
                    let b = self.ids[(y + 1) * w + x];
                    if a != b {
                        adj[a as usize].push(b);
                        adj[b as usize].push(a);
                    }
                }
            }
        }
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
        }
        adj
    }
}

/// Per-segment record used by the label costs.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentStats {
    pub pixel_count: usize,
    /// `n_a`: pixels the visibility policy admits as data.
    pub visible_count: usize,
    /// Mean RGB over all pixels of the segment, 0–255 scale.
    pub mean_rgb: [f64; 3],
    pub adjacency: Vec<u32>,
}

pub fn segment_stats(
    seg: &SegmentMap,
    color: &ColorImage,
    mask: &VisibilityMask,
    policy: VisibilityPolicy,
) -> Result<Vec<SegmentStats>> {
    let dims = (seg.width, seg.height);
    for found in [(color.width, color.height), (mask.width, mask.height)] {
        if found != dims {
            return Err(Error::Size {
                expected: dims,
                found,
            });
        }
    }
    let n = seg.len();
    let mut counts = vec![0usize; n];
    let mut visible = vec![0usize; n];
    // Sums of u8 values are exact in u64, so the accumulation order is irrelevant.
    let mut sums = vec![[0u64; 3]; n];
    for (i, &id) in seg.ids.iter().enumerate() {
        let s = id as usize;
        counts[s] += 1;
        if policy.admits(mask.at(i)) {
            visible[s] += 1;
        }
        let px = color.pixel_at(i);
        for c in 0..3 {
            sums[s][c] += u64::from(px[c]);
        }
    }
    let adjacency = seg.adjacency();
    Ok(adjacency
        .into_iter()
        .enumerate()
        .map(|(s, adjacency)| {
            let cnt = counts[s] as f64;
            SegmentStats {
                pixel_count: counts[s],
                visible_count: visible[s],
                mean_rgb: [
                    sums[s][0] as f64 / cnt,
                    sums[s][1] as f64 / cnt,
                    sums[s][2] as f64 / cnt,
                ],
                adjacency,
            }
        })
        .collect())
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::format(format!(
            "image dimensions {width}x{height} must be positive"
        )));
    }
    Ok(())
}
