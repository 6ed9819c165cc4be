//! Synthetic piecewise-planar scenes with a color guide whose edges coincide
//! with the range discontinuities. Ground truth is analytic.

use crate::raster::{ColorImage, RangeImage};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarRegion {
    pub color: [u8; 3],
    /// `z = a·x + b·y + c`
    pub plane: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub truth: RangeImage,
    pub color: ColorImage,
    /// Region index per pixel, row-major.
    pub regions: Vec<u8>,
}

impl SyntheticScene {
    pub fn build(
        width: usize,
        height: usize,
        regions: &[PlanarRegion],
        region_at: impl Fn(usize, usize) -> usize,
    ) -> Self {
        let mut labels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                labels.push(region_at(x, y) as u8);
            }
        }
        let truth = RangeImage::from_fn(width, height, |x, y| {
            let [a, b, c] = regions[labels[y * width + x] as usize].plane;
            (a * x as f64 + b * y as f64 + c) as f32
        });
        let color = ColorImage::from_fn(width, height, |x, y| {
            regions[labels[y * width + x] as usize].color
        });
        Self {
            truth,
            color,
            regions: labels,
        }
    }

    /// Pixels whose 8-neighborhood (or the pixel itself) touches another
    /// region, i.e. pixels within one pixel of a region boundary.
    pub fn boundary_band(&self) -> Vec<bool> {
        let (w, h) = self.truth.dims();
        (0..w * h)
            .map(|i| {
                let (x, y) = (i % w, i / w);
                crate::raster::neighbors2(x, y, w, h)
                    .any(|(nx, ny)| self.regions[ny * w + nx] != self.regions[i])
            })
            .collect()
    }
}

/// Four color-distinct quadrants: a fronto-parallel plane and three slanted
/// planes with integer slopes. All range values stay within the extremes
/// attained on the top-left decimation lattice of a multiple-of-4 grid.
pub fn quadrant_scene(width: usize, height: usize) -> SyntheticScene {
    let (cx, cy) = ((width / 2) as f64, (height / 2) as f64);
    let regions = [
        PlanarRegion {
            color: [200, 40, 40],
            plane: [0.0, 0.0, 20.0],
        },
        PlanarRegion {
            color: [40, 180, 60],
            plane: [-1.0, 0.0, 227.0 + cx],
        },
        PlanarRegion {
            color: [50, 60, 200],
            plane: [0.0, -1.0, 200.0 + cy],
        },
        PlanarRegion {
            color: [220, 210, 60],
            plane: [0.0, 1.0, 60.0 - cy],
        },
    ];
    SyntheticScene::build(width, height, &regions, |x, y| {
        usize::from(x >= width / 2) + 2 * usize::from(y >= height / 2)
    })
}

/// Left and right halves, each a plane.
pub fn two_halves_scene(width: usize, height: usize) -> SyntheticScene {
    let regions = [
        PlanarRegion {
            color: [30, 30, 140],
            plane: [0.0, 1.0, 40.0],
        },
        PlanarRegion {
            color: [235, 220, 50],
            plane: [0.0, 0.0, 160.0],
        },
    ];
    SyntheticScene::build(width, height, &regions, |x, _| usize::from(x >= width / 2))
}
