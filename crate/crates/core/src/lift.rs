//! Decimation model: a low-resolution range image is the high-resolution one
//! sampled on a regular lattice, so it can be placed back onto the HR grid as
//! sparse observations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{PixelState, RangeImage, VisibilityMask};

/// Integer resolution factor, identical in both axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SrFactor(u32);

impl SrFactor {
    pub fn new(f: u32) -> Result<Self> {
        if f == 0 {
            return Err(Error::param("factor must be >= 1"));
        }
        Ok(Self(f))
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }

    /// Low-resolution extent for an HR extent: `ceil(extent / f)`.
    pub fn lr_extent(self, hr_extent: usize) -> usize {
        hr_extent.div_ceil(self.get())
    }
}

impl std::fmt::Display for SrFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Phase of the sampling lattice inside each `f`×`f` block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Anchor {
    #[default]
    TopLeft,
    /// `f / 2` into the block, clamped to the image for partial blocks.
    Center,
}

impl Anchor {
    pub fn offset(self, f: SrFactor) -> usize {
        match self {
            Anchor::TopLeft => 0,
            Anchor::Center => f.get() / 2,
        }
    }

    /// HR coordinate of LR sample `i` along an axis of length `hr_extent`.
    #[inline]
    pub fn site(self, i: usize, f: SrFactor, hr_extent: usize) -> usize {
        (i * f.get() + self.offset(f)).min(hr_extent - 1)
    }
}

pub fn decimate(hr: &RangeImage, f: SrFactor, anchor: Anchor) -> RangeImage {
    let (w, h) = hr.dims();
    let (lw, lh) = (f.lr_extent(w), f.lr_extent(h));
    RangeImage::from_fn(lw, lh, |j, i| {
        hr.get(anchor.site(j, f, w), anchor.site(i, f, h))
    })
}

/// Places every LR sample on its lattice site of an `hr_w`×`hr_h` grid.
/// All other pixels are `Missing` with placeholder value 0.
pub fn lift_sparse(
    lr: &RangeImage,
    f: SrFactor,
    hr_w: usize,
    hr_h: usize,
    anchor: Anchor,
) -> Result<(RangeImage, VisibilityMask)> {
    let expected = (f.lr_extent(hr_w), f.lr_extent(hr_h));
    if hr_w == 0 || hr_h == 0 || lr.dims() != expected {
        return Err(Error::Size {
            expected,
            found: lr.dims(),
        });
    }
    let mut range = RangeImage::zeros(hr_w, hr_h);
    let mut mask = VisibilityMask::new(hr_w, hr_h, PixelState::Missing);
    for i in 0..lr.height() {
        let y = anchor.site(i, f, hr_h);
        for j in 0..lr.width() {
            let x = anchor.site(j, f, hr_w);
            range.set(x, y, lr.get(j, i));
            mask.set(x, y, PixelState::Observed);
        }
    }
    Ok((range, mask))
}

/// Fraction of `Missing` pixels.
pub fn sparsity_ratio(mask: &VisibilityMask) -> f64 {
    let total = mask.width() * mask.height();
    mask.count(PixelState::Missing) as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f(v: u32) -> SrFactor {
        SrFactor::new(v).unwrap()
    }

    fn ramp(w: usize, h: usize) -> RangeImage {
        RangeImage::from_fn(w, h, |x, y| (y * 100 + x) as f32)
    }

    #[test]
    fn zero_factor_rejected() {
        assert!(SrFactor::new(0).is_err());
    }

    #[test]
    fn decimate_by_four_picks_block_corners() {
        let hr = ramp(8, 8);
        let lr = decimate(&hr, f(4), Anchor::TopLeft);
        assert_eq!(lr.dims(), (2, 2));
        assert_eq!(lr.data(), &[0.0, 4.0, 400.0, 404.0]);
    }

    #[test]
    fn decimate_identity_and_ceiling() {
        let hr = ramp(5, 5);
        assert_eq!(decimate(&hr, f(1), Anchor::TopLeft), hr);
        let lr = decimate(&hr, f(2), Anchor::TopLeft);
        assert_eq!(lr.dims(), (3, 3));
        assert_eq!(lr.get(2, 2), hr.get(4, 4));
        assert_eq!(lr.get(1, 2), hr.get(2, 4));
    }

    #[test]
    fn lift_by_four_leaves_93_75_percent_missing() {
        let lr = ramp(2, 2);
        let (range, mask) = lift_sparse(&lr, f(4), 8, 8, Anchor::TopLeft).unwrap();
        assert_eq!(mask.count(PixelState::Observed), 4);
        assert_eq!(mask.count(PixelState::Missing), 60);
        assert_eq!(sparsity_ratio(&mask), 0.9375);
        assert_eq!(range.get(4, 4), lr.get(1, 1));
        assert_eq!(range.get(1, 1), 0.0);
    }

    #[test]
    fn sparsity_for_six() {
        let (_, mask) = lift_sparse(&ramp(3, 2), f(6), 18, 12, Anchor::TopLeft).unwrap();
        assert_eq!(sparsity_ratio(&mask), 1.0 - 1.0 / 36.0);
        let all = VisibilityMask::new(3, 3, PixelState::Observed);
        assert_eq!(sparsity_ratio(&all), 0.0);
    }

    #[test]
    fn lift_identity() {
        let lr = ramp(3, 4);
        let (range, mask) = lift_sparse(&lr, f(1), 3, 4, Anchor::TopLeft).unwrap();
        assert_eq!(range, lr);
        assert_eq!(mask.count(PixelState::Missing), 0);
    }

    #[test]
    fn lift_size_mismatch() {
        let err = lift_sparse(&ramp(3, 3), f(4), 8, 8, Anchor::TopLeft).unwrap_err();
        assert!(matches!(
            err,
            Error::Size {
                expected: (2, 2),
                found: (3, 3)
            }
        ));
    }

    proptest! {
        #[test]
        fn lift_of_decimate_keeps_samples(
            w in 1usize..30, h in 1usize..30, fac in 1u32..7, center in any::<bool>(), seed in any::<u32>()
        ) {
            let anchor = if center { Anchor::Center } else { Anchor::TopLeft };
            let hr = RangeImage::from_fn(w, h, |x, y| ((x as u32 * 31 + y as u32 * 17) ^ seed) as f32 % 997.0);
            let fac = f(fac);
            let lr = decimate(&hr, fac, anchor);
            let (sparse, mask) = lift_sparse(&lr, fac, w, h, anchor).unwrap();
            // Observed sites are exactly the lattice and carry HR values.
            for y in 0..h {
                for x in 0..w {
                    let on_lattice = (0..lr.height()).any(|i| anchor.site(i, fac, h) == y)
                        && (0..lr.width()).any(|j| anchor.site(j, fac, w) == x);
                    prop_assert_eq!(mask.get(x, y) == PixelState::Observed, on_lattice);
                    if on_lattice {
                        prop_assert_eq!(sparse.get(x, y), hr.get(x, y));
                    }
                }
            }
            prop_assert_eq!(decimate(&sparse, fac, anchor), lr);
            if w % fac.get() == 0 && h % fac.get() == 0 {
                let observed = 1.0 - sparsity_ratio(&mask);
                let ff = (fac.get() * fac.get()) as f64;
                prop_assert!((observed - 1.0 / ff).abs() < 1e-15);
            }
        }
    }
}
