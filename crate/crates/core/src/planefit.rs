//! RANSAC plane fitting `z = a·x + b·y + c` over a segment's visible pixels,
//! refined by least squares on the consensus set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub inlier_count: usize,
}

impl Plane {
    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.a * x + self.b * y + self.c
    }
}

/// `a·x + b·y + c` at pixel `(x, y)`.
#[inline]
pub fn eval_plane(pl: &Plane, x: usize, y: usize) -> f64 {
    pl.eval(x as f64, y as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacParams {
    pub iters: usize,
    /// Maximum absolute residual of an inlier, range levels.
    pub inlier_tol: f64,
    /// Minimum consensus as a fraction of the samples.
    pub min_inlier_frac: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            iters: 200,
            inlier_tol: 1.0,
            min_inlier_frac: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FitError {
    #[error("plane fit needs at least 3 samples, got {0}")]
    InsufficientData(usize),
    #[error("every minimal sample was collinear")]
    DegenerateGeometry,
    #[error("best consensus {best} below required {required}")]
    NoConsensus { best: usize, required: usize },
}

/// A range sample at pixel `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<(f64, f64, f64)> for Sample {
    fn from((x, y, z): (f64, f64, f64)) -> Self {
        Self { x, y, z }
    }
}

const DEGENERATE_AREA: f64 = 1e-9;

pub fn ransac_plane(samples: &[Sample], p: &RansacParams) -> Result<Plane, FitError> {
    let n = samples.len();
    if n < 3 {
        return Err(FitError::InsufficientData(n));
    }
    let pts = canonical_order(samples);
    let (count, model) = best_minimal_model(&pts, p)?;
    let required = ((p.min_inlier_frac * n as f64).ceil() as usize).max(3);
    if count < required {
        return Err(FitError::NoConsensus {
            best: count,
            required,
        });
    }
    let inliers: Vec<Sample> = pts
        .iter()
        .filter(|s| residual(&model, s) <= p.inlier_tol)
        .copied()
        .collect();
    let [a, b, c] = least_squares(&inliers).unwrap_or(model);
    Ok(Plane {
        a,
        b,
        c,
        inlier_count: inliers.len(),
    })
}

fn canonical_order(samples: &[Sample]) -> Vec<Sample> {
    let mut pts = samples.to_vec();
    pts.sort_by(|l, r| {
        l.y.total_cmp(&r.y)
            .then(l.x.total_cmp(&r.x))
            .then(l.z.total_cmp(&r.z))
    });
    pts
}

/// Draws `iters` minimal samples and returns the plane with the largest
/// consensus (first found wins ties) and its inlier count.
fn best_minimal_model(pts: &[Sample], p: &RansacParams) -> Result<(usize, [f64; 3]), FitError> {
    let n = pts.len();
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut best: Option<(usize, [f64; 3])> = None;
    for _ in 0..p.iters.max(1) {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let mut k = rng.random_range(0..n - 2);
        for skip in [i.min(j), i.max(j)] {
            if k >= skip {
                k += 1;
            }
        }
        let Some(model) = plane_through(&pts[i], &pts[j], &pts[k]) else {
            continue;
        };
        let count = pts
            .iter()
            .filter(|s| residual(&model, s) <= p.inlier_tol)
            .count();
        if best.is_none_or(|(b, _)| count > b) {
            best = Some((count, model));
            if count == n {
                break;
            }
        }
    }
    best.ok_or(FitError::DegenerateGeometry)
}

#[inline]
fn residual(m: &[f64; 3], s: &Sample) -> f64 {
    (m[0] * s.x + m[1] * s.y + m[2] - s.z).abs()
}

fn plane_through(p: &Sample, q: &Sample, r: &Sample) -> Option<[f64; 3]> {
    let (ux, uy, uz) = (q.x - p.x, q.y - p.y, q.z - p.z);
    let (vx, vy, vz) = (r.x - p.x, r.y - p.y, r.z - p.z);
    let cross_z = ux * vy - uy * vx;
    if 0.5 * cross_z.abs() < DEGENERATE_AREA {
        return None;
    }
    let a = (uz * vy - uy * vz) / cross_z;
    let b = (ux * vz - uz * vx) / cross_z;
    let c = p.z - a * p.x - b * p.y;
    Some([a, b, c])
}

/// Least-squares plane via centered 3×3 normal equations.
fn least_squares(pts: &[Sample]) -> Option<[f64; 3]> {
    let n = pts.len() as f64;
    let (mx, my, mz) = pts
        .iter()
        .fold((0.0, 0.0, 0.0), |(a, b, c), s| (a + s.x, b + s.y, c + s.z));
    let (mx, my, mz) = (mx / n, my / n, mz / n);
    let (mut sxx, mut sxy, mut syy, mut sxz, mut syz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for s in pts {
        let (dx, dy, dz) = (s.x - mx, s.y - my, s.z - mz);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
        sxz += dx * dz;
        syz += dy * dz;
    }
    let det = sxx * syy - sxy * sxy;
    if det.abs() <= 1e-12 * (sxx * syy).max(1.0) {
        return None;
    }
    let a = (sxz * syy - syz * sxy) / det;
    let b = (syz * sxx - sxz * sxy) / det;
    Some([a, b, mz - a * mx - b * my])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn s(x: f64, y: f64, z: f64) -> Sample {
        Sample { x, y, z }
    }

    fn grid(f: impl Fn(f64, f64) -> f64, n: usize) -> Vec<Sample> {
        (0..n)
            .map(|i| {
                let (x, y) = ((i % 5) as f64 * 3.0, (i / 5) as f64 * 2.0);
                s(x, y, f(x, y))
            })
            .collect()
    }

    #[test]
    fn exact_plane() {
        let pts = grid(|x, y| 2.0 * x + 3.0 * y + 1.0, 20);
        let pl = ransac_plane(&pts, &RansacParams::default()).unwrap();
        assert!((pl.a - 2.0).abs() < 1e-9);
        assert!((pl.b - 3.0).abs() < 1e-9);
        assert!((pl.c - 1.0).abs() < 1e-9);
        assert_eq!(pl.inlier_count, 20);
    }

    #[test]
    fn rejects_offset_outliers() {
        let truth = |x: f64, y: f64| -x + 0.5 * y + 60.0;
        let mut pts = grid(truth, 30);
        for i in 0..9 {
            let (x, y) = (i as f64 * 1.7 + 0.3, i as f64 * 0.9 + 0.2);
            pts.push(s(x, y, truth(x, y) + 50.0));
        }
        let pl = ransac_plane(
            &pts,
            &RansacParams {
                seed: 42,
                ..RansacParams::default()
            },
        )
        .unwrap();
        assert!(pl.inlier_count >= 30);
        for p in &pts[..30] {
            assert!((pl.eval(p.x, p.y) - truth(p.x, p.y)).abs() <= 1.0);
        }
    }

    #[test]
    fn error_cases() {
        let p = RansacParams::default();
        assert_eq!(
            ransac_plane(&[s(0., 0., 1.), s(1., 0., 1.)], &p),
            Err(FitError::InsufficientData(2))
        );
        let line: Vec<_> = (0..10).map(|i| s(i as f64, 2.0 * i as f64, 5.0)).collect();
        assert_eq!(ransac_plane(&line, &p), Err(FitError::DegenerateGeometry));
        // Four distinct planes with equal support: no majority.
        let mut pts = Vec::new();
        for (k, off) in [0.0, 100.0, 350.0, 120.0].iter().enumerate() {
            for i in 0..4 {
                pts.push(s((i % 2) as f64 + 3.0 * k as f64, (i / 2) as f64, *off));
            }
        }
        assert!(matches!(
            ransac_plane(&pts, &p),
            Err(FitError::NoConsensus { .. })
        ));
    }

    #[test]
    fn eval_examples() {
        let flat = Plane {
            a: 0.0,
            b: 0.0,
            c: 5.0,
            inlier_count: 3,
        };
        assert_eq!(eval_plane(&flat, 17, 3), 5.0);
        let pl = Plane {
            a: 2.0,
            b: 3.0,
            c: 1.0,
            inlier_count: 3,
        };
        assert_eq!(eval_plane(&pl, 1, 1), 6.0);
    }

    proptest! {
        #[test]
        fn eval_matches_expression(a in -5.0f64..5.0, b in -5.0f64..5.0, c in 0.0f64..100.0, x in 0usize..500, y in 0usize..500) {
            let pl = Plane { a, b, c, inlier_count: 3 };
            prop_assert_eq!(eval_plane(&pl, x, y), a * x as f64 + b * y as f64 + c);
        }

        #[test]
        fn order_independent(seed in any::<u64>(), rot in 0usize..40) {
            let mut pts: Vec<Sample> = (0..40).map(|i| {
                let (x, y) = ((i % 8) as f64, (i / 8) as f64);
                let noise = if i % 7 == 0 { 30.0 } else { ((i * 37 % 11) as f64 - 5.0) * 0.05 };
                s(x, y, 0.3 * x - 0.7 * y + 20.0 + noise)
            }).collect();
            let p = RansacParams { seed, ..RansacParams::default() };
            let a = ransac_plane(&pts, &p).unwrap();
            pts.rotate_left(rot);
            pts.reverse();
            let b = ransac_plane(&pts, &p).unwrap();
            prop_assert_eq!(a.a.to_bits(), b.a.to_bits());
            prop_assert_eq!(a.b.to_bits(), b.b.to_bits());
            prop_assert_eq!(a.c.to_bits(), b.c.to_bits());
            prop_assert_eq!(a.inlier_count, b.inlier_count);
        }

        #[test]
        fn refit_does_not_increase_inlier_rss(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Sample> = (0..30).map(|_| {
                let (x, y) = (rng.random_range(0.0..20.0), rng.random_range(0.0..20.0));
                s(x, y, 0.5 * x + 0.25 * y + 10.0 + rng.random_range(-0.8..0.8))
            }).collect();
            let p = RansacParams { seed, inlier_tol: 1.0, min_inlier_frac: 0.1, iters: 50 };
            let sorted = canonical_order(&pts);
            let fitted = ransac_plane(&pts, &p).unwrap();
            let (_, m) = best_minimal_model(&sorted, &p).unwrap();
            let inl: Vec<_> = sorted.iter().filter(|q| residual(&m, q) <= p.inlier_tol).collect();
            let rss_min: f64 = inl.iter().map(|q| residual(&m, q).powi(2)).sum();
            let ls = [fitted.a, fitted.b, fitted.c];
            let rss_ls: f64 = inl.iter().map(|q| residual(&ls, q).powi(2)).sum();
            prop_assert!(rss_ls <= rss_min + 1e-9);
        }

        #[test]
        fn outlier_free_data_is_reproduced(a in -2.0f64..2.0, b in -2.0f64..2.0, c in 100.0f64..200.0, seed in any::<u64>()) {
            let pts: Vec<Sample> = (0..25).map(|i| {
                let (x, y) = ((i % 5) as f64 * 2.0, (i / 5) as f64 * 3.0);
                s(x, y, a * x + b * y + c)
            }).collect();
            let pl = ransac_plane(&pts, &RansacParams { seed, ..RansacParams::default() }).unwrap();
            prop_assert_eq!(pl.inlier_count, 25);
            for p in &pts {
                prop_assert!((pl.eval(p.x, p.y) - p.z).abs() <= 1e-6);
            }
        }
    }
}
