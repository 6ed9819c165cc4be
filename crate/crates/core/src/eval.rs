//! Evaluation harness: bicubic baseline, error metrics and paired
//! method-vs-baseline experiments on a ground-truth range image.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lift::{decimate, Anchor, SrFactor};
use crate::pipeline::{super_resolve, PassReport, SrConfig};
use crate::raster::{ColorImage, RangeImage};

/// Default bad-pixel threshold, range levels.
pub const DEFAULT_BAD_THRESHOLD: f64 = 1.0;

/// Catmull-Rom cubic convolution kernel (`a = -0.5`).
#[inline]
pub fn catmull_rom(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        ((A + 2.0) * t - (A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((A * t - 5.0 * A) * t + 8.0 * A) * t - 4.0 * A
    } else {
        0.0
    }
}

/// Bicubic upsampling to a `width`×`height` grid. LR sample `(j, i)` sits at
/// the HR lattice site used by [`decimate`] with the same anchor, so the
/// interpolant passes through every observation. Borders are clamped;
/// negative overshoot is clipped to 0.
pub fn bicubic_upsample(
    lr: &RangeImage,
    f: SrFactor,
    anchor: Anchor,
    width: usize,
    height: usize,
) -> RangeImage {
    let fac = f.get() as f64;
    let off = anchor.offset(f) as f64;
    let (lw, lh) = (lr.width() as isize, lr.height() as isize);
    let taps = |coord: usize, n: isize| -> ([isize; 4], [f64; 4]) {
        let u = (coord as f64 - off) / fac;
        let base = u.floor();
        let t = u - base;
        let base = base as isize;
        let mut idx = [0isize; 4];
        let mut wts = [0.0; 4];
        for k in 0..4 {
            idx[k] = (base - 1 + k as isize).clamp(0, n - 1);
            wts[k] = catmull_rom(t - (k as f64 - 1.0));
        }
        (idx, wts)
    };
    let cols: Vec<_> = (0..width).map(|x| taps(x, lw)).collect();
    let rows: Vec<_> = (0..height).map(|y| taps(y, lh)).collect();
    RangeImage::from_fn(width, height, |x, y| {
        let (xi, xw) = &cols[x];
        let (yi, yw) = &rows[y];
        let mut acc = 0.0;
        for a in 0..4 {
            let mut row = 0.0;
            for b in 0..4 {
                row += xw[b] * f64::from(lr.get(xi[b] as usize, yi[a] as usize));
            }
            acc += yw[a] * row;
        }
        acc.max(0.0) as f32
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rmse: f64,
    pub mae: f64,
    /// Fraction of pixels with absolute error above `threshold`.
    pub bad_ratio: f64,
    pub threshold: f64,
    pub pixels: usize,
    /// Wall time of the method that produced the prediction. Not serialized
    /// and not displayed, so reports stay reproducible byte for byte.
    #[serde(skip)]
    pub seconds: f64,
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "rmse={:.4} mae={:.4} bad({})={:.4} pixels={}",
            self.rmse, self.mae, self.threshold, self.bad_ratio, self.pixels
        )
    }
}

pub fn compute_metrics(
    pred: &RangeImage,
    truth: &RangeImage,
    threshold: f64,
) -> Result<MetricsReport> {
    if pred.dims() != truth.dims() {
        return Err(Error::Size {
            expected: truth.dims(),
            found: pred.dims(),
        });
    }
    let n = pred.data().len();
    let (mut se, mut ae, mut bad) = (0.0f64, 0.0f64, 0usize);
    for (p, t) in pred.data().iter().zip(truth.data()) {
        let e = (f64::from(*p) - f64::from(*t)).abs();
        se += e * e;
        ae += e;
        if e > threshold {
            bad += 1;
        }
    }
    Ok(MetricsReport {
        rmse: (se / n as f64).sqrt(),
        mae: ae / n as f64,
        bad_ratio: bad as f64 / n as f64,
        threshold,
        pixels: n,
        seconds: 0.0,
    })
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub factor: SrFactor,
    pub method: MetricsReport,
    pub baseline: MetricsReport,
    pub low_res: RangeImage,
    pub output: RangeImage,
    pub bicubic: RangeImage,
    pub passes: Vec<PassReport>,
    pub fallback_pixels: usize,
}

/// Decimates `truth`, super-resolves it with `cfg` and with bicubic
/// interpolation, and scores both against `truth`.
pub fn run_experiment(
    truth: &RangeImage,
    color: &ColorImage,
    cfg: &SrConfig,
    threshold: f64,
) -> Result<Experiment> {
    if (color.width(), color.height()) != truth.dims() {
        return Err(Error::Size {
            expected: truth.dims(),
            found: (color.width(), color.height()),
        });
    }
    let (w, h) = truth.dims();
    let low_res = decimate(truth, cfg.factor, cfg.anchor);

    let start = Instant::now();
    let sr = super_resolve(&low_res, color, cfg)?;
    let method_secs = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let bicubic = bicubic_upsample(&low_res, cfg.factor, cfg.anchor, w, h);
    let baseline_secs = start.elapsed().as_secs_f64();

    let method = MetricsReport {
        seconds: method_secs,
        ..compute_metrics(&sr.range, truth, threshold)?
    };
    let baseline = MetricsReport {
        seconds: baseline_secs,
        ..compute_metrics(&bicubic, truth, threshold)?
    };
    Ok(Experiment {
        factor: cfg.factor,
        method,
        baseline,
        low_res,
        output: sr.range,
        bicubic,
        passes: sr.passes,
        fallback_pixels: sr.fallback_pixels,
    })
}

/// One machine-readable line per experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub dataset: String,
    pub factor: u32,
    pub config_hash: String,
    pub method: MetricsReport,
    pub bicubic: MetricsReport,
    pub passes: usize,
    pub fallback_pixels: usize,
}

impl ExperimentRecord {
    pub fn new(
        dataset: impl Into<String>,
        config_hash: impl Into<String>,
        exp: &Experiment,
    ) -> Self {
        Self {
            dataset: dataset.into(),
            factor: exp.factor.get() as u32,
            config_hash: config_hash.into(),
            method: exp.method,
            bicubic: exp.baseline,
            passes: exp.passes.len(),
            fallback_pixels: exp.fallback_pixels,
        }
    }
}

impl fmt::Display for ExperimentRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "dataset: {}  factor: {}  config: {}",
            self.dataset, self.factor, self.config_hash
        )?;
        writeln!(f, "  method   {}", self.method)?;
        writeln!(f, "  bicubic  {}", self.bicubic)?;
        write!(
            f,
            "  passes: {}  fallback pixels: {}",
            self.passes, self.fallback_pixels
        )
    }
}
