//! Flat `key=value` configuration: parsing, overrides and the echo file.
//!
//! The echo written by every run lists every effective parameter in a fixed
//! order. Feeding it back through `--config` reproduces the run exactly.

use std::fmt::Write as _;

use rangesr::eval::DEFAULT_BAD_THRESHOLD;
use rangesr::{Anchor, ColorSpace, Neighborhood, SrConfig, SrFactor, VisibilityPolicy};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    BadValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("line {line}: expected key=value, got `{text}`")]
    Syntax { line: usize, text: String },
}

/// Every recognized key, in echo order.
pub const KEYS: &[&str] = &[
    "factor",
    "anchor",
    "seed",
    "ms.spatial",
    "ms.color",
    "ms.min_region",
    "ms.max_iters",
    "ms.converge_tol",
    "ms.color_space",
    "bw_growth",
    "max_passes",
    "cost.lambda_p",
    "cost.lambda_m",
    "cost.n_pl",
    "cost.color_eps",
    "ransac.iters",
    "ransac.inlier_tol",
    "ransac.min_inlier_frac",
    "visibility_policy",
    "neighborhood",
    "quant",
    "eval.tau",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sr: SrConfig,
    /// Bad-pixel threshold for metrics.
    pub tau: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            sr: SrConfig::default(),
            tau: DEFAULT_BAD_THRESHOLD,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn bad(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        let sr = &mut self.sr;
        match key.trim() {
            "factor" => {
                let f: u32 = parse(key, value)?;
                sr.factor = SrFactor::new(f).map_err(|e| bad(key, value, &e.to_string()))?;
            }
            "anchor" => {
                sr.anchor = match value {
                    "top-left" => Anchor::TopLeft,
                    "center" => Anchor::Center,
                    _ => return Err(bad(key, value, "expected top-left or center")),
                }
            }
            "seed" => sr.ransac.seed = parse(key, value)?,
            "ms.spatial" => sr.ms.spatial = parse(key, value)?,
            "ms.color" => sr.ms.color = parse(key, value)?,
            "ms.min_region" => sr.ms.min_region = parse(key, value)?,
            "ms.max_iters" => sr.ms.max_iters = parse(key, value)?,
            "ms.converge_tol" => sr.ms.converge_tol = parse(key, value)?,
            "ms.color_space" => {
                sr.ms.color_space = match value {
                    "luv" => ColorSpace::Luv,
                    "rgb" => ColorSpace::Rgb,
                    _ => return Err(bad(key, value, "expected luv or rgb")),
                }
            }
            "bw_growth" => sr.bw_growth = parse(key, value)?,
            "max_passes" => sr.max_passes = parse(key, value)?,
            "cost.lambda_p" => sr.cost.lambda_p = parse(key, value)?,
            "cost.lambda_m" => sr.cost.lambda_m = parse(key, value)?,
            "cost.n_pl" => sr.cost.n_pl = parse(key, value)?,
            "cost.color_eps" => sr.cost.color_eps = parse(key, value)?,
            "ransac.iters" => sr.ransac.iters = parse(key, value)?,
            "ransac.inlier_tol" => sr.ransac.inlier_tol = parse(key, value)?,
            "ransac.min_inlier_frac" => sr.ransac.min_inlier_frac = parse(key, value)?,
            "visibility_policy" => {
                sr.visibility = match value {
                    "observed" => VisibilityPolicy::ObservedOnly,
                    "observed+labeled" => VisibilityPolicy::ObservedAndLabeled,
                    _ => return Err(bad(key, value, "expected observed or observed+labeled")),
                }
            }
            "neighborhood" => {
                sr.neighborhood = match value {
                    "4" => Neighborhood::Four,
                    "8" => Neighborhood::Eight,
                    _ => return Err(bad(key, value, "expected 4 or 8")),
                }
            }
            "quant" => sr.quant = parse(key, value)?,
            "eval.tau" => {
                let tau: f64 = parse(key, value)?;
                if !(tau.is_finite() && tau >= 0.0) {
                    return Err(bad(key, value, "must be a finite value >= 0"));
                }
                self.tau = tau;
            }
            other => return Err(ConfigError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Applies one `key=value` override.
    pub fn apply_override(&mut self, item: &str) -> Result<(), ConfigError> {
        let (key, value) = item.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: 0,
            text: item.to_string(),
        })?;
        self.set(key, value)
    }

    /// Applies a config file body. Blank lines and `#` comments are ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: n + 1,
                text: line.to_string(),
            })?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn value(&self, key: &str) -> Option<String> {
        let sr = &self.sr;
        // f64 Display prints the shortest string that parses back to the
        // same value, so the echo round-trips exactly.
        let v = match key {
            "factor" => sr.factor.to_string(),
            "anchor" => match sr.anchor {
                Anchor::TopLeft => "top-left".into(),
                Anchor::Center => "center".into(),
            },
            "seed" => sr.ransac.seed.to_string(),
            "ms.spatial" => sr.ms.spatial.to_string(),
            "ms.color" => sr.ms.color.to_string(),
            "ms.min_region" => sr.ms.min_region.to_string(),
            "ms.max_iters" => sr.ms.max_iters.to_string(),
            "ms.converge_tol" => sr.ms.converge_tol.to_string(),
            "ms.color_space" => match sr.ms.color_space {
                ColorSpace::Luv => "luv".into(),
                ColorSpace::Rgb => "rgb".into(),
            },
            "bw_growth" => sr.bw_growth.to_string(),
            "max_passes" => sr.max_passes.to_string(),
            "cost.lambda_p" => sr.cost.lambda_p.to_string(),
            "cost.lambda_m" => sr.cost.lambda_m.to_string(),
            "cost.n_pl" => sr.cost.n_pl.to_string(),
            "cost.color_eps" => sr.cost.color_eps.to_string(),
            "ransac.iters" => sr.ransac.iters.to_string(),
            "ransac.inlier_tol" => sr.ransac.inlier_tol.to_string(),
            "ransac.min_inlier_frac" => sr.ransac.min_inlier_frac.to_string(),
            "visibility_policy" => match sr.visibility {
                VisibilityPolicy::ObservedOnly => "observed".into(),
                VisibilityPolicy::ObservedAndLabeled => "observed+labeled".into(),
            },
            "neighborhood" => match sr.neighborhood {
                Neighborhood::Four => "4".into(),
                Neighborhood::Eight => "8".into(),
            },
            "quant" => sr.quant.to_string(),
            "eval.tau" => self.tau.to_string(),
            _ => return None,
        };
        Some(v)
    }

    /// All effective parameters, one `key=value` per line in [`KEYS`] order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let value = self.value(key).expect("every listed key has a value");
            let _ = writeln!(out, "{key}={value}");
        }
        out
    }

    /// Short content hash of [`Self::to_text`], used to tag result records.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}
