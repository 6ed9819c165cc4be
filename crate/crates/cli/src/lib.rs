//! Command-line front end for `rangesr`.
//!
//! Every subcommand resolves its parameters as defaults, then `--config`,
//! then flags, then positional `key=value` overrides. It writes
//! `config.txt` next to its outputs; passing that file back through
//! `--config` repeats the run exactly.

pub mod config;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rangesr::io::{self, GrayImage};
use rangesr::meanshift::segment;
use rangesr::{decimate, run_experiment, super_resolve, ColorImage, ExperimentRecord, SegmentMap};

pub use config::{ConfigError, RunConfig};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "RANGESR_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "rangesr",
    version,
    about = "Color-guided range image super-resolution"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Upsampling factor.
    #[arg(long, global = true)]
    pub factor: Option<u32>,
    /// Output directory.
    #[arg(long, global = true, env = OUT_ENV, default_value = "rangesr-out")]
    pub out: PathBuf,
    /// key=value config file; flags and overrides take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// RANSAC seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Log more (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Super-resolve a low-resolution range image guided by a color image.
    Sr {
        /// Low-resolution range image (PGM or grayscale PNG).
        #[arg(long)]
        range: PathBuf,
        /// High-resolution color image (PPM or PNG).
        #[arg(long)]
        color: PathBuf,
        /// Parameter overrides such as `cost.lambda_p=0.5`.
        overrides: Vec<String>,
    },
    /// Decimate a ground-truth range image, super-resolve it, and score the
    /// result against bicubic interpolation.
    Eval {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        color: PathBuf,
        /// Dataset name for the record; defaults to the truth file stem.
        #[arg(long)]
        name: Option<String>,
        overrides: Vec<String>,
    },
    /// Mean-shift segmentation of a color image.
    Segment {
        #[arg(long)]
        color: PathBuf,
        /// Spatial bandwidth, shorthand for `ms.spatial`.
        #[arg(long, allow_negative_numbers = true)]
        hs: Option<f64>,
        /// Color bandwidth, shorthand for `ms.color`.
        #[arg(long, allow_negative_numbers = true)]
        hr: Option<f64>,
        overrides: Vec<String>,
    },
    /// Decimate a range image by the configured factor.
    Downsample {
        #[arg(long)]
        truth: PathBuf,
        overrides: Vec<String>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Algorithm(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Io(_) => 2,
            CliError::Algorithm(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<rangesr::Error> for CliError {
    fn from(e: rangesr::Error) -> Self {
        use rangesr::Error as E;
        match e {
            E::Io { .. } | E::Format(_) | E::UnexpectedEof => CliError::Io(e.to_string()),
            E::InvalidParameter(_) | E::Size { .. } => CliError::Usage(e.to_string()),
            E::EmptyInput(_) => CliError::Algorithm(e.to_string()),
        }
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Resolves the effective configuration for a subcommand.
pub fn resolve_config(global: &GlobalArgs, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &global.config {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        cfg.apply_text(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    }
    if let Some(f) = global.factor {
        cfg.set("factor", &f.to_string())?;
    }
    if let Some(seed) = global.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    for item in overrides {
        cfg.apply_override(item)?;
    }
    cfg.sr.validate()?;
    Ok(cfg)
}

fn check_inputs(paths: &[&Path]) -> Result<(), CliError> {
    for p in paths {
        if !p.is_file() {
            return Err(CliError::Io(format!("{}: no such file", p.display())));
        }
    }
    Ok(())
}

struct Run {
    out: PathBuf,
    cfg: RunConfig,
    verbose: bool,
}

impl Run {
    fn start(
        global: &GlobalArgs,
        overrides: &[String],
        inputs: &[&Path],
        header: &str,
    ) -> Result<Self, CliError> {
        let cfg = resolve_config(global, overrides)?;
        check_inputs(inputs)?;
        fs::create_dir_all(&global.out)
            .map_err(|e| CliError::Io(format!("{}: {e}", global.out.display())))?;
        let run = Self {
            out: global.out.clone(),
            cfg,
            verbose: global.verbose > 0,
        };
        let mut echo = format!("# rangesr {header}\n");
        for p in inputs {
            echo.push_str(&format!("# input {}\n", p.display()));
        }
        echo.push_str(&run.cfg.to_text());
        write_file(&run.path("config.txt"), echo.as_bytes())?;
        Ok(run)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.global.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let g = &cli.global;
    match &cli.command {
        Command::Sr {
            range,
            color,
            overrides,
        } => cmd_sr(g, range, color, overrides),
        Command::Eval {
            truth,
            color,
            name,
            overrides,
        } => cmd_eval(g, truth, color, name.as_deref(), overrides),
        Command::Segment {
            color,
            hs,
            hr,
            overrides,
        } => {
            let mut all = Vec::new();
            if let Some(v) = hs {
                all.push(format!("ms.spatial={v}"));
            }
            if let Some(v) = hr {
                all.push(format!("ms.color={v}"));
            }
            all.extend(overrides.iter().cloned());
            cmd_segment(g, color, &all)
        }
        Command::Downsample { truth, overrides } => cmd_downsample(g, truth, overrides),
    }
}

fn cmd_sr(
    g: &GlobalArgs,
    range: &Path,
    color: &Path,
    overrides: &[String],
) -> Result<(), CliError> {
    let run = Run::start(g, overrides, &[range, color], "sr")?;
    let lr = io::read_range(range)?;
    let color = io::read_color(color)?;

    let out = super_resolve(&lr, &color, &run.cfg.sr)?;
    let mut log = String::new();
    for p in &out.passes {
        log.push_str(&format!("{p}\n"));
        if run.verbose {
            eprintln!("{p}");
        }
    }
    log.push_str(&format!("fallback_pixels={}\n", out.fallback_pixels));
    io::write_range(run.path("sr.pgm"), &out.range)?;
    write_file(&run.path("passes.txt"), log.as_bytes())?;
    println!(
        "{}x{} -> {}x{} in {} passes, {} fallback pixels",
        lr.width(),
        lr.height(),
        out.range.width(),
        out.range.height(),
        out.passes.len(),
        out.fallback_pixels
    );
    Ok(())
}

fn cmd_eval(
    g: &GlobalArgs,
    truth_path: &Path,
    color_path: &Path,
    name: Option<&str>,
    overrides: &[String],
) -> Result<(), CliError> {
    let run = Run::start(g, overrides, &[truth_path, color_path], "eval")?;
    let truth = io::read_range(truth_path)?;
    let color = io::read_color(color_path)?;
    let dataset = name
        .map(str::to_string)
        .or_else(|| {
            truth_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
        })
        .unwrap_or_else(|| "dataset".into());

    let exp = run_experiment(&truth, &color, &run.cfg.sr, run.cfg.tau)?;
    log::info!(
        "{dataset}: method {:.3}s, bicubic {:.3}s",
        exp.method.seconds,
        exp.baseline.seconds
    );
    let record = ExperimentRecord::new(&dataset, run.cfg.hash(), &exp);

    let mut report = format!("{record}\n");
    for p in &exp.passes {
        report.push_str(&format!("  {p}\n"));
        if run.verbose {
            eprintln!("{p}");
        }
    }
    if exp.passes.len() > rangesr::pipeline::TYPICAL_MAX_PASSES {
        report.push_str(&format!(
            "  note: labeling took {} passes, more than the typical {}\n",
            exp.passes.len(),
            rangesr::pipeline::TYPICAL_MAX_PASSES
        ));
    }
    let json = serde_json::to_string(&record).map_err(|e| CliError::Io(e.to_string()))?;

    io::write_range(run.path("lr.pgm"), &exp.low_res)?;
    io::write_range(run.path("sr.pgm"), &exp.output)?;
    io::write_range(run.path("bicubic.pgm"), &exp.bicubic)?;
    write_file(&run.path("report.txt"), report.as_bytes())?;
    write_file(&run.path("records.jsonl"), format!("{json}\n").as_bytes())?;
    print!("{report}");
    Ok(())
}

/// Deterministic, well-spread display color for a segment id.
fn id_color(id: u32) -> [u8; 3] {
    let h = id.wrapping_mul(0x9E37_79B1).rotate_left(13) ^ 0x5bd1_e995;
    let h = h.wrapping_mul(0x85eb_ca6b);
    [(h >> 24) as u8, (h >> 16) as u8, (h >> 8) as u8]
}

pub fn segment_visualization(seg: &SegmentMap) -> ColorImage {
    ColorImage::from_fn(seg.width(), seg.height(), |x, y| id_color(seg.id(x, y)))
}

fn cmd_segment(g: &GlobalArgs, color_path: &Path, overrides: &[String]) -> Result<(), CliError> {
    let run = Run::start(g, overrides, &[color_path], "segment")?;
    let color = io::read_color(color_path)?;
    let seg = segment(&color, &run.cfg.sr.ms)?;
    if seg.len() > usize::from(u16::MAX) + 1 {
        return Err(CliError::Algorithm(format!(
            "{} segments do not fit a 16-bit id raster",
            seg.len()
        )));
    }
    let ids = GrayImage {
        width: seg.width(),
        height: seg.height(),
        maxval: u16::MAX,
        data: seg.ids().iter().map(|&id| id as u16).collect(),
    };
    io::write_gray(run.path("segments.pgm"), &ids)?;
    io::write_color_png(run.path("segments.png"), &segment_visualization(&seg))?;
    println!("{} segments", seg.len());
    Ok(())
}

fn cmd_downsample(g: &GlobalArgs, truth_path: &Path, overrides: &[String]) -> Result<(), CliError> {
    let run = Run::start(g, overrides, &[truth_path], "downsample")?;
    let truth = io::read_range(truth_path)?;
    let lr = decimate(&truth, run.cfg.sr.factor, run.cfg.sr.anchor);
    io::write_range(run.path("lr.pgm"), &lr)?;
    println!(
        "{}x{} -> {}x{}",
        truth.width(),
        truth.height(),
        lr.width(),
        lr.height()
    );
    Ok(())
}
