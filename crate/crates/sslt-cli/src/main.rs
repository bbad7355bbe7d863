//! `sslt` command line: synthesize sequences, track, run the full pipeline,
//! evaluate a run, and render overlays.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use sslt::dataset::{generate_synthetic, load_sequence, split_challenge_suite, Sequence, SynthConfig};
use sslt::geometry::BoundingBox;
use sslt::imaging::{rasterize_box, save_image, Image, Mask};
use sslt::metrics::{evaluate_run, EvalConfig};
use sslt::pipeline::{run_sequence, write_sequence_result, PipelineConfig};
use sslt::tracker::{BoxProposer, CorrelationTracker};

#[derive(Parser)]
#[command(name = "sslt", version, about = "Saliency-supervised tracking and segmentation")]
struct Cli {
    /// Print per-sequence progress to stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic sequences with ground truth.
    Synth {
        /// Output directory; one subdirectory per sequence.
        #[arg(long)]
        out: PathBuf,
        /// Generate the built-in seven-sequence challenge suite.
        #[arg(long, conflicts_with = "config")]
        suite: bool,
        /// JSON file describing a single synthetic sequence.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed (highest precedence; SSLT_SEED is the fallback).
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Tracker-only trajectories: boxes.csv per sequence.
    Track {
        /// Dataset root (one subdirectory per sequence) or a single sequence.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Pipeline JSON config; only the tracker section is used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Full SSLT pipeline over every sequence.
    Run {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Pipeline JSON config mirroring the PipelineConfig schema.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed override (precedence: flag > config > SSLT_SEED).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Evaluate a finished run against ground truth.
    Eval {
        /// Run directory produced by `sslt run`.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Boundary-F tolerance as a fraction of the image diagonal.
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Render per-frame overlay PNGs (GT box, f0, final box, mask contour).
    Overlay {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Runtime failures exit 1; config schema violations exit 2.
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn runtime(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }

    fn usage(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }
}

impl From<sslt::Error> for CliError {
    fn from(e: sslt::Error) -> Self {
        CliError::runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn env_seed() -> Option<u64> {
    std::env::var("SSLT_SEED").ok().and_then(|s| s.parse().ok())
}

/// Parses a JSON config file, reporting the offending field path on schema
/// violations.
fn load_json_config<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        CliError::usage(format!("config {}: field `{}`: {}", path.display(), e.path(), e.inner()))
    })
}

/// Seed precedence: --seed flag, then an explicit `seed` key in the config
/// file, then SSLT_SEED, then the schema default.
fn resolve_seed(flag: Option<u64>, config_path: Option<&Path>, config_seed: u64) -> u64 {
    if let Some(s) = flag {
        return s;
    }
    let config_has_seed = config_path
        .and_then(|p| fs::read_to_string(p).ok())
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .map(|v| v.get("seed").is_some())
        .unwrap_or(false);
    if config_has_seed {
        return config_seed;
    }
    env_seed().unwrap_or(config_seed)
}

/// A sequence directory is one holding groundtruth.txt; a dataset root holds
/// several of them.
fn discover_sequences(data: &Path) -> CliResult<Vec<PathBuf>> {
    if data.join("groundtruth.txt").is_file() {
        return Ok(vec![data.to_path_buf()]);
    }
    let mut dirs = Vec::new();
    let entries = fs::read_dir(data)
        .map_err(|e| CliError::runtime(format!("cannot read {}: {e}", data.display())))?;
    for entry in entries {
        let entry = entry.map_err(|e| CliError::runtime(e.to_string()))?;
        if entry.path().join("groundtruth.txt").is_file() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    if dirs.is_empty() {
        return Err(CliError::runtime(format!(
            "{} contains no sequences (no groundtruth.txt found)",
            data.display()
        )));
    }
    Ok(dirs)
}

fn install_pool(workers: Option<usize>) -> CliResult<()> {
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::usage("--workers must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::runtime(e.to_string()))?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let verbose = cli.verbose;
    match cli.command {
        Command::Synth { out, suite, config, seed } => cmd_synth(&out, suite, config.as_deref(), seed, verbose),
        Command::Track { data, out, config, workers } => {
            install_pool(workers)?;
            cmd_track(&data, &out, config.as_deref(), verbose)
        }
        Command::Run { data, out, config, seed, workers } => {
            install_pool(workers)?;
            cmd_run(&data, &out, config.as_deref(), seed, verbose)
        }
        Command::Eval { run, data, tolerance, workers } => {
            install_pool(workers)?;
            cmd_eval(&run, &data, tolerance)
        }
        Command::Overlay { run, data, out } => cmd_overlay(&run, &data, &out, verbose),
    }
}

fn cmd_synth(
    out: &Path,
    suite: bool,
    config: Option<&Path>,
    seed: Option<u64>,
    verbose: bool,
) -> CliResult<()> {
    let seed = seed.or_else(env_seed).unwrap_or(0);
    let configs: Vec<SynthConfig> = if suite {
        split_challenge_suite(seed)
    } else if let Some(path) = config {
        vec![load_json_config(path)?]
    } else {
        return Err(CliError::usage("synth requires either --suite or --config"));
    };
    for cfg in configs {
        if verbose {
            eprintln!("synthesizing {}", cfg.name);
        }
        generate_synthetic(&cfg, &out.join(&cfg.name))?;
    }
    Ok(())
}

fn load_pipeline_config(config: Option<&Path>, seed: Option<u64>) -> CliResult<PipelineConfig> {
    let mut cfg: PipelineConfig = match config {
        Some(path) => load_json_config(path)?,
        None => PipelineConfig::default(),
    };
    cfg.seed = resolve_seed(seed, config, cfg.seed);
    cfg.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(cfg)
}

fn load_named_sequence(dir: &Path) -> CliResult<(Sequence, Vec<BoundingBox>, String)> {
    let (seq, gt) = load_sequence(dir)?;
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| CliError::runtime(format!("bad sequence path {}", dir.display())))?;
    Ok((seq, gt.boxes, name))
}

fn cmd_track(data: &Path, out: &Path, config: Option<&Path>, verbose: bool) -> CliResult<()> {
    let cfg = load_pipeline_config(config, None)?;
    let dirs = discover_sequences(data)?;
    dirs.par_iter().try_for_each(|dir| -> CliResult<()> {
        let (seq, gt_boxes, name) = load_named_sequence(dir)?;
        if verbose {
            eprintln!("tracking {name}");
        }
        let tracker = CorrelationTracker { cfg: cfg.tracker.clone() };
        let boxes = tracker.propose(&seq, &gt_boxes[0])?;
        let seq_out = out.join(&name);
        fs::create_dir_all(&seq_out).map_err(|e| CliError::runtime(e.to_string()))?;
        let mut csv = String::from("frame,x,y,w,h,source\n");
        for (i, b) in boxes.iter().enumerate() {
            csv.push_str(&format!("{},{},{},{},{},tracker-only\n", i + 1, b.x, b.y, b.w, b.h));
        }
        fs::write(seq_out.join("boxes.csv"), csv).map_err(|e| CliError::runtime(e.to_string()))
    })
}

fn cmd_run(
    data: &Path,
    out: &Path,
    config: Option<&Path>,
    seed: Option<u64>,
    verbose: bool,
) -> CliResult<()> {
    let cfg = load_pipeline_config(config, seed)?;
    let dirs = discover_sequences(data)?;
    dirs.par_iter().try_for_each(|dir| -> CliResult<()> {
        let (seq, gt_boxes, name) = load_named_sequence(dir)?;
        if verbose {
            eprintln!("running {name}");
        }
        let result = run_sequence(&seq, &gt_boxes[0], &cfg)?;
        write_sequence_result(&result, &out.join(&name))?;
        Ok(())
    })
}

fn cmd_eval(run: &Path, data: &Path, tolerance: Option<f64>) -> CliResult<()> {
    let mut cfg = EvalConfig::default();
    if let Some(t) = tolerance {
        if !(t > 0.0) {
            return Err(CliError::usage("--tolerance must be > 0"));
        }
        cfg.f_tolerance = t;
    }
    let output = evaluate_run(run, data, &cfg)?;
    println!(
        "evaluated {} sequence(s): J {:.4}, F {:.4}, S {:.4}, DP@100 {:.4}, AUC {:.4}",
        output.sequences.len(),
        output.report.j_mean,
        output.report.f_mean,
        output.report.s_measure,
        output.precision.score_at_reference,
        output.success.auc,
    );
    Ok(())
}

fn parse_box_csv(path: &Path, fields: usize) -> CliResult<Vec<BoundingBox>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::runtime(format!("cannot read {}: {e}", path.display())))?;
    let mut boxes = Vec::new();
    for line in text.lines().skip(1) {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != fields {
            return Err(CliError::runtime(format!("{}: malformed row", path.display())));
        }
        let v: Vec<f64> = parts[1..5]
            .iter()
            .map(|s| s.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::runtime(format!("{}: bad number", path.display())))?;
        boxes.push(
            BoundingBox::new(v[0], v[1], v[2], v[3]).map_err(|e| CliError::runtime(e.to_string()))?,
        );
    }
    Ok(boxes)
}

const COLOR_GT: [f64; 3] = [0.1, 0.9, 0.1];
const COLOR_F0: [f64; 3] = [0.2, 0.4, 1.0];
const COLOR_FN: [f64; 3] = [1.0, 0.15, 0.15];
const COLOR_MASK: [f64; 3] = [1.0, 0.9, 0.1];

fn put_pixel(img: &mut Image, x: i64, y: i64, color: [f64; 3]) {
    if x < 0 || y < 0 || x as usize >= img.width || y as usize >= img.height {
        return;
    }
    for c in 0..3 {
        img.set(x as usize, y as usize, c, color[c]);
    }
}

fn draw_box(img: &mut Image, b: &BoundingBox, color: [f64; 3]) {
    let (x, y, w, h) = rasterize_box(b);
    for dx in 0..w as i64 {
        put_pixel(img, x + dx, y, color);
        put_pixel(img, x + dx, y + h as i64 - 1, color);
    }
    for dy in 0..h as i64 {
        put_pixel(img, x, y + dy, color);
        put_pixel(img, x + w as i64 - 1, y + dy, color);
    }
}

fn draw_mask_contour(img: &mut Image, mask: &Mask, color: [f64; 3]) {
    let (w, h) = (mask.width as i64, mask.height as i64);
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x as usize, y as usize) {
                continue;
            }
            let interior = [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)].iter().all(|&(dx, dy)| {
                let (nx, ny) = (x + dx, y + dy);
                nx >= 0 && ny >= 0 && nx < w && ny < h && mask.get(nx as usize, ny as usize)
            });
            if !interior {
                put_pixel(img, x, y, color);
            }
        }
    }
}

fn to_rgb(img: &Image) -> Image {
    if img.channels == 3 {
        return img.clone();
    }
    let mut out = Image::filled(img.width, img.height, 3, 0.0);
    for y in 0..img.height {
        for x in 0..img.width {
            let v = img.get(x, y, 0);
            for c in 0..3 {
                out.set(x, y, c, v);
            }
        }
    }
    out
}

fn cmd_overlay(run: &Path, data: &Path, out: &Path, verbose: bool) -> CliResult<()> {
    let mut any = false;
    for dir in discover_sequences(data)? {
        let name = dir.file_name().unwrap().to_string_lossy().into_owned();
        let seq_run = run.join(&name);
        if !seq_run.join("boxes.csv").is_file() {
            continue;
        }
        any = true;
        if verbose {
            eprintln!("rendering {name}");
        }
        let (seq, gt) = load_sequence(&dir)?;
        let fn_boxes = parse_box_csv(&seq_run.join("boxes.csv"), 6)?;
        let f0_path = seq_run.join("f0.csv");
        let f0_boxes =
            if f0_path.is_file() { Some(parse_box_csv(&f0_path, 5)?) } else { None };
        let seq_out = out.join(&name);
        fs::create_dir_all(&seq_out).map_err(|e| CliError::runtime(e.to_string()))?;
        for (i, frame) in seq.frames.iter().enumerate() {
            let mut canvas = to_rgb(frame);
            let mask_path = seq_run.join("masks").join(format!("{:06}.png", i + 1));
            if mask_path.is_file() {
                let mask = sslt::imaging::load_mask(&mask_path)?;
                draw_mask_contour(&mut canvas, &mask, COLOR_MASK);
            }
            draw_box(&mut canvas, &gt.boxes[i], COLOR_GT);
            if let Some(f0) = &f0_boxes {
                draw_box(&mut canvas, &f0[i], COLOR_F0);
            }
            draw_box(&mut canvas, &fn_boxes[i], COLOR_FN);
            save_image(&canvas, &seq_out.join(format!("{:06}.png", i + 1)))?;
        }
    }
    if !any {
        return Err(CliError::runtime(format!(
            "no evaluated sequences from {} found under {}",
            data.display(),
            run.display()
        )));
    }
    Ok(())
}
