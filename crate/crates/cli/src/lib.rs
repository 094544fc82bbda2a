//! Command-line front end for the `acseg` pipeline.
//!
//! Every subcommand prints its resolved parameters as `key = value` lines
//! before running. Apart from the positional paths, that block can be fed
//! straight back through `--config`.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use acseg::baseline::{BaselineSpec, GradientOperator};
use acseg::etd::Scheme;
use acseg::metrics::{full_report, MetricReport};
use acseg::nonlocal::{detect_edges_with_table, CoeffCache, KernelSpec, DEFAULT_QUAD_LEVEL};
use acseg::raster::{
    add_gaussian_noise, load_image, load_mask, save_image, save_mask, synth_two_phase, EdgeMap, ShapeSpec,
};
use acseg::segmentation::{segment, write_artifacts, Init, OuterCriterion, SegConfig};
use clap::{Args, Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_ARGUMENT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "acseg", version, about = "Nonlocal edge detection and Allen-Cahn segmentation")]
pub struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "ACSEG_THREADS")]
    pub threads: Option<usize>,
    /// Plain-text `key = value` file; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Write an edge map of one image.
    Detect(DetectArgs),
    /// Two-stage segmentation; writes mask, overlay, diagnostics and summary.
    Segment(SegmentArgs),
    /// Synthetic two-phase test image with optional Gaussian noise.
    Synth(SynthArgs),
    /// FPR/FNR/RSE/error of candidates against a truth mask, as CSV.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    pub input: PathBuf,
    #[arg(long, value_parser = ["nonlocal", "roberts", "prewitt", "sobel", "log", "canny"])]
    pub method: Option<String>,
    #[arg(long)]
    pub delta: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Gradient magnitude threshold (roberts/prewitt/sobel).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Gaussian scale for log and canny.
    #[arg(long)]
    pub varsigma: Option<f64>,
    #[arg(long)]
    pub zero_tol: Option<f64>,
    #[arg(long)]
    pub low: Option<f64>,
    #[arg(long)]
    pub high: Option<f64>,
    #[arg(long)]
    pub channel: Option<usize>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    pub input: PathBuf,
    #[arg(long, value_parser = ["etd1", "etdrk2"])]
    pub scheme: Option<String>,
    #[arg(long, value_parser = ["nonlocal", "threshold", "mask"])]
    pub init: Option<String>,
    /// Threshold level for `--init threshold`.
    #[arg(long)]
    pub i0: Option<f64>,
    /// Initial mask for `--init mask`.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[arg(long)]
    pub eps1_stage: Option<f64>,
    #[arg(long)]
    pub eps2_stage: Option<f64>,
    /// Width of the regularized Heaviside.
    #[arg(long)]
    pub heaviside_eps: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Fixed stabilizer; each stage's bound when omitted.
    #[arg(long)]
    pub stabilizer: Option<f64>,
    #[arg(long)]
    pub steady_tol: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub outer_tol: Option<f64>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    #[arg(long, value_parser = ["field", "mask"])]
    pub outer_criterion: Option<String>,
    /// Abort when the discrete energy rises.
    #[arg(long)]
    pub strict_energy: Option<bool>,
    #[arg(long)]
    pub delta: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub channel: Option<usize>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub out_prefix: Option<PathBuf>,
    /// Ground-truth mask; adds a metric report to the output.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_parser = ["disk", "rectangle", "blobs"])]
    pub shape: Option<String>,
    /// `WIDTHxHEIGHT`.
    #[arg(long)]
    pub size: Option<String>,
    /// Disk radius; defaults to 5/16 of the shorter side.
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub noise_std: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub out_truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub truth: PathBuf,
    #[arg(required = true)]
    pub candidates: Vec<PathBuf>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Argument(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => EXIT_IO,
            CliError::Argument(_) => EXIT_ARGUMENT,
        }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Io(m) | CliError::Argument(m) => f.write_str(m),
        }
    }
}

impl From<acseg::Error> for CliError {
    fn from(e: acseg::Error) -> Self {
        if e.is_argument() {
            CliError::Argument(e.to_string())
        } else {
            CliError::Io(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, CliError>;
type Detector = Box<dyn FnOnce(&acseg::raster::GrayImage) -> CliResult<EdgeMap>>;

fn arg_err(msg: impl Into<String>) -> CliError {
    CliError::Argument(msg.into())
}

/// Parses a `key = value` file. Blank lines and `#` comments are skipped;
/// keys use the long flag names, with `-` or `_`.
pub fn parse_config(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| arg_err(format!("config line {}: expected key = value", n + 1)))?;
        map.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(map)
}

/// Merges flags, config-file entries and defaults, remembering the result.
struct Resolver {
    file: BTreeMap<String, String>,
    resolved: Vec<(String, String)>,
}

impl Resolver {
    fn new(file: BTreeMap<String, String>) -> Self {
        Self {
            file,
            resolved: Vec::new(),
        }
    }

    fn lookup<T: FromStr>(&self, key: &str, flag: Option<T>) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| arg_err(format!("config key '{key}': cannot parse '{raw}': {e}"))),
            None => Ok(None),
        }
    }

    fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> CliResult<T>
    where
        T::Err: Display,
    {
        let v = self.lookup(key, flag)?.unwrap_or(default);
        self.resolved.push((key.into(), v.to_string()));
        Ok(v)
    }

    fn optional<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> CliResult<Option<T>>
    where
        T::Err: Display,
    {
        let v = self.lookup(key, flag)?;
        if let Some(v) = &v {
            self.resolved.push((key.into(), v.to_string()));
        }
        Ok(v)
    }

    fn path(&mut self, key: &str, flag: Option<PathBuf>) -> CliResult<Option<PathBuf>> {
        let v = flag.or_else(|| self.file.get(key).map(PathBuf::from));
        if let Some(p) = &v {
            self.resolved.push((key.into(), p.display().to_string()));
        }
        Ok(v)
    }

    fn record(&mut self, key: &str, value: impl Display) {
        self.resolved.push((key.into(), value.to_string()));
    }

    fn print(&self, command: &str) {
        println!("# acseg {command}, resolved configuration");
        for (k, v) in &self.resolved {
            println!("{k} = {v}");
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn kernel(r: &mut Resolver, delta: Option<usize>, alpha: Option<f64>) -> CliResult<KernelSpec> {
    let delta = r.get("delta", delta, 4)?;
    let alpha = r.get("alpha", alpha, 1.0)?;
    Ok(KernelSpec::new(delta, alpha)?)
}

fn cmd_detect(a: DetectArgs, r: &mut Resolver) -> CliResult<()> {
    r.record("input", a.input.display());
    let method = r.get("method", a.method, "nonlocal".to_string())?.to_ascii_lowercase();
    let channel = r.optional("channel", a.channel)?;
    let out = r.path("out", a.out)?.ok_or_else(|| arg_err("--out is required"))?;
    let run: Detector = match method.as_str() {
        "nonlocal" => {
            let spec = kernel(r, a.delta, a.alpha)?;
            let sigma = r.get("sigma", a.sigma, 0.05)?;
            let cache = r.path("cache-dir", a.cache_dir)?;
            Box::new(move |img| {
                let table = match cache {
                    Some(dir) => CoeffCache::new(dir).table(&spec, DEFAULT_QUAD_LEVEL)?,
                    None => acseg::nonlocal::compute_coefficients(&spec, DEFAULT_QUAD_LEVEL)?,
                };
                Ok(detect_edges_with_table(img, &table, sigma))
            })
        }
        "roberts" | "prewitt" | "sobel" => {
            let spec = BaselineSpec::Gradient {
                operator: GradientOperator::from_str(&method)?,
                threshold: r.get("threshold", a.threshold, 0.2)?,
            };
            Box::new(move |img| Ok(spec.detect(img)?))
        }
        "log" => {
            let spec = BaselineSpec::LaplacianOfGaussian {
                varsigma: r.get("varsigma", a.varsigma, 1.0)?,
                zero_tol: r.get("zero-tol", a.zero_tol, 1e-3)?,
            };
            Box::new(move |img| Ok(spec.detect(img)?))
        }
        "canny" => {
            let spec = BaselineSpec::Canny {
                low: r.get("low", a.low, 0.05)?,
                high: r.get("high", a.high, 0.15)?,
                varsigma: r.get("varsigma", a.varsigma, 1.0)?,
            };
            Box::new(move |img| Ok(spec.detect(img)?))
        }
        other => {
            return Err(arg_err(format!(
                "unknown method '{other}' (expected nonlocal, roberts, prewitt, sobel, log or canny)"
            )))
        }
    };
    r.print("detect");
    let img = load_image(&a.input, channel)?;
    let start = Instant::now();
    let edges = run(&img)?;
    let elapsed = start.elapsed().as_secs_f64();
    save_mask(&edges, &out)?;
    println!(
        "edge_pixels = {} of {}\ncpu_seconds = {elapsed:.6}\nwrote {}",
        edges.count(),
        img.len(),
        out.display()
    );
    Ok(())
}

fn cmd_segment(a: SegmentArgs, r: &mut Resolver) -> CliResult<()> {
    r.record("input", a.input.display());
    let d = SegConfig::default();
    let scheme: Scheme = r.get("scheme", a.scheme, d.scheme.to_string())?.parse()?;
    let init_kind = r.get("init", a.init, "threshold".to_string())?.to_ascii_lowercase();
    let init = match init_kind.as_str() {
        "threshold" => Init::Threshold(r.get("i0", a.i0, 0.5)?),
        "nonlocal" => {
            let spec = kernel(r, a.delta, a.alpha)?;
            Init::Nonlocal {
                spec,
                sigma: r.get("sigma", a.sigma, 0.05)?,
            }
        }
        "mask" => Init::MaskFile(
            r.path("mask", a.mask)?
                .ok_or_else(|| arg_err("--init mask needs --mask"))?,
        ),
        other => return Err(arg_err(format!("unknown init '{other}' (expected nonlocal, threshold or mask)"))),
    };
    let outer_criterion = match r.get("outer-criterion", a.outer_criterion, "field".to_string())?.as_str() {
        "field" => OuterCriterion::Field,
        "mask" => OuterCriterion::Mask,
        other => return Err(arg_err(format!("unknown outer criterion '{other}' (expected field or mask)"))),
    };
    let cfg = SegConfig {
        stage1_epsilon: r.get("eps1-stage", a.eps1_stage, d.stage1_epsilon)?,
        stage2_epsilon: r.get("eps2-stage", a.eps2_stage, d.stage2_epsilon)?,
        lambda1: r.get("lambda1", a.lambda1, d.lambda1)?,
        lambda2: r.get("lambda2", a.lambda2, d.lambda2)?,
        epsilon1: r.get("heaviside-eps", a.heaviside_eps, d.epsilon1)?,
        dt: r.get("dt", a.dt, d.dt)?,
        steady_tol: r.get("steady-tol", a.steady_tol, d.steady_tol)?,
        max_steps: r.get("max-steps", a.max_steps, d.max_steps)?,
        outer_tol: r.get("outer-tol", a.outer_tol, d.outer_tol)?,
        max_outer: r.get("max-outer", a.max_outer, d.max_outer)?,
        scheme,
        init,
        stabilizer: r.optional("stabilizer", a.stabilizer)?,
        outer_criterion,
        strict_energy: r.get("strict-energy", a.strict_energy, d.strict_energy)?,
        coeff_cache: r.path("cache-dir", a.cache_dir)?,
    };
    let channel = r.optional("channel", a.channel)?;
    let prefix = r.get("out-prefix", a.out_prefix.map(|p| p.display().to_string()), "acseg".to_string())?;
    let truth = r.path("truth", a.truth)?;
    cfg.validate()?;
    r.print("segment");

    let image = load_image(&a.input, channel)?;
    let truth = truth.map(load_mask).transpose()?;
    let result = segment(&image, &cfg)?;
    for p in write_artifacts(&result, &image, &prefix)? {
        println!("wrote {}", p.display());
    }
    print!("{}", result.summary());
    if let Some(truth) = truth {
        let report = full_report(&result.phase, &truth)?;
        println!("{}", MetricReport::CSV_HEADER);
        println!("{}", report.csv_row(&scheme.to_string(), result.elapsed.as_secs_f64()));
    }
    Ok(())
}

fn parse_size(s: &str) -> CliResult<(usize, usize)> {
    let bad = || arg_err(format!("size must look like 128x96, got '{s}'"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let (w, h) = (w.trim().parse().map_err(|_| bad())?, h.trim().parse().map_err(|_| bad())?);
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok((w, h))
}

fn cmd_synth(a: SynthArgs, r: &mut Resolver) -> CliResult<()> {
    let shape_kind = r.get("shape", a.shape, "disk".to_string())?.to_ascii_lowercase();
    let size = r.get("size", a.size, "128x128".to_string())?;
    let (w, h) = parse_size(&size)?;
    let short = w.min(h) as f64;
    let shape = match shape_kind.as_str() {
        "disk" => ShapeSpec::centered_disk(w, h, r.get("radius", a.radius, short * 5.0 / 16.0)?),
        "rectangle" => ShapeSpec::Rectangle {
            top: h / 4,
            left: w / 4,
            height: h / 2,
            width: w / 2,
        },
        "blobs" => {
            let (wf, hf) = (w as f64, h as f64);
            ShapeSpec::MultiBlob(vec![
                (0.3 * wf, 0.3 * hf, 0.15 * short),
                (0.68 * wf, 0.66 * hf, 0.2 * short),
            ])
        }
        other => return Err(arg_err(format!("unknown shape '{other}' (expected disk, rectangle or blobs)"))),
    };
    let noise_std = r.get("noise-std", a.noise_std, 0.0)?;
    let seed = r.get("seed", a.seed, 0)?;
    let out = r.path("out", a.out)?.ok_or_else(|| arg_err("--out is required"))?;
    let out_truth = r.path("out-truth", a.out_truth)?;
    r.print("synth");

    let (clean, truth) = synth_two_phase(w, h, &shape)?;
    let img = if noise_std > 0.0 {
        add_gaussian_noise(&clean, 0.0, noise_std, seed)?
    } else {
        clean
    };
    save_image(&img, &out)?;
    println!("wrote {}", out.display());
    if let Some(p) = out_truth {
        save_mask(&truth, &p)?;
        println!("wrote {}", p.display());
    }
    println!("truth_area = {}", truth.count());
    Ok(())
}

fn cmd_compare(a: CompareArgs, r: &mut Resolver) -> CliResult<()> {
    r.record("truth", a.truth.display());
    let out = r.path("out", a.out)?;
    r.print("compare");
    let truth = load_mask(&a.truth)?;
    let mut csv = format!("{}\n", MetricReport::CSV_HEADER);
    for cand in &a.candidates {
        let start = Instant::now();
        let phase = load_image(cand, Some(0))?;
        let report = full_report(&phase, &truth)?;
        let name = cand.display().to_string();
        csv.push_str(&report.csv_row(&name, start.elapsed().as_secs_f64()));
        csv.push('\n');
    }
    match out {
        Some(p) => {
            fs::write(&p, &csv).map_err(|e| io_err(&p, e))?;
            println!("wrote {}", p.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(p) => parse_config(&fs::read_to_string(p).map_err(|e| io_err(p, e))?)?,
        None => BTreeMap::new(),
    };
    let mut r = Resolver::new(file);
    let threads = r.get("threads", cli.threads, 0)?;
    if threads > 0 {
        // fails only if a pool already exists, e.g. when embedded
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::warn!("thread count not applied: {e}");
        }
    }
    match cli.command {
        Command::Detect(a) => cmd_detect(a, &mut r),
        Command::Segment(a) => cmd_segment(a, &mut r),
        Command::Synth(a) => cmd_synth(a, &mut r),
        Command::Compare(a) => cmd_compare(a, &mut r),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let map = parse_config("# run\nlambda1 = 0.2\n\nout_prefix=run/a\n").unwrap();
        assert_eq!(map["lambda1"], "0.2");
        assert_eq!(map["out-prefix"], "run/a");
        assert!(parse_config("lambda1 0.2").is_err());
    }

    #[test]
    fn flags_beat_config_beats_default() {
        let mut r = Resolver::new(parse_config("dt = 0.5\nsigma = 0.1").unwrap());
        assert_eq!(r.get("dt", Some(0.2), 0.1).unwrap(), 0.2);
        assert_eq!(r.get("sigma", None, 0.05).unwrap(), 0.1);
        assert_eq!(r.get("alpha", None, 1.0).unwrap(), 1.0);
        assert!(r.get::<usize>("sigma", None, 3).is_err());
    }

    #[test]
    fn sizes() {
        assert_eq!(parse_size("128x96").unwrap(), (128, 96));
        assert!(parse_size("0x4").is_err());
        assert!(parse_size("12").is_err());
    }
}
