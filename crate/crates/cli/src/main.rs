use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use gladas_core::config::{ModelSource, RunConfig};
use gladas_core::eval::{
    build_report, builtin_server, provider_for, read_records, run_trials, write_records, write_report, RecordsFile,
    RunOptions,
};
use gladas_core::models::{serve, NoisyOracleConfig};
use gladas_core::scenario::ScenarioId;

const CONFIG_ENV: &str = "GLADAS_CONFIG";

/// Pedestrian gesture recognition benchmark harness.
///
/// A JSON config file named by GLADAS_CONFIG supplies defaults; flags
/// override it.
#[derive(Debug, Parser)]
#[command(name = "gladas", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate every trial and write records, tables and PR curves.
    Run(RunArgs),
    /// Recompute tables and PR curves from a records file.
    Sweep(SweepArgs),
    /// Print the macro summary of a report.
    Report(ReportArgs),
    /// Host the built-in detector and classifier over the plugin protocol.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per scenario-gesture pair.
    #[arg(long)]
    trials: Option<u32>,
    /// Comma-separated scenario ids (1-4).
    #[arg(long, value_delimiter = ',')]
    scenarios: Option<Vec<i64>>,
    /// Frame width in pixels.
    #[arg(long)]
    width: Option<u32>,
    /// Frame height in pixels.
    #[arg(long)]
    height: Option<u32>,
    /// Horizontal field of view in degrees.
    #[arg(long)]
    fov: Option<f64>,
    /// Simulator seconds per wall second.
    #[arg(long)]
    clock_scale: Option<f64>,
    /// Wall seconds between streamed frames.
    #[arg(long)]
    wall_interval: Option<f64>,
    /// Detector stride in frames.
    #[arg(long)]
    stride: Option<u32>,
    /// Frames in the classifier window.
    #[arg(long)]
    window: Option<usize>,
    /// Consecutive frames sampled from the window.
    #[arg(long)]
    sample: Option<usize>,
    /// Confidence threshold for the reported tables.
    #[arg(long)]
    delta: Option<f64>,
    /// Per-joint pose jitter amplitude in radians.
    #[arg(long)]
    jitter: Option<f64>,
    /// Lighting scale range as LO,HI.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    lighting: Option<Vec<f64>>,
    /// builtin:template, builtin:oracle or remote:<host:port>.
    #[arg(long)]
    model: Option<String>,
    /// JSON file with the oracle's confusion matrix and confidence ranges.
    #[arg(long)]
    oracle_confusion: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Render as fast as possible instead of at the wall interval.
    #[arg(long)]
    fast_forward: bool,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Write the frames of the first trial of each pair as PPM files.
    #[arg(long)]
    dump_frames: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// records.json written by `run`.
    #[arg(long)]
    records: PathBuf,
    /// Confidence threshold (default: the one in the records' config).
    #[arg(long)]
    delta: Option<f64>,
    /// Output directory (default: the records file's directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// report.json or the directory holding it.
    #[arg(default_value = ".")]
    path: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Address to listen on.
    #[arg(long, default_value = "127.0.0.1:7878")]
    addr: String,
}

/// Failures caused by bad input rather than by the run itself.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Settings from the GLADAS_CONFIG file. Besides the run config keys it
/// may hold `output_dir` and `workers`.
#[derive(Debug, Default)]
struct FileSettings {
    config: RunConfig,
    output_dir: Option<PathBuf>,
    workers: Option<usize>,
}

fn load_file_settings() -> Result<FileSettings> {
    let Some(path) = std::env::var_os(CONFIG_ENV) else {
        return Ok(FileSettings::default());
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", Path::new(&path).display()))?;
    let mut value: Value = serde_json::from_str(&text).map_err(|e| usage(format!("{CONFIG_ENV}: {e}")))?;
    let obj = value.as_object_mut().ok_or_else(|| usage(format!("{CONFIG_ENV}: expected a JSON object")))?;
    let output_dir = match obj.remove("output_dir") {
        Some(Value::String(s)) => Some(PathBuf::from(s)),
        None => None,
        Some(_) => return Err(usage(format!("{CONFIG_ENV}: output_dir must be a string"))),
    };
    let workers = match obj.remove("workers") {
        Some(v) => Some(v.as_u64().ok_or_else(|| usage(format!("{CONFIG_ENV}: workers must be an integer")))? as usize),
        None => None,
    };
    let config = serde_json::from_value(value).map_err(|e| usage(format!("{CONFIG_ENV}: {e}")))?;
    Ok(FileSettings { config, output_dir, workers })
}

fn apply(args: &ConfigArgs, mut c: RunConfig) -> Result<RunConfig> {
    if let Some(v) = args.seed {
        c.master_seed = v;
    }
    if let Some(v) = args.trials {
        c.trials_per_sg = v;
    }
    if let Some(ids) = &args.scenarios {
        c.scenarios = ids
            .iter()
            .map(|&i| ScenarioId::new(i).map_err(|e| usage(e.to_string())))
            .collect::<Result<_>>()?;
    }
    if let Some(v) = args.width {
        c.stream.width_px = v;
    }
    if let Some(v) = args.height {
        c.stream.height_px = v;
    }
    if let Some(v) = args.fov {
        c.stream.horizontal_fov_deg = v;
    }
    if let Some(v) = args.clock_scale {
        c.stream.clock_scale = v;
    }
    if let Some(v) = args.wall_interval {
        c.stream.wall_interval_s = v;
    }
    if let Some(v) = args.stride {
        c.pipeline.stride_s = v;
    }
    if let Some(v) = args.window {
        c.pipeline.window_m = v;
    }
    if let Some(v) = args.sample {
        c.pipeline.sample_t = v;
    }
    if let Some(v) = args.delta {
        c.pipeline.confidence_threshold = v;
    }
    if let Some(v) = args.jitter {
        c.variation.jitter_amplitude_rad = v;
    }
    if let Some(v) = &args.lighting {
        c.variation.lighting_range = (v[0], v[1]);
    }
    if let Some(m) = &args.model {
        c.model = m.parse::<ModelSource>().map_err(|e| usage(e.to_string()))?;
    }
    if let Some(p) = &args.oracle_confusion {
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        let cfg = NoisyOracleConfig::from_json(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?;
        c.oracle = Some(cfg);
    }
    c.validate().map_err(|e| usage(e.to_string()))?;
    Ok(c)
}

fn print_summary(bundle: &gladas_core::eval::ReportBundle) {
    let label = if bundle.is_complete() { "macro" } else { "mean over run pairs" };
    println!("delta {:.2}", bundle.delta());
    for r in &bundle.rows {
        println!(
            "S{} {:<11} accuracy {:6.2}%  f1 {:6.2}%",
            r.sg.scenario.get(),
            r.sg.gesture.name(),
            100.0 * r.metrics.accuracy,
            100.0 * r.metrics.f1
        );
    }
    println!("{label} accuracy {:.2}%  f1 {:.2}%", 100.0 * bundle.macro_accuracy, 100.0 * bundle.macro_f1);
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let file = load_file_settings()?;
    let mut config = apply(&args.config, file.config)?;
    config.fast_forward |= args.fast_forward;
    let out = args.out.or(file.output_dir).unwrap_or_else(|| PathBuf::from("results"));
    if out.as_os_str().is_empty() {
        return Err(usage("output directory must not be empty"));
    }
    let opts = RunOptions {
        workers: args.workers.or(file.workers).unwrap_or(0),
        dump_frames: args.dump_frames.then(|| out.join("frames")),
    };
    let provider = provider_for(&config)?;
    let records = run_trials(&config, provider.as_ref(), &opts)?;
    let file = RecordsFile { config, records };
    write_records(&file, &out.join("records.json"))?;
    let (bundle, curves) = build_report(&file.records, &file.config)?;
    write_report(&bundle, &curves, &out)?;
    println!("{} trials written to {}", file.records.len(), out.display());
    print_summary(&bundle);
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let mut file = read_records(&args.records)?;
    if let Some(d) = args.delta {
        if !(0.0..=1.0).contains(&d) {
            return Err(usage(format!("delta {d} outside [0, 1]")));
        }
        file.config.pipeline.confidence_threshold = d;
    }
    let out = args
        .out
        .unwrap_or_else(|| args.records.parent().map(Path::to_path_buf).unwrap_or_default());
    let (bundle, curves) = build_report(&file.records, &file.config)?;
    let out = if out.as_os_str().is_empty() { PathBuf::from(".") } else { out };
    write_report(&bundle, &curves, &out)?;
    print_summary(&bundle);
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let path = if args.path.is_dir() { args.path.join("report.json") } else { args.path };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let num = |k: &str| v.get(k).and_then(Value::as_f64).with_context(|| format!("{}: missing {k}", path.display()));
    let rows = v.get("macro_rows").and_then(Value::as_u64).unwrap_or(0);
    println!("delta {:.2}", num("delta")?);
    println!("pairs {rows}");
    println!("macro accuracy {:.2}%", 100.0 * num("macro_accuracy")?);
    println!("macro f1 {:.2}%", 100.0 * num("macro_f1")?);
    Ok(())
}

fn cmd_serve(args: ServeArgs) -> Result<()> {
    let file = load_file_settings()?;
    let config = apply(&args.config, file.config)?;
    let server = builtin_server(&config)?;
    let listener = std::net::TcpListener::bind(&args.addr).with_context(|| format!("binding {}", args.addr))?;
    println!("listening on {}", listener.local_addr()?);
    serve(listener, server)?;
    bail!("listener closed")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Report(a) => cmd_report(a),
        Command::Serve(a) => cmd_serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
