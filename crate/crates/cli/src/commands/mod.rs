//! Subcommands and their exit codes.

pub mod gen_config;
pub mod monitor;
pub mod simulate;

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ppe_core::ingest::{write_event_lines, FileFormat, Pacing, StreamSource};
use ppe_core::sim::{self, ClassNoise, NoiseModel};
use ppe_core::threshold::ThresholdPolicy;
use ppe_core::{EndReason, Mode};

use crate::config::{AppConfig, Overrides, Settings, SinkConfig, SourceConfig};
use crate::error::{exit, CliError, CliResult};
use crate::pipeline::{Pipeline, SessionReport};
use crate::report::write_report;
use crate::sinks::{build_sinks, AlertSink, TerminalSink};

pub use monitor::MonitorService;

#[derive(Debug, Parser)]
#[command(name = "ppewatch", version, about = "PPE donning/doffing sequence monitor")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[arg(long, global = true)]
    pub mode: Option<Mode>,

    /// Reject malformed records (default).
    #[arg(long, global = true, conflicts_with = "lenient")]
    pub strict: bool,

    /// Drop and count malformed records instead of failing.
    #[arg(long, global = true)]
    pub lenient: bool,

    /// Frame rate used to timestamp darknet input and simulated streams.
    #[arg(long, global = true)]
    pub fps: Option<f64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the live service.
    Monitor(MonitorArgs),
    /// Verify a recorded detector file and print a report.
    Check(CheckArgs),
    /// Play a recorded file through the engine in real time.
    Replay(ReplayArgs),
    /// Generate synthetic detector streams.
    Simulate(SimulateArgs),
    /// Print a starter config with AP-derived thresholds.
    GenConfig(GenConfigArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Native,
    Darknet,
}

impl From<FormatArg> for FileFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Native => FileFormat::Native,
            FormatArg::Darknet => FileFormat::Darknet,
        }
    }
}

#[derive(Debug, Args)]
pub struct MonitorArgs {
    /// Listen on this address instead of the configured source.
    #[arg(long, conflicts_with = "stdin")]
    pub bind: Option<String>,
    /// Read records from standard input.
    #[arg(long)]
    pub stdin: bool,
    /// Also append alerts to this JSON-lines file.
    #[arg(long, value_name = "FILE")]
    pub json_log: Option<PathBuf>,
    #[arg(long, value_name = "SECONDS")]
    pub session_timeout: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub file: PathBuf,
    /// Input format; guessed from extension and content when omitted.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long, value_name = "FILE")]
    pub json_log: Option<PathBuf>,
    #[arg(long, value_name = "SECONDS")]
    pub session_timeout: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub file: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// Playback speed factor (> 0).
    #[arg(long, default_value_t = 1.0, conflicts_with = "fast")]
    pub speed: f64,
    /// Ignore timestamps and deliver as fast as possible.
    #[arg(long)]
    pub fast: bool,
    #[arg(long, value_name = "FILE")]
    pub json_log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Perfect detector: every worn item seen at confidence 1, nothing else.
    #[arg(long)]
    pub noise_free: bool,
    #[arg(long, default_value_t = 0.9)]
    pub hit_rate: f64,
    #[arg(long, default_value_t = 0.05)]
    pub fp_rate: f64,
    #[arg(long, default_value_t = 0.8)]
    pub conf_worn: f64,
    #[arg(long, default_value_t = 0.2)]
    pub conf_absent: f64,
    #[arg(long, default_value_t = 0.1)]
    pub conf_sd: f64,
    /// Frames between schedule events.
    #[arg(long, default_value_t = 60)]
    pub spacing: u64,
    /// Swap two adjacent schedule entries (0-based), e.g. `--inject-swap 1 2`.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub inject_swap: Option<Vec<usize>>,
    /// Write the stream as JSON lines.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Run the stream through the engine; exit code follows the verdict.
    #[arg(long)]
    pub check: bool,
    /// Print verdict accuracy and latency across a grid of hit rates.
    #[arg(long)]
    pub sweep: bool,
    /// Seeds per sweep point.
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    /// Measure engine throughput and per-batch latency.
    #[arg(long)]
    pub bench: bool,
    /// Sessions fed to the bench.
    #[arg(long, default_value_t = 200)]
    pub sessions: usize,
}

#[derive(Debug, Args)]
pub struct GenConfigArgs {
    /// Number of detector classes, for the darknet filter count.
    #[arg(long, default_value_t = 5)]
    pub classes: u32,
    /// Per-class average precision, e.g. `--ap mask=0.8`. Repeatable.
    #[arg(long, value_name = "CLASS=AP")]
    pub ap: Vec<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub floor: Option<f64>,
    #[arg(long)]
    pub ceil: Option<f64>,
}

/// Parse arguments and run. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::CONFIG } else { exit::OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(cli: &Cli) -> CliResult<AppConfig> {
    match &cli.config {
        Some(p) => AppConfig::load(p),
        None => Ok(AppConfig::default()),
    }
}

fn base_overrides(cli: &Cli) -> Overrides {
    Overrides {
        mode: cli.mode,
        strict: if cli.lenient {
            Some(false)
        } else if cli.strict {
            Some(true)
        } else {
            None
        },
        fps: cli.fps,
        ..Default::default()
    }
}

fn io_err(e: io::Error) -> CliError {
    CliError::Parse(format!("output: {e}"))
}

fn verdict_code(r: &SessionReport) -> i32 {
    if r.verdict.is_compliant() {
        exit::OK
    } else {
        exit::NOT_COMPLIANT
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> CliResult<i32> {
    let config = load_config(&cli)?;
    let mut overrides = base_overrides(&cli);
    match cli.command {
        Command::Monitor(a) => {
            overrides.session_timeout_s = a.session_timeout;
            if let Some(bind) = a.bind {
                overrides.source = Some(SourceConfig::Listener { bind });
            } else if a.stdin {
                overrides.source = Some(SourceConfig::Stdin);
            }
            overrides.extra_sinks.extend(a.json_log.map(|path| SinkConfig::JsonLog { path }));
            let settings = Settings::resolve(&config, &overrides)?;
            cmd_monitor(&settings, out)
        }
        Command::Check(a) => {
            overrides.session_timeout_s = a.session_timeout;
            overrides.extra_sinks.extend(a.json_log.map(|path| SinkConfig::JsonLog { path }));
            let settings = Settings::resolve(&config, &overrides)?;
            cmd_check(&settings, &a.file, a.format.map(Into::into), out)
        }
        Command::Replay(a) => {
            let pacing = if a.fast {
                Pacing::AsFastAsPossible
            } else {
                Pacing::scaled(a.speed).map_err(CliError::config)?
            };
            overrides.extra_sinks.extend(a.json_log.map(|path| SinkConfig::JsonLog { path }));
            let settings = Settings::resolve(&config, &overrides)?;
            let sinks = with_default_terminal(&settings)?;
            let report = monitor::run_file(&settings, &a.file, a.format.map(Into::into), pacing, sinks)?;
            write_report(out, &report).map_err(io_err)?;
            Ok(verdict_code(&report))
        }
        Command::Simulate(a) => {
            let settings = Settings::resolve(&config, &overrides)?;
            cmd_simulate(&settings, &a, out)
        }
        Command::GenConfig(a) => {
            let settings = Settings::resolve(&config, &overrides)?;
            let defaults = ThresholdPolicy::default();
            let policy = ThresholdPolicy {
                alpha: a.alpha.unwrap_or(defaults.alpha),
                floor: a.floor.unwrap_or(defaults.floor),
                ceil: a.ceil.unwrap_or(defaults.ceil),
            };
            let aps = a
                .ap
                .iter()
                .map(|s| gen_config::parse_ap(s))
                .collect::<CliResult<Vec<_>>>()?;
            let text = gen_config::render(a.classes, settings.mode(), &aps, &policy)?;
            out.write_all(text.as_bytes()).map_err(io_err)?;
            Ok(exit::OK)
        }
    }
}

/// Configured sinks, or a terminal sink when none are configured.
fn with_default_terminal(settings: &Settings) -> CliResult<Vec<Box<dyn AlertSink>>> {
    let mut sinks = build_sinks(&settings.sinks)?;
    if sinks.is_empty() {
        sinks.push(Box::new(TerminalSink::stdout()));
    }
    Ok(sinks)
}

/// Configured sinks minus the terminal one; the report already lists every
/// alert.
fn non_terminal_sinks(settings: &Settings) -> CliResult<Vec<Box<dyn AlertSink>>> {
    let cfgs: Vec<SinkConfig> = settings
        .sinks
        .iter()
        .filter(|s| !matches!(s, SinkConfig::Terminal))
        .cloned()
        .collect();
    build_sinks(&cfgs)
}

/// Replay a recorded file as fast as possible and report. Exit 0 only for a
/// Compliant verdict.
pub fn cmd_check(
    settings: &Settings,
    file: &std::path::Path,
    format: Option<FileFormat>,
    out: &mut dyn Write,
) -> CliResult<i32> {
    let format = format.or(settings.file_format);
    let sinks = non_terminal_sinks(settings)?;
    let report = monitor::run_file(settings, file, format, Pacing::AsFastAsPossible, sinks)?;
    write_report(out, &report).map_err(io_err)?;
    Ok(verdict_code(&report))
}

pub fn cmd_monitor(settings: &Settings, out: &mut dyn Write) -> CliResult<i32> {
    match &settings.source {
        StreamSource::NetworkListener { bind } => {
            let sinks = with_default_terminal(settings)?;
            let service = MonitorService::bind(settings, bind, sinks)?;
            let addr = service.local_addr()?;
            let handle = service.shutdown_handle()?;
            if let Err(e) = ctrlc::set_handler(move || handle.shutdown()) {
                log::warn!("cannot install interrupt handler: {e}");
            }
            writeln!(out, "listening on {addr}").map_err(io_err)?;
            out.flush().map_err(io_err)?;
            let verdicts = service.run(out)?;
            let compliant = verdicts.iter().filter(|v| v.is_compliant()).count();
            writeln!(out, "shutdown: {} sessions, {compliant} compliant", verdicts.len()).map_err(io_err)?;
            Ok(exit::OK)
        }
        StreamSource::StandardInput => {
            let sinks = with_default_terminal(settings)?;
            let (report, error) = monitor::run_lines(settings, io::stdin().lock(), sinks);
            write_report(out, &report).map_err(io_err)?;
            error.map_or(Ok(exit::OK), Err)
        }
        StreamSource::FileReplay { path, pacing } => {
            let sinks = with_default_terminal(settings)?;
            let report = monitor::run_file(settings, path, settings.file_format, *pacing, sinks)?;
            write_report(out, &report).map_err(io_err)?;
            Ok(exit::OK)
        }
    }
}

pub fn cmd_simulate(settings: &Settings, a: &SimulateArgs, out: &mut dyn Write) -> CliResult<i32> {
    let swap = match a.inject_swap.as_deref() {
        Some([x, y]) => Some((*x, *y)),
        Some(_) => return Err(CliError::Config("--inject-swap takes two entries".into())),
        None => None,
    };
    let scenario = simulate::build_scenario(&settings.spec, a.spacing, settings.fps, swap)?;
    let class_noise = if a.noise_free {
        ClassNoise::NOISE_FREE
    } else {
        ClassNoise {
            hit_rate: a.hit_rate,
            false_positive_rate: a.fp_rate,
            conf_mean_worn: a.conf_worn,
            conf_mean_absent: a.conf_absent,
            conf_stddev: a.conf_sd,
        }
    };
    let noise = NoiseModel::uniform(class_noise).map_err(CliError::config)?;

    if a.bench {
        let r = simulate::run_bench(&settings.spec, settings.thresholds, a.sessions, a.seed)?;
        writeln!(
            out,
            "bench: sessions={} batches={} detections={} elapsed={:.3}s throughput={:.0} detections/s p50={:.1}us p99={:.1}us",
            r.sessions,
            r.batches,
            r.detections,
            r.elapsed.as_secs_f64(),
            r.detections_per_sec(),
            r.p50.as_secs_f64() * 1e6,
            r.p99.as_secs_f64() * 1e6
        )
        .map_err(io_err)?;
        return Ok(exit::OK);
    }
    if a.sweep {
        simulate::print_sweep(out, &scenario, class_noise, a.seeds, settings.thresholds)?;
        return Ok(exit::OK);
    }

    let batches = sim::generate(&scenario, &noise, a.seed).map_err(CliError::config)?;
    if let Some(path) = &a.out {
        let file = std::fs::File::create(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut w = io::BufWriter::new(file);
        write_event_lines(&batches, &mut w).map_err(CliError::config)?;
        w.flush().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    }
    if a.check {
        let mut pipeline = Pipeline::from_settings(settings, non_terminal_sinks(settings)?);
        for b in &batches {
            pipeline.process(b);
        }
        let report = pipeline.finish(EndReason::EndOfStream);
        write_report(out, &report).map_err(io_err)?;
        return Ok(verdict_code(&report));
    }
    if a.out.is_none() {
        write_event_lines(&batches, &mut *out).map_err(CliError::config)?;
    }
    Ok(exit::OK)
}
