//! The `icb` command line.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 I/O failure,
//! 4 transport failure, 5 integrity failure (corrupt data, lost or altered
//! readings).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use icb_core::{Codec, CodecError, CodecStats, Snappy, Synthetic};

use crate::codecs;
use crate::config::{record_path, ConfigError, Format, LinkChoice, RunConfig, RunRecord};
use crate::dataset::{write_redd, Dataset, DatasetError};
use crate::harness::{Harness, HarnessError, Mode, SweepReport};
use crate::report::{emit_csv_with_energy, emit_json};
use crate::sink::{self, SinkEvent, VerdictStatus};
use crate::transport::{bind_pull, parse_rate, LinkSpec, TransportError};

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_TRANSPORT: i32 = 4;
pub const EXIT_INTEGRITY: i32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Transport(String),
    #[error("{0}")]
    Integrity(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io(_) => EXIT_IO,
            CliError::Transport(_) => EXIT_TRANSPORT,
            CliError::Integrity(_) => EXIT_INTEGRITY,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io { .. } => CliError::Io(e.to_string()),
            DatasetError::Record { .. } | DatasetError::Empty(_) => CliError::Validation(e.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        let msg = e.to_string();
        match e {
            HarnessError::Invalid(_) | HarnessError::UnknownCodec(_) => CliError::Validation(msg),
            HarnessError::Transport { .. } | HarnessError::Sink(_) => CliError::Transport(msg),
            HarnessError::Codec { .. } | HarnessError::Integrity { .. } => CliError::Integrity(msg),
        }
    }
}

impl From<TransportError> for CliError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::InvalidSpec(_) => CliError::Validation(e.to_string()),
            _ => CliError::Transport(e.to_string()),
        }
    }
}

fn codec_error(context: &Path, e: CodecError) -> CliError {
    let msg = format!("{}: {e}", context.display());
    if e.is_corruption() {
        CliError::Integrity(msg)
    } else {
        CliError::Validation(msg)
    }
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "icb", version, about = "Snappy telemetry compression over a throttled link: codec tools and timing benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

// Parsed once per process; boxing the large variant buys nothing.
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compress a file into one Snappy raw block.
    Compress(CodecArgs),
    /// Decompress a Snappy raw block.
    Decompress(CodecArgs),
    /// Write synthetic REDD-style readings as text.
    Gen(GenArgs),
    /// Time the three transmit modes over a sweep of batch sizes.
    Bench(BenchArgs),
    /// Run a validating sink until interrupted.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct CodecArgs {
    /// Input file.
    pub input: PathBuf,
    /// Output file.
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, env = "ICB_SEED", default_value_t = 7)]
    pub seed: u64,
    /// Number of readings.
    #[arg(long, env = "ICB_COUNT", default_value_t = 100_000)]
    pub count: usize,
    /// Output file; standard output when absent.
    #[arg(long, env = "ICB_OUT")]
    pub out: Option<PathBuf>,
}

/// Bench options. Unset options come from `--config` when given, otherwise
/// from the defaults.
#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Recorded run to repeat (a `.env.json` file or a bare config).
    #[arg(long, env = "ICB_CONFIG")]
    pub config: Option<PathBuf>,
    /// REDD text file to send instead of synthetic readings.
    #[arg(long, env = "ICB_INPUT", conflicts_with_all = ["seed", "count"])]
    pub input: Option<PathBuf>,
    /// Synthetic dataset seed [default: 7].
    #[arg(long, env = "ICB_SEED")]
    pub seed: Option<u64>,
    /// Synthetic dataset size in readings [default: 100000].
    #[arg(long, env = "ICB_COUNT")]
    pub count: Option<usize>,
    /// Comma-separated readings per frame [default: 1000,200,100,20].
    #[arg(long, env = "ICB_BATCH_SIZES", value_delimiter = ',')]
    pub batch_sizes: Option<Vec<usize>>,
    /// Comma-separated modes: compress, pre, raw [default: all].
    #[arg(long, env = "ICB_MODES", value_delimiter = ',')]
    pub modes: Option<Vec<Mode>>,
    /// Link rate in bits/s with optional k/M/G suffix [default: 100M].
    #[arg(long, env = "ICB_RATE", value_parser = rate_arg)]
    pub rate: Option<u64>,
    /// Timed runs per cell; the median is reported [default: 5].
    #[arg(long, env = "ICB_REPETITIONS")]
    pub repetitions: Option<usize>,
    /// snappy or identity [default: snappy].
    #[arg(long, env = "ICB_CODEC")]
    pub codec: Option<String>,
    /// Transmit energy per bit, in instruction units [default: 480].
    #[arg(long, env = "ICB_TX_COST_PER_BIT")]
    pub tx_cost_per_bit: Option<String>,
    /// Compression instructions per input byte [default: 10].
    #[arg(long, env = "ICB_INSTR_PER_BYTE")]
    pub instr_per_byte: Option<String>,
    /// Report file; standard output when absent.
    #[arg(long, env = "ICB_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, env = "ICB_FORMAT", value_enum)]
    pub format: Option<Format>,
    /// inproc (sink in this process) or tcp [default: inproc].
    #[arg(long, env = "ICB_LINK", value_enum)]
    pub link: Option<LinkChoice>,
    /// host:port of a running `icb serve` (with --link tcp).
    #[arg(long, env = "ICB_ADDR")]
    pub addr: Option<String>,
    /// Overlap compression of one frame with transmission of the previous.
    #[arg(long, env = "ICB_PIPELINED")]
    pub pipelined: bool,
    /// Skip the untimed warm-up run.
    #[arg(long, env = "ICB_NO_WARMUP")]
    pub no_warmup: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Only tcp can be served to other processes.
    #[arg(long, env = "ICB_LINK", value_enum, default_value = "tcp")]
    pub link: LinkChoice,
    #[arg(long, env = "ICB_ADDR", default_value = "127.0.0.1:5555")]
    pub addr: String,
    /// Codec the sensor compresses with.
    #[arg(long, env = "ICB_CODEC", default_value = "snappy")]
    pub codec: String,
}

fn rate_arg(s: &str) -> Result<u64, String> {
    parse_rate(s).map_err(|e| e.to_string())
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("icb: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Compress(a) => compress(&a.input, &a.output).map(|stats| {
            eprintln!(
                "{} -> {} bytes, ratio {:.3}, {:.1} MB/s",
                stats.input_bytes,
                stats.output_bytes,
                stats.reported_ratio(),
                stats.bits_per_second() / 8e6
            );
        }),
        Command::Decompress(a) => decompress(&a.input, &a.output),
        Command::Gen(a) => gen(a.seed, a.count, a.out.as_deref()),
        Command::Bench(a) => {
            let config = resolve_bench(a)?;
            let report = bench(&config)?;
            print_summary(&report);
            Ok(())
        }
        Command::Serve(a) => serve(a),
    }
}

pub fn compress(input: &Path, output: &Path) -> Result<CodecStats, CliError> {
    let raw = fs::read(input).map_err(|e| io_error(input, e))?;
    let start = Instant::now();
    let block = Snappy::new().compress(&raw).map_err(|e| codec_error(input, e))?;
    let elapsed = start.elapsed();
    fs::write(output, &block).map_err(|e| io_error(output, e))?;
    Ok(CodecStats {
        input_bytes: raw.len(),
        output_bytes: block.len(),
        elapsed,
    })
}

pub fn decompress(input: &Path, output: &Path) -> Result<(), CliError> {
    let block = fs::read(input).map_err(|e| io_error(input, e))?;
    let raw = icb_core::codec::decompress(&block).map_err(|e| codec_error(input, e))?;
    fs::write(output, raw).map_err(|e| io_error(output, e))
}

pub fn gen(seed: u64, count: usize, out: Option<&Path>) -> Result<(), CliError> {
    if count == 0 {
        return Err(CliError::Validation("--count must be at least 1".into()));
    }
    let readings = Synthetic::new(seed, count).readings();
    match out {
        Some(path) => {
            let file = fs::File::create(path).map_err(|e| io_error(path, e))?;
            write_redd(&readings, file).map_err(|e| io_error(path, e))
        }
        None => write_redd(&readings, io::stdout().lock()).map_err(|e| CliError::Io(e.to_string())),
    }
}

/// Merges bench flags over the recorded config (if any) or the defaults.
pub fn resolve_bench(a: BenchArgs) -> Result<RunConfig, CliError> {
    let mut c = match &a.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(path) = a.input {
        c.dataset = Dataset::File { path };
    } else if a.seed.is_some() || a.count.is_some() {
        let (seed0, count0) = match c.dataset {
            Dataset::Synthetic { seed, count } => (seed, count),
            Dataset::File { .. } => (7, 100_000),
        };
        c.dataset = Dataset::Synthetic {
            seed: a.seed.unwrap_or(seed0),
            count: a.count.unwrap_or(count0),
        };
    }
    if let Some(v) = a.batch_sizes {
        c.batch_sizes = v;
    }
    if let Some(v) = a.modes {
        c.modes = v;
    }
    if let Some(v) = a.rate {
        c.rate_bits_per_s = v;
    }
    if let Some(v) = a.repetitions {
        c.repetitions = v;
    }
    if let Some(v) = a.codec {
        c.codec = v;
    }
    if let Some(v) = a.tx_cost_per_bit {
        c.tx_cost_per_bit = v;
    }
    if let Some(v) = a.instr_per_byte {
        c.instructions_per_byte = v;
    }
    if let Some(v) = a.out {
        c.out = Some(v);
    }
    if let Some(v) = a.format {
        c.format = v;
    }
    if let Some(v) = a.link {
        c.link = v;
    }
    if let Some(v) = a.addr {
        c.addr = Some(v);
    }
    if a.pipelined {
        c.pipelined = true;
    }
    if a.no_warmup {
        c.warmup = false;
    }
    c.validate()?;
    Ok(c)
}

/// Runs a validated config, writes the report and its record, and returns
/// the report.
pub fn bench(config: &RunConfig) -> Result<SweepReport, CliError> {
    config.validate()?;
    let energy = config.energy()?;
    let readings = config.dataset.load()?;
    let link = config.link_spec();
    let harness = if config.remote() {
        Harness::remote(link, &config.codec)?
    } else {
        Harness::local(&link, &config.codec)?
    };
    let mut harness = harness.with_pipelined(config.pipelined);
    let report = harness.sweep(&readings, &config.plan())?;

    let body = match config.format {
        Format::Csv => emit_csv_with_energy(&report, &energy),
        Format::Json => emit_json(&report, Some(&energy)),
    };
    let record = RunRecord {
        config: config.clone(),
        environment: report.environment.clone(),
    };
    let record_json = serde_json::to_string_pretty(&record).expect("record serializes") + "\n";
    match &config.out {
        Some(path) => {
            fs::write(path, body).map_err(|e| io_error(path, e))?;
            let rec = record_path(path);
            fs::write(&rec, record_json).map_err(|e| io_error(&rec, e))?;
        }
        None => {
            io::stdout()
                .write_all(body.as_bytes())
                .map_err(|e| CliError::Io(e.to_string()))?;
            eprint!("{record_json}");
        }
    }
    Ok(report)
}

fn print_summary(report: &SweepReport) {
    for row in &report.rows {
        eprintln!(
            "{:>6} {:<24} {:>10.6} s  [{:.6} .. {:.6}]  wire {:>10} B  ratio {:.3}  ok",
            row.batch_size,
            row.mode.as_str(),
            row.elapsed.as_secs_f64(),
            row.elapsed_min.as_secs_f64(),
            row.elapsed_max.as_secs_f64(),
            row.wire_bytes,
            row.compression_ratio()
        );
    }
}

pub fn serve(a: ServeArgs) -> Result<(), CliError> {
    if a.link != LinkChoice::Tcp {
        return Err(CliError::Validation(
            "serve needs --link tcp: in-process links cannot be reached from another process".into(),
        ));
    }
    let mut codec = codecs::by_name(&a.codec).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut pull = bind_pull(&LinkSpec::tcp(a.addr))?;
    let shutdown = pull.shutdown_handle();
    let interrupted = Arc::new(AtomicBool::new(false));
    {
        let interrupted = Arc::clone(&interrupted);
        ctrlc::set_handler(move || {
            interrupted.store(true, Ordering::SeqCst);
            shutdown.shutdown();
        })
        .map_err(|e| CliError::Io(format!("installing signal handler: {e}")))?;
    }
    let addr = pull.local_addr().expect("tcp endpoint has an address");
    println!("listening on {addr}");
    io::stdout().flush().map_err(|e| CliError::Io(e.to_string()))?;

    let mut failures = 0u64;
    sink::run(&mut pull, codec.as_mut(), false, |event| match event {
        SinkEvent::Session { peer, receipt, verdict, .. } => {
            let status = match verdict.status {
                VerdictStatus::Ok => "ok".to_string(),
                other => {
                    failures += 1;
                    format!("{other:?}: {}", verdict.detail)
                }
            };
            eprintln!(
                "peer {peer}: {} frames, {} wire bytes, {} raw bytes, {status}",
                receipt.frames, receipt.bytes, verdict.raw_len
            );
        }
        SinkEvent::PeerFailed { peer, error } => {
            failures += 1;
            eprintln!("peer {peer}: {error}");
        }
    })?;
    eprintln!(
        "{}; {failures} failed session(s)",
        if interrupted.load(Ordering::SeqCst) { "interrupted, drained" } else { "stopped" }
    );
    Ok(())
}

