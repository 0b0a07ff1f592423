//! `timescales`: synthesize temporal networks, detect change points and
//! measure the spectrum of window sizes that best compresses them.

mod commands;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// A problem with the flags, the configuration or the input data.
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

#[derive(Debug, Parser)]
#[command(name = "timescales", version, about = "Change points and timescale spectra of temporal networks")]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "TIMESCALES_JOBS", default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a synthetic temporal network from a TOML description.
    Synth(SynthArgs),
    /// Find the minimum description length partition with annealed MCMC.
    Detect(DetectArgs),
    /// Scan fixed window sizes and rank the local minima by prominence.
    Spectrum(SpectrumArgs),
    /// Dominant window size over a sliding slice of the data.
    Rolling(RollingArgs),
    /// Description length of one given partition.
    Dl(DlArgs),
}

#[derive(Debug, Clone, Copy, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TimeFormatArg {
    /// Plain integers.
    Integer,
    /// YYYY-MM-DD, one step per day.
    Date,
    /// RFC 3339 or "YYYY-MM-DD HH:MM:SS", one step per second.
    DateTime,
}

/// How the edge list is read and discretized.
#[derive(Debug, Args, Serialize)]
pub struct InputArgs {
    /// Edge list with source,target,timestamp rows.
    pub input: PathBuf,
    /// Skip the first row.
    #[arg(long)]
    pub header: bool,
    /// Field delimiter.
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    #[arg(long, value_enum, default_value = "integer")]
    pub time_format: TimeFormatArg,
    /// Merge this many consecutive time steps into one.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub rebin: u64,
    /// Node count when the data leaves some nodes silent (at least the
    /// number of distinct labels).
    #[arg(long)]
    pub nodes: Option<usize>,
}

#[derive(Debug, Clone, Copy, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    /// Global minimum of the description length.
    Mdl,
    /// Most prominent local minimum.
    TopProminence,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// TOML file with `seed`, `nodes`, `steps` and `[[process]]` tables.
    pub config: PathBuf,
    /// Edge-list CSV to write.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Replace the seed of the config file.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InitArg {
    Single,
    Singletons,
}

#[derive(Debug, Args, Serialize)]
pub struct DetectArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Result JSON to write.
    #[arg(short, long)]
    pub out: PathBuf,
    /// `anneal` (geometric 1 to 0.05), `fixed:B`, `geometric:START:END`
    /// or `steps:SWEEP=B,SWEEP=B,...`.
    #[arg(long, default_value = "anneal")]
    pub beta_schedule: String,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub sweeps: u64,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..))]
    pub chains: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "single")]
    pub init: InitArg,
    /// Stop a chain after this many sweeps without improvement.
    #[arg(long)]
    pub plateau: Option<usize>,
    /// Per-sweep description length trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Keep every n-th sweep of the trace in the JSON.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub trace_stride: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Spectrum CSV to write; the minima go next to it as `.minima.json`.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Largest window size; defaults to the number of steps.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub delta_max: Option<u64>,
    #[arg(long, value_enum, default_value = "mdl")]
    pub mode: ModeArg,
    /// Two-panel spectrogram SVG.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct RollingArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// CSV to write.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Slice length in (rebinned) steps.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub window: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub step: u64,
    #[arg(long, value_enum, default_value = "mdl")]
    pub mode: ModeArg,
    /// Step of an external shock; adds the renormalized column.
    #[arg(long)]
    pub shock_time: Option<usize>,
    /// Largest window size scanned in each slice.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub delta_max: Option<u64>,
}

#[derive(Debug, Clone, Copy, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PriorArg {
    General,
    FixedWindow,
}

#[derive(Debug, Args, Serialize)]
pub struct DlArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// JSON to write.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Interior boundaries, comma separated; none gives a single window.
    #[arg(long, value_delimiter = ',')]
    pub cuts: Vec<usize>,
    #[arg(long, value_enum, default_value = "general")]
    pub prior: PriorArg,
}

/// 1 for bad flags, configs or input data; 2 for failures while running.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Invalid>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<timescales::Error>() {
            return match e {
                timescales::Error::Io(_) => 2,
                timescales::Error::Csv(c) if c.is_io_error() => 2,
                _ => 1,
            };
        }
        if cause.is::<toml::de::Error>() {
            return 1;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Detect(a) => commands::detect(a),
        Command::Spectrum(a) => commands::spectrum(a),
        Command::Rolling(a) => commands::rolling(a),
        Command::Dl(a) => commands::dl(a),
    };
    match result {
        Ok(manifest) => {
            println!("{}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
