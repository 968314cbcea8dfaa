mod analyze;
mod config;
mod simulate;
mod theory;
mod validate;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use config::{ConfigError, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "speckle",
    version,
    about = "Laser speckle simulation, Gabor keys and their statistics",
    after_help = "Any configuration key can be overridden with --section.key=value, e.g. --ensemble.trials=200.\n\
                  The output root is output.dir, replaced by $SPECKLE_OUT_DIR when set, replaced by --out when given."
)]
struct Cli {
    /// INI configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Output root directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render speckle patterns, Gabor maps and bitstrings with a hash manifest.
    Simulate {
        /// Comma-separated perturbation strengths; one artifact set per value.
        #[arg(long, value_name = "Q,...")]
        q_sweep: Option<String>,
    },
    /// Write closed-form curves as CSV.
    Theory {
        #[arg(value_enum)]
        figure: Figure,
    },
    /// Run Monte-Carlo validation suites; exit status 1 if any row fails.
    Validate {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// Histograms of camera images and, for two or more, the pairwise drift scatter.
    AnalyzeImages {
        #[arg(required = true, value_name = "PGM")]
        paths: Vec<PathBuf>,
        /// Gabor window width in pixels.
        #[arg(long)]
        w: Option<f64>,
        /// Gabor wave number in radians per pixel.
        #[arg(long)]
        k: Option<f64>,
        /// Gabor lattice spacing in pixels.
        #[arg(long)]
        pitch: Option<usize>,
        /// Histogram bin width in gray values.
        #[arg(long)]
        bin_width: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// Detector-noise MI against I_av/N_I.
    Fig1,
    /// Perturbed MI against q.
    Fig3,
    /// Bit-error probability against q for each threshold.
    Fig4,
    /// sigma_G against k for several window widths.
    Fig5,
    /// MI for the c1, c2 given in the [theory] section.
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Intensity,
    Gabor,
    Perturbation,
    Mi,
    All,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(ConfigError),
    Io(String),
    Core(speckle_core::Error),
    ValidationFailed(usize),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::ValidationFailed(n) => write!(f, "{n} report row(s) failed"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use speckle_core::Error as E;
        match self {
            CliError::ValidationFailed(_) => 1,
            CliError::Usage(_) | CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Core(E::Io(_) | E::Path { .. } | E::Csv(_) | E::Json(_)) => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl From<speckle_core::Error> for CliError {
    fn from(e: speckle_core::Error) -> Self {
        CliError::Core(e)
    }
}

pub fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

/// Writes the resolved configuration next to the outputs.
pub fn write_snapshot(cfg: &RunConfig, dir: &Path) -> Result<(), CliError> {
    write_file(&dir.join("config.ini"), cfg.to_ini_string())
}

fn run(cli: Cli, overrides: Vec<(String, String)>) -> Result<(), CliError> {
    let mut cfg = RunConfig::resolve(cli.config.as_deref(), &overrides)?;
    let root = match &cli.out {
        Some(p) => p.clone(),
        None => cfg.output_root(),
    };
    cfg.set("output.dir", &root.display().to_string())?;
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot set up {} threads: {e}", cli.threads)))?;
    }
    match cli.command {
        Command::Simulate { q_sweep } => {
            if let Some(list) = q_sweep {
                cfg.set("simulate.q_list", &list)?;
            }
            simulate::run(&cfg, &root.join("simulate"))
        }
        Command::Theory { figure } => theory::run(&cfg, figure, &root.join("theory")),
        Command::Validate { suite } => validate::run(&cfg, suite, &root.join("validate")),
        Command::AnalyzeImages {
            paths,
            w,
            k,
            pitch,
            bin_width,
        } => {
            for (name, v) in [("analyze.w", w.map(|v| v.to_string())), ("analyze.k", k.map(|v| v.to_string()))]
                .into_iter()
                .chain([
                    ("analyze.pitch", pitch.map(|v| v.to_string())),
                    ("analyze.bin_width", bin_width.map(|v| v.to_string())),
                ])
            {
                if let Some(v) = v {
                    cfg.set(name, &v)?;
                }
            }
            analyze::run(&cfg, &paths, &root.join("analyze"))
        }
    }
}

fn main() -> ExitCode {
    let (args, overrides) = config::extract_overrides(std::env::args().collect());
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli, overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("speckle: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
