use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fluidscore::config::{Config, ConfigError, ConfigFile, CONFIG_ENV};
use fluidscore::ingest::{read_score, LoadError};
use fluidscore::plot::{emit_scatter_csv, emit_scatter_svg, PlotSpec};
use fluidscore::report::analyze;

/// Exit codes. Stable across releases.
mod code {
    pub const OK: u8 = 0;
    pub const PARSE: u8 = 2;
    pub const INPUT: u8 = 3;
    pub const OUTPUT: u8 = 4;
    pub const CONFIG: u8 = 5;
    pub const USAGE: u8 = 64;
}

#[derive(Parser)]
#[command(
    name = "fluidscore",
    version,
    about = "Laminar and turbulent flow in encoded scores"
)]
struct Cli {
    /// Config file (TOML). Defaults to $FLUIDSCORE_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Default)]
struct FlowArgs {
    /// Columns per trailing window.
    #[arg(long)]
    window: Option<usize>,
    /// Layers with spots needed for a turbulent window.
    #[arg(long)]
    min_spotted_layers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a score and report the first error.
    Validate { file: PathBuf },
    /// Write the analysis report as JSON.
    Analyze {
        file: PathBuf,
        #[command(flatten)]
        flow: FlowArgs,
        /// Report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a scatter plot of the flow field.
    Plot {
        file: PathBuf,
        #[arg(long, value_enum)]
        format: Format,
        #[arg(long, value_enum)]
        y_range: Option<YRangeArg>,
        #[command(flatten)]
        flow: FlowArgs,
        /// Output directory; the current directory when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Svg,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum YRangeArg {
    Auto,
    Table6,
}

impl YRangeArg {
    fn as_str(self) -> &'static str {
        match self {
            YRangeArg::Auto => "auto",
            YRangeArg::Table6 => "table6",
        }
    }
}

fn load_config(path: Option<PathBuf>, overrides: ConfigFile) -> Result<Config, ConfigError> {
    let path = path.or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    let file = path.as_deref().map(ConfigFile::load).transpose()?;
    Config::resolve(file, overrides)
}

fn load_score(path: &Path) -> Result<fluidscore::Score, u8> {
    read_score(path).map_err(|e| {
        eprintln!("error: {e}");
        match e {
            LoadError::Io { .. } => code::INPUT,
            LoadError::Parse { .. } => code::PARSE,
        }
    })
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<(), u8> {
    std::fs::write(path, bytes).map_err(|e| {
        eprintln!("error: cannot write {}: {e}", path.display());
        code::OUTPUT
    })
}

fn run(cli: Cli) -> Result<(), u8> {
    let overrides = match &cli.command {
        Command::Validate { .. } => ConfigFile::default(),
        Command::Analyze { flow, out, .. } => ConfigFile {
            window_size: flow.window,
            turbulence_min_layers_with_spots: flow.min_spotted_layers,
            y_range: None,
            out: out.clone(),
        },
        Command::Plot {
            flow, out, y_range, ..
        } => ConfigFile {
            window_size: flow.window,
            turbulence_min_layers_with_spots: flow.min_spotted_layers,
            y_range: y_range.map(|r| r.as_str().to_string()),
            out: out.clone(),
        },
    };
    let config = load_config(cli.config, overrides).map_err(|e| {
        eprintln!("error: {e}");
        code::CONFIG
    })?;

    match cli.command {
        Command::Validate { file } => {
            let score = load_score(&file)?;
            eprintln!(
                "ok: {} columns, {} events",
                score.tick_count(),
                score.events().len()
            );
        }
        Command::Analyze { file, .. } => {
            let score = load_score(&file)?;
            let analysis = analyze(score, config.flow()).map_err(|e| {
                eprintln!("error: {e}");
                code::CONFIG
            })?;
            let json = analysis.to_json();
            match &config.out {
                Some(path) => {
                    write_output(path, json.as_bytes())?;
                    println!("{}", path.display());
                }
                None => print!("{json}"),
            }
        }
        Command::Plot { file, format, .. } => {
            let score = load_score(&file)?;
            let analysis = analyze(score, config.flow()).map_err(|e| {
                eprintln!("error: {e}");
                code::CONFIG
            })?;
            let dir = config.out.clone().unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&dir).map_err(|e| {
                eprintln!("error: cannot create {}: {e}", dir.display());
                code::OUTPUT
            })?;
            let stem = file
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "score".to_string());
            let (ext, bytes) = match format {
                Format::Svg => {
                    let spec = PlotSpec {
                        y_range: config.y_range,
                        ..PlotSpec::default()
                    };
                    let svg = emit_scatter_svg(
                        &analysis.score,
                        &analysis.pathlines,
                        &analysis.phases,
                        &spec,
                    );
                    ("svg", svg.into_bytes())
                }
                Format::Csv => (
                    "csv",
                    emit_scatter_csv(&analysis.score, &analysis.pathlines, &analysis.phases),
                ),
            };
            let path = dir.join(format!("{stem}.{ext}"));
            write_output(&path, &bytes)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                code::USAGE
            } else {
                code::OK
            });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(code::OK),
        Err(c) => ExitCode::from(c),
    }
}
