//! Command-line front end: simulate photon events to a file, analyze
//! event files into a report plus trace exports, and print reports.
//!
//! Exit codes: 0 success, 1 invalid input (flags, config, file contents),
//! 2 I/O or environment failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use votdr_cli::config::{self, ConfigError, Step};
use votdr_cli::event_file::{self, EventFileError};
use votdr_cli::pipeline::{self, PipelineError};
use votdr_cli::report::{self, ReportDoc};
use votdr_cli::{csv_out, svg};

#[derive(Parser)]
#[command(name = "votdr", version, about = "Photon-counting OTDR simulator and trace analyzer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one acquisition from a config file and store the photon events.
    Simulate {
        /// Run configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output event file.
        #[arg(long)]
        out: PathBuf,
        /// Override the seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Apply the [step1] override table (near section, full period).
        #[arg(long, conflicts_with = "step2")]
        step1: bool,
        /// Apply the [step2] override table (far section, gated).
        #[arg(long)]
        step2: bool,
        /// Worker threads; the output does not depend on this.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Histogram an event file, correct and fit it, and detect events.
    Analyze {
        /// Event file from `simulate`.
        #[arg(long)]
        events: PathBuf,
        /// Second (gated, higher-power) event file to stitch beyond the
        /// first one, using the overlap region from the config snapshot.
        #[arg(long)]
        events2: Option<PathBuf>,
        /// Histogram bin width in nanoseconds; defaults to the snapshot's.
        #[arg(long)]
        bin: Option<f64>,
        /// Analysis report output (TOML).
        #[arg(long)]
        report: PathBuf,
        /// Per-bin trace output (CSV).
        #[arg(long)]
        trace: PathBuf,
        /// Optional rendered trace (SVG).
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Print a stored analysis report.
    Report {
        /// Report file written by `analyze`.
        #[arg(long)]
        report: PathBuf,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            Self::Validation(_) => 1,
            Self::Io(_) => 2,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Self::Io(e.to_string()),
            _ => Self::Validation(e.to_string()),
        }
    }
}

impl From<EventFileError> for CliError {
    fn from(e: EventFileError) -> Self {
        match e {
            EventFileError::Io { .. } => Self::Io(e.to_string()),
            _ => Self::Validation(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        if e.is_io() {
            Self::Io(e.to_string())
        } else {
            Self::Validation(e.to_string())
        }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.code());
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate {
            config,
            out,
            seed,
            step1,
            step2,
            threads,
        } => {
            let loaded = config::load_config(&config)?;
            let step = match (step1, step2) {
                (true, _) => Some(Step::One),
                (_, true) => Some(Step::Two),
                _ => None,
            };
            let run = loaded.run_for(step, seed);
            let events = pipeline::simulate(&run, threads)?;
            event_file::write_events(&out, &run, &events)?;
            Ok(())
        }
        Command::Analyze {
            events,
            events2,
            bin,
            report,
            trace,
            svg,
        } => {
            let near = event_file::read_events(&events)?;
            let far = events2.map(|p| event_file::read_events(&p)).transpose()?;
            let settings = near.run.analysis.clone();
            let bin_width_ps = match bin {
                None => settings.bin_width_ps,
                Some(ns) if ns > 0.0 => (ns * 1e3).round().max(1.0) as u64,
                Some(ns) => {
                    return Err(CliError::Validation(format!(
                        "--bin must be positive, got {ns}"
                    )))
                }
            };

            let near_stream = near.stream();
            let far_stream = far.map(|f| f.stream());
            let outcome =
                pipeline::run_analysis(&near_stream, far_stream.as_ref(), &settings, bin_width_ps)?;

            let doc = ReportDoc::new(
                &outcome.report,
                outcome.stitch,
                bin_width_ps,
                near_stream.header.n_pulses,
            );
            let doc_text = toml::to_string_pretty(&doc)
                .map_err(|e| CliError::Validation(format!("report serialization: {e}")))?;
            std::fs::write(&report, doc_text).map_err(|e| io_error(&report, e))?;

            let mut csv = Vec::new();
            csv_out::emit_trace_csv(&outcome.trace, &outcome.log, &mut csv)
                .map_err(|e| io_error(&trace, e))?;
            std::fs::write(&trace, csv).map_err(|e| io_error(&trace, e))?;

            if let Some(svg_path) = svg {
                let doc_svg = svg::render_svg(&outcome.log, &doc);
                std::fs::write(&svg_path, doc_svg).map_err(|e| io_error(&svg_path, e))?;
            }
            Ok(())
        }
        Command::Report { report } => {
            let text =
                std::fs::read_to_string(&report).map_err(|e| io_error(&report, e))?;
            let doc: ReportDoc = toml::from_str(&text)
                .map_err(|e| CliError::Validation(format!("{}: {e}", report.display())))?;
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            report::print_report(&doc, &mut out).map_err(|e| io_error(&report, e))?;
            out.flush().map_err(|e| io_error(&report, e))?;
            Ok(())
        }
    }
}
