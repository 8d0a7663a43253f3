//! Command-line experiment runner.

pub mod config;
pub mod matrix_file;
pub mod presets;
pub mod runner;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::problems::{assemble, ProblemSpec};
use config::ExperimentConfig;
use matrix_file::Variant;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "galerkin", version, about = "Two-stage dissipative Galerkin experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Load a matrix file, run its checks and print a summary.
    ImportCheck { path: PathBuf },
    /// Built-in experiment configurations.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Write the form matrices of a built-in problem to a matrix file.
    Export {
        #[arg(value_enum)]
        problem: BuiltinProblem,
        level: usize,
        path: PathBuf,
        #[arg(long)]
        binary: bool,
    },
}

#[derive(Debug, Subcommand)]
enum PresetAction {
    List,
    /// Print the preset's config.
    Show { name: String },
    Run {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BuiltinProblem {
    FourierRankOne,
    BlockFem,
}

fn run_config(mut cfg: ExperimentConfig, out: Option<PathBuf>) -> Result<()> {
    if let Some(out) = out {
        cfg.output.dir = out;
    }
    let summary = runner::run_experiment(&cfg)?;
    for r in &summary.points {
        let genuine = r.pollution.iter().filter(|e| e.verdict.is_genuine()).count();
        println!(
            "coarse {} fine {}: rank {}, {} genuine, {} polluted, {} unexpected",
            r.coarse_level,
            r.fine_level,
            r.rank,
            genuine,
            r.pollution.len() - genuine,
            r.clusters.unexpected().count()
        );
    }
    for (name, fit) in &summary.fits {
        println!("{name}: slope {:.4} (r² {:.6})", fit.slope, fit.r_squared);
    }
    println!("wrote {} files to {}", summary.files.len(), cfg.output.dir.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out } => run_config(ExperimentConfig::load(&config)?, out),
        Command::ImportCheck { path } => {
            let fm = matrix_file::import_matrices(&path).map_err(|e| matrix_file::as_input_error(&path, e))?;
            println!("space: {}", fm.space());
            println!("dim: {}", fm.dim());
            println!("perturbation: {}", fm.a_hat().is_some());
            println!("t_hat hermitian defect: {:e}", fm.t_hat().hermitian_defect());
            println!("mass condition number: {:e}", fm.mass_condition_number()?);
            println!("ok");
            Ok(())
        }
        Command::Preset { action } => match action {
            PresetAction::List => {
                for p in presets::PRESETS {
                    println!("{:<20} {}", p.name, p.description);
                }
                Ok(())
            }
            PresetAction::Show { name } => {
                print!("{}", presets::find(&name)?.toml);
                Ok(())
            }
            PresetAction::Run { name, out } => run_config(presets::config(&name)?, out),
        },
        Command::Export {
            problem,
            level,
            path,
            binary,
        } => {
            let spec = match problem {
                BuiltinProblem::FourierRankOne => ProblemSpec::FourierRankOne,
                BuiltinProblem::BlockFem => ProblemSpec::BlockFem,
            };
            let fm = assemble(&spec, level).map_err(|e| Error::Config(e.to_string()))?;
            let variant = if binary { Variant::Binary } else { Variant::Text };
            matrix_file::export_matrices(&fm, &path, variant)
        }
    }
}

/// Exit status for an error: config-class errors map to 1, numerical to 2.
pub fn exit_code(err: &Error) -> u8 {
    if err.is_config_error() {
        EXIT_CONFIG
    } else {
        EXIT_NUMERICAL
    }
}

/// Entry point shared by the binary and the tests.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    faer::set_global_parallelism(faer::Par::Seq);
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::from(EXIT_OK)
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
