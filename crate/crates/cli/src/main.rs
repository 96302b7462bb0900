//! hvnm: run corner, module, dilation, and fusion tasks from problem files.
//!
//! Exit statuses: 0 when every verdict passes, 1 on a negative mathematical
//! verdict, 2 on an input error (unreadable or malformed file, unresolved
//! reference, dimension mismatch), 3 on an internal consistency failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use hvnm::Tolerance;

use hvnm_cli::problem::{Objects, ProblemFile};
use hvnm_cli::report::Report;
use hvnm_cli::tasks::{run_tasks, Failure};

#[derive(Parser)]
#[command(name = "hvnm", version, about = "Hilbert von Neumann module toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Residual tolerance; the rank cutoff is a tenth of this.
    #[arg(long, global = true, default_value_t = 1e-8)]
    tol: f64,

    /// Seed recorded in the report; reserved for randomized tasks.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Write the report to this path instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Include matrix outputs in the report.
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

/// Each subcommand names the task kind the problem file is expected to
/// declare; the file's full task list then runs in order, so later tasks can
/// consume outputs published by earlier ones.
#[derive(Subcommand)]
enum Command {
    /// Verify that named matrices span a corner (x·z*·y stays inside).
    CheckCorner { file: PathBuf },
    /// Close a family under x·z*·y and report the resulting corner.
    Closure { file: PathBuf },
    /// Represent a module-linear functional by a module element.
    Riesz { file: PathBuf },
    /// Stinespring-dilate a completely positive map.
    Dilate { file: PathBuf },
    /// Check that two dilations of one map are unitarily equivalent.
    Uniqueness { file: PathBuf },
    /// Fuse two automorphism bimodules over their algebra.
    Fuse { file: PathBuf },
    /// Build an inclusion bimodule and its Jones projection.
    DemoJones { file: PathBuf },
    /// Build an automorphism bimodule and fuse it with itself.
    DemoAuto { file: PathBuf },
    /// Decide isomorphism of two automorphism bimodules.
    Classify { file: PathBuf },
}

impl Command {
    fn kind(&self) -> &'static str {
        match self {
            Command::CheckCorner { .. } => "check-corner",
            Command::Closure { .. } => "closure",
            Command::Riesz { .. } => "riesz",
            Command::Dilate { .. } => "dilate",
            Command::Uniqueness { .. } => "uniqueness",
            Command::Fuse { .. } => "fuse",
            Command::DemoJones { .. } => "demo-jones",
            Command::DemoAuto { .. } => "demo-auto",
            Command::Classify { .. } => "classify",
        }
    }

    fn file(&self) -> &Path {
        match self {
            Command::CheckCorner { file }
            | Command::Closure { file }
            | Command::Riesz { file }
            | Command::Dilate { file }
            | Command::Uniqueness { file }
            | Command::Fuse { file }
            | Command::DemoJones { file }
            | Command::DemoAuto { file }
            | Command::Classify { file } => file,
        }
    }
}

fn execute(cli: &Cli) -> Result<bool, Failure> {
    let tol = Tolerance::from_residual(cli.tol).map_err(|e| Failure::Input(e.to_string()))?;
    let file = ProblemFile::load(cli.command.file())?;
    let kind = cli.command.kind();
    if !file.tasks.iter().any(|t| t.kind() == kind) {
        return Err(Failure::Input(format!(
            "{} declares no {kind} task",
            cli.command.file().display()
        )));
    }
    let mut objects = Objects::build(&file, tol)?;
    let mut report = Report::new(cli.seed, tol.rank_tol, tol.residual_tol);
    run_tasks(&file.tasks, &mut objects, &mut report, cli.verbose)?;
    let rendered = match cli.format {
        Format::Text => report.render_text(),
        Format::Json => report.render_json(),
    };
    match &cli.out {
        Some(path) => std::fs::write(path, rendered)
            .map_err(|e| Failure::Input(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{rendered}"),
    }
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let status: u8 = match execute(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(Failure::Negative(message)) => {
            eprintln!("error: {message}");
            1
        }
        Err(Failure::Input(message)) => {
            eprintln!("error: {message}");
            2
        }
        Err(Failure::Internal(message)) => {
            eprintln!("internal error: {message}");
            3
        }
    };
    // Timing stays on stderr so report bytes depend only on input, seed,
    // and tolerance.
    eprintln!("completed in {:?}", started.elapsed());
    ExitCode::from(status)
}
