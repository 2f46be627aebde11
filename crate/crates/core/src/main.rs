use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

use hsf_core::error::{Error, Result};
use hsf_core::report::{emit, parse_config, run_plan, OutputFormat, STUDY_KINDS};

#[derive(Parser, Debug)]
#[command(
    name = "hsf",
    version,
    about = "Frame bounds and their transfer across truncated scales of Hilbert spaces"
)]
struct Cli {
    /// List the available study kinds and exit.
    #[arg(long)]
    list_studies: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment plan and write the report.
    Run {
        /// Plan file (JSON, "schema": 1).
        plan: PathBuf,
        /// Report destination; defaults to the plan's output path, then stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report format; defaults to the plan's output format.
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Replace every seed embedded in the plan.
        #[arg(long)]
        seed_override: Option<u64>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        }
    }
}

fn study_help() -> String {
    let mut s = String::from("Study kinds:\n");
    for (kind, what) in STUDY_KINDS {
        s.push_str(&format!("  {kind:<14} {what}\n"));
    }
    s.push_str("\nEnvironment:\n  HSF_NUM_THREADS  worker threads (0 or unset: one per core)\n");
    s.push_str("\nExit status: 0 if every check passed, 1 if any check failed, 2 on usage or input errors.");
    s
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("HSF_NUM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        Error::InvalidArgument(format!(
            "HSF_NUM_THREADS must be a non-negative integer, got `{raw}`"
        ))
    })?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("cannot configure thread pool: {e}")))?;
    }
    Ok(())
}

fn run(
    plan_path: PathBuf,
    out: Option<PathBuf>,
    format: Option<Format>,
    seed: Option<u64>,
) -> Result<bool> {
    let text = std::fs::read_to_string(&plan_path).map_err(|source| Error::Io {
        path: plan_path.clone(),
        source,
    })?;
    let mut plan = parse_config(&text)?;
    if let Some(seed) = seed {
        plan.override_seeds(seed);
    }
    let format = format.map(OutputFormat::from).unwrap_or(plan.output.format);
    let out = out.or_else(|| plan.output.path.as_ref().map(PathBuf::from));
    let bundle = run_plan(&plan);
    emit(&bundle, format, out.as_deref())?;
    let s = bundle.summary;
    eprintln!(
        "{} studies ({} passed, {} failed, {} errored), {} checks ({} failed)",
        s.studies, s.studies_passed, s.studies_failed, s.studies_errored, s.checks, s.checks_failed
    );
    Ok(bundle.all_passed())
}

fn main() -> ExitCode {
    let matches = Cli::command().after_help(study_help()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    if cli.list_studies {
        for (kind, what) in STUDY_KINDS {
            println!("{kind}\t{what}");
        }
        return ExitCode::SUCCESS;
    }
    let Some(Command::Run {
        plan,
        out,
        format,
        seed_override,
    }) = cli.command
    else {
        eprintln!("nothing to do; see `hsf --help`");
        return ExitCode::from(2);
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(plan, out, format, seed_override) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
