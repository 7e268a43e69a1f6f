use clap::{Args, Parser, Subcommand, ValueEnum};
use jbstar::report::{self, IsometrySource, Report, RunConfig};
use jbstar::{Error, Tolerances};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "jbstar", version, about = "Jordan and triple calculus on JB*-algebra models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Model descriptor: inline JSON or a path to a JSON file.
    #[arg(long, default_value = r#"{"kind":"full_matrix","n":2}"#)]
    model: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    /// Identity tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Md,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Identity,
    Conjugation,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Run the algebraic identity suites on random samples.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, hide = true)]
        corrupt_involution: bool,
    },
    /// Factor a principal unitary (or a path of unitaries) into a U-chain.
    Factor {
        #[command(flatten)]
        common: Common,
        /// JSON element, or {"path": [elements]}.
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Winding number and principal-component verdict of a unitary.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Recover the structure of an isometry from its action on unitaries.
    Decompose {
        #[command(flatten)]
        common: Common,
        /// Structured isometry JSON; overrides --isometry.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Preset::Random)]
        isometry: Preset,
        #[arg(long, default_value_t = 3)]
        max_prefactors: usize,
    },
}

fn read(path: &PathBuf) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Precondition(format!("cannot read {}: {e}", path.display())))
}

fn config(common: &Common) -> Result<RunConfig, Error> {
    let mut tolerances = Tolerances::default();
    if let Some(t) = common.tol {
        tolerances = tolerances.with_identity(t);
    }
    Ok(RunConfig {
        model: report::parse_model_arg(&common.model)?,
        seed: common.seed,
        samples: common.samples,
        tolerances,
        corrupt_involution: false,
    })
}

fn run(command: &Command) -> Result<(Report, &Common), Error> {
    Ok(match command {
        Command::Verify { common, corrupt_involution } => {
            let cfg = RunConfig { corrupt_involution: *corrupt_involution, ..config(common)? };
            (report::cmd_verify(&cfg)?, common)
        }
        Command::Factor { common, input } => (report::cmd_factor(&config(common)?, &read(input)?)?, common),
        Command::Classify { common, input } => (report::cmd_classify(&config(common)?, &read(input)?)?, common),
        Command::Decompose { common, input, isometry, max_prefactors } => {
            let source = match (input, isometry) {
                (Some(path), _) => IsometrySource::Json(read(path)?),
                (None, Preset::Identity) => IsometrySource::Identity,
                (None, Preset::Conjugation) => IsometrySource::Conjugation,
                (None, Preset::Random) => IsometrySource::Random { max_prefactors: *max_prefactors },
            };
            (report::cmd_decompose(&config(common)?, &source)?, common)
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (report, common) = match run(&cli.command) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(report::error_exit_code(&e) as u8);
        }
    };
    let text = match common.format {
        Format::Json => report.to_json(),
        Format::Md => report.to_markdown(),
    };
    match &common.out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(2);
            }
        }
        None => {
            let _ = writeln!(std::io::stdout(), "{text}");
        }
    }
    ExitCode::from(report.exit_code() as u8)
}
