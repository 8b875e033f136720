use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod emit;

use emit::Format;

/// Exit statuses. Each error class gets its own code so scripts can tell
/// them apart.
const EXIT_OK: u8 = 0;
const EXIT_FAILED: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_CONFIG: u8 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "mvrr",
    version,
    about = "Simulate and check a multi-value register with order-based resolution"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output style; `structured` prints one `key=value` record per line.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Execute a scenario file and print every read for all four models.
    Run {
        #[arg(long, value_name = "PATH")]
        scenario: PathBuf,
    },
    /// Run seeded random schedules and check the conformance properties.
    Fuzz {
        /// First seed; runs use consecutive seeds from here.
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        runs: u64,
        /// Largest number of replicas per schedule.
        #[arg(long, default_value_t = 5)]
        replicas: usize,
        /// Largest number of random steps per schedule, before the closing
        /// exchange rounds.
        #[arg(long, default_value_t = 25)]
        steps: usize,
    },
    /// Validate an order block (or the order of a scenario file).
    CheckOrder {
        #[arg(
            long,
            value_name = "PATH",
            conflicts_with = "scenario",
            required_unless_present = "scenario"
        )]
        order: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        scenario: Option<PathBuf>,
    },
    /// Search for a schedule on which an implementation disagrees with the
    /// oracle; prints it as a scenario file.
    Witness {
        /// First seed of the random phase.
        #[arg(long)]
        seed: u64,
        /// Random schedules tried before the exhaustive enumeration.
        #[arg(long, default_value_t = 1000)]
        runs: u64,
        /// Largest number of replicas.
        #[arg(long, default_value_t = 3)]
        replicas: usize,
        /// Longest schedule, counting the final read.
        #[arg(long, default_value_t = 8)]
        steps: usize,
        /// Order block to search under; the bug-status order by default.
        #[arg(long, value_name = "PATH")]
        order: Option<PathBuf>,
        /// Implementation compared with the oracle.
        #[arg(long, value_enum, default_value_t = VariantArg::Eager)]
        variant: VariantArg,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum VariantArg {
    Eager,
    Lazy,
    Classic,
}

impl From<VariantArg> for mvrr_core::sim::Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Eager => Self::Eager,
            VariantArg::Lazy => Self::Lazy,
            VariantArg::Classic => Self::Classic,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let format = cli.format;
    let result = match cli.command {
        Command::Run { scenario } => commands::run(&scenario, format),
        Command::Fuzz {
            seed,
            runs,
            replicas,
            steps,
        } => commands::fuzz(seed, runs, replicas, steps, format),
        Command::CheckOrder { order, scenario } => match (order, scenario) {
            (Some(path), _) => commands::check_order(&path, false, format),
            (None, Some(path)) => commands::check_order(&path, true, format),
            (None, None) => unreachable!("clap requires one of the two"),
        },
        Command::Witness {
            seed,
            runs,
            replicas,
            steps,
            order,
            variant,
        } => commands::witness(seed, runs, replicas, steps, order.as_deref(), variant.into(), format),
    };
    match result {
        Ok(output) => {
            print!("{}", output.text);
            ExitCode::from(if output.clean { EXIT_OK } else { EXIT_FAILED })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                commands::CliError::Io { .. } => EXIT_IO,
                commands::CliError::Parse { .. } => EXIT_PARSE,
                commands::CliError::Config(_) => EXIT_CONFIG,
            })
        }
    }
}
