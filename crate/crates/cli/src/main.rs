use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod report;

use report::Failure;

#[derive(Parser)]
#[command(
    name = "rib",
    version,
    about = "Restricted invertibility and block factorization toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Profile functions, operator diagnostics and selection parameters.
    Analyze {
        space: PathBuf,
        matrix: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
    },
    /// Randomized selection of σ followed by the factorization certificate.
    Select {
        space: PathBuf,
        matrix: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = rib_core::ribsel::DEFAULT_MAX_TRIALS)]
        max_trials: u64,
        /// Use this bound on ‖T‖ instead of computing one.
        #[arg(long)]
        gamma: Option<f64>,
        /// Write the selection and factorization certificates here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run invariant suites.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Largest σ by subset enumeration (n ≤ 14).
    Oracle {
        space: PathBuf,
        matrix: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        /// Also run the randomized selection with this seed and compare.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Guarantee size and achieved |σ| across dimensions for T = I.
    Scaling {
        #[arg(long, default_value = "lp")]
        family: String,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Comma-separated, strictly increasing.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        #[arg(long)]
        seed: u64,
        /// Largest n for which selections are run.
        #[arg(long, default_value_t = 1024)]
        max_dense: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Greedy blocks and the factorization of the identity on X_m through T.
    DemoFactor {
        space: PathBuf,
        matrix: PathBuf,
        #[arg(long)]
        m: usize,
        #[arg(long = "L", default_value_t = 2)]
        len: usize,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
    },
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("RIB_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        Failure::input(format!(
            "RIB_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::input(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(report::EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Analyze { space, matrix, eta } => commands::analyze(&space, &matrix, eta),
        Command::Select {
            space,
            matrix,
            eta,
            seed,
            max_trials,
            gamma,
            out,
        } => commands::select(
            &space,
            &matrix,
            eta,
            seed,
            max_trials,
            gamma,
            out.as_deref(),
        ),
        Command::Verify {
            suite,
            trials,
            seed,
        } => commands::verify(&suite, trials, seed),
        Command::Oracle {
            space,
            matrix,
            eta,
            seed,
        } => commands::oracle(&space, &matrix, eta, seed),
        Command::Scaling {
            family,
            p,
            sizes,
            eta,
            seed,
            max_dense,
            format,
        } => commands::scaling(&family, p, &sizes, eta, seed, max_dense, format),
        Command::DemoFactor {
            space,
            matrix,
            m,
            len,
            kappa,
            eta,
        } => commands::demo_factor(&space, &matrix, m, len, kappa, eta),
    });
    match result {
        Ok(code) => code,
        Err(failure) => failure.emit(),
    }
}
