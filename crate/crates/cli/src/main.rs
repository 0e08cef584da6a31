use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod output;
mod reference;

use commands::CliError;

#[derive(Parser, Debug)]
#[command(name = "nvsgi", version, about = "Stern-Gerlach interferometer simulator for a rotating NV nanodiamond")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalOpts {
    /// JSON run configuration; built-in defaults when omitted
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Worker threads for sweeps (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Reserved; recorded in the manifest
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Use the closed-form small-angle solution instead of integrating
    #[arg(long, global = true)]
    pub analytic: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate both spin branches and write trajectories and metrics
    Simulate {
        /// Repeat the run for these constant-density masses (kg)
        #[arg(long, value_delimiter = ',')]
        masses: Option<Vec<f64>>,
    },
    /// Maximum superposition size over a mass x gradient grid
    SweepSuperposition {
        #[arg(long, value_delimiter = ',', default_value = "1e-18,2e-18,5e-18,1e-17,2e-17,5e-17,1e-16")]
        masses: Vec<f64>,
        /// Field gradients eta (T/m)
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1000,-2000,-4000,-7000,-10000")]
        etas: Vec<f64>,
    },
    /// Contrast bound against spin rate for several masses
    Contrast {
        #[arg(long, value_delimiter = ',', default_value = "1e-16,1e-17,5e-18")]
        masses: Vec<f64>,
        /// Spin rates omega0 (rad/s); a log-spaced grid from 2pi x 5 kHz to 2pi x 100 kHz when omitted
        #[arg(long, value_delimiter = ',')]
        omega0: Option<Vec<f64>>,
    },
    /// Compare metrics files against the published reference values
    Report {
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
    },
    /// Print the default configuration as JSON
    Defaults,
    /// Check a configuration and print its hash
    Validate,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate { masses } => commands::simulate(&cli.global, masses.as_deref()),
        Command::SweepSuperposition { masses, etas } => commands::sweep_superposition(&cli.global, &masses, &etas),
        Command::Contrast { masses, omega0 } => commands::contrast(&cli.global, &masses, omega0.as_deref()),
        Command::Report { metrics } => commands::report(&metrics),
        Command::Defaults => commands::defaults(),
        Command::Validate => commands::validate(&cli.global),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
