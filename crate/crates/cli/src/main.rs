//! `nyqscale`: stability analysis, simulation and loci export for scenario files.

mod commands;
mod error;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nyqscale_core::nyquist::{ContourKind, Hyperplane};

use commands::{Check, ContourFlags, SimFlags};
use error::{CliError, EXIT_INPUT};

#[derive(Parser)]
#[command(name = "nyqscale", version, about = "Scalable Nyquist stability analysis of Laplacian-coupled agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Runs a stability check; exit 0 stable, 1 unstable, 2 inconclusive, 3 input error.
    Analyze {
        /// Scenario file or `bundled:<name>`.
        scenario: String,
        #[arg(long, value_enum, default_value = "fov")]
        check: CheckArg,
        #[command(flatten)]
        contour: ContourArgs,
        /// Perturbation for the lossy check.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Simulates the scenario disturbance; exit 4 on divergence.
    Simulate {
        scenario: String,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
        /// Enables servo rate limits.
        #[arg(long)]
        rate_limit: bool,
        /// Keeps every n-th step.
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        pade_order: Option<usize>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Writes eigenloci and vertex trajectories as CSV and SVG.
    ExportLoci {
        scenario: String,
        #[command(flatten)]
        contour: ContourArgs,
    },
    /// Validates a scenario and optionally prints its canonical form.
    Validate {
        scenario: String,
        #[arg(long)]
        print: bool,
    },
    /// Lists the bundled scenarios.
    List,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckArg {
    Theorem1,
    Fov,
    Decentralized,
    Lossy,
}

#[derive(Clone, Copy, ValueEnum)]
enum ContourArg {
    #[value(name = "full-D")]
    FullD,
    #[value(name = "D_r")]
    Dr,
}

#[derive(Args)]
struct ContourArgs {
    #[arg(long, value_enum)]
    contour: Option<ContourArg>,
    /// Inner radius: rad/s, `<x>hz`, `interarea` or `policy`.
    #[arg(long = "contour-r", value_parser = commands::parse_radius)]
    contour_r: Option<f64>,
    /// Outer radius in rad/s.
    #[arg(long = "contour-R")]
    contour_big_r: Option<f64>,
    #[arg(long)]
    tau_max: Option<f64>,
    /// Policy hyperplane as `re,im,nre,nim`.
    #[arg(long, value_parser = commands::parse_hyperplane, allow_hyphen_values = true)]
    hyperplane: Option<Hyperplane>,
    #[arg(long)]
    pade_order: Option<usize>,
    /// Axis samples per decade.
    #[arg(long)]
    density: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl ContourArgs {
    fn flags(&self, epsilon: Option<f64>) -> ContourFlags {
        ContourFlags {
            contour: self.contour.map(|c| match c {
                ContourArg::FullD => ContourKind::FullD,
                ContourArg::Dr => ContourKind::Dr,
            }),
            r: self.contour_r,
            outer_radius: self.contour_big_r,
            tau_max: self.tau_max,
            hyperplane: self.hyperplane,
            pade_order: self.pade_order,
            epsilon,
            density: self.density,
            out_dir: self.out_dir.clone(),
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("NYQSCALE_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("NYQSCALE_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(CliError::Config("NYQSCALE_THREADS must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<i32, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Analyze { scenario, check, contour, epsilon } => {
            let sc = scenario::load(&scenario)?;
            let check = match check {
                CheckArg::Theorem1 => Check::Theorem1,
                CheckArg::Fov => Check::Fov,
                CheckArg::Decentralized => Check::Decentralized,
                CheckArg::Lossy => Check::Lossy,
            };
            commands::analyze(&sc, check, &contour.flags(epsilon))
        }
        Command::Simulate { scenario, dt, t_end, rate_limit, stride, pade_order, out_dir } => {
            let sc = scenario::load(&scenario)?;
            let flags = SimFlags { dt, t_end, rate_limit, stride, pade_order, out_dir };
            commands::run_simulation(&sc, &flags)
        }
        Command::ExportLoci { scenario, contour } => {
            let sc = scenario::load(&scenario)?;
            commands::export_loci(&sc, &contour.flags(None))
        }
        Command::Validate { scenario, print } => {
            let sc = scenario::load(&scenario)?;
            sc.build()?;
            if print {
                println!("{}", serde_json::to_string_pretty(&sc).expect("scenario serializes"));
            } else {
                eprintln!("{}: ok", sc.name);
            }
            Ok(0)
        }
        Command::List => {
            for name in scenario::bundled_names() {
                println!("bundled:{name}");
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
