use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use drtalk::config::{parse_list, parse_populations};
use drtalk::{replay, run_experiment, Experiment, ExperimentConfig, Grid, Result, RunOutput};

/// Cheap-talk demand response: partition equilibria, optimal tariffs and
/// recovered welfare.
#[derive(Debug, Parser)]
#[command(name = "drtalk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// BRD iteration traces at p* for each population size (default N = 1..40, κ = 20, ε = 1e-4).
    Convergence(RunArgs),
    /// Regime, κ_max, expected bias and recovered welfare over a price grid.
    PriceSweep(RunArgs),
    /// Recovered welfare against the message count at p* and p* + offset.
    KappaSweep(RunArgs),
    /// Finite-population optimal price against the large-population limit.
    Scaling(RunArgs),
    /// Optimal price, per-consumer prices and the marginal-cost check.
    Price(RunArgs),
    /// Equilibrium partitions at the announced price, or p* if none.
    Equilibrium(RunArgs),
    /// Re-run an experiment from its manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output CSV; the manifest is written next to it.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// BRD stopping tolerance on the sup-norm boundary change.
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Message count, or its upper limit for sweeps.
    #[arg(long)]
    kappa: Option<usize>,
    /// Price grid `lo:hi:n`.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    mc_samples: Option<usize>,
    /// Population sizes: `a,b,c`, `lo:hi` or `lo:hi:step`.
    #[arg(long)]
    populations: Option<String>,
    /// Comma-separated cost curvatures for the scaling experiment.
    #[arg(long)]
    curvatures: Option<String>,
    /// Offset from p* of the second price in the κ sweep.
    #[arg(long, allow_hyphen_values = true)]
    offset: Option<f64>,
}

impl RunArgs {
    fn into_config(self, experiment: Experiment) -> Result<ExperimentConfig> {
        let mut c = ExperimentConfig::new(experiment, self.scenario, self.out);
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.eps {
            c.epsilon = v;
        }
        if let Some(v) = self.max_iterations {
            c.max_iterations = v;
        }
        if let Some(v) = self.kappa {
            c.kappa = v;
        }
        if let Some(v) = self.grid {
            c.grid = Some(v.parse::<Grid>()?);
        }
        if let Some(v) = self.mc_samples {
            c.mc_samples = v;
        }
        if let Some(v) = self.populations {
            c.populations = parse_populations(&v)?;
        }
        if let Some(v) = self.curvatures {
            c.curvatures = parse_list("curvatures", &v)?;
        }
        if let Some(v) = self.offset {
            c.price_offset = v;
        }
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> Result<RunOutput> {
    let (experiment, args) = match cli.command {
        Command::Replay { manifest, out } => return replay(&manifest, &out),
        Command::Convergence(a) => (Experiment::Convergence, a),
        Command::PriceSweep(a) => (Experiment::PriceSweep, a),
        Command::KappaSweep(a) => (Experiment::KappaSweep, a),
        Command::Scaling(a) => (Experiment::Scaling, a),
        Command::Price(a) => (Experiment::Price, a),
        Command::Equilibrium(a) => (Experiment::Equilibrium, a),
    };
    run_experiment(&args.into_config(experiment)?)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            for w in &out.manifest.warnings {
                eprintln!("warning: {w}");
            }
            if out.manifest.experiment == Experiment::Price {
                println!("{}", serde_json::to_string_pretty(&out.manifest.summary).unwrap_or_default());
            }
            println!("wrote {} and {}", out.csv_path.display(), out.manifest_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
