use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sqvi::ProjectionMode;
use sqvi_bench::{experiment, BenchError, Emit, ExperimentConfig, ProblemSpec, SyntheticSpec};

#[derive(Parser)]
#[command(name = "sqvi", version, about = "Variance-reduced stochastic QVI experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem in one or both projection modes.
    Run(RunArgs),
    /// Tabulate mean error against the a-priori bound for several horizons.
    RateStudy {
        #[command(flatten)]
        common: RunArgs,
        /// Comma-separated horizons.
        #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50,60")]
        horizons: Vec<usize>,
    },
    /// Run both modes and emit the comparison summary.
    Compare(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exact,
    Inexact,
    Both,
}

#[derive(Args)]
struct RunArgs {
    /// example1, example2, synthetic or file:<path>
    #[arg(long, default_value = "example1")]
    problem: String,
    #[arg(long, value_enum, default_value = "inexact")]
    mode: ModeArg,
    #[arg(long, default_value_t = 0.95)]
    rho: f64,
    /// Step size, or `auto` for the midpoint of the admissible interval.
    #[arg(long, default_value = "auto")]
    eta: String,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 100)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    replications: usize,
    /// Comma-separated subset of trajectory_csv, summary_json, plotdata_csv.
    #[arg(long, value_delimiter = ',', default_value = "trajectory_csv,summary_json,plotdata_csv")]
    emit: Vec<String>,
    /// Overrides the problem's noise scale.
    #[arg(long)]
    noise_scale: Option<f64>,
    #[arg(long)]
    batch_cap: Option<u64>,
    #[arg(long)]
    residual_tol: Option<f64>,
    /// Worker threads for parallel replications.
    #[arg(long)]
    threads: Option<usize>,
    /// Synthetic instance dimension.
    #[arg(long, default_value_t = 10)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 10.0)]
    lipschitz: f64,
    /// Synthetic noise level.
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, default_value_t = 0)]
    synthetic_seed: u64,
}

impl RunArgs {
    fn into_config(self) -> Result<ExperimentConfig, BenchError> {
        let eta = match self.eta.as_str() {
            "auto" => None,
            s => Some(
                s.parse::<f64>()
                    .map_err(|_| BenchError::Config(format!("--eta expects a number or `auto`, got `{s}`")))?,
            ),
        };
        let modes = match self.mode {
            ModeArg::Exact => vec![ProjectionMode::Exact],
            ModeArg::Inexact => vec![ProjectionMode::Inexact],
            ModeArg::Both => vec![ProjectionMode::Exact, ProjectionMode::Inexact],
        };
        let emit = self
            .emit
            .iter()
            .map(|s| s.parse::<Emit>())
            .collect::<Result<BTreeSet<_>, _>>()?;
        Ok(ExperimentConfig {
            problem: self.problem.parse::<ProblemSpec>()?,
            synthetic: SyntheticSpec {
                dim: self.dim,
                mu: self.mu,
                lipschitz: self.lipschitz,
                nu: self.nu,
                seed: self.synthetic_seed,
            },
            modes,
            eta,
            alpha_bar: self.alpha,
            rho: self.rho,
            horizon: self.horizon,
            seed: self.seed,
            batch_cap: self.batch_cap,
            residual_tol: self.residual_tol,
            noise_scale: self.noise_scale,
            replications: self.replications,
            emit,
            out: self.out,
            threads: self.threads,
        })
    }
}

fn print_summary(outcome: &experiment::Outcome) {
    let s = &outcome.summary;
    println!("problem {} (eta = {})", s.problem, s.settings.eta);
    for m in &s.modes {
        println!(
            "  {:<8} residual {:.3e}  samples {}  inner {}/{}  wall {:.3}s  x = {:?}",
            m.mode.as_str(),
            m.natural_residual,
            m.total_samples,
            m.inner_iterations_used,
            m.total_inner_iterations,
            m.wall_seconds,
            m.final_x
        );
        if let Some(u) = &m.final_utilities {
            println!("           utilities {u:?}");
        }
    }
    if let Some(c) = &s.comparison {
        println!("  exact vs inexact: distance {:.3e}", c.final_point_distance);
    }
    for w in &s.warnings {
        println!("  warning: {w}");
    }
}

fn execute(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Run(args) => print_summary(&experiment::run(&args.into_config()?)?),
        Command::Compare(args) => print_summary(&experiment::compare(&args.into_config()?)?),
        Command::RateStudy { common, horizons } => {
            let study = experiment::rate_study(&common.into_config()?, &horizons)?;
            println!("T,mean_err,bound");
            for r in &study.rows {
                println!("{},{},{}", r.horizon, r.mean_error, r.bound.map(|b| b.to_string()).unwrap_or_default());
            }
            if let Some(why) = &study.bound_unavailable {
                println!("bound unavailable: {why}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
