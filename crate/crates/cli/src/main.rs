use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bcdprox::harness::{
    generate_datasets, run_experiment, sweep, write_dataset, write_summary, ExperimentConfig, Method, RunOptions,
    SweepAxis,
};
use bcdprox::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bcdprox", version, about = "Filtering and parameter estimation for ODE models")]
struct Cli {
    /// Override both the noise seed and the θ-initialization seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write 0 in the `seconds` column so reruns are byte-identical.
    #[arg(long, global = true)]
    no_timing: bool,
    /// Cap on outer solver iterations.
    #[arg(long, global = true)]
    max_outer: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Write observed and clean datasets for every replicate.
    Generate(ConfigArg),
    /// Run the configured methods, or only `--method`.
    Fit {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        method: Option<String>,
    },
    /// Repeat the experiment along one axis.
    Sweep {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, value_delimiter = ',', conflicts_with_all = ["noise_variance", "theta_sigma2"])]
        lambda: Vec<f64>,
        #[arg(long, value_delimiter = ',', conflicts_with = "theta_sigma2")]
        noise_variance: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        theta_sigma2: Vec<f64>,
    },
    /// Run all four methods and write per-method means.
    Compare(ConfigArg),
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Config(e.to_string())
        }
    }
}

fn load(cli: &Cli, arg: &ConfigArg) -> Result<ExperimentConfig, Failure> {
    let mut config = ExperimentConfig::load(&arg.config)?;
    if let Some(seed) = cli.seed {
        config.noise.seed = seed;
        config.theta_init.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn options(cli: &Cli) -> RunOptions {
    let mut o = RunOptions { record_timing: !cli.no_timing, ..RunOptions::default() };
    if let Some(n) = cli.max_outer {
        o.max_outer_iterations = n;
    }
    o
}

fn report(path: &Path) {
    println!("wrote {}", path.display());
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let opts = options(cli);
    if opts.max_outer_iterations == 0 {
        return Err(Failure::Config("--max-outer must be positive".into()));
    }
    match &cli.command {
        Command::Generate(arg) => {
            let config = load(cli, arg)?;
            for ds in generate_datasets(&config)? {
                let (obs, clean) = write_dataset(&config.out_dir.join("data"), &format!("replicate_{}", ds.replicate), &ds)?;
                report(&obs);
                report(&clean);
            }
        }
        Command::Fit { config: arg, method } => {
            let mut config = load(cli, arg)?;
            if let Some(m) = method {
                config.methods = vec![Method::parse(m)?];
            }
            let result = run_experiment(&config, &opts)?;
            result.write(&config.out_dir, &opts)?;
            report(&config.out_dir.join("results.csv"));
            if result.all_failed() {
                return Err(Failure::Numerical("every replicate failed".into()));
            }
        }
        Command::Sweep { config: arg, lambda, noise_variance, theta_sigma2 } => {
            let config = load(cli, arg)?;
            let (axis, values) = if !lambda.is_empty() {
                (SweepAxis::Lambda, lambda)
            } else if !noise_variance.is_empty() {
                (SweepAxis::NoiseVariance, noise_variance)
            } else if !theta_sigma2.is_empty() {
                (SweepAxis::ThetaSigma2, theta_sigma2)
            } else {
                return Err(Failure::Config("give one of --lambda, --noise-variance, --theta-sigma2".into()));
            };
            let result = sweep(&config, axis, values, &opts)?;
            report(&result.write(&config.out_dir)?);
            if result.all_failed() {
                return Err(Failure::Numerical("every replicate failed".into()));
            }
        }
        Command::Compare(arg) => {
            let mut config = load(cli, arg)?;
            config.methods = Method::ALL.to_vec();
            let result = run_experiment(&config, &opts)?;
            result.write(&config.out_dir, &opts)?;
            let summary = config.out_dir.join("summary.csv");
            write_summary(&summary, &result)?;
            println!("{:<14} {:>14} {:>14}", "method", "pred_error", "est_error");
            for m in Method::ALL {
                println!(
                    "{:<14} {:>14.6e} {:>14.6e}",
                    m.as_str(),
                    result.mean(m, |r| r.pred_error),
                    result.mean(m, |r| r.est_error)
                );
            }
            report(&summary);
            if result.all_failed() {
                return Err(Failure::Numerical("every replicate failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}
