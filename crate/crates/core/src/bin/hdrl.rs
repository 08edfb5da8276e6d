use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hdrl::agent::Mode;
use hdrl::envs::EnvKind;
use hdrl::harness::{self, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "hdrl",
    version,
    about = "Hyperbolically-discounted reward-punishment actor-critic experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one case and write episodes.csv, curve.csv and meta.json.
    Run(Flags),
    /// Run the hyperbolic / exponential1 / exponential2 comparison.
    Compare(Flags),
}

/// Every flag overrides the matching key of `--config`.
#[derive(Args)]
struct Flags {
    #[arg(long)]
    env: Option<EnvKind>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    exponent: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long = "gamma-r")]
    gamma_r: Option<f64>,
    #[arg(long = "gamma-q")]
    gamma_q: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Flat `key = value` file; see the README for the key list.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
}

impl Flags {
    fn resolve(&self) -> hdrl::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        if let Some(v) = self.env {
            cfg.env = v;
        }
        if let Some(v) = self.mode {
            cfg.agent.mode = v;
        }
        if let Some(v) = self.kappa {
            cfg.agent.hyper.kappa = v;
        }
        if let Some(v) = self.exponent {
            cfg.agent.hyper.exponent = v;
        }
        if let Some(v) = self.beta {
            cfg.agent.hyper.beta = v;
        }
        if let Some(v) = self.gamma_r {
            cfg.agent.gamma_reward = v;
        }
        if let Some(v) = self.gamma_q {
            cfg.agent.gamma_punish = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = self.episodes {
            cfg.episodes = Some(v);
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = self.jobs {
            cfg.jobs = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> hdrl::Result<()> {
    match cli.command {
        Command::Run(flags) => {
            let cfg = flags.resolve()?;
            let case = harness::run_case(&cfg.agent.mode.to_string(), &cfg)?;
            harness::write_case(&case, &cfg.out)?;
            let failed = case.failures().len();
            eprintln!(
                "{}: {} trials x {} episodes, {failed} failed -> {}",
                cfg.env,
                cfg.trials,
                cfg.episodes(),
                cfg.out.display()
            );
        }
        Command::Compare(flags) => {
            let cfg = flags.resolve()?;
            let cmp = harness::run_comparison(&cfg)?;
            harness::write_comparison(&cmp, &cfg.out)?;
            eprintln!(
                "{}: measured gamma_r={:.6} gamma_q={:.6} -> {}",
                cfg.env,
                cmp.meta.measured_gamma_r,
                cmp.meta.measured_gamma_q,
                cfg.out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
