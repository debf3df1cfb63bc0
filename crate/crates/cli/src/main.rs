// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use purcool_cli::commands::{self, Outcome};
use purcool_cli::{CliError, Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "purcool",
    version,
    about = "Optimal unitary control of dissipative purification"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// JSON run configuration; every field is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    #[arg(long, global = true)]
    horizon: Option<f64>,
    #[arg(long, global = true)]
    gamma1: Option<f64>,
    #[arg(long, global = true)]
    gamma2: Option<f64>,
    /// Initial spectrum, e.g. `0.5,0.3,0.2`.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    lambda0: Option<Vec<f64>>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the spectral dynamics under a control policy.
    Simulate {
        /// Registered policy name (greedy, identity, fixed, schedule).
        #[arg(long)]
        policy: Option<String>,
        /// JSON file with `{"name": ..., "params": ...}`.
        #[arg(long)]
        policy_file: Option<PathBuf>,
        #[arg(long)]
        stride: Option<usize>,
    },
    /// Check optimality of the identity control for the three-level system.
    Certify {
        /// Reverse the costate before checking (a negative control).
        #[arg(long)]
        swap_mu: bool,
    },
    /// Solve the Bellman recursion on a simplex grid and compare.
    Dp {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long = "n-t")]
        n_t: Option<usize>,
        /// Also solve at twice the resolution.
        #[arg(long)]
        refine: bool,
    },
    /// Compare the spectral equation with full density-matrix evolution.
    Equiv {
        #[arg(long)]
        samples: Option<usize>,
    },
}

fn configure(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let g = &cli.global;
    cfg.apply(&Overrides {
        seed: g.seed,
        out: g.out.clone(),
        dt: g.dt,
        horizon: g.horizon,
        gamma1: g.gamma1,
        gamma2: g.gamma2,
        lambda0: g.lambda0.clone(),
    })?;
    match &cli.command {
        Command::Simulate {
            policy,
            policy_file,
            stride,
        } => {
            if let Some(p) = policy {
                cfg.simulate.policy = p.clone();
            }
            if policy_file.is_some() {
                cfg.simulate.policy_file = policy_file.clone();
            }
            if let Some(s) = stride {
                cfg.simulate.stride = *s;
            }
        }
        Command::Certify { swap_mu } => cfg.certify.swap_mu |= *swap_mu,
        Command::Dp { m, n_t, refine } => {
            if let Some(m) = m {
                cfg.dp.m = *m;
            }
            if let Some(n) = n_t {
                cfg.dp.n_t = *n;
            }
            cfg.dp.refine |= *refine;
        }
        Command::Equiv { samples } => {
            if let Some(s) = samples {
                cfg.equiv.samples = *s;
            }
        }
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let cfg = configure(cli)?;
    match cli.command {
        Command::Simulate { .. } => commands::simulate::run(&cfg),
        Command::Certify { .. } => commands::certify::run(&cfg),
        Command::Dp { .. } => commands::dp::run(&cfg),
        Command::Equiv { .. } => commands::equiv::run(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(o) if o.passed => {
            println!("{}", o.summary);
            ExitCode::SUCCESS
        }
        Ok(o) => {
            eprintln!("check failed: {}", o.summary);
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
