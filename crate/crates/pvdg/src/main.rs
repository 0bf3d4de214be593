use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pvdg::commands::{self, AnalyzeOptions, ModeArg, MonteCarloOptions, OptimizeOptions};
use pvdg::io::{load_study, StudyPaths};
use pvdg::{CliError, CliResult};

/// PV penetration studies on radial distribution feeders.
#[derive(Debug, Parser)]
#[command(name = "pvdg", version)]
struct Cli {
    /// Worker threads; defaults to all cores. Results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct StudyArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    profiles: PathBuf,
    #[arg(long)]
    solar: PathBuf,
}

impl StudyArgs {
    fn paths(&self) -> StudyPaths {
        StudyPaths { network: self.network.clone(), profiles: self.profiles.clone(), solar: self.solar.clone() }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Combined,
    Loss,
    Voltage,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the study files.
    Validate {
        #[command(flatten)]
        study: StudyArgs,
    },
    /// Time-series power flow of the baseline or of a plan file.
    Powerflow {
        #[command(flatten)]
        study: StudyArgs,
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Optimal installation for each penetration cap.
    Optimize {
        #[command(flatten)]
        study: StudyArgs,
        /// `start:step:stop` or a comma-separated list, in percent.
        #[arg(long, default_value = "0:5:70")]
        gamma_list: String,
        #[arg(long, value_enum, default_value = "combined")]
        mode: Mode,
        /// Voltage weight in combined mode; defaults to baseline loss over baseline deviation.
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long, default_value_t = 50)]
        swarm: usize,
        #[arg(long, default_value_t = 200)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Random installations across installation counts.
    Montecarlo {
        #[command(flatten)]
        study: StudyArgs,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 0.8)]
        beta_min: f64,
        /// Inclusive `a:b`; defaults to `1:<candidates>`.
        #[arg(long)]
        s_range: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Bins, fits and distributions from a records file.
    Analyze {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        optimal: Option<PathBuf>,
        #[arg(long, default_value_t = 5.0)]
        bin_width: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn parse_gamma_list(s: &str) -> CliResult<Vec<f64>> {
    let bad = || CliError::Usage(format!("bad --gamma-list {s:?}"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = s.split(':').collect();
    let values = match parts.as_slice() {
        [a, step, b] => {
            let (a, step, b) = (num(a)?, num(step)?, num(b)?);
            if step.is_nan() || step <= 0.0 || b < a {
                return Err(bad());
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            (0..=n).map(|k| a + step * k as f64).collect()
        }
        [_] => s.split(',').map(num).collect::<CliResult<Vec<_>>>()?,
        _ => return Err(bad()),
    };
    if values.is_empty() {
        return Err(bad());
    }
    Ok(values)
}

fn parse_s_range(s: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::Usage(format!("bad --s-range {s:?}"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn run(cli: Cli) -> CliResult<Vec<String>> {
    match cli.command {
        Command::Validate { study } => commands::cmd_validate(&study.paths()),
        Command::Powerflow { study, plan, out } => {
            commands::cmd_powerflow(&load_study(&study.paths())?, plan.as_deref(), &out)
        }
        Command::Optimize { study, gamma_list, mode, omega, swarm, iters, seed, out } => {
            let mode = match (mode, omega) {
                (Mode::Combined, w) => ModeArg::Combined(w),
                (_, Some(_)) => return Err(CliError::Usage("--omega only applies to --mode combined".into())),
                (Mode::Loss, None) => ModeArg::Loss,
                (Mode::Voltage, None) => ModeArg::Voltage,
            };
            let opts = OptimizeOptions { gammas: parse_gamma_list(&gamma_list)?, mode, seed, swarm, iters };
            commands::cmd_optimize(&load_study(&study.paths())?, &opts, &out)
        }
        Command::Montecarlo { study, trials, beta_min, s_range, seed, out } => {
            let opts = MonteCarloOptions { s_range: s_range.as_deref().map(parse_s_range).transpose()?, trials, beta_min, seed };
            commands::cmd_montecarlo(&load_study(&study.paths())?, &opts, &out)
        }
        Command::Analyze { records, optimal, bin_width, out } => {
            commands::cmd_analyze(&AnalyzeOptions { records, optimal, bin_width_pct: bin_width }, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
