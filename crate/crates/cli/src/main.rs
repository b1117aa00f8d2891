use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dam_isac::experiments::{run_crb_rmse, run_sse_vs_power, solve_once, write_results, ExperimentConfig};
use dam_isac::validation::run_validation;
use dam_isac::DamError;
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "dam-isac", version, about = "Secure ISAC with delay alignment modulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true, default_value = "configs/default.toml")]
    config: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the configured one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Monte Carlo trials (scenarios for `validate`).
    #[arg(long, global = true)]
    trials: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Worst-case secrecy spectral efficiency against transmit power.
    SseSweep,
    /// Delay CRB and estimator RMSE against transmit power.
    CrbSweep,
    /// Closed-form SINR terms against the time-domain oracle.
    Validate {
        #[arg(long, default_value_t = 200_000)]
        symbols: usize,
        #[arg(long, default_value_t = 0.03)]
        tolerance: f64,
    },
    /// One optimization at the configured power budget.
    Solve,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<DamError> for Failure {
    fn from(e: DamError) -> Self {
        match e {
            DamError::Config(_) => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load(cli: &Cli) -> Result<(ExperimentConfig, u64), Failure> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    cfg.validate()?;
    let seed = cli.seed.unwrap_or(cfg.scenario.seed);
    Ok((cfg, seed))
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::SseSweep | Command::CrbSweep => {
            let (cfg, seed) = load(cli)?;
            let (name, rows) = match cli.command {
                Command::SseSweep => ("sse_vs_power", run_sse_vs_power(&cfg, seed)?),
                _ => ("crb_rmse_vs_power", run_crb_rmse(&cfg, seed)?),
            };
            let path = write_results(&rows, &cfg.output, name, &cfg, seed).map_err(|e| Failure::Runtime(e.to_string()))?;
            println!("wrote {}", path.display());
        }
        Command::Validate { symbols, tolerance } => {
            let seed = cli.seed.unwrap_or(7);
            let scenarios = cli.trials.unwrap_or(20);
            if scenarios == 0 || *symbols == 0 || !(*tolerance > 0.0) {
                return Err(Failure::Config("validate needs positive trials, symbols and tolerance".into()));
            }
            let cases = run_validation(seed, scenarios, *symbols, *tolerance)?;
            println!("{:>8} {:>4} {:>14} {:>6}", "scenario", "K", "worst_rel_err", "result");
            for c in &cases {
                let verdict = if c.passed { "PASS" } else { "FAIL" };
                println!("{:>8} {:>4} {:>14.3e} {:>6}", c.scenario, c.num_ues, c.worst_relative_error, verdict);
            }
            let failed = cases.iter().filter(|c| !c.passed).count();
            println!("{} of {} scenarios within {:.1}%", cases.len() - failed, cases.len(), tolerance * 100.0);
            if failed > 0 {
                return Err(Failure::Runtime(format!("{failed} scenario(s) outside tolerance")));
            }
        }
        Command::Solve => {
            let (cfg, seed) = load(cli)?;
            let report = solve_once(&cfg, seed)?;
            let schemes = |v: &[(dam_isac::experiments::Scheme, f64)]| {
                v.iter().map(|(s, x)| (s.name().to_string(), json!(x))).collect::<serde_json::Map<_, _>>()
            };
            let mut dump = json!({
                "seed": seed,
                "power_w": report.power_w,
                "crb_threshold": report.threshold,
                "worst_sse": schemes(&report.sse),
                "crb": schemes(&report.crb),
            });
            if let Some(state) = &report.state {
                dump["sca"] = json!({
                    "iterations": state.iteration,
                    "converged": state.converged,
                    "objective_history": state.history,
                    "records": state.records,
                });
            }
            let text = serde_json::to_string_pretty(&dump).expect("dump is serializable");
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
                let path = dir.join("solve.json");
                std::fs::write(&path, &text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
            }
            // a closed pipe is not a failure of the run
            let _ = writeln!(std::io::stdout(), "{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
