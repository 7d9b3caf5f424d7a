use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use heatuc::io::{
    exit, load_scenario_case, run_scenario, ModelSelector, ScenarioConfig, ScenarioError,
};
use heatuc::solver::{SolverContext, Tolerances};

#[derive(Parser, Debug)]
#[command(
    name = "heatuc",
    version,
    about = "Heat and electricity market clearing with unit commitment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load and check a case file.
    Validate {
        #[arg(long)]
        case: PathBuf,
        #[arg(long)]
        profile: Option<PathBuf>,
    },
    /// Clear both markets with every unit committed.
    Clear(Common),
    /// Solve a unit-commitment model and clear the markets at its plan.
    Uc {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = UcModel::Aware)]
        model: UcModel,
    },
    /// Solve both commitment models and write their differences.
    Compare(Common),
    /// Enumerate every commitment plan.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Largest number of plans to enumerate.
        #[arg(long, default_value_t = 50_000_000)]
        budget: u64,
    },
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum UcModel {
    Decoupled,
    Aware,
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    case: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    /// Relative MIP gap.
    #[arg(long, default_value_t = 1e-4)]
    gap: f64,
    /// Seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Replaces the case's foreseen electricity prices.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// TOML file overriding numerical tolerances.
    #[arg(long)]
    tolerances: Option<PathBuf>,
    /// Per-period state cap for the aware model, 0 disables lifting.
    #[arg(long, default_value_t = 4096)]
    lift_states: u64,
}

impl Common {
    fn config(&self, model: ModelSelector) -> anyhow::Result<ScenarioConfig> {
        let mut cfg = ScenarioConfig::new(&self.case, model, &self.out);
        cfg.gamma = self.gamma;
        cfg.profile = self.profile.clone();
        cfg.milp.rel_gap = self.gap;
        cfg.lift_states = self.lift_states;
        if let Some(s) = self.time_limit {
            let d = Duration::try_from_secs_f64(s)
                .context("--time-limit must be a non-negative number of seconds")?;
            cfg.milp.time_limit = Some(d);
        }
        Ok(cfg)
    }

    fn context(&self) -> Result<SolverContext, ScenarioError> {
        let tol = match &self.tolerances {
            Some(p) => Tolerances::from_file(p)?,
            None => Tolerances::default(),
        };
        Ok(SolverContext::from_env(tol)?)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::INPUT as u8 } else { 0 });
        }
    };
    ExitCode::from(run(cli) as u8)
}

fn run(cli: Cli) -> i32 {
    let (common, cfg) = match cli.command {
        Command::Validate { case, profile } => {
            let mut cfg = ScenarioConfig::new(case, ModelSelector::Clear, "");
            cfg.profile = profile;
            return match cfg.validate().and_then(|_| load_scenario_case(&cfg)) {
                Ok(c) => {
                    println!(
                        "{}: {} periods, {} buses, {} heat nodes, {} heat units",
                        c.name,
                        c.horizon.len,
                        c.power.buses.len(),
                        c.heat.nodes.len(),
                        c.heat_units().len()
                    );
                    exit::OK
                }
                Err(e) => report(&e),
            };
        }
        Command::Clear(c) => {
            let cfg = c.config(ModelSelector::Clear);
            (c, cfg)
        }
        Command::Uc { common, model } => {
            let sel = match model {
                UcModel::Decoupled => ModelSelector::Decoupled,
                UcModel::Aware => ModelSelector::Aware,
            };
            let cfg = common.config(sel);
            (common, cfg)
        }
        Command::Compare(c) => {
            let cfg = c.config(ModelSelector::Compare);
            (c, cfg)
        }
        Command::Oracle { common, budget } => {
            let cfg = common.config(ModelSelector::Oracle).map(|mut cfg| {
                cfg.oracle_budget = budget;
                cfg
            });
            (common, cfg)
        }
    };
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return exit::INPUT;
        }
    };
    let ctx = match common.context() {
        Ok(c) => c,
        Err(e) => return report(&e),
    };
    match run_scenario(&ctx, &cfg) {
        Ok(out) => {
            for r in &out.runs {
                println!(
                    "{:9} overall {:.1} heat {:.1} electricity {:.1} curtailment {:.2}% violations {}",
                    r.model,
                    r.costs.overall,
                    r.costs.heat,
                    r.costs.electricity,
                    r.costs.curtailment_percent,
                    r.recovery.violations()
                );
            }
            println!("wrote {}", cfg.out.display());
            exit::OK
        }
        Err(e) => report(&e),
    }
}

fn report(e: &ScenarioError) -> i32 {
    eprintln!("error ({}): {e}", e.kind());
    e.exit_code()
}
