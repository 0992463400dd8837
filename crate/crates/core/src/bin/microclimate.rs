use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use microclimate::error::{Error, Result};
use microclimate::harness::{
    compare_controllers, horizon_study, rolling_run, uncertainty_study, ControllerKind, DisturbanceSpec, RunOptions,
};
use microclimate::model::DayType;
use microclimate::scenario::{export_run, resolve_scenario, write_json, DirLock, Scenario, BUILTIN_NAMES};

#[derive(Parser)]
#[command(name = "microclimate", version, about = "Indoor microclimate control: MPC, linearized MPC and on/off")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Built-in test case (tc1, tc2, tc2_svs) or path to a JSON config.
    #[arg(long, default_value = "tc1")]
    scenario: String,
    /// Day type for built-in profiles: cold, mild or hot.
    #[arg(long)]
    day: Option<DayType>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

impl ScenarioArgs {
    fn load(&self, fallback: DayType) -> Result<Scenario> {
        resolve_scenario(&self.scenario, self.day.unwrap_or(fallback))
    }
}

#[derive(Subcommand)]
enum Command {
    /// One closed-loop day with a single controller.
    Simulate {
        #[command(flatten)]
        common: ScenarioArgs,
        #[arg(long, default_value = "mpc")]
        controller: ControllerKind,
        /// Replanning interval [s].
        #[arg(long, default_value_t = 3600.0)]
        replan: f64,
        /// Seed for the forecast and measurement disturbances.
        #[arg(long)]
        seed: Option<u64>,
        /// Perturb the planner's initial values.
        #[arg(long)]
        disturb: bool,
    },
    /// All three controllers on the same scenario; every day type for built-ins unless --day is given.
    Compare {
        #[command(flatten)]
        common: ScenarioArgs,
        #[arg(long, default_value_t = 3600.0)]
        replan: f64,
    },
    /// Closed-loop MPC with fixed planning windows of several lengths.
    HorizonStudy {
        #[command(flatten)]
        common: ScenarioArgs,
        /// Heating power cap [kW].
        #[arg(long)]
        wmax_kw: Option<f64>,
        /// Planning windows [h].
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,6,24")]
        horizons: Vec<usize>,
    },
    /// MPC and linearized MPC over many disturbance seeds.
    UncertaintyStudy {
        #[command(flatten)]
        common: ScenarioArgs,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value_t = 360.0)]
        replan: f64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            common,
            controller,
            replan,
            seed,
            disturb,
        } => {
            let sc = common.load(DayType::Cold)?;
            if seed.is_some() && !disturb {
                return Err(Error::Usage("--seed only applies together with --disturb".into()));
            }
            let opts = RunOptions {
                replan_interval: replan,
                disturbance: disturb.then(|| DisturbanceSpec::with_seed(seed.unwrap_or(0))),
                ..RunOptions::default()
            };
            let r = rolling_run(&sc, controller, &opts)?;
            export_run(&r, &common.out, &sc.comfort)?;
            println!(
                "{} {}: total {:.3} kWh, penalty {:.4} K·h, max CO2 {:.1} ppm",
                sc.name,
                controller,
                r.energy.total / 1000.0,
                r.penalty,
                r.max_co2_ppm
            );
            Ok(())
        }
        Command::Compare { common, replan } => {
            let days: Vec<DayType> = match (common.day, BUILTIN_NAMES.contains(&common.scenario.as_str())) {
                (Some(d), _) => vec![d],
                (None, true) => DayType::ALL.to_vec(),
                (None, false) => vec![DayType::Cold],
            };
            let opts = RunOptions {
                replan_interval: replan,
                ..RunOptions::default()
            };
            let mut summary = Vec::new();
            println!("{:<14} {:<6} {:>12} {:>12} {:>12} {:>12}", "scenario", "ctrl", "W [kWh]", "Q [kWh]", "total [kWh]", "pen [K·h]");
            for day in days {
                let sc = resolve_scenario(&common.scenario, day)?;
                info!("comparing controllers on {}", sc.name);
                let (rows, results) = compare_controllers(&sc, &ControllerKind::ALL, &opts)?;
                for r in &results {
                    export_run(r, &common.out.join(&sc.name).join(r.controller.as_str()), &sc.comfort)?;
                }
                for row in &rows {
                    match &row.error {
                        None => println!(
                            "{:<14} {:<6} {:>12.3} {:>12.3} {:>12.3} {:>12.4}",
                            sc.name, row.controller, row.heat_cool_kwh, row.ventilation_kwh, row.total_kwh, row.penalty_kh
                        ),
                        Some(e) => println!("{:<14} {:<6} failed: {e}", sc.name, row.controller),
                    }
                }
                summary.push(serde_json::json!({ "scenario": sc.name, "rows": rows }));
            }
            write_summary(&common.out, &summary)
        }
        Command::HorizonStudy {
            common,
            wmax_kw,
            horizons,
        } => {
            let mut sc = common.load(DayType::Cold)?;
            if let Some(kw) = wmax_kw {
                sc.params.w_max = kw * 1000.0;
                sc.params.validate()?;
            }
            if horizons.is_empty() || horizons.contains(&0) {
                return Err(Error::Usage("--horizons needs positive hour counts".into()));
            }
            let rows = horizon_study(&sc, &horizons, &RunOptions::default())?;
            println!("{:>8} {:>14} {:>12} {:>14}", "hours", "energy [kWh]", "pen [K·h]", "J [kWh]");
            for r in &rows {
                println!("{:>8} {:>14.3} {:>12.4} {:>14.3}", r.horizon_hours, r.energy_kwh, r.penalty_kh, r.objective_kwh);
            }
            write_summary(&common.out, &serde_json::json!({ "scenario": sc.name, "rows": rows }))
        }
        Command::UncertaintyStudy { common, seeds, replan } => {
            let sc = common.load(DayType::Mild)?;
            let opts = RunOptions {
                replan_interval: replan,
                ..RunOptions::default()
            };
            let controllers = [ControllerKind::Mpc, ControllerKind::Lmpc];
            let (rows, summary) = uncertainty_study(&sc, &controllers, seeds, &DisturbanceSpec::default(), &opts)?;
            println!("{:<6} {:>6} {:>16} {:>16} {:>16}", "ctrl", "runs", "mean E [kWh]", "mean pen [K·h]", "max pen [K·h]");
            for s in &summary {
                println!(
                    "{:<6} {:>6} {:>16.3} {:>16.4} {:>16.4}",
                    s.controller, s.runs, s.mean_energy_kwh, s.mean_penalty_kh, s.max_penalty_kh
                );
            }
            write_summary(
                &common.out,
                &serde_json::json!({ "scenario": sc.name, "replan_interval_s": replan, "runs": rows, "summary": summary }),
            )
        }
    }
}

fn write_summary<T: serde::Serialize>(dir: &Path, value: &T) -> Result<()> {
    let _lock = DirLock::acquire(dir)?;
    let path = dir.join("summary.json");
    write_json(&path, value)?;
    info!("wrote {}", path.display());
    Ok(())
}
