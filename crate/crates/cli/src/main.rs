//! `ethpos`: runs protocol simulations and incentive games from config
//! files and emits the analytic tables and curves as CSV.
//!
//! Exit codes: 0 on success, 2 on an invalid or unreadable config, 1 on any
//! other failure.

mod curves;
mod tables;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use ethpos_core::game::{self, best_response_check, eventual_obedience_slot, GameScenario, GameRow, Player};
use ethpos_core::netsim::{self, ConfigMap, EpochRow, RunSummary, ScenarioConfig, ValidatorRow};

#[derive(Parser)]
#[command(name = "ethpos", version, about = "Proof-of-stake scenario runner and table emitter")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a network scenario and write per-epoch rows.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Write the summary row here instead of stderr.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Write per-validator rows here (sets `record_validators`).
        #[arg(long)]
        validators: Option<PathBuf>,
    },
    /// Emit one of the analytic tables.
    Tables {
        #[arg(value_enum)]
        which: tables::Table,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Play an incentive game and write per-player rows.
    Game {
        #[command(flatten)]
        common: Common,
        /// Check every player's strategy against all unilateral deviations.
        #[arg(long, conflicts_with = "sweep_rho")]
        check_best_response: bool,
        /// Replay the game for rho = 0.0, 0.1, ..., 0.9.
        #[arg(long)]
        sweep_rho: bool,
    },
    /// Emit a curve as `t,value` rows.
    Curves {
        #[arg(value_enum)]
        which: curves::Curve,
        /// Curve parameters (`p0`, `beta0`, `step`).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Last epoch of the curve.
        #[arg(long)]
        epochs: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file; sections are allowed.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<u64>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Errors that exit with code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct ConfigFailure(String);

fn config_failure(e: impl std::fmt::Display) -> anyhow::Error {
    ConfigFailure(e.to_string()).into()
}

impl Common {
    fn config_map(&self, epochs_key: Option<&str>) -> Result<ConfigMap> {
        let mut m = match &self.config {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| config_failure(format!("cannot read {}: {e}", p.display())))?;
                ConfigMap::parse(&text).map_err(config_failure)?
            }
            None => ConfigMap::default(),
        };
        for s in &self.set {
            m.set_override(s).map_err(config_failure)?;
        }
        if let Some(seed) = self.seed {
            m.set("seed", seed);
        }
        if let (Some(e), Some(key)) = (self.epochs, epochs_key) {
            m.set(key, e);
        }
        Ok(m)
    }
}

fn sink(out: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>> {
    let w: Box<dyn Write> = match out {
        Some(p) => Box::new(io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    Ok(csv::Writer::from_writer(w))
}

fn simulate(common: &Common, summary: Option<&Path>, validators: Option<&Path>) -> Result<()> {
    let mut m = common.config_map(Some("epochs"))?;
    if validators.is_some() {
        m.set("record_validators", true);
    }
    let cfg = ScenarioConfig::from_map(&m).map_err(config_failure)?;
    let report = netsim::run(&cfg)?;

    let mut w = sink(common.out.as_deref())?;
    w.write_record(EpochRow::HEADER)?;
    for r in &report.rows {
        w.write_record(r.record())?;
    }
    w.flush()?;

    if let Some(p) = validators {
        let mut w = sink(Some(p))?;
        w.write_record(ValidatorRow::HEADER)?;
        for r in &report.validator_rows {
            w.write_record(r.record())?;
        }
        w.flush()?;
    }

    let mut header = vec!["scenario_id", "schema_version"];
    header.extend(RunSummary::HEADER);
    let mut row = vec![report.scenario_id.clone(), report.schema_version.to_string()];
    row.extend(report.summary.record());
    match summary {
        Some(p) => {
            let mut w = sink(Some(p))?;
            w.write_record(header)?;
            w.write_record(row)?;
            w.flush()?;
        }
        None => {
            let mut w = csv::Writer::from_writer(io::stderr().lock());
            w.write_record(header)?;
            w.write_record(row)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn game_scenario(m: &ConfigMap) -> Result<GameScenario> {
    GameScenario::from_map(m).map_err(|e| match e {
        game::GameError::ConfigInvalid(_) => config_failure(e),
        e => e.into(),
    })
}

fn run_game(common: &Common, check: bool, sweep: bool) -> Result<()> {
    let m = common.config_map(None)?;
    let scenario = game_scenario(&m)?;
    let mut w = sink(common.out.as_deref())?;

    if sweep {
        w.write_record(["rho", "proposer_deviations", "deviating_slots", "eventual_obedience_slot"])?;
        for i in 0..10 {
            let rho = i as f64 / 10.0;
            let mut m = m.clone();
            m.set("rho", rho);
            let run = game_scenario(&m)?.run()?;
            let slots: Vec<String> = run.actions.deviating_slots().iter().map(usize::to_string).collect();
            let obey = eventual_obedience_slot(&run.actions).map_or(String::new(), |k| k.to_string());
            w.write_record([format!("{rho:.1}"), run.actions.proposer_deviations().to_string(), slots.join(" "), obey])?;
        }
    } else if check {
        let (cfg, profile) = (&scenario.config, &scenario.profile);
        w.write_record([
            "slot",
            "role",
            "index",
            "strategy",
            "is_best_response",
            "payoff",
            "best_deviation",
            "deviation_payoff",
        ])?;
        for k in 0..cfg.s {
            let players = std::iter::once(Player::Proposer(k)).chain((0..cfg.a).map(move |i| Player::Attester(i, k)));
            for p in players {
                let (role, index) = match p {
                    Player::Proposer(_) => ("proposer", 0),
                    Player::Attester(i, _) => ("attester", i + 1),
                };
                let mut row = vec![k.to_string(), role.into(), index.to_string(), profile.get(p).to_string()];
                match best_response_check(cfg, profile, p) {
                    Ok(br) => {
                        row.push(br.is_best_response.to_string());
                        row.push(format!("{:.9}", br.payoff));
                        match br.witness {
                            Some((d, u)) => {
                                row.push(match d {
                                    game::Deviation::Strategy(s) => s.to_string(),
                                    game::Deviation::Offset(o) => format!("offset:{o}"),
                                });
                                row.push(format!("{u:.9}"));
                            }
                            None => row.extend([String::new(), String::new()]),
                        }
                    }
                    Err(game::GameError::Unresolved(_)) => row.extend(["unresolved".into(), String::new(), String::new(), String::new()]),
                    Err(e) => return Err(e.into()),
                }
                w.write_record(row)?;
            }
        }
    } else {
        let run = scenario.run()?;
        w.write_record(GameRow::HEADER)?;
        for r in run.rows() {
            w.write_record(r.record())?;
        }
        let obey = eventual_obedience_slot(&run.actions).map_or("never".to_string(), |k| k.to_string());
        eprintln!(
            "scenario_id={} proposer_deviations={} eventual_obedience_slot={obey}",
            scenario.scenario_id,
            run.actions.proposer_deviations()
        );
    }
    w.flush()?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common, summary, validators } => simulate(&common, summary.as_deref(), validators.as_deref()),
        Command::Tables { which, out } => {
            let mut w = sink(out.as_deref())?;
            tables::emit(which, &mut w)?;
            w.flush()?;
            Ok(())
        }
        Command::Game { common, check_best_response, sweep_rho } => run_game(&common, check_best_response, sweep_rho),
        Command::Curves { which, set, epochs, out } => {
            let mut m = ConfigMap::default();
            for s in &set {
                m.set_override(s).map_err(config_failure)?;
            }
            if let Some(e) = epochs {
                m.set("t_max", e);
            }
            let params = curves::Params::from_map(&m).map_err(config_failure)?;
            let mut w = sink(out.as_deref())?;
            curves::emit(which, &params, &mut w)?;
            w.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigFailure>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
