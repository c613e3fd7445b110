//! Deterministic discrete-event network and scenario engine.
//!
//! Time advances in slot thirds. Honest groups may be partitioned until an
//! epoch; within a group (and after the partition heals) every message is
//! delivered after `delta` thirds. Byzantine validators run one mirror view
//! per honest group and deliver each mirror's messages to that group only.

mod config;
mod engine;
mod report;

use std::collections::HashSet;

pub use config::ConfigMap;
pub use engine::Simulation;
pub use report::{EpochRow, RunReport, RunSummary, ValidatorRow, SCHEMA_VERSION};

use crate::adversary::{AdversaryError, StrategyKind};
use crate::chain::{Epoch, ValidatorId};
use crate::validator::ValidatorError;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum NetsimError {
    #[error(transparent)]
    ConfigInvalid(#[from] ConfigError),
    #[error("partition groups overlap at validator {0}")]
    OverlappingGroups(ValidatorId),
    #[error(transparent)]
    Validator(#[from] ValidatorError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub scenario_id: String,
    pub n: usize,
    pub beta0: f64,
    /// Share of honest validators in the first group; 1 means no partition.
    pub p0: f64,
    /// Epoch at which the partition heals; `None` keeps it past the horizon.
    pub gst: Option<Epoch>,
    /// Delivery delay in slot thirds.
    pub delta: u8,
    /// Draw each delay uniformly from `1..=delta` instead.
    pub jitter: bool,
    pub j: u64,
    pub epochs: u64,
    pub seed: u64,
    pub strategy: StrategyKind,
    pub rho: f64,
    pub record_validators: bool,
    pub stop_on_conflict: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario_id: "scenario".into(),
            n: 100,
            beta0: 0.0,
            p0: 1.0,
            gst: None,
            delta: 1,
            jitter: false,
            j: 8,
            epochs: 10,
            seed: 0,
            strategy: StrategyKind::Idle,
            rho: 0.4,
            record_validators: false,
            stop_on_conflict: false,
        }
    }
}

pub const SCENARIO_KEYS: &[&str] = &[
    "scenario_id",
    "n",
    "beta0",
    "p0",
    "gst",
    "delta",
    "jitter",
    "j",
    "epochs",
    "seed",
    "strategy",
    "rho",
    "record_validators",
    "stop_on_conflict",
];

impl ScenarioConfig {
    pub fn from_map(m: &ConfigMap) -> Result<Self, ConfigError> {
        m.check_keys(SCENARIO_KEYS)?;
        let d = Self::default();
        let gst = match m.get("gst") {
            None | Some("none") | Some("never") => None,
            Some(v) => Some(v.parse().map_err(|_| invalid(format!("key `gst`: cannot parse `{v}`")))?),
        };
        let strategy = match m.get("strategy") {
            None => d.strategy,
            Some(v) => v.parse().map_err(|e: AdversaryError| invalid(e.to_string()))?,
        };
        let c = Self {
            scenario_id: m.get("scenario_id").map_or(d.scenario_id, str::to_string),
            n: m.parse_or("n", d.n)?,
            beta0: m.parse_or("beta0", d.beta0)?,
            p0: m.parse_or("p0", d.p0)?,
            gst,
            delta: m.parse_or("delta", d.delta)?,
            jitter: m.parse_or("jitter", d.jitter)?,
            j: m.parse_or("j", d.j)?,
            epochs: m.parse_or("epochs", d.epochs)?,
            seed: m.parse_or("seed", d.seed)?,
            strategy,
            rho: m.parse_or("rho", d.rho)?,
            record_validators: m.parse_or("record_validators", d.record_validators)?,
            stop_on_conflict: m.parse_or("stop_on_conflict", d.stop_on_conflict)?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_map(&ConfigMap::parse(text)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n == 0 {
            return Err(invalid("n must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta0) {
            return Err(invalid("beta0 must lie in [0, 1)"));
        }
        if !(self.p0 > 0.0 && self.p0 <= 1.0) {
            return Err(invalid("p0 must lie in (0, 1]"));
        }
        if self.delta == 0 {
            return Err(invalid("delta must be at least one third"));
        }
        if self.j >= crate::chain::SLOTS_PER_EPOCH {
            return Err(invalid("j must be below the epoch length"));
        }
        if self.epochs == 0 {
            return Err(invalid("epochs must be positive"));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(invalid("rho must lie in [0, 1)"));
        }
        if self.byzantine_count() >= self.n {
            return Err(invalid("at least one honest validator is required"));
        }
        if self.strategy == StrategyKind::ProbBouncing {
            return Err(invalid(
                "prob-bouncing is evaluated by the bouncing Monte-Carlo, not by the network engine",
            ));
        }
        Ok(())
    }

    pub fn byzantine_count(&self) -> usize {
        (self.beta0 * self.n as f64).round() as usize
    }

    /// Honest validators of the first group.
    pub fn first_group_size(&self) -> usize {
        let h = self.n - self.byzantine_count();
        ((self.p0 * h as f64).round() as usize).clamp(1, h)
    }

    pub fn to_map(&self) -> ConfigMap {
        let mut m = ConfigMap::default();
        m.set("scenario_id", &self.scenario_id);
        m.set("n", self.n);
        m.set("beta0", self.beta0);
        m.set("p0", self.p0);
        m.set("gst", self.gst.map_or("none".to_string(), |g| g.to_string()));
        m.set("delta", self.delta);
        m.set("jitter", self.jitter);
        m.set("j", self.j);
        m.set("epochs", self.epochs);
        m.set("seed", self.seed);
        m.set("strategy", self.strategy);
        m.set("rho", self.rho);
        m.set("record_validators", self.record_validators);
        m.set("stop_on_conflict", self.stop_on_conflict);
        m
    }
}

/// Which honest group each validator belongs to and until when the groups
/// are separated.
#[derive(Clone, Debug, PartialEq)]
pub struct PartitionDirective {
    group_of: Vec<Option<usize>>,
    groups: usize,
    until: Option<Epoch>,
}

impl PartitionDirective {
    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn until(&self) -> Option<Epoch> {
        self.until
    }

    pub fn group_of(&self, v: ValidatorId) -> Option<usize> {
        self.group_of.get(v.index()).copied().flatten()
    }

    pub fn is_noop(&self) -> bool {
        self.groups < 2 || self.until == Some(0)
    }

    /// Messages from group `a` to group `b` sent in `epoch` are withheld.
    pub fn separated(&self, a: usize, b: usize, epoch: Epoch) -> bool {
        a != b && self.until.map_or(true, |u| epoch < u)
    }
}

/// Directive separating `groups` until epoch `until` (`None`: forever).
pub fn partition(groups: &[Vec<ValidatorId>], until: Option<Epoch>) -> Result<PartitionDirective, NetsimError> {
    let n = groups.iter().flatten().map(|v| v.index() + 1).max().unwrap_or(0);
    let mut group_of = vec![None; n];
    let mut seen = HashSet::new();
    for (g, members) in groups.iter().enumerate() {
        for &v in members {
            if !seen.insert(v) {
                return Err(NetsimError::OverlappingGroups(v));
            }
            group_of[v.index()] = Some(g);
        }
    }
    Ok(PartitionDirective { group_of, groups: groups.len(), until })
}

/// Runs one scenario to its horizon.
pub fn run(config: &ScenarioConfig) -> Result<RunReport, NetsimError> {
    Simulation::new(config.clone())?.run()
}
