//! Simulation output: per-epoch rows per honest group, optional
//! per-validator rows, and summary flags.

use super::ScenarioConfig;
use crate::chain::Epoch;

pub const SCHEMA_VERSION: u32 = 1;

/// State of one honest group's representative view at an epoch boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRow {
    pub epoch: Epoch,
    pub group: usize,
    pub head_slot: u64,
    pub justified_epoch: Epoch,
    pub finalized_epoch: Epoch,
    pub total_active_balance: f64,
    /// Byzantine share of the active balance on this group's branch.
    pub byzantine_share: f64,
    pub in_leak: bool,
}

impl EpochRow {
    pub const HEADER: [&'static str; 8] = [
        "epoch",
        "group",
        "head_slot",
        "justified_epoch",
        "finalized_epoch",
        "total_active_balance",
        "byzantine_share",
        "in_leak",
    ];

    pub fn record(&self) -> Vec<String> {
        vec![
            self.epoch.to_string(),
            self.group.to_string(),
            self.head_slot.to_string(),
            self.justified_epoch.to_string(),
            self.finalized_epoch.to_string(),
            format!("{:.6}", self.total_active_balance),
            format!("{:.6}", self.byzantine_share),
            (self.in_leak as u8).to_string(),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidatorRow {
    pub epoch: Epoch,
    pub group: usize,
    pub validator: u32,
    pub stake: f64,
    pub inactivity_score: u64,
    pub active: bool,
}

impl ValidatorRow {
    pub const HEADER: [&'static str; 6] = ["epoch", "group", "validator", "stake", "inactivity_score", "active"];

    pub fn record(&self) -> Vec<String> {
        vec![
            self.epoch.to_string(),
            self.group.to_string(),
            self.validator.to_string(),
            format!("{:.9}", self.stake),
            self.inactivity_score.to_string(),
            (self.active as u8).to_string(),
        ]
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSummary {
    /// First epoch boundary at which two honest views hold finalized
    /// checkpoints that are not on one chain.
    pub conflicting_finalization_epoch: Option<Epoch>,
    /// First epoch boundary at which the Byzantine share of some branch
    /// reaches one third.
    pub threshold_cross_epoch: Option<Epoch>,
    /// First epoch boundary at which honest views hold two different
    /// justified checkpoints of the same epoch.
    pub double_justification_epoch: Option<Epoch>,
    /// Byzantine validators that sent two different votes for one target
    /// epoch.
    pub slashable_validators: usize,
    pub epochs_run: Epoch,
}

impl RunSummary {
    pub const HEADER: [&'static str; 5] = [
        "conflicting_finalization_epoch",
        "threshold_cross_epoch",
        "double_justification_epoch",
        "slashable_validators",
        "epochs_run",
    ];

    pub fn record(&self) -> Vec<String> {
        let opt = |e: Option<Epoch>| e.map_or(String::new(), |e| e.to_string());
        vec![
            opt(self.conflicting_finalization_epoch),
            opt(self.threshold_cross_epoch),
            opt(self.double_justification_epoch),
            self.slashable_validators.to_string(),
            self.epochs_run.to_string(),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub scenario_id: String,
    pub schema_version: u32,
    pub config: ScenarioConfig,
    pub rows: Vec<EpochRow>,
    pub validator_rows: Vec<ValidatorRow>,
    pub summary: RunSummary,
}

impl RunReport {
    pub fn new(config: &ScenarioConfig) -> Self {
        Self {
            scenario_id: config.scenario_id.clone(),
            schema_version: SCHEMA_VERSION,
            config: config.clone(),
            rows: Vec::new(),
            validator_rows: Vec::new(),
            summary: RunSummary::default(),
        }
    }

    /// Rows of one group, in epoch order.
    pub fn group_rows(&self, group: usize) -> impl Iterator<Item = &EpochRow> {
        self.rows.iter().filter(move |r| r.group == group)
    }
}
