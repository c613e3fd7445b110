//! Proposer-boost incentive game over `s` slots with one proposer and `a`
//! attesters per slot.
//!
//! Before the game, genesis (slot -3) carries a fork-choice branch `f` at
//! slot -1 with attestation weight `w_f` and a concurrent branch `g` at slot
//! -2 with weight `w_g` (absent when `w_g = 0`). In each slot the proposer
//! picks a parent, then all attesters vote at once. Blocks include every fee
//! and attestation their ancestors did not.

mod engine;
mod report;
mod tree;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::netsim::{ConfigError, ConfigMap};

pub use engine::{attestation_reward, Deviation, Outcome};
pub use report::GameRow;
pub use tree::{GameBlock, GameTree, GENESIS_SLOT};

/// Largest horizon accepted by [`best_response_check`].
pub const MAX_BEST_RESPONSE_HORIZON: usize = 6;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GameError {
    #[error("invalid game configuration: {0}")]
    ConfigInvalid(String),
    #[error("payoff of {0} depends on blocks past the horizon")]
    Unresolved(Player),
    #[error("argument out of domain: {0}")]
    DomainError(String),
    #[error("horizon {0} is too large for exhaustive search")]
    HorizonTooLarge(usize),
    #[error("some player deviates in the last slot")]
    NeverObedient,
    #[error("no such player: {0}")]
    UnknownPlayer(Player),
}

impl From<ConfigError> for GameError {
    fn from(e: ConfigError) -> Self {
        let ConfigError::Invalid(m) = e;
        GameError::ConfigInvalid(m)
    }
}

fn invalid(msg: impl Into<String>) -> GameError {
    GameError::ConfigInvalid(msg.into())
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameConfig {
    pub s: usize,
    pub a: usize,
    pub rho: f64,
    pub x: f64,
    /// Fees generated in slots `-3 ..= s - 2`; see [`GameConfig::fee`].
    pub fees: Vec<f64>,
    pub w_f: f64,
    pub w_g: f64,
}

impl GameConfig {
    /// Config with every fee equal to `fee`.
    pub fn new(s: usize, a: usize, rho: f64, x: f64, fee: f64, w_f: f64, w_g: f64) -> Self {
        Self { s, a, rho, x, fees: vec![fee; s + 2], w_f, w_g }
    }

    pub fn with_fees(mut self, fees: Vec<f64>) -> Self {
        self.fees = fees;
        self
    }

    /// Fees drawn uniformly from `levels`.
    pub fn with_random_fees(mut self, levels: &[f64], seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        self.fees = (0..self.s + 2).map(|_| *levels.choose(&mut rng).unwrap_or(&1.0)).collect();
        self
    }

    /// Fee `f_j` generated during slot `j`.
    pub fn fee(&self, j: i64) -> f64 {
        self.fees[(j - GENESIS_SLOT) as usize]
    }

    pub fn validate(&self) -> Result<(), GameError> {
        if self.s == 0 {
            return Err(invalid("s must be positive"));
        }
        if self.a == 0 {
            return Err(invalid("a must be positive"));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(invalid("rho must lie in [0, 1)"));
        }
        if !(self.x > 0.0 && self.x.is_finite()) {
            return Err(invalid("x must be positive"));
        }
        if self.fees.len() != self.s + 2 {
            return Err(invalid(format!("expected {} fees (slots -3 ..= s-2), got {}", self.s + 2, self.fees.len())));
        }
        if self.fees.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
            return Err(invalid("fees must be positive"));
        }
        if !(self.w_g >= 0.0 && self.w_f >= self.w_g && self.w_f.is_finite()) {
            return Err(invalid("need w_f >= w_g >= 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Strategy {
    #[default]
    Obedient,
    Cunning,
}

impl FromStr for Strategy {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "obedient" | "o" => Ok(Self::Obedient),
            "cunning" | "c" => Ok(Self::Cunning),
            other => Err(invalid(format!("unknown game strategy `{other}`"))),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Obedient => "obedient",
            Self::Cunning => "cunning",
        })
    }
}

/// Proposer of slot `k`, or attester `i` of slot `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Player {
    Proposer(usize),
    Attester(usize, usize),
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Proposer(k) => write!(f, "proposer of slot {k}"),
            Self::Attester(i, k) => write!(f, "attester {i} of slot {k}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrategyProfile {
    pub proposers: Vec<Strategy>,
    /// `attesters[k][i]`.
    pub attesters: Vec<Vec<Strategy>>,
}

impl StrategyProfile {
    pub fn uniform(s: usize, a: usize, proposers: Strategy, attesters: Strategy) -> Self {
        Self { proposers: vec![proposers; s], attesters: vec![vec![attesters; a]; s] }
    }

    pub fn obedient(s: usize, a: usize) -> Self {
        Self::uniform(s, a, Strategy::Obedient, Strategy::Obedient)
    }

    pub fn get(&self, p: Player) -> Strategy {
        match p {
            Player::Proposer(k) => self.proposers[k],
            Player::Attester(i, k) => self.attesters[k][i],
        }
    }

    pub fn set(&mut self, p: Player, s: Strategy) {
        match p {
            Player::Proposer(k) => self.proposers[k] = s,
            Player::Attester(i, k) => self.attesters[k][i] = s,
        }
    }

    pub fn with(mut self, p: Player, s: Strategy) -> Self {
        self.set(p, s);
        self
    }

    fn fits(&self, cfg: &GameConfig) -> bool {
        self.proposers.len() == cfg.s && self.attesters.len() == cfg.s && self.attesters.iter().all(|v| v.len() == cfg.a)
    }

    fn knows(&self, cfg: &GameConfig, p: Player) -> bool {
        match p {
            Player::Proposer(k) => k < cfg.s,
            Player::Attester(i, k) => k < cfg.s && i < cfg.a,
        }
    }
}

/// How `χ` is settled when the horizon leaves two chains open.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Resolution {
    /// Each chain with probability 1/2; payoffs are expectations.
    #[default]
    Analytic,
    /// One seeded coin picks the chain.
    Sampled(u64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlotActions {
    pub phi: u64,
    pub prescribed_phi: u64,
    pub nu: Vec<u64>,
    pub prescribed_nu: u64,
    /// Probability that the slot's block is canonical.
    pub chi: f64,
}

impl SlotActions {
    pub fn deviating_attesters(&self) -> usize {
        self.nu.iter().filter(|&&v| v != self.prescribed_nu).count()
    }

    pub fn obedient(&self) -> bool {
        self.phi == self.prescribed_phi && self.deviating_attesters() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionProfile {
    pub slots: Vec<SlotActions>,
}

impl ActionProfile {
    pub fn proposer_deviations(&self) -> usize {
        self.slots.iter().filter(|s| s.phi != s.prescribed_phi).count()
    }

    pub fn deviating_slots(&self) -> Vec<usize> {
        (0..self.slots.len()).filter(|&k| !self.slots[k].obedient()).collect()
    }
}

/// A played and resolved game.
#[derive(Clone, Debug, PartialEq)]
pub struct GameRun {
    pub config: GameConfig,
    pub profile: StrategyProfile,
    pub resolution: Resolution,
    pub tree: GameTree,
    pub outcomes: Vec<Outcome>,
    pub actions: ActionProfile,
}

impl GameRun {
    pub fn attester_payoff(&self, i: usize, k: usize) -> Result<f64, GameError> {
        attester_payoff(self, i, k)
    }

    pub fn proposer_payoff(&self, k: usize) -> Result<f64, GameError> {
        proposer_payoff(self, k)
    }

    pub fn payoff(&self, p: Player) -> Result<f64, GameError> {
        match p {
            Player::Proposer(k) => self.proposer_payoff(k),
            Player::Attester(i, k) => self.attester_payoff(i, k),
        }
    }
}

/// `w_f - w_g <= ρ a`.
pub fn cunning_condition(w_f: f64, w_g: f64, rho: f64, a: usize) -> Result<bool, GameError> {
    if !(w_g >= 0.0 && w_f >= w_g) {
        return Err(GameError::DomainError("need w_f >= w_g >= 0".into()));
    }
    Ok(w_f - w_g <= rho * a as f64 + 1e-12)
}

/// `φ` of the oldest parent that keeps the slot-`k` block the boosted head.
pub fn cunning_proposer_action(tree: &GameTree, k: usize, rho: f64, a: usize) -> u64 {
    tree.parent_offset(k, tree.cunning_parent(k, rho * a as f64))
}

/// `φ` prescribed by the fork choice for the proposer of slot `k`.
pub fn obedient_proposer_action(tree: &GameTree, k: usize) -> u64 {
    tree.parent_offset(k, tree.obedient_parent(k))
}

/// Plays the profile and resolves the horizon.
///
/// A cunning proposer takes the oldest boosted-head parent unless obeying
/// pays more in expectation; the comparison rolls out the remaining slots
/// with later cunning players taking the oldest parent outright. A cunning
/// attester votes for the oldest parent that would keep the next block the
/// boosted head if every attester of its slot were obedient.
pub fn simulate_game(config: &GameConfig, profile: &StrategyProfile, resolution: Resolution) -> Result<GameRun, GameError> {
    run_with(config, profile, resolution, None)
}

fn run_with(
    config: &GameConfig,
    profile: &StrategyProfile,
    resolution: Resolution,
    deviation: Option<(Player, Deviation)>,
) -> Result<GameRun, GameError> {
    config.validate()?;
    if !profile.fits(config) {
        return Err(invalid("profile does not match s and a"));
    }
    let tree = engine::Engine::new(config, profile, deviation).play();
    let outcomes = engine::resolve(&tree, config.s, resolution);
    let actions = engine::actions(config, &tree, &outcomes);
    Ok(GameRun { config: config.clone(), profile: profile.clone(), resolution, tree, outcomes, actions })
}

pub fn attester_payoff(run: &GameRun, i: usize, k: usize) -> Result<f64, GameError> {
    if !run.profile.knows(&run.config, Player::Attester(i, k)) {
        return Err(GameError::UnknownPlayer(Player::Attester(i, k)));
    }
    engine::expected(&run.outcomes, |o| engine::attester_payoff_in(&run.config, &run.tree, i, k, o))
}

pub fn proposer_payoff(run: &GameRun, k: usize) -> Result<f64, GameError> {
    if k >= run.config.s {
        return Err(GameError::UnknownPlayer(Player::Proposer(k)));
    }
    engine::expected(&run.outcomes, |o| Ok(engine::proposer_payoff_in(&run.config, &run.tree, k, o)))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestResponse {
    pub is_best_response: bool,
    pub payoff: f64,
    /// Most profitable improving deviation and its payoff.
    pub witness: Option<(Deviation, f64)>,
}

/// Deviations tried by [`best_response_check`]: both strategies and every
/// offset that names an existing block.
pub fn candidate_deviations(config: &GameConfig, player: Player) -> Vec<Deviation> {
    let mut out = vec![Deviation::Strategy(Strategy::Obedient), Deviation::Strategy(Strategy::Cunning)];
    let (k, max_target) = match player {
        Player::Proposer(k) => (k as i64, k as i64 - 1),
        Player::Attester(_, k) => (k as i64, k as i64),
    };
    for target in (GENESIS_SLOT..=max_target).rev() {
        if target == -2 && config.w_g <= 0.0 {
            continue;
        }
        let l = match player {
            Player::Proposer(_) => k - 1 - target,
            Player::Attester(..) => k - target,
        };
        out.push(Deviation::Offset(l as u64));
    }
    out
}

/// Exhaustive unilateral deviation search for `player` under analytic
/// resolution.
pub fn best_response_check(config: &GameConfig, profile: &StrategyProfile, player: Player) -> Result<BestResponse, GameError> {
    if config.s > MAX_BEST_RESPONSE_HORIZON {
        return Err(GameError::HorizonTooLarge(config.s));
    }
    config.validate()?;
    if !profile.knows(config, player) {
        return Err(GameError::UnknownPlayer(player));
    }
    let payoff = run_with(config, profile, Resolution::Analytic, None)?.payoff(player)?;
    let mut witness: Option<(Deviation, f64)> = None;
    for d in candidate_deviations(config, player) {
        let u = run_with(config, profile, Resolution::Analytic, Some((player, d)))?.payoff(player)?;
        if u > payoff + 1e-9 * payoff.abs().max(1.0) && witness.map_or(true, |(_, w)| u > w) {
            witness = Some((d, u));
        }
    }
    Ok(BestResponse { is_best_response: witness.is_none(), payoff, witness })
}

/// First slot from which every action is the prescribed one.
pub fn eventual_obedience_slot(actions: &ActionProfile) -> Result<usize, GameError> {
    let k = actions.slots.iter().rposition(|s| !s.obedient()).map_or(0, |d| d + 1);
    if k > 0 && k >= actions.slots.len() {
        return Err(GameError::NeverObedient);
    }
    Ok(k)
}

/// Attester reward under a cunning attester in a persistent two-branch
/// fork: half `x`, half `20x/27`.
pub fn bouncing_cunning_attester_payoff(x: f64) -> f64 {
    0.5 * (x + 20.0 * x / 27.0)
}

/// Expected proposer payoff when bouncing two slots back.
pub fn bouncing_cunning_proposer_payoff(a: usize, x: f64, f_km2: f64, f_km1: f64) -> f64 {
    a as f64 / 7.0 * (20.0 * x / 27.0) + (f_km2 + f_km1) / 2.0
}

pub fn obedient_proposer_payoff(a: usize, x: f64, f_km1: f64) -> f64 {
    a as f64 * x / 7.0 + f_km1
}

/// Bouncing beats obeying iff `(f_{k-2} - f_{k-1}) / 2 >= a x / 27`.
pub fn bouncing_profitable(a: usize, x: f64, f_km2: f64, f_km1: f64) -> bool {
    (f_km2 - f_km1) / 2.0 >= a as f64 * x / 27.0
}

pub const GAME_KEYS: &[&str] =
    &["scenario_id", "s", "a", "rho", "x", "w_f", "w_g", "fees", "fee_levels", "seed", "proposers", "attesters", "mode"];

/// A game as read from a configuration file.
#[derive(Clone, Debug, PartialEq)]
pub struct GameScenario {
    pub scenario_id: String,
    pub config: GameConfig,
    pub profile: StrategyProfile,
    pub resolution: Resolution,
}

impl GameScenario {
    /// Fees come from `fees` (comma-separated, `s + 2` values) or are drawn
    /// from `fee_levels` with `seed`; the default is a flat fee of 1.
    pub fn from_map(m: &ConfigMap) -> Result<Self, GameError> {
        m.check_keys(GAME_KEYS)?;
        let s: usize = m.parse_or("s", 8)?;
        let a: usize = m.parse_or("a", 10)?;
        let seed: u64 = m.parse_or("seed", 0)?;
        let list = |key: &str| -> Result<Option<Vec<f64>>, GameError> {
            m.get(key)
                .map(|v| {
                    v.split(',')
                        .map(|x| x.trim().parse::<f64>().map_err(|_| invalid(format!("key `{key}`: cannot parse `{x}`"))))
                        .collect()
                })
                .transpose()
        };
        let mut config = GameConfig::new(s, a, m.parse_or("rho", 0.4)?, m.parse_or("x", 1.0)?, 1.0, m.parse_or("w_f", 0.0)?, m.parse_or("w_g", 0.0)?);
        match (list("fees")?, list("fee_levels")?) {
            (Some(_), Some(_)) => return Err(invalid("give either `fees` or `fee_levels`")),
            (Some(f), None) => config = config.with_fees(f),
            (None, Some(l)) if !l.is_empty() => config = config.with_random_fees(&l, seed),
            _ => {}
        }
        config.validate()?;
        let strat = |key: &str| -> Result<Strategy, GameError> { m.get(key).map_or(Ok(Strategy::Obedient), str::parse) };
        let profile = StrategyProfile::uniform(s, a, strat("proposers")?, strat("attesters")?);
        let resolution = match m.get("mode").unwrap_or("analytic") {
            "analytic" => Resolution::Analytic,
            "sampled" => Resolution::Sampled(seed),
            other => return Err(invalid(format!("unknown resolution mode `{other}`"))),
        };
        Ok(Self { scenario_id: m.get("scenario_id").unwrap_or("game").to_string(), config, profile, resolution })
    }

    pub fn parse(text: &str) -> Result<Self, GameError> {
        Self::from_map(&ConfigMap::parse(text)?)
    }

    pub fn run(&self) -> Result<GameRun, GameError> {
        simulate_game(&self.config, &self.profile, self.resolution)
    }
}
