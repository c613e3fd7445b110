//! Slot-by-slot play, horizon resolution and payoffs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::tree::GameTree;
use super::{ActionProfile, GameConfig, GameError, Player, Resolution, SlotActions, Strategy, StrategyProfile};

const PAYOFF_EPS: f64 = 1e-12;

/// What a player actually does: a strategy or a fixed offset.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Deviation {
    Strategy(Strategy),
    /// Fixed `φ` (proposer) or `ν` (attester).
    Offset(u64),
}

/// How cunning players reason. Strategic cunning proposers weigh a
/// deviation against obeying by rolling out the rest of the game with every
/// later cunning player acting myopically.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Policy {
    Strategic,
    Myopic,
}

/// One equally likely (or sampled) canonical chain at the horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub canonical: Vec<bool>,
    pub weight: f64,
}

/// Attestation reward by inclusion distance and correctness.
pub fn attestation_reward(x: f64, distance: u64, correct: bool) -> f64 {
    match distance {
        1 if correct => x,
        1..=5 => 20.0 * x / 27.0,
        6..=64 => 6.0 * x / 27.0,
        _ => 0.0,
    }
}

pub(super) struct Engine<'a> {
    cfg: &'a GameConfig,
    profile: &'a StrategyProfile,
    deviation: Option<(Player, Deviation)>,
}

impl<'a> Engine<'a> {
    pub(super) fn new(cfg: &'a GameConfig, profile: &'a StrategyProfile, deviation: Option<(Player, Deviation)>) -> Self {
        Self { cfg, profile, deviation }
    }

    fn rho_a(&self) -> f64 {
        self.cfg.rho * self.cfg.a as f64
    }

    fn choice(&self, p: Player) -> Deviation {
        match self.deviation {
            Some((q, d)) if q == p => d,
            _ => Deviation::Strategy(self.profile.get(p)),
        }
    }

    /// Plays every slot and returns the final tree.
    pub(super) fn play(&self) -> GameTree {
        let mut t = GameTree::initial(self.cfg.w_f, self.cfg.w_g);
        self.play_from(&mut t, 0, Policy::Strategic);
        t
    }

    fn play_from(&self, t: &mut GameTree, from: usize, policy: Policy) {
        for k in from..self.cfg.s {
            let p = self.proposer_parent(t, k, policy);
            t.propose(k as i64, p);
            self.attest_slot(t, k);
        }
    }

    fn attest_slot(&self, t: &mut GameTree, k: usize) {
        let obedient = t.obedient_vote(k, self.rho_a());
        let mut cunning = None;
        let votes = (0..self.cfg.a)
            .map(|i| match self.choice(Player::Attester(i, k)) {
                Deviation::Strategy(Strategy::Obedient) => obedient,
                Deviation::Offset(l) => t.block_at(k as i64 - l as i64).unwrap_or(obedient),
                Deviation::Strategy(Strategy::Cunning) => {
                    *cunning.get_or_insert_with(|| self.cunning_vote(t, k, obedient))
                }
            })
            .collect();
        t.attest(k, votes);
    }

    /// Oldest boosted-head parent for the next proposer if all of slot `k`
    /// attested obediently. The last slot has no next proposer.
    fn cunning_vote(&self, t: &GameTree, k: usize, obedient: usize) -> usize {
        if k + 1 >= self.cfg.s {
            return obedient;
        }
        let mut hyp = t.clone();
        hyp.attest(k, vec![obedient; self.cfg.a]);
        hyp.cunning_parent(k + 1, self.rho_a())
    }

    fn proposer_parent(&self, t: &GameTree, k: usize, policy: Policy) -> usize {
        match self.choice(Player::Proposer(k)) {
            Deviation::Strategy(Strategy::Obedient) => t.obedient_parent(k),
            Deviation::Offset(l) => t.block_at(k as i64 - 1 - l as i64).unwrap_or_else(|| t.obedient_parent(k)),
            Deviation::Strategy(Strategy::Cunning) => self.cunning_parent(t, k, policy),
        }
    }

    fn cunning_parent(&self, t: &GameTree, k: usize, policy: Policy) -> usize {
        let obedient = t.obedient_parent(k);
        let oldest = t.cunning_parent(k, self.rho_a());
        if oldest == obedient || policy == Policy::Myopic {
            return oldest;
        }
        if self.rollout_payoff(t, k, oldest) + PAYOFF_EPS >= self.rollout_payoff(t, k, obedient) {
            oldest
        } else {
            obedient
        }
    }

    /// Expected payoff of proposer `k` building on `parent`, with the rest
    /// of the game played myopically.
    fn rollout_payoff(&self, t: &GameTree, k: usize, parent: usize) -> f64 {
        let mut r = t.clone();
        r.propose(k as i64, parent);
        self.attest_slot(&mut r, k);
        self.play_from(&mut r, k + 1, Policy::Myopic);
        let outcomes = resolve(&r, self.cfg.s, Resolution::Analytic);
        expected(&outcomes, |o| Ok(proposer_payoff_in(self.cfg, &r, k, o))).expect("proposer payoffs resolve")
    }
}

/// Canonical chains at the horizon. The game is unresolved when the final
/// head does not extend the head after the previous slot; both chains are
/// then possible.
pub(super) fn resolve(t: &GameTree, s: usize, mode: Resolution) -> Vec<Outcome> {
    let last = t.head(s as i64 - 1, s, None);
    let prev = t.head(s as i64 - 2, s - 1, None);
    let chain = |h: usize| (0..t.len()).map(|b| t.is_ancestor(b, h)).collect::<Vec<bool>>();
    if t.is_ancestor(prev, last) {
        return vec![Outcome { canonical: chain(last), weight: 1.0 }];
    }
    match mode {
        Resolution::Analytic => vec![
            Outcome { canonical: chain(last), weight: 0.5 },
            Outcome { canonical: chain(prev), weight: 0.5 },
        ],
        Resolution::Sampled(seed) => {
            let pick = if ChaCha20Rng::seed_from_u64(seed).gen_bool(0.5) { last } else { prev };
            vec![Outcome { canonical: chain(pick), weight: 1.0 }]
        }
    }
}

pub(super) fn expected(outcomes: &[Outcome], f: impl Fn(&Outcome) -> Result<f64, GameError>) -> Result<f64, GameError> {
    outcomes.iter().try_fold(0.0, |acc, o| Ok(acc + o.weight * f(o)?))
}

/// Fees and attestation share of proposer `k` if its block is canonical.
pub(super) fn proposer_payoff_in(cfg: &GameConfig, t: &GameTree, k: usize, o: &Outcome) -> f64 {
    let b = t.block_at(k as i64).expect("every slot has a block");
    if !o.canonical[b] {
        return 0.0;
    }
    let parent = t.parent(b).expect("non-genesis");
    let from = t.slot_of(parent);
    let mut total = 0.0;
    for j in from..k as i64 {
        total += cfg.fee(j);
        if j >= 0 {
            let d = (k as i64 - j) as u64;
            let att: f64 = t.votes()[j as usize]
                .iter()
                .map(|&v| attestation_reward(cfg.x, d, d == 1 && v == parent))
                .sum();
            total += att / 7.0;
        }
    }
    total
}

/// Reward of attester `(i, k)` from its first inclusion on the chain.
pub(super) fn attester_payoff_in(cfg: &GameConfig, t: &GameTree, i: usize, k: usize, o: &Outcome) -> Result<f64, GameError> {
    let incl = (0..t.len())
        .filter(|&b| o.canonical[b] && t.slot_of(b) > k as i64)
        .min_by_key(|&b| t.slot_of(b))
        .ok_or(GameError::Unresolved(Player::Attester(i, k)))?;
    let d = (t.slot_of(incl) - k as i64) as u64;
    let correct = d == 1 && t.parent(incl) == Some(t.votes()[k][i]);
    Ok(attestation_reward(cfg.x, d, correct))
}

/// Actions taken against the prescribed ones, with `χ` from the outcomes.
pub(super) fn actions(cfg: &GameConfig, t: &GameTree, outcomes: &[Outcome]) -> ActionProfile {
    let rho_a = cfg.rho * cfg.a as f64;
    let slots = (0..cfg.s)
        .map(|k| {
            let b = t.block_at(k as i64).expect("every slot has a block");
            let parent = t.parent(b).expect("non-genesis");
            let prescribed_parent = t.obedient_parent(k);
            let prescribed_vote = t.obedient_vote(k, rho_a);
            SlotActions {
                phi: t.parent_offset(k, parent),
                prescribed_phi: t.parent_offset(k, prescribed_parent),
                nu: t.votes()[k].iter().map(|&v| t.vote_offset(k, v)).collect(),
                prescribed_nu: t.vote_offset(k, prescribed_vote),
                chi: outcomes.iter().filter(|o| o.canonical[b]).fold(0.0, |c, o| c + o.weight),
            }
        })
        .collect();
    ActionProfile { slots }
}
