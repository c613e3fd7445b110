//! Per-player rows of a resolved game.

use super::{GameRun, Player};

#[derive(Clone, Debug, PartialEq)]
pub struct GameRow {
    pub slot: usize,
    pub player: Player,
    pub strategy: super::Strategy,
    /// `φ` for proposers, `ν` for attesters.
    pub action: u64,
    pub prescribed: u64,
    pub chi: f64,
    /// `None` when the payoff depends on blocks past the horizon.
    pub payoff: Option<f64>,
}

impl GameRow {
    pub const HEADER: [&'static str; 8] =
        ["slot", "role", "index", "strategy", "action", "prescribed_action", "chi", "payoff"];

    pub fn record(&self) -> Vec<String> {
        let (role, index) = match self.player {
            Player::Proposer(_) => ("proposer", 0),
            Player::Attester(i, _) => ("attester", i + 1),
        };
        vec![
            self.slot.to_string(),
            role.to_string(),
            index.to_string(),
            self.strategy.to_string(),
            self.action.to_string(),
            self.prescribed.to_string(),
            format!("{}", self.chi),
            self.payoff.map_or(String::new(), |p| format!("{p:.9}")),
        ]
    }
}

impl GameRun {
    /// One row per proposer and attester, slot by slot.
    pub fn rows(&self) -> Vec<GameRow> {
        let mut out = Vec::new();
        for (k, s) in self.actions.slots.iter().enumerate() {
            let p = Player::Proposer(k);
            out.push(GameRow {
                slot: k,
                player: p,
                strategy: self.profile.get(p),
                action: s.phi,
                prescribed: s.prescribed_phi,
                chi: s.chi,
                payoff: self.payoff(p).ok(),
            });
            for (i, &nu) in s.nu.iter().enumerate() {
                let p = Player::Attester(i, k);
                out.push(GameRow {
                    slot: k,
                    player: p,
                    strategy: self.profile.get(p),
                    action: nu,
                    prescribed: s.prescribed_nu,
                    chi: s.chi,
                    payoff: self.payoff(p).ok(),
                });
            }
        }
        out
    }
}
