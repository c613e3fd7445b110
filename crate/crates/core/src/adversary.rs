//! Byzantine strategies: dual-active and semi-active finalizers during a
//! partition, and the probabilistic bouncing attack's per-epoch step.

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::chain::{epoch_start, Digest, Epoch, Registry, Slot, ValidatorId};
use crate::leak::bouncing_window;
use crate::randao::{get_proposer_index, seed_from_mix, RandaoError};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum AdversaryError {
    #[error("strategy needs at least two branches")]
    NoFork,
    #[error("attack setup condition does not hold")]
    SetupNotSatisfied,
    #[error("argument out of domain: {0}")]
    DomainError(String),
    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),
    #[error(transparent)]
    Randao(#[from] RandaoError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum StrategyKind {
    #[default]
    Idle,
    DualActive,
    SemiActive,
    ProbBouncing,
}

impl FromStr for StrategyKind {
    type Err = AdversaryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "idle" | "none" => Ok(Self::Idle),
            "dual-active" | "dualactive" => Ok(Self::DualActive),
            "semi-active" | "semiactive" => Ok(Self::SemiActive),
            "prob-bouncing" | "probbouncing" | "bouncing" => Ok(Self::ProbBouncing),
            other => Err(AdversaryError::UnknownStrategy(other.to_string())),
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Idle => "idle",
            Self::DualActive => "dual-active",
            Self::SemiActive => "semi-active",
            Self::ProbBouncing => "prob-bouncing",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdversaryStrategy {
    pub kind: StrategyKind,
    /// Share of honest validators that receive the withheld votes before the
    /// end of the justified-view window (bouncing only).
    pub release_fraction: f64,
}

impl Default for AdversaryStrategy {
    fn default() -> Self {
        Self { kind: StrategyKind::Idle, release_fraction: 0.5 }
    }
}

/// Branches on which each Byzantine validator attests this epoch: all of
/// them.
pub fn dual_active_step(branches: usize, _epoch: Epoch) -> Result<Vec<bool>, AdversaryError> {
    if branches < 2 {
        return Err(AdversaryError::NoFork);
    }
    Ok(vec![true; branches])
}

/// Semi-active activity plan. Alternates one branch per epoch; once told to
/// finalize it stays two epochs in a row on each branch in turn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SemiActiveSchedule {
    pub finalize_from: Option<Epoch>,
}

impl SemiActiveSchedule {
    pub fn active_branch(&self, epoch: Epoch, branches: usize) -> usize {
        match self.finalize_from {
            Some(f) if epoch >= f => (((epoch - f) / 2) % branches as u64) as usize,
            _ => (epoch % branches as u64) as usize,
        }
    }
}

pub fn semi_active_step(
    schedule: &mut SemiActiveSchedule,
    branches: usize,
    epoch: Epoch,
    finalize_now: bool,
) -> Result<Vec<bool>, AdversaryError> {
    if branches < 2 {
        return Err(AdversaryError::NoFork);
    }
    if finalize_now && schedule.finalize_from.is_none() {
        schedule.finalize_from = Some(epoch);
    }
    let k = schedule.active_branch(epoch, branches);
    Ok((0..branches).map(|b| b == k).collect())
}

/// Release plan for the withheld votes of one bouncing epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BouncingDirective {
    /// First Byzantine proposer slot within the window.
    pub slot: Slot,
    pub proposer: ValidatorId,
    /// Delivery time as epoch-slot: exactly at the window's last slot.
    pub release_epoch_slot: u64,
    pub honest_fraction: f64,
}

/// Checks the setup window, then looks for a Byzantine proposer among the
/// first `j` slots of `epoch`. `None` means the attack halts.
#[allow(clippy::too_many_arguments)]
pub fn bouncing_step(
    seed: &Digest,
    epoch: Epoch,
    registry: &Registry,
    byzantine: &[bool],
    j: u64,
    beta0: f64,
    p0: f64,
    strategy: &AdversaryStrategy,
) -> Result<Option<BouncingDirective>, AdversaryError> {
    if !bouncing_window(beta0, p0) {
        return Err(AdversaryError::SetupNotSatisfied);
    }
    Ok(first_byzantine_proposer(seed, epoch, registry, byzantine, j)?.map(|(slot, proposer)| {
        BouncingDirective { slot, proposer, release_epoch_slot: j, honest_fraction: strategy.release_fraction }
    }))
}

/// First slot among the epoch's first `j` whose proposer is Byzantine.
pub fn first_byzantine_proposer(
    seed: &Digest,
    epoch: Epoch,
    registry: &Registry,
    byzantine: &[bool],
    j: u64,
) -> Result<Option<(Slot, ValidatorId)>, AdversaryError> {
    for slot in epoch_start(epoch)..epoch_start(epoch) + j {
        let p = get_proposer_index(seed, slot, registry)?;
        if byzantine.get(p.index()).copied().unwrap_or(false) {
            return Ok(Some((slot, p)));
        }
    }
    Ok(None)
}

/// `(1 - (1 - beta)^j)^k`, evaluated in log space.
pub fn attack_survival_probability(beta: f64, j: u32, k: u64) -> Result<f64, AdversaryError> {
    Ok(log_attack_survival_probability(beta, j, k)?.exp())
}

/// Natural log of [`attack_survival_probability`].
pub fn log_attack_survival_probability(beta: f64, j: u32, k: u64) -> Result<f64, AdversaryError> {
    if !(0.0..1.0).contains(&beta) {
        return Err(AdversaryError::DomainError("beta must lie in [0, 1)".into()));
    }
    if j == 0 {
        return Err(AdversaryError::DomainError("j must be at least 1".into()));
    }
    if k == 0 {
        return Ok(0.0);
    }
    let alpha_j = (j as f64 * (1.0 - beta).ln()).exp();
    Ok(k as f64 * (-alpha_j).ln_1p())
}

#[derive(Clone, Debug, PartialEq)]
pub struct BouncingStats {
    pub trials: u64,
    /// Epochs in which the attack was attempted, over all trials.
    pub attempts: u64,
    pub continuations: u64,
    /// `survived[k]`: trials still bouncing after `k + 1` epochs.
    pub survived: Vec<u64>,
}

impl BouncingStats {
    pub fn continuation_frequency(&self) -> f64 {
        self.continuations as f64 / self.attempts as f64
    }

    pub fn survival_frequency(&self, k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.survived[k - 1] as f64 / self.trials as f64
        }
    }
}

/// Monte-Carlo of the bouncing attack's continuation: each epoch draws a
/// fresh RANDAO mix, and the attack continues iff a Byzantine validator is
/// selected by `get_proposer_index` in one of the first `j` slots.
/// Byzantine validators are the last `round(beta n)` indices.
pub fn simulate_bouncing(
    n: usize,
    beta: f64,
    j: u64,
    max_epochs: usize,
    trials: u64,
    seed: u64,
) -> Result<BouncingStats, AdversaryError> {
    if n == 0 || !(0.0..1.0).contains(&beta) {
        return Err(AdversaryError::DomainError("need n > 0 and beta in [0, 1)".into()));
    }
    let registry = Registry::uniform(n, 32.0);
    let n_byz = (beta * n as f64).round() as usize;
    let byzantine: Vec<bool> = (0..n).map(|i| i >= n - n_byz).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut stats = BouncingStats { trials, attempts: 0, continuations: 0, survived: vec![0; max_epochs] };
    for _ in 0..trials {
        for (k, surv) in stats.survived.iter_mut().enumerate() {
            let mut mix = [0u8; 32];
            rng.fill_bytes(&mut mix);
            let epoch = k as Epoch + 2;
            let s = seed_from_mix(epoch, &Digest(mix));
            stats.attempts += 1;
            if first_byzantine_proposer(&s.digest, epoch, &registry, &byzantine, j)?.is_none() {
                break;
            }
            stats.continuations += 1;
            *surv += 1;
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_epochs_survive_surely() {
        assert_eq!(attack_survival_probability(0.3, 8, 0).unwrap(), 1.0);
        assert!(attack_survival_probability(1.0, 8, 1).is_err());
    }

    #[test]
    fn single_epoch_matches_closed_form() {
        let p = attack_survival_probability(0.3, 8, 1).unwrap();
        assert!((p - (1.0 - 0.7f64.powi(8))).abs() < 1e-12);
    }

    #[test]
    fn strategy_names_round_trip() {
        for k in [StrategyKind::Idle, StrategyKind::DualActive, StrategyKind::SemiActive, StrategyKind::ProbBouncing] {
            assert_eq!(k.to_string().parse::<StrategyKind>().unwrap(), k);
        }
        assert!("wild".parse::<StrategyKind>().is_err());
    }

    #[test]
    fn semi_active_alternates_then_doubles() {
        let mut s = SemiActiveSchedule::default();
        let acts: Vec<usize> = (10..14)
            .map(|e| semi_active_step(&mut s, 2, e, false).unwrap().iter().position(|&x| x).unwrap())
            .collect();
        assert_eq!(acts, vec![0, 1, 0, 1]);
        let acts: Vec<usize> = (14..20)
            .map(|e| semi_active_step(&mut s, 2, e, e == 14).unwrap().iter().position(|&x| x).unwrap())
            .collect();
        assert_eq!(acts, vec![0, 0, 1, 1, 0, 0]);
        assert_eq!(semi_active_step(&mut s, 1, 3, false), Err(AdversaryError::NoFork));
    }

    #[test]
    fn dual_active_needs_fork() {
        assert_eq!(dual_active_step(2, 5).unwrap(), vec![true, true]);
        assert_eq!(dual_active_step(1, 5), Err(AdversaryError::NoFork));
    }
}
