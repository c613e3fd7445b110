//! Inactivity-leak dynamics: score and penalty recursions, closed-form stake
//! curves, active-ratio curves, time-to-refinalize solvers and the region
//! where Byzantine stake can exceed one third.

mod accounting;
mod distribution;

pub use accounting::{
    ejection_epoch_accounting, refinalize_epoch_accounting, BalanceAccount, EFFECTIVE_EJECTION_BALANCE,
};
pub use distribution::{score_density, CensoredStakeDistribution, VarianceConvention};

/// Stake at or below which a validator is ejected (ETH).
pub const EJECTION_STAKE: f64 = 16.75;
/// Stake cap (ETH).
pub const STAKE_CAP: f64 = 32.0;
/// Epochs without finalization before the leak starts.
pub const LEAK_DELAY_EPOCHS: u64 = 4;
pub const SCORE_BIAS: u64 = 4;
pub const SCORE_RECOVERY_RATE: u64 = 16;
/// `2^26`: score times this divisor gives the per-epoch penalty fraction.
pub const PENALTY_QUOTIENT: f64 = 67_108_864.0;
/// Ejection epoch of an always-inactive validator.
pub const INACTIVE_EJECTION_EPOCH: f64 = 4685.0;
/// Ejection epoch of a validator active every other epoch.
pub const SEMI_ACTIVE_EJECTION_EPOCH: f64 = 7652.0;

const TWO_POW_25: f64 = 33_554_432.0;
const TWO_POW_28: f64 = 268_435_456.0;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum LeakError {
    #[error("argument out of domain: {0}")]
    DomainError(String),
}

fn domain(cond: bool, what: &str) -> Result<(), LeakError> {
    if cond {
        Ok(())
    } else {
        Err(LeakError::DomainError(what.to_string()))
    }
}

/// One epoch of the inactivity score: `+4` when inactive, `-1` (floored)
/// when active, and an extra `-16` (floored) outside the leak.
pub fn step_inactivity(score: u64, active: bool, in_leak: bool) -> u64 {
    let s = if active { score.saturating_sub(1) } else { score + SCORE_BIAS };
    if in_leak {
        s
    } else {
        s.saturating_sub(SCORE_RECOVERY_RATE)
    }
}

/// `stake - score * stake / 2^26`.
pub fn apply_penalty(stake: f64, score: u64) -> f64 {
    stake - score as f64 * stake / PENALTY_QUOTIENT
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Behavior {
    Active,
    SemiActive,
    Inactive,
}

impl Behavior {
    /// Activity in leak epoch `t` (semi-active starts active).
    pub fn active_at(self, t: u64) -> bool {
        match self {
            Behavior::Active => true,
            Behavior::Inactive => false,
            Behavior::SemiActive => t % 2 == 0,
        }
    }

    pub fn ejection_epoch(self) -> f64 {
        match self {
            Behavior::Active => f64::INFINITY,
            Behavior::SemiActive => SEMI_ACTIVE_EJECTION_EPOCH,
            Behavior::Inactive => INACTIVE_EJECTION_EPOCH,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StakeCurve {
    pub behavior: Behavior,
    pub s0: f64,
}

impl StakeCurve {
    pub fn new(behavior: Behavior) -> Self {
        Self { behavior, s0: STAKE_CAP }
    }

    /// Continuous stake before ejection is applied.
    pub fn raw(&self, t: f64) -> f64 {
        match self.behavior {
            Behavior::Active => self.s0,
            Behavior::Inactive => self.s0 * (-t * t / TWO_POW_25).exp(),
            Behavior::SemiActive => self.s0 * (-3.0 * t * t / TWO_POW_28).exp(),
        }
    }

    /// Stake at leak epoch `t`, zero from the ejection epoch on.
    pub fn at(&self, t: f64) -> f64 {
        if t >= self.behavior.ejection_epoch() {
            0.0
        } else {
            self.raw(t)
        }
    }
}

pub fn stake_curve(behavior: Behavior, t: f64) -> f64 {
    StakeCurve::new(behavior).at(t)
}

/// Leak bookkeeping for a set of validators under the literal recursion.
#[derive(Clone, Debug, PartialEq)]
pub struct LeakState {
    pub epochs_without_finalization: u64,
    pub stakes: Vec<f64>,
    pub scores: Vec<u64>,
}

impl LeakState {
    pub fn new(n: usize) -> Self {
        Self { epochs_without_finalization: 0, stakes: vec![STAKE_CAP; n], scores: vec![0; n] }
    }

    pub fn leak_active(&self) -> bool {
        self.epochs_without_finalization >= LEAK_DELAY_EPOCHS
    }

    /// One epoch: penalty with the previous score, then the score update.
    /// Ejected validators (stake zero) stay at zero.
    pub fn advance(&mut self, active: &[bool], finalized: bool) {
        let in_leak = self.leak_active();
        for ((s, i), &a) in self.stakes.iter_mut().zip(self.scores.iter_mut()).zip(active) {
            if *s == 0.0 {
                continue;
            }
            *s = apply_penalty(*s, *i);
            *i = step_inactivity(*i, a, in_leak);
            if *s <= EJECTION_STAKE {
                *s = 0.0;
            }
        }
        self.epochs_without_finalization = if finalized { 0 } else { self.epochs_without_finalization + 1 };
    }
}

/// First leak epoch at which the literal recursion (penalty then score
/// update, starting from score 0) drops to the ejection threshold.
pub fn ejection_epoch_literal(behavior: Behavior) -> Option<u64> {
    let (mut stake, mut score) = (STAKE_CAP, 0u64);
    for t in 0..1_000_000u64 {
        if stake <= EJECTION_STAKE {
            return Some(t);
        }
        stake = apply_penalty(stake, score);
        score = step_inactivity(score, behavior.active_at(t), true);
    }
    None
}

/// `p0 / (p0 + (1 - p0) e^{-t^2/2^25})`, jumping to 1 at the inactive
/// ejection epoch.
pub fn honest_active_ratio(p0: f64, t: f64) -> Result<f64, LeakError> {
    domain(p0 > 0.0 && p0 < 1.0, "p0 must lie in (0, 1)")?;
    domain(t >= 0.0, "t must be non-negative")?;
    let inactive = stake_curve(Behavior::Inactive, t) / STAKE_CAP;
    Ok(p0 / (p0 + (1.0 - p0) * inactive))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefinalizeMode {
    HonestOnly,
    /// Byzantine validators active on both branches.
    Slashing,
}

/// Closed-form epochs until the branch regains two thirds:
/// `min(sqrt(2^25 [ln(2(1-p0)) - ln(p0 + b/(1-b))]), 4685)`.
/// Returns 0 when the branch already holds two thirds.
pub fn time_to_refinalize(p0: f64, beta0: f64, mode: RefinalizeMode) -> Result<f64, LeakError> {
    domain(p0 > 0.0 && p0 < 1.0, "p0 must lie in (0, 1)")?;
    domain((0.0..1.0).contains(&beta0), "beta0 must lie in [0, 1)")?;
    let b = match mode {
        RefinalizeMode::HonestOnly => 0.0,
        RefinalizeMode::Slashing => beta0,
    };
    let gap = (2.0 * (1.0 - p0)).ln() - (p0 + b / (1.0 - b)).ln();
    if gap <= 0.0 {
        return Ok(0.0);
    }
    Ok((TWO_POW_25 * gap).sqrt().min(INACTIVE_EJECTION_EPOCH))
}

/// Active ratio on one branch when Byzantine validators alternate branches
/// every epoch.
pub fn semi_active_ratio(p0: f64, beta0: f64, t: f64) -> Result<f64, LeakError> {
    domain(p0 > 0.0 && p0 < 1.0, "p0 must lie in (0, 1)")?;
    domain((0.0..1.0).contains(&beta0), "beta0 must lie in [0, 1)")?;
    domain(t >= 0.0, "t must be non-negative")?;
    let semi = stake_curve(Behavior::SemiActive, t) / STAKE_CAP;
    let inactive = stake_curve(Behavior::Inactive, t) / STAKE_CAP;
    let active = p0 * (1.0 - beta0) + beta0 * semi;
    Ok(active / (active + (1.0 - p0) * (1.0 - beta0) * inactive))
}

/// Smallest `t` with `semi_active_ratio >= 2/3`, by bisection to 1e-3
/// epoch, capped at the inactive ejection epoch.
pub fn time_to_refinalize_semiactive(p0: f64, beta0: f64) -> Result<f64, LeakError> {
    let f = |t: f64| semi_active_ratio(p0, beta0, t).map(|r| r >= 2.0 / 3.0);
    if f(0.0)? {
        return Ok(0.0);
    }
    let cap = INACTIVE_EJECTION_EPOCH;
    // Just below the cap both curves are continuous; no root there means
    // the branch waits for the ejection.
    let below = cap - 1e-9;
    if !f(below)? {
        return Ok(cap);
    }
    let (mut lo, mut hi) = (0.0, below);
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `e^{-3 * 4685^2 / 2^28}`: relative semi-active stake when inactive
/// validators are ejected.
pub fn semi_active_factor_at_ejection() -> f64 {
    StakeCurve::new(Behavior::SemiActive).raw(INACTIVE_EJECTION_EPOCH) / STAKE_CAP
}

/// Largest Byzantine share reachable on a branch.
pub fn beta_max(p0: f64, beta0: f64) -> Result<f64, LeakError> {
    domain(p0 > 0.0 && p0 < 1.0, "p0 must lie in (0, 1)")?;
    domain((0.0..1.0).contains(&beta0), "beta0 must lie in [0, 1)")?;
    let e = semi_active_factor_at_ejection();
    Ok(beta0 * e / (p0 * (1.0 - beta0) + beta0 * e))
}

pub fn beta_exceeds_third(p0: f64, beta0: f64) -> Result<bool, LeakError> {
    Ok(beta_max(p0, beta0)? >= 1.0 / 3.0)
}

/// Smallest `beta0` with `beta_max >= 1/3`: `p0 / (p0 + 2E)`.
pub fn beta_threshold(p0: f64) -> Result<f64, LeakError> {
    domain(p0 > 0.0 && p0 < 1.0, "p0 must lie in (0, 1)")?;
    Ok(p0 / (p0 + 2.0 * semi_active_factor_at_ejection()))
}

/// Honest split for which a bouncing attack can be set up:
/// `(2 - 3b) / (3(1 - b)) < p0 < 2 / (3(1 - b))`.
pub fn bouncing_window(beta0: f64, p0: f64) -> bool {
    let lo = (2.0 - 3.0 * beta0) / (3.0 * (1.0 - beta0));
    let hi = 2.0 / (3.0 * (1.0 - beta0));
    lo < p0 && p0 < hi
}
