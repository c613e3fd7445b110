//! Stake distribution of a Byzantine validator whose activity on a branch
//! is a random walk: the inactivity score is approximately Gaussian, its
//! time integral drives `ln(stake)`, so stake is log-normal, censored at the
//! ejection threshold and at the cap.

use statrs::function::erf::erf;

use super::{LeakError, StakeCurve, Behavior, EJECTION_STAKE, PENALTY_QUOTIENT, STAKE_CAP};

/// Scale of the Brownian approximation of the score walk.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum VarianceConvention {
    /// Score variance `D t`, integrated variance `D t^3 / 3`: matches
    /// discrete walks of alternating activity.
    #[default]
    RandomWalk,
    /// Score variance `2 D t`, integrated variance `2 D t^3 / 3`.
    AsPublished,
}

impl VarianceConvention {
    fn factor(self) -> f64 {
        match self {
            VarianceConvention::RandomWalk => 1.0,
            VarianceConvention::AsPublished => 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CensoredStakeDistribution {
    pub p0: f64,
    /// `25 p0 (1 - p0)`.
    pub d: f64,
    /// Mean score drift per epoch.
    pub v: f64,
    pub a: f64,
    pub b: f64,
    pub convention: VarianceConvention,
}

impl CensoredStakeDistribution {
    pub fn new(p0: f64) -> Result<Self, LeakError> {
        Self::with_convention(p0, VarianceConvention::default())
    }

    pub fn with_convention(p0: f64, convention: VarianceConvention) -> Result<Self, LeakError> {
        if !(p0 > 0.0 && p0 < 1.0) {
            return Err(LeakError::DomainError("p0 must lie in (0, 1)".into()));
        }
        Ok(Self {
            p0,
            d: 25.0 * p0 * (1.0 - p0),
            v: 1.5,
            a: EJECTION_STAKE,
            b: STAKE_CAP,
            convention,
        })
    }

    fn check_t(t: f64) -> Result<(), LeakError> {
        if t > 0.0 && t.is_finite() {
            Ok(())
        } else {
            Err(LeakError::DomainError("t must be positive".into()))
        }
    }

    /// Gaussian density of the inactivity score at epoch `t`.
    pub fn score_density(&self, i: f64, t: f64) -> Result<f64, LeakError> {
        Self::check_t(t)?;
        let var = self.convention.factor() * self.d * t;
        let z = i - self.v * t;
        Ok((-z * z / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt())
    }

    /// Standard deviation of the integrated score.
    fn integrated_sd(&self, t: f64) -> f64 {
        (self.convention.factor() * self.d * t * t * t / 3.0).sqrt()
    }

    fn z(&self, s: f64, t: f64) -> f64 {
        (PENALTY_QUOTIENT * (s / STAKE_CAP).ln() + self.v * t * t / 2.0) / self.integrated_sd(t)
    }

    /// Uncensored log-normal CDF of stake.
    pub fn stake_cdf(&self, s: f64, t: f64) -> Result<f64, LeakError> {
        Self::check_t(t)?;
        if s <= 0.0 {
            return Err(LeakError::DomainError("stake must be positive".into()));
        }
        Ok(0.5 + 0.5 * erf(self.z(s, t) / std::f64::consts::SQRT_2))
    }

    pub fn stake_pdf(&self, s: f64, t: f64) -> Result<f64, LeakError> {
        Self::check_t(t)?;
        if s <= 0.0 {
            return Err(LeakError::DomainError("stake must be positive".into()));
        }
        let z = self.z(s, t);
        let sd = self.integrated_sd(t);
        Ok(PENALTY_QUOTIENT / (s * sd * (2.0 * std::f64::consts::PI).sqrt()) * (-z * z / 2.0).exp())
    }

    /// CDF with the ejection mass at 0 and the cap mass at `b`.
    pub fn censored_cdf(&self, x: f64, t: f64) -> Result<f64, LeakError> {
        Self::check_t(t)?;
        let fa = self.stake_cdf(self.a, t)?;
        if x < self.a {
            return Ok(fa);
        }
        if x >= self.b {
            return Ok(1.0);
        }
        self.stake_cdf(x, t)
    }

    /// Probability that a Byzantine validator's stake lies below
    /// `2 beta0 / (1 - beta0)` times the semi-active curve, i.e. that the
    /// Byzantine share stays under one third.
    pub fn prob_beta_exceeds_third(&self, beta0: f64, t: f64) -> Result<f64, LeakError> {
        if !(0.0..1.0).contains(&beta0) {
            return Err(LeakError::DomainError("beta0 must lie in [0, 1)".into()));
        }
        let s_b = StakeCurve::new(Behavior::SemiActive).raw(t);
        self.censored_cdf(2.0 * beta0 / (1.0 - beta0) * s_b, t)
    }
}

pub fn score_density(i: f64, t: f64, p0: f64) -> Result<f64, LeakError> {
    CensoredStakeDistribution::new(p0)?.score_density(i, t)
}
