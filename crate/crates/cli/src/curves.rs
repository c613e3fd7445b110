//! Curves as `t,value` rows.

use std::io::Write;

use anyhow::Result;
use clap::ValueEnum;
use ethpos_core::leak::{honest_active_ratio, stake_curve, Behavior, CensoredStakeDistribution};
use ethpos_core::netsim::{ConfigError, ConfigMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Curve {
    /// Honest active share on one branch when the other honest validators are inactive.
    HonestActiveRatio,
    StakeInactive,
    StakeSemiActive,
    /// Censored stake CDF at the one-third threshold, see
    /// `CensoredStakeDistribution::prob_beta_exceeds_third`.
    ProbBetaExceedsThird,
}

pub struct Params {
    pub p0: f64,
    pub beta0: f64,
    pub t_max: u64,
    pub step: u64,
}

impl Params {
    pub fn from_map(m: &ConfigMap) -> Result<Self, ConfigError> {
        m.check_keys(&["p0", "beta0", "t_max", "step"])?;
        let p = Self {
            p0: m.parse_or("p0", 0.5)?,
            beta0: m.parse_or("beta0", 1.0 / 3.0)?,
            t_max: m.parse_or("t_max", 8000)?,
            step: m.parse_or("step", 10)?,
        };
        if p.step == 0 {
            return Err(ConfigError::Invalid("step must be positive".into()));
        }
        Ok(p)
    }
}

pub fn emit<W: Write>(which: Curve, p: &Params, w: &mut csv::Writer<W>) -> Result<()> {
    w.write_record(["t", "value"])?;
    let dist = CensoredStakeDistribution::new(p.p0)?;
    for t in (0..=p.t_max).step_by(p.step as usize) {
        let tf = t as f64;
        let v = match which {
            Curve::HonestActiveRatio => honest_active_ratio(p.p0, tf)?,
            Curve::StakeInactive => stake_curve(Behavior::Inactive, tf),
            Curve::StakeSemiActive => stake_curve(Behavior::SemiActive, tf),
            Curve::ProbBetaExceedsThird if t == 0 => 1.0,
            Curve::ProbBetaExceedsThird => dist.prob_beta_exceeds_third(p.beta0, tf)?,
        };
        w.write_record([t.to_string(), format!("{v:.9}")])?;
    }
    Ok(())
}
