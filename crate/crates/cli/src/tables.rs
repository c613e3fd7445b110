//! Analytic tables over fixed parameter grids.

use std::io::Write;

use anyhow::Result;
use clap::ValueEnum;
use ethpos_core::adversary::log_attack_survival_probability;
use ethpos_core::leak::{beta_threshold, refinalize_epoch_accounting, time_to_refinalize, time_to_refinalize_semiactive, RefinalizeMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Table {
    /// Epochs to regain finality when Byzantine validators vote on both branches.
    Slashing,
    /// Epochs to regain finality when Byzantine validators alternate branches.
    NoSlashing,
    /// Smallest Byzantine share that can exceed one third, per honest split.
    BetaRegion,
    /// Probability that the bouncing attack lasts `k` epochs.
    Survival,
}

const P0: f64 = 0.5;
const BETAS: [f64; 5] = [0.0, 0.1, 0.15, 0.2, 0.33];

pub fn emit<W: Write>(which: Table, w: &mut csv::Writer<W>) -> Result<()> {
    match which {
        Table::Slashing => {
            w.write_record(["beta0", "epochs"])?;
            for b in BETAS {
                let t = time_to_refinalize(P0, b, RefinalizeMode::Slashing)?;
                w.write_record([b.to_string(), (t.ceil() as u64).to_string()])?;
            }
        }
        Table::NoSlashing => {
            w.write_record(["beta0", "epochs", "continuous_epochs"])?;
            for b in BETAS {
                let t = refinalize_epoch_accounting(P0, b)?;
                let c = time_to_refinalize_semiactive(P0, b)?;
                w.write_record([b.to_string(), t.to_string(), (c.ceil() as u64).to_string()])?;
            }
        }
        Table::BetaRegion => {
            w.write_record(["p0", "beta0_min"])?;
            for i in 1..20 {
                let p0 = i as f64 / 20.0;
                w.write_record([format!("{p0:.2}"), format!("{:.6}", beta_threshold(p0)?)])?;
            }
        }
        Table::Survival => {
            w.write_record(["beta", "j", "k", "probability", "log10_probability"])?;
            for beta in [0.1, 0.2, 0.3, 1.0 / 3.0] {
                for j in [4u32, 8] {
                    for k in [1u64, 10, 100, 1000, 7000] {
                        let ln = log_attack_survival_probability(beta, j, k)?;
                        w.write_record([
                            format!("{beta:.6}"),
                            j.to_string(),
                            k.to_string(),
                            format!("{:.6e}", ln.exp()),
                            format!("{:.6}", ln / std::f64::consts::LN_10),
                        ])?;
                    }
                }
            }
        }
    }
    Ok(())
}
