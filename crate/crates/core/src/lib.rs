//! Proof-of-stake consensus simulator and analysis toolkit.
//!
//! The crate covers the chain data model, RANDAO-based role assignment,
//! LMD-GHOST fork choice, Casper FFG finality, the honest validator state
//! machine, a deterministic network simulator with Byzantine strategies,
//! inactivity-leak analytics and the proposer-boost incentive game.

pub mod adversary;
pub mod chain;
pub mod finality;
pub mod fork_choice;
pub mod game;
pub mod leak;
pub mod netsim;
pub mod randao;
pub mod validator;

pub use chain::{
    Attestation, Block, BlockTree, ChainError, Checkpoint, CheckpointRef, CheckpointVote, Digest, Epoch, Registry,
    Slot, ValidatorId, ValidatorRecord,
};
pub use finality::FinalityState;
pub use validator::{Message, SimTime, ValidatorView};
