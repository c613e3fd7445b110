//! Chain data model: digests, validators, blocks, attestations, checkpoints
//! and the per-validator block tree.

mod encoding;
mod store;
mod tree;

use std::fmt;

pub use encoding::{hash_bytes, hash_digest_u64, hash_digest_u64_u64, Encoder};
pub use store::{BlockStore, NodeId, SharedStore};
pub use tree::{AttestationPool, BlockTree, InsertOutcome, PoolEntry};

pub type Slot = u64;
pub type Epoch = u64;

pub const SLOTS_PER_EPOCH: u64 = 32;
/// Stake cap in ETH.
pub const MAX_EFFECTIVE_BALANCE: f64 = 32.0;

pub fn epoch_of(slot: Slot) -> Epoch {
    slot / SLOTS_PER_EPOCH
}

pub fn epoch_start(epoch: Epoch) -> Slot {
    epoch * SLOTS_PER_EPOCH
}

/// Position of a slot inside its epoch.
pub fn slot_in_epoch(slot: Slot) -> u64 {
    slot % SLOTS_PER_EPOCH
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("parent {0} of block is unknown")]
    UnknownParent(Digest),
    #[error("block {0} already present")]
    DuplicateBlock(Digest),
    #[error("block digest does not match its encoding")]
    InvalidDigest,
    #[error("block slot {slot} is not above parent slot {parent_slot}")]
    InvalidSlot { slot: Slot, parent_slot: Slot },
    #[error("attester {0} is not in the registry")]
    UnknownAttester(ValidatorId),
    #[error("block {0} is unknown")]
    UnknownBlock(Digest),
}

/// Opaque 32-byte SHA-256 digest. Ordering is unsigned lexicographic.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub const ZERO: Digest = Digest([0; 32]);

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// First eight bytes read as a little-endian integer.
    pub fn low_u64(&self) -> u64 {
        let mut b = [0u8; 8];
        b.copy_from_slice(&self.0[..8]);
        u64::from_le_bytes(b)
    }

    pub fn xor(&self, other: &Digest) -> Digest {
        let mut out = [0u8; 32];
        for (o, (a, b)) in out.iter_mut().zip(self.0.iter().zip(other.0.iter())) {
            *o = a ^ b;
        }
        Digest(out)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", &self.to_hex()[..12])
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_hex())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ValidatorId(pub u32);

impl ValidatorId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ValidatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidatorRecord {
    pub id: ValidatorId,
    pub stake: f64,
    pub effective_balance: f64,
    pub inactivity_score: u64,
    pub active: bool,
}

impl ValidatorRecord {
    pub fn new(id: ValidatorId, stake: f64) -> Self {
        Self {
            id,
            stake,
            effective_balance: stake.min(MAX_EFFECTIVE_BALANCE),
            inactivity_score: 0,
            active: true,
        }
    }

    pub fn set_stake(&mut self, stake: f64) {
        self.stake = stake.max(0.0);
        self.effective_balance = self.stake.min(MAX_EFFECTIVE_BALANCE);
    }

    /// Leak ejection: zero stake and leave the validator set.
    pub fn eject(&mut self) {
        self.set_stake(0.0);
        self.active = false;
    }

    /// Weight this validator carries in votes and proposer sampling.
    pub fn weight(&self) -> f64 {
        if self.active {
            self.effective_balance
        } else {
            0.0
        }
    }
}

/// Dense validator set indexed by `ValidatorId`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Registry {
    records: Vec<ValidatorRecord>,
}

impl Registry {
    pub fn uniform(n: usize, stake: f64) -> Self {
        Self {
            records: (0..n)
                .map(|i| ValidatorRecord::new(ValidatorId(i as u32), stake))
                .collect(),
        }
    }

    pub fn from_stakes(stakes: &[f64]) -> Self {
        Self {
            records: stakes
                .iter()
                .enumerate()
                .map(|(i, s)| ValidatorRecord::new(ValidatorId(i as u32), *s))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: ValidatorId) -> Option<&ValidatorRecord> {
        self.records.get(id.index())
    }

    pub fn get_mut(&mut self, id: ValidatorId) -> Option<&mut ValidatorRecord> {
        self.records.get_mut(id.index())
    }

    pub fn records(&self) -> &[ValidatorRecord] {
        &self.records
    }

    pub fn records_mut(&mut self) -> &mut [ValidatorRecord] {
        &mut self.records
    }

    /// Weight of `id`, zero if unknown or ejected.
    pub fn weight(&self, id: ValidatorId) -> f64 {
        self.get(id).map_or(0.0, ValidatorRecord::weight)
    }

    /// Sum of effective balances of the current validator set.
    pub fn total_active_balance(&self) -> f64 {
        self.records.iter().map(ValidatorRecord::weight).sum()
    }

    pub fn any_active(&self) -> bool {
        self.records.iter().any(|r| r.active && r.effective_balance > 0.0)
    }
}

/// `(block, epoch)` pair identifying a checkpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CheckpointRef {
    pub block: Digest,
    pub epoch: Epoch,
}

impl CheckpointRef {
    pub fn new(block: Digest, epoch: Epoch) -> Self {
        Self { block, epoch }
    }
}

/// Checkpoint together with its finality status as seen by one branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Checkpoint {
    pub block: Digest,
    pub epoch: Epoch,
    pub justified: bool,
    pub finalized: bool,
}

impl Checkpoint {
    pub fn genesis(block: Digest) -> Self {
        Self { block, epoch: 0, justified: true, finalized: true }
    }

    pub fn reference(&self) -> CheckpointRef {
        CheckpointRef::new(self.block, self.epoch)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CheckpointVote {
    pub source: CheckpointRef,
    pub target: CheckpointRef,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Attestation {
    pub attester: ValidatorId,
    pub slot: Slot,
    pub block_vote: Digest,
    pub checkpoint_vote: CheckpointVote,
}

impl Attestation {
    pub fn digest(&self) -> Digest {
        self.encode(Encoder::new()).finish()
    }

    pub(crate) fn encode(&self, e: Encoder) -> Encoder {
        let cv = &self.checkpoint_vote;
        e.u64(self.attester.0 as u64)
            .u64(self.slot)
            .digest(&self.block_vote)
            .digest(&cv.source.block)
            .u64(cv.source.epoch)
            .digest(&cv.target.block)
            .u64(cv.target.epoch)
    }

    /// Target lies in the attestation's own epoch and the source precedes it.
    pub fn is_well_formed(&self) -> bool {
        let cv = &self.checkpoint_vote;
        cv.source.epoch < cv.target.epoch && cv.target.epoch == epoch_of(self.slot)
    }

    pub fn target_epoch(&self) -> Epoch {
        self.checkpoint_vote.target.epoch
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub hash: Digest,
    pub slot: Slot,
    pub parent: Digest,
    pub proposer: ValidatorId,
    pub randao_reveal: Digest,
    pub attestations: Vec<Attestation>,
    pub fees: f64,
}

impl Block {
    pub fn new(
        slot: Slot,
        parent: Digest,
        proposer: ValidatorId,
        randao_reveal: Digest,
        attestations: Vec<Attestation>,
        fees: f64,
    ) -> Self {
        let mut b = Self {
            hash: Digest::ZERO,
            slot,
            parent,
            proposer,
            randao_reveal,
            attestations,
            fees,
        };
        b.hash = b.compute_hash();
        b
    }

    /// Slot-0 root block. Its parent field is the zero digest.
    pub fn genesis() -> Self {
        Self::new(0, Digest::ZERO, ValidatorId(0), Digest::ZERO, Vec::new(), 0.0)
    }

    pub fn compute_hash(&self) -> Digest {
        let mut e = Encoder::new()
            .u64(self.slot)
            .digest(&self.parent)
            .u64(self.proposer.0 as u64)
            .digest(&self.randao_reveal)
            .len(self.attestations.len());
        for a in &self.attestations {
            e = a.encode(e);
        }
        e.f64(self.fees).finish()
    }

    pub fn epoch(&self) -> Epoch {
        epoch_of(self.slot)
    }
}

/// Deterministic stand-in for the proposer's signature over its epoch.
pub fn randao_reveal(proposer: ValidatorId, epoch: Epoch) -> Digest {
    Encoder::new().u64(proposer.0 as u64).u64(epoch).finish()
}
