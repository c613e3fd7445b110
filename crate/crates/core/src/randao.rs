//! RANDAO mix, epoch seeds, swap-or-not shuffling, proposer sampling and
//! committee assignment.

use std::ops::Range;

use crate::chain::{
    epoch_start, hash_digest_u64, hash_digest_u64_u64, BlockStore, BlockTree, ChainError, Digest,
    Encoder, Epoch, NodeId, Registry, Slot, ValidatorId, SLOTS_PER_EPOCH,
};

pub const SHUFFLE_ROUNDS: u64 = 90;
pub const MAX_RANDOM_BYTE: f64 = 255.0;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum RandaoError {
    #[error("index {index} out of range for {n} validators")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("no active validator with positive balance")]
    NoActiveValidators,
    #[error(transparent)]
    Chain(#[from] ChainError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Seed {
    pub digest: Digest,
    pub epoch: Epoch,
}

/// XOR of `hash(randao_reveal)` over the branch's blocks in epoch `e`.
/// Genesis carries no reveal and is skipped.
pub fn get_randao_mix(store: &BlockStore, head: NodeId, e: Epoch) -> Digest {
    let last = epoch_start(e + 1) - 1;
    let first = epoch_start(e);
    let mut mix = Digest::ZERO;
    let start = store.ancestor_at_slot(head, last);
    for id in store.branch(start) {
        if id == BlockStore::GENESIS || store.slot(id) < first {
            break;
        }
        let reveal = store.block(id).randao_reveal;
        mix = mix.xor(&Encoder::new().digest(&reveal).finish());
    }
    mix
}

/// Tree-level wrapper of [`get_randao_mix`].
pub fn randao_mix(tree: &BlockTree, head: &Digest, e: Epoch) -> Result<Digest, ChainError> {
    let id = tree.node_of(head).ok_or(ChainError::UnknownBlock(*head))?;
    Ok(get_randao_mix(&tree.store().read(), id, e))
}

pub fn seed_from_mix(e: Epoch, mix: &Digest) -> Seed {
    Seed { digest: Encoder::new().u64(e).digest(mix).finish(), epoch: e }
}

/// `seed(e) = hash(e ‖ mix(e-2))`; epochs 0 and 1 use the all-zero mix.
pub fn get_seed(store: &BlockStore, head: NodeId, e: Epoch) -> Seed {
    let mix = if e >= 2 { get_randao_mix(store, head, e - 2) } else { Digest::ZERO };
    seed_from_mix(e, &mix)
}

fn pivot(seed: &Digest, round: u64, n: usize) -> usize {
    (hash_digest_u64(seed, round).low_u64() % n as u64) as usize
}

fn swap_bit(seed: &Digest, round: u64, position: usize) -> bool {
    hash_digest_u64_u64(seed, round, position as u64).0[0] & 1 == 0
}

/// Swap-or-not position of `index` under `seed`.
pub fn compute_shuffled_index(index: usize, seed: &Digest, n: usize) -> Result<usize, RandaoError> {
    if index >= n {
        return Err(RandaoError::IndexOutOfRange { index, n });
    }
    let mut index = index;
    for round in 0..SHUFFLE_ROUNDS {
        let flip = (pivot(seed, round, n) + n - index) % n;
        let position = index.max(flip);
        if swap_bit(seed, round, position) {
            index = flip;
        }
    }
    Ok(index)
}

/// `perm[i] = compute_shuffled_index(i, seed, n)` for every `i`, hashing each
/// round's pivot and position bits once.
pub fn shuffle_permutation(seed: &Digest, n: usize) -> Vec<usize> {
    let mut cur: Vec<usize> = (0..n).collect();
    let mut bits = vec![false; n];
    for round in 0..SHUFFLE_ROUNDS {
        let p = pivot(seed, round, n.max(1));
        for (pos, bit) in bits.iter_mut().enumerate() {
            *bit = swap_bit(seed, round, pos);
        }
        for c in cur.iter_mut() {
            let flip = (p + n - *c) % n;
            if bits[(*c).max(flip)] {
                *c = flip;
            }
        }
    }
    cur
}

fn proposer_seed(seed: &Digest, slot: Slot) -> Digest {
    hash_digest_u64(seed, slot)
}

/// Stake-weighted proposer sampling: candidate `i` is accepted when
/// `effective_balance * 255 >= 32 * random_byte`.
pub fn get_proposer_index(seed: &Digest, slot: Slot, registry: &Registry) -> Result<ValidatorId, RandaoError> {
    if !registry.any_active() {
        return Err(RandaoError::NoActiveValidators);
    }
    let n = registry.len();
    let ps = proposer_seed(seed, slot);
    let mut i = 0u64;
    loop {
        let shuffled = compute_shuffled_index((i % n as u64) as usize, &ps, n)?;
        let candidate = &registry.records()[shuffled];
        let random_byte = hash_digest_u64(&ps, i).0[0] as f64;
        if candidate.active && candidate.effective_balance * MAX_RANDOM_BYTE >= 32.0 * random_byte {
            return Ok(candidate.id);
        }
        i += 1;
    }
}

/// Shuffled positions covered by `slot`'s committee.
pub fn committee_bounds(slot: Slot, n: usize) -> Range<usize> {
    let size = n.div_ceil(SLOTS_PER_EPOCH as usize);
    let k = (slot % SLOTS_PER_EPOCH) as usize;
    let start = (k * size).min(n);
    let end = ((k + 1) * size).min(n);
    start..end
}

pub fn compute_committee(seed: &Digest, slot: Slot, registry: &Registry) -> Vec<ValidatorId> {
    let n = registry.len();
    committee_bounds(slot, n)
        .map(|i| {
            let j = compute_shuffled_index(i, seed, n).expect("bounds are within n");
            registry.records()[j].id
        })
        .collect()
}

/// All roles of one epoch under one seed and registry.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochAssignments {
    pub seed: Seed,
    pub proposers: Vec<ValidatorId>,
    pub committees: Vec<Vec<ValidatorId>>,
    /// Per validator: slot offset of its committee within the epoch.
    duty: Vec<Option<u8>>,
}

impl EpochAssignments {
    pub fn compute(seed: Seed, registry: &Registry) -> Result<Self, RandaoError> {
        let n = registry.len();
        let perm = shuffle_permutation(&seed.digest, n);
        let base = epoch_start(seed.epoch);
        let mut proposers = Vec::with_capacity(SLOTS_PER_EPOCH as usize);
        let mut committees = Vec::with_capacity(SLOTS_PER_EPOCH as usize);
        let mut duty = vec![None; n];
        for k in 0..SLOTS_PER_EPOCH {
            let slot = base + k;
            proposers.push(get_proposer_index(&seed.digest, slot, registry)?);
            let members: Vec<ValidatorId> =
                committee_bounds(slot, n).map(|i| registry.records()[perm[i]].id).collect();
            for m in &members {
                duty[m.index()] = Some(k as u8);
            }
            committees.push(members);
        }
        Ok(Self { seed, proposers, committees, duty })
    }

    pub fn proposer(&self, slot: Slot) -> ValidatorId {
        self.proposers[(slot % SLOTS_PER_EPOCH) as usize]
    }

    pub fn committee(&self, slot: Slot) -> &[ValidatorId] {
        &self.committees[(slot % SLOTS_PER_EPOCH) as usize]
    }

    /// Slot of `v`'s attestation duty in this epoch.
    pub fn attester_slot(&self, v: ValidatorId) -> Option<Slot> {
        self.duty
            .get(v.index())
            .copied()
            .flatten()
            .map(|k| epoch_start(self.seed.epoch) + k as Slot)
    }
}
