//! Benchmark fixtures.

use ethpos_core::chain::{Attestation, Block, BlockTree, CheckpointRef, CheckpointVote, Digest, Registry, ValidatorId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random tree of `blocks` blocks with one latest message per validator.
pub fn fork_tree(blocks: usize, validators: usize, seed: u64) -> (BlockTree, Registry, CheckpointRef) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Block::genesis();
    let mut tree = BlockTree::new(g.clone(), validators);
    let mut all = vec![g.clone()];
    for i in 0..blocks {
        // Mostly extend recent blocks so the tree stays chain-like.
        let lo = all.len().saturating_sub(8);
        let p = all[rng.gen_range(lo..all.len())].clone();
        let b = Block::new(p.slot + 1, p.hash, ValidatorId(i as u32), Digest::ZERO, vec![], 0.0);
        tree.insert_block(b.clone()).unwrap();
        all.push(b);
    }
    let g_cp = CheckpointRef::new(g.hash, 0);
    for v in 0..validators {
        let b = &all[rng.gen_range(all.len() / 2..all.len())];
        let a = Attestation {
            attester: ValidatorId(v as u32),
            slot: b.slot,
            block_vote: b.hash,
            checkpoint_vote: CheckpointVote { source: g_cp, target: g_cp },
        };
        tree.record_attestation(a).unwrap();
    }
    (tree, Registry::uniform(validators, 32.0), g_cp)
}

/// One block per slot for `epochs` epochs; every validator's checkpoint vote
/// for the previous checkpoint is included one slot after its duty slot.
/// Returns the tree, the registry and the last block before each epoch.
pub fn attested_chain(validators: usize, epochs: u64) -> (BlockTree, Registry, Vec<Digest>) {
    let g = Block::genesis();
    let mut tree = BlockTree::new(g.clone(), validators);
    let mut tip = g.hash;
    let mut cps = vec![CheckpointRef::new(g.hash, 0)];
    let mut heads = vec![g.hash];
    let mut pending = Vec::new();
    for slot in 1..32 * epochs {
        let e = slot / 32;
        if slot % 32 == 0 {
            heads.push(tip);
        }
        let b = Block::new(slot, tip, ValidatorId((slot % validators as u64) as u32), Digest::ZERO, std::mem::take(&mut pending), 0.0);
        tree.insert_block(b.clone()).unwrap();
        tip = b.hash;
        if slot % 32 == 0 {
            cps.push(CheckpointRef::new(b.hash, e));
        }
        if e > 0 {
            let per_slot = validators.div_ceil(32);
            let k = (slot % 32) as usize;
            for v in (k * per_slot)..((k + 1) * per_slot).min(validators) {
                pending.push(Attestation {
                    attester: ValidatorId(v as u32),
                    slot,
                    block_vote: tip,
                    checkpoint_vote: CheckpointVote { source: cps[e as usize - 1], target: cps[e as usize] },
                });
            }
        }
    }
    heads.push(tip);
    (tree, Registry::uniform(validators, 32.0), heads)
}
