use std::collections::HashMap;

use ethpos_core::chain::{Attestation, Block, BlockTree, CheckpointRef, CheckpointVote, Digest, Registry, ValidatorId};
use ethpos_core::fork_choice::{get_head_block, get_head_with_boost, weight, weights};
use proptest::prelude::*;

struct Fixture {
    tree: BlockTree,
    blocks: Vec<Block>,
    /// Expected latest message per validator: index into `blocks`.
    latest: HashMap<u32, usize>,
    registry: Registry,
}

fn vote(v: u32, slot: u64, b: Digest) -> Attestation {
    let g = CheckpointRef::new(Digest::ZERO, 0);
    Attestation { attester: ValidatorId(v), slot, block_vote: b, checkpoint_vote: CheckpointVote { source: g, target: g } }
}

/// `shape[i] = (parent pick, slot gap)`, `votes[k] = (validator, block pick, slot)`.
fn build(shape: &[(usize, u64)], votes: &[(u32, usize, u64)], stakes: &[f64]) -> Fixture {
    let g = Block::genesis();
    let mut tree = BlockTree::new(g.clone(), stakes.len());
    let mut blocks = vec![g];
    for (i, &(pick, gap)) in shape.iter().enumerate() {
        let p = &blocks[pick % blocks.len()];
        let b = Block::new(p.slot + 1 + gap, p.hash, ValidatorId(i as u32), Digest::ZERO, vec![], 0.0);
        tree.insert_block(b.clone()).unwrap();
        blocks.push(b);
    }
    let mut latest: HashMap<u32, (u64, usize)> = HashMap::new();
    for &(v, pick, slot) in votes {
        let v = v % stakes.len() as u32;
        let b = pick % blocks.len();
        tree.record_attestation(vote(v, slot, blocks[b].hash)).unwrap();
        match latest.get(&v) {
            Some(&(s, _)) if s >= slot => {}
            _ => {
                latest.insert(v, (slot, b));
            }
        }
    }
    Fixture {
        tree,
        blocks,
        latest: latest.into_iter().map(|(v, (_, b))| (v, b)).collect(),
        registry: Registry::from_stakes(stakes),
    }
}

impl Fixture {
    fn is_ancestor(&self, a: usize, mut b: usize) -> bool {
        loop {
            if a == b {
                return true;
            }
            if b == 0 {
                return false;
            }
            let p = self.blocks[b].parent;
            b = self.blocks.iter().position(|x| x.hash == p).unwrap();
        }
    }

    fn oracle_weight(&self, b: usize, boost: Option<(usize, f64)>) -> f64 {
        let mut w: f64 = self
            .latest
            .iter()
            .filter(|(_, &x)| self.is_ancestor(b, x))
            .map(|(&v, _)| self.registry.weight(ValidatorId(v)))
            .sum();
        if let Some((x, r)) = boost {
            if self.is_ancestor(b, x) {
                w += r;
            }
        }
        w
    }

    fn oracle_head(&self, boost: Option<(usize, f64)>) -> Digest {
        let mut cur = 0;
        loop {
            let kids: Vec<usize> =
                (1..self.blocks.len()).filter(|&c| self.blocks[c].parent == self.blocks[cur].hash).collect();
            let Some(&best) = kids.iter().max_by(|&&x, &&y| {
                self.oracle_weight(x, boost)
                    .total_cmp(&self.oracle_weight(y, boost))
                    .then(self.blocks[x].hash.cmp(&self.blocks[y].hash))
            }) else {
                return self.blocks[cur].hash;
            };
            cur = best;
        }
    }

    fn genesis_checkpoint(&self) -> CheckpointRef {
        CheckpointRef::new(self.blocks[0].hash, 0)
    }
}

fn shape() -> impl Strategy<Value = Vec<(usize, u64)>> {
    prop::collection::vec((any::<usize>(), 0u64..3), 1..14)
}

fn votes() -> impl Strategy<Value = Vec<(u32, usize, u64)>> {
    prop::collection::vec((any::<u32>(), any::<usize>(), 0u64..6), 0..30)
}

proptest! {
    #[test]
    fn head_matches_naive_ghost(shape in shape(), votes in votes(), stakes in prop::collection::vec(1u8..4, 1..8)) {
        let stakes: Vec<f64> = stakes.into_iter().map(f64::from).collect();
        let f = build(&shape, &votes, &stakes);
        prop_assert_eq!(get_head_block(&f.tree, &f.registry, &f.genesis_checkpoint()).unwrap(), f.oracle_head(None));
    }

    #[test]
    fn boosted_head_matches_naive_ghost(shape in shape(), votes in votes(), pick in any::<usize>(), rho_a in 0.0f64..6.0) {
        let f = build(&shape, &votes, &[1.0; 5]);
        let b = pick % f.blocks.len();
        let got = get_head_with_boost(&f.tree, &f.registry, &f.genesis_checkpoint(), &f.blocks[b].hash, rho_a).unwrap();
        prop_assert_eq!(got, f.oracle_head(Some((b, rho_a))));
    }

    #[test]
    fn pool_keeps_latest_message(shape in shape(), votes in votes()) {
        let f = build(&shape, &votes, &[1.0; 6]);
        prop_assert_eq!(f.tree.pool().len(), f.latest.len());
        for (&v, &b) in &f.latest {
            prop_assert_eq!(f.tree.pool().get(ValidatorId(v)).unwrap().attestation.block_vote, f.blocks[b].hash);
        }
    }

    #[test]
    fn subtree_weights_are_monotone(shape in shape(), votes in votes()) {
        let f = build(&shape, &votes, &[1.0, 2.0, 3.0, 1.0]);
        let w = weights(&f.tree, &f.registry);
        for (i, b) in f.blocks.iter().enumerate() {
            prop_assert!((w[&b.hash] - f.oracle_weight(i, None)).abs() < 1e-9);
            prop_assert!((w[&b.hash] - weight(&f.tree, &f.registry, &b.hash).unwrap()).abs() < 1e-9);
            if i > 0 {
                prop_assert!(w[&b.parent] >= w[&b.hash]);
            }
            let kids: f64 = f.tree.children(&b.hash).iter().map(|c| w[c]).sum();
            prop_assert!(w[&b.hash] + 1e-9 >= kids);
        }
    }
}

#[test]
fn heavier_later_fork_overtakes() {
    // g - a - b and g - c; two votes on c beat one on b.
    let f = build(&[(0, 0), (1, 0), (0, 1)], &[(0, 2, 3), (1, 3, 3), (2, 3, 3)], &[1.0; 3]);
    let head = get_head_block(&f.tree, &f.registry, &f.genesis_checkpoint()).unwrap();
    assert_eq!(head, f.blocks[3].hash);
    // A boost of 2 on b turns it around.
    let head = get_head_with_boost(&f.tree, &f.registry, &f.genesis_checkpoint(), &f.blocks[2].hash, 2.0).unwrap();
    assert_eq!(head, f.blocks[2].hash);
}

#[test]
fn older_message_does_not_replace_newer() {
    let f = build(&[(0, 0), (0, 1)], &[(0, 1, 5), (0, 2, 4), (1, 2, 5), (1, 1, 5)], &[1.0; 2]);
    assert_eq!(f.tree.pool().get(ValidatorId(0)).unwrap().attestation.block_vote, f.blocks[1].hash);
    assert_eq!(f.tree.pool().get(ValidatorId(1)).unwrap().attestation.block_vote, f.blocks[2].hash);
}
