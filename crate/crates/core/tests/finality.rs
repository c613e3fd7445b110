use std::collections::BTreeSet;

use ethpos_core::chain::{Attestation, Block, BlockTree, CheckpointRef, CheckpointVote, Digest, Registry, ValidatorId};
use ethpos_core::finality::{count_votes, justification_finalization, FinalityState};
use proptest::prelude::*;

const N: u32 = 3;
const LAST_EPOCH: u64 = 6;

/// Epoch-level model: which checkpoints are justified and the latest
/// finalized epoch, given the links visible at each boundary.
struct Oracle {
    justified: BTreeSet<u64>,
    finalized: u64,
}

impl Oracle {
    fn boundary(&mut self, e: u64, link: impl Fn(u64, u64) -> bool) {
        for t in [e.saturating_sub(2), e - 1] {
            if t == 0 || self.justified.contains(&t) {
                continue;
            }
            if self.justified.iter().any(|&s| s < t && link(s, t)) {
                self.justified.insert(t);
            }
        }
        let j = |x: Option<u64>| x.is_some_and(|x| self.justified.contains(&x));
        let l = |x: Option<u64>, y: Option<u64>| matches!((x, y), (Some(x), Some(y)) if link(x, y));
        let cp = |k: u64| e.checked_sub(k);
        let (a, b, c, d) = (cp(4), cp(3), cp(2), cp(1));
        let mut fin = Vec::new();
        if j(a) && j(b) && l(a, c) {
            fin.push(a);
        }
        if (j(b) && l(b, c)) || (j(b) && j(c) && l(b, d)) {
            fin.push(b);
        }
        if j(c) && l(c, d) {
            fin.push(c);
        }
        for x in fin.into_iter().flatten() {
            self.finalized = self.finalized.max(x);
        }
    }
}

/// A link `source -> target` with `voters` votes, included in the carrier
/// block of epoch `target + late`.
#[derive(Clone, Debug)]
struct Link {
    source: u64,
    target: u64,
    voters: u32,
    late: u64,
}

fn links() -> impl Strategy<Value = Vec<Link>> {
    prop::collection::vec((0u64..LAST_EPOCH, 1u64..LAST_EPOCH, 1u32..=N, 0u64..2), 0..16).prop_map(|v| {
        v.into_iter()
            .filter(|&(s, t, _, _)| s < t)
            .map(|(source, target, voters, late)| Link { source, target, voters, late })
            .collect()
    })
}

/// One checkpoint block per epoch at its first slot and a carrier block two
/// slots later holding the scheduled links. Returns the tree and the last
/// block before each epoch's first slot.
fn chain(links: &[Link]) -> (BlockTree, Vec<Digest>, Vec<Digest>) {
    let g = Block::genesis();
    let mut t = BlockTree::new(g.clone(), N as usize);
    let mut checkpoints = vec![g.hash];
    let mut heads = vec![Digest::ZERO];
    let mut tip = g.hash;
    for e in 0..=LAST_EPOCH {
        if e > 0 {
            heads.push(tip);
            let c = Block::new(32 * e, tip, ValidatorId(0), Digest::ZERO, vec![], 0.0);
            t.insert_block(c.clone()).unwrap();
            checkpoints.push(c.hash);
            tip = c.hash;
        }
        let mut atts = Vec::new();
        for l in links.iter().filter(|l| l.target + l.late == e) {
            let cv = CheckpointVote {
                source: CheckpointRef::new(checkpoints[l.source as usize], l.source),
                target: CheckpointRef::new(checkpoints[l.target as usize], l.target),
            };
            for v in 0..l.voters {
                atts.push(Attestation { attester: ValidatorId(v), slot: 32 * l.target + 1, block_vote: cv.target.block, checkpoint_vote: cv });
            }
        }
        let carrier = Block::new(32 * e + 2, tip, ValidatorId(1), Digest::ZERO, atts, 0.0);
        t.insert_block(carrier.clone()).unwrap();
        tip = carrier.hash;
    }
    (t, checkpoints, heads)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_epoch_level_rules(links in links()) {
        let (tree, cps, heads) = chain(&links);
        let reg = Registry::uniform(N as usize, 1.0);
        let mut state = FinalityState::genesis(cps[0]);
        let mut oracle = Oracle { justified: BTreeSet::from([0]), finalized: 0 };
        for e in 1..=LAST_EPOCH {
            // Links visible at boundary e: included in epochs before e with a
            // supermajority (all three voters; duplicates count once).
            let visible = |s: u64, t: u64| {
                let voters: u32 = links
                    .iter()
                    .filter(|l| l.source == s && l.target == t && l.target + l.late < e)
                    .map(|l| l.voters)
                    .max()
                    .unwrap_or(0);
                3 * voters >= 2 * N
            };
            oracle.boundary(e, visible);
            state = justification_finalization(&tree, &heads[e as usize], &state, &reg, e).unwrap();
            let got: BTreeSet<u64> = state.justified.iter().map(|c| c.epoch).collect();
            prop_assert_eq!(&got, &oracle.justified, "boundary {}", e);
            prop_assert_eq!(state.last_finalized.epoch, oracle.finalized, "boundary {}", e);
            prop_assert_eq!(state.last_finalized.block, cps[oracle.finalized as usize]);
            prop_assert!(state.last_finalized.epoch <= state.last_justified.epoch);
        }
    }
}

fn run(links: &[Link]) -> FinalityState {
    let (tree, cps, heads) = chain(links);
    let reg = Registry::uniform(N as usize, 1.0);
    let mut state = FinalityState::genesis(cps[0]);
    for e in 1..=LAST_EPOCH {
        state = justification_finalization(&tree, &heads[e as usize], &state, &reg, e).unwrap();
    }
    state
}

fn full(source: u64, target: u64) -> Link {
    Link { source, target, voters: N, late: 0 }
}

#[test]
fn consecutive_links_finalize_the_source() {
    let s = run(&[full(0, 1), full(1, 2), full(2, 3)]);
    assert_eq!(s.last_justified.epoch, 3);
    assert_eq!(s.last_finalized.epoch, 2);
}

#[test]
fn skip_link_over_justified_middle_finalizes() {
    // 1 and 2 justified, 1 -> 3 finalizes 1 (second case of B).
    let s = run(&[full(0, 1), full(0, 2), full(1, 3)]);
    assert_eq!(s.last_finalized.epoch, 1);
}

#[test]
fn two_thirds_minus_one_does_not_justify() {
    let s = run(&[Link { source: 0, target: 1, voters: 1, late: 0 }]);
    assert_eq!(s.last_justified.epoch, 0);
}

#[test]
fn late_inclusion_still_justifies_previous_target() {
    let s = run(&[Link { late: 1, ..full(0, 1) }]);
    assert_eq!(s.last_justified.epoch, 1);
    assert!(s.justified.iter().any(|c| c.epoch == 1));
}

#[test]
fn votes_are_counted_per_validator() {
    let links = [full(0, 1), Link { late: 1, ..full(0, 1) }];
    let (tree, cps, _) = chain(&links);
    let reg = Registry::uniform(N as usize, 1.0);
    let tip = tree.store().read().hash(tree.leaves()[0]);
    let count = count_votes(&tree, &tip, &CheckpointRef::new(cps[0], 0), &CheckpointRef::new(cps[1], 1), &reg).unwrap();
    assert_eq!(count, N as f64);
}
