//! Block tree of the incentive game: one block per slot, unit-weight
//! attestations and a genesis-rooted GHOST with proposer boost.

use crate::fork_choice::accumulate_subtree_weights;

/// Slot of the genesis block. Slots `-2` and `-1` hold the pre-game
/// concurrent branch `g` and the fork-choice branch `f`.
pub const GENESIS_SLOT: i64 = -3;

const TIE_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct GameBlock {
    pub slot: i64,
    pub parent: Option<usize>,
    /// Attestation weight held before the game starts.
    pub prior_weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GameTree {
    blocks: Vec<GameBlock>,
    /// `votes[k][i]`: block attested by attester `i` of slot `k`.
    votes: Vec<Vec<usize>>,
}

impl GameTree {
    /// Genesis with the branch `f` (weight `w_f`, slot -1) and, if `w_g > 0`,
    /// the concurrent branch `g` (weight `w_g`, slot -2), both on genesis.
    pub fn initial(w_f: f64, w_g: f64) -> Self {
        let mut blocks = vec![GameBlock { slot: GENESIS_SLOT, parent: None, prior_weight: 0.0 }];
        if w_g > 0.0 {
            blocks.push(GameBlock { slot: -2, parent: Some(0), prior_weight: w_g });
        }
        blocks.push(GameBlock { slot: -1, parent: Some(0), prior_weight: w_f });
        Self { blocks, votes: Vec::new() }
    }

    pub fn blocks(&self) -> &[GameBlock] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn votes(&self) -> &[Vec<usize>] {
        &self.votes
    }

    pub fn slot_of(&self, b: usize) -> i64 {
        self.blocks[b].slot
    }

    pub fn parent(&self, b: usize) -> Option<usize> {
        self.blocks[b].parent
    }

    pub fn block_at(&self, slot: i64) -> Option<usize> {
        self.blocks.iter().position(|b| b.slot == slot)
    }

    /// Slot of the next block to propose.
    pub fn next_slot(&self) -> i64 {
        self.blocks.iter().map(|b| b.slot).max().unwrap_or(GENESIS_SLOT).max(-1) + 1
    }

    pub fn is_ancestor(&self, a: usize, mut b: usize) -> bool {
        loop {
            if a == b {
                return true;
            }
            match self.blocks[b].parent {
                Some(p) => b = p,
                None => return false,
            }
        }
    }

    /// Appends the block of slot `k` on `parent`.
    pub fn propose(&mut self, k: i64, parent: usize) -> usize {
        assert_eq!(k, self.next_slot(), "blocks are proposed slot by slot");
        assert!(self.blocks[parent].slot < k);
        self.blocks.push(GameBlock { slot: k, parent: Some(parent), prior_weight: 0.0 });
        self.blocks.len() - 1
    }

    /// Records the attestations of slot `k`.
    pub fn attest(&mut self, k: usize, votes: Vec<usize>) {
        assert_eq!(k, self.votes.len(), "attestations are recorded slot by slot");
        self.votes.push(votes);
    }

    /// GHOST from genesis over blocks of slot `<= max_block_slot` and
    /// attestations of slots `< vote_slots`, with `boost = (block, weight)`.
    /// Ties favor the branch holding the boosted block, then the later slot.
    pub fn head(&self, max_block_slot: i64, vote_slots: usize, boost: Option<(usize, f64)>) -> usize {
        let n = self.blocks.len();
        let visible: Vec<bool> = self.blocks.iter().map(|b| b.slot <= max_block_slot).collect();
        let mut w: Vec<f64> = self.blocks.iter().map(|b| b.prior_weight).collect();
        for slot in self.votes.iter().take(vote_slots) {
            for &v in slot {
                w[v] += 1.0;
            }
        }
        let mut boosted = vec![false; n];
        if let Some((b, rho_a)) = boost {
            if visible[b] {
                w[b] += rho_a;
                let mut c = Some(b);
                while let Some(x) = c {
                    boosted[x] = true;
                    c = self.blocks[x].parent;
                }
            }
        }
        accumulate_subtree_weights(&mut w, |i| if visible[i] { self.blocks[i].parent } else { None });
        let mut cur = 0;
        loop {
            let best = (0..n).filter(|&c| visible[c] && self.blocks[c].parent == Some(cur)).max_by(|&x, &y| {
                let dw = w[x] - w[y];
                if dw.abs() > TIE_EPS {
                    return dw.total_cmp(&0.0);
                }
                boosted[x].cmp(&boosted[y]).then(self.blocks[x].slot.cmp(&self.blocks[y].slot))
            });
            match best {
                Some(c) => cur = c,
                None => return cur,
            }
        }
    }

    /// Head a proposer of slot `k` sees: blocks before `k`, attestations
    /// before `k`, no boost.
    pub fn obedient_parent(&self, k: usize) -> usize {
        self.head(k as i64 - 1, k, None)
    }

    /// Head an attester of slot `k` sees once `B_k` is out.
    pub fn obedient_vote(&self, k: usize, rho_a: f64) -> usize {
        let b = self.block_at(k as i64).expect("block of the slot is proposed first");
        self.head(k as i64, k, Some((b, rho_a)))
    }

    /// Whether a block of slot `k` on `parent` would be the boosted head.
    pub fn boosted_head_on(&self, k: usize, parent: usize, rho_a: f64) -> bool {
        let mut t = self.clone();
        let b = t.propose(k as i64, parent);
        t.head(k as i64, k, Some((b, rho_a))) == b
    }

    /// Oldest parent that still makes the slot-`k` block the boosted head.
    pub fn cunning_parent(&self, k: usize, rho_a: f64) -> usize {
        let mut cands: Vec<usize> = (0..self.blocks.len()).filter(|&b| self.blocks[b].slot < k as i64).collect();
        cands.sort_by_key(|&b| self.blocks[b].slot);
        cands
            .into_iter()
            .find(|&p| self.boosted_head_on(k, p, rho_a))
            .unwrap_or_else(|| self.obedient_parent(k))
    }

    /// `φ` of a slot-`k` block on `parent`.
    pub fn parent_offset(&self, k: usize, parent: usize) -> u64 {
        (k as i64 - 1 - self.blocks[parent].slot) as u64
    }

    /// `ν` of a slot-`k` attestation on `target`.
    pub fn vote_offset(&self, k: usize, target: usize) -> u64 {
        (k as i64 - self.blocks[target].slot) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heavier_branch_wins_without_boost() {
        let t = GameTree::initial(3.0, 2.0);
        assert_eq!(t.slot_of(t.obedient_parent(0)), -1);
        let t = GameTree::initial(2.0, 2.0);
        assert_eq!(t.slot_of(t.obedient_parent(0)), -1, "tie goes to the later slot");
    }

    #[test]
    fn boost_decides_close_branches() {
        // Gap 1.0 against a boost of 1.2.
        let t = GameTree::initial(3.0, 2.0);
        let g = t.block_at(-2).unwrap();
        assert!(t.boosted_head_on(0, g, 1.2));
        assert!(!t.boosted_head_on(0, g, 0.8));
        assert_eq!(t.cunning_parent(0, 1.2), g);
    }

    #[test]
    fn empty_concurrent_branch_means_genesis() {
        let t = GameTree::initial(1.0, 0.0);
        assert_eq!(t.cunning_parent(0, 1.2), 0);
        assert_eq!(t.parent_offset(0, 0), 2);
        assert_eq!(t.cunning_parent(0, 0.9), t.block_at(-1).unwrap());
    }
}
