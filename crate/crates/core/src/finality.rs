//! Casper FFG over one branch: supermajority links from included checkpoint
//! votes, justification and the four-case finalization rule.

use crate::chain::{
    epoch_start, BlockStore, BlockTree, ChainError, Checkpoint, CheckpointRef, Digest, Epoch, NodeId, Registry,
};

/// How many epochs of justified checkpoints are kept besides the latest ones.
const JUSTIFIED_HISTORY: u64 = 6;

#[derive(Clone, Debug, PartialEq)]
pub struct FinalityState {
    pub last_justified: CheckpointRef,
    pub last_finalized: CheckpointRef,
    /// Justified checkpoints of recent epochs on this branch, oldest first.
    pub justified: Vec<CheckpointRef>,
    /// Checkpoints A, B, C, D of the last evaluation (`None` before genesis).
    pub window: [Option<Checkpoint>; 4],
}

impl FinalityState {
    pub fn genesis(block: Digest) -> Self {
        let g = CheckpointRef::new(block, 0);
        Self {
            last_justified: g,
            last_finalized: g,
            justified: vec![g],
            window: [None, None, None, Some(Checkpoint::genesis(block))],
        }
    }

    pub fn is_justified(&self, c: &CheckpointRef) -> bool {
        self.justified.contains(c) || self.last_justified == *c
    }

    fn justify(&mut self, c: CheckpointRef) {
        if !self.justified.contains(&c) {
            self.justified.push(c);
            self.justified.sort_by_key(|x| x.epoch);
        }
        if c.epoch > self.last_justified.epoch {
            self.last_justified = c;
        }
    }

    fn finalize(&mut self, c: CheckpointRef) {
        if c.epoch > self.last_finalized.epoch {
            self.last_finalized = c;
        }
    }
}

/// `3 count >= 2 total`.
pub fn is_supermajority(count: f64, total: f64) -> bool {
    total > 0.0 && 3.0 * count >= 2.0 * total
}

/// Stake of distinct validators whose vote `source -> target` is included in
/// a block of the branch ending at `head`. Only blocks after the target's
/// first slot can hold such a vote, so the walk stops there.
pub fn count_matching_checkpoint_vote(
    store: &BlockStore,
    head: NodeId,
    source: &CheckpointRef,
    target: &CheckpointRef,
    registry: &Registry,
) -> f64 {
    let first = epoch_start(target.epoch);
    let mut seen = vec![false; registry.len()];
    let mut total = 0.0;
    for id in store.branch(head) {
        if store.slot(id) <= first {
            break;
        }
        for a in &store.block(id).attestations {
            let cv = &a.checkpoint_vote;
            if cv.source != *source || cv.target != *target || !a.is_well_formed() {
                continue;
            }
            if let Some(s) = seen.get_mut(a.attester.index()) {
                if !*s {
                    *s = true;
                    total += registry.weight(a.attester);
                }
            }
        }
    }
    total
}

/// Tree-level wrapper of [`count_matching_checkpoint_vote`].
pub fn count_votes(
    tree: &BlockTree,
    head: &Digest,
    source: &CheckpointRef,
    target: &CheckpointRef,
    registry: &Registry,
) -> Result<f64, ChainError> {
    let id = tree.node_of(head).ok_or(ChainError::UnknownBlock(*head))?;
    Ok(count_matching_checkpoint_vote(&tree.store().read(), id, source, target, registry))
}

/// Epoch-boundary update at the first slot of `epoch`; `head` is the
/// branch's last block before that slot.
///
/// Targets of the previous two epochs are justified by a supermajority link
/// from any justified checkpoint of the branch. Then, with A, B, C, D the
/// checkpoints of epochs `epoch-4 .. epoch-1`:
/// A is finalized if A, B are justified and A -> C holds;
/// B if B is justified and B -> C holds, or B, C are justified and B -> D holds;
/// C if C is justified and C -> D holds.
pub fn process_justification_finalization(
    store: &BlockStore,
    head: NodeId,
    state: &FinalityState,
    registry: &Registry,
    epoch: Epoch,
) -> FinalityState {
    let mut next = state.clone();
    if epoch == 0 {
        return next;
    }
    let total = registry.total_active_balance();
    let link = |s: &CheckpointRef, t: &CheckpointRef| {
        is_supermajority(count_matching_checkpoint_vote(store, head, s, t, registry), total)
    };

    for te in [epoch.saturating_sub(2), epoch - 1] {
        if te == 0 {
            continue;
        }
        let target = store.checkpoint_of_epoch(head, te);
        if next.is_justified(&target) {
            continue;
        }
        let sources: Vec<CheckpointRef> = next.justified.iter().copied().filter(|s| s.epoch < te).collect();
        if sources.iter().any(|s| link(s, &target)) {
            next.justify(target);
        }
    }

    let cp = |k: u64| (epoch >= k).then(|| store.checkpoint_of_epoch(head, epoch - k));
    let [a, b, c, d] = [cp(4), cp(3), cp(2), cp(1)];
    let j = |x: &Option<CheckpointRef>| x.is_some_and(|x| next.is_justified(&x));
    let l = |x: &Option<CheckpointRef>, y: &Option<CheckpointRef>| match (x, y) {
        (Some(x), Some(y)) => link(x, y),
        _ => false,
    };
    let mut finalized = Vec::new();
    if j(&a) && j(&b) && l(&a, &c) {
        finalized.push(a);
    }
    if (j(&b) && l(&b, &c)) || (j(&b) && j(&c) && l(&b, &d)) {
        finalized.push(b);
    }
    if j(&c) && l(&c, &d) {
        finalized.push(c);
    }
    for f in finalized.into_iter().flatten() {
        next.finalize(f);
    }

    let flags = |x: Option<CheckpointRef>| {
        x.map(|x| Checkpoint {
            block: x.block,
            epoch: x.epoch,
            justified: next.is_justified(&x),
            finalized: x.epoch <= next.last_finalized.epoch && store.id(&x.block).is_some_and(|n| {
                store
                    .id(&next.last_finalized.block)
                    .is_some_and(|f| store.is_ancestor(n, f))
            }),
        })
    };
    next.window = [flags(a), flags(b), flags(c), flags(d)];

    let keep_from = epoch.saturating_sub(JUSTIFIED_HISTORY);
    let (lj, lf) = (next.last_justified, next.last_finalized);
    next.justified.retain(|x| x.epoch >= keep_from || *x == lj || *x == lf);
    next
}

/// Tree-level wrapper of [`process_justification_finalization`].
pub fn justification_finalization(
    tree: &BlockTree,
    head: &Digest,
    state: &FinalityState,
    registry: &Registry,
    epoch: Epoch,
) -> Result<FinalityState, ChainError> {
    let id = tree.node_of(head).ok_or(ChainError::UnknownBlock(*head))?;
    Ok(process_justification_finalization(&tree.store().read(), id, state, registry, epoch))
}
