//! One validator's view of the chain: which blocks it has received, its
//! leaves, and its latest-message attestation pool.

use std::sync::Arc;

use super::store::{BlockStore, NodeId, SharedStore};
use super::{epoch_start, Attestation, Block, ChainError, CheckpointRef, Digest, Epoch, ValidatorId};

impl BlockStore {
    /// Checkpoint block of epoch `e` on the branch ending at `head`: the block
    /// at the epoch's first slot, or the latest earlier ancestor.
    pub fn checkpoint_node(&self, head: NodeId, e: Epoch) -> NodeId {
        self.ancestor_at_slot(head, epoch_start(e))
    }

    pub fn checkpoint_of_epoch(&self, head: NodeId, e: Epoch) -> CheckpointRef {
        CheckpointRef::new(self.hash(self.checkpoint_node(head, e)), e)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoolEntry {
    pub attestation: Attestation,
    /// Store node of the attested block.
    pub node: NodeId,
    pub digest: Digest,
}

/// Latest attestation per validator.
#[derive(Clone, Debug, Default)]
pub struct AttestationPool {
    entries: Vec<Option<PoolEntry>>,
    len: usize,
}

impl AttestationPool {
    pub fn new(n_validators: usize) -> Self {
        Self { entries: vec![None; n_validators], len: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.entries.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, v: ValidatorId) -> Option<&PoolEntry> {
        self.entries.get(v.index()).and_then(Option::as_ref)
    }

    pub fn iter(&self) -> impl Iterator<Item = &PoolEntry> {
        self.entries.iter().flatten()
    }

    /// Keeps the strictly newer message; equal slots keep the first one.
    fn record(&mut self, entry: PoolEntry) -> Result<bool, ChainError> {
        let v = entry.attestation.attester;
        let slot = self.entries.get_mut(v.index()).ok_or(ChainError::UnknownAttester(v))?;
        match slot {
            Some(old) if old.attestation.slot >= entry.attestation.slot => Ok(false),
            Some(old) => {
                *old = entry;
                Ok(true)
            }
            None => {
                *slot = Some(entry);
                self.len += 1;
                Ok(true)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InsertOutcome {
    Inserted(NodeId),
    AlreadyKnown(NodeId),
}

impl InsertOutcome {
    pub fn node(self) -> NodeId {
        match self {
            InsertOutcome::Inserted(n) | InsertOutcome::AlreadyKnown(n) => n,
        }
    }
}

/// Per-validator block tree over a (possibly shared) block store.
#[derive(Clone, Debug)]
pub struct BlockTree {
    store: SharedStore,
    known: Vec<u64>,
    count: usize,
    leaves: Vec<NodeId>,
    pool: AttestationPool,
}

impl BlockTree {
    /// Fresh tree with its own store.
    pub fn new(genesis: Block, n_validators: usize) -> Self {
        Self::with_store(BlockStore::shared(genesis), n_validators)
    }

    /// View over an existing store that knows only genesis.
    pub fn with_store(store: SharedStore, n_validators: usize) -> Self {
        let mut t = Self {
            store,
            known: Vec::new(),
            count: 0,
            leaves: vec![BlockStore::GENESIS],
            pool: AttestationPool::new(n_validators),
        };
        t.mark(BlockStore::GENESIS);
        t
    }

    pub fn store(&self) -> &SharedStore {
        &self.store
    }

    pub fn genesis(&self) -> Digest {
        self.store.read().hash(BlockStore::GENESIS)
    }

    /// Number of blocks this view holds.
    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn knows(&self, id: NodeId) -> bool {
        let (w, b) = (id as usize / 64, id % 64);
        self.known.get(w).is_some_and(|x| x & (1 << b) != 0)
    }

    pub fn contains(&self, hash: &Digest) -> bool {
        self.node_of(hash).is_some()
    }

    /// Store node of `hash` if this view holds it.
    pub fn node_of(&self, hash: &Digest) -> Option<NodeId> {
        self.store.read().id(hash).filter(|&id| self.knows(id))
    }

    fn mark(&mut self, id: NodeId) {
        let (w, b) = (id as usize / 64, id % 64);
        if self.known.len() <= w {
            self.known.resize(w + 1, 0);
        }
        self.known[w] |= 1 << b;
        self.count += 1;
    }

    /// Childless blocks of this view.
    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    pub fn pool(&self) -> &AttestationPool {
        &self.pool
    }

    pub fn insert_block(&mut self, b: Block) -> Result<InsertOutcome, ChainError> {
        let existing = self.store.read().id(&b.hash);
        if let Some(id) = existing {
            return self.insert_node(id);
        }
        let parent_known = self.node_of(&b.parent).is_some();
        if !parent_known {
            return Err(ChainError::UnknownParent(b.parent));
        }
        let id = self.store.write().add(b)?;
        self.insert_node(id)
    }

    /// Marks a block already present in the store as received.
    pub fn insert_node(&mut self, id: NodeId) -> Result<InsertOutcome, ChainError> {
        if self.knows(id) {
            return Ok(InsertOutcome::AlreadyKnown(id));
        }
        let store = self.store.read();
        let parent = store.parent(id).expect("genesis is always known");
        if !self.knows(parent) {
            return Err(ChainError::UnknownParent(store.hash(parent)));
        }
        drop(store);
        self.mark(id);
        if let Some(pos) = self.leaves.iter().position(|&l| l == parent) {
            self.leaves.swap_remove(pos);
        }
        self.leaves.push(id);
        Ok(InsertOutcome::Inserted(id))
    }

    /// Latest-message update. The attested block must already be held.
    pub fn record_attestation(&mut self, a: Attestation) -> Result<bool, ChainError> {
        if a.attester.index() >= self.pool.capacity() {
            return Err(ChainError::UnknownAttester(a.attester));
        }
        let node = self.node_of(&a.block_vote).ok_or(ChainError::UnknownBlock(a.block_vote))?;
        let digest = a.digest();
        self.pool.record(PoolEntry { attestation: a, node, digest })
    }

    pub fn block(&self, hash: &Digest) -> Option<Arc<Block>> {
        let store = self.store.read();
        store.id(hash).filter(|&id| self.knows(id)).map(|id| store.block(id).clone())
    }

    /// Children of `hash` that this view holds.
    pub fn children(&self, hash: &Digest) -> Vec<Digest> {
        let store = self.store.read();
        match store.id(hash).filter(|&id| self.knows(id)) {
            Some(id) => store
                .children(id)
                .iter()
                .filter(|&&c| self.knows(c))
                .map(|&c| store.hash(c))
                .collect(),
            None => Vec::new(),
        }
    }

    pub fn checkpoint_of_epoch(&self, head: &Digest, e: Epoch) -> Result<CheckpointRef, ChainError> {
        let store = self.store.read();
        let id = store.id(head).filter(|&id| self.knows(id)).ok_or(ChainError::UnknownBlock(*head))?;
        Ok(store.checkpoint_of_epoch(id, e))
    }

    /// Line-oriented dump: `hash parent slot proposer`, parents before children.
    pub fn dump(&self) -> String {
        let store = self.store.read();
        let mut out = String::new();
        for id in 0..store.len() as NodeId {
            if !self.knows(id) {
                continue;
            }
            let b = store.block(id);
            out.push_str(&format!("{} {} {} {}\n", b.hash, b.parent, b.slot, b.proposer.0));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{CheckpointVote, SLOTS_PER_EPOCH};

    fn blk(parent: Digest, slot: u64) -> Block {
        Block::new(slot, parent, ValidatorId(0), Digest::ZERO, vec![], 0.0)
    }

    fn att(v: u32, slot: u64, block: Digest) -> Attestation {
        let g = CheckpointRef::new(Digest::ZERO, 0);
        Attestation {
            attester: ValidatorId(v),
            slot,
            block_vote: block,
            checkpoint_vote: CheckpointVote { source: g, target: g },
        }
    }

    #[test]
    fn insert_child_and_duplicate() {
        let g = Block::genesis();
        let mut t = BlockTree::new(g.clone(), 4);
        let b1 = blk(g.hash, 1);
        assert!(matches!(t.insert_block(b1.clone()), Ok(InsertOutcome::Inserted(_))));
        assert_eq!(t.len(), 2);
        assert_eq!(t.children(&g.hash), vec![b1.hash]);
        assert!(matches!(t.insert_block(b1), Ok(InsertOutcome::AlreadyKnown(_))));
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn withheld_parent_is_unknown() {
        let g = Block::genesis();
        let mut t = BlockTree::new(g.clone(), 4);
        let b1 = blk(g.hash, 1);
        let b2 = blk(b1.hash, 2);
        assert_eq!(t.insert_block(b2.clone()), Err(ChainError::UnknownParent(b1.hash)));
        t.insert_block(b1).unwrap();
        t.insert_block(b2).unwrap();
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn shared_store_views_are_independent() {
        let g = Block::genesis();
        let mut a = BlockTree::new(g.clone(), 4);
        let mut b = BlockTree::with_store(a.store().clone(), 4);
        let b1 = blk(g.hash, 1);
        let b2 = blk(b1.hash, 2);
        a.insert_block(b1.clone()).unwrap();
        a.insert_block(b2.clone()).unwrap();
        assert!(!b.contains(&b1.hash));
        assert!(b.insert_block(b2.clone()).is_err());
        b.insert_block(b1).unwrap();
        b.insert_block(b2).unwrap();
        assert_eq!(b.len(), 3);
    }

    #[test]
    fn pool_keeps_latest_message() {
        let g = Block::genesis();
        let mut t = BlockTree::new(g.clone(), 4);
        assert!(t.record_attestation(att(1, 6, g.hash)).unwrap());
        assert!(!t.record_attestation(att(1, 5, g.hash)).unwrap());
        assert_eq!(t.pool().get(ValidatorId(1)).unwrap().attestation.slot, 6);
        t.record_attestation(att(2, 6, g.hash)).unwrap();
        assert_eq!(t.pool().len(), 2);
        assert_eq!(t.record_attestation(att(9, 6, g.hash)), Err(ChainError::UnknownAttester(ValidatorId(9))));
    }

    #[test]
    fn checkpoints_follow_first_slot_rule() {
        let g = Block::genesis();
        let mut t = BlockTree::new(g.clone(), 1);
        let b30 = blk(g.hash, 30);
        let b70 = blk(b30.hash, 70);
        t.insert_block(b30.clone()).unwrap();
        t.insert_block(b70.clone()).unwrap();
        assert_eq!(t.checkpoint_of_epoch(&b70.hash, 0).unwrap().block, g.hash);
        assert_eq!(t.checkpoint_of_epoch(&b70.hash, 1).unwrap().block, b30.hash);
        assert_eq!(t.checkpoint_of_epoch(&b70.hash, 2).unwrap().block, b30.hash);
        let b64 = blk(b30.hash, 2 * SLOTS_PER_EPOCH);
        t.insert_block(b64.clone()).unwrap();
        assert_eq!(t.checkpoint_of_epoch(&b64.hash, 2).unwrap().block, b64.hash);
    }

    #[test]
    fn dump_lists_held_blocks() {
        let g = Block::genesis();
        let mut t = BlockTree::new(g.clone(), 1);
        t.insert_block(blk(g.hash, 1)).unwrap();
        let d = t.dump();
        assert_eq!(d.lines().count(), 2);
        assert!(d.lines().nth(1).unwrap().ends_with(" 1 0"));
    }
}
