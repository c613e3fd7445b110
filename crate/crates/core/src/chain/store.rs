//! Append-only block arena shared by the views of one simulation.
//!
//! Blocks are immutable and content addressed, so every view can reference
//! the same node; what a view has *received* is tracked by the view itself
//! (see [`super::BlockTree`]). Ancestor queries use skew-binary jump pointers
//! and run in `O(log depth)`.

use std::collections::HashMap;
use std::sync::Arc;

use parking_lot::RwLock;

use super::{Block, ChainError, Digest, Slot};

pub type NodeId = u32;

pub type SharedStore = Arc<RwLock<BlockStore>>;

#[derive(Debug)]
struct Node {
    block: Arc<Block>,
    parent: NodeId,
    depth: u32,
    jump: NodeId,
    children: Vec<NodeId>,
}

#[derive(Debug)]
pub struct BlockStore {
    nodes: Vec<Node>,
    index: HashMap<Digest, NodeId>,
    /// Attestation digest -> blocks that include it.
    inclusions: HashMap<Digest, Vec<NodeId>>,
}

impl BlockStore {
    pub const GENESIS: NodeId = 0;

    pub fn new(genesis: Block) -> Self {
        let mut index = HashMap::new();
        index.insert(genesis.hash, 0);
        Self {
            nodes: vec![Node {
                block: Arc::new(genesis),
                parent: 0,
                depth: 0,
                jump: 0,
                children: Vec::new(),
            }],
            index,
            inclusions: HashMap::new(),
        }
    }

    pub fn shared(genesis: Block) -> SharedStore {
        Arc::new(RwLock::new(Self::new(genesis)))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn id(&self, hash: &Digest) -> Option<NodeId> {
        self.index.get(hash).copied()
    }

    pub fn block(&self, id: NodeId) -> &Arc<Block> {
        &self.nodes[id as usize].block
    }

    pub fn hash(&self, id: NodeId) -> Digest {
        self.nodes[id as usize].block.hash
    }

    pub fn slot(&self, id: NodeId) -> Slot {
        self.nodes[id as usize].block.slot
    }

    pub fn depth(&self, id: NodeId) -> u32 {
        self.nodes[id as usize].depth
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        (id != Self::GENESIS).then(|| self.nodes[id as usize].parent)
    }

    /// Children across all views, in insertion order.
    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.nodes[id as usize].children
    }

    /// Adds a block, verifying parent, slot order and digest on first sight.
    /// Returns the existing node when the digest is already stored.
    pub fn add(&mut self, block: Block) -> Result<NodeId, ChainError> {
        if let Some(id) = self.id(&block.hash) {
            return Ok(id);
        }
        let parent = self.id(&block.parent).ok_or(ChainError::UnknownParent(block.parent))?;
        let parent_slot = self.slot(parent);
        if block.slot <= parent_slot {
            return Err(ChainError::InvalidSlot { slot: block.slot, parent_slot });
        }
        if block.compute_hash() != block.hash {
            return Err(ChainError::InvalidDigest);
        }
        let id = self.nodes.len() as NodeId;
        let depth = self.depth(parent) + 1;
        let j1 = self.nodes[parent as usize].jump;
        let j2 = self.nodes[j1 as usize].jump;
        let jump = if self.depth(parent) - self.depth(j1) == self.depth(j1) - self.depth(j2) {
            j2
        } else {
            parent
        };
        for a in &block.attestations {
            self.inclusions.entry(a.digest()).or_default().push(id);
        }
        self.index.insert(block.hash, id);
        self.nodes[parent as usize].children.push(id);
        self.nodes.push(Node { block: Arc::new(block), parent, depth, jump, children: Vec::new() });
        Ok(id)
    }

    /// Ancestor-or-self of `id` at depth `d` (`d` must not exceed `id`'s depth).
    pub fn ancestor_at_depth(&self, mut id: NodeId, d: u32) -> NodeId {
        debug_assert!(d <= self.depth(id));
        while self.depth(id) > d {
            let n = &self.nodes[id as usize];
            id = if self.depth(n.jump) >= d { n.jump } else { n.parent };
        }
        id
    }

    /// `a` is an ancestor of `b` or equal to it.
    pub fn is_ancestor(&self, a: NodeId, b: NodeId) -> bool {
        let da = self.depth(a);
        da <= self.depth(b) && self.ancestor_at_depth(b, da) == a
    }

    /// Deepest ancestor-or-self of `id` whose slot is at most `slot`.
    pub fn ancestor_at_slot(&self, mut id: NodeId, slot: Slot) -> NodeId {
        while self.slot(id) > slot {
            let n = &self.nodes[id as usize];
            id = if self.slot(n.jump) > slot { n.jump } else { n.parent };
        }
        id
    }

    pub fn lca(&self, mut a: NodeId, mut b: NodeId) -> NodeId {
        let d = self.depth(a).min(self.depth(b));
        a = self.ancestor_at_depth(a, d);
        b = self.ancestor_at_depth(b, d);
        while a != b {
            let (na, nb) = (&self.nodes[a as usize], &self.nodes[b as usize]);
            if na.jump != nb.jump {
                a = na.jump;
                b = nb.jump;
            } else {
                a = na.parent;
                b = nb.parent;
            }
        }
        a
    }

    /// Whether an attestation with this digest sits in some block of the
    /// branch ending at `head`.
    pub fn is_included_on_branch(&self, att_digest: &Digest, head: NodeId) -> bool {
        self.inclusions
            .get(att_digest)
            .is_some_and(|v| v.iter().any(|&n| self.is_ancestor(n, head)))
    }

    /// Walks the branch from `head` towards genesis, newest first.
    pub fn branch(&self, head: NodeId) -> BranchIter<'_> {
        BranchIter { store: self, next: Some(head) }
    }
}

pub struct BranchIter<'a> {
    store: &'a BlockStore,
    next: Option<NodeId>,
}

impl Iterator for BranchIter<'_> {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        let cur = self.next?;
        self.next = self.store.parent(cur);
        Some(cur)
    }
}
