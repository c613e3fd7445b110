//! Honest validator state machine: slot clock, roles, block and attestation
//! production, and view synchronization with the justified-view window.

mod context;

use std::collections::HashMap;
use std::sync::Arc;

pub use context::{ChainContext, EpochState, ProtocolParams, SharedContext};

use crate::chain::{
    epoch_of, randao_reveal, slot_in_epoch, Attestation, Block, BlockStore, BlockTree, ChainError, CheckpointRef,
    CheckpointVote, Digest, Epoch, NodeId, Slot, ValidatorId, SLOTS_PER_EPOCH,
};
use crate::fork_choice;
use crate::randao::{EpochAssignments, RandaoError};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ValidatorError {
    #[error("validator already attested in epoch {0}")]
    AlreadyAttested(Epoch),
    #[error("validator holds no {0} role this slot")]
    NoRole(&'static str),
    #[error("clock has not started")]
    ClockNotStarted,
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Randao(#[from] RandaoError),
}

/// Simulated time in slot thirds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SimTime {
    pub slot: Slot,
    pub third: u8,
}

impl SimTime {
    pub fn new(slot: Slot, third: u8) -> Self {
        debug_assert!(third < 3);
        Self { slot, third }
    }

    pub fn from_ticks(ticks: u64) -> Self {
        Self { slot: ticks / 3, third: (ticks % 3) as u8 }
    }

    pub fn ticks(self) -> u64 {
        self.slot * 3 + self.third as u64
    }

    /// Elapsed fraction of the slot.
    pub fn fraction(self) -> f64 {
        self.third as f64 / 3.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Message {
    Propose(Arc<Block>),
    Attest(Attestation),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Roles {
    pub proposer: bool,
    pub attester: bool,
}

/// A block counts for the boost if it arrives within the first third.
pub const TIMELY_FRACTION: f64 = 1.0 / 3.0;

#[derive(Debug)]
pub struct ValidatorView {
    id: ValidatorId,
    tree: BlockTree,
    ctx: SharedContext,
    params: ProtocolParams,
    now: Option<SimTime>,
    epoch_state: Arc<EpochState>,
    assignments: Option<Arc<EpochAssignments>>,
    roles: Roles,
    last_justified: CheckpointRef,
    last_finalized: CheckpointRef,
    unrealized_justified: CheckpointRef,
    pending_blocks: HashMap<Digest, Vec<Arc<Block>>>,
    pending_atts: HashMap<Digest, Vec<Attestation>>,
    last_attested_epoch: Option<Epoch>,
    attest_due: bool,
    block_seen: bool,
    boosted: Option<NodeId>,
    justified_log: Vec<CheckpointRef>,
    finalized_log: Vec<CheckpointRef>,
}

impl ValidatorView {
    pub fn new(id: ValidatorId, tree: BlockTree, ctx: SharedContext) -> Self {
        let (params, genesis) = {
            let c = ctx.lock();
            (*c.params(), c.genesis_state())
        };
        let g = genesis.finality.last_justified;
        Self {
            id,
            tree,
            ctx,
            params,
            now: None,
            epoch_state: genesis,
            assignments: None,
            roles: Roles::default(),
            last_justified: g,
            last_finalized: g,
            unrealized_justified: g,
            pending_blocks: HashMap::new(),
            pending_atts: HashMap::new(),
            last_attested_epoch: None,
            attest_due: false,
            block_seen: false,
            boosted: None,
            justified_log: vec![g],
            finalized_log: vec![g],
        }
    }

    pub fn id(&self) -> ValidatorId {
        self.id
    }

    pub fn tree(&self) -> &BlockTree {
        &self.tree
    }

    pub fn now(&self) -> Option<SimTime> {
        self.now
    }

    pub fn roles(&self) -> Roles {
        self.roles
    }

    pub fn last_justified(&self) -> CheckpointRef {
        self.last_justified
    }

    pub fn last_finalized(&self) -> CheckpointRef {
        self.last_finalized
    }

    /// Branch state adopted at the last epoch boundary.
    pub fn epoch_state(&self) -> &Arc<EpochState> {
        &self.epoch_state
    }

    pub fn assignments(&self) -> Option<&Arc<EpochAssignments>> {
        self.assignments.as_ref()
    }

    /// Every justified checkpoint this view adopted, in order.
    pub fn justified_log(&self) -> &[CheckpointRef] {
        &self.justified_log
    }

    pub fn finalized_log(&self) -> &[CheckpointRef] {
        &self.finalized_log
    }

    pub fn pending_blocks(&self) -> usize {
        self.pending_blocks.values().map(Vec::len).sum()
    }

    fn current_slot(&self) -> Slot {
        self.now.map_or(0, |t| t.slot)
    }

    fn boost_weight(&self) -> f64 {
        self.params.rho * self.epoch_state.registry.total_active_balance() / SLOTS_PER_EPOCH as f64
    }

    fn head_node(&self, store: &BlockStore, boost: bool) -> NodeId {
        let root = store
            .id(&self.last_justified.block)
            .filter(|&n| self.tree.knows(n))
            .unwrap_or(BlockStore::GENESIS);
        let b = if boost { self.boosted.map(|b| (b, self.boost_weight())) } else { None };
        fork_choice::head_node(store, &self.tree, &self.epoch_state.registry, root, b)
    }

    /// Fork-choice head, including the current slot's boost if any.
    pub fn head(&self) -> Digest {
        let store = self.tree.store().read();
        store.hash(self.head_node(&store, true))
    }

    /// Advances the clock. On a new slot: epoch processing if the epoch
    /// changed, role assignment and block proposal. The attestation is
    /// emitted once a block of this slot was seen or a third has elapsed.
    pub fn tick(&mut self, now: SimTime) -> Result<Vec<Message>, ValidatorError> {
        if self.now.is_some_and(|t| now <= t) {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        let prev = self.now;
        self.now = Some(now);
        if prev.map_or(true, |t| t.slot != now.slot) {
            let e = epoch_of(now.slot);
            if prev.map_or(true, |t| epoch_of(t.slot) != e) {
                self.on_epoch_start(e)?;
            }
            self.block_seen = false;
            self.boosted = None;
            self.assign_roles(now.slot);
            if self.roles.proposer {
                let b = Arc::new(self.prepare_block()?);
                self.on_block(&b, 0.0)?;
                out.push(Message::Propose(b));
            }
        }
        if self.attest_due && (self.block_seen || now.third >= 1) {
            out.push(Message::Attest(self.prepare_attestation()?));
        }
        Ok(out)
    }

    fn assign_roles(&mut self, slot: Slot) {
        let active = self.epoch_state.registry.get(self.id).is_some_and(|r| r.active);
        let e = epoch_of(slot);
        self.roles = match &self.assignments {
            Some(a) if active => Roles {
                proposer: slot > 0 && a.proposer(slot) == self.id,
                attester: a.attester_slot(self.id) == Some(slot) && self.last_attested_epoch != Some(e),
            },
            _ => Roles::default(),
        };
        self.attest_due = self.roles.attester;
    }

    fn on_epoch_start(&mut self, e: Epoch) -> Result<(), ValidatorError> {
        let store_arc = self.tree.store().clone();
        let store = store_arc.read();
        let head = self.head_node(&store, false);
        let state = self.ctx.lock().state_at(&store, head, e);
        let mut j = state.finality.last_justified;
        if self.unrealized_justified.epoch > j.epoch && self.unrealized_justified.epoch < e {
            j = self.unrealized_justified;
        }
        if j.epoch > self.last_justified.epoch {
            self.set_justified(j);
        }
        let f = state.finality.last_finalized;
        if f.epoch > self.last_finalized.epoch {
            self.last_finalized = f;
            self.finalized_log.push(f);
        }
        self.epoch_state = state;
        let head = self.head_node(&store, false);
        let (state, asg) = self.ctx.lock().assignments(&store, head, e)?;
        self.epoch_state = state;
        self.assignments = Some(asg);
        Ok(())
    }

    fn set_justified(&mut self, j: CheckpointRef) {
        self.last_justified = j;
        self.justified_log.push(j);
    }

    /// Block on the current head with every held attestation that its
    /// branch has not included yet.
    pub fn prepare_block(&self) -> Result<Block, ValidatorError> {
        let now = self.now.ok_or(ValidatorError::ClockNotStarted)?;
        if !self.roles.proposer {
            return Err(ValidatorError::NoRole("proposer"));
        }
        let store = self.tree.store().read();
        let head = self.head_node(&store, false);
        let e = epoch_of(now.slot);
        let atts: Vec<Attestation> = self
            .tree
            .pool()
            .iter()
            .filter(|p| {
                let a = &p.attestation;
                a.slot < now.slot
                    && epoch_of(a.slot) + 1 >= e
                    && store.is_ancestor(p.node, head)
                    && !store.is_included_on_branch(&p.digest, head)
            })
            .map(|p| p.attestation.clone())
            .collect();
        Ok(Block::new(now.slot, store.hash(head), self.id, randao_reveal(self.id, e), atts, 0.0))
    }

    /// Vote for the boosted head with `last_justified -> checkpoint(now)`.
    pub fn prepare_attestation(&mut self) -> Result<Attestation, ValidatorError> {
        let now = self.now.ok_or(ValidatorError::ClockNotStarted)?;
        let e = epoch_of(now.slot);
        if self.last_attested_epoch == Some(e) {
            return Err(ValidatorError::AlreadyAttested(e));
        }
        let a = {
            let store = self.tree.store().read();
            let head = self.head_node(&store, true);
            Attestation {
                attester: self.id,
                slot: now.slot,
                block_vote: store.hash(head),
                checkpoint_vote: CheckpointVote {
                    source: self.last_justified,
                    target: store.checkpoint_of_epoch(head, e),
                },
            }
        };
        self.last_attested_epoch = Some(e);
        self.attest_due = false;
        self.tree.record_attestation(a.clone())?;
        Ok(a)
    }

    /// Receives a block arriving at `fraction` of the current slot. Orphans
    /// wait for their parent.
    pub fn on_block(&mut self, b: &Arc<Block>, fraction: f64) -> Result<(), ValidatorError> {
        let mut queue = vec![b.clone()];
        while let Some(b) = queue.pop() {
            let existing = self.tree.store().read().id(&b.hash);
            let res = match existing {
                Some(id) => self.tree.insert_node(id),
                None => self.tree.insert_block((*b).clone()),
            };
            match res {
                Ok(crate::chain::InsertOutcome::Inserted(id)) => {
                    self.after_insert(id, &b, fraction);
                    if let Some(children) = self.pending_blocks.remove(&b.hash) {
                        queue.extend(children);
                    }
                }
                Ok(crate::chain::InsertOutcome::AlreadyKnown(_)) => {}
                Err(ChainError::UnknownParent(p)) => self.pending_blocks.entry(p).or_default().push(b),
                Err(e) => return Err(e.into()),
            }
        }
        Ok(())
    }

    fn after_insert(&mut self, id: NodeId, b: &Block, fraction: f64) {
        let slot = self.current_slot();
        if self.now.is_some() && b.slot == slot {
            self.block_seen = true;
            if fraction <= TIMELY_FRACTION && self.boosted.is_none() {
                self.boosted = Some(id);
            }
        }
        for a in &b.attestations {
            let _ = self.tree.record_attestation(a.clone());
        }
        if let Some(atts) = self.pending_atts.remove(&b.hash) {
            for a in atts {
                let _ = self.tree.record_attestation(a);
            }
        }
        let pulled = {
            let store = self.tree.store().read();
            self.ctx.lock().pulled_up(&store, id)
        };
        let pj = pulled.last_justified;
        if pj.epoch > self.unrealized_justified.epoch {
            self.unrealized_justified = pj;
        }
        if slot_in_epoch(slot) <= self.params.safe_slots_to_update_justified
            && pj.epoch > self.last_justified.epoch
            && pj.epoch < epoch_of(slot)
        {
            self.set_justified(pj);
        }
    }

    /// Latest-message update; attestations for unknown blocks wait.
    pub fn on_attestation(&mut self, a: Attestation) -> Result<(), ValidatorError> {
        if a.attester.index() >= self.tree.pool().capacity() {
            return Err(ChainError::UnknownAttester(a.attester).into());
        }
        if self.tree.contains(&a.block_vote) {
            self.tree.record_attestation(a)?;
        } else {
            self.pending_atts.entry(a.block_vote).or_default().push(a);
        }
        Ok(())
    }

    pub fn on_message(&mut self, m: &Message, fraction: f64) -> Result<(), ValidatorError> {
        match m {
            Message::Propose(b) => self.on_block(b, fraction),
            Message::Attest(a) => self.on_attestation(a.clone()),
        }
    }
}
