//! Branch state at epoch boundaries: registry after leak accounting, FFG
//! state, and epoch assignments. Memoized per branch point so that views on
//! the same branch share the work.

use std::collections::HashMap;
use std::sync::Arc;

use parking_lot::Mutex;

use crate::chain::{epoch_start, BlockStore, Digest, Epoch, NodeId, Registry};
use crate::finality::{process_justification_finalization, FinalityState};
use crate::leak::{apply_penalty, step_inactivity, EJECTION_STAKE, LEAK_DELAY_EPOCHS};
use crate::randao::{get_seed, EpochAssignments, RandaoError};

/// Protocol parameters shared by every view of a simulation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProtocolParams {
    /// Epoch-slots during which the justified view may change.
    pub safe_slots_to_update_justified: u64,
    /// Proposer boost fraction.
    pub rho: f64,
    pub ejection_stake: f64,
    pub leak_delay_epochs: u64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self {
            safe_slots_to_update_justified: 8,
            rho: 0.4,
            ejection_stake: EJECTION_STAKE,
            leak_delay_epochs: LEAK_DELAY_EPOCHS,
        }
    }
}

/// State of a branch at the first slot of `epoch`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochState {
    pub epoch: Epoch,
    /// Last block of the branch before the epoch's first slot.
    pub node: NodeId,
    pub registry: Registry,
    pub finality: FinalityState,
    pub epochs_without_finalization: u64,
    pub in_leak: bool,
}

#[derive(Debug)]
pub struct ChainContext {
    params: ProtocolParams,
    genesis: Arc<EpochState>,
    states: HashMap<(NodeId, Epoch), Arc<EpochState>>,
    pulled_up: HashMap<NodeId, Arc<FinalityState>>,
    assignments: HashMap<(Digest, NodeId, Epoch), Arc<EpochAssignments>>,
}

pub type SharedContext = Arc<Mutex<ChainContext>>;

impl ChainContext {
    pub fn new(params: ProtocolParams, genesis_block: Digest, registry: Registry) -> Self {
        let genesis = Arc::new(EpochState {
            epoch: 0,
            node: BlockStore::GENESIS,
            registry,
            finality: FinalityState::genesis(genesis_block),
            epochs_without_finalization: 0,
            in_leak: false,
        });
        Self {
            params,
            genesis,
            states: HashMap::new(),
            pulled_up: HashMap::new(),
            assignments: HashMap::new(),
        }
    }

    pub fn shared(self) -> SharedContext {
        Arc::new(Mutex::new(self))
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn genesis_state(&self) -> Arc<EpochState> {
        self.genesis.clone()
    }

    fn key(store: &BlockStore, head: NodeId, e: Epoch) -> NodeId {
        store.ancestor_at_slot(head, epoch_start(e) - 1)
    }

    /// State at the first slot of epoch `e` on the branch through `head`.
    pub fn state_at(&mut self, store: &BlockStore, head: NodeId, e: Epoch) -> Arc<EpochState> {
        if e == 0 {
            return self.genesis.clone();
        }
        let mut pending = Vec::new();
        let mut ep = e;
        let mut base = loop {
            if ep == 0 {
                break self.genesis.clone();
            }
            let node = Self::key(store, head, ep);
            if let Some(s) = self.states.get(&(node, ep)) {
                break s.clone();
            }
            pending.push((node, ep));
            ep -= 1;
        };
        while let Some((node, ep)) = pending.pop() {
            let next = Arc::new(self.transition(store, &base, node, ep));
            self.states.insert((node, ep), next.clone());
            base = next;
        }
        base
    }

    /// Epoch processing at the start of `e`: FFG update, then leak accounting
    /// for participation in epoch `e - 2`, then ejections.
    fn transition(&self, store: &BlockStore, prev: &EpochState, node: NodeId, e: Epoch) -> EpochState {
        let finality = process_justification_finalization(store, node, &prev.finality, &prev.registry, e);
        let mut registry = prev.registry.clone();
        let ewf = (e - 1).saturating_sub(finality.last_finalized.epoch);
        let in_leak = ewf >= self.params.leak_delay_epochs;
        if e >= 2 {
            let pe = e - 2;
            let target = store.checkpoint_of_epoch(node, pe);
            let mut participated = vec![false; registry.len()];
            for id in store.branch(node) {
                if store.slot(id) <= epoch_start(pe) {
                    break;
                }
                for a in &store.block(id).attestations {
                    if a.checkpoint_vote.target == target && a.is_well_formed() {
                        if let Some(p) = participated.get_mut(a.attester.index()) {
                            *p = true;
                        }
                    }
                }
            }
            for (r, &p) in registry.records_mut().iter_mut().zip(&participated) {
                if !r.active {
                    continue;
                }
                let stake = apply_penalty(r.stake, r.inactivity_score);
                r.inactivity_score = step_inactivity(r.inactivity_score, p, in_leak);
                r.set_stake(stake);
                if r.stake <= self.params.ejection_stake {
                    r.eject();
                }
            }
        }
        EpochState { epoch: e, node, registry, finality, epochs_without_finalization: ewf, in_leak }
    }

    /// FFG state this branch would reach at the next epoch boundary if it
    /// ended at `b`.
    pub fn pulled_up(&mut self, store: &BlockStore, b: NodeId) -> Arc<FinalityState> {
        if let Some(f) = self.pulled_up.get(&b) {
            return f.clone();
        }
        let e = store.block(b).epoch();
        let base = self.state_at(store, b, e);
        let f = Arc::new(process_justification_finalization(store, b, &base.finality, &base.registry, e + 1));
        self.pulled_up.insert(b, f.clone());
        f
    }

    /// Assignments of epoch `e` on the branch through `head`.
    pub fn assignments(
        &mut self,
        store: &BlockStore,
        head: NodeId,
        e: Epoch,
    ) -> Result<(Arc<EpochState>, Arc<EpochAssignments>), RandaoError> {
        let state = self.state_at(store, head, e);
        let seed = get_seed(store, head, e);
        let key = (seed.digest, state.node, e);
        if let Some(a) = self.assignments.get(&key) {
            return Ok((state, a.clone()));
        }
        let a = Arc::new(EpochAssignments::compute(seed, &state.registry)?);
        self.assignments.insert(key, a.clone());
        Ok((state, a))
    }
}
