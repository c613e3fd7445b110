//! Event loop over slot thirds.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::report::{EpochRow, RunReport, ValidatorRow};
use super::{partition, NetsimError, PartitionDirective, ScenarioConfig};
use crate::adversary::{dual_active_step, semi_active_step, SemiActiveSchedule, StrategyKind};
use crate::chain::{
    epoch_of, epoch_start, Block, BlockStore, BlockTree, CheckpointRef, Digest, Epoch, NodeId, Registry,
    SharedStore, ValidatorId, SLOTS_PER_EPOCH,
};
use crate::validator::{ChainContext, Message, ProtocolParams, SharedContext, SimTime, ValidatorView};

struct Agent {
    view: ValidatorView,
    group: usize,
    byzantine: bool,
}

struct Delivery {
    msg: Arc<Message>,
    recipients: Vec<u32>,
}

pub struct Simulation {
    cfg: ScenarioConfig,
    store: SharedStore,
    agents: Vec<Agent>,
    directive: PartitionDirective,
    byzantine: Vec<bool>,
    /// `(tick, sender, seq)` -> delivery.
    queue: BTreeMap<(u64, u32, u64), Delivery>,
    seq: u64,
    rng: ChaCha20Rng,
    fifo: HashMap<(u32, u32), u64>,
    schedule: SemiActiveSchedule,
    mirror_active: Vec<bool>,
    /// Per Byzantine validator and target epoch: first vote digest sent.
    votes: HashMap<(u32, Epoch), Digest>,
    slashable: Vec<bool>,
    justified_seen: HashMap<Epoch, Digest>,
    justified_cursor: Vec<usize>,
    report: RunReport,
    total_ticks: u64,
}

impl Simulation {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, NetsimError> {
        cfg.validate()?;
        let genesis = Block::genesis();
        let store = BlockStore::shared(genesis.clone());
        let registry = Registry::uniform(cfg.n, 32.0);
        let params = ProtocolParams { safe_slots_to_update_justified: cfg.j, rho: cfg.rho, ..Default::default() };
        let ctx: SharedContext = ChainContext::new(params, genesis.hash, registry).shared();

        let n_byz = cfg.byzantine_count();
        let n_honest = cfg.n - n_byz;
        let first = cfg.first_group_size();
        let ids = |r: std::ops::Range<usize>| r.map(|i| ValidatorId(i as u32)).collect::<Vec<_>>();
        let groups = if first < n_honest { vec![ids(0..first), ids(first..n_honest)] } else { vec![ids(0..n_honest)] };
        let directive = partition(&groups, cfg.gst)?;
        let n_groups = directive.groups();
        if cfg.strategy == StrategyKind::SemiActive && n_groups < 2 && n_byz > 0 {
            return Err(super::invalid("semi-active needs a partition (p0 < 1)").into());
        }

        let mut agents = Vec::new();
        let view = |v: u32| ValidatorView::new(ValidatorId(v), BlockTree::with_store(store.clone(), cfg.n), ctx.clone());
        for (g, members) in groups.iter().enumerate() {
            for v in members {
                agents.push(Agent { view: view(v.0), group: g, byzantine: false });
            }
        }
        agents.sort_by_key(|a| a.view.id());
        if cfg.strategy != StrategyKind::Idle {
            for v in n_honest..cfg.n {
                for g in 0..n_groups {
                    agents.push(Agent { view: view(v as u32), group: g, byzantine: true });
                }
            }
        }
        let n_agents = agents.len();
        let n_validators = cfg.n;
        Ok(Self {
            byzantine: (0..cfg.n).map(|i| i >= n_honest).collect(),
            rng: ChaCha20Rng::seed_from_u64(cfg.seed),
            total_ticks: cfg.epochs * SLOTS_PER_EPOCH * 3,
            report: RunReport::new(&cfg),
            cfg,
            store,
            agents,
            directive,
            queue: BTreeMap::new(),
            seq: 0,
            fifo: HashMap::new(),
            schedule: SemiActiveSchedule::default(),
            mirror_active: vec![true; n_groups],
            votes: HashMap::new(),
            slashable: vec![false; n_validators],
            justified_seen: HashMap::new(),
            justified_cursor: vec![0; n_agents],
        })
    }

    pub fn run(mut self) -> Result<RunReport, NetsimError> {
        for tick in 0..self.total_ticks {
            let now = SimTime::from_ticks(tick);
            self.deliver(tick, now)?;
            let boundary = now.third == 0 && now.slot % SLOTS_PER_EPOCH == 0;
            let epoch = epoch_of(now.slot);
            for i in 0..self.agents.len() {
                if !self.agents[i].byzantine {
                    self.tick_agent(i, tick, now)?;
                }
            }
            if boundary {
                self.plan_adversary(epoch)?;
            }
            for i in 0..self.agents.len() {
                if self.agents[i].byzantine && self.mirror_active[self.agents[i].group] {
                    self.tick_agent(i, tick, now)?;
                }
            }
            if boundary {
                self.record(epoch);
                if self.cfg.stop_on_conflict && self.report.summary.conflicting_finalization_epoch.is_some() {
                    break;
                }
            }
        }
        self.report.summary.slashable_validators =
            self.slashable.iter().filter(|&&s| s).count();
        Ok(self.report)
    }

    fn tick_agent(&mut self, i: usize, tick: u64, now: SimTime) -> Result<(), NetsimError> {
        let msgs = self.agents[i].view.tick(now)?;
        for m in msgs {
            if self.agents[i].byzantine {
                if let Message::Attest(a) = &m {
                    let key = (a.attester.0, a.target_epoch());
                    let d = a.digest();
                    if *self.votes.entry(key).or_insert(d) != d {
                        self.slashable[a.attester.index()] = true;
                    }
                }
            }
            self.broadcast(i, Arc::new(m), tick);
        }
        Ok(())
    }

    fn delay(&mut self) -> u64 {
        if self.cfg.jitter {
            self.rng.gen_range(1..=self.cfg.delta as u64)
        } else {
            self.cfg.delta as u64
        }
    }

    fn broadcast(&mut self, sender: usize, msg: Arc<Message>, tick: u64) {
        let epoch = epoch_of(SimTime::from_ticks(tick).slot);
        let (sg, sbyz) = (self.agents[sender].group, self.agents[sender].byzantine);
        let sid = self.agents[sender].view.id().0;
        let mut by_tick: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
        for r in 0..self.agents.len() {
            if r == sender {
                continue;
            }
            let rg = self.agents[r].group;
            if sbyz && rg != sg {
                continue;
            }
            let mut t = tick + self.delay();
            if self.directive.separated(sg, rg, epoch) {
                match self.directive.until() {
                    Some(u) => t = t.max(epoch_start(u) * 3 + self.cfg.delta as u64),
                    None => continue,
                }
            }
            if self.cfg.jitter {
                let last = self.fifo.entry((sender as u32, r as u32)).or_insert(0);
                t = t.max(*last);
                *last = t;
            }
            if t < self.total_ticks {
                by_tick.entry(t).or_default().push(r as u32);
            }
        }
        for (t, recipients) in by_tick {
            self.seq += 1;
            self.queue.insert((t, sid, self.seq), Delivery { msg: msg.clone(), recipients });
        }
    }

    fn deliver(&mut self, tick: u64, now: SimTime) -> Result<(), NetsimError> {
        while let Some(entry) = self.queue.first_entry() {
            if entry.key().0 > tick {
                break;
            }
            let d = entry.remove();
            for r in d.recipients {
                self.agents[r as usize].view.on_message(&d.msg, now.fraction())?;
            }
        }
        Ok(())
    }

    fn representative(&self, group: usize) -> usize {
        self.agents
            .iter()
            .position(|a| a.group == group && !a.byzantine)
            .or_else(|| self.agents.iter().position(|a| a.group == group))
            .expect("every group has an agent")
    }

    fn branch_weights(&self, registry: &Registry, group: usize) -> (f64, f64, f64) {
        let (mut honest, mut byz) = (0.0, 0.0);
        for r in registry.records() {
            if self.byzantine[r.id.index()] {
                byz += r.weight();
            } else if self.directive.group_of(r.id) == Some(group) {
                honest += r.weight();
            }
        }
        (honest, byz, registry.total_active_balance())
    }

    fn plan_adversary(&mut self, epoch: Epoch) -> Result<(), NetsimError> {
        let groups = self.directive.groups();
        self.mirror_active = match self.cfg.strategy {
            StrategyKind::Idle | StrategyKind::ProbBouncing => vec![false; groups],
            StrategyKind::DualActive if groups < 2 => vec![true],
            StrategyKind::DualActive => dual_active_step(groups, epoch)?,
            StrategyKind::SemiActive => {
                let finalize_now = (0..groups).all(|g| {
                    let st = self.agents[self.representative(g)].view.epoch_state().clone();
                    let (h, b, total) = self.branch_weights(&st.registry, g);
                    total > 0.0 && 3.0 * (h + b) >= 2.0 * total
                });
                semi_active_step(&mut self.schedule, groups, epoch, finalize_now)?
            }
        };
        Ok(())
    }

    fn record(&mut self, epoch: Epoch) {
        let store = self.store.clone();
        let store = store.read();
        for g in 0..self.directive.groups() {
            let v = &self.agents[self.representative(g)].view;
            let st = v.epoch_state();
            let head = store.id(&v.head()).map_or(0, |h| store.slot(h));
            let (_, byz, total) = self.branch_weights(&st.registry, g);
            let share = if total > 0.0 { byz / total } else { 0.0 };
            if share >= 1.0 / 3.0 && self.report.summary.threshold_cross_epoch.is_none() {
                self.report.summary.threshold_cross_epoch = Some(epoch);
            }
            self.report.rows.push(EpochRow {
                epoch,
                group: g,
                head_slot: head,
                justified_epoch: v.last_justified().epoch,
                finalized_epoch: v.last_finalized().epoch,
                total_active_balance: total,
                byzantine_share: share,
                in_leak: st.in_leak,
            });
            if self.cfg.record_validators {
                for r in st.registry.records() {
                    self.report.validator_rows.push(ValidatorRow {
                        epoch,
                        group: g,
                        validator: r.id.0,
                        stake: r.stake,
                        inactivity_score: r.inactivity_score,
                        active: r.active,
                    });
                }
            }
        }

        if self.report.summary.conflicting_finalization_epoch.is_none() && self.finals_conflict(&store) {
            self.report.summary.conflicting_finalization_epoch = Some(epoch);
        }

        for (i, a) in self.agents.iter().enumerate() {
            if a.byzantine {
                continue;
            }
            let log = a.view.justified_log();
            for j in &log[self.justified_cursor[i]..] {
                let prev = *self.justified_seen.entry(j.epoch).or_insert(j.block);
                if prev != j.block && self.report.summary.double_justification_epoch.is_none() {
                    self.report.summary.double_justification_epoch = Some(epoch);
                }
            }
            self.justified_cursor[i] = log.len();
        }
        self.report.summary.epochs_run = epoch;
    }

    /// Whether the latest finalized checkpoints of the honest views, or
    /// any view's own successive ones, fail to lie on one chain.
    fn finals_conflict(&self, store: &BlockStore) -> bool {
        let node = |c: &CheckpointRef| -> Option<NodeId> { store.id(&c.block) };
        let comparable = |a: NodeId, b: NodeId| store.is_ancestor(a, b) || store.is_ancestor(b, a);
        let mut latest: Vec<NodeId> = Vec::new();
        for a in self.agents.iter().filter(|a| !a.byzantine) {
            let log = a.view.finalized_log();
            if log.len() >= 2 {
                if let (Some(x), Some(y)) = (node(&log[log.len() - 2]), node(&log[log.len() - 1])) {
                    if !store.is_ancestor(x, y) {
                        return true;
                    }
                }
            }
            if let Some(n) = node(&a.view.last_finalized()) {
                if !latest.contains(&n) {
                    latest.push(n);
                }
            }
        }
        for (i, &x) in latest.iter().enumerate() {
            for &y in &latest[i + 1..] {
                if !comparable(x, y) {
                    return true;
                }
            }
        }
        false
    }
}
