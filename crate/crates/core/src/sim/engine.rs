//! The round loop.
//!
//! Every live node, in a freshly shuffled order each round, runs one
//! push-pull exchange on the random layer and one on the ranking layer.
//! Items cross the simulated network as encoded 56-byte frames; descriptor
//! ages ride alongside as local metadata and are not counted as traffic.

use std::collections::{BTreeMap, BTreeSet};
use std::net::IpAddr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gateway::{delegate_all, select_delegate, DelegationTable, PoolEntry};
use crate::geo::NodeId;
use crate::overlay::{CandidateList, Profile, ProximityOverlay};
use crate::sampling::{PeerDescriptor, RandomView};
use crate::wire::{decode, encode, DiscoveryItem, Timestamp, FRAME_LEN};

use super::metrics::{MetricsSeries, RoundMetrics};
use super::scenario::{endpoint_of, ChurnKind, NodeSpec, PrivacyConfig, ProtocolParams, Scenario, ScenarioError};
use super::truth::GroundTruth;

/// Rounds a node must have been alive to count as settled.
pub const SETTLE_ROUNDS: u64 = 10;

const PRIVACY_SALT: u64 = 0x7072_6976_6163_7900;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("UnknownNodeError: node {0} is not alive")]
    UnknownNode(NodeId),
    #[error("node {0} is already alive")]
    DuplicateNode(NodeId),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

#[derive(Debug, Clone)]
struct NodeState {
    spec: NodeSpec,
    joined_round: u64,
    random: RandomView,
    overlay: ProximityOverlay,
}

impl NodeState {
    fn new(spec: NodeSpec, round: u64, params: &ProtocolParams) -> Self {
        NodeState {
            spec,
            joined_round: round,
            random: RandomView::new(spec.id, params.c_rand),
            overlay: ProximityOverlay::new(Profile::new(spec.id, spec.area()), params.overlay()),
        }
    }
}

#[derive(Debug, Clone)]
struct Privacy {
    cfg: PrivacyConfig,
    members: BTreeSet<NodeId>,
    table: DelegationTable,
    rng: ChaCha8Rng,
}

impl Privacy {
    fn advertised(&self, id: NodeId) -> IpAddr {
        endpoint_of(self.table.delegate_of(id).unwrap_or(id))
    }

    fn redraw(&mut self) {
        let members: Vec<NodeId> = self.members.iter().copied().collect();
        let (table, stranded) = delegate_all(&members, self.cfg.capacity, &mut self.rng);
        self.table = table;
        for s in stranded {
            self.members.remove(&s);
        }
    }

    fn leave(&mut self, id: NodeId) {
        if !self.members.remove(&id) {
            return;
        }
        self.table.release(id);
        let orphans: Vec<NodeId> = self.table.fronted_by(id).collect();
        for orphan in orphans {
            self.table.release(orphan);
            let mut pool: Vec<PoolEntry> = self
                .members
                .iter()
                .map(|&node| PoolEntry {
                    node,
                    capacity: self.cfg.capacity.saturating_sub(self.table.fronted_by(node).count() as u32),
                })
                .collect();
            match select_delegate(orphan, &mut pool, &mut self.rng) {
                Ok(d) => self.table.assign(orphan, d).expect("never self"),
                Err(_) => {
                    self.members.remove(&orphan);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    descriptors_sent: u64,
    descriptors_received: u64,
    bytes_sent: u64,
    bytes_received: u64,
    leaks: u64,
}

impl Tally {
    /// Puts `items` on the wire. Undelivered frames count as sent only.
    fn transmit(&mut self, privacy: Option<&Privacy>, items: &[DiscoveryItem], delivered: bool) -> Vec<DiscoveryItem> {
        let mut out = Vec::with_capacity(if delivered { items.len() } else { 0 });
        for item in items {
            let frame = encode(item);
            self.descriptors_sent += 1;
            self.bytes_sent += FRAME_LEN as u64;
            if let Some(p) = privacy {
                if p.members.contains(&item.id) && item.address() == endpoint_of(item.id) {
                    self.leaks += 1;
                }
            }
            if delivered {
                self.descriptors_received += 1;
                self.bytes_received += frame.as_bytes().len() as u64;
                out.push(decode(&frame).expect("locally built items always decode"));
            }
        }
        out
    }
}

fn own_item(privacy: Option<&Privacy>, spec: &NodeSpec, now: Timestamp) -> DiscoveryItem {
    let address = privacy.map_or_else(|| spec.endpoint(), |p| p.advertised(spec.id));
    DiscoveryItem::new(spec.id, spec.area(), address, now)
}

fn with_ages(items: Vec<DiscoveryItem>, sent: &[PeerDescriptor]) -> Vec<PeerDescriptor> {
    items
        .into_iter()
        .zip(sent)
        .map(|(item, d)| PeerDescriptor { item, age: d.age })
        .collect()
}

/// A running simulation.
#[derive(Debug, Clone)]
pub struct Simulation {
    scenario: Scenario,
    params: ProtocolParams,
    rng: ChaCha8Rng,
    round: u64,
    churn_cursor: usize,
    nodes: BTreeMap<NodeId, NodeState>,
    truth: GroundTruth,
    privacy: Option<Privacy>,
    tally: Tally,
    metrics: MetricsSeries,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Self, ScenarioError> {
        scenario.validate()?;
        let params = scenario.params;
        let mut sim = Simulation {
            rng: ChaCha8Rng::seed_from_u64(scenario.rng_seed),
            params,
            round: 0,
            churn_cursor: 0,
            nodes: BTreeMap::new(),
            truth: GroundTruth::from_nodes(&scenario.nodes),
            privacy: None,
            tally: Tally::default(),
            metrics: MetricsSeries::new(params.period_seconds),
            scenario,
        };
        for spec in &sim.scenario.nodes {
            sim.nodes.insert(spec.id, NodeState::new(*spec, 0, &params));
        }
        if let Some(cfg) = sim.scenario.privacy {
            let mut rng = ChaCha8Rng::seed_from_u64(sim.scenario.rng_seed ^ PRIVACY_SALT);
            let ids: Vec<NodeId> = sim.nodes.keys().copied().collect();
            let count = (cfg.fraction * ids.len() as f64).round() as usize;
            let members = ids.choose_multiple(&mut rng, count).copied().collect();
            let mut p = Privacy {
                cfg,
                members,
                table: DelegationTable::new(),
                rng,
            };
            p.redraw();
            sim.privacy = Some(p);
        }
        let now = sim.now();
        let seeds: Vec<NodeSpec> = sim
            .scenario
            .seeds
            .iter()
            .filter_map(|s| sim.nodes.get(s).map(|n| n.spec))
            .collect();
        for node in sim.nodes.values_mut() {
            let items: Vec<DiscoveryItem> = seeds
                .iter()
                .filter(|s| s.id != node.spec.id)
                .map(|s| own_item(sim.privacy.as_ref(), s, now))
                .collect();
            if !items.is_empty() {
                node.random.bootstrap(&items).expect("non-empty");
            }
        }
        Ok(sim)
    }

    fn now(&self) -> Timestamp {
        Timestamp(self.scenario.epoch_ms + self.round * self.params.period_ms())
    }

    /// The round the next [`step`](Self::step) will run.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn live_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeSpec> {
        self.nodes.get(&id).map(|n| &n.spec)
    }

    pub fn random_view(&self, id: NodeId) -> Option<&RandomView> {
        self.nodes.get(&id).map(|n| &n.random)
    }

    pub fn overlay(&self, id: NodeId) -> Option<&ProximityOverlay> {
        self.nodes.get(&id).map(|n| &n.overlay)
    }

    /// Exact candidate sets of the live nodes, maintained across churn.
    pub fn ground_truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn metrics(&self) -> &MetricsSeries {
        &self.metrics
    }

    pub fn into_metrics(self) -> MetricsSeries {
        self.metrics
    }

    pub fn candidate_list(&self, id: NodeId) -> Option<CandidateList> {
        self.nodes.get(&id).map(|n| n.overlay.candidate_list(&n.random))
    }

    pub fn candidate_lists(&self) -> BTreeMap<NodeId, CandidateList> {
        self.nodes
            .iter()
            .map(|(id, n)| (*id, n.overlay.candidate_list(&n.random)))
            .collect()
    }

    /// Nodes hiding their endpoint behind a delegate.
    pub fn privacy_members(&self) -> Vec<NodeId> {
        self.privacy
            .as_ref()
            .map(|p| p.members.iter().copied().collect())
            .unwrap_or_default()
    }

    pub fn delegate_of(&self, id: NodeId) -> Option<NodeId> {
        self.privacy.as_ref().and_then(|p| p.table.delegate_of(id))
    }

    /// The address a node puts in its own discovery items.
    pub fn advertised_endpoint(&self, id: NodeId) -> Option<IpAddr> {
        self.nodes.get(&id).map(|n| own_item(self.privacy.as_ref(), &n.spec, Timestamp(0)).address())
    }

    /// Applies churn now, before the next round runs.
    pub fn apply_churn(&mut self, events: &[ChurnKind]) -> Result<(), SimError> {
        for ev in events {
            match *ev {
                ChurnKind::Join(spec) => self.join(spec)?,
                ChurnKind::Leave(id) => self.leave(id)?,
            }
        }
        Ok(())
    }

    fn join(&mut self, spec: NodeSpec) -> Result<(), SimError> {
        if self.nodes.contains_key(&spec.id) {
            return Err(SimError::DuplicateNode(spec.id));
        }
        let others: Vec<NodeSpec> = self.nodes.values().map(|n| n.spec).collect();
        self.truth.insert_node(&spec, &others);
        let now = self.now();
        let mut contacts: Vec<NodeSpec> = self
            .scenario
            .seeds
            .iter()
            .filter_map(|s| self.nodes.get(s).map(|n| n.spec))
            .collect();
        if contacts.is_empty() {
            contacts.extend(others.choose(&mut self.rng).copied());
        }
        let mut state = NodeState::new(spec, self.round, &self.params);
        let items: Vec<DiscoveryItem> = contacts
            .iter()
            .map(|s| own_item(self.privacy.as_ref(), s, now))
            .collect();
        if !items.is_empty() {
            state.random.bootstrap(&items).expect("non-empty");
        }
        self.nodes.insert(spec.id, state);
        Ok(())
    }

    fn leave(&mut self, id: NodeId) -> Result<(), SimError> {
        let gone = self.nodes.remove(&id).ok_or(SimError::UnknownNode(id))?;
        self.truth.remove_node(id);
        if let Some(p) = &mut self.privacy {
            p.leave(id);
        }
        if self.params.graceful_leave {
            let peers: BTreeSet<NodeId> = gone
                .random
                .items()
                .map(|it| it.id)
                .chain(gone.overlay.view().entries().iter().map(|e| e.id()))
                .collect();
            for peer in peers {
                if let Some(n) = self.nodes.get_mut(&peer) {
                    n.random.remove(id);
                    n.overlay.forget(id);
                }
            }
        }
        Ok(())
    }

    pub fn run_rounds(&mut self, rounds: u64) {
        for _ in 0..rounds {
            self.step();
        }
    }

    /// Runs one round and returns its metrics.
    pub fn step(&mut self) -> &RoundMetrics {
        let round = self.round;
        while let Some(ev) = self.scenario.churn.get(self.churn_cursor).copied() {
            if ev.round > round {
                break;
            }
            self.churn_cursor += 1;
            if ev.round == round {
                // validate() guarantees the schedule replays cleanly
                self.apply_churn(&[ev.kind]).expect("validated schedule");
            }
        }
        if let Some(p) = &mut self.privacy {
            if let Some(d) = p.cfg.duration_rounds {
                if d > 0 && round > 0 && round % d == 0 {
                    p.redraw();
                }
            }
        }
        self.tally = Tally::default();
        let now = self.now();
        let mut order: Vec<NodeId> = self.nodes.keys().copied().collect();
        order.shuffle(&mut self.rng);
        for id in order {
            self.random_exchange(id, now);
            self.ranked_exchange(id, round, now);
        }
        let m = self.measure(round);
        self.metrics.rounds.push(m);
        self.round += 1;
        self.metrics.rounds.last().expect("just pushed")
    }

    fn random_exchange(&mut self, id: NodeId, now: Timestamp) {
        let Some(mut me) = self.nodes.remove(&id) else { return };
        let privacy = self.privacy.as_ref();
        let own = own_item(privacy, &me.spec, now);
        let half = self.params.buffer_half;
        if let Ok((partner, push)) = me.random.sample_exchange(own, half, self.params.partner, &mut self.rng) {
            let push_items: Vec<DiscoveryItem> = push.iter().map(|d| d.item).collect();
            match self.nodes.get_mut(&partner) {
                Some(peer) => {
                    let got = with_ages(self.tally.transmit(privacy, &push_items, true), &push);
                    let peer_own = own_item(privacy, &peer.spec, now);
                    let reply = peer.random.buffer(peer_own, half, Some(id), &mut self.rng);
                    peer.random.merge(&got);
                    peer.overlay.absorb(got.iter().map(|d| &d.item), now);
                    let reply_items: Vec<DiscoveryItem> = reply.iter().map(|d| d.item).collect();
                    let back = with_ages(self.tally.transmit(privacy, &reply_items, true), &reply);
                    me.random.merge(&back);
                    me.overlay.absorb(back.iter().map(|d| &d.item), now);
                }
                None => {
                    self.tally.transmit(privacy, &push_items, false);
                    me.random.remove(partner);
                    me.overlay.forget(partner);
                }
            }
        }
        self.nodes.insert(id, me);
    }

    fn ranked_exchange(&mut self, id: NodeId, round: u64, now: Timestamp) {
        let Some(mut me) = self.nodes.remove(&id) else { return };
        let privacy = self.privacy.as_ref();
        let sampled: Vec<DiscoveryItem> = me.random.items().copied().collect();
        me.overlay.absorb(&sampled, now);
        me.overlay.refresh_far(&me.random, &mut self.rng);
        if let Ok(target) = me.overlay.select_target(round, now, &mut self.rng) {
            let own = own_item(privacy, &me.spec, now);
            let push = me.overlay.buffer_for(&target, own, &me.random, now);
            match self.nodes.get_mut(&target.id) {
                Some(peer) => {
                    let got = self.tally.transmit(privacy, &push, true);
                    let peer_own = own_item(privacy, &peer.spec, now);
                    let reply = peer.overlay.buffer_for(&own, peer_own, &peer.random, now);
                    peer.overlay.absorb(&got, now);
                    let back = self.tally.transmit(privacy, &reply, true);
                    me.overlay.absorb(&back, now);
                }
                None => {
                    self.tally.transmit(privacy, &push, false);
                    me.random.remove(target.id);
                    me.overlay.forget(target.id);
                }
            }
        }
        self.nodes.insert(id, me);
    }

    fn measure(&self, round: u64) -> RoundMetrics {
        let mut sum = 0.0;
        let mut min: f64 = 1.0;
        let mut settled_sum = 0.0;
        let mut settled = 0usize;
        for (id, node) in &self.nodes {
            let cl = node.overlay.candidate_list(&node.random);
            let recall = match self.truth.candidates(*id) {
                Some(gt) if !gt.is_empty() => {
                    gt.iter().filter(|c| cl.contains(**c)).count() as f64 / gt.len() as f64
                }
                _ => 1.0,
            };
            sum += recall;
            min = min.min(recall);
            if round + 1 - node.joined_round >= SETTLE_ROUNDS {
                settled_sum += recall;
                settled += 1;
            }
        }
        let live = self.nodes.len();
        RoundMetrics {
            round,
            live_nodes: live,
            mean_recall: if live == 0 { 1.0 } else { sum / live as f64 },
            min_recall: min,
            settled_mean_recall: (settled > 0).then(|| settled_sum / settled as f64),
            settled_nodes: settled,
            descriptors_sent: self.tally.descriptors_sent,
            descriptors_received: self.tally.descriptors_received,
            bytes_sent: self.tally.bytes_sent,
            bytes_received: self.tally.bytes_received,
            privacy_leaks: self.tally.leaks,
        }
    }

    /// Checks every view's structural invariants.
    pub fn check_invariants(&self) -> Result<(), String> {
        for node in self.nodes.values() {
            node.random.check_invariants()?;
            node.overlay.view().check_invariants()?;
        }
        if let Some(p) = &self.privacy {
            for (n, d) in p.table.iter() {
                if n == d || !p.members.contains(&n) || !p.members.contains(&d) {
                    return Err(format!("bad delegation {n} -> {d}"));
                }
                if p.table.fronted_by(d).count() as u32 > p.cfg.capacity {
                    return Err(format!("delegate {d} over capacity"));
                }
            }
        }
        Ok(())
    }
}
