//! Channel assignment on top of discovered candidate lists.
//!
//! Candidate lists become a weighted interference graph. [`greedy_assign`]
//! colors it with `k` channels, and [`HintState`] decides on each access
//! point whether a channel hint from a neighbor is worth keeping.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geo::NodeId;
use crate::overlay::CandidateList;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectrumError {
    #[error("need at least one channel")]
    NoChannels,
    #[error("channel {channel} outside 0..{channels}")]
    ChannelOutOfRange { channel: usize, channels: usize },
    #[error("graph of {0} nodes is too large for exhaustive search")]
    TooLarge(usize),
}

const RESTARTS: usize = 64;
const RESTART_SEED: u64 = 0x6368_616e;

/// Undirected graph; edge weight is how much two nodes hurt each other on a
/// shared channel.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InterferenceGraph {
    nodes: BTreeSet<NodeId>,
    edges: BTreeMap<NodeId, BTreeMap<NodeId, f64>>,
}

impl InterferenceGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// One edge per pair where either list names the other, weighted by the
    /// larger of the reported utilities.
    pub fn from_candidate_lists<'a>(lists: impl IntoIterator<Item = &'a CandidateList>) -> Self {
        let mut g = InterferenceGraph::new();
        for cl in lists {
            g.add_node(cl.owner);
            for (item, utility) in &cl.entries {
                g.add_edge(cl.owner, item.id, utility.value());
            }
        }
        g
    }

    pub fn add_node(&mut self, id: NodeId) {
        self.nodes.insert(id);
    }

    /// Adds or raises the weight of edge `a`–`b`. Self loops are ignored.
    pub fn add_edge(&mut self, a: NodeId, b: NodeId, weight: f64) {
        if a == b {
            return;
        }
        self.nodes.insert(a);
        self.nodes.insert(b);
        for (x, y) in [(a, b), (b, a)] {
            let w = self.edges.entry(x).or_default().entry(y).or_insert(weight);
            *w = w.max(weight);
        }
    }

    pub fn weight(&self, a: NodeId, b: NodeId) -> Option<f64> {
        self.edges.get(&a).and_then(|m| m.get(&b)).copied()
    }

    pub fn neighbors(&self, a: NodeId) -> impl Iterator<Item = (NodeId, f64)> + '_ {
        self.edges.get(&a).into_iter().flatten().map(|(b, w)| (*b, *w))
    }

    pub fn weighted_degree(&self, a: NodeId) -> f64 {
        self.neighbors(a).fold(0.0, |acc, (_, w)| acc + w)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().copied()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.values().map(BTreeMap::len).sum::<usize>() / 2
    }
}

/// A channel per node.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    pub channels: usize,
    pub of: BTreeMap<NodeId, usize>,
}

impl Assignment {
    pub fn new(channels: usize) -> Self {
        Assignment {
            channels,
            of: BTreeMap::new(),
        }
    }

    pub fn get(&self, id: NodeId) -> Option<usize> {
        self.of.get(&id).copied()
    }

    pub fn set(&mut self, id: NodeId, channel: usize) -> Result<(), SpectrumError> {
        if channel >= self.channels {
            return Err(SpectrumError::ChannelOutOfRange {
                channel,
                channels: self.channels,
            });
        }
        self.of.insert(id, channel);
        Ok(())
    }

    /// `node_id,channel,conflict_weight`, one row per node.
    pub fn to_csv(&self, g: &InterferenceGraph) -> String {
        let mut out = String::from("node_id,channel,conflict_weight\n");
        for (id, ch) in &self.of {
            let _ = writeln!(out, "{},{},{}", id, ch, node_conflict(g, self, *id));
        }
        out
    }
}

/// Weight of `id`'s edges to neighbors on its own channel.
pub fn node_conflict(g: &InterferenceGraph, a: &Assignment, id: NodeId) -> f64 {
    let Some(ch) = a.get(id) else { return 0.0 };
    g.neighbors(id)
        .filter(|(b, _)| a.get(*b) == Some(ch))
        .fold(0.0, |acc, (_, w)| acc + w)
}

/// Sum of the weights of edges whose ends share a channel.
pub fn total_conflict(g: &InterferenceGraph, a: &Assignment) -> f64 {
    g.nodes().fold(0.0, |acc, id| acc + node_conflict(g, a, id)) / 2.0
}

fn cost_on(g: &InterferenceGraph, a: &Assignment, id: NodeId, channel: usize) -> f64 {
    g.neighbors(id)
        .filter(|(b, _)| a.get(*b) == Some(channel))
        .fold(0.0, |acc, (_, w)| acc + w)
}

fn cheapest(g: &InterferenceGraph, a: &Assignment, id: NodeId) -> (usize, f64) {
    (0..a.channels)
        .map(|c| (c, cost_on(g, a, id, c)))
        .fold((0, f64::INFINITY), |best, (c, w)| if w < best.1 { (c, w) } else { best })
}

/// Places one node at a time on its cheapest channel (lowest channel on
/// ties). The next node is the most constrained one: the highest cheapest
/// cost, then the most distinct channels already blocked by placed
/// neighbors, then the heaviest weighted degree, then the smallest id.
/// Then a local search moves single nodes and edge pairs while that lowers
/// the total, restarted from a few seeded perturbations of the best result.
pub fn greedy_assign(g: &InterferenceGraph, k: usize) -> Result<Assignment, SpectrumError> {
    if k == 0 {
        return Err(SpectrumError::NoChannels);
    }
    let mut a = Assignment::new(k);
    let mut open: BTreeSet<NodeId> = g.nodes().collect();
    while !open.is_empty() {
        let mut pick: Option<(NodeId, f64, usize, f64)> = None;
        for &id in &open {
            let (_, cost) = cheapest(g, &a, id);
            let blocked: BTreeSet<usize> = g.neighbors(id).filter_map(|(b, _)| a.get(b)).collect();
            let key = (id, cost, blocked.len(), g.weighted_degree(id));
            let better = match pick {
                None => true,
                Some(p) => key
                    .1
                    .total_cmp(&p.1)
                    .then(key.2.cmp(&p.2))
                    .then(key.3.total_cmp(&p.3))
                    .is_gt(),
            };
            if better {
                pick = Some(key);
            }
        }
        let (id, ..) = pick.expect("open is non-empty");
        let (c, _) = cheapest(g, &a, id);
        a.of.insert(id, c);
        open.remove(&id);
    }
    improve(g, &mut a);
    let mut best = total_conflict(g, &a);
    if g.node_count() < 2 {
        return Ok(a);
    }
    // perturb a few nodes and search again; keep strict improvements
    let nodes: Vec<NodeId> = g.nodes().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);
    for _ in 0..RESTARTS {
        if best == 0.0 {
            break;
        }
        let mut b = a.clone();
        for _ in 0..2 {
            let id = nodes[rng.random_range(0..nodes.len())];
            b.of.insert(id, rng.random_range(0..k));
        }
        improve(g, &mut b);
        let cost = total_conflict(g, &b);
        if cost < best {
            a = b;
            best = cost;
        }
    }
    Ok(a)
}

/// Local search: move one node, or both ends of an edge, whenever that
/// strictly lowers the total conflict. Each accepted move lowers the total,
/// so this terminates.
fn improve(g: &InterferenceGraph, a: &mut Assignment) {
    let nodes: Vec<NodeId> = g.nodes().collect();
    let edges: Vec<(NodeId, NodeId, f64)> = nodes
        .iter()
        .flat_map(|&x| g.neighbors(x).filter(move |(y, _)| x < *y).map(move |(y, w)| (x, y, w)))
        .collect();
    let gain_needed = |here: f64| 1e-12 * here.abs().max(1.0);
    loop {
        let mut moved = false;
        for &id in &nodes {
            let cur = a.get(id).expect("assigned");
            let here = cost_on(g, a, id, cur);
            let (c, w) = cheapest(g, a, id);
            if w < here - gain_needed(here) {
                a.of.insert(id, c);
                moved = true;
            }
        }
        for &(x, y, wxy) in &edges {
            let (cx, cy) = (a.get(x).expect("assigned"), a.get(y).expect("assigned"));
            let shared = if cx == cy { wxy } else { 0.0 };
            let here = cost_on(g, a, x, cx) + cost_on(g, a, y, cy) - shared;
            let mut best = (cx, cy, here);
            for nx in 0..a.channels {
                for ny in 0..a.channels {
                    // costs against everyone but the partner, which is moving too
                    let ox = cost_on(g, a, x, nx) - if a.get(y) == Some(nx) { wxy } else { 0.0 };
                    let oy = cost_on(g, a, y, ny) - if a.get(x) == Some(ny) { wxy } else { 0.0 };
                    let total = ox + oy + if nx == ny { wxy } else { 0.0 };
                    if total < best.2 - gain_needed(here) {
                        best = (nx, ny, total);
                    }
                }
            }
            if (best.0, best.1) != (cx, cy) {
                a.of.insert(x, best.0);
                a.of.insert(y, best.1);
                moved = true;
            }
        }
        if !moved {
            return;
        }
    }
}

/// Exhaustive minimum of [`total_conflict`]; `k^n` assignments, so only for
/// small graphs.
pub fn brute_force_assign(g: &InterferenceGraph, k: usize) -> Result<(Assignment, f64), SpectrumError> {
    if k == 0 {
        return Err(SpectrumError::NoChannels);
    }
    let nodes: Vec<NodeId> = g.nodes().collect();
    let n = nodes.len();
    let total = (k as u128).checked_pow(n as u32).filter(|&t| t <= 20_000_000).ok_or(SpectrumError::TooLarge(n))?;
    let mut best = (Assignment::new(k), f64::INFINITY);
    let mut a = Assignment::new(k);
    for code in 0..total {
        let mut rest = code;
        for id in &nodes {
            a.of.insert(*id, (rest % k as u128) as usize);
            rest /= k as u128;
        }
        let c = total_conflict(g, &a);
        if c < best.1 {
            best = (a.clone(), c);
        }
    }
    if n == 0 {
        best.1 = 0.0;
    }
    Ok(best)
}

/// Where an access point stands with respect to channel hints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HintMode {
    /// On its baseline channel, open to hints.
    Settled,
    /// Trying a hinted channel for one round.
    Following,
    /// Trying a random channel other than the failed hint for one round.
    Exploring,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HintPolicy {
    pub channels: usize,
    /// Chance of trying a random other channel after a hint fails instead
    /// of going straight back.
    pub explore_prob: f64,
}

impl HintPolicy {
    pub fn new(channels: usize) -> Self {
        HintPolicy {
            channels,
            explore_prob: 0.2,
        }
    }
}

/// Per access point controller: hints are tried, kept only when quality of
/// experience beats the baseline, otherwise dropped after one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HintState {
    pub baseline_channel: usize,
    pub baseline_qoe: f64,
    pub current: usize,
    pub mode: HintMode,
}

impl HintState {
    pub fn new(channel: usize) -> Self {
        HintState {
            baseline_channel: channel,
            baseline_qoe: f64::NEG_INFINITY,
            current: channel,
            mode: HintMode::Settled,
        }
    }

    /// Feeds the quality measured on `current` during the last round and an
    /// optional new hint; returns the channel to use next round.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        hint: Option<usize>,
        observed_qoe: f64,
        policy: &HintPolicy,
        rng: &mut R,
    ) -> usize {
        match self.mode {
            HintMode::Settled => {
                self.baseline_qoe = observed_qoe;
                if let Some(h) = hint.filter(|&h| h < policy.channels && h != self.current) {
                    self.current = h;
                    self.mode = HintMode::Following;
                }
            }
            HintMode::Following | HintMode::Exploring if observed_qoe > self.baseline_qoe => {
                self.baseline_channel = self.current;
                self.baseline_qoe = observed_qoe;
                self.mode = HintMode::Settled;
            }
            HintMode::Following => {
                let others: Vec<usize> = (0..policy.channels)
                    .filter(|&c| c != self.current && c != self.baseline_channel)
                    .collect();
                if !others.is_empty() && rng.random_bool(policy.explore_prob.clamp(0.0, 1.0)) {
                    self.current = others[rng.random_range(0..others.len())];
                    self.mode = HintMode::Exploring;
                } else {
                    self.current = self.baseline_channel;
                    self.mode = HintMode::Settled;
                }
            }
            HintMode::Exploring => {
                self.current = self.baseline_channel;
                self.mode = HintMode::Settled;
            }
        }
        self.current
    }
}

/// Free-function form of [`HintState::step`].
pub fn qoe_step<R: Rng + ?Sized>(
    state: &mut HintState,
    hint: Option<usize>,
    observed_qoe: f64,
    policy: &HintPolicy,
    rng: &mut R,
) -> usize {
    state.step(hint, observed_qoe, policy, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_graph(n: u64, p: f64, rng: &mut ChaCha8Rng) -> InterferenceGraph {
        let mut g = InterferenceGraph::new();
        for a in 0..n {
            g.add_node(NodeId(a));
            for b in a + 1..n {
                if rng.random_bool(p) {
                    g.add_edge(NodeId(a), NodeId(b), rng.random_range(0.1..10.0));
                }
            }
        }
        g
    }

    #[test]
    fn empty_graph() {
        let g = InterferenceGraph::new();
        let a = greedy_assign(&g, 3).unwrap();
        assert!(a.of.is_empty());
        assert_eq!(total_conflict(&g, &a), 0.0);
        assert_eq!(brute_force_assign(&g, 3).unwrap().1, 0.0);
    }

    #[test]
    fn zero_channels() {
        assert_eq!(greedy_assign(&InterferenceGraph::new(), 0), Err(SpectrumError::NoChannels));
    }

    #[test]
    fn triangle_on_three_channels() {
        let mut g = InterferenceGraph::new();
        g.add_edge(NodeId(0), NodeId(1), 1.0);
        g.add_edge(NodeId(1), NodeId(2), 1.0);
        g.add_edge(NodeId(0), NodeId(2), 1.0);
        let a = greedy_assign(&g, 3).unwrap();
        assert_eq!(total_conflict(&g, &a), 0.0);
        let a = greedy_assign(&g, 2).unwrap();
        assert_eq!(total_conflict(&g, &a), 1.0);
    }

    #[test]
    fn edges_keep_the_larger_weight() {
        let mut g = InterferenceGraph::new();
        g.add_edge(NodeId(0), NodeId(1), 2.0);
        g.add_edge(NodeId(1), NodeId(0), 5.0);
        g.add_edge(NodeId(1), NodeId(1), 9.0);
        assert_eq!(g.weight(NodeId(0), NodeId(1)), Some(5.0));
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn channels_are_range_checked() {
        let mut a = Assignment::new(3);
        assert!(a.set(NodeId(0), 3).is_err());
        a.set(NodeId(0), 2).unwrap();
    }

    #[test]
    fn greedy_never_beats_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..30 {
            let g = random_graph(7, 0.6, &mut rng);
            let greedy = total_conflict(&g, &greedy_assign(&g, 3).unwrap());
            let (best, opt) = brute_force_assign(&g, 3).unwrap();
            assert!((total_conflict(&g, &best) - opt).abs() < 1e-9);
            assert!(greedy >= opt - 1e-9);
        }
    }

    #[test]
    fn csv_export() {
        let mut g = InterferenceGraph::new();
        g.add_edge(NodeId(1), NodeId(2), 4.0);
        let mut a = Assignment::new(2);
        a.set(NodeId(1), 0).unwrap();
        a.set(NodeId(2), 0).unwrap();
        assert_eq!(a.to_csv(&g), "node_id,channel,conflict_weight\n1,0,4\n2,0,4\n");
    }

    #[test]
    fn helpful_hint_is_kept() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let policy = HintPolicy::new(3);
        let mut s = HintState::new(0);
        assert_eq!(s.step(Some(2), -5.0, &policy, &mut rng), 2);
        assert_eq!(s.mode, HintMode::Following);
        assert_eq!(s.step(None, -1.0, &policy, &mut rng), 2);
        assert_eq!(s.mode, HintMode::Settled);
        assert_eq!(s.baseline_channel, 2);
    }

    #[test]
    fn harmful_hint_is_dropped_after_one_round() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let policy = HintPolicy { explore_prob: 0.0, ..HintPolicy::new(3) };
        let mut s = HintState::new(0);
        s.step(Some(1), -1.0, &policy, &mut rng);
        assert_eq!(s.step(None, -4.0, &policy, &mut rng), 0);
        assert_eq!(s.mode, HintMode::Settled);
    }

    #[test]
    fn exploration_avoids_the_failed_hint() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let policy = HintPolicy { explore_prob: 1.0, ..HintPolicy::new(3) };
        let mut s = HintState::new(0);
        s.step(Some(1), -1.0, &policy, &mut rng);
        assert_eq!(s.step(None, -4.0, &policy, &mut rng), 2);
        assert_eq!(s.mode, HintMode::Exploring);
        assert_eq!(s.step(None, -3.0, &policy, &mut rng), 0);
    }

    #[test]
    fn hints_for_the_current_channel_are_ignored() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let policy = HintPolicy::new(3);
        let mut s = HintState::new(1);
        assert_eq!(s.step(Some(1), 0.0, &policy, &mut rng), 1);
        assert_eq!(s.step(Some(7), 0.0, &policy, &mut rng), 1);
        assert_eq!(s.mode, HintMode::Settled);
    }
}
