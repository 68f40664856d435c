//! Exhaustive candidate oracle.

use std::collections::{BTreeMap, BTreeSet};

use crate::geo::{is_candidate, NodeId};

use super::scenario::{NodeSpec, Scenario};

/// For every live node, the set of live nodes whose areas overlap its own.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    map: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl GroundTruth {
    /// Checks every pair: O(n²).
    pub fn from_nodes(nodes: &[NodeSpec]) -> Self {
        let areas: Vec<_> = nodes.iter().map(|n| (n.id, n.area())).collect();
        let mut map: BTreeMap<NodeId, BTreeSet<NodeId>> =
            areas.iter().map(|(id, _)| (*id, BTreeSet::new())).collect();
        for (i, (a, area_a)) in areas.iter().enumerate() {
            for (b, area_b) in &areas[i + 1..] {
                if is_candidate(area_a, area_b) {
                    map.get_mut(a).expect("present").insert(*b);
                    map.get_mut(b).expect("present").insert(*a);
                }
            }
        }
        GroundTruth { map }
    }

    pub fn candidates(&self, id: NodeId) -> Option<&BTreeSet<NodeId>> {
        self.map.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.map.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.map.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn mean_size(&self) -> f64 {
        if self.map.is_empty() {
            return 0.0;
        }
        self.map.values().map(BTreeSet::len).sum::<usize>() as f64 / self.map.len() as f64
    }

    pub fn is_symmetric(&self) -> bool {
        self.map.iter().all(|(a, set)| {
            set.iter()
                .all(|b| self.map.get(b).is_some_and(|back| back.contains(a)))
        })
    }

    /// Unordered candidate pairs, smaller id first.
    pub fn pairs(&self) -> BTreeSet<(NodeId, NodeId)> {
        self.map
            .iter()
            .flat_map(|(a, set)| set.iter().filter(move |b| a < *b).map(move |b| (*a, *b)))
            .collect()
    }

    pub(crate) fn insert_node(&mut self, node: &NodeSpec, others: &[NodeSpec]) {
        let area = node.area();
        let mut mine = BTreeSet::new();
        for o in others {
            if o.id != node.id && is_candidate(&area, &o.area()) {
                mine.insert(o.id);
                self.map.entry(o.id).or_default().insert(node.id);
            }
        }
        self.map.insert(node.id, mine);
    }

    pub(crate) fn remove_node(&mut self, id: NodeId) {
        if let Some(set) = self.map.remove(&id) {
            for other in set {
                if let Some(back) = self.map.get_mut(&other) {
                    back.remove(&id);
                }
            }
        }
    }
}

/// Ground truth over the nodes alive at `round`.
pub fn ground_truth(scenario: &Scenario, round: u64) -> GroundTruth {
    GroundTruth::from_nodes(&scenario.alive_at(round))
}
