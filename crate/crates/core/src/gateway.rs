//! Agents that speak for access points other than themselves.
//!
//! Behind a firewall one agent represents every access point of the site:
//! it finds them with a broadcast probe on the local network, registers each
//! under a [`CompositeId`] (agent endpoint plus a locally unique id) and
//! emits their discovery items with its own endpoint as the address.
//!
//! Privacy nodes use the same indirection across the overlay: each one
//! picks a random partner among the privacy nodes with spare capacity, and
//! that partner runs the agent on its behalf. Who fronts whom is known only
//! to the two parties; the [`DelegationTable`] is local state and is never
//! gossiped.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::IpAddr;

use rand::seq::IndexedRandom;
use rand::Rng;
use thiserror::Error;

use crate::geo::NodeId;
use crate::wire::DiscoveryItem;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("CapacityExceededError: agent {0} has no spare slot")]
    CapacityExceeded(IpAddr),
    #[error("DuplicateLocalIdError: {0} is already registered")]
    DuplicateLocalId(CompositeId),
    #[error("NoEligibleDelegateError: no privacy node other than {0} has spare capacity")]
    NoEligibleDelegate(NodeId),
    #[error("node {0} cannot delegate to itself")]
    SelfDelegation(NodeId),
}

/// Agent endpoint plus an identifier unique behind that agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CompositeId {
    pub agent: IpAddr,
    pub local_id: u64,
}

impl fmt::Display for CompositeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{:012x}", self.agent, self.local_id)
    }
}

/// Local id derived from a 48-bit hardware address.
pub fn local_id_from_mac(mac: [u8; 6]) -> u64 {
    mac.iter().fold(0u64, |acc, &b| (acc << 8) | u64::from(b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Registration {
    original: DiscoveryItem,
    emitted: DiscoveryItem,
}

/// Access points registered behind agents, and each agent's spare slots.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgentRegistry {
    entries: BTreeMap<CompositeId, Registration>,
    spare: BTreeMap<IpAddr, u32>,
}

impl AgentRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets how many more access points `agent` is willing to represent.
    pub fn announce_capacity(&mut self, agent: IpAddr, slots: u32) {
        self.spare.insert(agent, slots);
    }

    pub fn spare_slots(&self, agent: IpAddr) -> u32 {
        self.spare.get(&agent).copied().unwrap_or(0)
    }

    /// Registers `ap` behind `agent`. Without an explicit `local_id` the
    /// smallest unused one is assigned.
    pub fn register_ap(
        &mut self,
        agent: IpAddr,
        ap: DiscoveryItem,
        local_id: Option<u64>,
    ) -> Result<CompositeId, GatewayError> {
        if self.spare_slots(agent) == 0 {
            return Err(GatewayError::CapacityExceeded(agent));
        }
        let local_id = match local_id {
            Some(id) => id,
            None => (0..)
                .find(|&id| !self.entries.contains_key(&CompositeId { agent, local_id: id }))
                .expect("u64 ids do not run out"),
        };
        let cid = CompositeId { agent, local_id };
        if self.entries.contains_key(&cid) {
            return Err(GatewayError::DuplicateLocalId(cid));
        }
        self.entries.insert(
            cid,
            Registration {
                original: ap,
                emitted: ap.with_address(agent),
            },
        );
        *self.spare.get_mut(&agent).expect("checked above") -= 1;
        Ok(cid)
    }

    pub fn unregister(&mut self, cid: &CompositeId) -> Option<DiscoveryItem> {
        let reg = self.entries.remove(cid)?;
        *self.spare.entry(cid.agent).or_insert(0) += 1;
        Some(reg.original)
    }

    /// The access point as it described itself.
    pub fn resolve(&self, cid: &CompositeId) -> Option<&DiscoveryItem> {
        self.entries.get(cid).map(|r| &r.original)
    }

    /// The item the agent gossips for this access point.
    pub fn emitted(&self, cid: &CompositeId) -> Option<&DiscoveryItem> {
        self.entries.get(cid).map(|r| &r.emitted)
    }

    /// Maps an overlay node id seen in a discovery item back to the access
    /// point behind `agent`.
    pub fn lookup(&self, agent: IpAddr, node: NodeId) -> Option<CompositeId> {
        self.entries
            .iter()
            .find(|(cid, r)| cid.agent == agent && r.original.id == node)
            .map(|(cid, _)| *cid)
    }

    /// Every item `agent` emits, one per registered access point.
    pub fn emitted_by(&self, agent: IpAddr) -> Vec<DiscoveryItem> {
        self.entries
            .iter()
            .filter(|(cid, _)| cid.agent == agent)
            .map(|(_, r)| r.emitted)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        for (cid, r) in &self.entries {
            if r.emitted.address() != cid.agent {
                return Err(format!("{cid} emits address {}", r.emitted.address()));
            }
        }
        Ok(())
    }

    /// Probes `domain` and registers every access point that answers.
    pub fn discover_and_register(
        &mut self,
        agent: IpAddr,
        domain: &BroadcastDomain,
    ) -> Result<Vec<CompositeId>, GatewayError> {
        local_discover(domain)
            .into_iter()
            .map(|ap| self.register_ap(agent, ap.item, Some(ap.local_id)))
            .collect()
    }
}

/// An access point on the agent's local network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Responder {
    pub local_id: u64,
    pub item: DiscoveryItem,
    pub alive: bool,
    /// How many copies of its reply reach the agent; more than one models a
    /// retransmission.
    pub replies: u32,
}

impl Responder {
    pub fn new(local_id: u64, item: DiscoveryItem) -> Self {
        Responder {
            local_id,
            item,
            alive: true,
            replies: 1,
        }
    }
}

/// A simulated broadcast domain.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BroadcastDomain {
    pub responders: Vec<Responder>,
}

impl BroadcastDomain {
    /// Sends one probe and returns the replies as they arrive, duplicates
    /// included.
    pub fn probe(&self) -> Vec<ApDescriptor> {
        self.responders
            .iter()
            .filter(|r| r.alive)
            .flat_map(|r| {
                std::iter::repeat_n(
                    ApDescriptor {
                        local_id: r.local_id,
                        item: r.item,
                    },
                    r.replies as usize,
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApDescriptor {
    pub local_id: u64,
    pub item: DiscoveryItem,
}

/// One broadcast probe; each live access point is reported once.
pub fn local_discover(domain: &BroadcastDomain) -> Vec<ApDescriptor> {
    let mut seen = BTreeSet::new();
    domain
        .probe()
        .into_iter()
        .filter(|ap| seen.insert(ap.local_id))
        .collect()
}

/// A privacy node offering to run agents for others.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolEntry {
    pub node: NodeId,
    pub capacity: u32,
}

/// Picks a partner for `node` uniformly among the other pool members with
/// spare capacity, and takes one slot from it.
pub fn select_delegate<R: Rng + ?Sized>(
    node: NodeId,
    pool: &mut [PoolEntry],
    rng: &mut R,
) -> Result<NodeId, GatewayError> {
    let eligible: Vec<usize> = pool
        .iter()
        .enumerate()
        .filter(|(_, e)| e.node != node && e.capacity > 0)
        .map(|(i, _)| i)
        .collect();
    let &pick = eligible
        .choose(rng)
        .ok_or(GatewayError::NoEligibleDelegate(node))?;
    pool[pick].capacity -= 1;
    Ok(pool[pick].node)
}

/// Who runs the agent for whom.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DelegationTable {
    delegate_of: BTreeMap<NodeId, NodeId>,
    fronted: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl DelegationTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn assign(&mut self, node: NodeId, delegate: NodeId) -> Result<(), GatewayError> {
        if node == delegate {
            return Err(GatewayError::SelfDelegation(node));
        }
        self.release(node);
        self.delegate_of.insert(node, delegate);
        self.fronted.entry(delegate).or_default().insert(node);
        Ok(())
    }

    pub fn release(&mut self, node: NodeId) -> Option<NodeId> {
        let delegate = self.delegate_of.remove(&node)?;
        if let Some(set) = self.fronted.get_mut(&delegate) {
            set.remove(&node);
            if set.is_empty() {
                self.fronted.remove(&delegate);
            }
        }
        Some(delegate)
    }

    pub fn delegate_of(&self, node: NodeId) -> Option<NodeId> {
        self.delegate_of.get(&node).copied()
    }

    pub fn fronted_by(&self, delegate: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.fronted.get(&delegate).into_iter().flatten().copied()
    }

    pub fn len(&self) -> usize {
        self.delegate_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delegate_of.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.delegate_of.iter().map(|(n, d)| (*n, *d))
    }
}

/// Every member of `privacy_nodes` picks a delegate among the others, each
/// offering `capacity` slots. Members for which no partner is left stay
/// undelegated and are returned in the second element.
pub fn delegate_all<R: Rng + ?Sized>(
    privacy_nodes: &[NodeId],
    capacity: u32,
    rng: &mut R,
) -> (DelegationTable, Vec<NodeId>) {
    let mut pool: Vec<PoolEntry> = privacy_nodes
        .iter()
        .map(|&node| PoolEntry { node, capacity })
        .collect();
    let mut table = DelegationTable::new();
    let mut stranded = Vec::new();
    for &node in privacy_nodes {
        match select_delegate(node, &mut pool, rng) {
            Ok(d) => table.assign(node, d).expect("select_delegate never returns the node itself"),
            Err(_) => stranded.push(node),
        }
    }
    (table, stranded)
}
