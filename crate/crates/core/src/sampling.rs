//! Gossip-based random peer sampling.
//!
//! Each node keeps a small [`RandomView`] of aged descriptors. Once per round
//! it picks a partner from the view, pushes its own fresh descriptor plus a
//! random slice of the view, and merges the partner's reply. Descriptors of
//! departed nodes stop being refreshed, grow old and fall out of the view.

use rand::seq::IndexedRandom;
use rand::Rng;
use thiserror::Error;

use crate::geo::NodeId;
use crate::wire::DiscoveryItem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SamplingError {
    #[error("EmptySeedError: a joining node needs at least one seed")]
    EmptySeed,
    #[error("EmptyViewError: no peer to exchange with")]
    EmptyView,
}

/// A discovery item together with the number of gossip rounds it has spent
/// in views since it was created.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeerDescriptor {
    pub item: DiscoveryItem,
    pub age: u32,
}

impl PeerDescriptor {
    pub fn fresh(item: DiscoveryItem) -> Self {
        PeerDescriptor { item, age: 0 }
    }

    pub fn id(&self) -> NodeId {
        self.item.id
    }

    /// Lower age wins; on equal age the fresher timestamp wins.
    fn supersedes(&self, other: &PeerDescriptor) -> bool {
        self.age < other.age || (self.age == other.age && self.item.timestamp > other.item.timestamp)
    }
}

/// How the exchange partner is picked from the view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PartnerSelection {
    Uniform,
    /// The entry with the highest age, ties broken uniformly at random.
    #[default]
    Oldest,
}

impl PartnerSelection {
    pub fn name(&self) -> &'static str {
        match self {
            PartnerSelection::Uniform => "uniform",
            PartnerSelection::Oldest => "oldest",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "uniform" => Some(PartnerSelection::Uniform),
            "oldest" => Some(PartnerSelection::Oldest),
            _ => None,
        }
    }
}

/// Bounded partial view of the overlay. Never holds the owner's own id and
/// holds at most one descriptor per node. Entries are kept sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomView {
    owner: NodeId,
    capacity: usize,
    entries: Vec<PeerDescriptor>,
}

impl RandomView {
    pub fn new(owner: NodeId, capacity: usize) -> Self {
        RandomView {
            owner,
            capacity,
            entries: Vec::with_capacity(capacity),
        }
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PeerDescriptor] {
        &self.entries
    }

    pub fn items(&self) -> impl Iterator<Item = &DiscoveryItem> {
        self.entries.iter().map(|d| &d.item)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.position(id).is_ok()
    }

    fn position(&self, id: NodeId) -> Result<usize, usize> {
        self.entries.binary_search_by_key(&id, |d| d.id())
    }

    pub fn remove(&mut self, id: NodeId) -> Option<PeerDescriptor> {
        self.position(id).ok().map(|i| self.entries.remove(i))
    }

    /// Seeds the view with age-0 descriptors. The owner's own id is skipped
    /// and duplicates keep their freshest timestamp. Returns the number of
    /// seeds accepted, which is zero when the node is its own only seed.
    pub fn bootstrap(&mut self, seeds: &[DiscoveryItem]) -> Result<usize, SamplingError> {
        if seeds.is_empty() {
            return Err(SamplingError::EmptySeed);
        }
        let before = self.entries.len();
        for seed in seeds {
            self.insert(PeerDescriptor::fresh(*seed));
        }
        self.truncate();
        Ok(self.entries.len().saturating_sub(before))
    }

    fn insert(&mut self, desc: PeerDescriptor) {
        if desc.id() == self.owner {
            return;
        }
        match self.position(desc.id()) {
            Ok(i) => {
                if desc.supersedes(&self.entries[i]) {
                    self.entries[i] = desc;
                }
            }
            Err(i) => self.entries.insert(i, desc),
        }
    }

    fn truncate(&mut self) {
        if self.entries.len() <= self.capacity {
            return;
        }
        self.entries.sort_by(|a, b| {
            a.age
                .cmp(&b.age)
                .then(b.item.timestamp.cmp(&a.item.timestamp))
                .then(a.id().cmp(&b.id()))
        });
        self.entries.truncate(self.capacity);
        self.entries.sort_by_key(|d| d.id());
    }

    pub fn select_partner<R: Rng + ?Sized>(
        &self,
        policy: PartnerSelection,
        rng: &mut R,
    ) -> Result<NodeId, SamplingError> {
        let pick = match policy {
            PartnerSelection::Uniform => self.entries.choose(rng),
            PartnerSelection::Oldest => {
                let oldest = self.entries.iter().map(|d| d.age).max();
                let pool: Vec<&PeerDescriptor> = self
                    .entries
                    .iter()
                    .filter(|d| Some(d.age) == oldest)
                    .collect();
                pool.choose(rng).copied()
            }
        };
        pick.map(|d| d.id()).ok_or(SamplingError::EmptyView)
    }

    /// Own descriptor first, then up to `half` random entries other than
    /// `exclude`.
    pub fn buffer<R: Rng + ?Sized>(
        &self,
        own: DiscoveryItem,
        half: usize,
        exclude: Option<NodeId>,
        rng: &mut R,
    ) -> Vec<PeerDescriptor> {
        let pool: Vec<&PeerDescriptor> = self
            .entries
            .iter()
            .filter(|d| Some(d.id()) != exclude)
            .collect();
        let mut out = Vec::with_capacity(half + 1);
        out.push(PeerDescriptor::fresh(own));
        out.extend(pool.choose_multiple(rng, half).map(|d| **d));
        out
    }

    /// Starts one exchange: returns the chosen partner and the push buffer.
    pub fn sample_exchange<R: Rng + ?Sized>(
        &self,
        own: DiscoveryItem,
        half: usize,
        policy: PartnerSelection,
        rng: &mut R,
    ) -> Result<(NodeId, Vec<PeerDescriptor>), SamplingError> {
        let partner = self.select_partner(policy, rng)?;
        Ok((partner, self.buffer(own, half, Some(partner), rng)))
    }

    /// Ages every held entry by one, then folds in `received`. Duplicates
    /// keep the lowest age; on overflow the oldest entries are dropped.
    pub fn merge(&mut self, received: &[PeerDescriptor]) {
        for d in &mut self.entries {
            d.age = d.age.saturating_add(1);
        }
        for d in received {
            self.insert(*d);
        }
        self.truncate();
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        if self.entries.len() > self.capacity {
            return Err(format!("view of {} over capacity {}", self.owner, self.capacity));
        }
        if self.contains(self.owner) {
            return Err(format!("view of {} holds its owner", self.owner));
        }
        if self.entries.windows(2).any(|w| w[0].id() >= w[1].id()) {
            return Err(format!("view of {} unsorted or duplicated", self.owner));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{CoordinationArea, GeoPoint};
    use crate::wire::{Timestamp, UNSPECIFIED_V4};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    use std::collections::BTreeMap;

    fn item(id: u64, ts: u64) -> DiscoveryItem {
        let area = CoordinationArea::new(GeoPoint::new(60.0, 10.0).unwrap(), 100.0).unwrap();
        DiscoveryItem::new(NodeId(id), area, UNSPECIFIED_V4, Timestamp(ts))
    }

    fn desc(id: u64, age: u32) -> PeerDescriptor {
        PeerDescriptor { item: item(id, 0), age }
    }

    #[test]
    fn bootstrap_single_seed() {
        let mut v = RandomView::new(NodeId(1), 30);
        assert_eq!(v.bootstrap(&[item(7, 0)]), Ok(1));
        assert_eq!(v.len(), 1);
        assert_eq!(v.entries()[0].age, 0);
    }

    #[test]
    fn bootstrap_skips_self_and_dedups() {
        let mut v = RandomView::new(NodeId(1), 30);
        v.bootstrap(&[item(1, 0), item(2, 5), item(2, 9), item(3, 1), item(2, 7)]).unwrap();
        assert_eq!(v.len(), 2);
        assert!(!v.contains(NodeId(1)));
        let two = v.entries().iter().find(|d| d.id() == NodeId(2)).unwrap();
        assert_eq!(two.item.timestamp, Timestamp(9));
    }

    #[test]
    fn bootstrap_without_seeds_fails() {
        let mut v = RandomView::new(NodeId(1), 30);
        assert_eq!(v.bootstrap(&[]), Err(SamplingError::EmptySeed));
        assert_eq!(v.bootstrap(&[item(1, 0)]), Ok(0));
    }

    #[test]
    fn single_entry_is_the_partner() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut v = RandomView::new(NodeId(1), 30);
        v.bootstrap(&[item(9, 0)]).unwrap();
        for policy in [PartnerSelection::Uniform, PartnerSelection::Oldest] {
            let (p, buf) = v.sample_exchange(item(1, 3), 15, policy, &mut rng).unwrap();
            assert_eq!(p, NodeId(9));
            assert_eq!(buf.len(), 1);
            assert_eq!(buf[0].item.id, NodeId(1));
        }
    }

    #[test]
    fn empty_view_has_no_partner() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = RandomView::new(NodeId(1), 30);
        assert_eq!(
            v.sample_exchange(item(1, 0), 15, PartnerSelection::Oldest, &mut rng),
            Err(SamplingError::EmptyView)
        );
    }

    #[test]
    fn oldest_policy_picks_max_age() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut v = RandomView::new(NodeId(0), 30);
        v.merge(&[desc(1, 3), desc(2, 8), desc(3, 1)]);
        for _ in 0..20 {
            assert_eq!(v.select_partner(PartnerSelection::Oldest, &mut rng), Ok(NodeId(2)));
        }
    }

    #[test]
    fn buffer_starts_with_own_descriptor() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut v = RandomView::new(NodeId(0), 30);
        v.merge(&(1..=30).map(|i| desc(i, 2)).collect::<Vec<_>>());
        for _ in 0..50 {
            let (p, buf) = v.sample_exchange(item(0, 1), 15, PartnerSelection::Uniform, &mut rng).unwrap();
            assert_eq!(buf[0].item.id, NodeId(0));
            assert_eq!(buf[0].age, 0);
            assert_eq!(buf.len(), 16);
            assert!(buf.iter().skip(1).all(|d| d.id() != p));
        }
    }

    #[test]
    fn uniform_partner_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut v = RandomView::new(NodeId(0), 50);
        v.merge(&(1..=50).map(|i| desc(i, 0)).collect::<Vec<_>>());
        let rounds = 10_000;
        let mut counts = BTreeMap::new();
        for _ in 0..rounds {
            let p = v.select_partner(PartnerSelection::Uniform, &mut rng).unwrap();
            *counts.entry(p).or_insert(0u32) += 1;
        }
        let expected = rounds as f64 / 50.0;
        let chi2: f64 = (1..=50)
            .map(|i| {
                let c = *counts.get(&NodeId(i)).unwrap_or(&0) as f64;
                (c - expected).powi(2) / expected
            })
            .sum();
        let p = 1.0 - ChiSquared::new(49.0).unwrap().cdf(chi2);
        assert!(p > 0.01, "chi2 {chi2}, p {p}");
    }

    #[test]
    fn merge_with_nothing_ages_entries() {
        let mut v = RandomView::new(NodeId(0), 30);
        v.merge(&[desc(1, 0), desc(2, 4)]);
        v.merge(&[]);
        let ages: Vec<u32> = v.entries().iter().map(|d| d.age).collect();
        assert_eq!(ages, vec![1, 5]);
    }

    #[test]
    fn merge_disjoint_halves() {
        let mut v = RandomView::new(NodeId(0), 30);
        v.merge(&(1..=15).map(|i| desc(i, 0)).collect::<Vec<_>>());
        v.merge(&(16..=30).map(|i| desc(i, 0)).collect::<Vec<_>>());
        assert_eq!(v.len(), 30);
        v.check_invariants().unwrap();
    }

    #[test]
    fn merge_keeps_lowest_age() {
        let mut v = RandomView::new(NodeId(0), 30);
        v.merge(&[desc(1, 9)]);
        v.merge(&[desc(1, 2)]);
        assert_eq!(v.entries()[0].age, 2);
        v.merge(&[desc(1, 7)]);
        assert_eq!(v.entries()[0].age, 3);
    }

    #[test]
    fn overflow_drops_the_oldest() {
        let mut v = RandomView::new(NodeId(0), 10);
        let received: Vec<PeerDescriptor> = (1..=25).map(|i| desc(i, (i * 7 % 13) as u32)).collect();
        v.merge(&received);
        // oracle: sort the union by age then id and keep the first ten
        let mut sorted = received.clone();
        sorted.sort_by_key(|d| (d.age, d.id()));
        let mut expected: Vec<NodeId> = sorted.iter().take(10).map(|d| d.id()).collect();
        expected.sort();
        let kept: Vec<NodeId> = v.entries().iter().map(|d| d.id()).collect();
        assert_eq!(kept, expected);
    }

    proptest! {
        #[test]
        fn merge_never_invents_descriptors(
            initial in proptest::collection::vec((0u64..60, 0u32..20), 0..40),
            received in proptest::collection::vec((0u64..60, 0u32..20), 0..40),
        ) {
            let mut v = RandomView::new(NodeId(5), 30);
            v.merge(&initial.iter().map(|&(i, a)| desc(i, a)).collect::<Vec<_>>());
            let before: Vec<NodeId> = v.entries().iter().map(|d| d.id()).collect();
            let recv: Vec<PeerDescriptor> = received.iter().map(|&(i, a)| desc(i, a)).collect();
            v.merge(&recv);
            prop_assert!(v.check_invariants().is_ok());
            for d in v.entries() {
                prop_assert!(before.contains(&d.id()) || recv.iter().any(|r| r.id() == d.id()));
            }
        }
    }
}
