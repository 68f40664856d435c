//! Utility-ranked proximity overlay.
//!
//! Every node ranks the discovery items it knows by how much their
//! coordination areas overlap its own. It repeatedly contacts its best
//! ranked peer and the two swap the items each one ranks highest *for the
//! other side*, so knowledge of nearby nodes flows toward the nodes that
//! care about it. A few far links taken from the random view keep the
//! overlay connected.
//!
//! Nodes whose areas overlap are candidates. Candidates are pinned in the
//! ranked view: the capacity only limits how many non-overlapping entries
//! are kept around as stepping stones.

use std::cmp::Ordering;
use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::Rng;
use thiserror::Error;

use crate::geo::{separation, CoordinationArea, NodeId, Utility, UtilityKind};
use crate::sampling::RandomView;
use crate::wire::{DiscoveryItem, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum OverlayError {
    #[error("EmptyViewError: no ranked entry and no far link to contact")]
    EmptyView,
}

/// Tunables of the ranking overlay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlayParams {
    pub c_rank: usize,
    pub c_far: usize,
    pub p_far: f64,
    /// Rounds during which a contacted peer is not chosen again.
    pub recent_rounds: u64,
    /// Items older than this are dropped on merge.
    pub stale_after_ms: u64,
    pub utility: UtilityKind,
}

impl Default for OverlayParams {
    fn default() -> Self {
        OverlayParams {
            c_rank: 20,
            c_far: 3,
            p_far: 0.1,
            recent_rounds: 5,
            stale_after_ms: 10 * 15_000,
            utility: UtilityKind::OverlapArea,
        }
    }
}

/// The node a ranking is computed for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile {
    pub id: NodeId,
    pub area: CoordinationArea,
    pub utility: UtilityKind,
}

impl Profile {
    pub fn new(id: NodeId, area: CoordinationArea) -> Self {
        Profile {
            id,
            area,
            utility: UtilityKind::OverlapArea,
        }
    }

    pub fn with_utility(mut self, utility: UtilityKind) -> Self {
        self.utility = utility;
        self
    }

    pub fn score(&self, item: &DiscoveryItem) -> RankedEntry {
        RankedEntry {
            item: *item,
            utility: self.utility.utility(&self.area, &item.area),
            gap: separation(&self.area, &item.area),
        }
    }
}

/// A known item with its score relative to the view owner. `gap` is the
/// distance between the two disk edges, negative when they overlap; it
/// orders entries of equal utility so that nodes with no overlap yet still
/// move toward the closest peers they know.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedEntry {
    pub item: DiscoveryItem,
    pub utility: Utility,
    pub gap: f64,
}

impl RankedEntry {
    pub fn id(&self) -> NodeId {
        self.item.id
    }

    pub fn is_candidate(&self) -> bool {
        self.gap < 0.0
    }
}

/// Utility descending, then gap ascending, then id ascending.
pub fn rank_order(a: &RankedEntry, b: &RankedEntry) -> Ordering {
    b.utility
        .cmp(&a.utility)
        .then(a.gap.total_cmp(&b.gap))
        .then(a.id().cmp(&b.id()))
}

/// Keeps the freshest copy of each id, skipping `skip`.
fn dedup_freshest(
    items: impl IntoIterator<Item = DiscoveryItem>,
    skip: NodeId,
) -> BTreeMap<NodeId, DiscoveryItem> {
    let mut out: BTreeMap<NodeId, DiscoveryItem> = BTreeMap::new();
    for it in items {
        if it.id == skip {
            continue;
        }
        out.entry(it.id)
            .and_modify(|cur| {
                if it.timestamp > cur.timestamp {
                    *cur = it;
                }
            })
            .or_insert(it);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedView {
    profile: Profile,
    capacity: usize,
    entries: Vec<RankedEntry>,
}

impl RankedView {
    pub fn new(profile: Profile, capacity: usize) -> Self {
        RankedView {
            profile,
            capacity,
            entries: Vec::new(),
        }
    }

    /// Scores every known item against the profile and keeps the best
    /// `capacity` of them plus every candidate.
    pub fn rank(profile: Profile, capacity: usize, known: &[DiscoveryItem]) -> Self {
        let mut view = RankedView::new(profile, capacity);
        view.rebuild(dedup_freshest(known.iter().copied(), profile.id).into_values());
        view
    }

    fn rebuild(&mut self, items: impl Iterator<Item = DiscoveryItem>) {
        let mut entries: Vec<RankedEntry> = items.map(|it| self.profile.score(&it)).collect();
        entries.sort_by(rank_order);
        let pinned = entries.iter().take_while(|e| e.is_candidate()).count();
        entries.truncate(self.capacity.max(pinned));
        self.entries = entries;
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries(&self) -> &[RankedEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: NodeId) -> Option<&RankedEntry> {
        self.entries.iter().find(|e| e.id() == id)
    }

    pub fn remove(&mut self, id: NodeId) {
        self.entries.retain(|e| e.id() != id);
    }

    /// Folds `received` into the view, drops items older than
    /// `stale_after_ms` at `now`, re-ranks and truncates.
    pub fn merge<'a>(
        &mut self,
        received: impl IntoIterator<Item = &'a DiscoveryItem>,
        now: Timestamp,
        stale_after_ms: u64,
    ) {
        let held = self.entries.iter().map(|e| e.item);
        let merged = dedup_freshest(held.chain(received.into_iter().copied()), self.profile.id);
        self.rebuild(
            merged
                .into_values()
                .filter(|it| it.timestamp.age_at(now) <= stale_after_ms),
        );
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        let owner = self.profile.id;
        if self.entries.windows(2).any(|w| rank_order(&w[0], &w[1]) != Ordering::Less) {
            return Err(format!("ranked view of {owner} out of order"));
        }
        let mut ids: Vec<NodeId> = self.entries.iter().map(|e| e.id()).collect();
        ids.sort();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(format!("ranked view of {owner} has duplicates"));
        }
        if ids.binary_search(&owner).is_ok() {
            return Err(format!("ranked view of {owner} holds its owner"));
        }
        let pinned = self.entries.iter().filter(|e| e.is_candidate()).count();
        if self.entries.len() > self.capacity.max(pinned) {
            return Err(format!("ranked view of {owner} over capacity"));
        }
        Ok(())
    }
}

/// A distant peer held alongside the ranked view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarLink {
    pub item: DiscoveryItem,
}

/// Peers contacted during the last few rounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecentContacts {
    window: u64,
    contacts: VecDeque<(u64, NodeId)>,
}

impl RecentContacts {
    pub fn new(window: u64) -> Self {
        RecentContacts {
            window,
            contacts: VecDeque::new(),
        }
    }

    pub fn expire(&mut self, round: u64) {
        while let Some(&(r, _)) = self.contacts.front() {
            if r + self.window <= round {
                self.contacts.pop_front();
            } else {
                break;
            }
        }
    }

    pub fn note(&mut self, round: u64, id: NodeId) {
        self.expire(round);
        self.contacts.push_back((round, id));
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.contacts.iter().any(|&(_, c)| c == id)
    }
}

/// Picks the next exchange target: with probability `p_far` a random far
/// link, otherwise the best ranked entry not contacted recently. When every
/// ranked entry is recent, a far link is used if there is one, else the top
/// entry.
pub fn select_target<R: Rng + ?Sized>(
    view: &RankedView,
    far: &[FarLink],
    recent: &RecentContacts,
    p_far: f64,
    rng: &mut R,
) -> Result<DiscoveryItem, OverlayError> {
    let use_far = rng.random_bool(p_far.clamp(0.0, 1.0));
    if use_far {
        if let Some(link) = far.choose(rng) {
            return Ok(link.item);
        }
    }
    if let Some(e) = view.entries.iter().find(|e| !recent.contains(e.id())) {
        return Ok(e.item);
    }
    if let Some(link) = far.choose(rng) {
        return Ok(link.item);
    }
    view.entries.first().map(|e| e.item).ok_or(OverlayError::EmptyView)
}

/// The discovery output: every known node whose area overlaps the owner's,
/// in rank order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CandidateList {
    pub owner: NodeId,
    pub entries: Vec<(DiscoveryItem, Utility)>,
}

impl CandidateList {
    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.entries.iter().map(|(it, _)| it.id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.entries.iter().any(|(it, _)| it.id == id)
    }

    pub fn utility_of(&self, id: NodeId) -> Option<Utility> {
        self.entries.iter().find(|(it, _)| it.id == id).map(|(_, u)| *u)
    }

    /// One `node_id,address,utility` record per line, with a header.
    pub fn to_records(&self) -> String {
        let mut out = String::from("node_id,address,utility\n");
        for (it, u) in &self.entries {
            let _ = writeln!(out, "{},{},{}", it.id, it.address(), u);
        }
        out
    }
}

/// Collects candidates from both views, keeping the freshest copy of each.
pub fn candidate_list(view: &RankedView, random: &RandomView) -> CandidateList {
    let profile = view.profile;
    let known = dedup_freshest(
        view.entries.iter().map(|e| e.item).chain(random.items().copied()),
        profile.id,
    );
    let mut scored: Vec<RankedEntry> = known
        .values()
        .map(|it| profile.score(it))
        .filter(RankedEntry::is_candidate)
        .collect();
    scored.sort_by(rank_order);
    CandidateList {
        owner: profile.id,
        entries: scored.into_iter().map(|e| (e.item, e.utility)).collect(),
    }
}

/// Per-node state of the ranking overlay.
#[derive(Debug, Clone, PartialEq)]
pub struct ProximityOverlay {
    params: OverlayParams,
    view: RankedView,
    far: Vec<FarLink>,
    recent: RecentContacts,
}

impl ProximityOverlay {
    pub fn new(profile: Profile, params: OverlayParams) -> Self {
        ProximityOverlay {
            params,
            view: RankedView::new(profile.with_utility(params.utility), params.c_rank),
            far: Vec::new(),
            recent: RecentContacts::new(params.recent_rounds),
        }
    }

    pub fn params(&self) -> &OverlayParams {
        &self.params
    }

    pub fn view(&self) -> &RankedView {
        &self.view
    }

    pub fn far_links(&self) -> &[FarLink] {
        &self.far
    }

    pub fn absorb<'a>(&mut self, items: impl IntoIterator<Item = &'a DiscoveryItem>, now: Timestamp) {
        self.view.merge(items, now, self.params.stale_after_ms);
    }

    /// Redraws the far links uniformly from the random view.
    pub fn refresh_far<R: Rng + ?Sized>(&mut self, random: &RandomView, rng: &mut R) {
        let pool: Vec<&DiscoveryItem> = random.items().collect();
        self.far = pool
            .choose_multiple(rng, self.params.c_far)
            .map(|it| FarLink { item: **it })
            .collect();
    }

    /// Chooses a target and remembers it as recently contacted. Unless the
    /// far-link coin comes up, a candidate whose freshest known item is past
    /// half the staleness limit is contacted first, oldest item first, so
    /// that live candidates are refreshed before they expire.
    pub fn select_target<R: Rng + ?Sized>(
        &mut self,
        round: u64,
        now: Timestamp,
        rng: &mut R,
    ) -> Result<DiscoveryItem, OverlayError> {
        self.recent.expire(round);
        let use_far = rng.random_bool(self.params.p_far.clamp(0.0, 1.0));
        let refresh_after = self.params.stale_after_ms / 2;
        let ageing = self
            .view
            .entries
            .iter()
            .filter(|e| e.is_candidate() && !self.recent.contains(e.id()))
            .filter(|e| e.item.timestamp.age_at(now) > refresh_after)
            .min_by_key(|e| (e.item.timestamp, e.id()))
            .map(|e| e.item);
        let target = match ageing {
            Some(item) if !use_far => item,
            _ => select_target(
                &self.view,
                &self.far,
                &self.recent,
                if use_far { 1.0 } else { 0.0 },
                rng,
            )?,
        };
        self.recent.note(round, target.id);
        Ok(target)
    }

    /// What to send to `peer`: our own fresh item, then the `c_rank` known
    /// items that rank highest from the peer's point of view. Every known
    /// candidate of the peer goes out even past `c_rank`.
    pub fn buffer_for(
        &self,
        peer: &DiscoveryItem,
        own: DiscoveryItem,
        random: &RandomView,
        now: Timestamp,
    ) -> Vec<DiscoveryItem> {
        let known = dedup_freshest(
            self.view
                .entries
                .iter()
                .map(|e| e.item)
                .chain(random.items().copied())
                .chain(self.far.iter().map(|f| f.item)),
            peer.id,
        );
        let theirs = Profile::new(peer.id, peer.area).with_utility(self.params.utility);
        let mut scored: Vec<RankedEntry> = known
            .values()
            .filter(|it| it.id != own.id && it.timestamp.age_at(now) <= self.params.stale_after_ms)
            .map(|it| theirs.score(it))
            .collect();
        scored.sort_by(rank_order);
        let pinned = scored.iter().take_while(|e| e.is_candidate()).count();
        let take = self.params.c_rank.max(pinned);
        let mut out = Vec::with_capacity(take + 1);
        out.push(own);
        out.extend(scored.into_iter().take(take).map(|e| e.item));
        out
    }

    /// Drops a peer that did not answer.
    pub fn forget(&mut self, id: NodeId) {
        self.view.remove(id);
        self.far.retain(|f| f.item.id != id);
    }

    pub fn candidate_list(&self, random: &RandomView) -> CandidateList {
        candidate_list(&self.view, random)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{overlap_area, GeoPoint};
    use crate::sampling::PeerDescriptor;
    use crate::wire::UNSPECIFIED_V4;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn item_at(id: u64, east: f64, north: f64, r: f64, ts: u64) -> DiscoveryItem {
        let origin = GeoPoint::new(60.0, 10.0).unwrap();
        let area = CoordinationArea::new(origin.offset_m(east, north).unwrap(), r).unwrap();
        DiscoveryItem::new(NodeId(id), area, UNSPECIFIED_V4, Timestamp(ts))
    }

    fn profile_of(it: &DiscoveryItem) -> Profile {
        Profile::new(it.id, it.area)
    }

    #[test]
    fn disjoint_items_keep_zero_utility() {
        let me = item_at(0, 0.0, 0.0, 100.0, 0);
        let known: Vec<_> = (1..5).map(|i| item_at(i, 1000.0 * i as f64, 0.0, 100.0, 0)).collect();
        let v = RankedView::rank(profile_of(&me), 20, &known);
        assert_eq!(v.len(), 4);
        assert!(v.entries().iter().all(|e| e.utility == Utility::ZERO));
        // closer first
        let ids: Vec<u64> = v.entries().iter().map(|e| e.id().0).collect();
        assert_eq!(ids, vec![1, 2, 3, 4]);
    }

    #[test]
    fn ranking_matches_brute_force_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let me = item_at(0, 5000.0, 5000.0, 800.0, 0);
        let known: Vec<_> = (1..=100)
            .map(|i| {
                item_at(
                    i,
                    rng.random_range(0.0..10_000.0),
                    rng.random_range(0.0..10_000.0),
                    rng.random_range(100.0..1500.0),
                    0,
                )
            })
            .collect();
        let v = RankedView::rank(profile_of(&me), 100, &known);
        let mut oracle: Vec<(f64, f64, u64)> = known
            .iter()
            .map(|it| {
                let u = overlap_area(&me.area, &it.area).value();
                let d = crate::geo::distance(&me.location(), &it.location()) - me.radius() - it.radius();
                (u, d, it.id.0)
            })
            .collect();
        oracle.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
        let got: Vec<u64> = v.entries().iter().map(|e| e.id().0).collect();
        let want: Vec<u64> = oracle.iter().map(|o| o.2).collect();
        assert_eq!(got, want);
        v.check_invariants().unwrap();
    }

    #[test]
    fn candidates_are_pinned_past_capacity() {
        let me = item_at(0, 0.0, 0.0, 500.0, 0);
        let known: Vec<_> = (1..=8).map(|i| item_at(i, 50.0 * i as f64, 0.0, 100.0, 0)).collect();
        let v = RankedView::rank(profile_of(&me), 3, &known);
        assert_eq!(v.len(), 8);
        v.check_invariants().unwrap();
    }

    #[test]
    fn higher_utility_displaces_the_minimum() {
        let me = item_at(0, 0.0, 0.0, 100.0, 0);
        let far: Vec<_> = (1..=3).map(|i| item_at(i, 1000.0 * i as f64, 0.0, 100.0, 0)).collect();
        let mut v = RankedView::rank(profile_of(&me), 3, &far);
        v.merge(&[item_at(9, 50.0, 0.0, 100.0, 0)], Timestamp(0), 1000);
        let ids: Vec<u64> = v.entries().iter().map(|e| e.id().0).collect();
        assert_eq!(ids, vec![9, 1, 2]);
    }

    #[test]
    fn zero_utility_items_do_not_enter_a_full_candidate_view() {
        let me = item_at(0, 0.0, 0.0, 500.0, 0);
        let near: Vec<_> = (1..=3).map(|i| item_at(i, 100.0 * i as f64, 0.0, 100.0, 0)).collect();
        let mut v = RankedView::rank(profile_of(&me), 3, &near);
        let before = v.clone();
        v.merge(&[item_at(7, 5000.0, 0.0, 10.0, 0), item_at(8, 9000.0, 0.0, 10.0, 0)], Timestamp(0), 1000);
        assert_eq!(v, before);
    }

    #[test]
    fn stale_items_are_evicted() {
        let me = item_at(0, 0.0, 0.0, 500.0, 0);
        let mut v = RankedView::rank(profile_of(&me), 5, &[item_at(1, 10.0, 0.0, 10.0, 100)]);
        v.merge(&[], Timestamp(1100), 1000);
        assert_eq!(v.len(), 1);
        v.merge(&[], Timestamp(1101), 1000);
        assert!(v.is_empty());
    }

    #[test]
    fn merge_keeps_fresher_copy() {
        let me = item_at(0, 0.0, 0.0, 500.0, 0);
        let mut v = RankedView::rank(profile_of(&me), 5, &[item_at(1, 10.0, 0.0, 10.0, 100)]);
        v.merge(&[item_at(1, 10.0, 0.0, 10.0, 50)], Timestamp(200), 1000);
        assert_eq!(v.entries()[0].item.timestamp, Timestamp(100));
        v.merge(&[item_at(1, 10.0, 0.0, 10.0, 150)], Timestamp(200), 1000);
        assert_eq!(v.entries()[0].item.timestamp, Timestamp(150));
    }

    #[test]
    fn fresh_view_targets_the_top_entry() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let me = item_at(0, 0.0, 0.0, 300.0, 0);
        let known: Vec<_> = (1..=4).map(|i| item_at(i, 100.0 * i as f64, 0.0, 100.0, 0)).collect();
        let v = RankedView::rank(profile_of(&me), 20, &known);
        let t = select_target(&v, &[], &RecentContacts::new(5), 0.0, &mut rng).unwrap();
        assert_eq!(t.id, NodeId(1));
    }

    #[test]
    fn recent_contacts_fall_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let me = item_at(0, 0.0, 0.0, 300.0, 0);
        let known: Vec<_> = (1..=3).map(|i| item_at(i, 100.0 * i as f64, 0.0, 100.0, 0)).collect();
        let v = RankedView::rank(profile_of(&me), 20, &known);
        let mut recent = RecentContacts::new(5);
        recent.note(0, NodeId(1));
        let t = select_target(&v, &[], &recent, 0.0, &mut rng).unwrap();
        assert_eq!(t.id, NodeId(2));
        recent.note(0, NodeId(2));
        recent.note(0, NodeId(3));
        let far = [FarLink { item: item_at(50, 9000.0, 0.0, 10.0, 0) }];
        assert_eq!(select_target(&v, &far, &recent, 0.0, &mut rng).unwrap().id, NodeId(50));
        assert_eq!(select_target(&v, &[], &recent, 0.0, &mut rng).unwrap().id, NodeId(1));
        recent.expire(5);
        assert!(!recent.contains(NodeId(1)));
    }

    #[test]
    fn nothing_to_contact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let me = item_at(0, 0.0, 0.0, 300.0, 0);
        let v = RankedView::new(profile_of(&me), 20);
        assert_eq!(
            select_target(&v, &[], &RecentContacts::new(5), 0.5, &mut rng),
            Err(OverlayError::EmptyView)
        );
    }

    #[test]
    fn far_link_frequency_is_binomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let me = item_at(0, 0.0, 0.0, 300.0, 0);
        let known: Vec<_> = (1..=5).map(|i| item_at(i, 100.0 * i as f64, 0.0, 100.0, 0)).collect();
        let v = RankedView::rank(profile_of(&me), 20, &known);
        let far: Vec<FarLink> = (100..103).map(|i| FarLink { item: item_at(i, 50_000.0, 0.0, 10.0, 0) }).collect();
        let trials = 20_000;
        let p = 0.1;
        let hits = (0..trials)
            .filter(|_| select_target(&v, &far, &RecentContacts::new(5), p, &mut rng).unwrap().id.0 >= 100)
            .count();
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        let freq = hits as f64 / trials as f64;
        assert!((freq - p).abs() <= 2.0 * se, "far frequency {freq}");
    }

    #[test]
    fn candidate_list_merges_both_views() {
        let me = item_at(0, 0.0, 0.0, 300.0, 0);
        let ranked = RankedView::rank(profile_of(&me), 20, &[item_at(1, 100.0, 0.0, 100.0, 0), item_at(2, 5000.0, 0.0, 100.0, 0)]);
        let mut random = RandomView::new(NodeId(0), 30);
        random.merge(&[
            PeerDescriptor::fresh(item_at(3, 0.0, 200.0, 100.0, 0)),
            PeerDescriptor::fresh(item_at(1, 100.0, 0.0, 100.0, 5)),
            PeerDescriptor::fresh(item_at(4, 0.0, 9000.0, 100.0, 0)),
        ]);
        let cl = candidate_list(&ranked, &random);
        let ids: Vec<u64> = cl.ids().map(|i| i.0).collect();
        assert_eq!(ids, vec![1, 3]);
        assert_eq!(cl.entries[0].0.timestamp, Timestamp(5));
        assert!(cl.to_records().starts_with("node_id,address,utility\n1,0.0.0.0,"));
    }

    #[test]
    fn isolated_node_has_no_candidates() {
        let me = item_at(0, 0.0, 0.0, 300.0, 0);
        let cl = candidate_list(&RankedView::new(profile_of(&me), 20), &RandomView::new(NodeId(0), 30));
        assert!(cl.is_empty());
    }

    #[test]
    fn buffer_is_ranked_for_the_peer() {
        let me = item_at(0, 0.0, 0.0, 300.0, 10);
        let peer = item_at(1, 2000.0, 0.0, 300.0, 10);
        let mut ov = ProximityOverlay::new(profile_of(&me), OverlayParams { c_rank: 4, ..Default::default() });
        let known = [
            item_at(2, 100.0, 0.0, 100.0, 10),
            item_at(3, 1900.0, 0.0, 100.0, 10),
            item_at(4, 2200.0, 0.0, 100.0, 10),
            peer,
        ];
        ov.absorb(&known, Timestamp(10));
        let buf = ov.buffer_for(&peer, me, &RandomView::new(NodeId(0), 30), Timestamp(10));
        let ids: Vec<u64> = buf.iter().map(|i| i.id.0).collect();
        assert_eq!(ids, vec![0, 3, 4, 2]);
    }

    #[test]
    fn buffer_carries_every_peer_candidate() {
        let me = item_at(0, 0.0, 0.0, 300.0, 10);
        let peer = item_at(1, 500.0, 0.0, 300.0, 10);
        let mut ov = ProximityOverlay::new(profile_of(&me), OverlayParams { c_rank: 2, ..Default::default() });
        let known: Vec<DiscoveryItem> = (2..7).map(|i| item_at(i, 200.0 + 20.0 * i as f64, 0.0, 100.0, 10)).collect();
        ov.absorb(&known, Timestamp(10));
        let buf = ov.buffer_for(&peer, me, &RandomView::new(NodeId(0), 30), Timestamp(10));
        assert_eq!(buf.len(), 1 + 5);
    }

    // A node's geometry never changes; only its timestamp does.
    fn placed(id: u64, ts: u64) -> DiscoveryItem {
        let e = (id * 7919 % 3000) as f64;
        let n = (id * 104_729 % 3000) as f64;
        let r = 10.0 + (id * 31 % 590) as f64;
        item_at(id, e, n, r, ts)
    }

    proptest! {
        // Replaying every merge from scratch must give the same view as the
        // incremental merges.
        #[test]
        fn incremental_merge_equals_replay(
            batches in proptest::collection::vec(
                proptest::collection::vec((1u64..40, 0u64..50), 0..12),
                1..8,
            )
        ) {
            let me = item_at(0, 1500.0, 1500.0, 400.0, 0);
            let now = Timestamp(50);
            let stale = 30;
            let mut v = RankedView::new(profile_of(&me), 6);
            let mut log: Vec<DiscoveryItem> = Vec::new();
            for batch in &batches {
                let items: Vec<DiscoveryItem> = batch
                    .iter()
                    .map(|&(id, ts)| placed(id, ts))
                    .collect();
                v.merge(&items, now, stale);
                prop_assert!(v.check_invariants().is_ok());
                log.extend(items);
            }
            let fresh: Vec<DiscoveryItem> = log.iter().copied().filter(|it| it.timestamp.age_at(now) <= stale).collect();
            let oracle = RankedView::rank(profile_of(&me), 6, &fresh);
            let got: Vec<u64> = v.entries().iter().map(|e| e.id().0).collect();
            let want: Vec<u64> = oracle.entries().iter().map(|e| e.id().0).collect();
            prop_assert_eq!(got, want);
        }
    }
}
