//! Simulation input: node placement, protocol parameters, churn schedule.
//!
//! Scenarios are stored as plain text: `key = value` lines, then a
//! `[nodes]` table and an optional `[churn]` table. Floats are written in
//! their shortest round-trip form, so writing a parsed file reproduces it
//! byte for byte.
//!
//! ```text
//! # geodisco scenario
//! format = 1
//! rng_seed = 7
//! period_seconds = 15
//! seeds = 0
//!
//! [nodes]
//! # id lat lon radius_m
//! 0 60 10 300
//! 1 60.001 10.002 300
//!
//! [churn]
//! # round join id lat lon radius_m | round leave id
//! 3 leave 1
//! 4 join 2 60.002 10.001 250
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::net::{IpAddr, Ipv6Addr};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geo::{CoordinationArea, GeoError, GeoPoint, NodeId, UtilityKind};
use crate::overlay::OverlayParams;
use crate::sampling::PartnerSelection;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("InvalidRegionError: {0}")]
    InvalidRegion(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Geo(#[from] GeoError),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

/// A radio node as placed in a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSpec {
    pub id: NodeId,
    pub location: GeoPoint,
    pub radius: f64,
}

impl NodeSpec {
    pub fn new(id: NodeId, location: GeoPoint, radius: f64) -> Result<Self, GeoError> {
        CoordinationArea::new(location, radius)?;
        Ok(NodeSpec { id, location, radius })
    }

    pub fn area(&self) -> CoordinationArea {
        CoordinationArea::new(self.location, self.radius).expect("validated on construction")
    }

    /// The node's own agent endpoint, see [`endpoint_of`].
    pub fn endpoint(&self) -> IpAddr {
        endpoint_of(self.id)
    }
}

/// Simulated agent endpoint of a node: `2001:db8::/64` plus the id.
pub fn endpoint_of(id: NodeId) -> IpAddr {
    let id = id.0;
    IpAddr::V6(Ipv6Addr::new(
        0x2001,
        0x0db8,
        0,
        0,
        (id >> 48) as u16,
        (id >> 32) as u16,
        (id >> 16) as u16,
        id as u16,
    ))
}

/// Protocol tunables shared by every node of a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolParams {
    pub c_rand: usize,
    pub buffer_half: usize,
    pub partner: PartnerSelection,
    pub c_rank: usize,
    pub c_far: usize,
    pub p_far: f64,
    pub recent_rounds: u64,
    pub stale_rounds: u64,
    pub period_seconds: f64,
    pub utility: UtilityKind,
    /// Leaving nodes say goodbye to the peers in their views instead of
    /// disappearing silently.
    pub graceful_leave: bool,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            c_rand: 30,
            buffer_half: 15,
            partner: PartnerSelection::Oldest,
            c_rank: 20,
            c_far: 3,
            p_far: 0.1,
            recent_rounds: 5,
            stale_rounds: 10,
            period_seconds: 15.0,
            utility: UtilityKind::OverlapArea,
            graceful_leave: false,
        }
    }
}

impl ProtocolParams {
    pub fn period_ms(&self) -> u64 {
        (self.period_seconds * 1000.0).round() as u64
    }

    pub fn overlay(&self) -> OverlayParams {
        OverlayParams {
            c_rank: self.c_rank,
            c_far: self.c_far,
            p_far: self.p_far,
            recent_rounds: self.recent_rounds,
            stale_after_ms: self.stale_rounds * self.period_ms(),
            utility: self.utility,
        }
    }
}

/// Privacy delegation settings: a fraction of the nodes hide their endpoint
/// behind an agent run by another privacy node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyConfig {
    pub fraction: f64,
    /// How many other nodes each privacy node is willing to front.
    pub capacity: u32,
    /// Delegates are redrawn every this many rounds; never when `None`.
    pub duration_rounds: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChurnKind {
    Join(NodeSpec),
    Leave(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChurnEvent {
    pub round: u64,
    pub kind: ChurnKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub nodes: Vec<NodeSpec>,
    pub seeds: Vec<NodeId>,
    pub params: ProtocolParams,
    /// Sorted by round; events of one round apply in order.
    pub churn: Vec<ChurnEvent>,
    pub rng_seed: u64,
    /// Wall-clock time of round 0, in milliseconds since the Unix epoch.
    pub epoch_ms: u64,
    pub privacy: Option<PrivacyConfig>,
}

pub const DEFAULT_EPOCH_MS: u64 = 1_400_000_000_000;

impl Scenario {
    pub fn new(nodes: Vec<NodeSpec>, seeds: Vec<NodeId>, rng_seed: u64) -> Self {
        Scenario {
            nodes,
            seeds,
            params: ProtocolParams::default(),
            churn: Vec::new(),
            rng_seed,
            epoch_ms: DEFAULT_EPOCH_MS,
            privacy: None,
        }
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Checks ids, seeds, parameters and that the churn schedule replays
    /// cleanly (no leave of an absent node, no join of a present one).
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let p = &self.params;
        if !(p.period_seconds.is_finite() && p.period_seconds > 0.0) {
            return Err(invalid("period must be positive"));
        }
        if p.c_rand == 0 || p.c_rank == 0 {
            return Err(invalid("view capacities must be positive"));
        }
        if !(0.0..=1.0).contains(&p.p_far) {
            return Err(invalid("p_far must lie in [0, 1]"));
        }
        let mut alive = BTreeSet::new();
        for n in &self.nodes {
            if !alive.insert(n.id) {
                return Err(invalid(format!("duplicate node id {}", n.id)));
            }
        }
        for s in &self.seeds {
            if !alive.contains(s) {
                return Err(invalid(format!("seed {s} is not a round-0 node")));
            }
        }
        if let Some(pc) = &self.privacy {
            if !(0.0..=1.0).contains(&pc.fraction) {
                return Err(invalid("privacy fraction must lie in [0, 1]"));
            }
        }
        let mut last_round = 0;
        for ev in &self.churn {
            if ev.round < last_round {
                return Err(invalid("churn events must be sorted by round"));
            }
            last_round = ev.round;
            match ev.kind {
                ChurnKind::Join(spec) => {
                    if !alive.insert(spec.id) {
                        return Err(invalid(format!("round {}: join of live node {}", ev.round, spec.id)));
                    }
                }
                ChurnKind::Leave(id) => {
                    if !alive.remove(&id) {
                        return Err(invalid(format!("round {}: leave of unknown node {id}", ev.round)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Nodes alive once the churn events of `round` have been applied.
    pub fn alive_at(&self, round: u64) -> Vec<NodeSpec> {
        let mut alive: Vec<NodeSpec> = self.nodes.clone();
        for ev in self.churn.iter().take_while(|e| e.round <= round) {
            match ev.kind {
                ChurnKind::Join(spec) => alive.push(spec),
                ChurnKind::Leave(id) => alive.retain(|n| n.id != id),
            }
        }
        alive
    }

    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut out = String::new();
        let _ = writeln!(out, "# geodisco scenario");
        let _ = writeln!(out, "format = 1");
        let _ = writeln!(out, "rng_seed = {}", self.rng_seed);
        let _ = writeln!(out, "epoch_ms = {}", self.epoch_ms);
        let _ = writeln!(out, "period_seconds = {}", p.period_seconds);
        let _ = writeln!(out, "c_rand = {}", p.c_rand);
        let _ = writeln!(out, "buffer_half = {}", p.buffer_half);
        let _ = writeln!(out, "partner = {}", p.partner.name());
        let _ = writeln!(out, "c_rank = {}", p.c_rank);
        let _ = writeln!(out, "c_far = {}", p.c_far);
        let _ = writeln!(out, "p_far = {}", p.p_far);
        let _ = writeln!(out, "recent_rounds = {}", p.recent_rounds);
        let _ = writeln!(out, "stale_rounds = {}", p.stale_rounds);
        let _ = writeln!(out, "utility = {}", p.utility.name());
        let _ = writeln!(out, "graceful_leave = {}", p.graceful_leave);
        if let Some(pc) = &self.privacy {
            let _ = writeln!(out, "privacy_fraction = {}", pc.fraction);
            let _ = writeln!(out, "privacy_capacity = {}", pc.capacity);
            if let Some(d) = pc.duration_rounds {
                let _ = writeln!(out, "privacy_duration = {d}");
            }
        }
        let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "seeds = {}", seeds.join(" "));
        let _ = writeln!(out, "\n[nodes]\n# id lat lon radius_m");
        for n in &self.nodes {
            let _ = writeln!(out, "{} {} {} {}", n.id, n.location.lat(), n.location.lon(), n.radius);
        }
        if !self.churn.is_empty() {
            let _ = writeln!(out, "\n[churn]\n# round join id lat lon radius_m | round leave id");
            for ev in &self.churn {
                match ev.kind {
                    ChurnKind::Join(n) => {
                        let _ = writeln!(
                            out,
                            "{} join {} {} {} {}",
                            ev.round,
                            n.id,
                            n.location.lat(),
                            n.location.lon(),
                            n.radius
                        );
                    }
                    ChurnKind::Leave(id) => {
                        let _ = writeln!(out, "{} leave {}", ev.round, id);
                    }
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, ScenarioError> {
        let mut s = Scenario::new(Vec::new(), Vec::new(), 0);
        let mut section = "";
        let mut privacy_fraction = None;
        let mut privacy_capacity = None;
        let mut privacy_duration = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |msg: String| ScenarioError::Parse { line: line_no, msg };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') {
                section = match line {
                    "[nodes]" => "nodes",
                    "[churn]" => "churn",
                    other => return Err(err(format!("unknown section {other}"))),
                };
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match section {
                "" => {
                    let (key, value) = line
                        .split_once('=')
                        .map(|(k, v)| (k.trim(), v.trim()))
                        .ok_or_else(|| err("expected key = value".into()))?;
                    let num = |v: &str| v.parse::<f64>().map_err(|e| err(format!("{key}: {e}")));
                    let int = |v: &str| v.parse::<u64>().map_err(|e| err(format!("{key}: {e}")));
                    let p = &mut s.params;
                    match key {
                        "format" => {
                            if value != "1" {
                                return Err(err(format!("unsupported format {value}")));
                            }
                        }
                        "rng_seed" => s.rng_seed = int(value)?,
                        "epoch_ms" => s.epoch_ms = int(value)?,
                        "period_seconds" => p.period_seconds = num(value)?,
                        "c_rand" => p.c_rand = int(value)? as usize,
                        "buffer_half" => p.buffer_half = int(value)? as usize,
                        "partner" => {
                            p.partner = PartnerSelection::from_name(value)
                                .ok_or_else(|| err(format!("unknown partner policy {value}")))?
                        }
                        "c_rank" => p.c_rank = int(value)? as usize,
                        "c_far" => p.c_far = int(value)? as usize,
                        "p_far" => p.p_far = num(value)?,
                        "recent_rounds" => p.recent_rounds = int(value)?,
                        "stale_rounds" => p.stale_rounds = int(value)?,
                        "utility" => {
                            p.utility = UtilityKind::from_name(value)
                                .ok_or_else(|| err(format!("unknown utility {value}")))?
                        }
                        "graceful_leave" => {
                            p.graceful_leave = value.parse().map_err(|_| err(format!("bad bool {value}")))?
                        }
                        "privacy_fraction" => privacy_fraction = Some(num(value)?),
                        "privacy_capacity" => privacy_capacity = Some(int(value)? as u32),
                        "privacy_duration" => privacy_duration = Some(int(value)?),
                        "seeds" => {
                            s.seeds = value
                                .split_whitespace()
                                .map(|v| v.parse::<u64>().map(NodeId))
                                .collect::<Result<_, _>>()
                                .map_err(|e| err(format!("seeds: {e}")))?
                        }
                        other => return Err(err(format!("unknown key {other}"))),
                    }
                }
                "nodes" => {
                    if fields.len() != 4 {
                        return Err(err("node rows need: id lat lon radius".into()));
                    }
                    s.nodes.push(parse_node(&fields).map_err(err)?);
                }
                _ => {
                    let round = fields
                        .first()
                        .and_then(|v| v.parse::<u64>().ok())
                        .ok_or_else(|| err("churn rows start with a round".into()))?;
                    let kind = match (fields.get(1).copied(), fields.len()) {
                        (Some("join"), 6) => ChurnKind::Join(parse_node(&fields[2..]).map_err(err)?),
                        (Some("leave"), 3) => ChurnKind::Leave(NodeId(
                            fields[2].parse().map_err(|e| err(format!("leave id: {e}")))?,
                        )),
                        _ => return Err(err("expected `round join id lat lon radius` or `round leave id`".into())),
                    };
                    s.churn.push(ChurnEvent { round, kind });
                }
            }
        }
        if let Some(fraction) = privacy_fraction {
            s.privacy = Some(PrivacyConfig {
                fraction,
                capacity: privacy_capacity.unwrap_or(1),
                duration_rounds: privacy_duration,
            });
        }
        s.validate()?;
        Ok(s)
    }
}

fn parse_node(fields: &[&str]) -> Result<NodeSpec, String> {
    let id: u64 = fields[0].parse().map_err(|e| format!("node id: {e}"))?;
    let f = |i: usize| fields[i].parse::<f64>().map_err(|e| format!("field {i}: {e}"));
    let location = GeoPoint::new(f(1)?, f(2)?).map_err(|e| e.to_string())?;
    NodeSpec::new(NodeId(id), location, f(3)?).map_err(|e| e.to_string())
}

/// A rectangle of `width_m` by `height_m` meters whose south-west corner is
/// `origin`, mapped to the globe on a local flat grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub origin: GeoPoint,
    pub width_m: f64,
    pub height_m: f64,
}

impl Region {
    pub fn new(origin: GeoPoint, width_m: f64, height_m: f64) -> Result<Self, ScenarioError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(width_m) || !ok(height_m) {
            return Err(ScenarioError::InvalidRegion(format!(
                "dimensions {width_m} x {height_m} must be positive"
            )));
        }
        let region = Region {
            origin,
            width_m,
            height_m,
        };
        region
            .point_at(width_m, height_m)
            .map_err(|e| ScenarioError::InvalidRegion(format!("region leaves the globe: {e}")))?;
        Ok(region)
    }

    /// A region of the given size with its south-west corner at 60°N 10°E.
    pub fn meters(width_m: f64, height_m: f64) -> Result<Self, ScenarioError> {
        Region::new(GeoPoint::new(60.0, 10.0).expect("valid"), width_m, height_m)
    }

    pub fn area_m2(&self) -> f64 {
        self.width_m * self.height_m
    }

    pub fn point_at(&self, east: f64, north: f64) -> Result<GeoPoint, GeoError> {
        self.origin.offset_m(east, north)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        (
            rng.random_range(0.0..self.width_m),
            rng.random_range(0.0..self.height_m),
        )
    }
}

/// Distribution of coordination radii.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusLaw {
    Fixed(f64),
    Uniform { min: f64, max: f64 },
}

impl RadiusLaw {
    fn validate(&self) -> Result<(), ScenarioError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        match *self {
            RadiusLaw::Fixed(r) if ok(r) => Ok(()),
            RadiusLaw::Uniform { min, max } if ok(min) && ok(max) && min <= max => Ok(()),
            other => Err(invalid(format!("bad radius law {other:?}"))),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            RadiusLaw::Fixed(r) => r,
            RadiusLaw::Uniform { min, max } if min < max => rng.random_range(min..max),
            RadiusLaw::Uniform { min, .. } => min,
        }
    }

    /// Parses `300` or `100..500`.
    pub fn parse(text: &str) -> Option<Self> {
        match text.split_once("..") {
            Some((a, b)) => Some(RadiusLaw::Uniform {
                min: a.trim().parse().ok()?,
                max: b.trim().parse().ok()?,
            }),
            None => Some(RadiusLaw::Fixed(text.trim().parse().ok()?)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Placement {
    #[default]
    Uniform,
    /// Cluster centers uniform in the region; nodes uniform within
    /// `spread_m` of a randomly chosen center, clipped to the region.
    Clustered { clusters: usize, spread_m: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateSpec {
    pub n: usize,
    pub region: Region,
    pub radius: RadiusLaw,
    pub placement: Placement,
    /// Number of seed nodes, picked closest to the region's south-west
    /// corner so that the seed is far from most of the overlay.
    pub seed_count: usize,
    pub rng_seed: u64,
}

impl GenerateSpec {
    pub fn uniform(n: usize, region: Region, radius: RadiusLaw, rng_seed: u64) -> Self {
        GenerateSpec {
            n,
            region,
            radius,
            placement: Placement::Uniform,
            seed_count: 1,
            rng_seed,
        }
    }
}

pub fn generate_scenario(spec: &GenerateSpec) -> Result<Scenario, ScenarioError> {
    if spec.n == 0 {
        return Err(invalid("need at least one node"));
    }
    spec.radius.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let region = spec.region;
    let centers: Vec<(f64, f64)> = match spec.placement {
        Placement::Uniform => Vec::new(),
        Placement::Clustered { clusters, spread_m } => {
            if clusters == 0 || !(spread_m.is_finite() && spread_m >= 0.0) {
                return Err(invalid("clustered placement needs clusters > 0 and spread >= 0"));
            }
            (0..clusters).map(|_| region.sample(&mut rng)).collect()
        }
    };
    let mut placed: Vec<(f64, f64, NodeSpec)> = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let (x, y) = match spec.placement {
            Placement::Uniform => region.sample(&mut rng),
            Placement::Clustered { spread_m, .. } => {
                let &(cx, cy) = centers.choose(&mut rng).expect("clusters > 0");
                let r = spread_m * rng.random::<f64>().sqrt();
                let t = rng.random_range(0.0..std::f64::consts::TAU);
                (
                    (cx + r * t.cos()).clamp(0.0, region.width_m),
                    (cy + r * t.sin()).clamp(0.0, region.height_m),
                )
            }
        };
        let radius = spec.radius.sample(&mut rng);
        let node = NodeSpec::new(NodeId(i as u64), region.point_at(x, y)?, radius)?;
        placed.push((x, y, node));
    }
    let mut by_corner: Vec<&(f64, f64, NodeSpec)> = placed.iter().collect();
    by_corner.sort_by(|a, b| {
        (a.0 * a.0 + a.1 * a.1)
            .total_cmp(&(b.0 * b.0 + b.1 * b.1))
            .then(a.2.id.cmp(&b.2.id))
    });
    let seeds = by_corner
        .iter()
        .take(spec.seed_count.clamp(1, spec.n))
        .map(|p| p.2.id)
        .collect();
    Ok(Scenario::new(
        placed.into_iter().map(|p| p.2).collect(),
        seeds,
        spec.rng_seed,
    ))
}

/// Steady churn: from `start_round` to `end_round` (exclusive), each round
/// `rate × initial size` random non-seed nodes leave and as many fresh nodes
/// join at random positions.
#[derive(Debug, Clone, PartialEq)]
pub struct ChurnSpec {
    pub rate: f64,
    pub start_round: u64,
    pub end_round: u64,
    pub region: Region,
    pub radius: RadiusLaw,
    pub rng_seed: u64,
}

/// Appends a generated churn schedule to `scenario`.
pub fn generate_churn(scenario: &mut Scenario, spec: &ChurnSpec) -> Result<(), ScenarioError> {
    if !(spec.rate.is_finite() && (0.0..=1.0).contains(&spec.rate)) {
        return Err(invalid("churn rate must lie in [0, 1]"));
    }
    spec.radius.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed ^ 0x6368_7572_6e00_0000);
    let per_round = (spec.rate * scenario.nodes.len() as f64).round() as usize;
    let seeds: BTreeSet<NodeId> = scenario.seeds.iter().copied().collect();
    let last = scenario.churn.last().map_or(0, |e| e.round);
    if last > spec.start_round {
        return Err(invalid("new churn must start after existing events"));
    }
    let mut alive: BTreeSet<NodeId> = scenario.alive_at(u64::MAX).iter().map(|n| n.id).collect();
    let mut next_id = scenario
        .nodes
        .iter()
        .map(|n| n.id.0)
        .chain(scenario.churn.iter().filter_map(|e| match e.kind {
            ChurnKind::Join(n) => Some(n.id.0),
            ChurnKind::Leave(_) => None,
        }))
        .max()
        .map_or(0, |m| m + 1);
    for round in spec.start_round..spec.end_round {
        let leavers: Vec<NodeId> = alive.iter().copied().filter(|id| !seeds.contains(id)).collect();
        let chosen: Vec<NodeId> = leavers.choose_multiple(&mut rng, per_round).copied().collect();
        for id in chosen {
            alive.remove(&id);
            scenario.churn.push(ChurnEvent {
                round,
                kind: ChurnKind::Leave(id),
            });
        }
        for _ in 0..per_round {
            let (x, y) = spec.region.sample(&mut rng);
            let node = NodeSpec::new(NodeId(next_id), spec.region.point_at(x, y)?, spec.radius.sample(&mut rng))?;
            next_id += 1;
            alive.insert(node.id);
            scenario.churn.push(ChurnEvent {
                round,
                kind: ChurnKind::Join(node),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Scenario {
        let region = Region::meters(2000.0, 2000.0).unwrap();
        generate_scenario(&GenerateSpec::uniform(20, region, RadiusLaw::Uniform { min: 50.0, max: 300.0 }, 9)).unwrap()
    }

    #[test]
    fn one_node() {
        let region = Region::meters(1000.0, 1000.0).unwrap();
        let s = generate_scenario(&GenerateSpec::uniform(1, region, RadiusLaw::Fixed(100.0), 1)).unwrap();
        assert_eq!(s.nodes.len(), 1);
        assert_eq!(s.seeds, vec![NodeId(0)]);
    }

    #[test]
    fn generation_is_reproducible() {
        assert_eq!(small(), small());
        let region = Region::meters(2000.0, 2000.0).unwrap();
        let other = generate_scenario(&GenerateSpec::uniform(20, region, RadiusLaw::Fixed(100.0), 10)).unwrap();
        assert_ne!(small().nodes, other.nodes);
    }

    #[test]
    fn bad_regions() {
        assert!(matches!(Region::meters(0.0, 10.0), Err(ScenarioError::InvalidRegion(_))));
        assert!(matches!(Region::meters(10.0, f64::NAN), Err(ScenarioError::InvalidRegion(_))));
        let north = GeoPoint::new(89.99, 0.0).unwrap();
        assert!(matches!(Region::new(north, 10.0, 50_000.0), Err(ScenarioError::InvalidRegion(_))));
    }

    #[test]
    fn seed_sits_in_the_corner() {
        let s = small();
        let seed = s.node(s.seeds[0]).unwrap();
        let origin = GeoPoint::new(60.0, 10.0).unwrap();
        let d0 = crate::geo::distance(&origin, &seed.location);
        assert!(s.nodes.iter().all(|n| crate::geo::distance(&origin, &n.location) >= d0 - 1e-6));
    }

    #[test]
    fn clustered_placement_stays_in_region() {
        let region = Region::meters(5000.0, 5000.0).unwrap();
        let spec = GenerateSpec {
            placement: Placement::Clustered { clusters: 4, spread_m: 400.0 },
            ..GenerateSpec::uniform(200, region, RadiusLaw::Fixed(100.0), 3)
        };
        let s = generate_scenario(&spec).unwrap();
        let max = region.point_at(5000.0, 5000.0).unwrap();
        for n in &s.nodes {
            assert!(n.location.lat() >= 60.0 - 1e-9 && n.location.lat() <= max.lat() + 1e-9);
        }
    }

    #[test]
    fn text_round_trip() {
        let mut s = small();
        s.privacy = Some(PrivacyConfig { fraction: 0.25, capacity: 2, duration_rounds: Some(7) });
        s.params.partner = PartnerSelection::Uniform;
        let region = Region::meters(2000.0, 2000.0).unwrap();
        generate_churn(
            &mut s,
            &ChurnSpec { rate: 0.1, start_round: 2, end_round: 5, region, radius: RadiusLaw::Fixed(120.0), rng_seed: 4 },
        )
        .unwrap();
        let text = s.to_text();
        let back = Scenario::from_text(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn churn_schedule_replays() {
        let mut s = small();
        let region = Region::meters(2000.0, 2000.0).unwrap();
        generate_churn(
            &mut s,
            &ChurnSpec { rate: 0.1, start_round: 1, end_round: 10, region, radius: RadiusLaw::Fixed(120.0), rng_seed: 4 },
        )
        .unwrap();
        s.validate().unwrap();
        assert_eq!(s.churn.len(), 2 * 2 * 9);
        assert_eq!(s.alive_at(9).len(), 20);
        assert!(s.churn.iter().all(|e| !matches!(e.kind, ChurnKind::Leave(id) if s.seeds.contains(&id))));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = Scenario::from_text("format = 1\nbogus = 3\n").unwrap_err();
        assert_eq!(err, ScenarioError::Parse { line: 2, msg: "unknown key bogus".into() });
        let err = Scenario::from_text("[nodes]\n0 91 0 10\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { line: 2, .. }));
        let err = Scenario::from_text("seeds = 4\n[nodes]\n0 60 10 10\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Invalid(_)));
    }

    #[test]
    fn leave_of_unknown_node_is_rejected() {
        let mut s = small();
        s.churn.push(ChurnEvent { round: 1, kind: ChurnKind::Leave(NodeId(999)) });
        assert!(s.validate().is_err());
    }

    #[test]
    fn endpoints_embed_the_id() {
        let n = NodeSpec::new(NodeId(0x0102_0304_0506_0708), GeoPoint::new(0.0, 0.0).unwrap(), 1.0).unwrap();
        assert_eq!(n.endpoint().to_string(), "2001:db8::102:304:506:708");
    }
}
