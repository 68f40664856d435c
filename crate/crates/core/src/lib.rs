//! Gossip-based discovery of radio nodes whose coordination areas overlap.
//!
//! Agents running on access points, base stations and similar devices talk
//! to each other over the back-haul network. Each agent announces a
//! 56-byte [`wire::DiscoveryItem`] (who, where, how far, how to reach it,
//! when) and gossips with one peer at a time. Two mechanisms run side by
//! side on every node:
//!
//! * [`sampling`]: random peer sampling, a constantly refreshed random
//!   slice of the whole overlay;
//! * [`overlay`]: a ranking overlay that converges each node's view onto
//!   the peers whose areas overlap its own most, and produces the
//!   [`overlay::CandidateList`].
//!
//! [`sim`] runs both over a simulated back-haul in deterministic rounds and
//! scores the candidate lists against an exhaustive ground truth.
//! [`spectrum`] turns candidate lists into an interference graph, assigns
//! channels and decides whether an access point should keep following a
//! channel hint. [`gateway`] covers agents that front many access points
//! and privacy delegation.
//!
//! See the `examples/` directory for one runnable walkthrough per
//! capability.

pub mod gateway;
pub mod geo;
pub mod overlay;
pub mod sampling;
pub mod sim;
pub mod spectrum;
pub mod wire;

pub use geo::{CoordinationArea, GeoPoint, NodeId, Utility};
pub use overlay::CandidateList;
pub use sim::{MetricsSeries, Scenario, Simulation};
pub use wire::{DiscoveryItem, Timestamp, WireFrame};
