//! One agent behind a firewall probes its LAN and speaks for every access
//! point it finds, all under its own public endpoint.
//!
//! ```text
//! cargo run --example agent_gateway
//! ```

use std::net::IpAddr;

use geodisco::gateway::{local_id_from_mac, AgentRegistry, BroadcastDomain, Responder};
use geodisco::geo::{CoordinationArea, GeoPoint, NodeId};
use geodisco::wire::{encode, DiscoveryItem, Timestamp};

fn main() {
    let agent: IpAddr = "203.0.113.5".parse().unwrap();
    let site = GeoPoint::new(59.9139, 10.7522).unwrap();
    let macs = [[0x02, 0, 0, 0, 0, 1], [0x02, 0, 0, 0, 0, 2], [0x02, 0, 0, 0, 0, 3]];
    let mut lan = BroadcastDomain::default();
    for (i, mac) in macs.iter().enumerate() {
        let spot = site.offset_m(40.0 * i as f64, 0.0).unwrap();
        let item = DiscoveryItem::new(
            NodeId(1000 + i as u64),
            CoordinationArea::new(spot, 60.0).unwrap(),
            format!("10.1.0.{}", 10 + i).parse().unwrap(),
            Timestamp(0),
        );
        lan.responders.push(Responder::new(local_id_from_mac(*mac), item));
    }
    lan.responders[1].replies = 2; // a retransmitted reply
    lan.responders[2].alive = false;

    println!("probe replies: {}", lan.probe().len());
    let mut registry = AgentRegistry::new();
    registry.announce_capacity(agent, 8);
    for cid in registry.discover_and_register(agent, &lan).unwrap() {
        let original = registry.resolve(&cid).unwrap();
        let emitted = registry.emitted(&cid).unwrap();
        println!(
            "{cid}: node {} private {} -> gossiped as {}",
            original.id,
            original.address(),
            emitted.address()
        );
        println!("  frame {}", encode(emitted).to_hex());
    }
    println!("spare slots left: {}", registry.spare_slots(agent));
    registry.check_invariants().unwrap();
}
