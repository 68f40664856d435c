//! Encode a discovery item, look at the bytes, decode it again.
//!
//! ```text
//! cargo run --example wire_frame
//! ```

use geodisco::geo::{CoordinationArea, GeoPoint, NodeId};
use geodisco::wire::{decode, decode_bytes, encode, DiscoveryItem, Timestamp, FRAME_LEN};

fn main() {
    let area = CoordinationArea::new(GeoPoint::new(63.4305, 10.3951).unwrap(), 250.0).unwrap();
    let item = DiscoveryItem::new(
        NodeId(0x2a),
        area,
        "192.0.2.17".parse().unwrap(),
        Timestamp(1_400_000_015_000),
    );
    let frame = encode(&item);
    println!("{FRAME_LEN}-byte frame:");
    for (name, range) in [
        ("id", 0..8),
        ("lat", 8..16),
        ("lon", 16..24),
        ("radius", 24..32),
        ("address", 32..48),
        ("timestamp", 48..56),
    ] {
        println!("  {name:<10} {}", hex::encode(&frame.as_bytes()[range]));
    }

    let back = decode(&frame).unwrap();
    assert_eq!(back, item);
    println!("decoded: id {} at {:?}, r = {} m, {} @ {}", back.id, back.location(), back.radius(), back.address(), back.timestamp);

    // v4 addresses travel v4-mapped and come back as plain v4
    assert!(back.address().is_ipv4());

    match decode_bytes(&frame.as_bytes()[..55]) {
        Err(e) => println!("truncated frame rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    let mut bad = *frame.as_bytes();
    bad[8..16].copy_from_slice(&91.0f64.to_be_bytes());
    println!("latitude 91 rejected: {}", decode_bytes(&bad).unwrap_err());
}
