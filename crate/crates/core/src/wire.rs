//! Discovery items and their fixed 56-byte wire frame.
//!
//! Every frame has the same layout regardless of address family. All
//! integers and floats are big-endian.
//!
//! | offset | length | field               | encoding                               |
//! |-------:|-------:|---------------------|----------------------------------------|
//! |      0 |      8 | identifier          | `u64` overlay node id                  |
//! |      8 |      8 | location: latitude  | IEEE-754 `f64`, degrees                |
//! |     16 |      8 | location: longitude | IEEE-754 `f64`, degrees                |
//! |     24 |      8 | coordination radius | IEEE-754 `f64`, meters                 |
//! |     32 |     16 | address             | IPv6; IPv4 as `::ffff:a.b.c.d`         |
//! |     48 |      8 | timestamp           | `u64` milliseconds since the Unix epoch|

use std::fmt;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use thiserror::Error;

use crate::geo::{CoordinationArea, GeoError, GeoPoint, NodeId};

/// Length of every encoded frame.
pub const FRAME_LEN: usize = 56;

/// Milliseconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub fn millis(&self) -> u64 {
        self.0
    }

    /// Milliseconds elapsed from `self` to `later`, zero if `later` is older.
    pub fn age_at(&self, later: Timestamp) -> u64 {
        later.0.saturating_sub(self.0)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One announcement of a radio node: who it is, where it is, how far its
/// coordination area reaches, how to reach it, and when this was said.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscoveryItem {
    pub id: NodeId,
    pub area: CoordinationArea,
    address: IpAddr,
    pub timestamp: Timestamp,
}

impl DiscoveryItem {
    /// IPv4-mapped IPv6 addresses are stored as IPv4 so that decoding a frame
    /// gives back exactly the item that was encoded.
    pub fn new(id: NodeId, area: CoordinationArea, address: IpAddr, timestamp: Timestamp) -> Self {
        DiscoveryItem {
            id,
            area,
            address: address.to_canonical(),
            timestamp,
        }
    }

    pub fn location(&self) -> GeoPoint {
        self.area.center()
    }

    pub fn radius(&self) -> f64 {
        self.area.radius()
    }

    pub fn address(&self) -> IpAddr {
        self.address
    }

    pub fn with_address(mut self, address: IpAddr) -> Self {
        self.address = address.to_canonical();
        self
    }

    pub fn with_timestamp(mut self, timestamp: Timestamp) -> Self {
        self.timestamp = timestamp;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("FrameLengthError: expected {FRAME_LEN} bytes, got {0}")]
    FrameLength(usize),
    #[error("FieldRangeError: {0}")]
    FieldRange(#[from] GeoError),
}

/// An encoded discovery item.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct WireFrame([u8; FRAME_LEN]);

impl WireFrame {
    pub fn from_bytes(bytes: [u8; FRAME_LEN]) -> Self {
        WireFrame(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, DecodeError> {
        let arr: [u8; FRAME_LEN] = bytes
            .try_into()
            .map_err(|_| DecodeError::FrameLength(bytes.len()))?;
        Ok(WireFrame(arr))
    }

    pub fn as_bytes(&self) -> &[u8; FRAME_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for WireFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WireFrame({})", self.to_hex())
    }
}

pub fn encode(item: &DiscoveryItem) -> WireFrame {
    let mut out = [0u8; FRAME_LEN];
    out[0..8].copy_from_slice(&item.id.0.to_be_bytes());
    out[8..16].copy_from_slice(&item.location().lat().to_be_bytes());
    out[16..24].copy_from_slice(&item.location().lon().to_be_bytes());
    out[24..32].copy_from_slice(&item.radius().to_be_bytes());
    let v6 = match item.address {
        IpAddr::V4(v4) => v4.to_ipv6_mapped(),
        IpAddr::V6(v6) => v6,
    };
    out[32..48].copy_from_slice(&v6.octets());
    out[48..56].copy_from_slice(&item.timestamp.0.to_be_bytes());
    WireFrame(out)
}

fn be_u64(bytes: &[u8]) -> u64 {
    u64::from_be_bytes(bytes.try_into().expect("8-byte field"))
}

fn be_f64(bytes: &[u8]) -> f64 {
    f64::from_be_bytes(bytes.try_into().expect("8-byte field"))
}

pub fn decode(frame: &WireFrame) -> Result<DiscoveryItem, DecodeError> {
    let b = &frame.0;
    let id = NodeId(be_u64(&b[0..8]));
    let location = GeoPoint::new(be_f64(&b[8..16]), be_f64(&b[16..24]))?;
    let area = CoordinationArea::new(location, be_f64(&b[24..32]))?;
    let octets: [u8; 16] = b[32..48].try_into().expect("16-byte field");
    let v6 = Ipv6Addr::from(octets);
    let address = match v6.to_ipv4_mapped() {
        Some(v4) => IpAddr::V4(v4),
        None => IpAddr::V6(v6),
    };
    let timestamp = Timestamp(be_u64(&b[48..56]));
    Ok(DiscoveryItem {
        id,
        area,
        address,
        timestamp,
    })
}

/// Decodes a raw byte slice, checking its length first.
pub fn decode_bytes(bytes: &[u8]) -> Result<DiscoveryItem, DecodeError> {
    decode(&WireFrame::from_slice(bytes)?)
}

/// Unspecified IPv4 address, handy for tests and fixtures.
pub const UNSPECIFIED_V4: IpAddr = IpAddr::V4(Ipv4Addr::UNSPECIFIED);

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn item(addr: IpAddr) -> DiscoveryItem {
        let area = CoordinationArea::new(GeoPoint::new(59.91, 10.75).unwrap(), 250.0).unwrap();
        DiscoveryItem::new(NodeId(42), area, addr, Timestamp(1_400_000_000_000))
    }

    #[test]
    fn v4_address_is_mapped() {
        let frame = encode(&item("192.0.2.1".parse().unwrap()));
        let addr = &frame.as_bytes()[32..48];
        assert!(addr[0..10].iter().all(|&b| b == 0));
        assert_eq!(&addr[10..12], &[0xff, 0xff]);
        assert_eq!(&addr[12..16], &[0xc0, 0x00, 0x02, 0x01]);
    }

    #[test]
    fn zero_item_encodes_to_zero_bytes() {
        let area = CoordinationArea::new(GeoPoint::new(0.0, 0.0).unwrap(), 0.0).unwrap();
        let v6 = DiscoveryItem::new(NodeId(0), area, IpAddr::V6(Ipv6Addr::UNSPECIFIED), Timestamp(0));
        assert_eq!(encode(&v6).as_bytes(), &[0u8; FRAME_LEN]);

        let v4 = DiscoveryItem::new(NodeId(0), area, UNSPECIFIED_V4, Timestamp(0));
        let mut expected = [0u8; FRAME_LEN];
        expected[42] = 0xff;
        expected[43] = 0xff;
        assert_eq!(encode(&v4).as_bytes(), &expected);
    }

    #[test]
    fn mapped_v6_input_is_canonicalized() {
        let mapped: IpAddr = "::ffff:10.0.0.1".parse().unwrap();
        let it = item(mapped);
        assert_eq!(it.address(), "10.0.0.1".parse::<IpAddr>().unwrap());
        assert_eq!(decode(&encode(&it)).unwrap(), it);
    }

    #[test]
    fn short_frame_is_rejected() {
        assert_eq!(decode_bytes(&[0u8; 55]), Err(DecodeError::FrameLength(55)));
        assert!(decode_bytes(&[0u8; 57]).is_err());
        assert!(format!("{}", DecodeError::FrameLength(55)).contains("FrameLengthError"));
    }

    #[test]
    fn out_of_range_latitude_is_rejected() {
        let mut bytes = *encode(&item(UNSPECIFIED_V4)).as_bytes();
        bytes[8..16].copy_from_slice(&91.0f64.to_be_bytes());
        assert_eq!(
            decode(&WireFrame::from_bytes(bytes)),
            Err(DecodeError::FieldRange(GeoError::Latitude(91.0)))
        );
    }

    #[test]
    fn nan_radius_is_rejected() {
        let mut bytes = *encode(&item(UNSPECIFIED_V4)).as_bytes();
        bytes[24..32].copy_from_slice(&f64::NAN.to_be_bytes());
        assert!(matches!(
            decode(&WireFrame::from_bytes(bytes)),
            Err(DecodeError::FieldRange(GeoError::Radius(_)))
        ));
    }

    fn arb_item() -> impl Strategy<Value = DiscoveryItem> {
        (
            any::<u64>(),
            -90.0f64..=90.0,
            -180.0f64..180.0,
            0.0f64..1e6,
            prop_oneof![
                any::<[u8; 4]>().prop_map(|o| IpAddr::from(o)),
                any::<[u8; 16]>().prop_map(|o| IpAddr::from(o)),
            ],
            any::<u64>(),
        )
            .prop_map(|(id, lat, lon, r, addr, ts)| {
                let area = CoordinationArea::new(GeoPoint::new(lat, lon).unwrap(), r).unwrap();
                DiscoveryItem::new(NodeId(id), area, addr, Timestamp(ts))
            })
    }

    proptest! {
        #[test]
        fn round_trip(it in arb_item()) {
            let frame = encode(&it);
            prop_assert_eq!(frame.as_bytes().len(), FRAME_LEN);
            let back = decode(&frame).unwrap();
            prop_assert_eq!(back, it);
            prop_assert_eq!(encode(&back), frame);
        }

        #[test]
        fn arbitrary_frames_never_panic(bytes in any::<[u8; FRAME_LEN]>()) {
            if let Ok(it) = decode(&WireFrame::from_bytes(bytes)) {
                prop_assert_eq!(decode(&encode(&it)).unwrap(), it);
            }
        }
    }
}
