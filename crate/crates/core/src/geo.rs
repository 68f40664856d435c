//! Geometric and identity primitives.
//!
//! Every radio node announces a [`CoordinationArea`]: a disk around its
//! location inside which frequency use has to be coordinated. Two nodes are
//! candidates for each other when their disks overlap, and the overlap area
//! is the [`Utility`] used to rank peers.
//!
//! Distances are great-circle distances on a spherical Earth. The overlap of
//! two disks is then evaluated with the planar lens formula at that center
//! distance. Coordination radii are at most tens of kilometres, where the
//! flat-plane error of the lens area stays below 0.1 %.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

/// Mean Earth radius used for all distance computations, in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180)")]
    Longitude(f64),
    #[error("coordination radius {0} is not a finite non-negative number")]
    Radius(f64),
}

/// Overlay node identifier. Ordering is total and is used for tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for NodeId {
    fn from(v: u64) -> Self {
        NodeId(v)
    }
}

/// A validated latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::Latitude(lat));
        }
        if !lon.is_finite() || !(-180.0..180.0).contains(&lon) {
            return Err(GeoError::Longitude(lon));
        }
        Ok(GeoPoint { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    /// Moves the point `east` and `north` meters on a local equirectangular
    /// grid. Longitude wraps; latitude must stay inside the valid range.
    pub fn offset_m(&self, east: f64, north: f64) -> Result<GeoPoint, GeoError> {
        let lat = self.lat + (north / EARTH_RADIUS_M).to_degrees();
        let scale = self.lat.to_radians().cos().max(1e-12);
        let mut lon = self.lon + (east / (EARTH_RADIUS_M * scale)).to_degrees();
        lon = (lon + 180.0).rem_euclid(360.0) - 180.0;
        GeoPoint::new(lat, lon)
    }

    fn canonical_cmp(&self, other: &GeoPoint) -> Ordering {
        self.lat
            .total_cmp(&other.lat)
            .then(self.lon.total_cmp(&other.lon))
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lat, self.lon)
    }
}

/// A disk of `radius` meters around `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinationArea {
    center: GeoPoint,
    radius: f64,
}

impl CoordinationArea {
    pub fn new(center: GeoPoint, radius: f64) -> Result<Self, GeoError> {
        if !radius.is_finite() || radius < 0.0 {
            return Err(GeoError::Radius(radius));
        }
        Ok(CoordinationArea { center, radius })
    }

    pub fn center(&self) -> GeoPoint {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Area of the disk itself, in square meters.
    pub fn area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    fn canonical_cmp(&self, other: &CoordinationArea) -> Ordering {
        self.radius
            .total_cmp(&other.radius)
            .then_with(|| self.center.canonical_cmp(&other.center))
    }
}

/// Degree of overlap between two coordination areas. Never negative.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Utility(f64);

impl Utility {
    pub const ZERO: Utility = Utility(0.0);

    /// Clamps negative and NaN inputs to zero.
    pub fn new(value: f64) -> Self {
        if value > 0.0 {
            Utility(value)
        } else {
            Utility(0.0)
        }
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    pub fn is_positive(&self) -> bool {
        self.0 > 0.0
    }
}

impl Eq for Utility {}

impl PartialOrd for Utility {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Utility {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for Utility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Great-circle (haversine) distance in meters.
pub fn distance(a: &GeoPoint, b: &GeoPoint) -> f64 {
    let (a, b) = if a.canonical_cmp(b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let s1 = (dphi / 2.0).sin();
    let s2 = (dlambda / 2.0).sin();
    let h = (s1 * s1 + phi1.cos() * phi2.cos() * s2 * s2).clamp(0.0, 1.0);
    2.0 * EARTH_RADIUS_M * h.sqrt().atan2((1.0 - h).sqrt())
}

/// Intersection area of two planar disks with radii `r1`, `r2` whose
/// centers are `d` apart.
pub fn lens_area(r1: f64, r2: f64, d: f64) -> f64 {
    let (small, large) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
    if d >= small + large || small == 0.0 {
        return 0.0;
    }
    if d + small <= large {
        return PI * small * small;
    }
    let a1 = ((d * d + small * small - large * large) / (2.0 * d * small)).clamp(-1.0, 1.0);
    let a2 = ((d * d + large * large - small * small) / (2.0 * d * large)).clamp(-1.0, 1.0);
    let k = (-d + small + large) * (d + small - large) * (d - small + large) * (d + small + large);
    let area = small * small * a1.acos() + large * large * a2.acos() - 0.5 * k.max(0.0).sqrt();
    area.clamp(0.0, PI * small * small)
}

/// Area shared by two coordination areas, in square meters.
///
/// Symmetric bit for bit: the arguments are put in a canonical order before
/// evaluation.
pub fn overlap_area(a: &CoordinationArea, b: &CoordinationArea) -> Utility {
    let (a, b) = if a.canonical_cmp(b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    let d = distance(&a.center, &b.center);
    Utility::new(lens_area(a.radius, b.radius, d))
}

/// Distance between the disk edges: negative when the disks overlap.
pub fn separation(a: &CoordinationArea, b: &CoordinationArea) -> f64 {
    distance(&a.center, &b.center) - a.radius - b.radius
}

/// Strict overlap. Tangent disks are not candidates.
pub fn is_candidate(a: &CoordinationArea, b: &CoordinationArea) -> bool {
    separation(a, b) < 0.0
}

/// How overlap is turned into a ranking utility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UtilityKind {
    /// Raw intersection area in square meters.
    #[default]
    OverlapArea,
    /// Intersection area divided by the smaller disk's area, in [0, 1].
    NormalizedOverlap,
}

impl UtilityKind {
    pub fn utility(&self, a: &CoordinationArea, b: &CoordinationArea) -> Utility {
        let raw = overlap_area(a, b);
        match self {
            UtilityKind::OverlapArea => raw,
            UtilityKind::NormalizedOverlap => {
                let smaller = a.area().min(b.area());
                if smaller > 0.0 {
                    Utility::new(raw.value() / smaller)
                } else {
                    Utility::ZERO
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            UtilityKind::OverlapArea => "overlap-area",
            UtilityKind::NormalizedOverlap => "normalized-overlap",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "overlap-area" => Some(UtilityKind::OverlapArea),
            "normalized-overlap" => Some(UtilityKind::NormalizedOverlap),
            _ => None,
        }
    }
}
