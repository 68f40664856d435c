//! Small hand-placed scenarios.

use crate::geo::{GeoPoint, NodeId};

use super::scenario::{NodeSpec, Scenario};

/// Ids of nodes A, B, C and D in [`four_node_figure`].
pub const FIGURE_IDS: [NodeId; 4] = [NodeId(1), NodeId(2), NodeId(3), NodeId(4)];

/// Four nodes around 60°N 10°E. D has a large area touching the other
/// three; A and B overlap each other; C overlaps only D. A is the seed.
///
/// | node | east m | north m | radius m |
/// |------|-------:|--------:|---------:|
/// | A    | -350   | 0       | 200      |
/// | B    | -150   | 150     | 200      |
/// | C    | 550    | 0       | 200      |
/// | D    | 0      | 0       | 400      |
pub fn four_node_figure() -> Scenario {
    let origin = GeoPoint::new(60.0, 10.0).expect("valid");
    let place = [(-350.0, 0.0, 200.0), (-150.0, 150.0, 200.0), (550.0, 0.0, 200.0), (0.0, 0.0, 400.0)];
    let nodes = FIGURE_IDS
        .iter()
        .zip(place)
        .map(|(&id, (e, n, r))| NodeSpec::new(id, origin.offset_m(e, n).expect("near origin"), r).expect("valid"))
        .collect();
    Scenario::new(nodes, vec![FIGURE_IDS[0]], 2)
}
