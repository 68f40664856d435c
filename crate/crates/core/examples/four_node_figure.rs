//! The four-node layout: D overlaps everyone, A and B overlap each other,
//! C only touches D. Gossip from a single seed finds exactly these pairs.
//!
//! ```text
//! cargo run --example four_node_figure
//! ```

use geodisco::geo::{overlap_area, separation};
use geodisco::sim::fixtures::{four_node_figure, FIGURE_IDS};
use geodisco::sim::{ground_truth, Simulation};

fn main() {
    let scenario = four_node_figure();
    let names = |id| ["A", "B", "C", "D"][FIGURE_IDS.iter().position(|&x| x == id).unwrap()];

    for a in &scenario.nodes {
        for b in &scenario.nodes {
            if a.id < b.id {
                println!(
                    "{}-{}: separation {:>7.1} m, overlap {:>9.0} m²",
                    names(a.id),
                    names(b.id),
                    separation(&a.area(), &b.area()),
                    overlap_area(&a.area(), &b.area()).value()
                );
            }
        }
    }

    let truth = ground_truth(&scenario, 0);
    let mut sim = Simulation::new(scenario).unwrap();
    for _ in 0..5 {
        let m = sim.step();
        println!("round {}: mean recall {:.3}", m.round, m.mean_recall);
    }
    for id in FIGURE_IDS {
        let found: Vec<&str> = sim.candidate_list(id).unwrap().ids().map(names).collect();
        let expected: Vec<&str> = truth.candidates(id).unwrap().iter().map(|&c| names(c)).collect();
        println!("{}: found {:?}, expected {:?}", names(id), found, expected);
    }
}
