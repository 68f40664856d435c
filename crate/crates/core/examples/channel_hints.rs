//! Discover candidates, build the interference graph, assign three channels,
//! then let one access point react to a good hint and a bad one.
//!
//! ```text
//! cargo run --release --example channel_hints
//! ```

use geodisco::sim::{generate_scenario, GenerateSpec, RadiusLaw, Region, Simulation};
use geodisco::spectrum::{
    brute_force_assign, greedy_assign, node_conflict, total_conflict, Assignment, HintPolicy, HintState,
    InterferenceGraph,
};
use rand::SeedableRng;

fn main() {
    let region = Region::meters(1500.0, 1500.0).unwrap();
    let scenario =
        generate_scenario(&GenerateSpec::uniform(9, region, RadiusLaw::Uniform { min: 150.0, max: 450.0 }, 11)).unwrap();
    let mut sim = Simulation::new(scenario).unwrap();
    sim.run_rounds(10);

    let graph = InterferenceGraph::from_candidate_lists(sim.candidate_lists().values());
    let greedy = greedy_assign(&graph, 3).unwrap();
    let (_, optimum) = brute_force_assign(&graph, 3).unwrap();
    println!("{} nodes, {} edges", graph.node_count(), graph.edge_count());
    println!("greedy conflict {:.0} m², optimum {:.0} m²", total_conflict(&graph, &greedy), optimum);
    print!("{}", greedy.to_csv(&graph));

    // one node considers hints; quality is minus its same-channel overlap
    let node = graph.nodes().max_by(|a, b| graph.weighted_degree(*a).total_cmp(&graph.weighted_degree(*b))).unwrap();
    let qoe = |a: &Assignment| -node_conflict(&graph, a, node);
    let policy = HintPolicy::new(3);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let mut current = greedy.clone();
    let mut state = HintState::new(current.get(node).unwrap());

    let worst = (0..3)
        .max_by(|&a, &b| {
            let mut x = current.clone();
            x.set(node, a).unwrap();
            let mut y = current.clone();
            y.set(node, b).unwrap();
            qoe(&y).total_cmp(&qoe(&x))
        })
        .unwrap();
    println!("node {node} on channel {} with quality {:.0}", state.current, qoe(&current));
    let hints = [Some(worst), None, None];
    for hint in hints {
        let ch = state.step(hint, qoe(&current), &policy, &mut rng);
        current.set(node, ch).unwrap();
        println!("hint {hint:?} -> channel {ch} ({:?}), quality {:.0}", state.mode, qoe(&current));
    }
}
