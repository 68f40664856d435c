//! Steady churn: every round 1% of the nodes leave without notice and as
//! many new ones join. Recall is tracked over nodes alive for 10+ rounds.
//!
//! ```text
//! cargo run --release --example churn
//! ```

use geodisco::sim::{generate_churn, generate_scenario, ChurnSpec, GenerateSpec, RadiusLaw, Region, Simulation};

fn main() {
    let region = Region::meters(10_000.0, 10_000.0).unwrap();
    let radius = RadiusLaw::Fixed(300.0);
    let mut scenario = generate_scenario(&GenerateSpec::uniform(1000, region, radius, 3)).unwrap();
    generate_churn(
        &mut scenario,
        &ChurnSpec { rate: 0.01, start_round: 1, end_round: 100, region, radius, rng_seed: 3 },
    )
    .unwrap();

    let mut sim = Simulation::new(scenario).unwrap();
    for _ in 0..100 {
        let m = sim.step();
        if m.round % 10 == 9 {
            println!(
                "round {:>3}: live {}, recall {:.3}, settled recall {}",
                m.round,
                m.live_nodes,
                m.mean_recall,
                m.settled_mean_recall.map_or("-".into(), |r| format!("{r:.3} over {} nodes", m.settled_nodes))
            );
        }
    }
    let steady = sim.metrics().settled_recall_from(30).unwrap();
    println!("steady-state settled recall (rounds 30..100): {steady:.4}");
}
