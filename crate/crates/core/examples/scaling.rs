//! Rounds to 0.99 recall as the network grows at constant density.
//!
//! ```text
//! cargo run --release --example scaling
//! ```

use geodisco::sim::{generate_scenario, GenerateSpec, RadiusLaw, Region, Simulation};

fn main() {
    for (n, side) in [(250, 5_000.0), (1000, 10_000.0), (4000, 20_000.0)] {
        let region = Region::meters(side, side).unwrap();
        let mut rounds = Vec::new();
        for seed in 0..3 {
            let s = generate_scenario(&GenerateSpec::uniform(n, region, RadiusLaw::Fixed(300.0), seed)).unwrap();
            let mut sim = Simulation::new(s).unwrap();
            while sim.metrics().convergence_round(0.99).is_none() && sim.round() < 60 {
                sim.step();
            }
            rounds.push(sim.metrics().convergence_round(0.99).unwrap_or(u64::MAX));
        }
        println!("n = {n:>5}: rounds to 0.99 recall {rounds:?}");
    }
}
