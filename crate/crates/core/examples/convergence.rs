//! 1000 nodes in a 10 km square, one seed in the corner. Prints the recall
//! curve; with GEODISCO_OUT_DIR set it also writes `convergence.csv`.
//!
//! ```text
//! cargo run --release --example convergence
//! ```

use geodisco::sim::{generate_scenario, GenerateSpec, RadiusLaw, Region, Simulation};

fn main() {
    let region = Region::meters(10_000.0, 10_000.0).unwrap();
    let scenario = generate_scenario(&GenerateSpec::uniform(1000, region, RadiusLaw::Fixed(300.0), 7)).unwrap();
    let mut sim = Simulation::new(scenario).unwrap();
    println!("mean true candidates per node: {:.2}", sim.ground_truth().mean_size());

    for _ in 0..30 {
        let m = sim.step();
        let bar = "#".repeat((m.mean_recall * 50.0).round() as usize);
        println!("{:>3} {:.4} {bar}", m.round, m.mean_recall);
    }
    let series = sim.metrics();
    println!("rounds to 0.99 recall: {:?}", series.convergence_round(0.99));
    println!(
        "traffic per node: {:.0} B/s sent+received ({:.0} B/s sent)",
        series.traffic_bytes_per_second(),
        series.rounds.iter().map(|m| m.bytes_sent_mean()).sum::<f64>() / series.rounds.len() as f64 / series.period_seconds
    );

    if let Ok(dir) = std::env::var("GEODISCO_OUT_DIR") {
        let path = std::path::Path::new(&dir).join("convergence.csv");
        std::fs::write(&path, series.to_csv()).unwrap();
        println!("wrote {}", path.display());
    }
}
