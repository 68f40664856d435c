//! Privacy nodes publish a partner's endpoint instead of their own. The same
//! scenario with and without delegation discovers the same neighbors.
//!
//! ```text
//! cargo run --release --example privacy_delegation
//! ```

use geodisco::sim::{generate_scenario, GenerateSpec, PrivacyConfig, RadiusLaw, Region, Simulation};

fn main() {
    let region = Region::meters(5000.0, 5000.0).unwrap();
    let plain = generate_scenario(&GenerateSpec::uniform(300, region, RadiusLaw::Fixed(300.0), 21)).unwrap();
    let mut private = plain.clone();
    private.privacy = Some(PrivacyConfig { fraction: 0.25, capacity: 2, duration_rounds: Some(20) });

    let mut a = Simulation::new(plain).unwrap();
    let mut b = Simulation::new(private).unwrap();
    a.run_rounds(30);
    b.run_rounds(30);

    let members = b.privacy_members();
    println!("{} privacy nodes", members.len());
    for &id in members.iter().take(5) {
        println!(
            "  node {id}: fronted by {} at {}",
            b.delegate_of(id).unwrap(),
            b.advertised_endpoint(id).unwrap()
        );
    }

    let same = a.candidate_lists().iter().zip(b.candidate_lists().iter()).all(|((_, x), (_, y))| {
        x.ids().eq(y.ids()) && x.entries.iter().zip(&y.entries).all(|(p, q)| p.1 == q.1)
    });
    let leaks: u64 = b.metrics().rounds.iter().map(|m| m.privacy_leaks).sum();
    println!("candidate lists identical: {same}");
    println!("frames exposing a privacy node's own endpoint: {leaks}");
}
