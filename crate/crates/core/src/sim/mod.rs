//! Round-based simulation of the two gossip layers over a set of nodes.

pub mod engine;
pub mod fixtures;
pub mod metrics;
pub mod scenario;
pub mod truth;

pub use engine::{SimError, Simulation};
pub use metrics::{convergence_round, MetricsSeries, RoundMetrics};
pub use scenario::{
    generate_churn, generate_scenario, ChurnEvent, ChurnKind, ChurnSpec, GenerateSpec, NodeSpec,
    Placement, PrivacyConfig, ProtocolParams, RadiusLaw, Region, Scenario, ScenarioError,
};
pub use truth::{ground_truth, GroundTruth};

/// Runs `scenario` for `rounds` rounds and returns the per-round metrics.
pub fn run(scenario: &Scenario, rounds: u64) -> Result<MetricsSeries, ScenarioError> {
    let mut sim = Simulation::new(scenario.clone())?;
    sim.run_rounds(rounds);
    Ok(sim.into_metrics())
}
