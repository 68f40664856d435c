use std::fmt::Write as _;

use crate::wire::FRAME_LEN;

/// What one simulated round produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RoundMetrics {
    pub round: u64,
    pub live_nodes: usize,
    pub mean_recall: f64,
    pub min_recall: f64,
    /// Recall over nodes that have been alive for at least the settling
    /// period; `None` while no node qualifies.
    pub settled_mean_recall: Option<f64>,
    pub settled_nodes: usize,
    pub descriptors_sent: u64,
    pub descriptors_received: u64,
    pub bytes_sent: u64,
    pub bytes_received: u64,
    /// Transmitted items of privacy nodes that carried the node's own
    /// endpoint.
    pub privacy_leaks: u64,
}

impl RoundMetrics {
    pub fn bytes_sent_mean(&self) -> f64 {
        if self.live_nodes == 0 {
            0.0
        } else {
            self.bytes_sent as f64 / self.live_nodes as f64
        }
    }

    /// Mean bytes sent plus received per live node.
    pub fn traffic_mean(&self) -> f64 {
        if self.live_nodes == 0 {
            0.0
        } else {
            (self.bytes_sent + self.bytes_received) as f64 / self.live_nodes as f64
        }
    }

    pub fn accounting_holds(&self) -> bool {
        self.bytes_sent == FRAME_LEN as u64 * self.descriptors_sent
            && self.bytes_received == FRAME_LEN as u64 * self.descriptors_received
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsSeries {
    pub period_seconds: f64,
    pub rounds: Vec<RoundMetrics>,
}

impl MetricsSeries {
    pub fn new(period_seconds: f64) -> Self {
        MetricsSeries {
            period_seconds,
            rounds: Vec::new(),
        }
    }

    pub fn last(&self) -> Option<&RoundMetrics> {
        self.rounds.last()
    }

    /// Rounds run until mean recall first reaches `threshold`.
    pub fn convergence_round(&self, threshold: f64) -> Option<u64> {
        convergence_round(self, threshold)
    }

    /// Mean per-node traffic (sent plus received) in bytes per second,
    /// averaged over all recorded rounds.
    pub fn traffic_bytes_per_second(&self) -> f64 {
        if self.rounds.is_empty() {
            return 0.0;
        }
        let per_round: f64 = self.rounds.iter().map(RoundMetrics::traffic_mean).sum::<f64>()
            / self.rounds.len() as f64;
        per_round / self.period_seconds
    }

    pub fn total_descriptors(&self) -> (u64, u64) {
        self.rounds.iter().fold((0, 0), |(s, r), m| {
            (s + m.descriptors_sent, r + m.descriptors_received)
        })
    }

    pub fn total_bytes(&self) -> (u64, u64) {
        self.rounds
            .iter()
            .fold((0, 0), |(s, r), m| (s + m.bytes_sent, r + m.bytes_received))
    }

    pub fn is_recall_monotone(&self) -> bool {
        self.rounds
            .windows(2)
            .all(|w| w[1].mean_recall >= w[0].mean_recall && w[1].min_recall >= w[0].min_recall)
    }

    /// Mean of the settled-node recall over rounds `from..`.
    pub fn settled_recall_from(&self, from: u64) -> Option<f64> {
        let vals: Vec<f64> = self
            .rounds
            .iter()
            .filter(|m| m.round >= from)
            .filter_map(|m| m.settled_mean_recall)
            .collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }

    /// `round,mean_recall,min_recall,bytes_sent_mean,live_nodes`, one row
    /// per round.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("round,mean_recall,min_recall,bytes_sent_mean,live_nodes\n");
        for m in &self.rounds {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.3},{}",
                m.round,
                m.mean_recall,
                m.min_recall,
                m.bytes_sent_mean(),
                m.live_nodes
            );
        }
        out
    }
}

/// Number of rounds run until mean recall first reaches `threshold`, if it
/// does. A series already at the threshold after its first round gives 1.
pub fn convergence_round(series: &MetricsSeries, threshold: f64) -> Option<u64> {
    let first = series.rounds.first()?.round;
    series
        .rounds
        .iter()
        .find(|m| m.mean_recall >= threshold)
        .map(|m| m.round - first + 1)
}
