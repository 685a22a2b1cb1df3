//! Circuits and their bandwidth, latency and efficiency metrics.

use serde::{Deserialize, Serialize};

use crate::error::MetricError;
use crate::netmodel::{LatencyMatrix, NetworkTopology, RegionId, RelayId};
use crate::strategies::StrategyKind;

/// Throughput of a three-hop circuit: its slowest member.
pub fn bottleneck_bandwidth(
    bw_guard: f64,
    bw_middle: f64,
    bw_exit: f64,
) -> Result<f64, MetricError> {
    for bw in [bw_guard, bw_middle, bw_exit] {
        if !(bw > 0.0) {
            return Err(MetricError::NonPositiveBandwidth(bw));
        }
    }
    Ok(bw_guard.min(bw_middle).min(bw_exit))
}

/// Guard-to-middle plus middle-to-exit delay.
pub fn circuit_latency(
    matrix: &LatencyMatrix,
    region_g: RegionId,
    region_m: RegionId,
    region_e: RegionId,
) -> f64 {
    matrix.get(region_g, region_m) + matrix.get(region_m, region_e)
}

/// `B / (L + 1)`. Mixed units; treated as a unitless score.
pub fn circuit_efficiency(bandwidth_kbps: f64, latency_ms: f64) -> Result<f64, MetricError> {
    if !(bandwidth_kbps > 0.0) {
        return Err(MetricError::NonPositiveBandwidth(bandwidth_kbps));
    }
    if !(latency_ms >= 0.0) {
        return Err(MetricError::NegativeLatency(latency_ms));
    }
    Ok(bandwidth_kbps / (latency_ms + 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub guard_id: RelayId,
    pub middle_id: RelayId,
    pub exit_id: RelayId,
    pub bandwidth_kbps: f64,
    pub latency_ms: f64,
    pub efficiency: f64,
    /// Wall-clock time spent in the selection routine; zero unless timing
    /// was requested.
    pub build_time_us: u64,
    pub strategy: StrategyKind,
    pub success: bool,
}

impl Circuit {
    /// Computes the metrics of an already selected triple.
    pub fn assemble(
        topology: &NetworkTopology,
        strategy: StrategyKind,
        guard_id: RelayId,
        middle_id: RelayId,
        exit_id: RelayId,
    ) -> Circuit {
        let (g, m, e) = (
            topology.relay(guard_id),
            topology.relay(middle_id),
            topology.relay(exit_id),
        );
        let bandwidth_kbps = bottleneck_bandwidth(g.bandwidth_kbps, m.bandwidth_kbps, e.bandwidth_kbps)
            .expect("relay bandwidths are positive");
        let latency_ms = circuit_latency(&topology.latency, g.region, m.region, e.region);
        let efficiency =
            circuit_efficiency(bandwidth_kbps, latency_ms).expect("matrix entries are positive");
        Circuit {
            guard_id,
            middle_id,
            exit_id,
            bandwidth_kbps,
            latency_ms,
            efficiency,
            build_time_us: 0,
            strategy,
            success: true,
        }
    }

    pub fn relay_ids(&self) -> [RelayId; 3] {
        [self.guard_id, self.middle_id, self.exit_id]
    }

    /// True when the stored metrics equal a fresh recomputation from the
    /// member relays.
    pub fn metrics_match(&self, topology: &NetworkTopology) -> bool {
        let fresh = Circuit::assemble(
            topology,
            self.strategy,
            self.guard_id,
            self.middle_id,
            self.exit_id,
        );
        fresh.bandwidth_kbps == self.bandwidth_kbps
            && fresh.latency_ms == self.latency_ms
            && fresh.efficiency == self.efficiency
    }
}
