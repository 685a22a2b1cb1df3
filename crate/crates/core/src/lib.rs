//! Deterministic simulator for comparing Tor path-selection strategies.
//!
//! A run generates a synthetic relay network per scenario, builds circuits
//! with each of five selection strategies, and aggregates bottleneck
//! bandwidth, latency and efficiency per (scenario, strategy) cell.
//!
//! ```
//! use pathsim_core::{default_scenarios, run_matrix, StrategyKind};
//!
//! let scenarios = default_scenarios()[..1].to_vec();
//! let report = run_matrix(scenarios, vec![StrategyKind::GeoLatency], 42, 0.01).unwrap();
//! assert_eq!(report.cells[0].metrics.mean_latency_ms, 40.0);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuit;
pub mod error;
pub mod harness;
pub mod netmodel;
pub mod params;
pub mod report;
pub mod seed;
pub mod strategies;

#[cfg(test)]
pub(crate) mod testutil;

pub use circuit::{bottleneck_bandwidth, circuit_efficiency, circuit_latency, Circuit};
pub use error::{HarnessError, MetricError, ModelError, ReportError, SelectionError};
pub use harness::{
    aggregate, default_scenarios, rank_by_efficiency, run, run_matrix, AggregateMetrics,
    CellReport, CircuitRecord, RankEntry, RunConfig, RunReport, ScenarioSpec,
};
pub use netmodel::{
    generate_topology, generate_topology_with, region_latency, update_congestion, LatencyMatrix,
    NetworkTopology, RegionId, Relay, RelayId, Role,
};
pub use params::ModelParams;
pub use strategies::{
    passes_diversity, weighted_sample, GuardState, SelectionContext, SelectionSettings,
    StrategyKind,
};
