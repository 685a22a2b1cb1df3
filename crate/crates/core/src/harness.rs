//! The scenario x strategy evaluation matrix.
//!
//! For every scenario a topology is generated once; every strategy then runs
//! against its own copy with a fresh congestion field, redrawn at the start
//! of the run and every `congestion_update_interval` circuits. All seeds are
//! derived from the run seed, so cells are independent and can run in
//! parallel without changing the output.

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{HarnessError, SelectionError};
use crate::netmodel::{generate_topology_with, update_congestion, NetworkTopology, RelayId};
use crate::params::ModelParams;
use crate::report::float6;
use crate::seed::{derive_seed, CELL_STREAM, SCENARIO_STREAM};
use crate::strategies::{SelectionContext, SelectionSettings, StrategyKind};

pub const MIN_SCALED_RELAYS: usize = 100;
pub const MIN_SCALED_CIRCUITS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario_id: u8,
    pub users: u64,
    pub relays: usize,
    pub circuits: usize,
    pub label: String,
}

impl ScenarioSpec {
    pub fn new(scenario_id: u8, users: u64, relays: usize, circuits: usize) -> Self {
        ScenarioSpec {
            scenario_id,
            users,
            relays,
            circuits,
            label: format!("{} users / {} relays", users, relays),
        }
    }

    /// Users per relay; drives the congestion model.
    pub fn load_factor(&self) -> f64 {
        self.users as f64 / self.relays as f64
    }

    /// Shrinks relays, users and circuits by `scale`, keeping at least
    /// 100 relays and 100 circuits.
    pub fn scaled(&self, scale: f64) -> ScenarioSpec {
        let shrink = |v: f64| (v * scale).round();
        ScenarioSpec {
            scenario_id: self.scenario_id,
            users: (shrink(self.users as f64) as u64).max(1),
            relays: (shrink(self.relays as f64) as usize).max(MIN_SCALED_RELAYS),
            circuits: (shrink(self.circuits as f64) as usize).max(MIN_SCALED_CIRCUITS),
            label: self.label.clone(),
        }
    }
}

/// The five scaling scenarios.
pub fn default_scenarios() -> Vec<ScenarioSpec> {
    vec![
        ScenarioSpec::new(1, 250_000, 10_000, 2_500),
        ScenarioSpec::new(2, 500_000, 10_000, 5_000),
        ScenarioSpec::new(3, 1_000_000, 10_000, 10_000),
        ScenarioSpec::new(4, 1_000_000, 20_000, 10_000),
        ScenarioSpec::new(5, 1_000_000, 50_000, 10_000),
    ]
}

/// One row of the per-circuit log. Relay fields are empty for failed
/// attempts. Congestion values are the members' congestion at selection
/// time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitRecord {
    pub scenario_id: u8,
    pub strategy: StrategyKind,
    pub index: usize,
    pub success: bool,
    pub guard_id: Option<RelayId>,
    pub middle_id: Option<RelayId>,
    pub exit_id: Option<RelayId>,
    pub bandwidth_kbps: Option<f64>,
    pub latency_ms: Option<f64>,
    pub efficiency: Option<f64>,
    pub build_time_us: u64,
    pub guard_congestion: Option<f64>,
    pub middle_congestion: Option<f64>,
    pub exit_congestion: Option<f64>,
}

impl CircuitRecord {
    pub fn from_outcome(
        scenario_id: u8,
        strategy: StrategyKind,
        index: usize,
        outcome: &Result<Circuit, SelectionError>,
        topology: &NetworkTopology,
        build_time_us: u64,
    ) -> Self {
        let mut record = CircuitRecord {
            scenario_id,
            strategy,
            index,
            success: false,
            guard_id: None,
            middle_id: None,
            exit_id: None,
            bandwidth_kbps: None,
            latency_ms: None,
            efficiency: None,
            build_time_us,
            guard_congestion: None,
            middle_congestion: None,
            exit_congestion: None,
        };
        if let Ok(c) = outcome {
            let congestion = |id: RelayId| Some(topology.relay(id).congestion);
            record.success = true;
            record.guard_id = Some(c.guard_id);
            record.middle_id = Some(c.middle_id);
            record.exit_id = Some(c.exit_id);
            record.bandwidth_kbps = Some(c.bandwidth_kbps);
            record.latency_ms = Some(c.latency_ms);
            record.efficiency = Some(c.efficiency);
            record.guard_congestion = congestion(c.guard_id);
            record.middle_congestion = congestion(c.middle_id);
            record.exit_congestion = congestion(c.exit_id);
        }
        record
    }

    pub fn relay_ids(&self) -> Option<[RelayId; 3]> {
        Some([self.guard_id?, self.middle_id?, self.exit_id?])
    }
}

/// Means and population standard deviations over successful circuits;
/// success rate over all attempts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    #[serde(with = "float6")]
    pub mean_bandwidth_kbps: f64,
    #[serde(with = "float6")]
    pub mean_latency_ms: f64,
    #[serde(with = "float6")]
    pub mean_efficiency: f64,
    #[serde(with = "float6")]
    pub success_rate: f64,
    #[serde(with = "float6")]
    pub std_bandwidth_kbps: f64,
    #[serde(with = "float6")]
    pub std_latency_ms: f64,
    #[serde(with = "float6")]
    pub std_efficiency: f64,
    pub circuit_count: usize,
    pub success_count: usize,
    #[serde(with = "float6")]
    pub mean_build_time_us: f64,
}

impl AggregateMetrics {
    /// Metric names and values in a fixed order, for tabular export.
    pub fn named_values(&self) -> [(&'static str, f64); 10] {
        [
            ("mean_bandwidth_kbps", self.mean_bandwidth_kbps),
            ("mean_latency_ms", self.mean_latency_ms),
            ("mean_efficiency", self.mean_efficiency),
            ("success_rate", self.success_rate),
            ("std_bandwidth_kbps", self.std_bandwidth_kbps),
            ("std_latency_ms", self.std_latency_ms),
            ("std_efficiency", self.std_efficiency),
            ("circuit_count", self.circuit_count as f64),
            ("success_count", self.success_count as f64),
            ("mean_build_time_us", self.mean_build_time_us),
        ]
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn aggregate(records: &[CircuitRecord]) -> Result<AggregateMetrics, HarnessError> {
    if records.is_empty() {
        return Err(HarnessError::EmptyAggregate);
    }
    let ok: Vec<&CircuitRecord> = records.iter().filter(|r| r.success).collect();
    let column = |f: fn(&CircuitRecord) -> Option<f64>| -> Vec<f64> {
        ok.iter().filter_map(|r| f(r)).collect()
    };
    let (mean_bandwidth_kbps, std_bandwidth_kbps) = mean_std(&column(|r| r.bandwidth_kbps));
    let (mean_latency_ms, std_latency_ms) = mean_std(&column(|r| r.latency_ms));
    let (mean_efficiency, std_efficiency) = mean_std(&column(|r| r.efficiency));
    let build_times: Vec<f64> = records.iter().map(|r| r.build_time_us as f64).collect();
    Ok(AggregateMetrics {
        mean_bandwidth_kbps,
        mean_latency_ms,
        mean_efficiency,
        success_rate: ok.len() as f64 / records.len() as f64,
        std_bandwidth_kbps,
        std_latency_ms,
        std_efficiency,
        circuit_count: records.len(),
        success_count: ok.len(),
        mean_build_time_us: mean_std(&build_times).0,
    })
}

/// Results for one (scenario, strategy) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub scenario_id: u8,
    pub label: String,
    pub strategy: StrategyKind,
    pub users: u64,
    pub relays: usize,
    pub circuits: usize,
    #[serde(with = "float6")]
    pub load_factor: f64,
    pub metrics: AggregateMetrics,
    /// Kept in memory only; written to sidecar files on request.
    #[serde(skip)]
    pub log: Option<Vec<CircuitRecord>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub strategy: StrategyKind,
    #[serde(with = "float6")]
    pub mean_efficiency: f64,
}

/// Inputs of a run, echoed into the results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEcho {
    pub seed: u64,
    pub scale: f64,
    pub scenarios: Vec<ScenarioSpec>,
    pub strategies: Vec<StrategyKind>,
    pub params: ModelParams,
    pub log_circuits: bool,
    pub record_timing: bool,
    pub generated_at_unix: u64,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunEcho,
    pub cells: Vec<CellReport>,
    pub ranking: Vec<RankEntry>,
}

impl RunReport {
    pub fn cell(&self, scenario_id: u8, strategy: StrategyKind) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.scenario_id == scenario_id && c.strategy == strategy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenarios: Vec<ScenarioSpec>,
    pub strategies: Vec<StrategyKind>,
    pub seed: u64,
    pub scale: f64,
    pub params: ModelParams,
    pub log_circuits: bool,
    /// Measure wall-clock selection time. Off by default because timings
    /// make result files differ between otherwise identical runs.
    pub record_timing: bool,
}

impl RunConfig {
    pub fn new(
        scenarios: Vec<ScenarioSpec>,
        strategies: Vec<StrategyKind>,
        seed: u64,
        scale: f64,
    ) -> Self {
        RunConfig {
            scenarios,
            strategies,
            seed,
            scale,
            params: ModelParams::default(),
            log_circuits: false,
            record_timing: false,
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if self.scenarios.is_empty() {
            return Err(HarnessError::InvalidConfig("no scenarios selected".into()));
        }
        if self.strategies.is_empty() {
            return Err(HarnessError::InvalidConfig("no strategies selected".into()));
        }
        if !(self.scale > 0.0 && self.scale <= 1.0) {
            return Err(HarnessError::InvalidConfig(format!(
                "scale must lie in (0, 1], got {}",
                self.scale
            )));
        }
        for s in &self.scenarios {
            if s.users == 0 || s.relays == 0 || s.circuits == 0 {
                return Err(HarnessError::InvalidConfig(format!(
                    "scenario {} needs positive users, relays and circuits",
                    s.scenario_id
                )));
            }
        }
        self.params.validate()?;
        Ok(())
    }
}

/// Runs every requested scenario with every requested strategy using the
/// default model parameters.
pub fn run_matrix(
    scenarios: Vec<ScenarioSpec>,
    strategies: Vec<StrategyKind>,
    seed: u64,
    scale: f64,
) -> Result<RunReport, HarnessError> {
    run(&RunConfig::new(scenarios, strategies, seed, scale))
}

pub fn scenario_topology_seed(seed: u64, scenario_id: u8) -> u64 {
    derive_seed(seed, &[SCENARIO_STREAM, scenario_id as u64])
}

pub fn cell_seed(seed: u64, scenario_id: u8, strategy: StrategyKind) -> u64 {
    derive_seed(seed, &[CELL_STREAM, scenario_id as u64, strategy.index() as u64])
}

/// Generates the topology a run uses for `scenario` (already scaled).
pub fn scenario_topology(
    scenario: &ScenarioSpec,
    seed: u64,
    params: &ModelParams,
) -> Result<NetworkTopology, HarnessError> {
    Ok(generate_topology_with(
        scenario.relays,
        scenario_topology_seed(seed, scenario.scenario_id),
        params,
    )?)
}

pub fn run(config: &RunConfig) -> Result<RunReport, HarnessError> {
    config.validate()?;
    let scaled: Vec<ScenarioSpec> = config
        .scenarios
        .iter()
        .map(|s| s.scaled(config.scale))
        .collect();

    let per_scenario: Vec<Vec<CellReport>> = scaled
        .par_iter()
        .map(|scenario| {
            let topology = scenario_topology(scenario, config.seed, &config.params)?;
            config
                .strategies
                .par_iter()
                .map(|&strategy| run_cell(topology.clone(), scenario, strategy, config))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let cells: Vec<CellReport> = per_scenario.into_iter().flatten().collect();
    let ranking = rank_cells(&cells);

    Ok(RunReport {
        config: RunEcho {
            seed: config.seed,
            scale: config.scale,
            scenarios: config.scenarios.clone(),
            strategies: config.strategies.clone(),
            params: config.params.clone(),
            log_circuits: config.log_circuits,
            record_timing: config.record_timing,
            generated_at_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        },
        cells,
        ranking,
    })
}

/// Builds `scenario.circuits` circuits with one strategy. Failed builds are
/// recorded, not raised.
pub fn run_cell(
    mut topology: NetworkTopology,
    scenario: &ScenarioSpec,
    strategy: StrategyKind,
    config: &RunConfig,
) -> Result<CellReport, HarnessError> {
    let load_factor = scenario.load_factor();
    let interval = config.params.congestion_update_interval;
    let mut ctx = SelectionContext::new(
        &topology,
        strategy,
        SelectionSettings::from(&config.params),
        cell_seed(config.seed, scenario.scenario_id, strategy),
    );
    let mut records = Vec::with_capacity(scenario.circuits);
    for index in 0..scenario.circuits {
        if index % interval == 0 {
            update_congestion(&mut topology, load_factor, (index / interval) as u64);
        }
        let start = config.record_timing.then(Instant::now);
        let mut outcome = ctx.select(&topology);
        let build_time_us = start.map_or(0, |s| s.elapsed().as_micros() as u64);
        if let Ok(c) = &mut outcome {
            c.build_time_us = build_time_us;
        }
        records.push(CircuitRecord::from_outcome(
            scenario.scenario_id,
            strategy,
            index,
            &outcome,
            &topology,
            build_time_us,
        ));
    }
    let metrics = aggregate(&records)?;
    Ok(CellReport {
        scenario_id: scenario.scenario_id,
        label: scenario.label.clone(),
        strategy,
        users: scenario.users,
        relays: scenario.relays,
        circuits: scenario.circuits,
        load_factor,
        metrics,
        log: config.log_circuits.then_some(records),
    })
}

/// Strategies by mean efficiency across their cells, best first; ties by
/// name.
pub fn rank_cells(cells: &[CellReport]) -> Vec<RankEntry> {
    let mut strategies: Vec<StrategyKind> = cells.iter().map(|c| c.strategy).collect();
    strategies.sort();
    strategies.dedup();
    let mut ranking: Vec<RankEntry> = strategies
        .into_iter()
        .map(|strategy| {
            let values: Vec<f64> = cells
                .iter()
                .filter(|c| c.strategy == strategy)
                .map(|c| c.metrics.mean_efficiency)
                .collect();
            RankEntry {
                strategy,
                mean_efficiency: values.iter().sum::<f64>() / values.len() as f64,
            }
        })
        .collect();
    ranking.sort_by(|a, b| {
        b.mean_efficiency
            .total_cmp(&a.mean_efficiency)
            .then_with(|| a.strategy.name().cmp(b.strategy.name()))
    });
    ranking
}

pub fn rank_by_efficiency(report: &RunReport) -> Vec<(StrategyKind, f64)> {
    rank_cells(&report.cells)
        .into_iter()
        .map(|e| (e.strategy, e.mean_efficiency))
        .collect()
}
