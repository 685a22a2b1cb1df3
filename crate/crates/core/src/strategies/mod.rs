//! The five path-selection strategies behind one selection contract.
//!
//! Every strategy returns a circuit whose positions hold role-correct relays,
//! whose exit allows the target port, and which passes the diversity filter.
//! Diversity violations are handled by redrawing the violating hop(s), up to
//! the retry budget.

mod congestion;
mod diversity;
mod geo;
mod guard;
mod random;
mod sampling;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::SelectionError;
use crate::netmodel::{NetworkTopology, RegionId, RelayId, Role};
use crate::params::ModelParams;

pub use congestion::{select_congestion_aware, top_quartile};
pub use diversity::passes_diversity;
pub use geo::{feasible_triples, select_geo_diversity, select_geo_latency};
pub use guard::{composite_scores, select_guard, GuardState, GUARD_SET_SIZE};
pub use random::select_random;
pub use sampling::{weighted_sample, WeightedTable};

pub(crate) use diversity::conflicts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Random,
    Guard,
    CongestionAware,
    GeoLatency,
    GeoDiversity,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Random,
        StrategyKind::Guard,
        StrategyKind::CongestionAware,
        StrategyKind::GeoLatency,
        StrategyKind::GeoDiversity,
    ];

    /// Stable identifier used on the command line and in result files.
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::Guard => "guard",
            StrategyKind::CongestionAware => "congestion_aware",
            StrategyKind::GeoLatency => "geo_latency",
            StrategyKind::GeoDiversity => "geo_diversity",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownStrategy(pub String);

impl fmt::Display for UnknownStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "unknown strategy `{}` (expected one of: random, guard, congestion_aware, geo_latency, geo_diversity)",
            self.0
        )
    }
}

impl std::error::Error for UnknownStrategy {}

impl FromStr for StrategyKind {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionSettings {
    pub target_port: u16,
    pub retry_budget: u32,
    pub congestion_threshold: f64,
}

impl Default for SelectionSettings {
    fn default() -> Self {
        SelectionSettings::from(&ModelParams::default())
    }
}

impl From<&ModelParams> for SelectionSettings {
    fn from(p: &ModelParams) -> Self {
        SelectionSettings {
            target_port: p.target_port,
            retry_budget: p.retry_budget,
            congestion_threshold: p.congestion_threshold,
        }
    }
}

/// Bandwidth-weighted tables over the eligible relays of each position,
/// globally and per region. Bandwidth never changes after generation, so
/// these stay valid for the lifetime of a topology.
#[derive(Debug, Clone)]
pub struct CandidatePools {
    all: [Option<WeightedTable>; 3],
    by_region: [[Option<WeightedTable>; 4]; 3],
    relay_count: usize,
}

impl CandidatePools {
    pub fn new(topology: &NetworkTopology, target_port: u16) -> Self {
        let table = |ids: Vec<RelayId>| {
            let weights: Vec<f64> = ids
                .iter()
                .map(|&i| topology.relay(i).bandwidth_kbps)
                .collect();
            WeightedTable::new(ids, &weights).ok()
        };
        let eligible = |role: Role| -> Vec<RelayId> {
            topology
                .role_index
                .ids(role)
                .iter()
                .copied()
                .filter(|&i| role != Role::Exit || topology.relay(i).allows_port(target_port))
                .collect()
        };
        let all = Role::ALL.map(|role| table(eligible(role)));
        let by_region = Role::ALL.map(|role| {
            let ids = eligible(role);
            RegionId::ALL.map(|region| {
                table(
                    ids.iter()
                        .copied()
                        .filter(|&i| topology.relay(i).region == region)
                        .collect(),
                )
            })
        });
        CandidatePools {
            all,
            by_region,
            relay_count: topology.len(),
        }
    }

    pub fn position(&self, role: Role) -> Option<&WeightedTable> {
        self.all[role as usize].as_ref()
    }

    pub fn in_region(&self, role: Role, region: RegionId) -> Option<&WeightedTable> {
        self.by_region[role as usize][region.index()].as_ref()
    }

    pub fn region_population(&self, role: Role, region: RegionId) -> usize {
        self.in_region(role, region).map_or(0, WeightedTable::len)
    }
}

/// Per-run selection state: rng stream, cached candidate tables and any
/// strategy-private state.
#[derive(Debug, Clone)]
pub struct SelectionContext {
    pub strategy: StrategyKind,
    pub settings: SelectionSettings,
    pub rng: ChaCha8Rng,
    pub pools: CandidatePools,
    pub guard_state: Option<GuardState>,
    pub(crate) quartiles: Option<congestion::QuartileCache>,
    pub(crate) triples: Vec<(f64, [RegionId; 3])>,
}

impl SelectionContext {
    pub fn new(
        topology: &NetworkTopology,
        strategy: StrategyKind,
        settings: SelectionSettings,
        seed: u64,
    ) -> Self {
        SelectionContext {
            strategy,
            settings,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pools: CandidatePools::new(topology, settings.target_port),
            guard_state: None,
            quartiles: None,
            triples: geo::triples_by_cost(&topology.latency),
        }
    }

    /// Builds one circuit with this context's strategy.
    pub fn select(&mut self, topology: &NetworkTopology) -> Result<Circuit, SelectionError> {
        debug_assert_eq!(self.pools.relay_count, topology.len());
        match self.strategy {
            StrategyKind::Random => select_random(self, topology),
            StrategyKind::Guard => select_guard(self, topology),
            StrategyKind::CongestionAware => select_congestion_aware(self, topology),
            StrategyKind::GeoLatency => select_geo_latency(self, topology),
            StrategyKind::GeoDiversity => select_geo_diversity(self, topology),
        }
    }
}

/// With the guard fixed, draws a middle and an exit and redraws whichever
/// hop violates diversity. Gives up after `budget` checks.
pub(crate) fn draw_diverse_pair<R: Rng>(
    topology: &NetworkTopology,
    budget: u32,
    rng: &mut R,
    guard_id: RelayId,
    mut draw_middle: impl FnMut(&mut R) -> RelayId,
    mut draw_exit: impl FnMut(&mut R) -> RelayId,
) -> Option<(RelayId, RelayId)> {
    let guard = topology.relay(guard_id);
    let mut middle_id = draw_middle(rng);
    let mut exit_id = draw_exit(rng);
    for _ in 0..budget {
        let middle = topology.relay(middle_id);
        let exit = topology.relay(exit_id);
        let gm = conflicts(guard, middle);
        let ge = conflicts(guard, exit);
        let me = conflicts(middle, exit);
        if !(gm || ge || me) {
            return Some((middle_id, exit_id));
        }
        if gm {
            middle_id = draw_middle(rng);
        }
        if ge || (me && !gm) {
            exit_id = draw_exit(rng);
        }
    }
    None
}
