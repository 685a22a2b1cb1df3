//! Synthetic relay populations, the region latency matrix, and the
//! per-relay congestion field.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Beta, Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::params::{CongestionParams, ModelParams};
use crate::seed::{derive_seed, CONGESTION_STREAM, TOPOLOGY_STREAM};

/// Smallest network that still gets at least one relay per role.
pub const MIN_RELAYS: usize = 10;

pub const GUARD_FRACTION: f64 = 0.15;
pub const EXIT_FRACTION: f64 = 0.15;

pub type RelayId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Guard,
    Middle,
    Exit,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Guard, Role::Middle, Role::Exit];
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Guard => "guard",
            Role::Middle => "middle",
            Role::Exit => "exit",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionId {
    NorthAmerica,
    Europe,
    Asia,
    RestOfWorld,
}

impl RegionId {
    /// Enumeration order, also used to break ties.
    pub const ALL: [RegionId; 4] = [
        RegionId::NorthAmerica,
        RegionId::Europe,
        RegionId::Asia,
        RegionId::RestOfWorld,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<RegionId> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegionId::NorthAmerica => "north_america",
            RegionId::Europe => "europe",
            RegionId::Asia => "asia",
            RegionId::RestOfWorld => "rest_of_world",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relay {
    pub id: RelayId,
    pub role: Role,
    pub bandwidth_kbps: f64,
    pub region: RegionId,
    pub uptime_hours: f64,
    pub stability: f64,
    pub congestion: f64,
    pub as_number: u32,
    pub ipv4: u32,
    pub exit_ports: BTreeSet<u16>,
}

impl Relay {
    /// Top 16 bits of the address.
    pub fn prefix16(&self) -> u16 {
        (self.ipv4 >> 16) as u16
    }

    pub fn allows_port(&self, port: u16) -> bool {
        self.exit_ports.contains(&port)
    }
}

/// Symmetric region-to-region latency table in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 4]; 4]", into = "[[f64; 4]; 4]")]
pub struct LatencyMatrix {
    rows: [[f64; 4]; 4],
}

impl Default for LatencyMatrix {
    fn default() -> Self {
        const NA_EU: f64 = 45.0;
        const NA_AS: f64 = 80.0;
        const NA_ROW: f64 = 70.0;
        const EU_AS: f64 = 90.0;
        const EU_ROW: f64 = 60.0;
        const AS_ROW: f64 = 75.0;
        const INTRA: f64 = 20.0;
        LatencyMatrix {
            rows: [
                [INTRA, NA_EU, NA_AS, NA_ROW],
                [NA_EU, INTRA, EU_AS, EU_ROW],
                [NA_AS, EU_AS, INTRA, AS_ROW],
                [NA_ROW, EU_ROW, AS_ROW, INTRA],
            ],
        }
    }
}

impl TryFrom<[[f64; 4]; 4]> for LatencyMatrix {
    type Error = ModelError;

    fn try_from(rows: [[f64; 4]; 4]) -> Result<Self, Self::Error> {
        LatencyMatrix::new(rows)
    }
}

impl From<LatencyMatrix> for [[f64; 4]; 4] {
    fn from(m: LatencyMatrix) -> Self {
        m.rows
    }
}

impl LatencyMatrix {
    pub fn new(rows: [[f64; 4]; 4]) -> Result<Self, ModelError> {
        for (i, row) in rows.iter().enumerate() {
            for (j, &d) in row.iter().enumerate() {
                if !(d.is_finite() && d > 0.0) {
                    return Err(ModelError::InvalidParameter {
                        field: format!("latency_ms[{i}][{j}]"),
                        reason: format!("latency must be positive, got {d}"),
                    });
                }
                if d != rows[j][i] {
                    return Err(ModelError::InvalidParameter {
                        field: format!("latency_ms[{i}][{j}]"),
                        reason: format!("matrix is not symmetric ({d} vs {})", rows[j][i]),
                    });
                }
            }
        }
        Ok(LatencyMatrix { rows })
    }

    pub fn get(&self, a: RegionId, b: RegionId) -> f64 {
        self.rows[a.index()][b.index()]
    }

    pub fn into_rows(self) -> [[f64; 4]; 4] {
        self.rows
    }

    pub fn min_entry(&self) -> f64 {
        self.rows
            .iter()
            .flatten()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Cost of routing guard -> middle -> exit through the given regions.
    pub fn triple_cost(&self, g: RegionId, m: RegionId, e: RegionId) -> f64 {
        self.get(g, m) + self.get(m, e)
    }
}

pub fn region_latency(matrix: &LatencyMatrix, a: RegionId, b: RegionId) -> f64 {
    matrix.get(a, b)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoleIndex {
    pub guard: Vec<RelayId>,
    pub middle: Vec<RelayId>,
    pub exit: Vec<RelayId>,
}

impl RoleIndex {
    pub fn ids(&self, role: Role) -> &[RelayId] {
        match role {
            Role::Guard => &self.guard,
            Role::Middle => &self.middle,
            Role::Exit => &self.exit,
        }
    }

    fn push(&mut self, role: Role, id: RelayId) {
        match role {
            Role::Guard => self.guard.push(id),
            Role::Middle => self.middle.push(id),
            Role::Exit => self.exit.push(id),
        }
    }
}

/// A relay population. Only `congestion` changes after generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub relays: Vec<Relay>,
    pub latency: LatencyMatrix,
    pub role_index: RoleIndex,
    pub rng_seed: u64,
    pub congestion_model: CongestionParams,
    /// Bumped by every congestion update.
    #[serde(default)]
    pub congestion_epoch: u64,
}

/// Role counts for an N-relay network: guards and exits are each
/// `round(0.15 N)` (half away from zero), middles take the rest.
pub fn role_counts(n_relays: usize) -> (usize, usize, usize) {
    let guards = (GUARD_FRACTION * n_relays as f64).round() as usize;
    let exits = (EXIT_FRACTION * n_relays as f64).round() as usize;
    (guards, n_relays - guards - exits, exits)
}

pub fn generate_topology(n_relays: usize, seed: u64) -> Result<NetworkTopology, ModelError> {
    generate_topology_with(n_relays, seed, &ModelParams::default())
}

pub fn generate_topology_with(
    n_relays: usize,
    seed: u64,
    params: &ModelParams,
) -> Result<NetworkTopology, ModelError> {
    if n_relays < MIN_RELAYS {
        return Err(ModelError::TooFewRelays {
            got: n_relays,
            min: MIN_RELAYS,
        });
    }
    params.validate()?;
    let latency = params.latency_matrix()?;
    let (guards, middles, _) = role_counts(n_relays);

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[TOPOLOGY_STREAM]));
    let region_dist = WeightedIndex::new(params.region_weights).map_err(|e| {
        ModelError::InvalidParameter {
            field: "region_weights".into(),
            reason: e.to_string(),
        }
    })?;
    let bandwidth = |role: Role| {
        let p = params.bandwidth.for_role(role);
        LogNormal::new(p.mu(), p.sigma).expect("validated log-normal parameters")
    };
    let uptime = |role: Role| {
        Exp::new(1.0 / params.uptime.mean_for_role(role)).expect("validated uptime mean")
    };
    let bw_dists = Role::ALL.map(bandwidth);
    let uptime_dists = Role::ALL.map(uptime);

    let addr = &params.addressing;
    let prefix_pool = (n_relays / addr.relays_per_prefix).max(addr.min_pool);
    let as_pool = (n_relays / addr.relays_per_as).max(addr.min_pool) as u32;

    let mut relays = Vec::with_capacity(n_relays);
    let mut role_index = RoleIndex::default();
    // Generated in fixed-size batches; the rng stream runs straight through,
    // so the batch size has no effect on the result.
    let mut next = 0usize;
    while next < n_relays {
        let end = (next + params.generation_batch).min(n_relays);
        relays.reserve(end - next);
        for idx in next..end {
            let role = if idx < guards {
                Role::Guard
            } else if idx < guards + middles {
                Role::Middle
            } else {
                Role::Exit
            };
            let r = role as usize;
            let bandwidth_kbps = bw_dists[r].sample(&mut rng).max(f64::MIN_POSITIVE);
            let region = RegionId::ALL[region_dist.sample(&mut rng)];
            let uptime_hours = uptime_dists[r].sample(&mut rng);
            let stability = uptime_hours / (uptime_hours + params.uptime.stability_half_hours);
            let prefix = rng.random_range(0..prefix_pool) as u32;
            let host: u16 = rng.random();
            let ipv4 = (0x0a00u32.wrapping_add(prefix) << 16) | host as u32;
            let as_number = rng.random_range(1..=as_pool);
            let mut exit_ports = BTreeSet::new();
            if role == Role::Exit {
                exit_ports.extend([80, 443]);
                for &port in &addr.extra_exit_ports {
                    if rng.random_bool(addr.extra_port_probability) {
                        exit_ports.insert(port);
                    }
                }
            }
            let id = idx as RelayId;
            role_index.push(role, id);
            relays.push(Relay {
                id,
                role,
                bandwidth_kbps,
                region,
                uptime_hours,
                stability,
                congestion: 0.0,
                as_number,
                ipv4,
                exit_ports,
            });
        }
        next = end;
    }

    let mut topology = NetworkTopology {
        relays,
        latency,
        role_index,
        rng_seed: seed,
        congestion_model: params.congestion,
        congestion_epoch: 0,
    };
    // Initial field at the model's floor load.
    update_congestion(&mut topology, 0.0, u64::MAX);
    Ok(topology)
}

/// Redraws every relay's congestion for one update epoch. `seed_step`
/// selects the epoch; the same (topology seed, step) always yields the
/// same field.
pub fn update_congestion(topology: &mut NetworkTopology, load_factor: f64, seed_step: u64) {
    let model = topology.congestion_model;
    let mean = model.mean_for_load(load_factor);
    let beta = Beta::new(model.concentration * mean, model.concentration * (1.0 - mean))
        .expect("congestion mean lies strictly inside (0, 1)");
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        topology.rng_seed,
        &[CONGESTION_STREAM, seed_step],
    ));
    for relay in &mut topology.relays {
        relay.congestion = beta.sample(&mut rng).clamp(0.0, 1.0);
    }
    topology.congestion_epoch += 1;
}

impl NetworkTopology {
    pub fn len(&self) -> usize {
        self.relays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relays.is_empty()
    }

    pub fn relay(&self, id: RelayId) -> &Relay {
        &self.relays[id as usize]
    }

    pub fn get(&self, id: RelayId) -> Option<&Relay> {
        self.relays.get(id as usize)
    }

    pub fn mean_congestion(&self) -> f64 {
        self.relays.iter().map(|r| r.congestion).sum::<f64>() / self.relays.len() as f64
    }

    /// Builds a topology from hand-made relays, rebuilding the role index.
    /// Relay ids must equal their positions.
    pub fn from_relays(
        relays: Vec<Relay>,
        latency: LatencyMatrix,
        rng_seed: u64,
    ) -> Result<Self, ModelError> {
        let mut role_index = RoleIndex::default();
        for (pos, relay) in relays.iter().enumerate() {
            if relay.id as usize != pos {
                return Err(ModelError::InvalidParameter {
                    field: format!("relays[{pos}].id"),
                    reason: format!("ids must be dense, found {}", relay.id),
                });
            }
            if !(relay.bandwidth_kbps > 0.0) {
                return Err(ModelError::InvalidParameter {
                    field: format!("relays[{pos}].bandwidth_kbps"),
                    reason: "must be positive".into(),
                });
            }
            role_index.push(relay.role, relay.id);
        }
        Ok(NetworkTopology {
            relays,
            latency,
            role_index,
            rng_seed,
            congestion_model: CongestionParams::default(),
            congestion_epoch: 0,
        })
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}
