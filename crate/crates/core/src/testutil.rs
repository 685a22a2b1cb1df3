//! Hand-built relays and topologies for unit tests.

use std::collections::BTreeSet;

use crate::netmodel::{LatencyMatrix, NetworkTopology, RegionId, Relay, Role};

pub(crate) struct RelaySpec {
    pub role: Role,
    pub bandwidth: f64,
    pub region: RegionId,
    pub as_number: u32,
    pub prefix: u16,
}

pub(crate) fn spec(role: Role, bandwidth: f64, region: RegionId, as_number: u32, prefix: u16) -> RelaySpec {
    RelaySpec {
        role,
        bandwidth,
        region,
        as_number,
        prefix,
    }
}

pub(crate) fn topology(specs: Vec<RelaySpec>) -> NetworkTopology {
    let relays = specs
        .into_iter()
        .enumerate()
        .map(|(i, s)| Relay {
            id: i as u32,
            role: s.role,
            bandwidth_kbps: s.bandwidth,
            region: s.region,
            uptime_hours: 100.0,
            stability: 0.5,
            congestion: 0.1,
            as_number: s.as_number,
            ipv4: ((s.prefix as u32) << 16) | i as u32,
            exit_ports: if s.role == Role::Exit {
                BTreeSet::from([80, 443])
            } else {
                BTreeSet::new()
            },
        })
        .collect();
    NetworkTopology::from_relays(relays, LatencyMatrix::default(), 1).unwrap()
}

/// One relay of every role in every region, each with its own AS and /16.
pub(crate) fn balanced(per_cell: usize) -> NetworkTopology {
    let mut specs = Vec::new();
    let mut n = 0u32;
    for role in Role::ALL {
        for region in RegionId::ALL {
            for k in 0..per_cell {
                n += 1;
                specs.push(spec(role, 100.0 + 10.0 * k as f64, region, n, n as u16));
            }
        }
    }
    topology(specs)
}
