use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::SelectionError;
use crate::netmodel::{NetworkTopology, RelayId, Role};

use super::{draw_diverse_pair, SelectionContext, StrategyKind};

pub const GUARD_SET_SIZE: usize = 3;

/// Composite score of every guard-role relay:
/// `0.5 * bandwidth percentile among guards + 0.5 * stability`.
///
/// The percentile of a guard is the fraction of the other guards with
/// strictly lower bandwidth, so it spans [0, 1].
pub fn composite_scores(topology: &NetworkTopology) -> Vec<(RelayId, f64)> {
    let guards = topology.role_index.ids(Role::Guard);
    let mut bandwidths: Vec<f64> = guards
        .iter()
        .map(|&g| topology.relay(g).bandwidth_kbps)
        .collect();
    bandwidths.sort_by(f64::total_cmp);
    let denom = (guards.len().max(2) - 1) as f64;
    guards
        .iter()
        .map(|&g| {
            let relay = topology.relay(g);
            let below = bandwidths.partition_point(|&b| b < relay.bandwidth_kbps);
            let percentile = below as f64 / denom;
            (g, 0.5 * percentile + 0.5 * relay.stability)
        })
        .collect()
}

/// The persistent entry guards of one run and how often each was used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardState {
    pub guard_ids: Vec<RelayId>,
    pub use_counts: Vec<u64>,
}

impl GuardState {
    /// Picks the top guards by composite score, ties to the lower id.
    pub fn from_topology(topology: &NetworkTopology) -> Result<Self, SelectionError> {
        let mut scored = composite_scores(topology);
        if scored.len() < GUARD_SET_SIZE {
            return Err(SelectionError::build_failure(
                StrategyKind::Guard,
                format!("need {GUARD_SET_SIZE} guard relays, topology has {}", scored.len()),
            ));
        }
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let guard_ids: Vec<RelayId> = scored[..GUARD_SET_SIZE].iter().map(|&(id, _)| id).collect();
        Ok(GuardState {
            use_counts: vec![0; guard_ids.len()],
            guard_ids,
        })
    }

    /// Slots ordered least-used first, ties to the lower relay id.
    pub fn rotation_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.guard_ids.len()).collect();
        order.sort_by_key(|&i| (self.use_counts[i], self.guard_ids[i]));
        order
    }
}

/// Uses the least-used persistent guard; middle and exit are
/// bandwidth-weighted. Falls through to the next guard when no diverse
/// pair is found for the current one.
pub fn select_guard(
    ctx: &mut SelectionContext,
    topology: &NetworkTopology,
) -> Result<Circuit, SelectionError> {
    let kind = StrategyKind::Guard;
    if ctx.guard_state.is_none() {
        ctx.guard_state = Some(GuardState::from_topology(topology)?);
    }
    let missing = |role: Role| SelectionError::build_failure(kind, format!("no eligible {role} relays"));
    let middles = ctx.pools.position(Role::Middle).ok_or_else(|| missing(Role::Middle))?;
    let exits = ctx.pools.position(Role::Exit).ok_or_else(|| missing(Role::Exit))?;
    let state = ctx.guard_state.as_mut().expect("initialized above");

    for slot in state.rotation_order() {
        let guard = state.guard_ids[slot];
        let pair = draw_diverse_pair(
            topology,
            ctx.settings.retry_budget,
            &mut ctx.rng,
            guard,
            |r| middles.sample(r),
            |r| exits.sample(r),
        );
        if let Some((middle, exit)) = pair {
            state.use_counts[slot] += 1;
            return Ok(Circuit::assemble(topology, kind, guard, middle, exit));
        }
    }
    Err(SelectionError::build_failure(
        kind,
        "no diverse middle/exit for any persistent guard",
    ))
}
