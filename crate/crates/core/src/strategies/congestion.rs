use rand::Rng;

use crate::circuit::Circuit;
use crate::error::SelectionError;
use crate::netmodel::{NetworkTopology, RelayId, Role};

use super::{draw_diverse_pair, SelectionContext, StrategyKind};

/// Top-quartile candidates for the three positions, valid for one
/// congestion epoch of the topology.
#[derive(Debug, Clone)]
pub(crate) struct QuartileCache {
    epoch: u64,
    positions: [Vec<RelayId>; 3],
}

/// Relays of `candidates` with congestion below `threshold`, ranked by
/// `B * (1 - c)` (ties to the lower id), cut to the top `ceil(n / 4)`.
pub fn top_quartile(
    topology: &NetworkTopology,
    candidates: &[RelayId],
    threshold: f64,
) -> Vec<RelayId> {
    let mut scored: Vec<(RelayId, f64)> = candidates
        .iter()
        .map(|&id| topology.relay(id))
        .filter(|r| r.congestion < threshold)
        .map(|r| (r.id, r.bandwidth_kbps * (1.0 - r.congestion)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let keep = scored.len().div_ceil(4);
    scored.truncate(keep);
    scored.into_iter().map(|(id, _)| id).collect()
}

fn eligible(ctx: &SelectionContext, role: Role) -> Vec<RelayId> {
    ctx.pools
        .position(role)
        .map(|t| t.ids().to_vec())
        .unwrap_or_default()
}

/// Ranking is redone whenever the topology's congestion field changed since
/// the last call, which is equivalent to re-ranking for every circuit.
pub fn select_congestion_aware(
    ctx: &mut SelectionContext,
    topology: &NetworkTopology,
) -> Result<Circuit, SelectionError> {
    let kind = StrategyKind::CongestionAware;
    let stale = ctx
        .quartiles
        .as_ref()
        .is_none_or(|q| q.epoch != topology.congestion_epoch);
    if stale {
        let threshold = ctx.settings.congestion_threshold;
        let positions =
            Role::ALL.map(|role| top_quartile(topology, &eligible(ctx, role), threshold));
        ctx.quartiles = Some(QuartileCache {
            epoch: topology.congestion_epoch,
            positions,
        });
    }
    let [guards, middles, exits] = &ctx.quartiles.as_ref().expect("filled above").positions;
    for (role, ids) in Role::ALL.iter().zip([guards, middles, exits]) {
        if ids.is_empty() {
            return Err(SelectionError::build_failure(
                kind,
                format!("every {role} candidate is at or above the congestion threshold"),
            ));
        }
    }
    let rng = &mut ctx.rng;
    let guard = guards[rng.random_range(0..guards.len())];
    let (middle, exit) = draw_diverse_pair(
        topology,
        ctx.settings.retry_budget,
        rng,
        guard,
        |r| middles[r.random_range(0..middles.len())],
        |r| exits[r.random_range(0..exits.len())],
    )
    .ok_or_else(|| SelectionError::build_failure(kind, "diversity retry budget exhausted"))?;
    Ok(Circuit::assemble(topology, kind, guard, middle, exit))
}
