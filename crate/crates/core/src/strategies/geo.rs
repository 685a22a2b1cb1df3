use rand::Rng;

use crate::circuit::Circuit;
use crate::error::SelectionError;
use crate::netmodel::{LatencyMatrix, NetworkTopology, RegionId, Role};

use super::{draw_diverse_pair, CandidatePools, SelectionContext, StrategyKind, WeightedTable};

/// All 64 region triples sorted by guard->middle->exit cost. The sort is
/// stable, so equal costs keep enumeration order (NA, EU, Asia, RoW).
pub(crate) fn triples_by_cost(matrix: &LatencyMatrix) -> Vec<(f64, [RegionId; 3])> {
    let mut triples = Vec::with_capacity(64);
    for g in RegionId::ALL {
        for m in RegionId::ALL {
            for e in RegionId::ALL {
                triples.push((matrix.triple_cost(g, m, e), [g, m, e]));
            }
        }
    }
    triples.sort_by(|a, b| a.0.total_cmp(&b.0));
    triples
}

/// Region triples in which every position has an eligible relay, cheapest
/// first.
pub fn feasible_triples(
    pools: &CandidatePools,
    matrix: &LatencyMatrix,
) -> Vec<(f64, [RegionId; 3])> {
    triples_by_cost(matrix)
        .into_iter()
        .filter(|(_, regions)| is_feasible(pools, regions))
        .collect()
}

fn is_feasible(pools: &CandidatePools, regions: &[RegionId; 3]) -> bool {
    Role::ALL
        .iter()
        .zip(regions)
        .all(|(&role, &region)| pools.in_region(role, region).is_some())
}

/// Routes through the cheapest feasible region triple, bandwidth-weighted
/// within each region. If no diverse circuit turns up inside a triple, the
/// next-cheapest feasible triple is tried.
pub fn select_geo_latency(
    ctx: &mut SelectionContext,
    topology: &NetworkTopology,
) -> Result<Circuit, SelectionError> {
    let kind = StrategyKind::GeoLatency;
    let mut any_feasible = false;
    for (_, regions) in &ctx.triples {
        if !is_feasible(&ctx.pools, regions) {
            continue;
        }
        any_feasible = true;
        let [rg, rm, re] = *regions;
        let table = |role, region| ctx.pools.in_region(role, region).expect("feasible");
        let (guards, middles, exits) = (
            table(Role::Guard, rg),
            table(Role::Middle, rm),
            table(Role::Exit, re),
        );
        let rng = &mut ctx.rng;
        let guard = guards.sample(rng);
        if let Some((middle, exit)) = draw_diverse_pair(
            topology,
            ctx.settings.retry_budget,
            rng,
            guard,
            |r| middles.sample(r),
            |r| exits.sample(r),
        ) {
            return Ok(Circuit::assemble(topology, kind, guard, middle, exit));
        }
    }
    let reason = if any_feasible {
        "no feasible region triple yielded a diverse circuit"
    } else {
        "no region triple has eligible relays for every position"
    };
    Err(SelectionError::build_failure(kind, reason))
}

/// Samples a region among `allowed` with probability proportional to the
/// number of eligible `role` relays there.
fn sample_region<R: Rng + ?Sized>(
    pools: &CandidatePools,
    role: Role,
    allowed: impl Fn(RegionId) -> bool,
    rng: &mut R,
) -> Option<RegionId> {
    let regions: Vec<RegionId> = RegionId::ALL
        .into_iter()
        .filter(|&r| allowed(r) && pools.region_population(role, r) > 0)
        .collect();
    if regions.is_empty() {
        return None;
    }
    let weights: Vec<f64> = regions
        .iter()
        .map(|&r| pools.region_population(role, r) as f64)
        .collect();
    let ids: Vec<u32> = (0..regions.len() as u32).collect();
    let pick = WeightedTable::new(ids, &weights).ok()?.sample(rng);
    Some(regions[pick as usize])
}

/// Picks guard, middle and exit regions in that order, each preferring a
/// region not used by the earlier hops, then draws bandwidth-weighted
/// relays inside them. Falls back to shared regions only when no distinct
/// region has candidates.
pub fn select_geo_diversity(
    ctx: &mut SelectionContext,
    topology: &NetworkTopology,
) -> Result<Circuit, SelectionError> {
    let kind = StrategyKind::GeoDiversity;
    let pools = &ctx.pools;
    let rng = &mut ctx.rng;
    let missing = |role: Role| SelectionError::build_failure(kind, format!("no eligible {role} relays"));

    let rg = sample_region(pools, Role::Guard, |_| true, rng).ok_or_else(|| missing(Role::Guard))?;
    let rm = sample_region(pools, Role::Middle, |r| r != rg, rng)
        .or_else(|| sample_region(pools, Role::Middle, |_| true, rng))
        .ok_or_else(|| missing(Role::Middle))?;
    let re = sample_region(pools, Role::Exit, |r| r != rg && r != rm, rng)
        .or_else(|| sample_region(pools, Role::Exit, |r| r != rm, rng))
        .or_else(|| sample_region(pools, Role::Exit, |r| r != rg, rng))
        .or_else(|| sample_region(pools, Role::Exit, |_| true, rng))
        .ok_or_else(|| missing(Role::Exit))?;

    let table = |role, region| pools.in_region(role, region).expect("region has candidates");
    let (guards, middles, exits) = (
        table(Role::Guard, rg),
        table(Role::Middle, rm),
        table(Role::Exit, re),
    );
    let guard = guards.sample(rng);
    let (middle, exit) = draw_diverse_pair(
        topology,
        ctx.settings.retry_budget,
        rng,
        guard,
        |r| middles.sample(r),
        |r| exits.sample(r),
    )
    .ok_or_else(|| SelectionError::build_failure(kind, "diversity retry budget exhausted"))?;
    Ok(Circuit::assemble(topology, kind, guard, middle, exit))
}
