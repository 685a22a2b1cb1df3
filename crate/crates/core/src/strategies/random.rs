use crate::circuit::Circuit;
use crate::error::SelectionError;
use crate::netmodel::{NetworkTopology, Role};

use super::{draw_diverse_pair, SelectionContext, StrategyKind};

/// Bandwidth-weighted draw for every hop.
pub fn select_random(
    ctx: &mut SelectionContext,
    topology: &NetworkTopology,
) -> Result<Circuit, SelectionError> {
    let kind = StrategyKind::Random;
    let missing = |role: Role| SelectionError::build_failure(kind, format!("no eligible {role} relays"));
    let guards = ctx.pools.position(Role::Guard).ok_or_else(|| missing(Role::Guard))?;
    let middles = ctx.pools.position(Role::Middle).ok_or_else(|| missing(Role::Middle))?;
    let exits = ctx.pools.position(Role::Exit).ok_or_else(|| missing(Role::Exit))?;

    let rng = &mut ctx.rng;
    let guard = guards.sample(rng);
    let (middle, exit) = draw_diverse_pair(
        topology,
        ctx.settings.retry_budget,
        rng,
        guard,
        |r| middles.sample(r),
        |r| exits.sample(r),
    )
    .ok_or_else(|| {
        SelectionError::build_failure(kind, "diversity retry budget exhausted")
    })?;
    Ok(Circuit::assemble(topology, kind, guard, middle, exit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::generate_topology;
    use crate::netmodel::RegionId::*;
    use crate::strategies::{passes_diversity, SelectionSettings};
    use crate::testutil::{spec, topology};

    fn ctx(t: &NetworkTopology, seed: u64) -> SelectionContext {
        SelectionContext::new(t, StrategyKind::Random, SelectionSettings::default(), seed)
    }

    #[test]
    fn forced_single_triple() {
        let t = topology(vec![
            spec(Role::Guard, 100.0, Europe, 1, 1),
            spec(Role::Middle, 200.0, Asia, 2, 2),
            spec(Role::Exit, 300.0, Europe, 3, 3),
        ]);
        let mut c = ctx(&t, 1);
        for _ in 0..20 {
            let circuit = select_random(&mut c, &t).unwrap();
            assert_eq!(circuit.relay_ids(), [0, 1, 2]);
            assert_eq!(circuit.bandwidth_kbps, 100.0);
            assert_eq!(circuit.latency_ms, 180.0);
        }
    }

    #[test]
    fn unsatisfiable_subnet_fails() {
        let t = topology(vec![
            spec(Role::Guard, 100.0, Europe, 1, 7),
            spec(Role::Middle, 200.0, Asia, 2, 2),
            spec(Role::Exit, 300.0, Europe, 3, 7),
            spec(Role::Exit, 300.0, Asia, 4, 7),
        ]);
        let err = select_random(&mut ctx(&t, 1), &t).unwrap_err();
        assert!(matches!(
            err,
            SelectionError::CircuitBuildFailure {
                strategy: StrategyKind::Random,
                ..
            }
        ));
    }

    #[test]
    fn exits_must_allow_target_port() {
        let mut t = topology(vec![
            spec(Role::Guard, 100.0, Europe, 1, 1),
            spec(Role::Middle, 200.0, Asia, 2, 2),
            spec(Role::Exit, 300.0, Europe, 3, 3),
            spec(Role::Exit, 300.0, Europe, 4, 4),
        ]);
        t.relays[3].exit_ports.insert(8080);
        let settings = SelectionSettings {
            target_port: 8080,
            ..SelectionSettings::default()
        };
        let mut c = SelectionContext::new(&t, StrategyKind::Random, settings, 3);
        for _ in 0..20 {
            assert_eq!(select_random(&mut c, &t).unwrap().exit_id, 3);
        }
    }

    #[test]
    fn guard_frequency_tracks_bandwidth() {
        let t = generate_topology(100, 17).unwrap();
        let mut c = ctx(&t, 5);
        let guards = t.role_index.guard.clone();
        let total: f64 = guards.iter().map(|&g| t.relay(g).bandwidth_kbps).sum();
        let mut counts = vec![0usize; t.len()];
        let draws = 100_000;
        for _ in 0..draws {
            let circuit = select_random(&mut c, &t).unwrap();
            assert!(passes_diversity(&t, circuit.guard_id, circuit.middle_id, circuit.exit_id));
            counts[circuit.guard_id as usize] += 1;
        }
        for &g in &guards {
            let expected = t.relay(g).bandwidth_kbps / total;
            let got = counts[g as usize] as f64 / draws as f64;
            assert!((got - expected).abs() < 0.01, "guard {g}: {got} vs {expected}");
        }
    }

    #[test]
    fn same_seed_same_sequence() {
        let t = generate_topology(200, 2).unwrap();
        let (mut a, mut b) = (ctx(&t, 9), ctx(&t, 9));
        for _ in 0..200 {
            assert_eq!(select_random(&mut a, &t).unwrap(), select_random(&mut b, &t).unwrap());
        }
    }
}
