//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.
//!
//! Everything runs at desk scale (scale 0.1, seed 42).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::HashMap;
use std::process::ExitCode;

use pathsim_core::harness::{scenario_topology, RunConfig};
use pathsim_core::report::to_json_string;
use pathsim_core::{
    bottleneck_bandwidth, circuit_efficiency, circuit_latency, default_scenarios, generate_topology,
    run, update_congestion, CircuitRecord, LatencyMatrix, NetworkTopology, RegionId, Relay, RelayId,
    Role, RunReport, SelectionContext, SelectionSettings, StrategyKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 42;
const SCALE: f64 = 0.1;

type Outcome = Result<String, String>;

fn desk_config() -> RunConfig {
    let mut config = RunConfig::new(default_scenarios(), StrategyKind::ALL.to_vec(), SEED, SCALE);
    config.log_circuits = true;
    config
}

fn efficiency(report: &RunReport, strategy: StrategyKind) -> f64 {
    report
        .ranking
        .iter()
        .find(|r| r.strategy == strategy)
        .map(|r| r.mean_efficiency)
        .expect("strategy ranked")
}

fn c1_efficiency_ordering(report: &RunReport) -> Outcome {
    use StrategyKind::*;
    let [gl, ca, guard, random, gd] =
        [GeoLatency, CongestionAware, Guard, Random, GeoDiversity].map(|k| efficiency(report, k));
    let detail = format!(
        "geo_latency {gl:.3}, congestion_aware {ca:.3}, guard {guard:.3}, random {random:.3}, geo_diversity {gd:.3}"
    );
    let mut problems = Vec::new();
    if !(gl > ca) {
        problems.push("geo_latency <= congestion_aware");
    }
    if !(ca > guard && ca > random) {
        problems.push("congestion_aware does not lead guard and random");
    }
    if !(guard >= 0.9 * random) {
        problems.push("guard < 0.9 * random");
    }
    if !(guard > gd && random > gd) {
        problems.push("geo_diversity is not last");
    }
    for s in &report.config.scenarios {
        let e = |k| report.cell(s.scenario_id, k).unwrap().metrics.mean_efficiency;
        if !(e(GeoLatency) > e(CongestionAware)) {
            problems.push("geo_latency <= congestion_aware in some scenario");
        }
    }
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", problems.join("; ")))
    }
}

fn all_regions_host_all_roles(t: &NetworkTopology) -> bool {
    Role::ALL.iter().all(|&role| {
        RegionId::ALL.iter().all(|&region| {
            t.relays.iter().any(|r| {
                r.role == role
                    && r.region == region
                    && (role != Role::Exit || r.allows_port(443))
            })
        })
    })
}

fn c2_latency_floor(report: &RunReport) -> Outcome {
    let params = &report.config.params;
    let mut checked = 0;
    for cell in report.cells.iter().filter(|c| c.strategy == StrategyKind::GeoLatency) {
        let spec = scaled(cell.scenario_id);
        let topology = scenario_topology(&spec, SEED, params).unwrap();
        if !all_regions_host_all_roles(&topology) {
            return Err(format!("scenario {}: some region lacks a role", cell.scenario_id));
        }
        for r in cell.log.as_ref().unwrap() {
            if r.latency_ms != Some(40.0) {
                return Err(format!("scenario {} circuit {}: latency {:?}", cell.scenario_id, r.index, r.latency_ms));
            }
            checked += 1;
        }
        if cell.metrics.std_latency_ms != 0.0 || cell.metrics.mean_latency_ms != 40.0 {
            return Err(format!(
                "scenario {}: mean {} std {}",
                cell.scenario_id, cell.metrics.mean_latency_ms, cell.metrics.std_latency_ms
            ));
        }
    }
    Ok(format!("{checked} geo_latency circuits at exactly 40.0 ms, std 0 in every cell"))
}

fn c3_throughput_gain(report: &RunReport) -> Outcome {
    let mut ratios = Vec::new();
    for s in &report.config.scenarios {
        let b = |k| report.cell(s.scenario_id, k).unwrap().metrics.mean_bandwidth_kbps;
        ratios.push(b(StrategyKind::CongestionAware) / b(StrategyKind::Random));
    }
    let detail = ratios
        .iter()
        .enumerate()
        .map(|(i, r)| format!("S{} {r:.3}", i + 1))
        .collect::<Vec<_>>()
        .join(", ");
    if ratios.iter().all(|r| (1.25..=1.55).contains(r)) {
        Ok(format!("congestion_aware / random bandwidth: {detail}"))
    } else {
        Err(format!("ratio outside [1.25, 1.55]: {detail}"))
    }
}

fn c4_build_success(report: &RunReport) -> Outcome {
    let bad: Vec<String> = report
        .cells
        .iter()
        .filter(|c| c.metrics.success_rate != 1.0)
        .map(|c| format!("S{} {} {}", c.scenario_id, c.strategy, c.metrics.success_rate))
        .collect();
    if bad.is_empty() {
        Ok(format!("success_rate = 1.0 in all {} cells", report.cells.len()))
    } else {
        Err(bad.join(", "))
    }
}

fn c5_guard_latency_growth(report: &RunReport) -> Outcome {
    let l = |s| report.cell(s, StrategyKind::Guard).unwrap().metrics.mean_latency_ms;
    let (l3, l5) = (l(3), l(5));
    let detail = format!("guard latency S3 {l3:.2} ms, S5 {l5:.2} ms (x{:.3})", l5 / l3);
    if l5 >= 1.03 * l3 {
        Ok(detail)
    } else {
        Err(format!("{detail}; need S5 >= 1.03 * S3"))
    }
}

fn c6_selection_law() -> Outcome {
    const DRAWS: usize = 100_000;
    let topology = generate_topology(100, SEED).unwrap();
    let settings = SelectionSettings::default();
    let mut ctx = SelectionContext::new(&topology, StrategyKind::Random, settings, SEED);
    let mut counts: [HashMap<RelayId, usize>; 3] = Default::default();
    for _ in 0..DRAWS {
        let c = ctx.select(&topology).map_err(|e| e.to_string())?;
        for (pos, id) in c.relay_ids().into_iter().enumerate() {
            *counts[pos].entry(id).or_default() += 1;
        }
    }
    let eligible_for = |role: Role| -> Vec<&Relay> {
        topology
            .relays
            .iter()
            .filter(|r| r.role == role && (role != Role::Exit || r.allows_port(settings.target_port)))
            .collect()
    };
    let mut tvs = Vec::new();
    for (pos, role) in Role::ALL.into_iter().enumerate() {
        let eligible = eligible_for(role);
        let total: f64 = eligible.iter().map(|r| r.bandwidth_kbps).sum();
        let mut tv = 0.0;
        for r in &eligible {
            let expected = r.bandwidth_kbps / total;
            let got = *counts[pos].get(&r.id).unwrap_or(&0) as f64 / DRAWS as f64;
            tv += (got - expected).abs();
        }
        let outside: usize = counts[pos]
            .iter()
            .filter(|(id, _)| !eligible.iter().any(|r| r.id == **id))
            .map(|(_, n)| n)
            .sum();
        tv = 0.5 * (tv + outside as f64 / DRAWS as f64);
        tvs.push((role, tv));
    }
    let detail = tvs
        .iter()
        .map(|(role, tv)| format!("{role} {tv:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    if tvs.iter().all(|(_, tv)| *tv <= 0.02) {
        Ok(format!("total variation per position: {detail}"))
    } else {
        // Context for a failure: the share of independently drawn triples
        // that pass the diversity filter at all.
        let [g, m, e] = Role::ALL.map(eligible_for);
        let mass = diverse_mass(&g, &m, &e);
        Err(format!(
            "total variation above 0.02: {detail} (diverse-triple mass {mass:.3})"
        ))
    }
}

fn diverse_mass(guards: &[&Relay], middles: &[&Relay], exits: &[&Relay]) -> f64 {
    let apart = |a: &Relay, b: &Relay| {
        a.id != b.id && a.as_number != b.as_number && (a.ipv4 >> 16) != (b.ipv4 >> 16)
    };
    let total = |rs: &[&Relay]| rs.iter().map(|r| r.bandwidth_kbps).sum::<f64>();
    let (sg, sm, se) = (total(guards), total(middles), total(exits));
    let mut mass = 0.0;
    for g in guards {
        for m in middles.iter().filter(|m| apart(g, m)) {
            for e in exits.iter().filter(|e| apart(g, e) && apart(m, e)) {
                mass += g.bandwidth_kbps / sg * m.bandwidth_kbps / sm * e.bandwidth_kbps / se;
            }
        }
    }
    mass
}

fn scaled(scenario_id: u8) -> pathsim_core::ScenarioSpec {
    default_scenarios()
        .into_iter()
        .find(|s| s.scenario_id == scenario_id)
        .unwrap()
        .scaled(SCALE)
}

// Audits every logged circuit against a regenerated topology using plain
// pairwise comparisons.
fn c7_constraints(report: &RunReport) -> Outcome {
    let params = &report.config.params;
    let mut audited = 0usize;
    for s in &report.config.scenarios {
        let topology = scenario_topology(&scaled(s.scenario_id), SEED, params).unwrap();
        for cell in report.cells.iter().filter(|c| c.scenario_id == s.scenario_id) {
            for r in cell.log.as_ref().unwrap().iter().filter(|r| r.success) {
                let ids = r.relay_ids().ok_or("successful record without relay ids")?;
                let relays: Vec<_> = ids.iter().map(|&i| &topology.relays[i as usize]).collect();
                for a in 0..3 {
                    for b in (a + 1)..3 {
                        let (x, y) = (relays[a], relays[b]);
                        if x.id == y.id || x.as_number == y.as_number || (x.ipv4 >> 16) == (y.ipv4 >> 16) {
                            return Err(format!("S{} {} circuit {}: diversity violated", s.scenario_id, cell.strategy, r.index));
                        }
                    }
                }
                if relays[0].role != Role::Guard || relays[1].role != Role::Middle || relays[2].role != Role::Exit {
                    return Err(format!("S{} {} circuit {}: wrong roles", s.scenario_id, cell.strategy, r.index));
                }
                if !relays[2].exit_ports.contains(&params.target_port) {
                    return Err(format!("S{} {} circuit {}: exit policy", s.scenario_id, cell.strategy, r.index));
                }
                audited += 1;
            }
        }
    }
    Ok(format!("{audited} circuits audited, 0 violations"))
}

// Checks the logged snapshots against the threshold and against a replay of
// the congestion schedule.
fn c8_congestion(report: &RunReport) -> Outcome {
    let params = &report.config.params;
    let interval = params.congestion_update_interval;
    let mut audited = 0usize;
    for cell in report.cells.iter().filter(|c| c.strategy == StrategyKind::CongestionAware) {
        let spec = scaled(cell.scenario_id);
        let mut topology = scenario_topology(&spec, SEED, params).unwrap();
        let log: &[CircuitRecord] = cell.log.as_ref().unwrap();
        for r in log.iter().filter(|r| r.success) {
            if r.index % interval == 0 || audited == 0 {
                update_congestion(&mut topology, spec.load_factor(), (r.index / interval) as u64);
            }
            let snapshot = [r.guard_congestion, r.middle_congestion, r.exit_congestion];
            for (id, snap) in r.relay_ids().unwrap().into_iter().zip(snapshot) {
                let snap = snap.ok_or("missing congestion snapshot")?;
                if snap >= params.congestion_threshold {
                    return Err(format!("S{} circuit {}: relay {id} at congestion {snap}", cell.scenario_id, r.index));
                }
                if snap != topology.relays[id as usize].congestion {
                    return Err(format!("S{} circuit {}: snapshot does not match replay", cell.scenario_id, r.index));
                }
            }
            audited += 1;
        }
    }
    Ok(format!("{audited} congestion_aware circuits, every member below 0.70"))
}

fn relative_gap(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn c9_formula_oracles() -> Outcome {
    const N: usize = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    // Literal copy of the default table, indexed NA, EU, Asia, RoW.
    let table = [
        [20.0, 45.0, 80.0, 70.0],
        [45.0, 20.0, 90.0, 60.0],
        [80.0, 90.0, 20.0, 75.0],
        [70.0, 60.0, 75.0, 20.0],
    ];
    let matrix = LatencyMatrix::default();
    let mut worst: f64 = 0.0;
    for _ in 0..N {
        let bws: [f64; 3] = [(); 3].map(|_| rng.random_range(1e-3..1e5));
        // Brute force: the value no larger than any other.
        let oracle = *bws
            .iter()
            .find(|&&x| bws.iter().all(|&y| x <= y))
            .unwrap();
        let got = bottleneck_bandwidth(bws[0], bws[1], bws[2]).map_err(|e| e.to_string())?;
        worst = worst.max(relative_gap(got, oracle));

        let idx: [usize; 3] = [(); 3].map(|_| rng.random_range(0..4));
        let regions = idx.map(|i| RegionId::from_index(i).unwrap());
        let oracle = table[idx[0]][idx[1]] + table[idx[1]][idx[2]];
        let got = circuit_latency(&matrix, regions[0], regions[1], regions[2]);
        worst = worst.max(relative_gap(got, oracle));

        let b = rng.random_range(1e-3..1e5);
        let l = rng.random_range(0.0..1e3);
        let oracle = b * (1.0 / (l + 1.0));
        let got = circuit_efficiency(b, l).map_err(|e| e.to_string())?;
        worst = worst.max(relative_gap(got, oracle));
    }
    if worst <= 1e-12 {
        Ok(format!("3 x {N} random inputs, worst relative gap {worst:.2e}"))
    } else {
        Err(format!("worst relative gap {worst:.2e} > 1e-12"))
    }
}

fn c10_determinism(first: &RunReport) -> Outcome {
    let second = run(&desk_config()).map_err(|e| e.to_string())?;
    let normalized = |r: &RunReport| {
        let mut r = r.clone();
        r.config.generated_at_unix = 0;
        to_json_string(&r).unwrap()
    };
    let (a, b) = (normalized(first), normalized(&second));
    let logs_equal = first
        .cells
        .iter()
        .zip(&second.cells)
        .all(|(x, y)| x.log == y.log);
    if a == b && logs_equal {
        Ok(format!("two runs produced identical {}-byte results files and identical logs", a.len()))
    } else {
        Err("results differ between identical runs".into())
    }
}

fn main() -> ExitCode {
    let report = match run(&desk_config()) {
        Ok(r) => r,
        Err(e) => {
            println!("FAIL  desk-scale run: {e}");
            return ExitCode::FAILURE;
        }
    };
    let criteria: Vec<(&str, Outcome)> = vec![
        ("1 efficiency ordering", c1_efficiency_ordering(&report)),
        ("2 geo-latency floor", c2_latency_floor(&report)),
        ("3 throughput gain", c3_throughput_gain(&report)),
        ("4 build success", c4_build_success(&report)),
        ("5 guard latency growth", c5_guard_latency_growth(&report)),
        ("6 selection law", c6_selection_law()),
        ("7 constraint audit", c7_constraints(&report)),
        ("8 congestion audit", c8_congestion(&report)),
        ("9 formula oracles", c9_formula_oracles()),
        ("10 determinism", c10_determinism(&report)),
    ];
    let mut failed = 0;
    for (name, outcome) in &criteria {
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
