//! Shared fixtures and independent checkers for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use firegrid::geo::LatLon;
use firegrid::grid::{Bus, FamilyKind, Generator, GroupFamily, Horizon, Line, ModelId, Network, ScenarioSpec};
use firegrid::model::{build_scenario, names, BaselineReference, BuildContext, MilpModel};
use firegrid::risk::{RiskProfile, Thresholds};
use firegrid::solve::{oracle_solve, OracleOutcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const HIGH: f64 = 2.0e6;
pub const MED: f64 = 5.0e5;
pub const LOW: f64 = 0.5;

pub fn bus(id: &str, demand: Vec<Vec<f64>>) -> Bus {
    let k = id.bytes().map(u32::from).sum::<u32>() as f64;
    Bus {
        id: id.into(),
        demand,
        population: 0.0,
        group_fractions: BTreeMap::new(),
        vuln_fraction: BTreeMap::new(),
        location: LatLon::new(30.0 + 0.01 * (k % 17.0), -100.0 + 0.01 * (k % 13.0)),
    }
}

pub fn line(id: &str, from: &str, to: &str, fmax: f64, angle: f64) -> Line {
    Line {
        id: id.into(),
        from_bus: from.into(),
        to_bus: to.into(),
        susceptance: -10.0,
        flow_limit: fmax,
        angle_min: -angle,
        angle_max: angle,
        length: Some(10.0),
        underground_cost: Some(1.0),
        path: Vec::new(),
    }
}

pub fn gen(id: &str, at: &str, p_max: f64) -> Generator {
    Generator {
        id: id.into(),
        bus: at.into(),
        p_min: 0.0,
        p_max,
    }
}

pub fn network(days: usize, periods: usize, buses: Vec<Bus>, lines: Vec<Line>, gens: Vec<Generator>) -> Network {
    let days = (0..days as u32).map(|d| 180 + d).collect();
    Network::new(Horizon::new(days, periods), buses, lines, gens, Vec::new())
}

/// Two-group partition `A`/`B` plus `CEJST` and `SVI` fractions on a bus.
pub fn set_groups(b: &mut Bus, pop: f64, a: f64, cejst: f64, svi: f64) {
    b.population = pop;
    b.group_fractions = [("A".to_string(), a), ("B".to_string(), 1.0 - a)].into();
    b.vuln_fraction = [("CEJST".to_string(), cejst), ("SVI".to_string(), svi)].into();
}

pub fn with_families(mut net: Network) -> Network {
    net.group_families = vec![GroupFamily {
        name: "race".into(),
        kind: FamilyKind::Partition,
        groups: vec!["A".into(), "B".into()],
    }];
    net
}

/// Risk profile with `risk[line][day]` in network line order.
pub fn profile(net: &Network, risk: Vec<Vec<f64>>, r_psps: f64) -> RiskProfile {
    RiskProfile::from_line_risk(
        net.lines.iter().map(|l| l.id.clone()).collect(),
        net.horizon.days.clone(),
        risk,
        Thresholds {
            r_psps,
            ..Thresholds::default()
        },
    )
    .unwrap()
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub seed: u64,
    pub net: Network,
    pub risk: RiskProfile,
}

/// Free binaries a fixture's models will carry: one `z` per switchable
/// line-day plus one `y` per hardenable line within budget.
pub fn free_binary_count(net: &Network, risk: &RiskProfile, budget: f64) -> usize {
    let mut n = 0;
    for line in &net.lines {
        let li = risk.line_idx(&line.id).unwrap();
        n += (0..net.horizon.days.len())
            .filter(|&d| risk.category(li, d).switchable())
            .count();
        if risk.in_harden_set(li) && line.underground_cost() <= budget {
            n += 1;
        }
    }
    n
}

/// Random connected network with groups, vulnerability fractions and a risk
/// profile whose models have at most `max_free` free binaries at `budget`.
pub fn random_fixture(seed: u64, max_free: usize, budget: f64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let nb = rng.random_range(3..=6usize);
        let max_lines = (nb * (nb - 1) / 2).min(8);
        let nl = rng.random_range((nb - 1).max(3)..=max_lines);
        let days = rng.random_range(1..=2usize);
        let periods = rng.random_range(2..=4usize);

        let ids: Vec<String> = (0..nb).map(|i| format!("n{i}")).collect();
        let mut buses = Vec::new();
        for (i, id) in ids.iter().enumerate() {
            let demand = (0..days)
                .map(|_| {
                    (0..periods)
                        .map(|_| {
                            if i == 0 {
                                0.0
                            } else {
                                (rng.random_range(5..=40) as f64) / 100.0
                            }
                        })
                        .collect()
                })
                .collect();
            let mut b = bus(id, demand);
            b.location = LatLon::new(30.0 + rng.random::<f64>() * 0.3, -100.0 + rng.random::<f64>() * 0.3);
            if i == 0 {
                b.population = 0.0;
            } else {
                let a = (rng.random_range(0..=10) as f64) / 10.0;
                let cejst = if rng.random_bool(0.5) {
                    (rng.random_range(5..=10) as f64) / 10.0
                } else {
                    0.0
                };
                let svi = (rng.random_range(0..=10) as f64) / 10.0;
                set_groups(&mut b, rng.random_range(100..=1000) as f64, a, cejst, svi);
            }
            buses.push(b);
        }

        let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
        for i in 1..nb {
            let j = rng.random_range(0..i);
            pairs.insert((j, i));
        }
        while pairs.len() < nl {
            let a = rng.random_range(0..nb);
            let b = rng.random_range(0..nb);
            if a != b {
                pairs.insert((a.min(b), a.max(b)));
            }
        }
        let lines: Vec<Line> = pairs
            .iter()
            .enumerate()
            .map(|(k, &(a, b))| {
                let (fr, to) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
                let mut l = line(
                    &format!("l{k}"),
                    &ids[fr],
                    &ids[to],
                    (rng.random_range(3..=12) as f64) / 10.0,
                    (rng.random_range(2..=6) as f64) / 10.0,
                );
                l.susceptance = -(rng.random_range(5..=20) as f64);
                l.underground_cost = Some(rng.random_range(1..=2) as f64);
                l
            })
            .collect();

        let peak: f64 = (0..days)
            .flat_map(|d| (0..periods).map(move |t| (d, t)))
            .map(|(d, t)| buses.iter().map(|b| b.demand_at(d, t)).sum::<f64>())
            .fold(0.0, f64::max);
        let mut gens = vec![gen("g0", &ids[0], peak * rng.random_range(0.7..1.3))];
        if rng.random_bool(0.4) {
            let at = rng.random_range(1..nb);
            gens.push(gen("g1", &ids[at], peak * rng.random_range(0.1..0.4)));
        }

        let net = with_families(network(days, periods, buses, lines, gens));
        let risk: Vec<Vec<f64>> = (0..nl)
            .map(|_| {
                let risky = rng.random_bool(0.45);
                (0..days)
                    .map(|_| {
                        if !risky {
                            return rng.random::<f64>() * 0.9;
                        }
                        match rng.random_range(0..3) {
                            0 => HIGH * rng.random_range(1.0..3.0),
                            1 => MED * rng.random_range(0.2..1.5),
                            _ => rng.random::<f64>() * 0.9,
                        }
                    })
                    .collect()
            })
            .collect();
        let day_max = (0..days)
            .map(|d| risk.iter().map(|r| r[d]).sum::<f64>())
            .fold(0.0, f64::max);
        let r_psps = (day_max * rng.random_range(0.3..0.9)).max(1.0);
        let risk = profile(&net, risk, r_psps);
        let free = free_binary_count(&net, &risk, budget);
        if (1..=max_free).contains(&free) {
            return Fixture { seed, net, risk };
        }
    }
}

/// Builds a catalog model; load-shed policy models take their baseline from
/// an oracle solve of BL-M0 on the same fixture.
pub fn build(fx: &Fixture, id: ModelId, budget: f64, gap: f64) -> firegrid::Result<MilpModel> {
    let baseline = if id.needs_baseline() {
        let bl = build_scenario(
            &fx.net,
            &fx.risk,
            &ScenarioSpec::new(ModelId::BlM0, 0.0),
            &BuildContext::default(),
        )?;
        match oracle_solve(&bl, 20)?.outcome {
            OracleOutcome::Optimal { x, .. } => Some(BaselineReference::from_values(&fx.net, &bl.named_values(&x))),
            _ => None,
        }
    } else {
        None
    };
    let mut spec = ScenarioSpec::new(id, budget);
    spec.mip_gap = gap;
    build_scenario(
        &fx.net,
        &fx.risk,
        &spec,
        &BuildContext {
            baseline,
            equity_groups: None,
        },
    )
}

pub fn get(values: &BTreeMap<String, f64>, name: &str) -> f64 {
    values.get(name).copied().unwrap_or(0.0)
}

/// Largest per-bus power-balance residual, from the network alone.
pub fn balance_residual(net: &Network, v: &BTreeMap<String, f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for (d, &day) in net.horizon.days.iter().enumerate() {
        for t in 0..net.horizon.periods_per_day {
            for b in &net.buses {
                let mut r = get(v, &names::ps(&b.id, day, t)) - b.demand_at(d, t);
                for g in net.generators.iter().filter(|g| g.bus == b.id) {
                    r += get(v, &names::pg(&g.id, day, t));
                }
                for l in &net.lines {
                    let f = get(v, &names::f(&l.id, day, t));
                    if l.from_bus == b.id {
                        r -= f;
                    }
                    if l.to_bus == b.id {
                        r += f;
                    }
                }
                worst = worst.max(r.abs());
            }
        }
    }
    worst
}

/// Line physics with binaries substituted. Returns the largest flow on a
/// de-energized line and the largest violation of the energized-line rules
/// (DC flow equation, angle limits, flow limits).
pub fn line_physics(net: &Network, v: &BTreeMap<String, f64>) -> (f64, f64) {
    let mut off_flow: f64 = 0.0;
    let mut on_violation: f64 = 0.0;
    for &day in &net.horizon.days {
        for l in &net.lines {
            let z = v.get(&names::z(&l.id, day)).map_or(1.0, |z| z.round());
            for t in 0..net.horizon.periods_per_day {
                let f = get(v, &names::f(&l.id, day, t));
                if z == 0.0 {
                    off_flow = off_flow.max(f.abs());
                    continue;
                }
                let dtheta = get(v, &names::theta(&l.from_bus, day, t)) - get(v, &names::theta(&l.to_bus, day, t));
                let dc = (f + l.susceptance * dtheta).abs();
                let angle = (l.angle_min - dtheta).max(dtheta - l.angle_max).max(0.0);
                let flow = (f.abs() - l.flow_limit).max(0.0);
                on_violation = on_violation.max(dc).max(angle).max(flow);
            }
        }
    }
    (off_flow, on_violation)
}

/// Independent reading of the free-format MPS subset the writer emits.
#[derive(Debug, Default, PartialEq)]
pub struct MpsImage {
    pub name: String,
    pub objective_row: String,
    /// Row name to sense letter.
    pub rows: BTreeMap<String, char>,
    pub rhs: BTreeMap<String, f64>,
    /// `(column, row) -> coefficient`.
    pub coeffs: BTreeMap<(String, String), f64>,
    pub integer: BTreeSet<String>,
    pub columns: Vec<String>,
    /// Explicit bound records `(type, column) -> value`.
    pub bounds: BTreeMap<(String, String), f64>,
}

pub fn read_mps(text: &str) -> MpsImage {
    let mut img = MpsImage::default();
    let mut section = "";
    let mut int_mode = false;
    for line in text.lines() {
        if line.trim().is_empty() || line.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if !line.starts_with(' ') {
            section = toks[0];
            if section == "NAME" {
                img.name = toks.get(1).unwrap_or(&"").to_string();
            }
            continue;
        }
        let num = |s: &str| -> f64 { s.parse().unwrap_or_else(|_| panic!("bad number {s:?} in {line:?}")) };
        match section {
            "ROWS" => {
                let sense = toks[0].chars().next().unwrap();
                if sense == 'N' {
                    img.objective_row = toks[1].to_string();
                } else {
                    img.rows.insert(toks[1].to_string(), sense);
                }
            }
            "COLUMNS" => {
                if toks.get(1) == Some(&"'MARKER'") {
                    int_mode = toks[2] == "'INTORG'";
                    continue;
                }
                let col = toks[0].to_string();
                if img.columns.last() != Some(&col) {
                    img.columns.push(col.clone());
                }
                if int_mode {
                    img.integer.insert(col.clone());
                }
                for pair in toks[1..].chunks(2) {
                    img.coeffs.insert((col.clone(), pair[0].to_string()), num(pair[1]));
                }
            }
            "RHS" => {
                for pair in toks[1..].chunks(2) {
                    img.rhs.insert(pair[0].to_string(), num(pair[1]));
                }
            }
            "BOUNDS" => {
                let v = toks.get(3).map_or(f64::NAN, |s| num(s));
                img.bounds.insert((toks[0].to_string(), toks[2].to_string()), v);
            }
            _ => {}
        }
    }
    img
}
