use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::grid::{FamilyKind, Network};
use crate::model::names;
use crate::risk::RiskProfile;
use crate::solve::Solution;

/// Percent-shed level above which a group is flagged.
pub const SHED_FLAG_PERCENT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub group: String,
    /// Demand attributed to the group over the horizon, p.u.
    pub demand: f64,
    pub shed: f64,
    /// `None` when the group has no demand.
    pub percent_shed: Option<f64>,
    /// Group percent shed over overall percent shed.
    pub unfairness: Option<f64>,
    pub population: f64,
    /// Millions of USD.
    pub budget_allocated: f64,
    /// USD per person.
    pub budget_per_capita: Option<f64>,
    pub risk_reduction: f64,
    pub risk_per_capita: Option<f64>,
    pub above_threshold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnerableRow {
    pub index: String,
    pub shed: f64,
    /// Millions of USD spent on lines attributed to vulnerable populations.
    pub budget_allocated: f64,
    /// Share of total hardening spend, `None` with no spend.
    pub budget_share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub scenario: String,
    pub overall: GroupRow,
    pub groups: Vec<GroupRow>,
    pub vulnerable: Vec<VulnerableRow>,
    /// Spend not attributed to any group of a partition family, per family.
    pub unattributed_budget: BTreeMap<String, f64>,
    /// `max_m P^s_m / P^l_m` over groups with demand.
    pub max_group_ratio: Option<f64>,
}

fn per_capita(amount: f64, population: f64) -> Option<f64> {
    (population > 0.0).then(|| amount / population)
}

/// Binary value or its implied default (`z = 1` when not switchable,
/// `y = 0` when not hardenable).
fn value_or(sol: &Solution, name: &str, default: f64) -> f64 {
    sol.value(name).map_or(default, f64::round)
}

/// A group's shed percentage relative to the system-wide one. `None` when
/// nothing was shed overall.
pub fn unfairness_ratio(group_percent: f64, overall_percent: f64) -> Option<f64> {
    (overall_percent > 0.0).then(|| group_percent / overall_percent)
}

pub fn compute_group_metrics(net: &Network, risk: &RiskProfile, sol: &Solution) -> GroupMetrics {
    let days = &net.horizon.days;
    let periods = net.horizon.periods_per_day;
    let nb = net.buses.len();
    let mut bus_shed = vec![0.0; nb];
    for (n, b) in net.buses.iter().enumerate() {
        for &day in days {
            for t in 0..periods {
                bus_shed[n] += sol.value(&names::ps(&b.id, day, t)).unwrap_or(0.0);
            }
        }
    }
    let bus_demand: Vec<f64> = net.buses.iter().map(|b| b.total_demand()).collect();

    // Per-line hardening spend and risk reduction, split half to each end bus.
    let mut bus_budget = vec![0.0; nb];
    let mut bus_risk = vec![0.0; nb];
    let mut total_budget = 0.0;
    let mut total_risk = 0.0;
    let mut line_spend = Vec::with_capacity(net.lines.len());
    for line in &net.lines {
        let y = value_or(sol, &names::y(&line.id), 0.0);
        let spend = y * line.underground_cost();
        let mut reduced = 0.0;
        if let Some(l) = risk.line_idx(&line.id) {
            for (d, &day) in days.iter().enumerate() {
                let z = value_or(sol, &names::z(&line.id, day), 1.0);
                reduced += risk.risk(l, d) * (1.0 - z + y);
            }
        }
        total_budget += spend;
        total_risk += reduced;
        line_spend.push(spend);
        for end in [&line.from_bus, &line.to_bus] {
            if let Some(n) = net.bus_idx(end) {
                bus_budget[n] += 0.5 * spend;
                bus_risk[n] += 0.5 * reduced;
            }
        }
    }

    let total_demand: f64 = bus_demand.iter().sum();
    let total_shed: f64 = bus_shed.iter().sum();
    let overall_pct = (total_demand > 0.0).then(|| 100.0 * total_shed / total_demand);
    let total_pop: f64 = net.buses.iter().map(|b| b.population).sum();
    let overall = GroupRow {
        group: "overall".into(),
        demand: total_demand,
        shed: total_shed,
        percent_shed: overall_pct,
        unfairness: overall_pct.map(|_| 1.0),
        population: total_pop,
        budget_allocated: total_budget,
        budget_per_capita: per_capita(total_budget * 1e6, total_pop),
        risk_reduction: total_risk,
        risk_per_capita: per_capita(total_risk, total_pop),
        above_threshold: overall_pct.is_some_and(|p| p > SHED_FLAG_PERCENT),
    };

    let mut groups = Vec::new();
    let mut max_ratio: Option<f64> = None;
    for g in net.group_names() {
        let mut row = GroupRow {
            group: g.clone(),
            demand: 0.0,
            shed: 0.0,
            percent_shed: None,
            unfairness: None,
            population: 0.0,
            budget_allocated: 0.0,
            budget_per_capita: None,
            risk_reduction: 0.0,
            risk_per_capita: None,
            above_threshold: false,
        };
        for (n, b) in net.buses.iter().enumerate() {
            let gamma = b.group_fraction(&g);
            row.demand += gamma * bus_demand[n];
            row.shed += gamma * bus_shed[n];
            row.population += gamma * b.population;
            row.budget_allocated += gamma * bus_budget[n];
            row.risk_reduction += gamma * bus_risk[n];
        }
        if row.demand > 0.0 {
            let ratio = row.shed / row.demand;
            max_ratio = Some(max_ratio.map_or(ratio, |m: f64| m.max(ratio)));
            let pct = 100.0 * ratio;
            row.percent_shed = Some(pct);
            row.above_threshold = pct > SHED_FLAG_PERCENT;
            row.unfairness = overall_pct.and_then(|o| unfairness_ratio(pct, o));
        }
        row.budget_per_capita = per_capita(row.budget_allocated * 1e6, row.population);
        row.risk_per_capita = per_capita(row.risk_reduction, row.population);
        groups.push(row);
    }

    let mut indices: Vec<String> = net.buses.iter().flat_map(|b| b.vuln_fraction.keys().cloned()).collect();
    indices.sort();
    indices.dedup();
    let vulnerable = indices
        .into_iter()
        .map(|k| {
            let shed = net.buses.iter().zip(&bus_shed).map(|(b, s)| b.vuln(&k) * s).sum();
            let budget: f64 = net
                .lines
                .iter()
                .zip(&line_spend)
                .map(|(l, s)| s * crate::model::line_vuln_share(net, l, &k))
                .sum();
            VulnerableRow {
                index: k,
                shed,
                budget_allocated: budget,
                budget_share: (total_budget > 0.0).then(|| budget / total_budget),
            }
        })
        .collect();

    let unattributed_budget = net
        .group_families
        .iter()
        .filter(|f| f.kind == FamilyKind::Partition)
        .map(|f| {
            let attributed: f64 = groups
                .iter()
                .filter(|r| f.groups.contains(&r.group))
                .map(|r| r.budget_allocated)
                .sum();
            (f.name.clone(), total_budget - attributed)
        })
        .collect();

    GroupMetrics {
        scenario: sol.scenario.clone(),
        overall,
        groups,
        vulnerable,
        unattributed_budget,
        max_group_ratio: max_ratio,
    }
}
