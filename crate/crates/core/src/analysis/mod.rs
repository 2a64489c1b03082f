//! Post-processing of equity solutions, group metrics and reports.

mod metrics;
mod report;

use std::collections::BTreeMap;

use crate::grid::{Network, Objective};
use crate::model::{names, set_objective, MilpModel};
use crate::solve::{solve_model, MicrolpBackend, Solution, SolveRequest, SolveStatus};
use crate::{Error, Result};

pub use metrics::{compute_group_metrics, unfairness_ratio, GroupMetrics, GroupRow, VulnerableRow, SHED_FLAG_PERCENT};
pub use report::{write_report, ReportEntry};

/// `max_m P^s_m / P^l_m` over the given groups (skipping zero-demand ones).
pub fn max_group_ratio(net: &Network, values: &BTreeMap<String, f64>, groups: &[String]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for g in groups {
        let mut demand = 0.0;
        let mut shed = 0.0;
        for b in &net.buses {
            let gamma = b.group_fraction(g);
            if gamma == 0.0 {
                continue;
            }
            demand += gamma * b.total_demand();
            for &day in &net.horizon.days {
                for t in 0..net.horizon.periods_per_day {
                    shed += gamma * values.get(&names::ps(&b.id, day, t)).copied().unwrap_or(0.0);
                }
            }
        }
        if demand > 0.0 {
            let r = shed / demand;
            best = Some(best.map_or(r, |m: f64| m.max(r)));
        }
    }
    best
}

/// Result of re-optimizing an equity solution for total shed.
#[derive(Debug, Clone)]
pub struct PostProcessed {
    pub solution: Solution,
    pub shed_before: f64,
    pub shed_after: f64,
}

fn total_shed(net: &Network, values: &BTreeMap<String, f64>) -> f64 {
    let mut s = 0.0;
    for &day in &net.horizon.days {
        for t in 0..net.horizon.periods_per_day {
            for b in &net.buses {
                s += values.get(&names::ps(&b.id, day, t)).copied().unwrap_or(0.0);
            }
        }
    }
    s
}

/// Fixes the equity solution's binaries, keeps the group-share rows, and
/// minimizes total shed; `alpha` is then reset to the achieved maximum group
/// ratio. The reported objective stays the equity objective (`alpha`).
pub fn postprocess_equity(model: &MilpModel, net: &Network, sol: &Solution) -> Result<PostProcessed> {
    if model.var_id(names::ALPHA).is_none() {
        return Err(Error::Invalid(format!(
            "{} has no equity objective",
            model.meta.scenario
        )));
    }
    if !sol.status.has_solution() {
        return Err(Error::Invalid(format!(
            "{} has no solution to post-process",
            model.meta.scenario
        )));
    }
    let x = sol.dense(model);
    let mut fixed = model.with_binaries_fixed(&x);
    set_objective(&mut fixed, net, Objective::TotalLoadShed)?;
    let out = solve_model(&MicrolpBackend, &SolveRequest::new(&fixed));
    if out.status != SolveStatus::Optimal {
        return Err(Error::Solver(format!(
            "post-processing LP ended {}{}",
            out.status,
            out.message.map(|m| format!(": {m}")).unwrap_or_default()
        )));
    }
    let mut values = out.values;
    let groups: Vec<String> = model.meta.group_demand.keys().cloned().collect();
    let alpha = max_group_ratio(net, &values, &groups).unwrap_or(0.0);
    values.insert(names::ALPHA.into(), alpha);
    let shed_before = total_shed(net, &sol.values);
    let shed_after = total_shed(net, &values);
    let mut solution = sol.clone();
    solution.values = values;
    solution.objective = Some(alpha);
    solution.verification = Some(crate::solve::verify(model, &solution.dense(model)));
    Ok(PostProcessed {
        solution,
        shed_before,
        shed_after,
    })
}
