use std::time::Duration;

use microlp::{
    ComparisonOp, LinearExpr, OptimizationDirection, Problem, SolveOptions, SolveOutcome, TerminationReason,
};

use super::{Backend, RawSolution, SolveRequest, SolveStatus};
use crate::model::{MilpModel, Sense, VarKind};
use crate::Result;

/// In-process branch-and-bound via `microlp`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MicrolpBackend;

/// Infinite bounds are passed to the solver as this magnitude. Its node LPs
/// can misreport free columns (bus angles) as unbounded; a finite box avoids
/// that, and a solution touching the box is rejected.
pub const INFINITE_CLAMP: f64 = 1e6;

fn build(model: &MilpModel) -> (Problem, Vec<microlp::Variable>) {
    let mut obj = vec![0.0; model.vars.len()];
    for &(j, c) in &model.objective {
        obj[j] += c;
    }
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let vars = model
        .vars
        .iter()
        .zip(&obj)
        .map(|(v, &c)| {
            if v.kind == VarKind::Binary && !v.is_fixed() {
                p.add_binary_var(c)
            } else {
                p.add_var(c, (v.lower.max(-INFINITE_CLAMP), v.upper.min(INFINITE_CLAMP)))
            }
        })
        .collect::<Vec<_>>();
    for r in &model.rows {
        let mut e = LinearExpr::empty();
        for &(j, a) in &r.coeffs {
            e.add(vars[j], a);
        }
        let op = match r.sense {
            Sense::Le => ComparisonOp::Le,
            Sense::Ge => ComparisonOp::Ge,
            Sense::Eq => ComparisonOp::Eq,
        };
        p.add_constraint(e, op, r.rhs);
    }
    (p, vars)
}

impl Backend for MicrolpBackend {
    fn name(&self) -> String {
        "microlp".into()
    }

    fn solve(&self, req: &SolveRequest<'_>) -> Result<RawSolution> {
        let model = req.model;
        if model.vars.iter().any(|v| v.lower > v.upper) {
            return Ok(RawSolution::without_point(
                SolveStatus::Infeasible,
                Some("empty variable domain".into()),
            ));
        }
        let (p, vars) = build(model);
        let mut opts = SolveOptions::default();
        opts.mip_gap = req.mip_gap;
        if req.time_limit.is_finite() && req.time_limit > 0.0 {
            opts.time_limit = Some(Duration::from_secs_f64(req.time_limit));
        }
        if let Some(ws) = req.warm_start {
            let hint: Vec<(microlp::Variable, f64)> = model
                .vars
                .iter()
                .enumerate()
                .filter(|(_, v)| v.kind == VarKind::Binary && !v.is_fixed())
                .filter_map(|(j, v)| ws.get(&v.name).map(|x| (vars[j], x.round())))
                .collect();
            if !hint.is_empty() {
                opts.warm_start = Some(hint);
            }
        }
        let outcome = match p.solve_with(opts) {
            Ok(o) => o,
            Err(microlp::Error::Infeasible) => return Ok(RawSolution::without_point(SolveStatus::Infeasible, None)),
            Err(microlp::Error::Unbounded) => {
                return Ok(RawSolution::without_point(SolveStatus::Error, Some("unbounded".into())))
            }
            Err(e) => return Ok(RawSolution::without_point(SolveStatus::Error, Some(e.to_string()))),
        };
        match outcome {
            SolveOutcome::Solution(s) => {
                let status = match s.termination_reason() {
                    TerminationReason::ProvenOptimal | TerminationReason::MipGap => SolveStatus::Optimal,
                    _ => SolveStatus::FeasibleGapped,
                };
                let stats = s.stats();
                let values: Vec<f64> = vars.iter().map(|&v| s.var_value_raw(v)).collect();
                let at_clamp = |lo: f64, up: f64, x: f64| {
                    (up.is_infinite() && x >= INFINITE_CLAMP * (1.0 - 1e-9))
                        || (lo.is_infinite() && x <= -INFINITE_CLAMP * (1.0 - 1e-9))
                };
                let clamped = model
                    .vars
                    .iter()
                    .zip(&values)
                    .find(|(v, &x)| at_clamp(v.lower, v.upper, x));
                if let Some((v, _)) = clamped {
                    return Ok(RawSolution::without_point(
                        SolveStatus::Error,
                        Some(format!(
                            "{} reached the solver's artificial bound {INFINITE_CLAMP:e}",
                            v.name
                        )),
                    ));
                }
                Ok(RawSolution {
                    status,
                    objective: Some(s.objective()),
                    best_bound: stats.best_bound,
                    gap: s.gap(),
                    nodes: Some(stats.nodes_solved),
                    values: Some(values),
                    message: None,
                })
            }
            SolveOutcome::Interrupted(i) => Ok(RawSolution::without_point(
                SolveStatus::TimeLimit,
                Some(format!("{:?} before a feasible point", i.termination_reason())),
            )),
        }
    }
}
