//! MILP backends, post-solve polishing and independent feasibility checks.

mod microlp_backend;
pub mod mps;
mod oracle;
mod process;
pub mod simplex;

use std::collections::BTreeMap;
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::model::{MilpModel, Sense, Tag, VarKind};
use crate::{Error, Result};

pub use microlp_backend::MicrolpBackend;
pub use oracle::{oracle_solve, OracleOutcome, OracleResult, DEFAULT_ORACLE_CAP};
pub use process::{parse_solution, ParsedSolution, ProcessBackend, ProcessConfig, SolutionFormat};

/// Environment variable selecting the default backend: `microlp`, `oracle`,
/// or a path to a process-backend JSON config.
pub const BACKEND_ENV: &str = "FIREGRID_BACKEND";

pub const ROW_TOL: f64 = 1e-6;
pub const BOUND_TOL: f64 = 1e-9;
pub const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    FeasibleGapped,
    Infeasible,
    TimeLimit,
    Error,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleGapped)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleGapped => "feasible-gapped",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::TimeLimit => "time-limit",
            SolveStatus::Error => "error",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s.trim() {
            "optimal" => SolveStatus::Optimal,
            "feasible" | "feasible-gapped" => SolveStatus::FeasibleGapped,
            "infeasible" => SolveStatus::Infeasible,
            "time-limit" => SolveStatus::TimeLimit,
            "error" => SolveStatus::Error,
            _ => return None,
        })
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Worst violations of a candidate point, measured against the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub max_row_violation: f64,
    pub max_bound_violation: f64,
    pub max_integrality_violation: f64,
    /// Largest power-balance residual.
    pub max_balance_residual: f64,
    /// Largest |flow| on a line whose switching variable is zero.
    pub max_deenergized_flow: f64,
    pub feasible: bool,
}

pub fn verify(model: &MilpModel, x: &[f64]) -> Verification {
    let mut row = 0.0f64;
    let mut balance = 0.0f64;
    for r in &model.rows {
        let v = r.violation(x);
        row = row.max(v);
        if r.tag == Tag::PowerBalance {
            balance = balance.max(v);
        }
    }
    let mut bound = 0.0f64;
    let mut integ = 0.0f64;
    for (v, &xj) in model.vars.iter().zip(x) {
        bound = bound.max(v.lower - xj).max(xj - v.upper);
        if v.kind == VarKind::Binary {
            integ = integ.max((xj - xj.round()).abs());
        }
    }
    let mut flow = 0.0f64;
    for r in model.rows_tagged(Tag::FlowLimitSwitch) {
        let z = r.coeffs.iter().find(|(j, _)| model.vars[*j].kind == VarKind::Binary);
        let f = r
            .coeffs
            .iter()
            .find(|(j, _)| model.vars[*j].kind == VarKind::Continuous);
        if let (Some(&(z, _)), Some(&(f, _))) = (z, f) {
            if x[z] < 0.5 {
                flow = flow.max(x[f].abs());
            }
        }
    }
    let bad = |v: f64| v.is_nan();
    Verification {
        max_row_violation: row,
        max_bound_violation: bound,
        max_integrality_violation: integ,
        max_balance_residual: balance,
        max_deenergized_flow: flow,
        feasible: row <= ROW_TOL && bound <= BOUND_TOL && integ <= INT_TOL && !x.iter().copied().any(bad),
    }
}

/// What a backend is asked to do.
#[derive(Debug, Clone, Copy)]
pub struct SolveRequest<'a> {
    pub model: &'a MilpModel,
    pub mip_gap: f64,
    /// Seconds.
    pub time_limit: f64,
    pub warm_start: Option<&'a BTreeMap<String, f64>>,
}

impl<'a> SolveRequest<'a> {
    pub fn new(model: &'a MilpModel) -> Self {
        SolveRequest {
            model,
            mip_gap: 0.0,
            time_limit: 3600.0,
            warm_start: None,
        }
    }
}

/// A backend's answer before polishing and verification.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSolution {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub best_bound: Option<f64>,
    pub gap: Option<f64>,
    /// Branch-and-bound nodes, when the backend reports them.
    pub nodes: Option<u64>,
    /// Dense values in model order when a point is available.
    pub values: Option<Vec<f64>>,
    pub message: Option<String>,
}

impl RawSolution {
    pub fn without_point(status: SolveStatus, message: Option<String>) -> Self {
        RawSolution {
            status,
            objective: None,
            best_bound: None,
            gap: None,
            nodes: None,
            values: None,
            message,
        }
    }
}

pub trait Backend: Send + Sync {
    fn name(&self) -> String;
    fn solve(&self, req: &SolveRequest<'_>) -> Result<RawSolution>;
}

/// Exhaustive-enumeration backend; only for small models.
#[derive(Debug, Clone, Copy)]
pub struct OracleBackend {
    pub cap: usize,
}

impl Default for OracleBackend {
    fn default() -> Self {
        OracleBackend {
            cap: DEFAULT_ORACLE_CAP,
        }
    }
}

impl Backend for OracleBackend {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn solve(&self, req: &SolveRequest<'_>) -> Result<RawSolution> {
        let r = oracle_solve(req.model, self.cap)?;
        Ok(match r.outcome {
            OracleOutcome::Optimal { objective, x, .. } => RawSolution {
                status: SolveStatus::Optimal,
                objective: Some(objective),
                best_bound: Some(objective),
                gap: Some(0.0),
                nodes: Some(r.leaves as u64),
                values: Some(x),
                message: None,
            },
            OracleOutcome::Infeasible => RawSolution::without_point(SolveStatus::Infeasible, None),
            OracleOutcome::Unbounded => RawSolution::without_point(SolveStatus::Error, Some("unbounded".into())),
        })
    }
}

/// Backend named by [`BACKEND_ENV`], defaulting to the in-process solver.
pub fn backend_from_env() -> Result<Box<dyn Backend>> {
    match std::env::var(BACKEND_ENV) {
        Ok(v) if !v.trim().is_empty() => backend_by_name(v.trim()),
        _ => Ok(Box::new(MicrolpBackend)),
    }
}

pub fn backend_by_name(spec: &str) -> Result<Box<dyn Backend>> {
    match spec {
        "microlp" => Ok(Box::new(MicrolpBackend)),
        "oracle" => Ok(Box::new(OracleBackend::default())),
        path => Ok(Box::new(ProcessBackend::from_file(std::path::Path::new(path))?)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub scenario: String,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub best_bound: Option<f64>,
    pub gap: Option<f64>,
    pub backend: String,
    pub elapsed_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<Verification>,
    pub values: BTreeMap<String, f64>,
}

impl Solution {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }

    /// Dense values in `model` order; names not present read as zero.
    pub fn dense(&self, model: &MilpModel) -> Vec<f64> {
        model.dense_values(&self.values)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("solution serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("solution", e))
    }
}

/// Fixes `x`'s rounded binaries, tightens bounds implied by rows left with a
/// single free variable, and re-solves the LP.
pub fn polish(model: &MilpModel, x: &[f64]) -> Result<Vec<f64>> {
    let mut fixed = model.with_binaries_fixed(x);
    tighten_singletons(&mut fixed)?;
    let raw = MicrolpBackend.solve(&SolveRequest::new(&fixed))?;
    match raw.values {
        Some(v) if raw.status == SolveStatus::Optimal => Ok(v),
        _ => Err(Error::Solver(format!(
            "polish LP ended {}{}",
            raw.status,
            raw.message.map(|m| format!(": {m}")).unwrap_or_default()
        ))),
    }
}

fn tighten_singletons(m: &mut MilpModel) -> Result<()> {
    for r in &m.rows {
        let mut rhs = r.rhs;
        let mut free = None;
        let mut count = 0;
        for &(j, a) in &r.coeffs {
            if a == 0.0 {
                continue;
            }
            let v = &m.vars[j];
            if v.is_fixed() {
                rhs -= a * v.lower;
            } else {
                count += 1;
                free = Some((j, a));
            }
        }
        let (1, Some((j, a))) = (count, free) else { continue };
        let bound = rhs / a;
        let v = &mut m.vars[j];
        let (upper, lower) = match (r.sense, a > 0.0) {
            (Sense::Eq, _) => (true, true),
            (Sense::Le, true) | (Sense::Ge, false) => (true, false),
            _ => (false, true),
        };
        if upper && bound < v.upper {
            v.upper = bound;
        }
        if lower && bound > v.lower {
            v.lower = bound;
        }
        if v.lower > v.upper {
            if v.lower - v.upper > ROW_TOL {
                return Err(Error::Solver(format!(
                    "row {} infeasible once binaries are fixed",
                    r.name
                )));
            }
            v.upper = v.lower;
        }
    }
    Ok(())
}

/// Runs `backend`, polishes any returned point and verifies it in-process.
/// Backend failures become [`SolveStatus::Error`] rather than `Err`.
pub fn solve_model(backend: &dyn Backend, req: &SolveRequest<'_>) -> Solution {
    let start = Instant::now();
    let model = req.model;
    let mut sol = Solution {
        scenario: model.meta.scenario.clone(),
        status: SolveStatus::Error,
        objective: None,
        best_bound: None,
        gap: None,
        backend: backend.name(),
        elapsed_s: 0.0,
        nodes: None,
        message: None,
        verification: None,
        values: BTreeMap::new(),
    };
    let raw = match backend.solve(req) {
        Ok(r) => r,
        Err(e) => {
            sol.message = Some(e.to_string());
            sol.elapsed_s = start.elapsed().as_secs_f64();
            return sol;
        }
    };
    sol.status = raw.status;
    sol.best_bound = raw.best_bound;
    sol.gap = raw.gap;
    sol.nodes = raw.nodes;
    sol.message = raw.message;
    if let Some(mut x) = raw.values.filter(|_| raw.status.has_solution()) {
        if x.len() != model.vars.len() {
            sol.status = SolveStatus::Error;
            sol.message = Some(format!(
                "backend returned {} values for {} variables",
                x.len(),
                model.vars.len()
            ));
            sol.elapsed_s = start.elapsed().as_secs_f64();
            return sol;
        }
        if model.num_binaries() > 0 {
            match polish(model, &x) {
                Ok(p) => x = p,
                Err(e) => log::warn!("{}: keeping unpolished point: {e}", model.meta.scenario),
            }
        }
        let check = verify(model, &x);
        let obj = model.objective_value(&x);
        sol.objective = Some(obj);
        if let Some(b) = sol.best_bound {
            sol.gap = Some(relative_gap(obj, b));
        }
        sol.verification = Some(check);
        sol.values = model.named_values(&x);
        if !check.feasible {
            sol.status = SolveStatus::Error;
            sol.message = Some(format!(
                "verification failed: row {:.3e}, bound {:.3e}, integrality {:.3e}",
                check.max_row_violation, check.max_bound_violation, check.max_integrality_violation
            ));
        }
    }
    sol.elapsed_s = start.elapsed().as_secs_f64();
    sol
}

pub fn relative_gap(objective: f64, bound: f64) -> f64 {
    let diff = (objective - bound).max(0.0);
    if diff == 0.0 {
        0.0
    } else {
        diff / objective.abs().max(1e-10)
    }
}
