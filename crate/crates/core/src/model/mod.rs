//! Solver-agnostic MILP container and the scenario builder.

mod build;
mod milp;

pub use build::{
    add_budget, add_equity, add_hardening, add_policy_budget, add_policy_loadshed, add_risk_cap, build_dcots,
    build_scenario, line_vuln_share, names, set_objective, switching_threshold_rows, BuildContext, POLICY_SHARE,
};
pub use milp::{BaselineReference, MilpModel, ModelMeta, Row, Sense, Tag, VarId, VarKind, Variable};
