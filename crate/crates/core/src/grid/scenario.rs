use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const CEJST: &str = "CEJST";
pub const SVI: &str = "SVI";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelId {
    #[serde(rename = "BL-M0")]
    BlM0,
    #[serde(rename = "BL-M1")]
    BlM1,
    #[serde(rename = "M2")]
    M2,
    #[serde(rename = "M3")]
    M3,
    #[serde(rename = "M4")]
    M4,
    #[serde(rename = "M5")]
    M5,
    #[serde(rename = "E-M6")]
    EM6,
    #[serde(rename = "E-M7")]
    EM7,
    #[serde(rename = "E-M8")]
    EM8,
    #[serde(rename = "E-M9")]
    EM9,
    #[serde(rename = "E-M10")]
    EM10,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    TotalLoadShed,
    MaxGroupPercentShed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyConstraint {
    None,
    Budget,
    LoadShedReduction,
}

impl ModelId {
    pub const ALL: [ModelId; 11] = [
        ModelId::BlM0,
        ModelId::BlM1,
        ModelId::M2,
        ModelId::M3,
        ModelId::M4,
        ModelId::M5,
        ModelId::EM6,
        ModelId::EM7,
        ModelId::EM8,
        ModelId::EM9,
        ModelId::EM10,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::BlM0 => "BL-M0",
            ModelId::BlM1 => "BL-M1",
            ModelId::M2 => "M2",
            ModelId::M3 => "M3",
            ModelId::M4 => "M4",
            ModelId::M5 => "M5",
            ModelId::EM6 => "E-M6",
            ModelId::EM7 => "E-M7",
            ModelId::EM8 => "E-M8",
            ModelId::EM9 => "E-M9",
            ModelId::EM10 => "E-M10",
        }
    }

    /// The catalog row: objective, policy constraint and vulnerability index.
    pub fn row(self) -> (Objective, PolicyConstraint, Option<&'static str>) {
        use Objective::*;
        use PolicyConstraint as P;
        match self {
            ModelId::BlM0 | ModelId::BlM1 => (TotalLoadShed, P::None, None),
            ModelId::M2 => (TotalLoadShed, P::Budget, Some(CEJST)),
            ModelId::M3 => (TotalLoadShed, P::LoadShedReduction, Some(CEJST)),
            ModelId::M4 => (TotalLoadShed, P::Budget, Some(SVI)),
            ModelId::M5 => (TotalLoadShed, P::LoadShedReduction, Some(SVI)),
            ModelId::EM6 => (MaxGroupPercentShed, P::None, None),
            ModelId::EM7 => (MaxGroupPercentShed, P::Budget, Some(CEJST)),
            ModelId::EM8 => (MaxGroupPercentShed, P::LoadShedReduction, Some(CEJST)),
            ModelId::EM9 => (MaxGroupPercentShed, P::Budget, Some(SVI)),
            ModelId::EM10 => (MaxGroupPercentShed, P::LoadShedReduction, Some(SVI)),
        }
    }

    pub fn is_equity(self) -> bool {
        self.row().0 == Objective::MaxGroupPercentShed
    }

    pub fn needs_baseline(self) -> bool {
        self.row().1 == PolicyConstraint::LoadShedReduction
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelId::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown model id {s:?}")))
    }
}

/// One scenario of the model catalog, instantiated at a budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub model_id: ModelId,
    pub objective: Objective,
    pub policy_constraint: PolicyConstraint,
    pub vulnerability_index: Option<String>,
    /// Millions of USD.
    pub budget: f64,
    pub big_m_upper: f64,
    pub big_m_lower: f64,
    pub mip_gap: f64,
    /// Seconds.
    pub time_limit: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warm_start: Option<BTreeMap<String, f64>>,
}

impl ScenarioSpec {
    pub fn new(model_id: ModelId, budget: f64) -> Self {
        let (objective, policy_constraint, index) = model_id.row();
        let budget = if model_id == ModelId::BlM0 { 0.0 } else { budget };
        ScenarioSpec {
            model_id,
            objective,
            policy_constraint,
            vulnerability_index: index.map(str::to_owned),
            budget,
            big_m_upper: 2.0 * std::f64::consts::PI,
            big_m_lower: -2.0 * std::f64::consts::PI,
            mip_gap: 0.01,
            time_limit: 3600.0,
            warm_start: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.budget >= 0.0) || !self.budget.is_finite() {
            return Err(Error::Config(format!("budget must be >= 0, got {}", self.budget)));
        }
        if self.policy_constraint != PolicyConstraint::None && self.vulnerability_index.is_none() {
            return Err(Error::Config("policy constraint requires a vulnerability index".into()));
        }
        let (obj, pol, idx) = self.model_id.row();
        if obj != self.objective || pol != self.policy_constraint || idx != self.vulnerability_index.as_deref() {
            return Err(Error::Config(format!(
                "{} is inconsistent with objective/policy/index {:?}/{:?}/{:?}",
                self.model_id, self.objective, self.policy_constraint, self.vulnerability_index
            )));
        }
        if self.model_id == ModelId::BlM0 && self.budget != 0.0 {
            return Err(Error::Config("BL-M0 has zero budget".into()));
        }
        if !(self.big_m_lower < 0.0 && self.big_m_upper > 0.0) {
            return Err(Error::Config("big-M bounds must straddle zero".into()));
        }
        if !(self.mip_gap >= 0.0) {
            return Err(Error::Config("mip_gap must be >= 0".into()));
        }
        if !(self.time_limit > 0.0) {
            return Err(Error::Config("time_limit must be > 0".into()));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!("{}@{}", self.model_id, self.budget)
    }
}

/// All eleven catalog scenarios at `budget` (BL-M0 always at zero).
pub fn scenario_catalog(budget: f64) -> Vec<ScenarioSpec> {
    ModelId::ALL.into_iter().map(|m| ScenarioSpec::new(m, budget)).collect()
}
