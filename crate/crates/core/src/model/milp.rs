use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

/// Which formulation family a row (or a variable bound) encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tag {
    /// Generation limits (bounds on `pg`).
    GenLimits,
    /// `0 <= ps <= pl` (bounds on `ps`).
    ShedLimits,
    /// `|f| <= fmax * z` for switchable lines.
    #[serde(rename = "switch-flow-limit")]
    FlowLimitSwitch,
    /// `|f| <= fmax` for fixed lines (bounds on `f`).
    FlowLimit,
    /// Angle-difference limits for fixed lines.
    AngleLimit,
    #[serde(rename = "switch-angle-lower")]
    AngleSwitchLower,
    #[serde(rename = "switch-angle-upper")]
    AngleSwitchUpper,
    /// Big-M relaxed DC flow equation on switchable lines, lower side.
    #[serde(rename = "switch-dc-lower")]
    FlowSwitchLower,
    #[serde(rename = "switch-dc-upper")]
    FlowSwitchUpper,
    /// DC flow equality for fixed lines.
    DcFlow,
    #[serde(rename = "balance")]
    PowerBalance,
    /// Redundant box on bus angles (bounds on `theta`).
    AngleBox,
    /// `z = y` for high-risk lines.
    HighRiskLink,
    /// `y <= z` for medium-risk lines.
    MedRiskLink,
    Budget,
    /// Daily energized-risk cap.
    RiskCap,
    /// Share of budget attributed to vulnerable populations.
    PolicyBudget,
    /// Share of load-shed reduction seen by vulnerable populations.
    #[serde(rename = "policy-loadshed")]
    PolicyLoadShed,
    /// Total shed may not exceed the no-budget baseline.
    #[serde(rename = "policy-loadshed-cap")]
    PolicyLoadShedCap,
    /// `alpha >= P^s_m / P^l_m`.
    GroupShare,
    /// Rows read back from a file format that carries no provenance.
    #[serde(rename = "-")]
    Unspecified,
}

impl Tag {
    pub fn code(self) -> &'static str {
        match self {
            Tag::GenLimits => "gen-limits",
            Tag::ShedLimits => "shed-limits",
            Tag::FlowLimitSwitch => "switch-flow-limit",
            Tag::FlowLimit => "flow-limit",
            Tag::AngleLimit => "angle-limit",
            Tag::AngleSwitchLower => "switch-angle-lower",
            Tag::AngleSwitchUpper => "switch-angle-upper",
            Tag::FlowSwitchLower => "switch-dc-lower",
            Tag::FlowSwitchUpper => "switch-dc-upper",
            Tag::DcFlow => "dc-flow",
            Tag::PowerBalance => "balance",
            Tag::AngleBox => "angle-box",
            Tag::HighRiskLink => "high-risk-link",
            Tag::MedRiskLink => "med-risk-link",
            Tag::Budget => "budget",
            Tag::RiskCap => "risk-cap",
            Tag::PolicyBudget => "policy-budget",
            Tag::PolicyLoadShed => "policy-loadshed",
            Tag::PolicyLoadShedCap => "policy-loadshed-cap",
            Tag::GroupShare => "group-share",
            Tag::Unspecified => "-",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    #[serde(with = "extended_f64")]
    pub lower: f64,
    #[serde(with = "extended_f64")]
    pub upper: f64,
    /// Family whose bounds these are, when the bounds encode a constraint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_tag: Option<Tag>,
}

/// Finite numbers as JSON numbers, infinities as `"inf"` / `"-inf"`.
mod extended_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else if *v < 0.0 {
            s.serialize_str("-inf")
        } else {
            Err(serde::ser::Error::custom("NaN bound"))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(de::Error::custom(format!("bad bound {other:?}"))),
            },
        }
    }
}

impl Variable {
    pub fn is_fixed(&self) -> bool {
        self.lower == self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub tag: Tag,
    pub coeffs: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let a = self.activity(x);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }

    /// Coefficients and right-hand side after fixing `var` to `value`.
    pub fn substitute(&self, var: VarId, value: f64) -> (Vec<(VarId, f64)>, f64) {
        let mut rhs = self.rhs;
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for &(j, a) in &self.coeffs {
            if j == var {
                rhs -= a * value;
            } else {
                coeffs.push((j, a));
            }
        }
        (coeffs, rhs)
    }
}

/// Reference values from the no-budget baseline solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReference {
    /// Total shed over the horizon, p.u.
    pub total_shed: f64,
    /// Shed seen by vulnerable populations per index, p.u.
    pub vuln_shed: BTreeMap<String, f64>,
}

impl BaselineReference {
    pub fn check(&self) -> Result<()> {
        for (k, v) in &self.vuln_shed {
            if !(*v >= -1e-9 && *v <= self.total_shed + 1e-9) {
                return Err(Error::Invalid(format!(
                    "baseline vulnerable shed {k}={v} outside [0, {}]",
                    self.total_shed
                )));
            }
        }
        Ok(())
    }
}

/// Scenario bookkeeping carried with a built model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub scenario: String,
    #[serde(default)]
    pub model_id: Option<crate::grid::ModelId>,
    #[serde(default)]
    pub budget: f64,
    /// Total demand `P^l` over the horizon, p.u.
    #[serde(default)]
    pub total_demand: f64,
    /// Group demands `P^l_m` included in the equity rows.
    #[serde(default)]
    pub group_demand: BTreeMap<String, f64>,
    /// Groups left out of the equity rows because their demand is zero.
    #[serde(default)]
    pub excluded_groups: Vec<String>,
    #[serde(default)]
    pub baseline: Option<BaselineReference>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpModel {
    pub meta: ModelMeta,
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
    /// Minimized linear objective.
    pub objective: Vec<(VarId, f64)>,
    #[serde(skip)]
    index: HashMap<String, VarId>,
}

impl MilpModel {
    pub fn new(scenario: impl Into<String>) -> Self {
        MilpModel {
            meta: ModelMeta {
                scenario: scenario.into(),
                ..ModelMeta::default()
            },
            vars: Vec::new(),
            rows: Vec::new(),
            objective: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn add_var(
        &mut self,
        name: String,
        kind: VarKind,
        lower: f64,
        upper: f64,
        bound_tag: Option<Tag>,
    ) -> Result<VarId> {
        if self.index.contains_key(&name) {
            return Err(Error::Build(format!("duplicate variable {name}")));
        }
        let id = self.vars.len();
        self.index.insert(name.clone(), id);
        self.vars.push(Variable {
            name,
            kind,
            lower,
            upper,
            bound_tag,
        });
        Ok(id)
    }

    pub fn add_row(&mut self, name: String, tag: Tag, coeffs: Vec<(VarId, f64)>, sense: Sense, rhs: f64) {
        self.rows.push(Row {
            name,
            tag,
            coeffs,
            sense,
            rhs,
        });
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<VarId> {
        self.var_id(name)
            .ok_or_else(|| Error::Build(format!("missing variable {name}")))
    }

    pub fn rebuild_index(&mut self) {
        self.index = self.vars.iter().enumerate().map(|(i, v)| (v.name.clone(), i)).collect();
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let mut m: MilpModel = serde_json::from_str(text).map_err(|e| Error::json("model", e))?;
        m.rebuild_index();
        if m.index.len() != m.vars.len() {
            return Err(Error::Invalid("model has duplicate variable names".into()));
        }
        m.check_references()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    /// Every coefficient must reference a declared variable.
    pub fn check_references(&self) -> Result<()> {
        let n = self.vars.len();
        let bad = self
            .rows
            .iter()
            .flat_map(|r| r.coeffs.iter().map(move |c| (r, c.0)))
            .find(|(_, j)| *j >= n);
        if let Some((row, j)) = bad {
            return Err(Error::Invalid(format!(
                "row {} references unknown variable {j}",
                row.name
            )));
        }
        if let Some(&(j, _)) = self.objective.iter().find(|(j, _)| *j >= n) {
            return Err(Error::Invalid(format!("objective references unknown variable {j}")));
        }
        Ok(())
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| i)
    }

    pub fn free_binaries(&self) -> Vec<VarId> {
        self.binaries().filter(|&j| !self.vars[j].is_fixed()).collect()
    }

    pub fn num_binaries(&self) -> usize {
        self.binaries().count()
    }

    pub fn num_continuous(&self) -> usize {
        self.vars.len() - self.num_binaries()
    }

    pub fn rows_tagged(&self, tag: Tag) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(move |r| r.tag == tag)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * x[j]).sum()
    }

    /// Copy with every binary fixed to the rounded value in `x`.
    pub fn with_binaries_fixed(&self, x: &[f64]) -> MilpModel {
        let mut m = self.clone();
        for j in self.binaries() {
            let v = x[j].round().clamp(0.0, 1.0);
            m.vars[j].lower = v;
            m.vars[j].upper = v;
        }
        m
    }

    /// Copy with rows of `tag` dropped and bounds tagged `tag` opened
    /// (binaries go back to `[0, 1]`).
    pub fn relaxed(&self, tag: Tag) -> MilpModel {
        let mut m = self.clone();
        m.rows.retain(|r| r.tag != tag);
        for v in &mut m.vars {
            if v.bound_tag == Some(tag) {
                match v.kind {
                    VarKind::Binary => {
                        v.lower = 0.0;
                        v.upper = 1.0;
                    }
                    VarKind::Continuous => {
                        v.lower = f64::NEG_INFINITY;
                        v.upper = f64::INFINITY;
                    }
                }
                v.bound_tag = None;
            }
        }
        m
    }

    /// Dense value vector from a name map; missing names read as zero.
    pub fn dense_values(&self, values: &BTreeMap<String, f64>) -> Vec<f64> {
        self.vars
            .iter()
            .map(|v| values.get(&v.name).copied().unwrap_or(0.0))
            .collect()
    }

    pub fn named_values(&self, x: &[f64]) -> BTreeMap<String, f64> {
        self.vars.iter().zip(x).map(|(v, x)| (v.name.clone(), *x)).collect()
    }
}
