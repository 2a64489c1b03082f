//! Network, horizon and scenario domain types.
//!
//! Electrical quantities are per-unit on [`Horizon::base_power`]. Line costs
//! are millions of USD, lengths are miles, angles radians.

pub mod matpower;
pub mod scenario;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geo::{polyline_km, LatLon};
use crate::{Error, Result};

pub use scenario::{scenario_catalog, ModelId, Objective, PolicyConstraint, ScenarioSpec};

/// Undergrounding cost rate in millions of USD per mile.
pub const UNDERGROUND_COST_PER_MILE: f64 = 7.0;
pub const KM_PER_MILE: f64 = 1.609_344;
/// Tolerance on the sum of a partition family's fractions.
pub const PARTITION_TOL: f64 = 1e-6;
/// Tolerance on path endpoints versus bus locations, in degrees.
pub const ENDPOINT_TOL_DEG: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub days: Vec<u32>,
    pub periods_per_day: usize,
    #[serde(default = "default_base_power")]
    pub base_power: f64,
}

fn default_base_power() -> f64 {
    100.0
}

impl Horizon {
    pub fn new(days: Vec<u32>, periods_per_day: usize) -> Self {
        Horizon {
            days,
            periods_per_day,
            base_power: default_base_power(),
        }
    }

    pub fn num_days(&self) -> usize {
        self.days.len()
    }

    /// Iterates `(day position, period)` pairs in model order.
    pub fn slots(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let t = self.periods_per_day;
        (0..self.days.len()).flat_map(move |d| (0..t).map(move |p| (d, p)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    /// Demand in p.u. indexed `[day position][period]`.
    #[serde(default)]
    pub demand: Vec<Vec<f64>>,
    #[serde(default)]
    pub population: f64,
    #[serde(default)]
    pub group_fractions: BTreeMap<String, f64>,
    #[serde(default)]
    pub vuln_fraction: BTreeMap<String, f64>,
    pub location: LatLon,
}

impl Bus {
    pub fn total_demand(&self) -> f64 {
        self.demand.iter().flatten().sum()
    }

    pub fn demand_at(&self, day: usize, period: usize) -> f64 {
        self.demand
            .get(day)
            .and_then(|row| row.get(period))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn group_fraction(&self, group: &str) -> f64 {
        self.group_fractions.get(group).copied().unwrap_or(0.0)
    }

    pub fn vuln(&self, index: &str) -> f64 {
        self.vuln_fraction.get(index).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: String,
    pub from_bus: String,
    pub to_bus: String,
    pub susceptance: f64,
    pub flow_limit: f64,
    pub angle_min: f64,
    pub angle_max: f64,
    /// Miles. Derived from `path` when absent.
    #[serde(default)]
    pub length: Option<f64>,
    /// Millions of USD. Defaults to the per-mile rate times length.
    #[serde(default)]
    pub underground_cost: Option<f64>,
    #[serde(default)]
    pub path: Vec<LatLon>,
}

impl Line {
    pub fn length_miles(&self) -> f64 {
        self.length.unwrap_or_else(|| polyline_km(&self.path) / KM_PER_MILE)
    }

    pub fn underground_cost(&self) -> f64 {
        self.underground_cost
            .unwrap_or_else(|| UNDERGROUND_COST_PER_MILE * self.length_miles())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: String,
    pub bus: String,
    #[serde(default)]
    pub p_min: f64,
    pub p_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyKind {
    /// Fractions across the family sum to one on every populated bus.
    Partition,
    /// Independent fractions (e.g. uninsured, low income).
    Overlay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupFamily {
    pub name: String,
    pub kind: FamilyKind,
    pub groups: Vec<String>,
}

/// Per-bus incidence sets, stored as indices into the network vectors.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Incidence {
    pub generators: Vec<Vec<usize>>,
    pub lines_from: Vec<Vec<usize>>,
    pub lines_to: Vec<Vec<usize>>,
}

impl Incidence {
    /// Rebuilds incidence from line and generator bus references. References
    /// to unknown buses are skipped; [`validate_network`] reports them.
    pub fn build(buses: &[Bus], lines: &[Line], generators: &[Generator]) -> Self {
        let index: HashMap<&str, usize> = buses.iter().enumerate().map(|(i, b)| (b.id.as_str(), i)).collect();
        let n = buses.len();
        let mut inc = Incidence {
            generators: vec![Vec::new(); n],
            lines_from: vec![Vec::new(); n],
            lines_to: vec![Vec::new(); n],
        };
        for (k, g) in generators.iter().enumerate() {
            if let Some(&b) = index.get(g.bus.as_str()) {
                inc.generators[b].push(k);
            }
        }
        for (k, l) in lines.iter().enumerate() {
            if let Some(&b) = index.get(l.from_bus.as_str()) {
                inc.lines_from[b].push(k);
            }
            if let Some(&b) = index.get(l.to_bus.as_str()) {
                inc.lines_to[b].push(k);
            }
        }
        inc
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Network {
    pub horizon: Horizon,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub group_families: Vec<GroupFamily>,
    #[serde(skip)]
    incidence: Incidence,
    #[serde(skip)]
    bus_index: HashMap<String, usize>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.horizon == other.horizon
            && self.buses == other.buses
            && self.lines == other.lines
            && self.generators == other.generators
            && self.group_families == other.group_families
    }
}

impl Network {
    pub fn new(
        horizon: Horizon,
        buses: Vec<Bus>,
        lines: Vec<Line>,
        generators: Vec<Generator>,
        group_families: Vec<GroupFamily>,
    ) -> Self {
        let mut net = Network {
            horizon,
            buses,
            lines,
            generators,
            group_families,
            incidence: Incidence::default(),
            bus_index: HashMap::new(),
        };
        net.normalize();
        net
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let net: Network = serde_json::from_str(text).map_err(|e| Error::json("network", e))?;
        Ok(Network::new(
            net.horizon,
            net.buses,
            net.lines,
            net.generators,
            net.group_families,
        ))
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let net: Network = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        Ok(Network::new(
            net.horizon,
            net.buses,
            net.lines,
            net.generators,
            net.group_families,
        ))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    /// Fills default line paths from bus locations and rebuilds indices.
    fn normalize(&mut self) {
        self.rebuild_indices();
        for line in &mut self.lines {
            if line.path.is_empty() {
                let ends = (self.bus_index.get(&line.from_bus), self.bus_index.get(&line.to_bus));
                if let (Some(&a), Some(&b)) = ends {
                    line.path = vec![self.buses[a].location, self.buses[b].location];
                }
            }
        }
    }

    pub fn rebuild_indices(&mut self) {
        self.bus_index = self.buses.iter().enumerate().map(|(i, b)| (b.id.clone(), i)).collect();
        self.incidence = Incidence::build(&self.buses, &self.lines, &self.generators);
    }

    pub fn incidence(&self) -> &Incidence {
        &self.incidence
    }

    pub fn bus_idx(&self, id: &str) -> Option<usize> {
        self.bus_index.get(id).copied()
    }

    pub fn bus(&self, id: &str) -> Option<&Bus> {
        self.bus_idx(id).map(|i| &self.buses[i])
    }

    pub fn total_demand(&self) -> f64 {
        self.buses.iter().map(Bus::total_demand).sum()
    }

    /// Buses with nonzero demand on the horizon.
    pub fn load_buses(&self) -> impl Iterator<Item = &Bus> {
        self.buses.iter().filter(|b| b.total_demand() > 0.0)
    }

    /// All group names that appear on any bus or family, sorted.
    pub fn group_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .buses
            .iter()
            .flat_map(|b| b.group_fractions.keys().cloned())
            .chain(self.group_families.iter().flat_map(|f| f.groups.iter().cloned()))
            .collect();
        names.sort();
        names.dedup();
        names
    }

    pub fn family_of(&self, group: &str) -> Option<&GroupFamily> {
        self.group_families.iter().find(|f| f.groups.iter().any(|g| g == group))
    }

    pub fn partition_families(&self) -> impl Iterator<Item = &GroupFamily> {
        self.group_families.iter().filter(|f| f.kind == FamilyKind::Partition)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub severity: Severity,
    /// Entity kind and id, e.g. `line l3`.
    pub entity: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}: {}", self.entity, self.rule)
    }
}

struct Report(Vec<Violation>);

impl Report {
    fn error(&mut self, entity: impl Into<String>, rule: impl Into<String>) {
        self.0.push(Violation {
            severity: Severity::Error,
            entity: entity.into(),
            rule: rule.into(),
        });
    }

    fn warn(&mut self, entity: impl Into<String>, rule: impl Into<String>) {
        self.0.push(Violation {
            severity: Severity::Warning,
            entity: entity.into(),
            rule: rule.into(),
        });
    }
}

fn bad_name(id: &str) -> bool {
    id.is_empty() || id.chars().any(|c| c.is_whitespace() || c.is_control())
}

fn close(a: LatLon, b: LatLon) -> bool {
    (a.lat - b.lat).abs() <= ENDPOINT_TOL_DEG && (a.lon - b.lon).abs() <= ENDPOINT_TOL_DEG
}

/// Checks every structural invariant of the network. Returns an empty list
/// iff the network is well formed; a disconnected network yields a warning.
pub fn validate_network(net: &Network) -> Vec<Violation> {
    let mut r = Report(Vec::new());
    let h = &net.horizon;

    if h.days.is_empty() {
        r.error("horizon", "days must be nonempty");
    }
    let mut seen_days = HashSet::new();
    for d in &h.days {
        if !seen_days.insert(*d) {
            r.error("horizon", format!("duplicate day {d}"));
        }
    }
    if h.periods_per_day < 1 {
        r.error("horizon", "periods_per_day must be >= 1");
    }
    if !(h.base_power > 0.0) {
        r.error("horizon", "base_power must be > 0");
    }

    let mut ids = HashSet::new();
    for bus in &net.buses {
        let e = format!("bus {}", bus.id);
        if bad_name(&bus.id) {
            r.error(&e, "identifier must be nonempty without whitespace");
        }
        if !ids.insert(bus.id.as_str()) {
            r.error(&e, "duplicate bus id");
        }
        if bus.demand.len() != h.days.len() || bus.demand.iter().any(|row| row.len() != h.periods_per_day) {
            r.error(
                &e,
                format!(
                    "demand shape must be {} days x {} periods",
                    h.days.len(),
                    h.periods_per_day
                ),
            );
        }
        if bus.demand.iter().flatten().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            r.error(&e, "demand must be finite and >= 0");
        }
        if !(bus.population >= 0.0) {
            r.error(&e, "population must be >= 0");
        }
        for (g, v) in bus.group_fractions.iter().chain(bus.vuln_fraction.iter()) {
            if !(0.0..=1.0).contains(v) {
                r.error(&e, format!("fraction {g}={v} outside [0,1]"));
            }
        }
        for fam in net.partition_families() {
            let present = fam.groups.iter().any(|g| bus.group_fractions.contains_key(g));
            if !present {
                continue;
            }
            let sum: f64 = fam.groups.iter().map(|g| bus.group_fraction(g)).sum();
            if (sum - 1.0).abs() > PARTITION_TOL {
                let op = if sum > 1.0 { ">" } else { "<" };
                let bound = if sum > 1.0 { "1+1e-6" } else { "1-1e-6" };
                r.error(
                    &e,
                    format!(
                        "partition fractions sum {} {op} {bound} (family {})",
                        (sum * 1e9).round() / 1e9,
                        fam.name
                    ),
                );
            }
        }
    }

    let mut line_ids = HashSet::new();
    for line in &net.lines {
        let e = format!("line {}", line.id);
        if bad_name(&line.id) {
            r.error(&e, "identifier must be nonempty without whitespace");
        }
        if !line_ids.insert(line.id.as_str()) {
            r.error(&e, "duplicate line id");
        }
        let from = net.bus(&line.from_bus);
        let to = net.bus(&line.to_bus);
        if from.is_none() {
            r.error(&e, format!("dangling bus reference from_bus={}", line.from_bus));
        }
        if to.is_none() {
            r.error(&e, format!("dangling bus reference to_bus={}", line.to_bus));
        }
        if line.from_bus == line.to_bus {
            r.error(&e, "from_bus equals to_bus");
        }
        if !line.susceptance.is_finite() {
            r.error(&e, "susceptance must be finite");
        }
        if !(line.flow_limit > 0.0) || !line.flow_limit.is_finite() {
            r.error(&e, "flow_limit must be finite and > 0");
        }
        if !(line.angle_min < line.angle_max) {
            r.error(&e, "angle_min must be < angle_max");
        }
        if line.length.is_some_and(|l| !(l >= 0.0)) {
            r.error(&e, "length must be >= 0");
        }
        if !(line.underground_cost() >= 0.0) {
            r.error(&e, "underground_cost must be >= 0");
        }
        if line.path.len() < 2 {
            r.error(&e, "path must have at least two vertices");
        } else if let (Some(a), Some(b)) = (from, to) {
            let first = line.path[0];
            let last = line.path[line.path.len() - 1];
            if !close(first, a.location) || !close(last, b.location) {
                r.error(&e, "path endpoints do not match bus locations");
            }
        }
    }

    let mut gen_ids = HashSet::new();
    for g in &net.generators {
        let e = format!("generator {}", g.id);
        if bad_name(&g.id) {
            r.error(&e, "identifier must be nonempty without whitespace");
        }
        if !gen_ids.insert(g.id.as_str()) {
            r.error(&e, "duplicate generator id");
        }
        if net.bus(&g.bus).is_none() {
            r.error(&e, format!("dangling bus reference bus={}", g.bus));
        }
        if !(0.0 <= g.p_min && g.p_min <= g.p_max) {
            r.error(&e, "generator limits must satisfy 0 <= p_min <= p_max");
        }
    }

    for fam in &net.group_families {
        for g in &fam.groups {
            if net.group_families.iter().filter(|f| f.groups.contains(g)).count() > 1 {
                r.error(format!("family {}", fam.name), format!("group {g} in several families"));
            }
        }
    }

    let rebuilt = Incidence::build(&net.buses, &net.lines, &net.generators);
    if &rebuilt != net.incidence() {
        r.error("network", "incidence sets are stale; rebuild indices");
    }

    if !net.buses.is_empty() && !is_connected(net) {
        r.warn("network", "network is disconnected");
    }

    r.0
}

fn is_connected(net: &Network) -> bool {
    let n = net.buses.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for l in &net.lines {
        if let (Some(a), Some(b)) = (net.bus_idx(&l.from_bus), net.bus_idx(&l.to_bus)) {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
    }
    let root = find(&mut parent, 0);
    (0..n).all(|i| find(&mut parent, i) == root)
}

pub fn has_errors(violations: &[Violation]) -> bool {
    violations.iter().any(|v| v.severity == Severity::Error)
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn triangle_is_valid() {
        let net = triangle();
        assert_eq!(validate_network(&net), vec![]);
    }

    #[test]
    fn dangling_to_bus_is_reported() {
        let mut net = triangle();
        net.lines[0].to_bus = "zz".into();
        net.rebuild_indices();
        let v = validate_network(&net);
        assert!(v.iter().any(|v| v.rule.contains("dangling bus reference")), "{v:?}");
        assert!(has_errors(&v));
    }

    #[test]
    fn partition_sum_over_one() {
        let mut net = triangle();
        net.group_families.push(GroupFamily {
            name: "race".into(),
            kind: FamilyKind::Partition,
            groups: vec!["White".into(), "Hispanic".into()],
        });
        net.buses[1].group_fractions.insert("White".into(), 0.7);
        net.buses[1].group_fractions.insert("Hispanic".into(), 0.5);
        let v = validate_network(&net);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].entity, "bus b");
        assert!(
            v[0].rule.starts_with("partition fractions sum 1.2 > 1+1e-6"),
            "{}",
            v[0].rule
        );
    }

    #[test]
    fn overlay_family_is_exempt_from_sum_rule() {
        let mut net = triangle();
        net.group_families.push(GroupFamily {
            name: "health".into(),
            kind: FamilyKind::Overlay,
            groups: vec!["uninsured".into(), "low_income".into()],
        });
        net.buses[1].group_fractions.insert("uninsured".into(), 0.7);
        net.buses[1].group_fractions.insert("low_income".into(), 0.9);
        assert!(validate_network(&net).is_empty());
    }

    #[test]
    fn disconnected_is_a_warning() {
        let mut net = triangle();
        net.lines.retain(|l| l.id == "ab");
        net.rebuild_indices();
        let v = validate_network(&net);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].severity, Severity::Warning);
        assert!(!has_errors(&v));
    }

    #[test]
    fn generator_limits_checked() {
        let mut net = triangle();
        net.generators[0].p_min = 3.0;
        assert!(has_errors(&validate_network(&net)));
    }

    #[test]
    fn incidence_rebuild_is_idempotent() {
        let net = triangle();
        let once = Incidence::build(&net.buses, &net.lines, &net.generators);
        let twice = Incidence::build(&net.buses, &net.lines, &net.generators);
        assert_eq!(once, twice);
        assert_eq!(&once, net.incidence());
        assert_eq!(once.lines_from[0], vec![0]);
        assert_eq!(once.lines_to[0], vec![2]);
        assert_eq!(once.generators[0], vec![0]);
    }

    #[test]
    fn default_cost_is_seven_per_mile() {
        let net = triangle();
        assert_eq!(net.lines[0].underground_cost(), 70.0);
    }

    #[test]
    fn json_round_trip_restores_incidence() {
        let net = triangle();
        let back = Network::from_json_str(&net.to_json_pretty()).unwrap();
        assert_eq!(back, net);
        assert_eq!(back.incidence(), net.incidence());
    }

    #[test]
    fn malformed_json_names_field() {
        let text = r#"{"horizon":{"days":[1],"periods_per_day":1},"buses":[],"lines":[{"id":"x"}],"generators":[]}"#;
        let err = Network::from_json_str(text).unwrap_err().to_string();
        assert!(err.contains("from_bus"), "{err}");
    }
}
