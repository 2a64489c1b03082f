//! Census tract attribution to load buses and vulnerability flagging.
//!
//! Tracts are mapped to buses with a three-pass radius rule, bus feature
//! vectors are weighted sums of tract features, and group fractions follow by
//! dividing by bus population.

mod io;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geo::{haversine_km, LatLon};
use crate::grid::Network;
use crate::{Error, Result};

pub use io::{read_rules, read_tracts_csv, PERCENTILE_PREFIX};

/// Name of the population feature.
pub const POPULATION: &str = "population";
/// Distances are floored at one metre.
pub const MIN_DISTANCE_KM: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractRecord {
    pub gidtr: String,
    pub center: LatLon,
    /// Population total and per-group counts.
    pub features: BTreeMap<String, f64>,
    /// Indicator percentiles in `[0, 100]`.
    #[serde(default)]
    pub percentiles: BTreeMap<String, f64>,
    #[serde(default)]
    pub vuln_flags: BTreeMap<String, bool>,
}

impl TractRecord {
    pub fn population(&self) -> f64 {
        self.features.get(POPULATION).copied().unwrap_or(0.0)
    }

    pub fn check(&self) -> Result<()> {
        let pop = self.population();
        if !(pop >= 0.0) {
            return Err(Error::Invalid(format!("tract {}: negative population", self.gidtr)));
        }
        for (k, v) in &self.features {
            if k != POPULATION && !(*v >= 0.0 && *v <= pop + 1e-9) {
                return Err(Error::Invalid(format!(
                    "tract {}: count {k}={v} outside [0, population {pop}]",
                    self.gidtr
                )));
            }
        }
        for (k, v) in &self.percentiles {
            if !(0.0..=100.0).contains(v) {
                return Err(Error::Invalid(format!(
                    "tract {}: percentile {k}={v} outside [0, 100]",
                    self.gidtr
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignOptions {
    /// Weight buses by inverse distance instead of distance.
    #[serde(default)]
    pub inverse_distance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentMatrix {
    pub tracts: Vec<String>,
    pub buses: Vec<String>,
    /// Sparse `(tract index, bus index) -> a_cn`.
    #[serde(with = "sparse_entries")]
    pub weights: BTreeMap<(usize, usize), f64>,
    /// Final radius per tract in km.
    pub tract_radius: Vec<f64>,
    /// Tracts that reached no bus.
    pub unassigned_tracts: Vec<String>,
}

impl AssignmentMatrix {
    pub fn tract_weights(&self, tract: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights
            .range((tract, 0)..(tract + 1, 0))
            .map(|(&(_, b), &w)| (b, w))
    }

    pub fn buses_covered(&self) -> BTreeSet<usize> {
        self.weights.keys().map(|&(_, b)| b).collect()
    }
}

mod sparse_entries {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<(usize, usize), f64>, s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<(usize, usize, f64)> = m.iter().map(|(&(c, n), &w)| (c, n, w)).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(usize, usize), f64>, D::Error> {
        let v = Vec::<(usize, usize, f64)>::deserialize(d)?;
        Ok(v.into_iter().map(|(c, n, w)| ((c, n), w)).collect())
    }
}

fn distance(c: LatLon, b: LatLon) -> f64 {
    haversine_km(c, b).max(MIN_DISTANCE_KM)
}

/// Three-pass tract-to-bus assignment.
///
/// 1. Each tract's radius starts at its distance to the nearest bus; buses
///    inside any radius are assigned.
/// 2. Each still-unassigned bus grows the radius of its nearest tract to
///    reach it.
/// 3. Each tract spreads over the buses inside its radius with
///    `a_cn = d_cn / sum_i d_ci` (or inverse-distance weights when enabled).
pub fn assign_tracts(
    tracts: &[TractRecord],
    buses: &[(String, LatLon)],
    opts: AssignOptions,
) -> Result<AssignmentMatrix> {
    if tracts.is_empty() || buses.is_empty() {
        return Err(Error::Invalid(
            "assignment needs at least one tract and one load bus".into(),
        ));
    }
    let dist: Vec<Vec<f64>> = tracts
        .iter()
        .map(|t| buses.iter().map(|(_, loc)| distance(t.center, *loc)).collect())
        .collect();

    let mut radius: Vec<f64> = dist
        .iter()
        .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    let mut assigned = vec![false; buses.len()];
    for (c, row) in dist.iter().enumerate() {
        for (n, d) in row.iter().enumerate() {
            if *d <= radius[c] {
                assigned[n] = true;
            }
        }
    }

    for n in 0..buses.len() {
        if assigned[n] {
            continue;
        }
        let (c, r_n) = dist
            .iter()
            .enumerate()
            .map(|(c, row)| (c, row[n]))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        radius[c] = radius[c].max(r_n);
        assigned[n] = true;
    }

    let per_tract: Vec<Vec<(usize, f64)>> = dist
        .par_iter()
        .zip(radius.par_iter())
        .map(|(row, &r)| {
            let inside: Vec<(usize, f64)> = row
                .iter()
                .enumerate()
                .filter(|(_, d)| **d <= r)
                .map(|(n, d)| (n, if opts.inverse_distance { 1.0 / d } else { *d }))
                .collect();
            let total: f64 = inside.iter().map(|x| x.1).sum();
            inside.into_iter().map(|(n, w)| (n, w / total)).collect()
        })
        .collect();

    let mut weights = BTreeMap::new();
    let mut unassigned_tracts = Vec::new();
    for (c, row) in per_tract.into_iter().enumerate() {
        if row.is_empty() {
            unassigned_tracts.push(tracts[c].gidtr.clone());
        }
        for (n, w) in row {
            weights.insert((c, n), w);
        }
    }
    Ok(AssignmentMatrix {
        tracts: tracts.iter().map(|t| t.gidtr.clone()).collect(),
        buses: buses.iter().map(|b| b.0.clone()).collect(),
        weights,
        tract_radius: radius,
        unassigned_tracts,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BusFeatures {
    pub features: BTreeMap<String, f64>,
    /// Population living in tracts flagged by each index.
    pub vulnerable_population: BTreeMap<String, f64>,
}

impl BusFeatures {
    pub fn population(&self) -> f64 {
        self.features.get(POPULATION).copied().unwrap_or(0.0)
    }
}

/// `f_n = sum_c f_c * a_cn`, one entry per bus of the assignment.
pub fn bus_features(tracts: &[TractRecord], assignment: &AssignmentMatrix) -> Vec<BusFeatures> {
    let mut out = vec![BusFeatures::default(); assignment.buses.len()];
    for (&(c, n), &a) in &assignment.weights {
        let tract = &tracts[c];
        let bus = &mut out[n];
        for (k, v) in &tract.features {
            *bus.features.entry(k.clone()).or_insert(0.0) += v * a;
        }
        for (index, flagged) in &tract.vuln_flags {
            let add = if *flagged { tract.population() * a } else { 0.0 };
            *bus.vulnerable_population.entry(index.clone()).or_insert(0.0) += add;
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BusFractions {
    pub population: f64,
    pub group_fractions: BTreeMap<String, f64>,
    pub vuln_fraction: BTreeMap<String, f64>,
}

/// Group and vulnerability fractions per bus; the second value lists buses
/// with zero population, whose fractions are all zero.
pub fn group_fractions(features: &[BusFeatures], bus_ids: &[String]) -> (Vec<BusFractions>, Vec<String>) {
    let mut zero = Vec::new();
    let fr = features
        .iter()
        .zip(bus_ids)
        .map(|(f, id)| {
            let pop = f.population();
            if !(pop > 0.0) {
                zero.push(id.clone());
                return BusFractions {
                    population: 0.0,
                    group_fractions: f
                        .features
                        .keys()
                        .filter(|k| *k != POPULATION)
                        .map(|k| (k.clone(), 0.0))
                        .collect(),
                    vuln_fraction: f.vulnerable_population.keys().map(|k| (k.clone(), 0.0)).collect(),
                };
            }
            BusFractions {
                population: pop,
                group_fractions: f
                    .features
                    .iter()
                    .filter(|(k, _)| *k != POPULATION)
                    .map(|(k, v)| (k.clone(), (v / pop).clamp(0.0, 1.0)))
                    .collect(),
                vuln_fraction: f
                    .vulnerable_population
                    .iter()
                    .map(|(k, v)| (k.clone(), (v / pop).clamp(0.0, 1.0)))
                    .collect(),
            }
        })
        .collect();
    (fr, zero)
}

/// One `(indicator, min_percentile)` condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub indicator: String,
    pub min_percentile: f64,
}

/// Disjunction of conjunctions: a tract is flagged if any clause has all of
/// its conditions met (`percentile >= min_percentile`).
pub type VulnerabilityRule = Vec<Vec<Condition>>;

pub fn flag_vulnerability(tracts: &mut [TractRecord], index: &str, rule: &VulnerabilityRule) -> Result<()> {
    for clause in rule {
        if clause.is_empty() {
            return Err(Error::Config(format!("rule {index}: empty clause")));
        }
    }
    for t in tracts.iter() {
        for cond in rule.iter().flatten() {
            if !t.percentiles.contains_key(&cond.indicator) {
                return Err(Error::Config(format!(
                    "rule {index}: tract {} has no indicator {:?}",
                    t.gidtr, cond.indicator
                )));
            }
        }
    }
    for t in tracts.iter_mut() {
        let flagged = rule
            .iter()
            .any(|clause| clause.iter().all(|c| t.percentiles[&c.indicator] >= c.min_percentile));
        t.vuln_flags.insert(index.to_owned(), flagged);
    }
    Ok(())
}

/// Result of attaching tract demographics to a network.
#[derive(Debug, Clone)]
pub struct Attribution {
    pub network: Network,
    pub assignment: AssignmentMatrix,
    pub zero_population_buses: Vec<String>,
}

/// Assigns tracts to the network's load buses and writes population, group
/// and vulnerability fractions onto those buses. Buses without load keep
/// empty demographics.
pub fn attribute(net: &Network, tracts: &[TractRecord], opts: AssignOptions) -> Result<Attribution> {
    for t in tracts {
        t.check()?;
    }
    let load: Vec<(String, LatLon)> = net.load_buses().map(|b| (b.id.clone(), b.location)).collect();
    let assignment = assign_tracts(tracts, &load, opts)?;
    let feats = bus_features(tracts, &assignment);
    let (fracs, zero) = group_fractions(&feats, &assignment.buses);
    let mut network = net.clone();
    for (id, f) in assignment.buses.iter().zip(fracs) {
        let idx = network.bus_idx(id).expect("load bus exists");
        let bus = &mut network.buses[idx];
        bus.population = f.population;
        bus.group_fractions = f.group_fractions;
        bus.vuln_fraction = f.vuln_fraction;
    }
    Ok(Attribution {
        network,
        assignment,
        zero_population_buses: zero,
    })
}
