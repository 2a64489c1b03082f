//! MATPOWER case-file converter for the electrical part of a network.
//!
//! Only bus, generator and branch tables are read. Demand profiles and
//! geometry come from a [`Supplement`]; without one, every period uses the
//! case's static `PD` and buses sit at the origin.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Bus, Generator, Horizon, Line, Network};
use crate::geo::LatLon;
use crate::{Error, Result};

const BUS_I: usize = 0;
const PD: usize = 2;
const GEN_BUS: usize = 0;
const GEN_STATUS: usize = 7;
const PMAX: usize = 8;
const PMIN: usize = 9;
const F_BUS: usize = 0;
const T_BUS: usize = 1;
const BR_X: usize = 3;
const RATE_A: usize = 5;
const TAP: usize = 8;
const BR_STATUS: usize = 10;
const ANGMIN: usize = 11;
const ANGMAX: usize = 12;

/// Default angle-difference limit applied when a case leaves limits open.
pub const DEFAULT_ANGLE_LIMIT_DEG: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MatpowerCase {
    pub base_mva: f64,
    pub bus: Vec<Vec<f64>>,
    pub gen: Vec<Vec<f64>>,
    pub branch: Vec<Vec<f64>>,
}

/// Data a MATPOWER case does not carry.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Supplement {
    #[serde(default)]
    pub locations: BTreeMap<String, LatLon>,
    /// Per-bus demand `[day][period]` in p.u., overriding the static load.
    #[serde(default)]
    pub demand: BTreeMap<String, Vec<Vec<f64>>>,
    #[serde(default)]
    pub line_paths: BTreeMap<String, Vec<LatLon>>,
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

impl MatpowerCase {
    pub fn parse(text: &str) -> Result<Self> {
        let cleaned: String = text.lines().map(strip_comment).collect::<Vec<_>>().join("\n");
        let base_mva = scalar(&cleaned, "mpc.baseMVA")?;
        Ok(MatpowerCase {
            base_mva,
            bus: matrix(&cleaned, "mpc.bus")?,
            gen: matrix(&cleaned, "mpc.gen")?,
            branch: matrix(&cleaned, "mpc.branch")?,
        })
    }

    /// Converts the case into a [`Network`] over `horizon`.
    pub fn into_network(&self, mut horizon: Horizon, sup: &Supplement) -> Result<Network> {
        let base = self.base_mva;
        if !(base > 0.0) {
            return Err(Error::Invalid("baseMVA must be > 0".into()));
        }
        horizon.base_power = base;
        let name = |v: f64| format!("{}", v as i64);

        let mut buses = Vec::with_capacity(self.bus.len());
        for row in &self.bus {
            let id = name(col(row, BUS_I, "bus")?);
            let pd = col(row, PD, "bus")? / base;
            let demand = match sup.demand.get(&id) {
                Some(d) => d.clone(),
                None => vec![vec![pd.max(0.0); horizon.periods_per_day]; horizon.days.len()],
            };
            let location = match sup.locations.get(&id) {
                Some(p) => *p,
                None => {
                    log::warn!("bus {id} has no location; using (0, 0)");
                    LatLon::new(0.0, 0.0)
                }
            };
            buses.push(Bus {
                id,
                demand,
                population: 0.0,
                group_fractions: BTreeMap::new(),
                vuln_fraction: BTreeMap::new(),
                location,
            });
        }

        let mut generators = Vec::new();
        for (k, row) in self.gen.iter().enumerate() {
            if row.get(GEN_STATUS).copied().unwrap_or(1.0) <= 0.0 {
                continue;
            }
            generators.push(Generator {
                id: format!("g{}", k + 1),
                bus: name(col(row, GEN_BUS, "gen")?),
                p_min: (col(row, PMIN, "gen")? / base).max(0.0),
                p_max: col(row, PMAX, "gen")? / base,
            });
        }

        // A flow cannot exceed total injections, so this bound never binds.
        let peak_load: f64 = buses
            .iter()
            .map(|b| b.demand.iter().flatten().copied().fold(0.0, f64::max))
            .sum();
        let open_limit = generators.iter().map(|g| g.p_max).sum::<f64>() + peak_load;

        let mut lines = Vec::new();
        for (k, row) in self.branch.iter().enumerate() {
            if row.get(BR_STATUS).copied().unwrap_or(1.0) <= 0.0 {
                continue;
            }
            let x = col(row, BR_X, "branch")?;
            let tap = row.get(TAP).copied().filter(|t| *t != 0.0).unwrap_or(1.0);
            if x == 0.0 {
                return Err(Error::Invalid(format!("branch {} has zero reactance", k + 1)));
            }
            let rate = row.get(RATE_A).copied().unwrap_or(0.0);
            let (amin, amax) = angle_limits(row.get(ANGMIN).copied(), row.get(ANGMAX).copied());
            let id = format!("l{}", k + 1);
            lines.push(Line {
                path: sup.line_paths.get(&id).cloned().unwrap_or_default(),
                id,
                from_bus: name(col(row, F_BUS, "branch")?),
                to_bus: name(col(row, T_BUS, "branch")?),
                susceptance: -1.0 / (x * tap),
                flow_limit: if rate > 0.0 { rate / base } else { open_limit },
                angle_min: amin.to_radians(),
                angle_max: amax.to_radians(),
                length: None,
                underground_cost: None,
            });
        }

        Ok(Network::new(horizon, buses, lines, generators, Vec::new()))
    }
}

fn angle_limits(min: Option<f64>, max: Option<f64>) -> (f64, f64) {
    let lim = DEFAULT_ANGLE_LIMIT_DEG;
    let min = min.unwrap_or(0.0);
    let max = max.unwrap_or(0.0);
    if min == 0.0 && max == 0.0 {
        return (-lim, lim);
    }
    let min = if min <= -90.0 { -lim } else { min };
    let max = if max >= 90.0 { lim } else { max };
    (min, max)
}

fn col(row: &[f64], i: usize, table: &str) -> Result<f64> {
    row.get(i)
        .copied()
        .ok_or_else(|| Error::Invalid(format!("{table} row has {} columns, need > {i}", row.len())))
}

fn scalar(text: &str, key: &str) -> Result<f64> {
    let start = text.find(key).ok_or_else(|| Error::Invalid(format!("missing {key}")))?;
    let rest = &text[start + key.len()..];
    let eq = rest
        .find('=')
        .ok_or_else(|| Error::Invalid(format!("malformed {key}")))?;
    let end = rest.find(';').unwrap_or(rest.len());
    rest[eq + 1..end]
        .trim()
        .parse()
        .map_err(|_| Error::Invalid(format!("malformed {key}")))
}

fn matrix(text: &str, key: &str) -> Result<Vec<Vec<f64>>> {
    let needle = format!("{key} ");
    let start = text
        .find(&needle)
        .or_else(|| text.find(&format!("{key}=")))
        .ok_or_else(|| Error::Invalid(format!("missing {key}")))?;
    let rest = &text[start..];
    let open = rest
        .find('[')
        .ok_or_else(|| Error::Invalid(format!("malformed {key}")))?;
    let close = rest
        .find(']')
        .ok_or_else(|| Error::Invalid(format!("unterminated {key}")))?;
    let body = &rest[open + 1..close];
    let mut rows = Vec::new();
    for chunk in body.split([';', '\n']) {
        let vals: Vec<&str> = chunk
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        if vals.is_empty() {
            continue;
        }
        let row = vals
            .iter()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| Error::Invalid(format!("{key}: bad number {v:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}
