use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::grid::ModelId;
use crate::risk::Thresholds;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    /// Network JSON, or a MATPOWER `.m` case when `supplement` is given.
    pub network: PathBuf,
    /// Horizon, locations and demand profiles for a MATPOWER case.
    #[serde(default)]
    pub supplement: Option<PathBuf>,
    /// Precomputed risk profile JSON; otherwise derived from the raster.
    #[serde(default)]
    pub risk: Option<PathBuf>,
    #[serde(default)]
    pub raster: Option<PathBuf>,
    #[serde(default)]
    pub raster_meta: Option<PathBuf>,
    #[serde(default)]
    pub tracts: Option<PathBuf>,
    /// Vulnerability rules applied to the tracts before assignment.
    #[serde(default)]
    pub rules: Option<PathBuf>,
    #[serde(default)]
    pub inverse_distance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    /// Millions of USD.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Models {
    pub ids: Vec<ModelId>,
}

impl Default for Models {
    fn default() -> Self {
        Models {
            ids: ModelId::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Groups {
    /// Groups entering the equity objective; all network groups when absent.
    #[serde(default)]
    pub equity: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// `microlp`, `oracle`, or a process-backend JSON path.
    #[serde(default)]
    pub backend: Option<String>,
    #[serde(default = "default_gap")]
    pub mip_gap: f64,
    /// Seconds.
    #[serde(default = "default_time_limit")]
    pub time_limit: f64,
    /// Use the enumeration oracle for models under `oracle_cap` free binaries.
    #[serde(default)]
    pub oracle: bool,
    #[serde(default = "default_cap")]
    pub oracle_cap: usize,
}

fn default_gap() -> f64 {
    0.01
}
fn default_time_limit() -> f64 {
    3600.0
}
fn default_cap() -> usize {
    crate::solve::DEFAULT_ORACLE_CAP
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            backend: None,
            mip_gap: default_gap(),
            time_limit: default_time_limit(),
            oracle: false,
            oracle_cap: default_cap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Inputs,
    #[serde(default)]
    pub thresholds: Thresholds,
    pub budgets: Budgets,
    #[serde(default)]
    pub models: Models,
    #[serde(default)]
    pub groups: Groups,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl RunConfig {
    pub fn parse(text: &str, json: bool) -> Result<Self> {
        if json {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
        }
    }

    /// Reads TOML or JSON (by extension) and resolves input paths against
    /// the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let json = path.extension().is_some_and(|e| e == "json");
        let mut cfg = RunConfig::parse(&text, json).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.check()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let i = &mut self.inputs;
        fix(&mut i.network);
        for p in [
            &mut i.supplement,
            &mut i.risk,
            &mut i.raster,
            &mut i.raster_meta,
            &mut i.tracts,
            &mut i.rules,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        if let Some(b) = &mut self.solver.backend {
            if b.ends_with(".json") && Path::new(b).is_relative() {
                *b = base.join(&*b).display().to_string();
            }
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.budgets.values.is_empty() {
            return Err(Error::Config("budgets.values is empty".into()));
        }
        if let Some(b) = self.budgets.values.iter().find(|b| !(**b >= 0.0) || !b.is_finite()) {
            return Err(Error::Config(format!("budget {b} must be finite and >= 0")));
        }
        if self.models.ids.is_empty() {
            return Err(Error::Config("models.ids is empty".into()));
        }
        if self.inputs.risk.is_none() && (self.inputs.raster.is_none() || self.inputs.raster_meta.is_none()) {
            return Err(Error::Config("inputs need either risk or raster + raster_meta".into()));
        }
        if !(self.solver.mip_gap >= 0.0) || !(self.solver.time_limit > 0.0) {
            return Err(Error::Config("solver needs mip_gap >= 0 and time_limit > 0".into()));
        }
        if self.thresholds.r_low >= self.thresholds.r_high {
            return Err(Error::Config("thresholds need r_low < r_high".into()));
        }
        Ok(())
    }

    /// Ascending, de-duplicated budgets.
    pub fn sorted_budgets(&self) -> Vec<f64> {
        let mut b = self.budgets.values.clone();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }
}
