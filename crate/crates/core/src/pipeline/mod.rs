//! Scenario runs: inputs to reports, with warm-start chaining across budgets.

pub mod cache;
mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{compute_group_metrics, postprocess_equity, write_report, ReportEntry};
use crate::demographics::{attribute, flag_vulnerability, read_rules, read_tracts_csv, AssignOptions, Attribution};
use crate::grid::matpower::{MatpowerCase, Supplement};
use crate::grid::{has_errors, validate_network, Horizon, ModelId, Network, ScenarioSpec};
use crate::model::{build_scenario, BaselineReference, BuildContext, MilpModel};
use crate::risk::{PixelGrid, RiskProfile, Thresholds};
use crate::solve::{
    backend_by_name, backend_from_env, mps::write_mps, solve_model, Backend, MicrolpBackend, OracleBackend, Solution,
    SolveRequest, SolveStatus, BACKEND_ENV,
};
use crate::{Error, Result};

pub use config::{Budgets, Groups, Inputs, Models, RunConfig, SolverConfig};

/// Supplement file for a MATPOWER case: the horizon plus [`Supplement`] fields.
#[derive(Debug, Clone, Deserialize)]
pub struct CaseSupplement {
    pub horizon: Horizon,
    #[serde(flatten)]
    pub data: Supplement,
}

/// Reads a network JSON, or a MATPOWER case when a supplement is given.
pub fn load_network(path: &Path, supplement: Option<&Path>) -> Result<Network> {
    let Some(sup) = supplement else {
        return Network::from_json_file(path);
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let case = MatpowerCase::parse(&text).map_err(|e| match e {
        Error::Parse { line, message, .. } => Error::Parse {
            context: path.display().to_string(),
            line,
            message,
        },
        e => e,
    })?;
    let stext = std::fs::read_to_string(sup).map_err(|e| Error::io(sup, e))?;
    let s: CaseSupplement = serde_json::from_str(&stext).map_err(|e| Error::json(sup.display().to_string(), e))?;
    case.into_network(s.horizon, &s.data)
}

/// Network validation as an error listing every error-severity violation.
pub fn check_network(net: &Network) -> Result<()> {
    let v = validate_network(net);
    if has_errors(&v) {
        let msgs: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        return Err(Error::Invalid(format!(
            "network failed validation:\n  {}",
            msgs.join("\n  ")
        )));
    }
    Ok(())
}

/// Flags tracts with the rules (if any) and attributes them to load buses.
pub fn assign_demographics(
    net: &Network,
    tracts_csv: &Path,
    rules: Option<&Path>,
    opts: AssignOptions,
) -> Result<Attribution> {
    let f = std::fs::File::open(tracts_csv).map_err(|e| Error::io(tracts_csv, e))?;
    let mut tracts = read_tracts_csv(f, &tracts_csv.display().to_string())?;
    if let Some(r) = rules {
        for (index, rule) in read_rules(r)? {
            flag_vulnerability(&mut tracts, &index, &rule)?;
        }
    }
    attribute(net, &tracts, opts)
}

/// Risk profile from the raster, reusing `out` when its stamp matches.
pub fn risk_stage(
    net: &Network,
    raster: &Path,
    meta: &Path,
    thresholds: Thresholds,
    out: &Path,
) -> Result<RiskProfile> {
    let key = cache::hash_parts(&[
        net.to_json_pretty().as_bytes(),
        cache::hash_file(raster)?.as_bytes(),
        cache::hash_file(meta)?.as_bytes(),
        serde_json::to_string(&thresholds)
            .expect("thresholds serialize")
            .as_bytes(),
    ]);
    if cache::is_fresh(out, &key) {
        log::info!("risk: {} is up to date", out.display());
        return RiskProfile::from_json_file(out);
    }
    let grid = PixelGrid::from_files(raster, meta)?;
    let profile = RiskProfile::from_raster(net, &grid, thresholds)?;
    write(out, profile.to_json_pretty().as_bytes())?;
    cache::record(out, &key)?;
    Ok(profile)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Backend choice for one model: the oracle when forced and the model is
/// small enough, otherwise `fallback`.
pub fn pick_backend<'a>(
    model: &MilpModel,
    fallback: &'a dyn Backend,
    oracle: Option<&'a OracleBackend>,
) -> &'a dyn Backend {
    match oracle {
        Some(o) if model.free_binaries().len() <= o.cap => o,
        _ => fallback,
    }
}

/// Configured backend; the environment variable wins over the config.
pub fn configured_backend(solver: &SolverConfig) -> Result<Box<dyn Backend>> {
    if std::env::var(BACKEND_ENV).is_ok_and(|v| !v.trim().is_empty()) {
        return backend_from_env();
    }
    match &solver.backend {
        Some(b) => backend_by_name(b),
        None => Ok(Box::new(MicrolpBackend)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub scenario: String,
    pub model: ModelId,
    pub budget: f64,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub backend: String,
    /// sha256 of the model JSON.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mps_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warm_start_from: Option<String>,
    /// Solution reused from an earlier run with identical inputs.
    pub cached: bool,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Passed,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityCheck {
    pub status: CheckStatus,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: PathBuf,
    pub config_sha256: String,
    pub backend: String,
    pub scenarios: Vec<ScenarioRecord>,
    /// Objective non-increasing in budget, per model.
    pub monotonicity: BTreeMap<ModelId, MonotonicityCheck>,
}

impl Manifest {
    pub fn any_error(&self) -> bool {
        self.scenarios.iter().any(|s| s.status == SolveStatus::Error)
    }

    pub fn count(&self, status: SolveStatus) -> usize {
        self.scenarios.iter().filter(|s| s.status == status).count()
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub jobs: Option<usize>,
    /// Force the oracle for models under the cap.
    pub oracle: bool,
}

/// Tolerance for the budget-chain monotonicity check.
pub const MONOTONE_TOL: f64 = 1e-6;

/// Gap below which a solve counts as proven optimal for the chain check.
const PROVEN_GAP: f64 = 1e-9;

pub fn check_monotone(chain: &[(f64, &ScenarioRecord)]) -> MonotonicityCheck {
    if chain.len() < 2 {
        return MonotonicityCheck {
            status: CheckStatus::Skipped,
            note: "fewer than two budgets".into(),
        };
    }
    let gapped: Vec<&str> = chain
        .iter()
        .filter(|(_, r)| r.status != SolveStatus::Optimal || r.gap.is_none_or(|g| g > PROVEN_GAP))
        .map(|(_, r)| r.scenario.as_str())
        .collect();
    if !gapped.is_empty() {
        return MonotonicityCheck {
            status: CheckStatus::Skipped,
            note: format!("not proven optimal: {}", gapped.join(", ")),
        };
    }
    for w in chain.windows(2) {
        let (a, b) = (
            w[0].1.objective.unwrap_or(f64::NAN),
            w[1].1.objective.unwrap_or(f64::NAN),
        );
        if !(b <= a + MONOTONE_TOL) {
            return MonotonicityCheck {
                status: CheckStatus::Failed,
                note: format!("{} = {b} exceeds {} = {a}", w[1].1.scenario, w[0].1.scenario),
            };
        }
    }
    MonotonicityCheck {
        status: CheckStatus::Passed,
        note: format!("{} budgets", chain.len()),
    }
}

struct Shared<'a> {
    net: &'a Network,
    risk: &'a RiskProfile,
    cfg: &'a RunConfig,
    backend: &'a dyn Backend,
    oracle: Option<OracleBackend>,
    out: &'a Path,
}

struct Outcome {
    record: ScenarioRecord,
    solution: Option<Solution>,
    report: ReportEntry,
}

fn error_outcome(spec: &ScenarioSpec, backend: &str, e: Error) -> Outcome {
    let label = spec.label();
    log::error!("{label}: {e}");
    Outcome {
        record: ScenarioRecord {
            scenario: label.clone(),
            model: spec.model_id,
            budget: spec.budget,
            status: SolveStatus::Error,
            objective: None,
            gap: None,
            message: Some(e.to_string()),
            backend: backend.into(),
            model_sha256: None,
            mps_sha256: None,
            warm_start_from: None,
            cached: false,
            elapsed_s: 0.0,
        },
        solution: None,
        report: ReportEntry {
            scenario: label,
            model: spec.model_id.to_string(),
            budget: spec.budget,
            status: SolveStatus::Error,
            objective: None,
            gap: None,
            metrics: None,
        },
    }
}

fn run_scenario(
    sh: &Shared<'_>,
    model_id: ModelId,
    budget: f64,
    baseline: Option<&BaselineReference>,
    warm: Option<(&str, &Solution)>,
) -> Outcome {
    let mut spec = ScenarioSpec::new(model_id, budget);
    spec.mip_gap = sh.cfg.solver.mip_gap;
    spec.time_limit = sh.cfg.solver.time_limit;
    let ctx = BuildContext {
        baseline: baseline.cloned(),
        equity_groups: sh.cfg.groups.equity.clone(),
    };
    let model = match build_scenario(sh.net, sh.risk, &spec, &ctx) {
        Ok(m) => m,
        Err(e) => return error_outcome(&spec, &sh.backend.name(), e),
    };
    match solve_scenario(sh, &spec, &model, warm) {
        Ok(o) => o,
        Err(e) => error_outcome(&spec, &sh.backend.name(), e),
    }
}

fn solve_scenario(
    sh: &Shared<'_>,
    spec: &ScenarioSpec,
    model: &MilpModel,
    warm: Option<(&str, &Solution)>,
) -> Result<Outcome> {
    let label = spec.label();
    let model_json = model.to_json();
    let mps = write_mps(model)?;
    let model_path = sh.out.join("models").join(format!("{label}.json"));
    write(&model_path, model_json.as_bytes())?;
    write(&sh.out.join("models").join(format!("{label}.mps")), mps.as_bytes())?;
    let model_sha = cache::sha256_hex(model_json.as_bytes());

    let backend = pick_backend(model, sh.backend, sh.oracle.as_ref());
    let sol_path = sh.out.join("solutions").join(format!("{label}.json"));
    let key = cache::hash_parts(&[
        model_sha.as_bytes(),
        backend.name().as_bytes(),
        &spec.mip_gap.to_le_bytes(),
        &spec.time_limit.to_le_bytes(),
    ]);
    let cached = cache::is_fresh(&sol_path, &key);
    let warm_start_from = warm.map(|w| w.0.to_owned());
    let sol = if cached {
        log::info!("{label}: reusing {}", sol_path.display());
        let text = std::fs::read_to_string(&sol_path).map_err(|e| Error::io(&sol_path, e))?;
        Solution::from_json_str(&text)?
    } else {
        let started = Instant::now();
        let mut req = SolveRequest::new(model);
        req.mip_gap = spec.mip_gap;
        req.time_limit = spec.time_limit;
        req.warm_start = warm.map(|w| &w.1.values);
        let mut sol = solve_model(backend, &req);
        sol.scenario = label.clone();
        log::info!(
            "{label}: {} objective={:?} gap={:?} ({:.2}s)",
            sol.status,
            sol.objective,
            sol.gap,
            started.elapsed().as_secs_f64()
        );
        write(&sol_path, sol.to_json_pretty().as_bytes())?;
        cache::record(&sol_path, &key)?;
        sol
    };

    let mut reported = sol.clone();
    let mut message = sol.message.clone();
    if spec.model_id.is_equity() && sol.status.has_solution() {
        match postprocess_equity(model, sh.net, &sol) {
            Ok(p) => {
                let post = sh.out.join("solutions").join(format!("{label}.post.json"));
                write(&post, p.solution.to_json_pretty().as_bytes())?;
                reported = p.solution;
            }
            Err(e) => {
                log::warn!("{label}: post-processing failed: {e}");
                message = Some(format!("post-processing failed: {e}"));
            }
        }
    }
    let metrics = reported
        .status
        .has_solution()
        .then(|| compute_group_metrics(sh.net, sh.risk, &reported));
    Ok(Outcome {
        record: ScenarioRecord {
            scenario: label.clone(),
            model: spec.model_id,
            budget: spec.budget,
            status: sol.status,
            objective: sol.objective,
            gap: sol.gap,
            message,
            backend: sol.backend.clone(),
            model_sha256: Some(model_sha),
            mps_sha256: Some(cache::sha256_hex(mps.as_bytes())),
            warm_start_from,
            cached,
            elapsed_s: sol.elapsed_s,
        },
        report: ReportEntry {
            scenario: label,
            model: spec.model_id.to_string(),
            budget: spec.budget,
            status: sol.status,
            objective: sol.objective,
            gap: sol.gap,
            metrics,
        },
        solution: Some(sol),
    })
}

/// Loads inputs named by the config: network (validated), demographics, risk.
pub fn prepare(cfg: &RunConfig, out: &Path) -> Result<(Network, RiskProfile)> {
    let i = &cfg.inputs;
    let mut net = load_network(&i.network, i.supplement.as_deref())?;
    check_network(&net)?;
    if let Some(tracts) = &i.tracts {
        let opts = AssignOptions {
            inverse_distance: i.inverse_distance,
        };
        let a = assign_demographics(&net, tracts, i.rules.as_deref(), opts)?;
        if !a.zero_population_buses.is_empty() {
            log::warn!(
                "load buses with zero population: {}",
                a.zero_population_buses.join(", ")
            );
        }
        write(
            &out.join("assignment.json"),
            serde_json::to_string_pretty(&a.assignment)
                .expect("assignment serializes")
                .as_bytes(),
        )?;
        net = a.network;
    }
    write(&out.join("network.json"), net.to_json_pretty().as_bytes())?;
    let risk = match (&i.risk, &i.raster, &i.raster_meta) {
        (Some(r), _, _) => RiskProfile::from_json_file(r)?,
        (None, Some(raster), Some(meta)) => risk_stage(&net, raster, meta, cfg.thresholds, &out.join("risk.json"))?,
        _ => return Err(Error::Config("inputs need either risk or raster + raster_meta".into())),
    };
    Ok((net, risk))
}

/// Runs the whole scenario matrix. Scenario failures are recorded in the
/// manifest; only input and I/O problems return `Err`.
pub fn run(config_path: &Path, opts: &RunOptions) -> Result<Manifest> {
    let cfg = RunConfig::load(config_path)?;
    let out = opts.out_dir.as_path();
    let _lock = cache::DirLock::acquire(out)?;
    let (net, risk) = prepare(&cfg, out)?;
    let backend = configured_backend(&cfg.solver)?;
    let oracle = (opts.oracle || cfg.solver.oracle).then_some(OracleBackend {
        cap: cfg.solver.oracle_cap,
    });
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let sh = Shared {
        net: &net,
        risk: &risk,
        cfg: &cfg,
        backend: backend.as_ref(),
        oracle,
        out,
    };

    let mut ids = cfg.models.ids.clone();
    ids.sort();
    ids.dedup();
    let wants_baseline = ids.iter().any(|m| m.needs_baseline());
    let mut outcomes: Vec<Outcome> = Vec::new();
    let mut baseline = None;
    if ids.contains(&ModelId::BlM0) || wants_baseline {
        let o = run_scenario(&sh, ModelId::BlM0, 0.0, None, None);
        if let Some(s) = o.solution.as_ref().filter(|s| s.status.has_solution()) {
            baseline = Some(BaselineReference::from_values(&net, &s.values));
        } else if wants_baseline {
            log::warn!(
                "baseline BL-M0 ended {}; load-shed policy models cannot be built",
                o.record.status
            );
        }
        outcomes.push(o);
    }

    let chained: Vec<ModelId> = ids.iter().copied().filter(|m| *m != ModelId::BlM0).collect();
    let mut previous: BTreeMap<ModelId, (String, Solution)> = BTreeMap::new();
    for budget in cfg.sorted_budgets() {
        let batch: Vec<Outcome> = pool.install(|| {
            chained
                .par_iter()
                .map(|&m| {
                    let warm = previous.get(&m).map(|(l, s)| (l.as_str(), s));
                    run_scenario(&sh, m, budget, baseline.as_ref(), warm)
                })
                .collect()
        });
        for o in batch {
            if let Some(s) = o.solution.as_ref().filter(|s| s.status.has_solution()) {
                previous.insert(o.record.model, (o.record.scenario.clone(), s.clone()));
            }
            outcomes.push(o);
        }
    }

    let mut monotonicity = BTreeMap::new();
    for &m in &chained {
        let chain: Vec<(f64, &ScenarioRecord)> = outcomes
            .iter()
            .filter(|o| o.record.model == m)
            .map(|o| (o.record.budget, &o.record))
            .collect();
        let check = check_monotone(&chain);
        if check.status == CheckStatus::Failed {
            log::warn!("{m}: objective increases with budget: {}", check.note);
        }
        monotonicity.insert(m, check);
    }

    let entries: Vec<ReportEntry> = outcomes.iter().map(|o| o.report.clone()).collect();
    write_report(out, &entries)?;
    let cfg_bytes = std::fs::read(config_path).map_err(|e| Error::io(config_path, e))?;
    let manifest = Manifest {
        config: config_path.to_path_buf(),
        config_sha256: cache::sha256_hex(&cfg_bytes),
        backend: backend.name(),
        scenarios: outcomes.into_iter().map(|o| o.record).collect(),
        monotonicity,
    };
    write(
        &out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)
            .expect("manifest serializes")
            .as_bytes(),
    )?;
    Ok(manifest)
}
