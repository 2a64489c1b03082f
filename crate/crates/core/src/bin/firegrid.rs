use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use firegrid::analysis::{compute_group_metrics, postprocess_equity, write_report, ReportEntry};
use firegrid::demographics::AssignOptions;
use firegrid::grid::{validate_network, ModelId, Network, ScenarioSpec, Severity};
use firegrid::model::{build_scenario, BaselineReference, BuildContext, MilpModel};
use firegrid::pipeline::{self, cache, RunOptions, SolverConfig};
use firegrid::risk::{RiskProfile, Thresholds, DEFAULT_R_HIGH, DEFAULT_R_LOW, DEFAULT_R_PSPS};
use firegrid::solve::mps::{parse_mps, write_mps};
use firegrid::solve::{solve_model, MicrolpBackend, OracleBackend, Solution, SolveRequest, DEFAULT_ORACLE_CAP};

/// Wildfire shutoff and undergrounding planning with equity constraints.
#[derive(Parser)]
#[command(name = "firegrid", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct NetworkArgs {
    /// Network JSON, or a MATPOWER case with --supplement.
    #[arg(long)]
    network: PathBuf,
    /// Horizon, locations and demand for a MATPOWER case.
    #[arg(long)]
    supplement: Option<PathBuf>,
}

impl NetworkArgs {
    fn load(&self) -> Result<Network> {
        Ok(pipeline::load_network(&self.network, self.supplement.as_deref())?)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a network for structural errors.
    Validate {
        #[command(flatten)]
        net: NetworkArgs,
    },
    /// Line/day risk and categories from a fire-potential raster.
    Risk {
        #[command(flatten)]
        net: NetworkArgs,
        #[arg(long)]
        raster: PathBuf,
        #[arg(long)]
        raster_meta: PathBuf,
        #[arg(long, default_value_t = DEFAULT_R_PSPS)]
        r_psps: f64,
        #[arg(long, default_value_t = DEFAULT_R_HIGH)]
        r_high: f64,
        #[arg(long, default_value_t = DEFAULT_R_LOW)]
        r_low: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Attribute census tracts to load buses; writes the updated network.
    Assign {
        #[command(flatten)]
        net: NetworkArgs,
        #[arg(long)]
        tracts: PathBuf,
        /// Vulnerability rules JSON.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        inverse_distance: bool,
        #[arg(long)]
        out: PathBuf,
        /// Also write the tract-to-bus weights.
        #[arg(long)]
        assignment_out: Option<PathBuf>,
    },
    /// Build one scenario model; writes `<label>.json` and `<label>.mps`.
    Build {
        #[command(flatten)]
        net: NetworkArgs,
        #[arg(long)]
        risk: PathBuf,
        #[arg(long)]
        model: ModelId,
        /// Millions of USD.
        #[arg(long, default_value_t = 0.0)]
        budget: f64,
        /// Baseline solution, needed by load-shed policy models.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Comma-separated groups for the equity objective.
        #[arg(long, value_delimiter = ',')]
        groups: Option<Vec<String>>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Write the MPS file only.
        #[arg(long)]
        emit_only: bool,
    },
    /// Solve a model JSON; writes a solution JSON.
    Solve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Network, for post-processing equity solutions.
        #[arg(long)]
        network: Option<PathBuf>,
        #[arg(long)]
        gap: Option<f64>,
        #[arg(long)]
        time_limit: Option<f64>,
        /// Earlier solution JSON whose binaries seed the search.
        #[arg(long)]
        warm_start: Option<PathBuf>,
        /// Use the enumeration oracle when the model is under the cap.
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
        oracle_cap: usize,
        /// `microlp`, `oracle` or a process-backend JSON.
        #[arg(long)]
        backend: Option<String>,
    },
    /// Group metrics and report files from solutions.
    Report {
        #[command(flatten)]
        net: NetworkArgs,
        #[arg(long)]
        risk: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        solutions: Vec<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the scenario matrix of a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        oracle: bool,
    },
    /// Solve an MPS file in process and write a plain solution file.
    #[command(hide = true)]
    SolveMps {
        model: PathBuf,
        solution: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        gap: f64,
        #[arg(long, default_value_t = 3600.0)]
        time_limit: f64,
        #[arg(long)]
        warm_start: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_solution(path: &Path) -> Result<Solution> {
    Solution::from_json_str(&read(path)?).with_context(|| format!("in {}", path.display()))
}

/// `M2@1.5` to model and budget.
fn parse_label(label: &str) -> Result<(ModelId, f64)> {
    let Some((m, b)) = label.split_once('@') else {
        bail!("scenario label {label:?} is not <model>@<budget>");
    };
    Ok((m.parse()?, b.parse().with_context(|| format!("budget in {label:?}"))?))
}

fn validate(net: &NetworkArgs) -> Result<ExitCode> {
    let network = net.load()?;
    let violations = validate_network(&network);
    for v in &violations {
        println!("{v}");
    }
    let errors = violations.iter().filter(|v| v.severity == Severity::Error).count();
    println!(
        "{}: {} buses, {} lines, {} generators, {errors} errors, {} warnings",
        net.network.display(),
        network.buses.len(),
        network.lines.len(),
        network.generators.len(),
        violations.len() - errors
    );
    Ok(if errors > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn solve_cmd(
    model_path: &Path,
    out: &Path,
    network: Option<&Path>,
    solver: SolverConfig,
    warm_start: Option<&Path>,
) -> Result<ExitCode> {
    let model = MilpModel::from_json_str(&read(model_path)?).with_context(|| format!("in {}", model_path.display()))?;
    let backend = pipeline::configured_backend(&solver)?;
    let oracle = solver.oracle.then_some(OracleBackend { cap: solver.oracle_cap });
    let backend = pipeline::pick_backend(&model, backend.as_ref(), oracle.as_ref());
    let warm = warm_start.map(read_solution).transpose()?;
    let mut req = SolveRequest::new(&model);
    req.mip_gap = solver.mip_gap;
    req.time_limit = solver.time_limit;
    req.warm_start = warm.as_ref().map(|s| &s.values);
    let sol = solve_model(backend, &req);
    println!(
        "{}: {} objective={} gap={}",
        sol.scenario,
        sol.status,
        sol.objective.map_or("-".into(), |v| format!("{v:.6}")),
        sol.gap.map_or("-".into(), |v| format!("{v:.2e}"))
    );
    if let Some(m) = &sol.message {
        eprintln!("{m}");
    }
    write(out, &sol.to_json_pretty())?;
    if let Some(net_path) = network {
        if model.meta.model_id.is_some_and(ModelId::is_equity) && sol.status.has_solution() {
            let net = Network::from_json_file(net_path)?;
            let post = postprocess_equity(&model, &net, &sol)?;
            println!(
                "post-processed total shed {:.6} -> {:.6}",
                post.shed_before, post.shed_after
            );
            write(&out.with_extension("post.json"), &post.solution.to_json_pretty())?;
        }
    }
    Ok(if sol.status == firegrid::solve::SolveStatus::Error {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}

fn solve_mps(model: &Path, solution: &Path, gap: f64, time_limit: f64, warm_start: Option<&Path>) -> Result<()> {
    let m = parse_mps(&read(model)?).with_context(|| format!("in {}", model.display()))?;
    let warm = match warm_start {
        Some(p) => {
            let mut w = BTreeMap::new();
            for (i, line) in read(p)?.lines().enumerate() {
                let mut it = line.split_whitespace();
                if let (Some(k), Some(v)) = (it.next(), it.next()) {
                    let v: f64 = v.parse().with_context(|| format!("{}:{}", p.display(), i + 1))?;
                    w.insert(k.to_owned(), v);
                }
            }
            Some(w)
        }
        None => None,
    };
    let mut req = SolveRequest::new(&m);
    req.mip_gap = gap;
    req.time_limit = time_limit;
    req.warm_start = warm.as_ref();
    let sol = solve_model(&MicrolpBackend, &req);
    let mut text = format!("# status: {}\n", sol.status);
    for (k, v) in [
        ("objective", sol.objective),
        ("gap", sol.gap),
        ("bound", sol.best_bound),
    ] {
        if let Some(v) = v {
            writeln!(text, "# {k}: {v:?}").unwrap();
        }
    }
    if sol.status.has_solution() {
        for (k, v) in &sol.values {
            writeln!(text, "{k} {v:?}").unwrap();
        }
    }
    write(solution, &text)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Validate { net } => validate(&net),
        Cmd::Risk {
            net,
            raster,
            raster_meta,
            r_psps,
            r_high,
            r_low,
            out,
        } => {
            let network = net.load()?;
            pipeline::check_network(&network)?;
            let th = Thresholds { r_psps, r_high, r_low };
            let profile = pipeline::risk_stage(&network, &raster, &raster_meta, th, &out)?;
            let high = profile.categories.iter().map(|d| d.high.len()).sum::<usize>();
            println!(
                "{}: {} lines, {} days, {high} high-risk line-days",
                out.display(),
                profile.lines.len(),
                profile.days.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Assign {
            net,
            tracts,
            rules,
            inverse_distance,
            out,
            assignment_out,
        } => {
            let network = net.load()?;
            let a =
                pipeline::assign_demographics(&network, &tracts, rules.as_deref(), AssignOptions { inverse_distance })?;
            if !a.assignment.unassigned_tracts.is_empty() {
                log::warn!("unassigned tracts: {}", a.assignment.unassigned_tracts.join(", "));
            }
            if !a.zero_population_buses.is_empty() {
                log::warn!("zero-population load buses: {}", a.zero_population_buses.join(", "));
            }
            write(&out, &a.network.to_json_pretty())?;
            if let Some(p) = assignment_out {
                write(&p, &serde_json::to_string_pretty(&a.assignment)?)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Build {
            net,
            risk,
            model,
            budget,
            baseline,
            groups,
            out_dir,
            emit_only,
        } => {
            let network = net.load()?;
            pipeline::check_network(&network)?;
            let profile = RiskProfile::from_json_file(&risk)?;
            let baseline = match baseline {
                Some(p) => Some(BaselineReference::from_values(&network, &read_solution(&p)?.values)),
                None => None,
            };
            let spec = ScenarioSpec::new(model, budget);
            let ctx = BuildContext {
                baseline,
                equity_groups: groups,
            };
            let m = build_scenario(&network, &profile, &spec, &ctx)?;
            let label = spec.label();
            let mps = write_mps(&m)?;
            let mps_path = out_dir.join(format!("{label}.mps"));
            write(&mps_path, &mps)?;
            println!("{} sha256={}", mps_path.display(), cache::sha256_hex(mps.as_bytes()));
            if !emit_only {
                let json_path = out_dir.join(format!("{label}.json"));
                write(&json_path, &m.to_json())?;
                println!(
                    "{}: {} binaries, {} continuous, {} rows",
                    json_path.display(),
                    m.num_binaries(),
                    m.num_continuous(),
                    m.rows.len()
                );
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Solve {
            model,
            out,
            network,
            gap,
            time_limit,
            warm_start,
            oracle,
            oracle_cap,
            backend,
        } => {
            let d = SolverConfig::default();
            let solver = SolverConfig {
                backend,
                mip_gap: gap.unwrap_or(d.mip_gap),
                time_limit: time_limit.unwrap_or(d.time_limit),
                oracle,
                oracle_cap,
            };
            solve_cmd(&model, &out, network.as_deref(), solver, warm_start.as_deref())
        }
        Cmd::Report {
            net,
            risk,
            solutions,
            out_dir,
        } => {
            let network = net.load()?;
            let profile = RiskProfile::from_json_file(&risk)?;
            let mut entries = Vec::new();
            for p in &solutions {
                let sol = read_solution(p)?;
                let (model, budget) = parse_label(&sol.scenario).with_context(|| format!("in {}", p.display()))?;
                entries.push(ReportEntry {
                    scenario: sol.scenario.clone(),
                    model: model.to_string(),
                    budget,
                    status: sol.status,
                    objective: sol.objective,
                    gap: sol.gap,
                    metrics: sol
                        .status
                        .has_solution()
                        .then(|| compute_group_metrics(&network, &profile, &sol)),
                });
            }
            write_report(&out_dir, &entries)?;
            println!("{}: {} scenarios", out_dir.join("report.csv").display(), entries.len());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Run {
            config,
            out_dir,
            jobs,
            oracle,
        } => {
            let manifest = pipeline::run(
                &config,
                &RunOptions {
                    out_dir: out_dir.clone(),
                    jobs,
                    oracle,
                },
            )?;
            for s in &manifest.scenarios {
                println!(
                    "{:<14} {:<16} objective={:<12} gap={}{}",
                    s.scenario,
                    s.status.as_str(),
                    s.objective.map_or("-".into(), |v| format!("{v:.6}")),
                    s.gap.map_or("-".into(), |v| format!("{v:.2e}")),
                    s.message.as_deref().map_or(String::new(), |m| format!("  ({m})"))
                );
            }
            println!("manifest: {}", out_dir.join("manifest.json").display());
            Ok(if manifest.any_error() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            })
        }
        Cmd::SolveMps {
            model,
            solution,
            gap,
            time_limit,
            warm_start,
        } => {
            solve_mps(&model, &solution, gap, time_limit, warm_start.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
