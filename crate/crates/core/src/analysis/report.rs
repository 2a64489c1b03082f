use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GroupMetrics, GroupRow};
use crate::solve::SolveStatus;
use crate::{Error, Result};

/// One solved scenario as it appears in the reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub scenario: String,
    pub model: String,
    pub budget: f64,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub gap: Option<f64>,
    pub metrics: Option<GroupMetrics>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    scenario: &'a str,
    model: &'a str,
    budget: f64,
    status: &'a str,
    objective: Option<f64>,
    gap: Option<f64>,
    group: &'a str,
    demand: Option<f64>,
    shed: Option<f64>,
    percent_shed: Option<f64>,
    unfairness: Option<f64>,
    population: Option<f64>,
    budget_allocated: Option<f64>,
    budget_per_capita: Option<f64>,
    risk_reduction: Option<f64>,
    risk_per_capita: Option<f64>,
    above_threshold: Option<bool>,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Csv {
        context: path.display().to_string(),
        source: e,
    }
}

fn row<'a>(e: &'a ReportEntry, g: Option<&'a GroupRow>) -> CsvRow<'a> {
    CsvRow {
        scenario: &e.scenario,
        model: &e.model,
        budget: e.budget,
        status: e.status.as_str(),
        objective: e.objective,
        gap: e.gap,
        group: g.map_or("", |g| g.group.as_str()),
        demand: g.map(|g| g.demand),
        shed: g.map(|g| g.shed),
        percent_shed: g.and_then(|g| g.percent_shed),
        unfairness: g.and_then(|g| g.unfairness),
        population: g.map(|g| g.population),
        budget_allocated: g.map(|g| g.budget_allocated),
        budget_per_capita: g.and_then(|g| g.budget_per_capita),
        risk_reduction: g.map(|g| g.risk_reduction),
        risk_per_capita: g.and_then(|g| g.risk_per_capita),
        above_threshold: g.map(|g| g.above_threshold),
    }
}

/// Writes `report.csv`, `report.json` and one `curves/<model>.csv` per model
/// (group metrics against budget) under `dir`.
pub fn write_report(dir: &Path, entries: &[ReportEntry]) -> Result<()> {
    std::fs::create_dir_all(dir.join("curves")).map_err(|e| Error::io(dir, e))?;

    let csv_path = dir.join("report.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| csv_err(&csv_path, e))?;
    for e in entries {
        match &e.metrics {
            None => w.serialize(row(e, None)).map_err(|x| csv_err(&csv_path, x))?,
            Some(m) => {
                for g in std::iter::once(&m.overall).chain(&m.groups) {
                    w.serialize(row(e, Some(g))).map_err(|x| csv_err(&csv_path, x))?;
                }
            }
        }
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    let json_path = dir.join("report.json");
    let text = serde_json::to_string_pretty(entries).expect("report serializes");
    std::fs::write(&json_path, text + "\n").map_err(|e| Error::io(&json_path, e))?;

    let mut by_model: BTreeMap<&str, Vec<&ReportEntry>> = BTreeMap::new();
    for e in entries {
        by_model.entry(e.model.as_str()).or_default().push(e);
    }
    for (model, mut list) in by_model {
        list.sort_by(|a, b| a.budget.total_cmp(&b.budget));
        let path = dir.join("curves").join(format!("{model}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
        w.write_record([
            "budget",
            "group",
            "percent_shed",
            "unfairness",
            "budget_per_capita",
            "risk_per_capita",
        ])
        .map_err(|e| csv_err(&path, e))?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        for e in list {
            let Some(m) = &e.metrics else { continue };
            for g in std::iter::once(&m.overall).chain(&m.groups) {
                w.write_record([
                    format!("{:?}", e.budget),
                    g.group.clone(),
                    opt(g.percent_shed),
                    opt(g.unfairness),
                    opt(g.budget_per_capita),
                    opt(g.risk_per_capita),
                ])
                .map_err(|x| csv_err(&path, x))?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
