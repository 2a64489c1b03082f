//! External solver run as a child process on an MPS file.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::{mps::write_mps, Backend, RawSolution, SolveRequest, SolveStatus};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolutionFormat {
    /// `# status:` / `# objective:` / `# gap:` / `# bound:` headers, then
    /// `<var> <value>` lines.
    Plain,
    Highs,
    Cbc,
}

/// `args` may contain `{model}`, `{solution}`, `{gap}`, `{time_limit}` and
/// `{warm_start}` placeholders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessConfig {
    pub name: String,
    pub command: String,
    #[serde(default)]
    pub args: Vec<String>,
    pub solution_format: SolutionFormat,
}

#[derive(Debug, Clone)]
pub struct ProcessBackend {
    pub config: ProcessConfig,
}

impl ProcessBackend {
    pub fn new(config: ProcessConfig) -> Self {
        ProcessBackend { config }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        Ok(ProcessBackend { config })
    }
}

impl Backend for ProcessBackend {
    fn name(&self) -> String {
        self.config.name.clone()
    }

    fn solve(&self, req: &SolveRequest<'_>) -> Result<RawSolution> {
        let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
        let model_path = dir.path().join("model.mps");
        let sol_path = dir.path().join("solution.txt");
        let warm_path = dir.path().join("warm.sol");
        std::fs::write(&model_path, write_mps(req.model)?).map_err(|e| Error::io(&model_path, e))?;
        if self.config.args.iter().any(|a| a.contains("{warm_start}")) {
            let mut text = String::new();
            for (k, v) in req.warm_start.into_iter().flatten() {
                text.push_str(&format!("{k} {v:?}\n"));
            }
            std::fs::write(&warm_path, text).map_err(|e| Error::io(&warm_path, e))?;
        }
        let args: Vec<String> = self
            .config
            .args
            .iter()
            .map(|a| {
                a.replace("{model}", &model_path.display().to_string())
                    .replace("{solution}", &sol_path.display().to_string())
                    .replace("{warm_start}", &warm_path.display().to_string())
                    .replace("{gap}", &format!("{:?}", req.mip_gap))
                    .replace("{time_limit}", &format!("{:?}", req.time_limit))
            })
            .collect();
        let out = Command::new(&self.config.command).args(&args).output().map_err(|e| {
            Error::Solver(format!(
                "{}: cannot start {}: {e}",
                self.config.name, self.config.command
            ))
        })?;
        if !out.status.success() {
            return Ok(RawSolution::without_point(
                SolveStatus::Error,
                Some(format!(
                    "{} exited with {}: {}",
                    self.config.name,
                    out.status,
                    String::from_utf8_lossy(&out.stderr).trim()
                )),
            ));
        }
        let text = std::fs::read_to_string(&sol_path).map_err(|e| Error::io(&sol_path, e))?;
        let parsed = parse_solution(self.config.solution_format, &text)?;
        let values = parsed.values.map(|v| req.model.dense_values(&v));
        Ok(RawSolution {
            status: parsed.status,
            objective: parsed.objective,
            best_bound: parsed.best_bound,
            gap: parsed.gap,
            nodes: None,
            values,
            message: None,
        })
    }
}

/// A solution file read back by name.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSolution {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub best_bound: Option<f64>,
    pub gap: Option<f64>,
    pub values: Option<BTreeMap<String, f64>>,
}

fn perr(ctx: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        context: ctx.into(),
        line,
        message: message.into(),
    }
}

fn num(ctx: &str, line: usize, t: &str) -> Result<f64> {
    t.trim()
        .parse()
        .map_err(|_| perr(ctx, line, format!("bad number {t:?}")))
}

pub fn parse_solution(format: SolutionFormat, text: &str) -> Result<ParsedSolution> {
    match format {
        SolutionFormat::Plain => parse_plain(text),
        SolutionFormat::Highs => parse_highs(text),
        SolutionFormat::Cbc => parse_cbc(text),
    }
}

fn parse_plain(text: &str) -> Result<ParsedSolution> {
    const CTX: &str = "plain solution";
    let mut sol = ParsedSolution {
        status: SolveStatus::Error,
        objective: None,
        best_bound: None,
        gap: None,
        values: None,
    };
    let mut seen_status = false;
    let mut values = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        let ln = k + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(h) = line.strip_prefix('#') {
            let Some((key, val)) = h.split_once(':') else { continue };
            match key.trim() {
                "status" => {
                    sol.status = SolveStatus::parse(val)
                        .ok_or_else(|| perr(CTX, ln, format!("unknown status {:?}", val.trim())))?;
                    seen_status = true;
                }
                "objective" => sol.objective = Some(num(CTX, ln, val)?),
                "gap" => sol.gap = Some(num(CTX, ln, val)?),
                "bound" => sol.best_bound = Some(num(CTX, ln, val)?),
                _ => {}
            }
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(name), Some(v), None) = (it.next(), it.next(), it.next()) else {
            return Err(perr(CTX, ln, "expected `<var> <value>`"));
        };
        values.insert(name.to_owned(), num(CTX, ln, v)?);
    }
    if !seen_status {
        return Err(perr(CTX, 1, "missing `# status:` header"));
    }
    if sol.status.has_solution() {
        sol.values = Some(values);
    }
    Ok(sol)
}

fn parse_highs(text: &str) -> Result<ParsedSolution> {
    const CTX: &str = "highs solution";
    let lines: Vec<&str> = text.lines().collect();
    let mut status = None;
    let mut objective = None;
    let mut values = BTreeMap::new();
    let mut feasible_point = false;
    let mut i = 0;
    while i < lines.len() {
        let l = lines[i].trim();
        if l == "Model status" {
            let next = lines[i + 1..].iter().map(|s| s.trim()).find(|s| !s.is_empty());
            status = next.map(str::to_owned);
        } else if l == "Feasible" {
            feasible_point = true;
        } else if let Some(v) = l.strip_prefix("Objective") {
            let v = v
                .trim_start_matches([' ', ':'])
                .trim_start_matches("value")
                .trim_start_matches([' ', ':']);
            objective = Some(num(CTX, i + 1, v)?);
        } else if let Some(n) = l.strip_prefix("# Columns") {
            let n = num(CTX, i + 1, n)? as usize;
            for k in 0..n {
                let ln = i + 2 + k;
                let row = lines
                    .get(ln - 1)
                    .ok_or_else(|| perr(CTX, ln, "truncated column section"))?;
                let mut it = row.split_whitespace();
                let (Some(name), Some(v)) = (it.next(), it.next()) else {
                    return Err(perr(CTX, ln, "expected `<column> <value>`"));
                };
                values.insert(name.to_owned(), num(CTX, ln, v)?);
            }
            i += n;
        }
        i += 1;
    }
    let status = status.ok_or_else(|| perr(CTX, 1, "missing model status"))?;
    let status = match status.as_str() {
        "Optimal" => SolveStatus::Optimal,
        "Infeasible" => SolveStatus::Infeasible,
        s if s.contains("limit") && feasible_point => SolveStatus::FeasibleGapped,
        s if s.contains("limit") => SolveStatus::TimeLimit,
        _ => SolveStatus::Error,
    };
    Ok(ParsedSolution {
        status,
        objective,
        best_bound: None,
        gap: None,
        values: status.has_solution().then_some(values),
    })
}

fn parse_cbc(text: &str) -> Result<ParsedSolution> {
    const CTX: &str = "cbc solution";
    let mut lines = text.lines();
    let head = lines.next().ok_or_else(|| perr(CTX, 1, "empty file"))?.trim();
    let lower = head.to_ascii_lowercase();
    let status = if lower.starts_with("optimal") {
        SolveStatus::Optimal
    } else if lower.contains("infeasible") {
        SolveStatus::Infeasible
    } else if lower.starts_with("stopped") {
        SolveStatus::FeasibleGapped
    } else {
        SolveStatus::Error
    };
    let objective = match head.rsplit_once("objective value") {
        Some((_, v)) => Some(num(CTX, 1, v)?),
        None => None,
    };
    let mut values = BTreeMap::new();
    for (k, line) in lines.enumerate() {
        let ln = k + 2;
        let mut toks: Vec<&str> = line.split_whitespace().collect();
        if toks.first() == Some(&"**") {
            toks.remove(0);
        }
        if toks.is_empty() {
            continue;
        }
        if toks.len() < 3 {
            return Err(perr(CTX, ln, "expected `<index> <name> <value> [<reduced cost>]`"));
        }
        values.insert(toks[1].to_owned(), num(CTX, ln, toks[2])?);
    }
    Ok(ParsedSolution {
        status,
        objective,
        best_bound: None,
        gap: None,
        values: status.has_solution().then_some(values),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_format() {
        let s = parse_solution(
            SolutionFormat::Plain,
            "# status: optimal\n# objective: 1.5\n# gap: 0\nx 1\nz 0.5\n",
        )
        .unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!(s.objective, Some(1.5));
        assert_eq!(s.values.unwrap()["z"], 0.5);
        assert!(parse_solution(SolutionFormat::Plain, "x 1\n").is_err());
    }

    #[test]
    fn highs_format() {
        let text = "Model status\nOptimal\n\n# Primal solution values\nFeasible\nObjective 12.5\n# Columns 2\nx 1\ny 2.5\n# Rows 1\nr1 3.5\n";
        let s = parse_solution(SolutionFormat::Highs, text).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!(s.objective, Some(12.5));
        let v = s.values.unwrap();
        assert_eq!((v["x"], v["y"]), (1.0, 2.5));
        assert!(!v.contains_key("r1"));
    }

    #[test]
    fn cbc_format() {
        let text =
            "Optimal - objective value 7.00000000\n      0 x          1        0\n**    1 y        2.5        0\n";
        let s = parse_solution(SolutionFormat::Cbc, text).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        assert_eq!(s.objective, Some(7.0));
        assert_eq!(s.values.unwrap()["y"], 2.5);
        let s = parse_solution(SolutionFormat::Cbc, "Infeasible - objective value 0\n").unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
    }
}
