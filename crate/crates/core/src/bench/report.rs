use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::orchestrator::OrchestrationOutcome;

use super::metrics::{check_coverage, MethodOutcomes, MetricsRow, Regrets};

pub const DEFAULT_REGRET_THRESHOLD: f64 = 1e-3;

const METRICS_COLUMNS: [&str; 11] = [
    "method",
    "group",
    "accepted_rate",
    "feasible_rate",
    "avg_ver_rate",
    "avg_wall_time_s",
    "avg_cost_units",
    "avg_regret",
    "fallback_rate",
    "avg_attempts",
    "n_instances",
];

const FAILURE_COLUMNS: [&str; 9] =
    ["instance_id", "split", "method", "solver", "accepted", "r_ver", "runtime_s", "attempts", "regret"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReportOptions {
    /// Runtime weight for the combined `r_ver - lambda * runtime` score.
    pub lambda: Option<f64>,
    /// Regret above which an instance is listed as a failure case.
    pub regret_threshold: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { lambda: None, regret_threshold: DEFAULT_REGRET_THRESHOLD }
    }
}

/// One method's result on a failure-case instance. Unresolved runs carry no
/// solver and no rate (`--`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FailureRow {
    pub instance_id: String,
    pub split: String,
    pub method: String,
    pub solver: String,
    pub accepted: String,
    pub r_ver: String,
    pub runtime_s: f64,
    pub attempts: usize,
    pub regret: f64,
}

impl FailureRow {
    fn from_outcome(o: &OrchestrationOutcome, regret: f64) -> Self {
        FailureRow {
            instance_id: o.instance_id.clone(),
            split: o.split.name().to_string(),
            method: o.method.label().to_string(),
            solver: o.final_solver.map_or_else(|| "--".to_string(), |s| s.name().to_string()),
            accepted: if o.resolved { "T" } else { "F" }.to_string(),
            r_ver: if o.resolved { format!("{:.6e}", o.final_r_ver) } else { "--".to_string() },
            runtime_s: o.total_wall_time_s,
            attempts: o.n_attempts(),
            regret,
        }
    }
}

/// Instances where some method is unresolved or exceeds the regret
/// threshold, with one row per method.
pub fn failure_rows(all: &MethodOutcomes, regrets: &Regrets, regret_threshold: f64) -> Result<Vec<FailureRow>> {
    check_coverage(all)?;
    let Some(first) = all.values().next() else {
        return Ok(Vec::new());
    };
    let regret = |id: &str, o: &OrchestrationOutcome| regrets.get(&(id.to_string(), o.method)).copied().unwrap_or(0.0);
    let mut rows = Vec::new();
    for anchor in first {
        let id = anchor.instance_id.as_str();
        let per_method: Vec<&OrchestrationOutcome> =
            all.values().filter_map(|outs| outs.iter().find(|o| o.instance_id == id)).collect();
        let flagged = per_method.iter().any(|o| !o.resolved || regret(id, o) > regret_threshold);
        if flagged {
            rows.extend(per_method.iter().map(|o| FailureRow::from_outcome(o, regret(id, o))));
        }
    }
    Ok(rows)
}

fn write_csv<T: Serialize>(path: &Path, header: &[&str], records: &[T]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(header)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn table(title: &str, rows: &[&MetricsRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{title}");
    let _ = writeln!(
        s,
        "{:<14} {:<8} {:>9} {:>9} {:>11} {:>11} {:>12} {:>10} {:>9} {:>9} {:>4}",
        "Method",
        "Group",
        "AccRate",
        "FeasRate",
        "VerRate",
        "Runtime_s",
        "CostUnits",
        "Regret",
        "Fallback",
        "Attempts",
        "N"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<14} {:<8} {:>9.4} {:>9.4} {:>11.4e} {:>11.5} {:>12.1} {:>10.3e} {:>9.4} {:>9.4} {:>4}",
            r.method,
            r.group,
            r.accepted_rate,
            r.feasible_rate,
            r.avg_ver_rate,
            r.avg_wall_time_s,
            r.avg_cost_units,
            r.avg_regret,
            r.fallback_rate,
            r.avg_attempts,
            r.n_instances
        );
    }
    s.push('\n');
    s
}

fn render_text(rows: &[MetricsRow], failures: &[FailureRow], opts: &ReportOptions) -> String {
    let pick = |groups: &[&str]| -> Vec<&MetricsRow> {
        // group-major so each split block lists every method
        groups.iter().flat_map(|g| rows.iter().filter(move |r| r.group == *g)).collect()
    };
    let mut out = String::new();
    out.push_str(&table("== Overall ==", &pick(&["overall"])));
    out.push_str(&table("== Per split ==", &pick(&["train", "test", "stress", "shifted"])));
    out.push_str(&table("== ID / OOD ==", &pick(&["ID", "OOD"])));

    if let Some(lambda) = opts.lambda {
        let _ = writeln!(out, "== Combined score (r_ver - {lambda} * runtime), overall ==");
        for r in pick(&["overall"]) {
            let _ = writeln!(out, "{:<14} {:>12.6e}", r.method, r.avg_ver_rate - lambda * r.avg_wall_time_s);
        }
        out.push('\n');
    }

    let _ = writeln!(out, "== Failure cases (unresolved or regret > {:e}) ==", opts.regret_threshold);
    let _ = writeln!(
        out,
        "{:<12} {:<8} {:<14} {:<6} {:<3} {:>13} {:>11} {:>3}",
        "Instance", "Split", "Method", "Solver", "Acc", "r_ver", "Runtime_s", "Att"
    );
    for f in failures {
        let _ = writeln!(
            out,
            "{:<12} {:<8} {:<14} {:<6} {:<3} {:>13} {:>11.5} {:>3}",
            f.instance_id, f.split, f.method, f.solver, f.accepted, f.r_ver, f.runtime_s, f.attempts
        );
    }
    out
}

#[derive(Serialize)]
struct ScoreRow<'a> {
    method: &'a str,
    group: &'a str,
    lambda: f64,
    score: f64,
}

/// Write `metrics.csv`, `failures.csv`, `tables.txt` and, when a runtime
/// weight is given, `scores.csv` into `dir`. Returns the written paths.
pub fn emit_report(
    rows: &[MetricsRow],
    failures: &[FailureRow],
    opts: &ReportOptions,
    dir: &Path,
) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(Error::usage("no metrics rows to report"));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let metrics = dir.join("metrics.csv");
    write_csv(&metrics, &METRICS_COLUMNS, rows)?;
    written.push(metrics);

    let fail = dir.join("failures.csv");
    write_csv(&fail, &FAILURE_COLUMNS, failures)?;
    written.push(fail);

    if let Some(lambda) = opts.lambda {
        let scores: Vec<ScoreRow> = rows
            .iter()
            .map(|r| ScoreRow {
                method: &r.method,
                group: &r.group,
                lambda,
                score: r.avg_ver_rate - lambda * r.avg_wall_time_s,
            })
            .collect();
        let path = dir.join("scores.csv");
        write_csv(&path, &["method", "group", "lambda", "score"], &scores)?;
        written.push(path);
    }

    let text = dir.join("tables.txt");
    fs::write(&text, render_text(rows, failures, opts)).map_err(|e| Error::io(&text, e))?;
    written.push(text);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::metrics::{aggregate_metrics, compute_regret};
    use crate::model::Split;
    use crate::orchestrator::AttemptRecord;
    use crate::router::RouterKind;
    use crate::solvers::SolverId;

    fn outcome(id: &str, method: RouterKind, resolved: bool, v: f64) -> OrchestrationOutcome {
        OrchestrationOutcome {
            instance_id: id.into(),
            split: Split::Shifted,
            method,
            attempts: vec![AttemptRecord {
                solver: SolverId::Exact,
                accepted: resolved,
                feasible: true,
                r_ver: v,
                cost_units: 1,
                wall_time_s: 0.1,
                candidate: None,
            }],
            resolved,
            final_solver: resolved.then_some(SolverId::Exact),
            final_r_ver: if resolved { v } else { 0.0 },
            returned_r_ver: v,
            returned_feasible: true,
            total_cost_units: 1,
            total_wall_time_s: 0.1,
        }
    }

    #[test]
    fn metrics_header_matches_row_fields() {
        let row = MetricsRow {
            method: "m".into(),
            group: "g".into(),
            accepted_rate: 0.0,
            feasible_rate: 0.0,
            avg_ver_rate: 0.0,
            avg_wall_time_s: 0.0,
            avg_cost_units: 0.0,
            avg_regret: 0.0,
            fallback_rate: 0.0,
            avg_attempts: 1.0,
            n_instances: 1,
        };
        let v = serde_json::to_value(&row).unwrap();
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        let mut expected: Vec<&str> = METRICS_COLUMNS.to_vec();
        expected.sort();
        let mut got: Vec<&str> = keys.iter().map(|s| s.as_str()).collect();
        got.sort();
        assert_eq!(got, expected);

        let dir = tempfile::tempdir().unwrap();
        emit_report(&[row], &[], &ReportOptions::default(), dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert_eq!(text.lines().next().unwrap(), METRICS_COLUMNS.join(","));
    }

    #[test]
    fn empty_failures_write_header_only() {
        let mut all = MethodOutcomes::new();
        all.insert(RouterKind::Rule, vec![outcome("a", RouterKind::Rule, true, 1.0)]);
        let regrets = compute_regret(&all).unwrap();
        let rows = aggregate_metrics(&all, &regrets).unwrap();
        let fails = failure_rows(&all, &regrets, DEFAULT_REGRET_THRESHOLD).unwrap();
        assert!(fails.is_empty());
        let dir = tempfile::tempdir().unwrap();
        emit_report(&rows, &fails, &ReportOptions::default(), dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("failures.csv")).unwrap();
        assert_eq!(text.trim_end(), FAILURE_COLUMNS.join(","));
        assert!(!dir.path().join("scores.csv").exists());
    }

    #[test]
    fn unresolved_rows_have_no_solver_or_rate() {
        let mut all = MethodOutcomes::new();
        all.insert(RouterKind::Rule, vec![outcome("s", RouterKind::Rule, false, 0.3)]);
        all.insert(RouterKind::Agent, vec![outcome("s", RouterKind::Agent, true, 0.5)]);
        let regrets = compute_regret(&all).unwrap();
        let fails = failure_rows(&all, &regrets, DEFAULT_REGRET_THRESHOLD).unwrap();
        assert_eq!(fails.len(), 2);
        let rule = fails.iter().find(|f| f.method == "Rule-Router").unwrap();
        assert_eq!((rule.solver.as_str(), rule.accepted.as_str(), rule.r_ver.as_str()), ("--", "F", "--"));
        let agent = fails.iter().find(|f| f.method == "Agent-Router").unwrap();
        assert_eq!(agent.solver, "exact");
        assert_eq!(agent.accepted, "T");
    }

    #[test]
    fn lambda_adds_score_file() {
        let mut all = MethodOutcomes::new();
        all.insert(RouterKind::Rule, vec![outcome("a", RouterKind::Rule, true, 1.0)]);
        let regrets = compute_regret(&all).unwrap();
        let rows = aggregate_metrics(&all, &regrets).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let opts = ReportOptions { lambda: Some(2.0), ..Default::default() };
        emit_report(&rows, &[], &opts, dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("scores.csv")).unwrap();
        assert!(text.contains("Rule-Router,overall,2.0,0.8"));
    }

    #[test]
    fn unwritable_dir_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let row = MetricsRow {
            method: "m".into(),
            group: "g".into(),
            accepted_rate: 0.0,
            feasible_rate: 0.0,
            avg_ver_rate: 0.0,
            avg_wall_time_s: 0.0,
            avg_cost_units: 0.0,
            avg_regret: 0.0,
            fallback_rate: 0.0,
            avg_attempts: 1.0,
            n_instances: 1,
        };
        let r = emit_report(&[row], &[], &ReportOptions::default(), &blocker.join("sub"));
        assert!(matches!(r, Err(Error::Io { .. })));
    }
}
