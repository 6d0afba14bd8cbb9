//! JSON and markdown rendering of experiment reports.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExperimentReport, HarnessError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Markdown,
}

impl ReportFormat {
    fn extension(self) -> &'static str {
        match self {
            ReportFormat::Json => "json",
            ReportFormat::Markdown => "md",
        }
    }
}

pub fn render_json(report: &ExperimentReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

fn percent(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{:.1}", v * 100.0),
        None => "---".into(),
    }
}

/// Sweep grid (demo counts down, linking off/on times runs across) when the
/// report holds a sweep, then the per-row table.
pub fn render_markdown(report: &ExperimentReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# {} / {} / {}\n",
        report.task.as_str(),
        report.language.as_str(),
        report.backend
    );
    if !report.sweep.is_empty() {
        let demos: BTreeSet<usize> = report.sweep.iter().map(|c| c.demos).collect();
        let groups: BTreeSet<bool> = report.sweep.iter().map(|c| c.linking).collect();
        let runs: BTreeSet<usize> = report.sweep.iter().map(|c| c.run).collect();
        let mut header = String::from("| Demonstrations |");
        let mut rule = String::from("|---|");
        for &g in &groups {
            for &r in &runs {
                let _ = write!(header, " {} run {} |", if g { "w/ e.l." } else { "w/o e.l." }, r + 1);
                rule.push_str("---|");
            }
        }
        let _ = writeln!(out, "{header}\n{rule}");
        for &d in &demos {
            let mut line = format!("| {d} |");
            for &g in &groups {
                for &r in &runs {
                    let cell = report
                        .sweep
                        .iter()
                        .find(|c| c.demos == d && c.linking == g && c.run == r)
                        .and_then(|c| c.exact_match);
                    let _ = write!(line, " {} |", percent(cell));
                }
            }
            let _ = writeln!(out, "{line}");
        }
        out.push('\n');
    }
    let metrics: BTreeSet<&String> = report.rows.iter().flat_map(|r| r.metrics.keys()).collect();
    let mut header = String::from("| id | prompt |");
    let mut rule = String::from("|---|---|");
    for m in &metrics {
        let _ = write!(header, " {m} |");
        rule.push_str("---|");
    }
    let _ = writeln!(out, "{header} flags |\n{rule}---|");
    for row in &report.rows {
        let mut line = format!("| {} | {} |", row.id, row.prompt_hash);
        for m in &metrics {
            let _ = write!(
                line,
                " {} |",
                row.metrics.get(*m).map_or(String::new(), |v| format!("{v}"))
            );
        }
        let _ = writeln!(line, " {} |", row.flags.join("; ").replace('|', "\\|"));
        out.push_str(&line);
    }
    if !report.aggregates.is_empty() {
        out.push('\n');
        for (k, v) in &report.aggregates {
            let _ = writeln!(out, "- {k}: {v:.4}");
        }
    }
    out
}

/// Writes `<stem>.json` and/or `<stem>.md` into `dir`.
pub fn emit_report(
    report: &ExperimentReport,
    dir: &Path,
    stem: &str,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>, HarnessError> {
    let io = |p: &Path, e: std::io::Error| HarnessError::Io {
        path: p.display().to_string(),
        reason: e.to_string(),
    };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    for &f in formats {
        let path = dir.join(format!("{stem}.{}", f.extension()));
        let body = match f {
            ReportFormat::Json => render_json(report),
            ReportFormat::Markdown => render_markdown(report),
        };
        std::fs::write(&path, body).map_err(|e| io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::super::{RunConfig, SweepCell};
    use super::*;
    use crate::fl_ast::Language;
    use crate::prompt::Task;

    #[test]
    fn grid_layout() {
        let mut r = ExperimentReport::empty(&RunConfig::new(Task::Generation, Language::Kopl), "mock:fixed");
        for demos in [0, 5, 10] {
            for linking in [true, false] {
                r.sweep.push(SweepCell {
                    demos,
                    linking,
                    run: 0,
                    exact_match: (demos < 10).then_some(0.25),
                });
            }
        }
        let md = render_markdown(&r);
        assert!(md.contains("| Demonstrations | w/o e.l. run 1 | w/ e.l. run 1 |"));
        assert!(md.contains("| 0 | 25.0 | 25.0 |"));
        assert!(md.contains("| 10 | --- | --- |"));
    }

    #[test]
    fn empty_report_is_header_only() {
        let r = ExperimentReport::empty(&RunConfig::new(Task::Generation, Language::Kopl), "mock:fixed");
        let md = render_markdown(&r);
        assert_eq!(md.lines().filter(|l| l.starts_with('|')).count(), 2);
        assert!(render_json(&r).contains("\"rows\": []"));
    }
}
