use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::eval::{FeasibilitySummary, SimSummary};
use super::run::RunKind;
use super::{read_text, HarnessError, Provenance};
use crate::metrics::{EvalReport, GroupStats};

/// Contents of `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    #[serde(flatten)]
    pub provenance: Provenance,
    pub kind: RunKind,
    pub tasks: usize,
    pub missing_traces: usize,
    pub metrics: Option<EvalReport>,
    pub sim: Option<SimSummary>,
    pub feasibility: Option<FeasibilitySummary>,
}

impl ReportFile {
    /// Reads `report.json` from an eval output directory.
    pub fn load(dir: &Path) -> Result<Self, HarnessError> {
        let path = dir.join("report.json");
        serde_json::from_str(&read_text(&path)?).map_err(|e| HarnessError::data(&path, e))
    }

    fn sim_rate(&self, length: &str) -> Option<f64> {
        let length: usize = length.parse().ok()?;
        self.sim.as_ref()?.length(length).map(|r| r.rate)
    }
}

const COLUMNS: [&str; 8] = ["length", "n", "P-EM", "P-LCSS", "P-LCSA", "A-EM", "A-LCSS", "A-LCSA"];

fn scores(g: &GroupStats) -> [f64; 6] {
    [g.em_p, g.lcss_p, g.lcsa_p, g.em_a, g.lcss_a, g.lcsa_a]
}

fn rows(report: &ReportFile) -> Vec<(String, usize, [f64; 6], Option<f64>)> {
    let Some(m) = &report.metrics else { return Vec::new() };
    m.groups_for("length")
        .map(|g| (g.value.clone(), g.count, scores(g), report.sim_rate(&g.value)))
        .chain(std::iter::once((
            "all".to_string(),
            m.overall.count,
            scores(&m.overall),
            report.sim.as_ref().map(|s| s.overall.rate),
        )))
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.3}"))
}

/// Scores versus plan length as a fixed-width terminal table.
pub fn render_table(report: &ReportFile) -> String {
    let mut out = String::new();
    for c in COLUMNS.iter().chain(["sim"].iter()) {
        let _ = write!(out, "{c:>8}");
    }
    out.push('\n');
    for (length, n, s, sim) in rows(report) {
        let _ = write!(out, "{length:>8}{n:>8}");
        for v in s {
            let _ = write!(out, "{v:>8.3}");
        }
        let _ = writeln!(out, "{:>8}", opt(sim));
    }
    if let Some(f) = &report.feasibility {
        let _ = writeln!(out, "feasibility accuracy: {:.4} ({}/{})", f.accuracy, f.correct, f.total);
    }
    out
}

pub fn render_markdown(report: &ReportFile) -> String {
    let p = &report.provenance;
    let mut out = String::from("# Evaluation report\n\n");
    let _ = writeln!(out, "- config hash: `{}`", p.config_hash);
    let _ = writeln!(out, "- dataset sha256: `{}`", p.dataset_sha256);
    let _ = writeln!(out, "- backend: `{}`", p.backend);
    let _ = writeln!(out, "- agents sha256: `{}`", p.agents_sha256);
    let _ = writeln!(out, "- tasks: {} (missing traces: {})\n", report.tasks, report.missing_traces);
    let table = rows(report);
    if !table.is_empty() {
        let _ = writeln!(out, "| {} | sim |", COLUMNS.join(" | "));
        let _ = writeln!(out, "|{}", "---|".repeat(COLUMNS.len() + 1));
        for (length, n, s, sim) in table {
            let cells: Vec<String> = s.iter().map(|v| format!("{v:.3}")).collect();
            let _ = writeln!(out, "| {length} | {n} | {} | {} |", cells.join(" | "), opt(sim));
        }
        out.push('\n');
    }
    if let Some(m) = &report.metrics {
        let classes: Vec<_> = m.groups_for("class").collect();
        if !classes.is_empty() {
            out.push_str("| class | n | P-EM | P-LCSS | P-LCSA | A-EM | A-LCSS | A-LCSA | parse failures |\n");
            out.push_str("|---|---|---|---|---|---|---|---|---|\n");
            for g in classes {
                let cells: Vec<String> = scores(g).iter().map(|v| format!("{v:.3}")).collect();
                let _ = writeln!(out, "| {} | {} | {} | {:.3} |", g.value, g.count, cells.join(" | "), g.parse_failure_rate);
            }
            out.push('\n');
        }
    }
    if let Some(f) = &report.feasibility {
        let c = &f.confusion;
        let _ = writeln!(out, "Feasibility accuracy: {:.4} ({}/{})\n", f.accuracy, f.correct, f.total);
        let _ = writeln!(
            out,
            "| truth \\ verdict | feasible | not feasible |\n|---|---|---|\n| feasible | {} | {} |\n| not feasible | {} | {} |",
            c.true_feasible, c.false_infeasible, c.false_feasible, c.true_infeasible
        );
        if c.missing > 0 {
            let _ = writeln!(out, "\n{} commands had no verdict.", c.missing);
        }
    }
    out
}

/// Per-length differences `current - baseline` for lengths present in both.
pub fn compare_reports(baseline: &ReportFile, current: &ReportFile) -> String {
    let base = rows(baseline);
    let mut out = String::new();
    for c in COLUMNS.iter().filter(|c| **c != "n").chain(["sim"].iter()) {
        let _ = write!(out, "{c:>8}");
    }
    out.push('\n');
    for (length, _, s, sim) in rows(current) {
        let Some((_, _, b, bsim)) = base.iter().find(|r| r.0 == length) else { continue };
        let _ = write!(out, "{length:>8}");
        for (x, y) in s.iter().zip(b) {
            let _ = write!(out, "{:>+8.3}", x - y);
        }
        let delta = sim.zip(*bsim).map(|(x, y)| x - y);
        let _ = writeln!(out, "{:>8}", delta.map_or_else(|| "-".into(), |d| format!("{d:+.3}")));
    }
    out
}
