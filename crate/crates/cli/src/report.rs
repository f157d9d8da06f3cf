use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use hosim_core::engine::{AlgorithmMode, InitPolicy};

use crate::{read_report, CliError};

pub const REPORT_HEADER: &str =
    "run,label,seed,final_ratio,convergence_window,signaling_total,assignment_messages,forced_assignments,oracle_ratio";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub run: String,
    /// `active`, `static` (frozen geographic), `random` (frozen random) or
    /// `frozen` for any other frozen start.
    pub label: String,
    pub seed: u64,
    pub final_ratio: f64,
    pub convergence_window: Option<usize>,
    pub signaling_total: u64,
    pub assignment_messages: u64,
    pub forced_assignments: u64,
    pub oracle_ratio: Option<f64>,
}

pub fn label(mode: AlgorithmMode, init: InitPolicy) -> &'static str {
    match (mode, init) {
        (AlgorithmMode::Active, _) => "active",
        (AlgorithmMode::Frozen, InitPolicy::Geographic) => "static",
        (AlgorithmMode::Frozen, InitPolicy::Random) => "random",
        (AlgorithmMode::Frozen, _) => "frozen",
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "-".into())
}

/// Renders rows as an aligned plain-text table and as CSV.
pub fn render(rows: &[ReportRow]) -> (String, String) {
    let cells: Vec<[String; 9]> = rows
        .iter()
        .map(|r| {
            [
                r.run.clone(),
                r.label.clone(),
                r.seed.to_string(),
                format!("{:.6}", r.final_ratio),
                opt(r.convergence_window),
                r.signaling_total.to_string(),
                r.assignment_messages.to_string(),
                r.forced_assignments.to_string(),
                opt(r.oracle_ratio.map(|x| format!("{x:.6}"))),
            ]
        })
        .collect();
    let header: Vec<&str> = REPORT_HEADER.split(',').collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut table = String::new();
    let line = |out: &mut String, items: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = items.zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut table, &mut header.iter().copied());
    for row in &cells {
        line(&mut table, &mut row.iter().map(String::as_str));
    }
    let mut csv = format!("{REPORT_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{:.6},{},{},{},{},{}",
            r.run,
            r.label,
            r.seed,
            r.final_ratio,
            r.convergence_window.map(|w| w.to_string()).unwrap_or_default(),
            r.signaling_total,
            r.assignment_messages,
            r.forced_assignments,
            r.oracle_ratio.map(|x| format!("{x:.6}")).unwrap_or_default()
        );
    }
    (table, csv)
}

/// `hosim report`: one row per run directory. Fails naming the first
/// directory without a readable summary.
pub fn cmd_report(dirs: &[&Path]) -> Result<Vec<ReportRow>, CliError> {
    if dirs.is_empty() {
        return Err(CliError::Config("no run directories given".into()));
    }
    dirs.iter()
        .map(|dir| {
            let r = read_report(dir)?;
            let s = r.summary;
            Ok(ReportRow {
                run: dir.display().to_string(),
                label: label(s.mode, s.init_policy).to_string(),
                seed: s.seed,
                final_ratio: s.final_ratio,
                convergence_window: s.convergence_window,
                signaling_total: s.signaling.total,
                assignment_messages: s.signaling.assignment,
                forced_assignments: s.forced_assignments,
                oracle_ratio: s.oracle_ratio,
            })
        })
        .collect()
}
