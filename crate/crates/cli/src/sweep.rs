use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{load_scenario, run_to_dir, to_json, write_file, CliError, RunReport};

pub const AGGREGATE_FILE: &str = "aggregate.json";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_HEADER: &str = "seed,status,final_ratio,convergence_window,signaling_total,forced_assignments";

/// Parses `a..b` (inclusive) or a comma list such as `1,4,9`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let bad = |part: &str| CliError::Config(format!("bad seed list entry {part:?}"));
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad(a))?;
        let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad(b))?;
        if a > b {
            return Err(CliError::Config(format!("empty seed range {text}")));
        }
        return Ok((a..=b).collect());
    }
    text.split(',')
        .map(|p| p.trim().parse().map_err(|_| bad(p)))
        .collect()
}

/// Mean and sample standard deviation (0 below two samples).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub n: usize,
    pub mean: f64,
    pub stddev: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let stddev = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Some(Stat { n, mean, stddev })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub seed: u64,
    pub error: Option<String>,
    pub final_ratio: Option<f64>,
    pub convergence_window: Option<usize>,
    pub signaling_total: Option<u64>,
    pub forced_assignments: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub digest: String,
    pub seeds: Vec<u64>,
    pub failed_seeds: Vec<u64>,
    pub final_ratio: Option<Stat>,
    /// Over the seeds that converged only.
    pub convergence_window: Option<Stat>,
    pub n_converged: usize,
    pub signaling_total: Option<Stat>,
    pub rows: Vec<SweepRow>,
}

fn row(seed: u64, result: &Result<RunReport, CliError>) -> SweepRow {
    match result {
        Ok(r) => SweepRow {
            seed,
            error: None,
            final_ratio: Some(r.summary.final_ratio),
            convergence_window: r.summary.convergence_window,
            signaling_total: Some(r.summary.signaling.total),
            forced_assignments: Some(r.summary.forced_assignments),
        },
        Err(e) => SweepRow {
            seed,
            error: Some(e.to_string()),
            final_ratio: None,
            convergence_window: None,
            signaling_total: None,
            forced_assignments: None,
        },
    }
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    fn opt<T: ToString>(v: Option<T>) -> String {
        v.map(|x| x.to_string()).unwrap_or_default()
    }
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.seed,
            if r.error.is_none() { "ok" } else { "failed" },
            opt(r.final_ratio.map(|x| format!("{x:.6}"))),
            opt(r.convergence_window),
            opt(r.signaling_total),
            opt(r.forced_assignments)
        );
    }
    out
}

/// `hosim sweep`: one run per seed under `out/seed_<n>`, then
/// `aggregate.json` and `sweep.csv`. Runs go through a pool of `parallel`
/// threads; results are gathered in seed order, so the aggregate does not
/// depend on the pool size. A failed seed does not stop the others but makes
/// the command fail.
pub fn cmd_sweep(scenario_path: &Path, seeds: &[u64], out: &Path, parallel: usize) -> Result<Aggregate, CliError> {
    if seeds.is_empty() {
        return Err(CliError::Config("seed list is empty".into()));
    }
    if parallel == 0 {
        return Err(CliError::Config("--parallel must be at least 1".into()));
    }
    let loaded = load_scenario(scenario_path)?;
    fs::create_dir_all(out).map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    let results: Vec<Result<RunReport, CliError>> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let mut one = loaded.clone();
                one.scenario.seed = seed;
                run_to_dir(&one, &out.join(format!("seed_{seed}")))
            })
            .collect()
    });
    let rows: Vec<SweepRow> = seeds.iter().zip(&results).map(|(&s, r)| row(s, r)).collect();
    let ok: Vec<&RunReport> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let ratios: Vec<f64> = ok.iter().map(|r| r.summary.final_ratio).collect();
    let conv: Vec<f64> = ok
        .iter()
        .filter_map(|r| r.summary.convergence_window.map(|w| w as f64))
        .collect();
    let signaling: Vec<f64> = ok.iter().map(|r| r.summary.signaling.total as f64).collect();
    let aggregate = Aggregate {
        digest: loaded.digest.clone(),
        seeds: seeds.to_vec(),
        failed_seeds: rows.iter().filter(|r| r.error.is_some()).map(|r| r.seed).collect(),
        final_ratio: Stat::of(&ratios),
        convergence_window: Stat::of(&conv),
        n_converged: conv.len(),
        signaling_total: Stat::of(&signaling),
        rows,
    };
    write_file(&out.join(AGGREGATE_FILE), &to_json(&aggregate))?;
    write_file(&out.join(SWEEP_CSV), &sweep_csv(&aggregate.rows))?;
    if !aggregate.failed_seeds.is_empty() {
        return Err(CliError::Runtime(format!(
            "{} of {} seeds failed: {:?}",
            aggregate.failed_seeds.len(),
            seeds.len(),
            aggregate.failed_seeds
        )));
    }
    Ok(aggregate)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("1..4").unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(parse_seeds("1..=2").unwrap(), vec![1, 2]);
        assert_eq!(parse_seeds("7, 3,9").unwrap(), vec![7, 3, 9]);
        assert!(parse_seeds("").unwrap().is_empty());
        assert_eq!(parse_seeds("x").unwrap_err().exit_code(), 2);
        assert_eq!(parse_seeds("5..2").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn stats() {
        assert_eq!(Stat::of(&[]), None);
        let s = Stat::of(&[2.0]).unwrap();
        assert_eq!((s.mean, s.stddev), (2.0, 0.0));
        let s = Stat::of(&[1.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.stddev - 2f64.sqrt()).abs() < 1e-12);
    }
}
