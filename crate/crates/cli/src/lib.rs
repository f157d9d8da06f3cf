//! Commands behind the `hosim` binary.
//!
//! Every command returns a [`CliError`] whose [`CliError::exit_code`] is the
//! process status: 0 on success, 1 for runtime failures and 2 for problems
//! with the configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use hosim_core::engine::{run, EngineError, RunOutput, RunSummary, Scenario};
use hosim_core::evaluation::{oracle_partition, OracleMode, PartitionError, METRICS_HEADER};
use hosim_core::mobility::FlowMatrix;
use hosim_core::protocol::MESSAGE_LOG_HEADER;

mod report;
mod sweep;

pub use report::{cmd_report, render as render_report, ReportRow, REPORT_HEADER};
pub use sweep::{cmd_sweep, parse_seeds, Aggregate, Stat, SweepRow};

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const FLOW_FILE: &str = "flow.csv";
pub const MESSAGES_FILE: &str = "messages.csv";
pub const PARTITION_FILE: &str = "partition.json";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

/// Writes rendered CSV text to `path`.
pub fn write_csv(path: &Path, csv: &str) -> Result<(), CliError> {
    write_file(path, csv)
}

pub(crate) fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

/// Hex SHA-256 of the scenario document with object keys sorted and
/// whitespace removed, so formatting and key order do not matter.
pub fn scenario_digest(text: &str) -> Result<String, CliError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("scenario is not valid JSON: {e}")))?;
    let canonical = serde_json::to_string(&value).expect("a parsed value serializes");
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

/// A scenario read from disk together with its digest.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub digest: String,
}

pub fn load_scenario(path: &Path) -> Result<LoadedScenario, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let digest = scenario_digest(&text)?;
    let mut scenario = Scenario::from_json(&text)?;
    scenario.base_dir = path.parent().map(Path::to_path_buf);
    scenario.validate()?;
    Ok(LoadedScenario { scenario, digest })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFiles {
    pub metrics: String,
    pub summary: String,
    pub flow: String,
    pub messages: Option<String>,
}

/// Contents of `summary.json`. File paths are relative to the run directory
/// so two runs of the same scenario are byte-identical wherever they live.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub digest: String,
    pub files: RunFiles,
    #[serde(flatten)]
    pub summary: RunSummary,
}

impl RunReport {
    pub fn one_line(&self) -> String {
        let s = &self.summary;
        let conv = s
            .convergence_window
            .map_or_else(|| "none".to_string(), |w| w.to_string());
        format!(
            "seed {} {}: final ratio {:.4}, convergence window {}, total signaling {}",
            s.seed,
            s.mode.as_str(),
            s.final_ratio,
            conv,
            s.signaling.total
        )
    }
}

pub fn read_report(dir: &Path) -> Result<RunReport, CliError> {
    let path = dir.join(SUMMARY_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Runtime(format!("{}: no readable {SUMMARY_FILE}: {e}", dir.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Runs a loaded scenario and writes its artifacts into `out`.
pub fn run_to_dir(loaded: &LoadedScenario, out: &Path) -> Result<RunReport, CliError> {
    let output = run(&loaded.scenario)?;
    write_run(&loaded.digest, &output, out)
}

fn write_run(digest: &str, output: &RunOutput, out: &Path) -> Result<RunReport, CliError> {
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let mut metrics = String::from(METRICS_HEADER);
    metrics.push('\n');
    for w in &output.windows {
        w.write_csv_row(&mut metrics);
    }
    write_file(&out.join(METRICS_FILE), &metrics)?;
    write_file(&out.join(FLOW_FILE), &output.flow.to_csv())?;
    let messages = match &output.messages {
        Some(log) => {
            let mut text = String::from(MESSAGE_LOG_HEADER);
            text.push('\n');
            for m in log {
                m.write_csv_row(&mut text);
            }
            write_file(&out.join(MESSAGES_FILE), &text)?;
            Some(MESSAGES_FILE.to_string())
        }
        None => None,
    };
    let report = RunReport {
        digest: digest.to_string(),
        files: RunFiles {
            metrics: METRICS_FILE.into(),
            summary: SUMMARY_FILE.into(),
            flow: FLOW_FILE.into(),
            messages,
        },
        summary: output.summary.clone(),
    };
    write_file(&out.join(SUMMARY_FILE), &to_json(&report))?;
    Ok(report)
}

/// `hosim run`: one scenario, optionally with another seed.
pub fn cmd_run(scenario_path: &Path, out: &Path, seed: Option<u64>) -> Result<RunReport, CliError> {
    let mut loaded = load_scenario(scenario_path)?;
    if let Some(seed) = seed {
        loaded.scenario.seed = seed;
    }
    run_to_dir(&loaded, out)
}

/// Where the oracle takes its flow matrix from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlowSource {
    Csv(PathBuf),
    /// A finished run directory; its summary fixes the cell count.
    RunDir(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub mode: OracleMode,
    pub n_cells: usize,
    pub n_regions: usize,
    pub capacity: usize,
    pub cut: f64,
    pub total_flow: f64,
    /// `cut / total_flow`, 0 when there is no flow.
    pub ratio: f64,
    pub region_of: Vec<u32>,
    pub blocks: Vec<Vec<u32>>,
}

impl OracleResult {
    pub fn describe(&self) -> String {
        let blocks: Vec<String> = self
            .blocks
            .iter()
            .map(|b| b.iter().map(u32::to_string).collect::<Vec<_>>().join(","))
            .collect();
        format!("partition {{{}}} cut {} ratio {:.6}", blocks.join("|"), self.cut, self.ratio)
    }
}

fn read_flow(source: &FlowSource) -> Result<FlowMatrix, CliError> {
    let (path, n_cells) = match source {
        FlowSource::Csv(p) => (p.clone(), None),
        FlowSource::RunDir(dir) => (dir.join(FLOW_FILE), Some(read_report(dir)?.summary.n_cells)),
    };
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    FlowMatrix::from_csv(&text, n_cells).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// `hosim oracle`: optimal capacity-respecting partition of a flow matrix.
/// Writes `partition.json` into `out` when given.
pub fn cmd_oracle(
    source: &FlowSource,
    n_regions: usize,
    capacity: usize,
    mode: OracleMode,
    out: Option<&Path>,
) -> Result<OracleResult, CliError> {
    if n_regions == 0 || capacity == 0 {
        return Err(CliError::Config("regions and capacity must be positive".into()));
    }
    let flow = read_flow(source)?;
    let (partition, cut) = oracle_partition(&flow, n_regions, capacity, mode)
        .map_err(|e: PartitionError| CliError::Runtime(e.to_string()))?;
    let total_flow = flow.total();
    let result = OracleResult {
        mode,
        n_cells: flow.n_cells(),
        n_regions,
        capacity,
        cut,
        total_flow,
        ratio: if total_flow > 0.0 { cut / total_flow } else { 0.0 },
        region_of: partition.region_of.iter().map(|r| r.0).collect(),
        blocks: partition
            .blocks()
            .into_iter()
            .map(|(_, cells)| cells.iter().map(|c| c.0).collect())
            .collect(),
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        write_file(&dir.join(PARTITION_FILE), &to_json(&result))?;
    }
    Ok(result)
}
