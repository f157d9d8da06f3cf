use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::AgentParams;
use crate::mobility::MobilityModel;
use crate::protocol::SignalingCostModel;
use crate::topology::{EdgeSpec, RegionId, TopologySpec};

use super::EngineError;

/// Where the cell graph comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologyConfig {
    Grid {
        width: u32,
        height: u32,
    },
    Community {
        n_communities: u32,
        cells_per_community: u32,
        inter_edges: u32,
    },
    Explicit {
        n_cells: u32,
        edges: Vec<EdgeSpec>,
    },
    /// Text edge list, resolved relative to the scenario file.
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MobilityConfig {
    RandomWalk,
    CommunityFlow { q: f64 },
    /// Pre-recorded handover trace, resolved relative to the scenario file.
    Trace { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsConfig {
    pub count: u32,
    pub capacity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitPolicy {
    #[default]
    Random,
    NeighborMajority,
    /// The static geographic partition used as a baseline.
    Geographic,
}

impl InitPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            InitPolicy::Random => "random",
            InitPolicy::NeighborMajority => "neighbor_majority",
            InitPolicy::Geographic => "geographic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmMode {
    /// Both agent algorithms run.
    #[default]
    Active,
    /// Counters update but nobody changes region.
    Frozen,
}

impl AlgorithmMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmMode::Active => "active",
            AlgorithmMode::Frozen => "frozen",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScaleEvent {
    ScaleUp { time: u64, capacity: f64 },
    ScaleDown { time: u64, region: RegionId },
}

impl ScaleEvent {
    pub fn time(&self) -> u64 {
        match *self {
            ScaleEvent::ScaleUp { time, .. } | ScaleEvent::ScaleDown { time, .. } => time,
        }
    }
}

fn default_p_x2() -> f64 {
    1.0
}
fn default_p_move() -> f64 {
    0.5
}
fn default_window() -> usize {
    500
}
fn default_tol() -> f64 {
    0.02
}

/// A complete, self-contained run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub topology: TopologyConfig,
    /// Share of neighbor pairs with a direct link.
    #[serde(default = "default_p_x2")]
    pub p_x2: f64,
    pub mobility: MobilityConfig,
    #[serde(default = "default_p_move")]
    pub p_move: f64,
    #[serde(default)]
    pub n_ues: Option<u32>,
    /// Number of handovers to generate, or to keep from a trace.
    #[serde(default)]
    pub n_events: Option<u64>,
    pub regions: RegionsConfig,
    #[serde(default)]
    pub init_policy: InitPolicy,
    #[serde(default)]
    pub agent: AgentParams,
    #[serde(default)]
    pub cost_model: SignalingCostModel,
    #[serde(default)]
    pub scale_events: Vec<ScaleEvent>,
    #[serde(default)]
    pub mode: AlgorithmMode,
    #[serde(default)]
    pub seed: u64,
    /// Events per metrics window.
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub message_log: bool,
    #[serde(default = "default_tol")]
    pub convergence_tol: f64,
    /// Solve the min-cut oracle on the realized flow after the run.
    #[serde(default)]
    pub oracle: bool,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Scenario {
    /// Parses a scenario document. Unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Scenario, EngineError> {
        serde_json::from_str(text).map_err(|e| EngineError::Config {
            field: None,
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Scenario, EngineError> {
        let text = std::fs::read_to_string(path).map_err(|e| EngineError::Io(format!("{}: {e}", path.display())))?;
        let mut s = Scenario::from_json(&text)?;
        s.base_dir = path.parent().map(Path::to_path_buf);
        Ok(s)
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }

    pub fn topology_spec(&self) -> Result<TopologySpec, EngineError> {
        Ok(match &self.topology {
            TopologyConfig::Grid { width, height } => TopologySpec::Grid {
                width: *width,
                height: *height,
            },
            TopologyConfig::Community {
                n_communities,
                cells_per_community,
                inter_edges,
            } => TopologySpec::Community {
                n_communities: *n_communities,
                cells_per_community: *cells_per_community,
                inter_edges: *inter_edges,
            },
            TopologyConfig::Explicit { n_cells, edges } => TopologySpec::Explicit {
                n_cells: *n_cells,
                edges: edges.clone(),
            },
            TopologyConfig::File { path } => {
                let full = self.resolve(path);
                let text =
                    std::fs::read_to_string(&full).map_err(|e| EngineError::Io(format!("{}: {e}", full.display())))?;
                TopologySpec::from_text(&text)?
            }
        })
    }

    pub fn mobility_model(&self) -> Option<MobilityModel> {
        match self.mobility {
            MobilityConfig::RandomWalk => Some(MobilityModel::RandomWalk),
            MobilityConfig::CommunityFlow { q } => Some(MobilityModel::CommunityFlow { q }),
            MobilityConfig::Trace { .. } => None,
        }
    }

    /// Checks everything that can be checked without building the topology.
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |field: &str, message: String| {
            Err(EngineError::Config {
                field: Some(field.to_string()),
                message,
            })
        };
        if !(0.0..=1.0).contains(&self.p_x2) {
            return bad("p_x2", format!("{} outside [0, 1]", self.p_x2));
        }
        if !(self.p_move > 0.0 && self.p_move <= 1.0) {
            return bad("p_move", format!("{} outside (0, 1]", self.p_move));
        }
        match self.mobility {
            MobilityConfig::Trace { .. } => {}
            MobilityConfig::CommunityFlow { q } => {
                if !(q > 0.0 && q <= 1.0) {
                    return bad("mobility.q", format!("{q} outside (0, 1]"));
                }
                if !matches!(self.topology, TopologyConfig::Community { .. }) {
                    return bad("mobility", "community_flow needs a community topology".into());
                }
            }
            MobilityConfig::RandomWalk => {}
        }
        if self.mobility_model().is_some() {
            if self.n_ues.unwrap_or(0) == 0 {
                return bad("n_ues", "generated mobility needs at least one UE".into());
            }
            if self.n_events.is_none() {
                return bad("n_events", "generated mobility needs an event count".into());
            }
        }
        if self.regions.count == 0 {
            return bad("regions.count", "at least one region is required".into());
        }
        if !(self.regions.capacity > 0.0 && self.regions.capacity.is_finite()) {
            return bad("regions.capacity", format!("{} must be positive", self.regions.capacity));
        }
        if let Err(m) = self.agent.validate() {
            return bad("agent", m);
        }
        if self.agent.k > self.regions.count {
            return bad("agent.k", format!("k = {} exceeds the {} regions", self.agent.k, self.regions.count));
        }
        if self.init_policy == InitPolicy::Geographic && self.agent.k != 1 {
            return bad("init_policy", "geographic initialization supports k = 1 only".into());
        }
        if let Err(m) = self.cost_model.validate() {
            return bad("cost_model", m);
        }
        if self.window == 0 {
            return bad("window", "must be at least 1".into());
        }
        if !(self.convergence_tol >= 0.0 && self.convergence_tol.is_finite()) {
            return bad("convergence_tol", "must be a finite non-negative number".into());
        }
        let mut live: Vec<RegionId> = (0..self.regions.count).map(RegionId).collect();
        let mut next = self.regions.count;
        let mut last_time = 0;
        for (i, ev) in self.scale_events.iter().enumerate() {
            let field = format!("scale_events[{i}]");
            if ev.time() < last_time {
                return bad(&field, "scale events must be in time order".into());
            }
            last_time = ev.time();
            match *ev {
                ScaleEvent::ScaleUp { capacity, .. } => {
                    if !(capacity > 0.0 && capacity.is_finite()) {
                        return bad(&field, format!("capacity {capacity} must be positive"));
                    }
                    live.push(RegionId(next));
                    next += 1;
                }
                ScaleEvent::ScaleDown { region, .. } => {
                    let Some(pos) = live.iter().position(|&r| r == region) else {
                        return bad(&field, format!("region {region} is not live at time {}", ev.time()));
                    };
                    if live.len() == 1 {
                        return bad(&field, format!("region {region} is the only live region"));
                    }
                    if live.len() as u32 - 1 < self.agent.k {
                        return bad(&field, "fewer than k regions would remain".into());
                    }
                    live.remove(pos);
                }
            }
        }
        Ok(())
    }
}
