//! Deterministic event loop driving both agent roles over a handover stream.

mod scenario;
mod state;

pub use scenario::{
    AlgorithmMode, InitPolicy, MobilityConfig, RegionsConfig, ScaleEvent, Scenario, TopologyConfig,
};
pub use state::{init_assignment, Diagnostic, Engine, EngineParts, EventOutcome, Totals};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{AssignmentState, DirectoryError, RegionDirectory};
use crate::evaluation::{
    compute_window_metrics, convergence_time, oracle_partition, pooled_ratio, steady_state_windows, AssignmentTimeline,
    EventRecord, OracleMode, WindowMetrics,
};
use crate::mobility::{flow_matrix, load_trace, FlowMatrix, HandoverEvent, Mobility, MobilityError};
use crate::protocol::{MessageRecord, ProtocolError};
use crate::topology::{build_topology, RegionId, Topology, TopologyError};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("{}{message}", field.as_ref().map(|f| format!("{f}: ")).unwrap_or_default())]
    Config { field: Option<String>, message: String },
    #[error("topology: {0}")]
    Topology(#[from] TopologyError),
    #[error("mobility: {0}")]
    Mobility(#[from] MobilityError),
    #[error("regions hold {available} cell slots but {needed} are needed")]
    InsufficientCapacity { needed: usize, available: usize },
    #[error("directory: {0}")]
    Directory(#[from] DirectoryError),
    #[error("protocol: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("invalid event: {0}")]
    InvalidEvent(String),
    #[error("{0}")]
    Io(String),
}

impl EngineError {
    /// True for problems with the scenario itself rather than the run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            EngineError::Config { .. }
                | EngineError::Topology(_)
                | EngineError::Mobility(_)
                | EngineError::InsufficientCapacity { .. }
        )
    }
}

/// Independent random streams derived from one run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Topology = 1,
    Mobility = 2,
    Init = 3,
    Baseline = 4,
}

pub fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Everything a run needs before the first event: graph, events, regions
/// and the initial assignment.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub topology: Topology,
    pub events: Vec<HandoverEvent>,
    pub directory: RegionDirectory,
    pub initial: AssignmentState,
}

pub fn prepare(scenario: &Scenario) -> Result<Prepared, EngineError> {
    scenario.validate()?;
    let spec = scenario.topology_spec()?;
    let topology = build_topology(&spec, scenario.p_x2, &mut substream(scenario.seed, Stream::Topology))?;
    let events = match scenario.mobility_model() {
        Some(model) => {
            let mobility = Mobility::new(model, scenario.p_move)?;
            mobility.generate_handovers(
                &topology,
                scenario.n_ues.unwrap_or(0),
                scenario.n_events.unwrap_or(0),
                &mut substream(scenario.seed, Stream::Mobility),
            )
        }
        None => {
            let MobilityConfig::Trace { path } = &scenario.mobility else { unreachable!() };
            let mut events = load_trace(&scenario.resolve(path), &topology)?;
            if let Some(n) = scenario.n_events {
                events.truncate(n as usize);
            }
            events
        }
    };
    let capacities = vec![scenario.regions.capacity; scenario.regions.count as usize];
    let directory = RegionDirectory::new(&capacities)?;
    let initial = init_assignment(
        scenario.init_policy,
        &topology,
        &directory,
        scenario.agent.k as usize,
        &mut substream(scenario.seed, Stream::Init),
    )?;
    Ok(Prepared {
        topology,
        events,
        directory,
        initial,
    })
}

/// Feeds events and scale events (scale first on equal times) through an
/// engine.
pub fn drive(engine: &mut Engine, events: &[HandoverEvent], scale_events: &[ScaleEvent]) -> Result<(), EngineError> {
    let mut scale = scale_events.iter().peekable();
    for ev in events {
        while let Some(s) = scale.next_if(|s| s.time() <= ev.time) {
            engine.apply_scale_event(s)?;
        }
        engine.process_event(ev)?;
    }
    for s in scale {
        engine.apply_scale_event(s)?;
    }
    engine.flush_pending();
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub x2: u64,
    pub s1_intra: u64,
    pub s1_inter: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalingSummary {
    pub x2: u64,
    pub s1_intra: u64,
    pub s1_inter: u64,
    /// Handover-class messages only.
    pub handover: u64,
    pub assignment: u64,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionLoad {
    pub region: RegionId,
    pub cells: usize,
}

/// Final figures of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub mode: AlgorithmMode,
    pub init_policy: InitPolicy,
    pub n_cells: usize,
    pub n_events: usize,
    pub n_windows: usize,
    /// Inter-region share pooled over the last quarter of the windows.
    pub final_ratio: f64,
    /// Inter-region share over the whole run.
    pub overall_ratio: f64,
    pub convergence_window: Option<usize>,
    pub handovers: ClassCounts,
    pub ho_req: u64,
    pub tau_req: u64,
    pub signaling: SignalingSummary,
    pub moves: u64,
    pub evictions: u64,
    pub forced_assignments: u64,
    pub fallback_assignments: u64,
    pub agent_errors: u64,
    pub final_loads: Vec<RegionLoad>,
    pub retired_regions: Vec<RegionId>,
    /// Minimum cut of the realized flow, when requested and solvable.
    pub oracle_cut: Option<f64>,
    pub oracle_ratio: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub windows: Vec<WindowMetrics>,
    pub records: Vec<EventRecord>,
    pub timeline: AssignmentTimeline,
    pub events: Vec<HandoverEvent>,
    pub flow: FlowMatrix,
    pub topology: Topology,
    pub final_assignment: AssignmentState,
    pub diagnostics: Vec<Diagnostic>,
    pub messages: Option<Vec<MessageRecord>>,
}

pub fn run(scenario: &Scenario) -> Result<RunOutput, EngineError> {
    let prepared = prepare(scenario)?;
    run_prepared(scenario, prepared)
}

/// Runs a scenario from an already prepared state, e.g. one with a pinned
/// initial assignment or a shared event stream.
pub fn run_prepared(scenario: &Scenario, prepared: Prepared) -> Result<RunOutput, EngineError> {
    let Prepared {
        topology,
        events,
        directory,
        initial,
    } = prepared;
    let mut engine = Engine::new(
        topology.clone(),
        directory,
        initial,
        scenario.agent,
        scenario.cost_model,
        scenario.mode,
        scenario.message_log,
    )?;
    drive(&mut engine, &events, &scenario.scale_events)?;
    let live = engine.directory().live();
    let retired: Vec<RegionId> = engine.directory().retired().collect();
    let EngineParts {
        assignment: final_assignment,
        records,
        timeline,
        diagnostics,
        messages,
        totals,
    } = engine.into_parts();

    let windows = compute_window_metrics(&records, &timeline, scenario.window, &scenario.cost_model);
    let ratios: Vec<f64> = windows.iter().map(|w| w.ratio).collect();
    let convergence_window = if ratios.is_empty() {
        None
    } else {
        convergence_time(&ratios, scenario.convergence_tol).ok()
    };
    let flow = flow_matrix(&events, topology.n_cells());
    let (oracle_cut, oracle_ratio) = if scenario.oracle && !events.is_empty() {
        match oracle_partition(
            &flow,
            scenario.regions.count as usize,
            scenario.regions.capacity.ceil() as usize,
            OracleMode::BranchAndBound,
        ) {
            Ok((_, cut)) => (Some(cut), Some(cut / flow.total())),
            Err(_) => (None, None),
        }
    } else {
        (None, None)
    };
    let counts = final_assignment.region_counts();
    let final_loads = live
        .iter()
        .map(|&r| RegionLoad {
            region: r,
            cells: counts.get(&r).copied().unwrap_or(0),
        })
        .collect();
    let handover_total = totals.x2 + totals.s1_intra + totals.s1_inter;
    let cost = &scenario.cost_model;
    let summary = RunSummary {
        seed: scenario.seed,
        mode: scenario.mode,
        init_policy: scenario.init_policy,
        n_cells: topology.n_cells(),
        n_events: events.len(),
        n_windows: windows.len(),
        final_ratio: pooled_ratio(steady_state_windows(&windows)),
        overall_ratio: if handover_total == 0 {
            0.0
        } else {
            totals.s1_inter as f64 / handover_total as f64
        },
        convergence_window,
        handovers: ClassCounts {
            x2: totals.x2,
            s1_intra: totals.s1_intra,
            s1_inter: totals.s1_inter,
        },
        ho_req: totals.ho_req,
        tau_req: totals.tau_req,
        signaling: SignalingSummary {
            x2: totals.x2 * u64::from(cost.msgs_x2),
            s1_intra: totals.s1_intra * u64::from(cost.msgs_s1_intra),
            s1_inter: totals.s1_inter * u64::from(cost.msgs_s1_inter),
            handover: totals.handover_signaling,
            assignment: totals.assignment_messages,
            total: totals.handover_signaling + totals.assignment_messages,
        },
        moves: totals.moves,
        evictions: totals.evictions,
        forced_assignments: totals.forced,
        fallback_assignments: totals.fallback,
        agent_errors: diagnostics
            .iter()
            .filter(|d| matches!(d, Diagnostic::AgentError { .. }))
            .count() as u64,
        final_loads,
        retired_regions: retired,
        oracle_cut,
        oracle_ratio,
    };
    Ok(RunOutput {
        summary,
        windows,
        records,
        timeline,
        events,
        flow,
        topology,
        final_assignment,
        diagnostics,
        messages,
    })
}
