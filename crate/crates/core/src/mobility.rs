//! UE movement: synthetic walkers, trace replay and flow aggregation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{CellId, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UeId(pub u32);

/// A UE crossing from `source` to `target`. `time` is the logical event index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandoverEvent {
    pub time: u64,
    pub ue: UeId,
    pub source: CellId,
    pub target: CellId,
}

#[derive(Debug, Error)]
pub enum MobilityError {
    #[error("trace line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("trace line {line}: cells {source_cell} and {target_cell} are not adjacent")]
    NonAdjacentHandover {
        line: usize,
        source_cell: CellId,
        target_cell: CellId,
    },
    #[error("invalid mobility parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MobilityModel {
    RandomWalk,
    /// On a move, stay inside the community with probability `q`.
    CommunityFlow { q: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Move(CellId),
    Stay,
}

/// A validated synthetic mobility generator configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mobility {
    model: MobilityModel,
    p_move: f64,
}

impl Mobility {
    pub fn new(model: MobilityModel, p_move: f64) -> Result<Self, MobilityError> {
        if !(p_move > 0.0 && p_move <= 1.0) {
            return Err(MobilityError::InvalidParameter(format!(
                "move probability {p_move} outside (0, 1]"
            )));
        }
        if let MobilityModel::CommunityFlow { q } = model {
            if !(q > 0.0 && q <= 1.0) {
                return Err(MobilityError::InvalidParameter(format!(
                    "within-community probability {q} outside (0, 1]"
                )));
            }
        }
        Ok(Mobility { model, p_move })
    }

    pub fn model(&self) -> MobilityModel {
        self.model
    }

    /// One walker step from `current`. Topologies without community labels
    /// treat every neighbor as same-community.
    pub fn step_ue(&self, topology: &Topology, current: CellId, rng: &mut impl Rng) -> Step {
        if !rng.gen_bool(self.p_move) {
            return Step::Stay;
        }
        let neighbors = topology
            .neighbors(current)
            .expect("walker positions are always valid cells");
        let pick = |set: &[CellId], rng: &mut _| *set.choose(rng).expect("connected topology");
        match self.model {
            MobilityModel::RandomWalk => Step::Move(pick(neighbors, rng)),
            MobilityModel::CommunityFlow { q } => {
                let Some(home) = topology.community_of(current) else {
                    return Step::Move(pick(neighbors, rng));
                };
                let (same, cross): (Vec<CellId>, Vec<CellId>) = neighbors
                    .iter()
                    .partition(|&&n| topology.community_of(n) == Some(home));
                let target = match (same.is_empty(), cross.is_empty()) {
                    (false, true) => pick(&same, rng),
                    (true, false) => pick(&cross, rng),
                    _ => {
                        if rng.gen_bool(q) {
                            pick(&same, rng)
                        } else {
                            pick(&cross, rng)
                        }
                    }
                };
                Step::Move(target)
            }
        }
    }

    /// Exactly `n_events` handovers. UEs start uniformly over cells; each tick
    /// steps one uniformly chosen UE and `Stay` outcomes emit nothing.
    pub fn generate_handovers(
        &self,
        topology: &Topology,
        n_ues: u32,
        n_events: u64,
        rng: &mut impl Rng,
    ) -> Vec<HandoverEvent> {
        assert!(n_ues >= 1, "at least one UE is required");
        let n = topology.n_cells() as u32;
        let mut positions: Vec<CellId> = (0..n_ues).map(|_| CellId(rng.gen_range(0..n))).collect();
        let mut events = Vec::with_capacity(n_events as usize);
        while (events.len() as u64) < n_events {
            let ue = rng.gen_range(0..n_ues);
            let source = positions[ue as usize];
            if let Step::Move(target) = self.step_ue(topology, source, rng) {
                events.push(HandoverEvent {
                    time: events.len() as u64,
                    ue: UeId(ue),
                    source,
                    target,
                });
                positions[ue as usize] = target;
            }
        }
        events
    }
}

pub const TRACE_HEADER: &str = "time,ue,source,target";

/// Parses a trace CSV and validates every row against `topology`.
pub fn parse_trace(text: &str, topology: &Topology) -> Result<Vec<HandoverEvent>, MobilityError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRACE_HEADER => {}
        _ => {
            return Err(MobilityError::ParseError {
                line: 1,
                message: format!("expected header `{TRACE_HEADER}`"),
            })
        }
    }
    let mut events = Vec::new();
    let mut last_time = None;
    for (i, raw) in lines {
        let line = i + 1;
        let row = raw.trim();
        if row.is_empty() {
            continue;
        }
        let err = |message: String| MobilityError::ParseError { line, message };
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(err(format!("expected 4 fields, found {}", fields.len())));
        }
        let num = |s: &str| s.parse::<u64>().map_err(|e| err(format!("bad number `{s}`: {e}")));
        let time = num(fields[0])?;
        let ue = num(fields[1])?;
        let source = num(fields[2])?;
        let target = num(fields[3])?;
        if ue > u32::MAX as u64 {
            return Err(err(format!("ue id {ue} out of range")));
        }
        for c in [source, target] {
            if c >= topology.n_cells() as u64 {
                return Err(err(format!("cell {c} outside topology")));
            }
        }
        if source == target {
            return Err(err("source equals target".into()));
        }
        if last_time.is_some_and(|t| time < t) {
            return Err(err(format!("time {time} goes backwards")));
        }
        last_time = Some(time);
        let (source, target) = (CellId(source as u32), CellId(target as u32));
        if !topology.is_adjacent(source, target) {
            return Err(MobilityError::NonAdjacentHandover {
                line,
                source_cell: source,
                target_cell: target,
            });
        }
        events.push(HandoverEvent {
            time,
            ue: UeId(ue as u32),
            source,
            target,
        });
    }
    Ok(events)
}

pub fn load_trace(path: &Path, topology: &Topology) -> Result<Vec<HandoverEvent>, MobilityError> {
    parse_trace(&std::fs::read_to_string(path)?, topology)
}

pub fn write_trace(events: &[HandoverEvent]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for e in events {
        let _ = writeln!(out, "{},{},{},{}", e.time, e.ue.0, e.source, e.target);
    }
    out
}

/// Cell-to-cell handover counts. Stored sparsely; absent entries are zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlowMatrix {
    n_cells: usize,
    counts: BTreeMap<(CellId, CellId), f64>,
}

impl FlowMatrix {
    pub fn zeros(n_cells: usize) -> Self {
        FlowMatrix {
            n_cells,
            counts: BTreeMap::new(),
        }
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn get(&self, from: CellId, to: CellId) -> f64 {
        self.counts.get(&(from, to)).copied().unwrap_or(0.0)
    }

    /// Adds `amount` to `counts[from][to]`. Diagonal entries are refused.
    pub fn add(&mut self, from: CellId, to: CellId, amount: f64) {
        assert!(from != to, "flow matrix has a zero diagonal");
        assert!(from.index() < self.n_cells && to.index() < self.n_cells);
        *self.counts.entry((from, to)).or_insert(0.0) += amount;
    }

    pub fn total(&self) -> f64 {
        self.counts.values().sum()
    }

    /// Non-zero entries in `(from, to)` order.
    pub fn iter(&self) -> impl Iterator<Item = (CellId, CellId, f64)> + '_ {
        self.counts.iter().map(|(&(a, b), &c)| (a, b, c))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("source,target,count\n");
        for (a, b, c) in self.iter() {
            let _ = writeln!(out, "{a},{b},{c}");
        }
        out
    }

    /// Reads `source,target,count` rows. When `n_cells` is `None` the size is
    /// one more than the largest id mentioned.
    pub fn from_csv(text: &str, n_cells: Option<usize>) -> Result<Self, MobilityError> {
        let mut rows = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let row = raw.trim();
            if row.is_empty() || (i == 0 && row == "source,target,count") {
                continue;
            }
            let err = |message: String| MobilityError::ParseError { line, message };
            let f: Vec<&str> = row.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(err(format!("expected 3 fields, found {}", f.len())));
            }
            let a: u32 = f[0].parse().map_err(|e| err(format!("bad source: {e}")))?;
            let b: u32 = f[1].parse().map_err(|e| err(format!("bad target: {e}")))?;
            let c: f64 = f[2].parse().map_err(|e| err(format!("bad count: {e}")))?;
            if a == b {
                return Err(err("diagonal entry".into()));
            }
            if !(c >= 0.0 && c.is_finite()) {
                return Err(err(format!("count {c} must be a finite non-negative number")));
            }
            rows.push((line, a, b, c));
        }
        let inferred = rows.iter().map(|&(_, a, b, _)| a.max(b) as usize + 1).max().unwrap_or(0);
        let n = n_cells.unwrap_or(inferred);
        let mut m = FlowMatrix::zeros(n);
        for (line, a, b, c) in rows {
            if a as usize >= n || b as usize >= n {
                return Err(MobilityError::ParseError {
                    line,
                    message: format!("cell id outside [0, {n})"),
                });
            }
            m.add(CellId(a), CellId(b), c);
        }
        Ok(m)
    }
}

pub fn flow_matrix(events: &[HandoverEvent], n_cells: usize) -> FlowMatrix {
    let mut m = FlowMatrix::zeros(n_cells);
    for e in events {
        m.add(e.source, e.target, 1.0);
    }
    m
}
