use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::assignment::CellAssignment;
use crate::topology::{CellId, RegionId};

use super::{AgentError, AgentParams, CellLoadMode};

/// Where a recorded handover is attributed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CounterSource {
    Region(RegionId),
    /// GUMMEI of a retired or never-seen instance. Decays like any counter
    /// but never contributes to attraction.
    Tombstone,
}

/// Decayed handover-arrival counters per source region.
#[derive(Debug, Clone, PartialEq)]
pub struct AttractionTable {
    counters: BTreeMap<RegionId, f64>,
    tombstone: f64,
    total: f64,
    gamma: f64,
    recorded: u64,
}

impl AttractionTable {
    pub fn new(gamma: f64) -> Self {
        assert!(gamma > 0.0 && gamma <= 1.0, "decay must lie in (0, 1]");
        AttractionTable {
            counters: BTreeMap::new(),
            tombstone: 0.0,
            total: 0.0,
            gamma,
            recorded: 0,
        }
    }

    /// Decays every counter by gamma, then adds one arrival from `source`.
    pub fn record_handover(&mut self, source: CounterSource) {
        if self.gamma < 1.0 {
            for v in self.counters.values_mut() {
                *v *= self.gamma;
            }
            self.tombstone *= self.gamma;
        }
        match source {
            CounterSource::Region(r) => *self.counters.entry(r).or_insert(0.0) += 1.0,
            CounterSource::Tombstone => self.tombstone += 1.0,
        }
        self.total = self.counters.values().sum::<f64>() + self.tombstone;
        self.recorded += 1;
    }

    pub fn counter(&self, region: RegionId) -> f64 {
        self.counters.get(&region).copied().unwrap_or(0.0)
    }

    pub fn counters(&self) -> &BTreeMap<RegionId, f64> {
        &self.counters
    }

    pub fn tombstone(&self) -> f64 {
        self.tombstone
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Handovers recorded since creation (undecayed).
    pub fn recorded(&self) -> u64 {
        self.recorded
    }

    /// Multiplies every counter by `factor`. Used by tests of scale
    /// invariance; the engine never calls it.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut t = self.clone();
        for v in t.counters.values_mut() {
            *v *= factor;
        }
        t.tombstone *= factor;
        t.total *= factor;
        t
    }

    /// Builds a table from explicit counter values.
    pub fn from_counters(gamma: f64, counters: impl IntoIterator<Item = (RegionId, f64)>) -> Self {
        let mut t = AttractionTable::new(gamma);
        for (r, v) in counters {
            assert!(v >= 0.0, "counters are non-negative");
            t.counters.insert(r, v);
        }
        t.total = t.counters.values().sum();
        t
    }
}

/// Normalized attraction toward each live region.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AttractionVector {
    values: BTreeMap<RegionId, f64>,
}

impl AttractionVector {
    pub fn get(&self, region: RegionId) -> f64 {
        self.values.get(&region).copied().unwrap_or(0.0)
    }

    pub fn values(&self) -> &BTreeMap<RegionId, f64> {
        &self.values
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Regions by attraction descending, ties by ascending id.
    pub fn ranked(&self) -> Vec<RegionId> {
        let mut order: Vec<RegionId> = self.values.keys().copied().collect();
        order.sort_by(|&a, &b| by_attraction_desc(self, a, b));
        order
    }
}

fn by_attraction_desc(att: &AttractionVector, a: RegionId, b: RegionId) -> Ordering {
    att.get(b).total_cmp(&att.get(a)).then(a.cmp(&b))
}

/// Share of the counted arrivals that came from each live region. Counters
/// of regions outside `live` are ignored.
pub fn attraction(table: &AttractionTable, live: &[RegionId]) -> Result<AttractionVector, AgentError> {
    let denom: f64 = live.iter().map(|&r| table.counter(r)).sum();
    if denom <= 0.0 {
        return Err(AgentError::NoData);
    }
    Ok(AttractionVector {
        values: live.iter().map(|&r| (r, table.counter(r) / denom)).collect(),
    })
}

/// An assignment request a cell sends to `target`, carrying its attraction
/// toward it. `displaced` is the current region it would replace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssignmentRequest {
    pub target: RegionId,
    pub attraction: f64,
    pub displaced: Option<RegionId>,
}

/// State owned by one cell agent.
#[derive(Debug, Clone, PartialEq)]
pub struct CellAgentState {
    pub cell: CellId,
    pub table: AttractionTable,
    pub k: usize,
    pub epsilon: f64,
    pub current: Option<CellAssignment>,
    load_mode: CellLoadMode,
}

impl CellAgentState {
    pub fn new(cell: CellId, params: &AgentParams) -> Self {
        CellAgentState {
            cell,
            table: AttractionTable::new(params.gamma),
            k: params.k as usize,
            epsilon: params.epsilon,
            current: None,
            load_mode: params.cell_load,
        }
    }

    pub fn record_handover(&mut self, source: CounterSource) {
        self.table.record_handover(source);
    }

    pub fn attraction(&self, live: &[RegionId]) -> Result<AttractionVector, AgentError> {
        attraction(&self.table, live)
    }

    /// Attraction toward one region, 0 when there is no data yet.
    pub fn attraction_toward(&self, region: RegionId, live: &[RegionId]) -> f64 {
        self.attraction(live).map(|a| a.get(region)).unwrap_or(0.0)
    }

    pub fn load(&self) -> f64 {
        match self.load_mode {
            CellLoadMode::Uniform => 1.0,
            CellLoadMode::ArrivalRate => self.table.total(),
        }
    }

    pub fn current_regions(&self) -> &[RegionId] {
        self.current.as_ref().map(CellAssignment::regions).unwrap_or(&[])
    }

    /// Requests toward the top-k regions the cell is not yet managed by.
    /// Each new target is paired with the weakest remaining current region
    /// and requested only if it beats it by at least epsilon.
    pub fn make_assignment_decision(&self, live: &[RegionId]) -> Vec<AssignmentRequest> {
        let Ok(att) = self.attraction(live) else {
            return Vec::new();
        };
        let ranked = att.ranked();
        let top: Vec<RegionId> = ranked.iter().copied().take(self.k).collect();
        let current = self.current_regions();
        let mut wanted: Vec<RegionId> = top.iter().copied().filter(|r| !current.contains(r)).collect();
        if wanted.is_empty() {
            return Vec::new();
        }
        wanted.sort_by(|&a, &b| by_attraction_desc(&att, a, b));
        let mut leaving: Vec<RegionId> = current.iter().copied().filter(|r| !top.contains(r)).collect();
        // weakest first
        leaving.sort_by(|&a, &b| by_attraction_desc(&att, b, a));
        let spare_slots = self.k.saturating_sub(current.len());
        let mut requests = Vec::new();
        let mut leaving = leaving.into_iter();
        for (i, target) in wanted.into_iter().enumerate() {
            let displaced = if i < spare_slots { None } else { leaving.next() };
            let baseline = displaced.map(|d| att.get(d)).unwrap_or(0.0);
            if att.get(target) - baseline >= self.epsilon {
                requests.push(AssignmentRequest {
                    target,
                    attraction: att.get(target),
                    displaced,
                });
            }
        }
        requests
    }

    /// Candidate regions after being asked to leave `excluded`: positive
    /// attraction first (descending), then the rest by ascending load and id.
    pub fn make_reassignment(
        &self,
        excluded: RegionId,
        live: &[RegionId],
        loads: &BTreeMap<RegionId, f64>,
    ) -> Result<Vec<RegionId>, AgentError> {
        let att = self.attraction(live).unwrap_or_default();
        let mut candidates: Vec<RegionId> = live.iter().copied().filter(|&r| r != excluded).collect();
        if candidates.is_empty() {
            return Err(AgentError::NoCandidate(excluded));
        }
        let load = |r: RegionId| loads.get(&r).copied().unwrap_or(0.0);
        candidates.sort_by(|&a, &b| {
            let (aa, ab) = (att.get(a), att.get(b));
            match (aa > 0.0, ab > 0.0) {
                (true, true) => ab.total_cmp(&aa).then(a.cmp(&b)),
                (true, false) => Ordering::Less,
                (false, true) => Ordering::Greater,
                (false, false) => load(a).total_cmp(&load(b)).then(a.cmp(&b)),
            }
        });
        Ok(candidates)
    }

    /// Member of `regions` with the highest attraction, ties by ascending id.
    pub fn choose_primary(&self, regions: &[RegionId], live: &[RegionId]) -> RegionId {
        let att = self.attraction(live).unwrap_or_default();
        *regions
            .iter()
            .min_by(|&&a, &&b| by_attraction_desc(&att, a, b))
            .expect("a cell always keeps at least one region")
    }
}
