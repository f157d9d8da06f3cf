use std::collections::{BTreeMap, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{AgentParams, AssignmentDecision, CellAgentState, CounterSource, MmeState};
use crate::assignment::{AssignmentState, CellAssignment, RegionDirectory};
use crate::evaluation::{static_partition, AssignmentTimeline, EventRecord, TimelineChange, TimelineEntry};
use crate::mobility::HandoverEvent;
use crate::protocol::{
    classify_handover, derive_source_region, Guti, HandoverClass, HandoverRequestMsg, MessageKind, MessageRecord,
    ProtocolError, SignalingCostModel, SourceEvidence, TauRequestMsg, UeHistory,
};
use crate::topology::{CellId, RegionId, Topology};

use super::{AlgorithmMode, EngineError, InitPolicy, ScaleEvent};

/// Something the engine noticed that did not stop the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diagnostic {
    /// Every candidate rejected the cell and the fallback region had no room.
    ForcedAssignment {
        event_index: usize,
        cell: CellId,
        region: RegionId,
        load: f64,
        capacity: f64,
    },
    /// Every candidate rejected the cell; the fallback region had room.
    FallbackAssignment {
        event_index: usize,
        cell: CellId,
        region: RegionId,
    },
    AgentError {
        event_index: usize,
        message: String,
    },
}

/// Running totals over the whole run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub x2: u64,
    pub s1_intra: u64,
    pub s1_inter: u64,
    pub ho_req: u64,
    pub tau_req: u64,
    pub handover_signaling: u64,
    pub assignment_messages: u64,
    /// Region changes of cells (joins after the initial placement).
    pub moves: u64,
    pub evictions: u64,
    pub forced: u64,
    pub fallback: u64,
}

/// What an engine leaves behind once its events are exhausted.
#[derive(Debug, Clone)]
pub struct EngineParts {
    pub assignment: AssignmentState,
    pub records: Vec<EventRecord>,
    pub timeline: AssignmentTimeline,
    pub diagnostics: Vec<Diagnostic>,
    pub messages: Option<Vec<MessageRecord>>,
    pub totals: Totals,
}

/// Outcome of one handover event.
#[derive(Debug, Clone, PartialEq)]
pub struct EventOutcome {
    pub class: HandoverClass,
    pub assignment_messages: u64,
}

/// Slots a region offers under uniform unit loads.
fn slots(capacity: f64) -> usize {
    capacity.ceil() as usize
}

/// Initial association of every cell with `k` live regions.
pub fn init_assignment(
    policy: InitPolicy,
    topology: &Topology,
    directory: &RegionDirectory,
    k: usize,
    rng: &mut impl Rng,
) -> Result<AssignmentState, EngineError> {
    let n = topology.n_cells();
    let regions: Vec<(RegionId, usize)> = directory.live_with_capacity().map(|(r, c)| (r, slots(c))).collect();
    let available: usize = regions.iter().map(|&(_, s)| s).sum();
    if available < k * n || regions.len() < k {
        return Err(EngineError::InsufficientCapacity { needed: k * n, available });
    }
    let mut members: Vec<Vec<RegionId>> = vec![Vec::new(); n];
    let mut counts = vec![0usize; regions.len()];
    match policy {
        InitPolicy::Random => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(rng);
            let mut slot = 0;
            for _ in 0..k {
                for &cell in &order {
                    let mut tried = 0;
                    while counts[slot] >= regions[slot].1 || members[cell].contains(&regions[slot].0) {
                        slot = (slot + 1) % regions.len();
                        tried += 1;
                        if tried > regions.len() {
                            return Err(EngineError::InsufficientCapacity { needed: k * n, available });
                        }
                    }
                    counts[slot] += 1;
                    members[cell].push(regions[slot].0);
                    slot = (slot + 1) % regions.len();
                }
            }
        }
        InitPolicy::NeighborMajority => {
            for cell in topology.cells() {
                let mut votes = vec![0usize; regions.len()];
                for &nb in topology.neighbors(cell)? {
                    if let Some(&first) = members[nb.index()].first() {
                        let idx = regions.iter().position(|&(r, _)| r == first).expect("live region");
                        votes[idx] += 1;
                    }
                }
                let c = cell.index();
                for _ in 0..k {
                    let open = |i: usize| counts[i] < regions[i].1 && !members[c].contains(&regions[i].0);
                    let majority = (0..regions.len())
                        .filter(|&i| votes[i] > 0 && open(i))
                        .max_by(|&a, &b| votes[a].cmp(&votes[b]).then(b.cmp(&a)));
                    let pick = match majority {
                        Some(i) => i,
                        None => {
                            let open_slots: Vec<usize> = (0..regions.len()).filter(|&i| open(i)).collect();
                            *open_slots.choose(rng).ok_or(EngineError::InsufficientCapacity { needed: k * n, available })?
                        }
                    };
                    counts[pick] += 1;
                    members[c].push(regions[pick].0);
                }
            }
        }
        InitPolicy::Geographic => {
            let cap = regions.iter().map(|&(_, s)| s).min().unwrap_or(0);
            let p = static_partition(topology, regions.len(), cap)
                .map_err(|_| EngineError::InsufficientCapacity { needed: n, available: cap * regions.len() })?;
            for (cell, r) in p.region_of.iter().enumerate() {
                members[cell].push(regions[r.0 as usize].0);
            }
        }
    }
    let mut state = AssignmentState::unassigned(n);
    for (cell, regs) in members.into_iter().enumerate() {
        let primary = regs[0];
        state.set(CellId(cell as u32), CellAssignment::new(regs, primary));
    }
    Ok(state)
}

/// The discrete-event core: every agent, the directory and the logs.
#[derive(Debug, Clone)]
pub struct Engine {
    topology: Topology,
    params: AgentParams,
    cost: SignalingCostModel,
    mode: AlgorithmMode,
    directory: RegionDirectory,
    assignment: AssignmentState,
    cells: Vec<CellAgentState>,
    mmes: BTreeMap<RegionId, MmeState>,
    histories: Vec<Option<UeHistory>>,
    event_index: usize,
    pending_messages: u64,
    records: Vec<EventRecord>,
    timeline: AssignmentTimeline,
    diagnostics: Vec<Diagnostic>,
    messages: Option<Vec<MessageRecord>>,
    totals: Totals,
}

impl Engine {
    /// Builds agents around a complete initial assignment over the live
    /// regions of `directory`.
    pub fn new(
        topology: Topology,
        directory: RegionDirectory,
        initial: AssignmentState,
        params: AgentParams,
        cost: SignalingCostModel,
        mode: AlgorithmMode,
        message_log: bool,
    ) -> Result<Engine, EngineError> {
        let n = topology.n_cells();
        if initial.n_cells() != n || !initial.is_complete() {
            return Err(EngineError::Config {
                field: Some("initial assignment".into()),
                message: "must assign every cell".into(),
            });
        }
        let mut mmes: BTreeMap<RegionId, MmeState> = directory
            .live_with_capacity()
            .map(|(r, c)| (r, MmeState::new(r, c, params.delta)))
            .collect();
        let mut cells = Vec::with_capacity(n);
        let mut initial_regions = Vec::with_capacity(n);
        for (cell, a) in initial.iter() {
            let a = a.expect("checked complete");
            let mut agent = CellAgentState::new(cell, &params);
            for &r in a.regions() {
                let mme = mmes.get_mut(&r).ok_or(EngineError::Config {
                    field: Some("initial assignment".into()),
                    message: format!("cell {cell} uses region {r}, which is not live"),
                })?;
                mme.force_assign(cell, agent.load(), 0.0).map_err(|e| EngineError::Config {
                    field: Some("initial assignment".into()),
                    message: e.to_string(),
                })?;
            }
            agent.current = Some(a.clone());
            initial_regions.push(a.regions().to_vec());
            cells.push(agent);
        }
        let timeline = AssignmentTimeline {
            initial: initial_regions,
            initial_live: directory.live(),
            entries: Vec::new(),
        };
        Ok(Engine {
            topology,
            params,
            cost,
            mode,
            directory,
            assignment: initial,
            cells,
            mmes,
            histories: Vec::new(),
            event_index: 0,
            pending_messages: 0,
            records: Vec::new(),
            timeline,
            diagnostics: Vec::new(),
            messages: message_log.then(Vec::new),
            totals: Totals::default(),
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn directory(&self) -> &RegionDirectory {
        &self.directory
    }

    pub fn assignment(&self) -> &AssignmentState {
        &self.assignment
    }

    pub fn cell(&self, cell: CellId) -> &CellAgentState {
        &self.cells[cell.index()]
    }

    pub fn mme(&self, region: RegionId) -> Option<&MmeState> {
        self.mmes.get(&region)
    }

    pub fn mode(&self) -> AlgorithmMode {
        self.mode
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn timeline(&self) -> &AssignmentTimeline {
        &self.timeline
    }

    pub fn diagnostics(&self) -> &[Diagnostic] {
        &self.diagnostics
    }

    pub fn messages(&self) -> Option<&[MessageRecord]> {
        self.messages.as_deref()
    }

    pub fn totals(&self) -> &Totals {
        &self.totals
    }

    /// Number of handover events processed so far.
    pub fn events_processed(&self) -> usize {
        self.event_index
    }

    /// Cells managed by each live region.
    pub fn region_loads(&self) -> BTreeMap<RegionId, f64> {
        self.mmes.iter().map(|(&r, m)| (r, m.load())).collect()
    }

    pub fn into_parts(self) -> EngineParts {
        EngineParts {
            assignment: self.assignment,
            records: self.records,
            timeline: self.timeline,
            diagnostics: self.diagnostics,
            messages: self.messages,
            totals: self.totals,
        }
    }

    fn log(&mut self, rec: impl FnOnce() -> MessageRecord) {
        if let Some(m) = self.messages.as_mut() {
            m.push(rec());
        }
    }

    fn note_error(&mut self, message: String) {
        self.diagnostics.push(Diagnostic::AgentError {
            event_index: self.event_index,
            message,
        });
    }

    fn time(&self) -> u64 {
        self.event_index as u64
    }

    /// Processes one handover to completion.
    pub fn process_event(&mut self, ev: &HandoverEvent) -> Result<EventOutcome, EngineError> {
        let (src, tgt) = (ev.source, ev.target);
        if !self.topology.is_adjacent(src, tgt) {
            return Err(EngineError::InvalidEvent(format!(
                "handover {src} -> {tgt} at time {} is not between neighbors",
                ev.time
            )));
        }
        let class = classify_handover(src, tgt, &self.assignment, &self.topology)?;
        let time = ev.time;

        // (2) messages the handover carries
        let ue = ev.ue;
        if self.histories.len() <= ue.0 as usize {
            self.histories.resize(ue.0 as usize + 1, None);
        }
        let history = match self.histories[ue.0 as usize].take() {
            Some(h) if h.latest() == Some(src) => h,
            _ => UeHistory::starting_at(src),
        };
        let ho = HandoverRequestMsg::new(ue, src, tgt, history.clone())?;
        let src_region = self.assignment.primary(src).expect("classified cells are assigned");
        let tgt_region = self.assignment.primary(tgt).expect("classified cells are assigned");
        self.log(|| MessageRecord {
            time,
            kind: MessageKind::HoReq,
            ue: Some(ue),
            source: Some(src),
            target: Some(tgt),
            source_region: Some(src_region),
            target_region: Some(tgt_region),
            class: class.as_str(),
        });
        let tau = class.is_inter_region().then(|| TauRequestMsg {
            ue,
            old_guti: Guti::new(src_region, ue.0),
            cell: tgt,
        });
        if tau.is_some() {
            self.log(|| MessageRecord {
                time,
                kind: MessageKind::TauReq,
                ue: Some(ue),
                source: Some(src),
                target: Some(tgt),
                source_region: Some(src_region),
                target_region: Some(tgt_region),
                class: class.as_str(),
            });
        }

        // (3) the target cell counts where the UE came from
        let evidence = match &tau {
            Some(t) => SourceEvidence::Tau(t),
            None => SourceEvidence::Handover(&ho),
        };
        let source = match derive_source_region(evidence, &self.assignment, &self.directory) {
            Ok(r) => CounterSource::Region(r),
            Err(ProtocolError::RetiredRegion(_)) => CounterSource::Tombstone,
            Err(e) => return Err(e.into()),
        };
        self.cells[tgt.index()].record_handover(source);
        let mut history = history;
        history.push(tgt);
        self.histories[ue.0 as usize] = Some(history);

        let mut msgs = std::mem::take(&mut self.pending_messages);
        if self.params.cell_load == crate::agents::CellLoadMode::ArrivalRate {
            let load = self.cells[tgt.index()].load();
            for &r in self.cells[tgt.index()].current_regions().to_vec().iter() {
                if let Some(m) = self.mmes.get_mut(&r) {
                    let _ = m.refresh_load(tgt, load);
                }
            }
        }

        if self.mode == AlgorithmMode::Active {
            msgs += self.maybe_refresh(tgt);
            // (4) and (5)
            msgs += self.decide(tgt);
        }

        // (6)
        let t = &mut self.totals;
        match class {
            HandoverClass::X2 => t.x2 += 1,
            HandoverClass::S1IntraRegion => t.s1_intra += 1,
            HandoverClass::S1InterRegion => t.s1_inter += 1,
        }
        t.ho_req += 1;
        t.tau_req += u64::from(class.is_inter_region());
        t.handover_signaling += u64::from(self.cost.signaling_cost(class));
        t.assignment_messages += msgs;
        self.records.push(EventRecord {
            time,
            class,
            assignment_messages: msgs,
        });
        self.event_index += 1;
        Ok(EventOutcome {
            class,
            assignment_messages: msgs,
        })
    }

    /// Periodic attraction report from a cell to each of its regions.
    fn maybe_refresh(&mut self, cell: CellId) -> u64 {
        let agent = &self.cells[cell.index()];
        if !agent.table.recorded().is_multiple_of(self.params.refresh_interval) {
            return 0;
        }
        let live = self.directory.live();
        let Ok(att) = agent.attraction(&live) else { return 0 };
        let regions = agent.current_regions().to_vec();
        let time = self.time();
        let mut sent = 0;
        for r in regions {
            if let Some(m) = self.mmes.get_mut(&r) {
                if m.refresh_attraction(cell, att.get(r)).is_ok() {
                    sent += 1;
                    self.log(|| MessageRecord {
                        time,
                        kind: MessageKind::AssignReq,
                        ue: None,
                        source: Some(cell),
                        target: None,
                        source_region: None,
                        target_region: Some(r),
                        class: "REFRESH",
                    });
                }
            }
        }
        sent
    }

    fn exchange(&mut self, cell: CellId, region: RegionId, outcome: &'static str) -> u64 {
        let time = self.time();
        let current = self.assignment.primary(cell);
        self.log(|| MessageRecord {
            time,
            kind: MessageKind::AssignReq,
            ue: None,
            source: Some(cell),
            target: None,
            source_region: current,
            target_region: Some(region),
            class: "ASSIGN",
        });
        self.log(|| MessageRecord {
            time,
            kind: MessageKind::AssignRsp,
            ue: None,
            source: Some(cell),
            target: None,
            source_region: current,
            target_region: Some(region),
            class: outcome,
        });
        u64::from(self.cost.msgs_assignment_change)
    }

    /// Cell assignment decision and delivery of its requests.
    fn decide(&mut self, cell: CellId) -> u64 {
        let live = self.directory.live();
        let requests = self.cells[cell.index()].make_assignment_decision(&live);
        let mut msgs = 0;
        for req in requests {
            let load = self.cells[cell.index()].load();
            let Some(mme) = self.mmes.get_mut(&req.target) else { continue };
            let decision = mme.handle_assignment_request(cell, load, req.attraction);
            let outcome = match &decision {
                Ok(AssignmentDecision::Accept) => "ACCEPT",
                Ok(AssignmentDecision::AcceptWithEviction(_)) => "ACCEPT_EVICT",
                Ok(AssignmentDecision::Reject) => "REJECT",
                Err(_) => "ERROR",
            };
            msgs += self.exchange(cell, req.target, outcome);
            match decision {
                Ok(AssignmentDecision::Accept) => {
                    self.switch(cell, req.displaced, req.target);
                }
                Ok(AssignmentDecision::AcceptWithEviction(evicted)) => {
                    self.switch(cell, req.displaced, req.target);
                    msgs += self.evict(evicted, req.target);
                }
                Ok(AssignmentDecision::Reject) => {}
                Err(e) => self.note_error(e.to_string()),
            }
        }
        msgs
    }

    /// Moves `cell` out of `from` (if any) and records its new membership,
    /// which already includes `to` on the MME side.
    fn switch(&mut self, cell: CellId, from: Option<RegionId>, to: RegionId) {
        let mut regions = self.cells[cell.index()].current_regions().to_vec();
        if let Some(f) = from {
            if let Some(m) = self.mmes.get_mut(&f) {
                let _ = m.remove(cell);
            }
            regions.retain(|&r| r != f);
        }
        regions.push(to);
        self.set_regions(cell, regions);
        self.totals.moves += 1;
    }

    fn set_regions(&mut self, cell: CellId, regions: Vec<RegionId>) {
        let live = self.directory.live();
        let primary = self.cells[cell.index()].choose_primary(&regions, &live);
        let a = CellAssignment::new(regions, primary);
        self.timeline.entries.push(TimelineEntry {
            event_index: self.event_index,
            change: TimelineChange::Assign {
                cell,
                regions: a.regions().to_vec(),
            },
        });
        self.cells[cell.index()].current = Some(a.clone());
        self.assignment.set(cell, a);
    }

    /// Drops `region` from a cell's membership without touching the MME.
    fn drop_region(&mut self, cell: CellId, region: RegionId) -> Vec<RegionId> {
        let mut regions = self.cells[cell.index()].current_regions().to_vec();
        regions.retain(|&r| r != region);
        regions
    }

    /// The MME of `region` has already removed `cell`; find it a new home.
    fn evict(&mut self, cell: CellId, region: RegionId) -> u64 {
        self.totals.evictions += 1;
        let time = self.time();
        self.log(|| MessageRecord {
            time,
            kind: MessageKind::ReassignReq,
            ue: None,
            source: Some(cell),
            target: None,
            source_region: Some(region),
            target_region: None,
            class: "EVICT",
        });
        1 + self.reassign_walk(cell, region)
    }

    /// Reassignment of `cell` away from `excluded`, following evictions it
    /// causes until every displaced cell is placed. At most `|live|`
    /// requests are made in total before the fallback takes over.
    fn reassign_walk(&mut self, cell: CellId, excluded: RegionId) -> u64 {
        let mut budget = self.directory.n_live();
        let mut msgs = 0;
        let mut queue = VecDeque::from([(cell, excluded)]);
        while let Some((c, x)) = queue.pop_front() {
            let remaining = self.drop_region(c, x);
            let live = self.directory.live();
            let loads = self.region_loads();
            let candidates = match self.cells[c.index()].make_reassignment(x, &live, &loads) {
                Ok(list) => list,
                Err(e) => {
                    self.note_error(e.to_string());
                    Vec::new()
                }
            };
            let mut placed = false;
            for r in candidates {
                if remaining.contains(&r) {
                    continue;
                }
                if budget == 0 {
                    break;
                }
                budget -= 1;
                let a = self.cells[c.index()].attraction_toward(r, &live);
                let load = self.cells[c.index()].load();
                let decision = self.mmes.get_mut(&r).expect("live region").handle_assignment_request(c, load, a);
                let outcome = match &decision {
                    Ok(AssignmentDecision::Accept) => "ACCEPT",
                    Ok(AssignmentDecision::AcceptWithEviction(_)) => "ACCEPT_EVICT",
                    Ok(AssignmentDecision::Reject) => "REJECT",
                    Err(_) => "ERROR",
                };
                msgs += self.exchange(c, r, outcome);
                match decision {
                    Ok(AssignmentDecision::Accept) => {
                        placed = true;
                    }
                    Ok(AssignmentDecision::AcceptWithEviction(e)) => {
                        placed = true;
                        self.totals.evictions += 1;
                        msgs += 1;
                        let time = self.time();
                        self.log(|| MessageRecord {
                            time,
                            kind: MessageKind::ReassignReq,
                            ue: None,
                            source: Some(e),
                            target: None,
                            source_region: Some(r),
                            target_region: None,
                            class: "EVICT",
                        });
                        queue.push_back((e, r));
                    }
                    Ok(AssignmentDecision::Reject) => {}
                    Err(err) => self.note_error(err.to_string()),
                }
                if placed {
                    let mut regions = remaining.clone();
                    regions.push(r);
                    self.set_regions(c, regions);
                    self.totals.moves += 1;
                    break;
                }
            }
            if !placed {
                msgs += self.fallback(c, remaining);
            }
        }
        msgs
    }

    /// Places a cell nobody accepted in the live region with the lowest
    /// load, ties by id.
    fn fallback(&mut self, cell: CellId, remaining: Vec<RegionId>) -> u64 {
        let (region, _) = self
            .mmes
            .iter()
            .filter(|(r, _)| !remaining.contains(r))
            .map(|(&r, m)| (r, m.load()))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("at least k live regions");
        let live = self.directory.live();
        let a = self.cells[cell.index()].attraction_toward(region, &live);
        let load = self.cells[cell.index()].load();
        let mme = self.mmes.get_mut(&region).expect("live region");
        mme.force_assign(cell, load, a).expect("cell was removed before reassignment");
        let (after, capacity) = (mme.load(), mme.capacity());
        if after > capacity {
            self.totals.forced += 1;
            self.diagnostics.push(Diagnostic::ForcedAssignment {
                event_index: self.event_index,
                cell,
                region,
                load: after,
                capacity,
            });
        } else {
            self.totals.fallback += 1;
            self.diagnostics.push(Diagnostic::FallbackAssignment {
                event_index: self.event_index,
                cell,
                region,
            });
        }
        let mut regions = remaining;
        regions.push(region);
        self.set_regions(cell, regions);
        self.totals.moves += 1;
        self.exchange(cell, region, if after > capacity { "FORCED" } else { "FALLBACK" })
    }

    /// Applies a scale event before the next handover.
    pub fn apply_scale_event(&mut self, ev: &ScaleEvent) -> Result<(), EngineError> {
        match *ev {
            ScaleEvent::ScaleUp { capacity, .. } => {
                let r = self.directory.add(capacity)?;
                self.mmes.insert(r, MmeState::new(r, capacity, self.params.delta));
                self.timeline.entries.push(TimelineEntry {
                    event_index: self.event_index,
                    change: TimelineChange::RegionAdded(r),
                });
            }
            ScaleEvent::ScaleDown { region, .. } => {
                self.directory.retire(region)?;
                let mme = self.mmes.remove(&region).expect("live region has an MME");
                self.timeline.entries.push(TimelineEntry {
                    event_index: self.event_index,
                    change: TimelineChange::RegionRetired(region),
                });
                let time = self.time();
                let mut msgs = 0;
                for cell in mme.cells() {
                    msgs += 1;
                    self.log(|| MessageRecord {
                        time,
                        kind: MessageKind::ReassignReq,
                        ue: None,
                        source: Some(cell),
                        target: None,
                        source_region: Some(region),
                        target_region: None,
                        class: "SCALE_DOWN",
                    });
                    msgs += self.reassign_walk(cell, region);
                }
                self.pending_messages += msgs;
            }
        }
        Ok(())
    }

    /// Messages from scale events after the last handover, not yet attached
    /// to any event.
    pub fn flush_pending(&mut self) -> u64 {
        let m = std::mem::take(&mut self.pending_messages);
        self.totals.assignment_messages += m;
        m
    }

    /// Checks the between-event invariants.
    pub fn check_invariants(&self) -> Result<(), String> {
        let k = self.params.k as usize;
        let mut per_region: BTreeMap<RegionId, usize> = BTreeMap::new();
        for (cell, a) in self.assignment.iter() {
            let a = a.ok_or(format!("cell {cell} unassigned"))?;
            if self.directory.n_live() >= k && a.regions().len() != k {
                return Err(format!("cell {cell} has {} regions", a.regions().len()));
            }
            if !self.directory.is_live(a.primary()) {
                return Err(format!("cell {cell} has retired primary {}", a.primary()));
            }
            if self.cells[cell.index()].current.as_ref() != Some(a) {
                return Err(format!("cell {cell} agent disagrees with the assignment"));
            }
            for &r in a.regions() {
                *per_region.entry(r).or_insert(0) += 1;
                if !self.mmes.get(&r).is_some_and(|m| m.contains(cell)) {
                    return Err(format!("region {r} does not list cell {cell}"));
                }
            }
        }
        for (r, m) in &self.mmes {
            if m.n_cells() != per_region.get(r).copied().unwrap_or(0) {
                return Err(format!("region {r} lists {} cells", m.n_cells()));
            }
        }
        Ok(())
    }
}
