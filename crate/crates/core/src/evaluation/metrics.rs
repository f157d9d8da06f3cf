use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{HandoverClass, SignalingCostModel};
use crate::topology::{CellId, RegionId};

pub const METRICS_HEADER: &str = "window,x2,s1_intra,s1_inter,ratio,signaling,assignment_changes,jain,max_load";

/// What the engine logs per handover event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: u64,
    pub class: HandoverClass,
    /// Assignment-change messages triggered while processing the event.
    pub assignment_messages: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimelineChange {
    Assign { cell: CellId, regions: Vec<RegionId> },
    RegionAdded(RegionId),
    RegionRetired(RegionId),
}

/// A change that took effect while processing event `event_index` (or, for
/// scale events, just before it).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub event_index: usize,
    pub change: TimelineChange,
}

/// Initial association plus every later change, in order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AssignmentTimeline {
    pub initial: Vec<Vec<RegionId>>,
    pub initial_live: Vec<RegionId>,
    pub entries: Vec<TimelineEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics {
    pub window: usize,
    pub x2: u64,
    pub s1_intra: u64,
    pub s1_inter: u64,
    pub ratio: f64,
    /// Handover-class signaling only.
    pub signaling: u64,
    pub assignment_changes: u64,
    /// Cells per live region at the end of the window.
    pub loads: Vec<(RegionId, usize)>,
    pub jain: f64,
    pub max_load: usize,
}

impl WindowMetrics {
    pub fn handovers(&self) -> u64 {
        self.x2 + self.s1_intra + self.s1_inter
    }

    pub fn write_csv_row(&self, out: &mut String) {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{},{},{:.6},{}",
            self.window,
            self.x2,
            self.s1_intra,
            self.s1_inter,
            self.ratio,
            self.signaling,
            self.assignment_changes,
            self.jain,
            self.max_load
        );
    }
}

/// Jain fairness index. Equal loads, including all-zero, give 1.
pub fn jain(loads: &[f64]) -> f64 {
    let sum: f64 = loads.iter().sum();
    let sq: f64 = loads.iter().map(|x| x * x).sum();
    if loads.is_empty() || sq == 0.0 {
        return 1.0;
    }
    sum * sum / (loads.len() as f64 * sq)
}

pub fn compute_window_metrics(
    events: &[EventRecord],
    timeline: &AssignmentTimeline,
    window: usize,
    cost: &SignalingCostModel,
) -> Vec<WindowMetrics> {
    assert!(window >= 1, "window must hold at least one event");
    let mut current: Vec<Vec<RegionId>> = timeline.initial.clone();
    let mut live: BTreeSet<RegionId> = timeline.initial_live.iter().copied().collect();
    let mut pending = timeline.entries.iter().peekable();
    let mut out = Vec::new();
    for (w, chunk) in events.chunks(window).enumerate() {
        let end = w * window + chunk.len();
        while let Some(e) = pending.next_if(|e| e.event_index < end) {
            match &e.change {
                TimelineChange::Assign { cell, regions } => current[cell.index()] = regions.clone(),
                TimelineChange::RegionAdded(r) => {
                    live.insert(*r);
                }
                TimelineChange::RegionRetired(r) => {
                    live.remove(r);
                }
            }
        }
        let mut m = WindowMetrics {
            window: w,
            x2: 0,
            s1_intra: 0,
            s1_inter: 0,
            ratio: 0.0,
            signaling: 0,
            assignment_changes: 0,
            loads: Vec::new(),
            jain: 1.0,
            max_load: 0,
        };
        for e in chunk {
            match e.class {
                HandoverClass::X2 => m.x2 += 1,
                HandoverClass::S1IntraRegion => m.s1_intra += 1,
                HandoverClass::S1InterRegion => m.s1_inter += 1,
            }
            m.signaling += u64::from(cost.signaling_cost(e.class));
            m.assignment_changes += e.assignment_messages;
        }
        m.ratio = m.s1_inter as f64 / m.handovers() as f64;
        let mut counts: BTreeMap<RegionId, usize> = live.iter().map(|&r| (r, 0)).collect();
        for regions in &current {
            for r in regions {
                if let Some(c) = counts.get_mut(r) {
                    *c += 1;
                }
            }
        }
        m.loads = counts.into_iter().collect();
        let loads: Vec<f64> = m.loads.iter().map(|&(_, c)| c as f64).collect();
        m.jain = jain(&loads);
        m.max_load = m.loads.iter().map(|&(_, c)| c).max().unwrap_or(0);
        out.push(m);
    }
    out
}

#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("series never settles within {tol} of its final level {level}")]
pub struct NotConverged {
    pub level: f64,
    pub tol: f64,
}

/// First window from which every ratio stays at or below the mean of the
/// final tenth of the series (at least one window) plus `tol`.
pub fn convergence_time(series: &[f64], tol: f64) -> Result<usize, NotConverged> {
    assert!(!series.is_empty(), "convergence of an empty series");
    let tail = series.len().div_ceil(10);
    let level = series[series.len() - tail..].iter().sum::<f64>() / tail as f64;
    let bound = level + tol;
    let mut start = series.len();
    while start > 0 && series[start - 1] <= bound {
        start -= 1;
    }
    if start == series.len() {
        Err(NotConverged { level, tol })
    } else {
        Ok(start)
    }
}

/// The last quarter of the windows (at least one).
pub fn steady_state_windows(windows: &[WindowMetrics]) -> &[WindowMetrics] {
    let tail = windows.len().div_ceil(4);
    &windows[windows.len() - tail..]
}

/// Inter-region share of all handovers in `windows`, 0 when there are none.
pub fn pooled_ratio(windows: &[WindowMetrics]) -> f64 {
    let inter: u64 = windows.iter().map(|w| w.s1_inter).sum();
    let all: u64 = windows.iter().map(WindowMetrics::handovers).sum();
    if all == 0 {
        0.0
    } else {
        inter as f64 / all as f64
    }
}
