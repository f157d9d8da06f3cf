//! The two agent roles: cells that track where their handovers come from
//! and decide which region to join, and MME/AMF instances that admit cells
//! under a load limit.

mod cell;
mod mme;

pub use cell::{
    attraction, AssignmentRequest, AttractionTable, AttractionVector, CellAgentState, CounterSource,
};
pub use mme::{AssignmentDecision, MmeState};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{CellId, RegionId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("no handover data toward any live region")]
    NoData,
    #[error("no candidate region besides {0}")]
    NoCandidate(RegionId),
    #[error("region {region} is empty but cell load {cell_load} reaches its capacity {capacity}")]
    EmptyRegionOverflow {
        region: RegionId,
        cell_load: f64,
        capacity: f64,
    },
    #[error("cell {cell} is not assigned to region {region}")]
    NotAssigned { cell: CellId, region: RegionId },
    #[error("cell {cell} is already assigned to region {region}")]
    AlreadyAssigned { cell: CellId, region: RegionId },
}

/// How much load a cell puts on the region that manages it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellLoadMode {
    /// Every cell weighs 1.
    #[default]
    Uniform,
    /// The cell's decayed handover arrival count.
    ArrivalRate,
}

/// Tunables shared by every agent in a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentParams {
    /// Number of regions managing each cell.
    pub k: u32,
    /// Per-event counter decay at a cell, in (0, 1].
    pub gamma: f64,
    /// Minimum attraction margin before a cell asks to switch.
    pub epsilon: f64,
    /// Eviction hysteresis at the MME.
    pub delta: f64,
    pub cell_load: CellLoadMode,
    /// Recorded handovers between attraction refreshes sent to the MME.
    pub refresh_interval: u64,
}

impl Default for AgentParams {
    fn default() -> Self {
        AgentParams {
            k: 1,
            gamma: 0.995,
            epsilon: 0.05,
            delta: 0.05,
            cell_load: CellLoadMode::Uniform,
            refresh_interval: 100,
        }
    }
}

impl AgentParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.k == 0 {
            return Err("k must be at least 1".into());
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(format!("gamma {} outside (0, 1]", self.gamma));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(format!("epsilon {} must be a finite non-negative number", self.epsilon));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(format!("delta {} must be a finite non-negative number", self.delta));
        }
        if self.refresh_interval == 0 {
            return Err("refresh_interval must be at least 1".into());
        }
        Ok(())
    }
}
