//! Distributed self-organization of handover regions.
//!
//! Cells count where incoming handovers come from and ask to join the
//! MME/AMF region they are most attracted to. Regions admit cells under a
//! load limit and evict their least attracted member when a stronger one
//! asks. The engine drives both roles over a handover stream and records
//! per-window signaling metrics; the evaluation module supplies the static
//! and optimal baselines.

pub mod agents;
pub mod assignment;
pub mod engine;
pub mod evaluation;
pub mod mobility;
pub mod protocol;
pub mod topology;
