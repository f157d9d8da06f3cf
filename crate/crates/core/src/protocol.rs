//! Abstract signaling records the algorithm reads its inputs from, handover
//! classification, and per-class message accounting.

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{AssignmentState, RegionDirectory};
use crate::mobility::UeId;
use crate::topology::{CellId, RegionId, Topology};

/// Depth of the UE history carried in a handover request.
pub const H_LEN: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("cell {0} has no region assignment")]
    UnassignedCell(CellId),
    #[error("region {0} is retired or unknown")]
    RetiredRegion(RegionId),
    #[error("malformed message: {0}")]
    Malformed(String),
}

/// Last visited cells, most recent first.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UeHistory {
    visited: Vec<CellId>,
}

impl UeHistory {
    pub fn starting_at(cell: CellId) -> Self {
        UeHistory { visited: vec![cell] }
    }

    pub fn visited(&self) -> &[CellId] {
        &self.visited
    }

    pub fn latest(&self) -> Option<CellId> {
        self.visited.first().copied()
    }

    /// Records arrival at `cell`, dropping the oldest entry beyond `H_LEN`.
    pub fn push(&mut self, cell: CellId) {
        self.visited.insert(0, cell);
        self.visited.truncate(H_LEN);
    }
}

/// Temporary UE identity. The GUMMEI part is the allocating region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Guti {
    pub gummei: RegionId,
    pub m_tmsi: u32,
}

impl Guti {
    pub fn new(region: RegionId, m_tmsi: u32) -> Self {
        Guti { gummei: region, m_tmsi }
    }

    pub fn encode(self) -> u64 {
        ((self.gummei.0 as u64) << 32) | self.m_tmsi as u64
    }

    pub fn decode(raw: u64) -> Self {
        Guti {
            gummei: RegionId((raw >> 32) as u32),
            m_tmsi: raw as u32,
        }
    }

    pub fn parts(self) -> (RegionId, u32) {
        (self.gummei, self.m_tmsi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HandoverRequestMsg {
    pub ue: UeId,
    pub source_cell: CellId,
    pub target_cell: CellId,
    pub history: UeHistory,
}

impl HandoverRequestMsg {
    pub fn new(
        ue: UeId,
        source_cell: CellId,
        target_cell: CellId,
        history: UeHistory,
    ) -> Result<Self, ProtocolError> {
        if history.latest() != Some(source_cell) {
            return Err(ProtocolError::Malformed(format!(
                "history must start at source cell {source_cell}"
            )));
        }
        Ok(HandoverRequestMsg {
            ue,
            source_cell,
            target_cell,
            history,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TauRequestMsg {
    pub ue: UeId,
    pub old_guti: Guti,
    pub cell: CellId,
}

/// The message a target cell attributes a handover from.
#[derive(Debug, Clone, Copy)]
pub enum SourceEvidence<'a> {
    Handover(&'a HandoverRequestMsg),
    Tau(&'a TauRequestMsg),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HandoverClass {
    X2,
    S1IntraRegion,
    S1InterRegion,
}

impl HandoverClass {
    pub const ALL: [HandoverClass; 3] = [
        HandoverClass::X2,
        HandoverClass::S1IntraRegion,
        HandoverClass::S1InterRegion,
    ];

    pub fn is_inter_region(self) -> bool {
        self == HandoverClass::S1InterRegion
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HandoverClass::X2 => "X2",
            HandoverClass::S1IntraRegion => "S1_INTRA",
            HandoverClass::S1InterRegion => "S1_INTER",
        }
    }
}

impl fmt::Display for HandoverClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Messages exchanged per handover class, plus the cost of one
/// assignment-change exchange (request and response).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalingCostModel {
    pub msgs_x2: u32,
    pub msgs_s1_intra: u32,
    pub msgs_s1_inter: u32,
    pub msgs_assignment_change: u32,
}

impl Default for SignalingCostModel {
    fn default() -> Self {
        SignalingCostModel {
            msgs_x2: 8,
            msgs_s1_intra: 12,
            msgs_s1_inter: 18,
            msgs_assignment_change: 2,
        }
    }
}

impl SignalingCostModel {
    pub fn validate(&self) -> Result<(), String> {
        if self.msgs_x2 == 0 || self.msgs_s1_intra == 0 || self.msgs_s1_inter == 0 || self.msgs_assignment_change == 0 {
            return Err("all message counts must be positive".into());
        }
        Ok(())
    }

    pub fn signaling_cost(&self, class: HandoverClass) -> u32 {
        match class {
            HandoverClass::X2 => self.msgs_x2,
            HandoverClass::S1IntraRegion => self.msgs_s1_intra,
            HandoverClass::S1InterRegion => self.msgs_s1_inter,
        }
    }
}

/// Classifies a handover between adjacent, assigned cells by their primary
/// regions and the presence of a direct link.
pub fn classify_handover(
    source: CellId,
    target: CellId,
    assignment: &AssignmentState,
    topology: &Topology,
) -> Result<HandoverClass, ProtocolError> {
    let rs = assignment.primary(source).ok_or(ProtocolError::UnassignedCell(source))?;
    let rt = assignment.primary(target).ok_or(ProtocolError::UnassignedCell(target))?;
    if rs != rt {
        return Ok(HandoverClass::S1InterRegion);
    }
    // Unknown cells were already rejected by the assignment lookup.
    if topology.has_direct_link(source, target).unwrap_or(false) {
        Ok(HandoverClass::X2)
    } else {
        Ok(HandoverClass::S1IntraRegion)
    }
}

/// Region a handover arriving at the target cell came from. An intra-region
/// request implies the target's own region; a TAU names the region through
/// the GUMMEI of its old GUTI.
pub fn derive_source_region(
    evidence: SourceEvidence<'_>,
    assignment: &AssignmentState,
    directory: &RegionDirectory,
) -> Result<RegionId, ProtocolError> {
    match evidence {
        SourceEvidence::Handover(msg) => assignment
            .primary(msg.target_cell)
            .ok_or(ProtocolError::UnassignedCell(msg.target_cell)),
        SourceEvidence::Tau(msg) => {
            let region = msg.old_guti.gummei;
            if directory.is_live(region) {
                Ok(region)
            } else {
                Err(ProtocolError::RetiredRegion(region))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MessageKind {
    HoReq,
    TauReq,
    AssignReq,
    AssignRsp,
    ReassignReq,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::HoReq => "HO_REQ",
            MessageKind::TauReq => "TAU_REQ",
            MessageKind::AssignReq => "ASSIGN_REQ",
            MessageKind::AssignRsp => "ASSIGN_RSP",
            MessageKind::ReassignReq => "REASSIGN_REQ",
        }
    }

    pub fn is_handover_signaling(self) -> bool {
        matches!(self, MessageKind::HoReq | MessageKind::TauReq)
    }
}

pub const MESSAGE_LOG_HEADER: &str = "time,kind,ue,source,target,source_region,target_region,class";

/// One row of the optional message log. Empty columns are `None`; `class`
/// holds the handover class for handover messages and a short tag otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageRecord {
    pub time: u64,
    pub kind: MessageKind,
    pub ue: Option<UeId>,
    pub source: Option<CellId>,
    pub target: Option<CellId>,
    pub source_region: Option<RegionId>,
    pub target_region: Option<RegionId>,
    pub class: &'static str,
}

impl MessageRecord {
    pub fn write_csv_row(&self, out: &mut String) {
        fn opt<T: fmt::Display>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            self.time,
            self.kind.as_str(),
            opt(self.ue.map(|u| u.0)),
            opt(self.source),
            opt(self.target),
            opt(self.source_region),
            opt(self.target_region),
            self.class
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_topology, EdgeSpec, LinkKind, TopologySpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pair_topology(link: LinkKind) -> Topology {
        let spec = TopologySpec::Explicit {
            n_cells: 2,
            edges: vec![EdgeSpec { a: 0, b: 1, link: Some(link) }],
        };
        build_topology(&spec, 1.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    #[test]
    fn classification() {
        let same = AssignmentState::from_primaries(&[RegionId(0), RegionId(0)]);
        let split = AssignmentState::from_primaries(&[RegionId(0), RegionId(1)]);
        let direct = pair_topology(LinkKind::Direct);
        let s1 = pair_topology(LinkKind::S1only);
        assert_eq!(classify_handover(CellId(0), CellId(1), &same, &direct), Ok(HandoverClass::X2));
        assert_eq!(
            classify_handover(CellId(0), CellId(1), &same, &s1),
            Ok(HandoverClass::S1IntraRegion)
        );
        assert_eq!(
            classify_handover(CellId(0), CellId(1), &split, &direct),
            Ok(HandoverClass::S1InterRegion)
        );
        let empty = AssignmentState::unassigned(2);
        assert_eq!(
            classify_handover(CellId(0), CellId(1), &empty, &direct),
            Err(ProtocolError::UnassignedCell(CellId(0)))
        );
    }

    #[test]
    fn source_region_derivation() {
        let dir = RegionDirectory::new(&[1.0, 1.0, 1.0]).unwrap();
        let a = AssignmentState::from_primaries(&[RegionId(2), RegionId(2)]);
        let ho = HandoverRequestMsg::new(UeId(1), CellId(0), CellId(1), UeHistory::starting_at(CellId(0))).unwrap();
        assert_eq!(derive_source_region(SourceEvidence::Handover(&ho), &a, &dir), Ok(RegionId(2)));

        let mut dir = RegionDirectory::new(&[1.0; 6]).unwrap();
        let tau = TauRequestMsg { ue: UeId(1), old_guti: Guti::new(RegionId(5), 3), cell: CellId(1) };
        assert_eq!(derive_source_region(SourceEvidence::Tau(&tau), &a, &dir), Ok(RegionId(5)));
        dir.retire(RegionId(5)).unwrap();
        assert_eq!(
            derive_source_region(SourceEvidence::Tau(&tau), &a, &dir),
            Err(ProtocolError::RetiredRegion(RegionId(5)))
        );
    }

    #[test]
    fn history_must_start_at_source() {
        assert!(HandoverRequestMsg::new(UeId(0), CellId(1), CellId(2), UeHistory::starting_at(CellId(0))).is_err());
        let mut h = UeHistory::starting_at(CellId(0));
        for c in 1..40 {
            h.push(CellId(c));
        }
        assert_eq!(h.visited().len(), H_LEN);
        assert_eq!(h.latest(), Some(CellId(39)));
    }

    #[test]
    fn guti_fixtures() {
        assert_eq!(Guti::decode(Guti::new(RegionId(5), 99).encode()).parts(), (RegionId(5), 99));
        assert_eq!(Guti::decode(Guti::new(RegionId(0), 0).encode()).parts(), (RegionId(0), 0));
        assert_ne!(Guti::new(RegionId(1), 7).encode(), Guti::new(RegionId(2), 7).encode());
    }

    #[test]
    fn default_costs() {
        let m = SignalingCostModel::default();
        let intra = m.signaling_cost(HandoverClass::S1IntraRegion) as f64;
        let inter = m.signaling_cost(HandoverClass::S1InterRegion) as f64;
        assert_eq!(inter, 1.5 * intra);
        assert!(m.signaling_cost(HandoverClass::X2) as f64 <= intra && intra <= inter);
        let custom = SignalingCostModel { msgs_x2: 8, ..SignalingCostModel::default() };
        assert_eq!(custom.signaling_cost(HandoverClass::X2), 8);
        assert!(SignalingCostModel { msgs_x2: 0, ..m }.validate().is_err());
    }

    #[test]
    fn message_row_format() {
        let mut out = String::new();
        MessageRecord {
            time: 3,
            kind: MessageKind::TauReq,
            ue: Some(UeId(7)),
            source: Some(CellId(1)),
            target: Some(CellId(2)),
            source_region: Some(RegionId(0)),
            target_region: Some(RegionId(1)),
            class: HandoverClass::S1InterRegion.as_str(),
        }
        .write_csv_row(&mut out);
        assert_eq!(out, "3,TAU_REQ,7,1,2,0,1,S1_INTER\n");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn guti_roundtrip(r in any::<u32>(), t in any::<u32>()) {
                let g = Guti::new(RegionId(r), t);
                prop_assert_eq!(Guti::decode(g.encode()), g);
            }

            #[test]
            fn guti_injective(r1 in any::<u32>(), r2 in any::<u32>(), t in any::<u32>()) {
                prop_assume!(r1 != r2);
                prop_assert_ne!(Guti::new(RegionId(r1), t).encode(), Guti::new(RegionId(r2), t).encode());
            }
        }
    }
}
