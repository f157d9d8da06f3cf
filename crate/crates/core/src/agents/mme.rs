use std::collections::{BTreeMap, BTreeSet};

use ordered_float::OrderedFloat;

use crate::topology::{CellId, RegionId};

use super::AgentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignmentDecision {
    Accept,
    /// Accepted after evicting the named cell.
    AcceptWithEviction(CellId),
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    load: f64,
    attraction: f64,
}

/// One MME/AMF instance. Keeps the load and last reported attraction of
/// every cell it manages, with an index for the least attracted one.
#[derive(Debug, Clone, PartialEq)]
pub struct MmeState {
    region: RegionId,
    capacity: f64,
    delta: f64,
    cells: BTreeMap<CellId, Entry>,
    by_attraction: BTreeSet<(OrderedFloat<f64>, CellId)>,
    load: f64,
}

impl MmeState {
    pub fn new(region: RegionId, capacity: f64, delta: f64) -> Self {
        MmeState {
            region,
            capacity,
            delta,
            cells: BTreeMap::new(),
            by_attraction: BTreeSet::new(),
            load: 0.0,
        }
    }

    pub fn region(&self) -> RegionId {
        self.region
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn load(&self) -> f64 {
        self.load
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn contains(&self, cell: CellId) -> bool {
        self.cells.contains_key(&cell)
    }

    /// Managed cells, ascending.
    pub fn cells(&self) -> impl Iterator<Item = CellId> + '_ {
        self.cells.keys().copied()
    }

    pub fn stored_attraction(&self, cell: CellId) -> Option<f64> {
        self.cells.get(&cell).map(|e| e.attraction)
    }

    /// Least attracted managed cell, ties by ascending id.
    pub fn weakest(&self) -> Option<(CellId, f64)> {
        self.by_attraction.first().map(|&(a, c)| (c, a.0))
    }

    /// Admission test for a cell with load `cell_load` and attraction `a_n`
    /// toward this region.
    pub fn handle_assignment_request(
        &mut self,
        cell: CellId,
        cell_load: f64,
        a_n: f64,
    ) -> Result<AssignmentDecision, AgentError> {
        if self.contains(cell) {
            return Err(AgentError::AlreadyAssigned { cell, region: self.region });
        }
        if self.load + cell_load < self.capacity {
            self.insert(cell, cell_load, a_n);
            return Ok(AssignmentDecision::Accept);
        }
        let Some((weakest, weakest_a)) = self.weakest() else {
            return Err(AgentError::EmptyRegionOverflow {
                region: self.region,
                cell_load,
                capacity: self.capacity,
            });
        };
        if a_n > weakest_a + self.delta {
            self.remove(weakest)?;
            self.insert(cell, cell_load, a_n);
            Ok(AssignmentDecision::AcceptWithEviction(weakest))
        } else {
            Ok(AssignmentDecision::Reject)
        }
    }

    /// Adds a cell without an admission test (initial placement and
    /// fallback).
    pub fn force_assign(&mut self, cell: CellId, cell_load: f64, a_n: f64) -> Result<(), AgentError> {
        if self.contains(cell) {
            return Err(AgentError::AlreadyAssigned { cell, region: self.region });
        }
        self.insert(cell, cell_load, a_n);
        Ok(())
    }

    pub fn remove(&mut self, cell: CellId) -> Result<(), AgentError> {
        let e = self
            .cells
            .remove(&cell)
            .ok_or(AgentError::NotAssigned { cell, region: self.region })?;
        self.by_attraction.remove(&(OrderedFloat(e.attraction), cell));
        self.load -= e.load;
        if self.cells.is_empty() {
            self.load = 0.0;
        }
        Ok(())
    }

    pub fn refresh_attraction(&mut self, cell: CellId, a_n: f64) -> Result<(), AgentError> {
        let e = self
            .cells
            .get_mut(&cell)
            .ok_or(AgentError::NotAssigned { cell, region: self.region })?;
        self.by_attraction.remove(&(OrderedFloat(e.attraction), cell));
        e.attraction = a_n;
        self.by_attraction.insert((OrderedFloat(a_n), cell));
        Ok(())
    }

    pub fn refresh_load(&mut self, cell: CellId, cell_load: f64) -> Result<(), AgentError> {
        let e = self
            .cells
            .get_mut(&cell)
            .ok_or(AgentError::NotAssigned { cell, region: self.region })?;
        self.load += cell_load - e.load;
        e.load = cell_load;
        Ok(())
    }

    fn insert(&mut self, cell: CellId, cell_load: f64, a_n: f64) {
        self.cells.insert(cell, Entry { load: cell_load, attraction: a_n });
        self.by_attraction.insert((OrderedFloat(a_n), cell));
        self.load += cell_load;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mme(capacity: f64, delta: f64, cells: &[(u32, f64)]) -> MmeState {
        let mut m = MmeState::new(RegionId(0), capacity, delta);
        for &(c, a) in cells {
            m.force_assign(CellId(c), 1.0, a).unwrap();
        }
        m
    }

    #[test]
    fn plain_accept_below_capacity() {
        let cells: Vec<(u32, f64)> = (0..8).map(|c| (c, 0.5)).collect();
        let mut m = mme(10.0, 0.05, &cells);
        // load 8, cell load 1: 9 < 10
        assert_eq!(m.load(), 8.0);
        assert_eq!(m.handle_assignment_request(CellId(9), 1.0, 0.0).unwrap(), AssignmentDecision::Accept);
        assert_eq!(m.load(), 9.0);
        m.refresh_load(CellId(9), 0.5).unwrap();
        assert_eq!(m.load(), 8.5);
    }

    #[test]
    fn strict_limit_then_eviction() {
        // load 9 + 1 is not below 10
        let cells: Vec<(u32, f64)> = (0..9).map(|c| (c, if c == 4 { 0.3 } else { 0.6 })).collect();
        let mut m = mme(10.0, 0.05, &cells);
        let d = m.handle_assignment_request(CellId(20), 1.0, 0.7).unwrap();
        assert_eq!(d, AssignmentDecision::AcceptWithEviction(CellId(4)));
        assert!(!m.contains(CellId(4)));
        assert!(m.contains(CellId(20)));
        assert_eq!(m.load(), 9.0);
    }

    #[test]
    fn hysteresis_rejects_small_margin() {
        let cells: Vec<(u32, f64)> = (0..9).map(|c| (c, if c == 4 { 0.3 } else { 0.6 })).collect();
        let mut m = mme(10.0, 0.05, &cells);
        let before = m.clone();
        assert_eq!(m.handle_assignment_request(CellId(20), 1.0, 0.32).unwrap(), AssignmentDecision::Reject);
        assert_eq!(m, before);
    }

    #[test]
    fn eviction_ties_pick_lowest_cell() {
        let mut m = mme(2.0, 0.0, &[(5, 0.1), (3, 0.1)]);
        let d = m.handle_assignment_request(CellId(9), 1.0, 0.5).unwrap();
        assert_eq!(d, AssignmentDecision::AcceptWithEviction(CellId(3)));
    }

    #[test]
    fn empty_region_overflow() {
        let mut m = mme(1.0, 0.05, &[]);
        assert!(matches!(
            m.handle_assignment_request(CellId(0), 1.0, 1.0),
            Err(AgentError::EmptyRegionOverflow { .. })
        ));
    }

    #[test]
    fn refresh_and_remove_unknown_cell() {
        let mut m = mme(5.0, 0.05, &[(1, 0.2)]);
        assert_eq!(
            m.refresh_attraction(CellId(2), 0.5),
            Err(AgentError::NotAssigned { cell: CellId(2), region: RegionId(0) })
        );
        assert!(m.remove(CellId(2)).is_err());
        m.refresh_attraction(CellId(1), 0.9).unwrap();
        assert_eq!(m.weakest(), Some((CellId(1), 0.9)));
        assert!(m.force_assign(CellId(1), 1.0, 0.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        #[derive(Debug, Clone)]
        enum Op {
            Request(u32, f64),
            Remove(u32),
            Refresh(u32, f64),
        }

        fn op() -> impl Strategy<Value = Op> {
            prop_oneof![
                (0u32..30, 0.0f64..=1.0).prop_map(|(c, a)| Op::Request(c, a)),
                (0u32..30).prop_map(Op::Remove),
                (0u32..30, 0.0f64..=1.0).prop_map(|(c, a)| Op::Refresh(c, a)),
            ]
        }

        proptest! {
            #[test]
            fn admission_never_exceeds_capacity(cap in 2u32..12, delta in 0.0f64..0.2, ops in proptest::collection::vec(op(), 0..300)) {
                let cap = cap as f64;
                let mut m = MmeState::new(RegionId(0), cap, delta);
                for op in ops {
                    match op {
                        Op::Request(c, a) => {
                            let cell = CellId(c);
                            if m.contains(cell) { continue; }
                            let before = m.clone();
                            match m.handle_assignment_request(cell, 1.0, a) {
                                Ok(AssignmentDecision::Accept) => prop_assert!(before.load() + 1.0 < cap),
                                Ok(AssignmentDecision::AcceptWithEviction(e)) => {
                                    let (w, wa) = before.weakest().unwrap();
                                    prop_assert_eq!(e, w);
                                    prop_assert!(a > wa + delta);
                                    prop_assert_eq!(m.load(), before.load());
                                }
                                Ok(AssignmentDecision::Reject) => prop_assert_eq!(&m, &before),
                                Err(e) => prop_assert!(false, "{e}"),
                            }
                        }
                        Op::Remove(c) => { let _ = m.remove(CellId(c)); }
                        Op::Refresh(c, a) => { let _ = m.refresh_attraction(CellId(c), a); }
                    }
                    prop_assert!(m.load() <= cap.max(1.0));
                    prop_assert_eq!(m.load(), m.n_cells() as f64);
                    prop_assert_eq!(m.by_attraction.len(), m.cells.len());
                }
            }

            #[test]
            fn monotone_in_attraction(cells in proptest::collection::vec(0.0f64..=1.0, 1..10), a in 0.0f64..=1.0, bump in 0.0f64..0.5, delta in 0.0f64..0.2) {
                let cap = cells.len() as f64;
                let mut m = MmeState::new(RegionId(0), cap, delta);
                for (i, &x) in cells.iter().enumerate() {
                    m.force_assign(CellId(i as u32), 1.0, x).unwrap();
                }
                let low = m.clone().handle_assignment_request(CellId(99), 1.0, a).unwrap();
                let high = m.clone().handle_assignment_request(CellId(99), 1.0, (a + bump).min(1.0)).unwrap();
                if low != AssignmentDecision::Reject {
                    prop_assert!(high != AssignmentDecision::Reject);
                }
            }
        }
    }
}
