//! Shared run state: which regions exist and which regions manage each cell.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{CellId, RegionId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DirectoryError {
    #[error("region {0} is the only live region")]
    LastRegion(RegionId),
    #[error("region {0} is not live")]
    NotLive(RegionId),
    #[error("capacity {0} must be positive and finite")]
    BadCapacity(f64),
}

/// Live and retired MME/AMF instances. Ids are handed out in increasing
/// order and never reused.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionDirectory {
    live: BTreeMap<RegionId, f64>,
    retired: BTreeSet<RegionId>,
    next_id: u32,
}

impl RegionDirectory {
    pub fn new(capacities: &[f64]) -> Result<Self, DirectoryError> {
        let mut dir = RegionDirectory {
            live: BTreeMap::new(),
            retired: BTreeSet::new(),
            next_id: 0,
        };
        for &c in capacities {
            dir.add(c)?;
        }
        Ok(dir)
    }

    pub fn add(&mut self, capacity: f64) -> Result<RegionId, DirectoryError> {
        if !(capacity > 0.0 && capacity.is_finite()) {
            return Err(DirectoryError::BadCapacity(capacity));
        }
        let id = RegionId(self.next_id);
        self.next_id += 1;
        self.live.insert(id, capacity);
        Ok(id)
    }

    pub fn retire(&mut self, id: RegionId) -> Result<(), DirectoryError> {
        if !self.live.contains_key(&id) {
            return Err(DirectoryError::NotLive(id));
        }
        if self.live.len() == 1 {
            return Err(DirectoryError::LastRegion(id));
        }
        self.live.remove(&id);
        self.retired.insert(id);
        Ok(())
    }

    pub fn is_live(&self, id: RegionId) -> bool {
        self.live.contains_key(&id)
    }

    pub fn is_retired(&self, id: RegionId) -> bool {
        self.retired.contains(&id)
    }

    pub fn capacity(&self, id: RegionId) -> Option<f64> {
        self.live.get(&id).copied()
    }

    /// Live region ids, ascending.
    pub fn live(&self) -> Vec<RegionId> {
        self.live.keys().copied().collect()
    }

    pub fn live_with_capacity(&self) -> impl Iterator<Item = (RegionId, f64)> + '_ {
        self.live.iter().map(|(&r, &c)| (r, c))
    }

    pub fn n_live(&self) -> usize {
        self.live.len()
    }

    pub fn retired(&self) -> impl Iterator<Item = RegionId> + '_ {
        self.retired.iter().copied()
    }
}

/// Regions managing one cell. `regions` is kept ascending and always
/// contains `primary`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellAssignment {
    regions: Vec<RegionId>,
    primary: RegionId,
}

impl CellAssignment {
    pub fn new(mut regions: Vec<RegionId>, primary: RegionId) -> Self {
        regions.sort();
        regions.dedup();
        assert!(regions.contains(&primary), "primary must be a member");
        CellAssignment { regions, primary }
    }

    pub fn single(region: RegionId) -> Self {
        CellAssignment {
            regions: vec![region],
            primary: region,
        }
    }

    pub fn regions(&self) -> &[RegionId] {
        &self.regions
    }

    pub fn primary(&self) -> RegionId {
        self.primary
    }

    pub fn contains(&self, region: RegionId) -> bool {
        self.regions.binary_search(&region).is_ok()
    }
}

/// Cell to region association for a whole topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentState {
    cells: Vec<Option<CellAssignment>>,
}

impl AssignmentState {
    pub fn unassigned(n_cells: usize) -> Self {
        AssignmentState {
            cells: vec![None; n_cells],
        }
    }

    /// Every cell managed by exactly the given single region.
    pub fn from_primaries(regions: &[RegionId]) -> Self {
        AssignmentState {
            cells: regions.iter().map(|&r| Some(CellAssignment::single(r))).collect(),
        }
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn set(&mut self, cell: CellId, assignment: CellAssignment) {
        self.cells[cell.index()] = Some(assignment);
    }

    pub fn clear(&mut self, cell: CellId) {
        self.cells[cell.index()] = None;
    }

    pub fn get(&self, cell: CellId) -> Option<&CellAssignment> {
        self.cells.get(cell.index()).and_then(Option::as_ref)
    }

    pub fn primary(&self, cell: CellId) -> Option<RegionId> {
        self.get(cell).map(CellAssignment::primary)
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(Option::is_some)
    }

    pub fn iter(&self) -> impl Iterator<Item = (CellId, Option<&CellAssignment>)> {
        self.cells
            .iter()
            .enumerate()
            .map(|(i, a)| (CellId(i as u32), a.as_ref()))
    }

    /// Primary region per cell; `None` if some cell is unassigned.
    pub fn primaries(&self) -> Option<Vec<RegionId>> {
        self.cells.iter().map(|a| a.as_ref().map(CellAssignment::primary)).collect()
    }

    /// Number of cells managed by each region (counting every membership).
    pub fn region_counts(&self) -> BTreeMap<RegionId, usize> {
        let mut counts = BTreeMap::new();
        for a in self.cells.iter().flatten() {
            for &r in a.regions() {
                *counts.entry(r).or_insert(0) += 1;
            }
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directory_ids_are_never_reused() {
        let mut d = RegionDirectory::new(&[10.0, 10.0]).unwrap();
        d.retire(RegionId(1)).unwrap();
        let r = d.add(5.0).unwrap();
        assert_eq!(r, RegionId(2));
        assert!(d.is_retired(RegionId(1)));
        assert_eq!(d.live(), vec![RegionId(0), RegionId(2)]);
    }

    #[test]
    fn cannot_retire_last_region() {
        let mut d = RegionDirectory::new(&[3.0]).unwrap();
        assert_eq!(d.retire(RegionId(0)), Err(DirectoryError::LastRegion(RegionId(0))));
        assert_eq!(d.retire(RegionId(9)), Err(DirectoryError::NotLive(RegionId(9))));
        assert!(RegionDirectory::new(&[0.0]).is_err());
    }

    #[test]
    fn assignment_counts() {
        let mut a = AssignmentState::from_primaries(&[RegionId(0), RegionId(1), RegionId(0)]);
        assert_eq!(a.region_counts()[&RegionId(0)], 2);
        a.set(CellId(1), CellAssignment::new(vec![RegionId(1), RegionId(0)], RegionId(1)));
        assert_eq!(a.region_counts()[&RegionId(0)], 3);
        assert_eq!(a.get(CellId(1)).unwrap().regions(), &[RegionId(0), RegionId(1)]);
        a.clear(CellId(2));
        assert!(!a.is_complete());
        assert!(a.primaries().is_none());
    }
}
