//! Baseline partitioners, the exact min-cut oracle and run metrics.

mod metrics;
mod oracle;

pub use metrics::{
    compute_window_metrics, convergence_time, jain, pooled_ratio, steady_state_windows, AssignmentTimeline,
    EventRecord, NotConverged, TimelineChange, TimelineEntry, WindowMetrics, METRICS_HEADER,
};
pub use oracle::{oracle_partition, OracleMode, BNB_LIMIT, EXHAUSTIVE_LIMIT};

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mobility::FlowMatrix;
use crate::topology::{CellId, RegionId, Topology};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("{n_regions} regions of capacity {capacity} cannot hold {n_cells} cells")]
    InsufficientCapacity {
        n_cells: usize,
        n_regions: usize,
        capacity: usize,
    },
    #[error("no partition of {n_cells} cells into {n_regions} regions of capacity {capacity} exists")]
    Infeasible {
        n_cells: usize,
        n_regions: usize,
        capacity: usize,
    },
    #[error("{n_cells} cells exceed the {limit}-cell limit of this mode")]
    TooLarge { n_cells: usize, limit: usize },
}

/// A region for every cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub region_of: Vec<RegionId>,
    pub capacity_respected: bool,
}

impl Partition {
    pub fn new(region_of: Vec<RegionId>, capacity: Option<usize>) -> Self {
        let mut p = Partition {
            region_of,
            capacity_respected: false,
        };
        p.capacity_respected = capacity.is_some_and(|c| p.counts().iter().all(|&(_, n)| n <= c));
        p
    }

    pub fn n_cells(&self) -> usize {
        self.region_of.len()
    }

    pub fn region(&self, cell: CellId) -> RegionId {
        self.region_of[cell.index()]
    }

    /// Cells per region, ascending region id.
    pub fn counts(&self) -> Vec<(RegionId, usize)> {
        let mut c = std::collections::BTreeMap::new();
        for &r in &self.region_of {
            *c.entry(r).or_insert(0usize) += 1;
        }
        c.into_iter().collect()
    }

    /// Cells of each region, ascending.
    pub fn blocks(&self) -> Vec<(RegionId, Vec<CellId>)> {
        let mut b: std::collections::BTreeMap<RegionId, Vec<CellId>> = Default::default();
        for (i, &r) in self.region_of.iter().enumerate() {
            b.entry(r).or_default().push(CellId(i as u32));
        }
        b.into_iter().collect()
    }

    /// True when both partitions group the cells identically, whatever the
    /// region labels.
    pub fn same_grouping(&self, other: &Partition) -> bool {
        self.region_of.len() == other.region_of.len() && canonical(&self.region_of) == canonical(&other.region_of)
    }
}

/// Relabels regions in order of first appearance.
fn canonical(labels: &[RegionId]) -> Vec<u32> {
    let mut seen: Vec<RegionId> = Vec::new();
    labels
        .iter()
        .map(|r| match seen.iter().position(|s| s == r) {
            Some(i) => i as u32,
            None => {
                seen.push(*r);
                seen.len() as u32 - 1
            }
        })
        .collect()
}

fn check_capacity(n_cells: usize, n_regions: usize, capacity: usize) -> Result<(), PartitionError> {
    if n_regions == 0 || n_regions.saturating_mul(capacity) < n_cells {
        return Err(PartitionError::InsufficientCapacity {
            n_cells,
            n_regions,
            capacity,
        });
    }
    Ok(())
}

/// Deals `order` round-robin over the slots, skipping full ones. Returns the
/// slot of each dealt cell in `order`, or `None` when space runs out.
pub(crate) fn deal_round_robin(n_items: usize, capacities: &[usize]) -> Option<Vec<usize>> {
    let mut counts = vec![0usize; capacities.len()];
    let mut slot = 0;
    let mut out = Vec::with_capacity(n_items);
    for _ in 0..n_items {
        let mut tried = 0;
        while counts[slot] >= capacities[slot] {
            slot = (slot + 1) % capacities.len();
            tried += 1;
            if tried == capacities.len() {
                return None;
            }
        }
        counts[slot] += 1;
        out.push(slot);
        slot = (slot + 1) % capacities.len();
    }
    Some(out)
}

/// Shuffled round-robin deal over regions `0..n_regions`.
pub fn random_partition(
    topology: &Topology,
    n_regions: usize,
    capacity: usize,
    rng: &mut impl Rng,
) -> Result<Partition, PartitionError> {
    let n = topology.n_cells();
    check_capacity(n, n_regions, capacity)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let slots = deal_round_robin(n, &vec![capacity; n_regions]).expect("capacity was checked");
    let mut region_of = vec![RegionId(0); n];
    for (cell, slot) in order.into_iter().zip(slots) {
        region_of[cell] = RegionId(slot as u32);
    }
    Ok(Partition::new(region_of, Some(capacity)))
}

/// Geographic baseline: farthest-point seeds, then a capacity-bounded
/// multi-source BFS from them.
pub fn static_partition(topology: &Topology, n_regions: usize, capacity: usize) -> Result<Partition, PartitionError> {
    let n = topology.n_cells();
    check_capacity(n, n_regions, capacity)?;
    let seeds = farthest_point_seeds(topology, n_regions.min(n));
    let hops: Vec<Vec<u32>> = seeds.iter().map(|&s| topology.hop_distances(s)).collect();

    let mut region_of: Vec<Option<usize>> = vec![None; n];
    let mut counts = vec![0usize; seeds.len()];
    let mut frontiers: Vec<Vec<CellId>> = Vec::with_capacity(seeds.len());
    for (i, &s) in seeds.iter().enumerate() {
        region_of[s.index()] = Some(i);
        counts[i] = 1;
        frontiers.push(vec![s]);
    }
    while frontiers.iter().any(|f| !f.is_empty()) {
        for i in 0..seeds.len() {
            let mut next = Vec::new();
            for &u in &frontiers[i] {
                for &v in topology.neighbors(u).expect("frontier cells are valid") {
                    if region_of[v.index()].is_none() && counts[i] < capacity {
                        region_of[v.index()] = Some(i);
                        counts[i] += 1;
                        next.push(v);
                    }
                }
            }
            frontiers[i] = next;
        }
    }
    for cell in 0..n {
        if region_of[cell].is_some() {
            continue;
        }
        let best = (0..seeds.len())
            .filter(|&i| counts[i] < capacity)
            .min_by_key(|&i| (hops[i][cell], i))
            .expect("capacity was checked");
        region_of[cell] = Some(best);
        counts[best] += 1;
    }
    Ok(Partition::new(
        region_of.into_iter().map(|r| RegionId(r.unwrap() as u32)).collect(),
        Some(capacity),
    ))
}

/// Greedy farthest-point seeds starting at cell 0. Distances are Euclidean
/// when coordinates exist and hop counts otherwise; ties go to the lower id.
pub fn farthest_point_seeds(topology: &Topology, count: usize) -> Vec<CellId> {
    let n = topology.n_cells();
    if count == 0 || n == 0 {
        return Vec::new();
    }
    let dist_from = |s: CellId| -> Vec<f64> {
        match topology.coordinates() {
            Some(xy) => {
                let (sx, sy) = xy[s.index()];
                xy.iter().map(|&(x, y)| ((x - sx).powi(2) + (y - sy).powi(2)).sqrt()).collect()
            }
            None => topology.hop_distances(s).into_iter().map(f64::from).collect(),
        }
    };
    let mut seeds = vec![CellId(0)];
    let mut nearest = dist_from(CellId(0));
    while seeds.len() < count {
        let mut best = None;
        for (c, &d_c) in nearest.iter().enumerate() {
            if seeds.contains(&CellId(c as u32)) {
                continue;
            }
            match best {
                Some((_, d)) if d_c <= d => {}
                _ => best = Some((c, d_c)),
            }
        }
        let Some((c, _)) = best else { break };
        let s = CellId(c as u32);
        seeds.push(s);
        for (m, d) in nearest.iter_mut().zip(dist_from(s)) {
            *m = m.min(d);
        }
    }
    seeds
}

/// Total flow between cells in different regions, both directions.
pub fn cut_value(flow: &FlowMatrix, partition: &Partition) -> f64 {
    flow.iter()
        .filter(|&(a, b, _)| partition.region(a) != partition.region(b))
        .map(|(_, _, c)| c)
        .sum()
}

/// True when the cells of `region` form one connected piece.
pub fn is_contiguous(topology: &Topology, partition: &Partition, region: RegionId) -> bool {
    let members: Vec<CellId> = topology.cells().filter(|&c| partition.region(c) == region).collect();
    let Some(&start) = members.first() else { return true };
    let mut seen = vec![false; topology.n_cells()];
    let mut queue = VecDeque::from([start]);
    seen[start.index()] = true;
    let mut reached = 1;
    while let Some(u) = queue.pop_front() {
        for &v in topology.neighbors(u).expect("valid cell") {
            if !seen[v.index()] && partition.region(v) == region {
                seen[v.index()] = true;
                reached += 1;
                queue.push_back(v);
            }
        }
    }
    reached == members.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_topology, EdgeSpec, TopologySpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(3)
    }

    fn path(n: u32) -> Topology {
        let edges = (0..n - 1).map(|i| EdgeSpec::new(i, i + 1)).collect();
        build_topology(&TopologySpec::Explicit { n_cells: n, edges }, 1.0, &mut rng()).unwrap()
    }

    fn regions(v: &[u32]) -> Vec<RegionId> {
        v.iter().map(|&r| RegionId(r)).collect()
    }

    #[test]
    fn static_path_split() {
        let p = static_partition(&path(4), 2, 2).unwrap();
        assert_eq!(p.region_of, regions(&[0, 0, 1, 1]));
        assert!(p.capacity_respected);
    }

    #[test]
    fn static_single_region_and_unit_capacity() {
        let p = static_partition(&path(5), 1, 5).unwrap();
        assert_eq!(p.region_of, regions(&[0; 5]));
        let grid = build_topology(&TopologySpec::Grid { width: 2, height: 2 }, 1.0, &mut rng()).unwrap();
        let p = static_partition(&grid, 4, 1).unwrap();
        let mut r = p.region_of.clone();
        r.sort();
        assert_eq!(r, regions(&[0, 1, 2, 3]));
        assert!(matches!(static_partition(&grid, 1, 3), Err(PartitionError::InsufficientCapacity { .. })));
    }

    #[test]
    fn static_grid_blocks_are_contiguous() {
        let grid = build_topology(&TopologySpec::Grid { width: 6, height: 6 }, 1.0, &mut rng()).unwrap();
        let p = static_partition(&grid, 4, 9).unwrap();
        for (r, n) in p.counts() {
            assert_eq!(n, 9);
            assert!(is_contiguous(&grid, &p, r));
        }
    }

    #[test]
    fn farthest_point_on_grid_picks_opposite_corner() {
        let grid = build_topology(&TopologySpec::Grid { width: 4, height: 3 }, 1.0, &mut rng()).unwrap();
        assert_eq!(farthest_point_seeds(&grid, 2), vec![CellId(0), CellId(11)]);
    }

    #[test]
    fn random_partition_is_balanced_and_reproducible() {
        let t = path(10);
        let a = random_partition(&t, 3, 10, &mut rng()).unwrap();
        let b = random_partition(&t, 3, 10, &mut rng()).unwrap();
        assert_eq!(a, b);
        let counts: Vec<usize> = a.counts().into_iter().map(|(_, n)| n).collect();
        assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
        assert!(random_partition(&t, 3, 3, &mut rng()).is_err());
    }

    #[test]
    fn round_robin_skips_full_slots() {
        assert_eq!(deal_round_robin(5, &[1, 3, 2]), Some(vec![0, 1, 2, 1, 2]));
        assert_eq!(deal_round_robin(3, &[1, 1]), None);
    }

    #[test]
    fn cut_examples() {
        let mut f = FlowMatrix::zeros(2);
        f.add(CellId(0), CellId(1), 2.0);
        f.add(CellId(1), CellId(0), 1.0);
        assert_eq!(cut_value(&f, &Partition::new(regions(&[0, 1]), None)), 3.0);
        assert_eq!(cut_value(&f, &Partition::new(regions(&[4, 4]), None)), 0.0);
    }

    #[test]
    fn grouping_ignores_labels() {
        let a = Partition::new(regions(&[0, 0, 1]), None);
        let b = Partition::new(regions(&[5, 5, 2]), None);
        let c = Partition::new(regions(&[0, 1, 1]), None);
        assert!(a.same_grouping(&b));
        assert!(!a.same_grouping(&c));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn merging_regions_never_raises_the_cut(
                labels in proptest::collection::vec(0u32..4, 2..10),
                entries in proptest::collection::vec((0usize..10, 0usize..10, 0.0f64..10.0), 0..30),
                a in 0u32..4, b in 0u32..4,
            ) {
                let n = labels.len();
                let mut f = FlowMatrix::zeros(n);
                for (i, j, c) in entries {
                    let (i, j) = (i % n, j % n);
                    if i != j { f.add(CellId(i as u32), CellId(j as u32), c); }
                }
                let p = Partition::new(regions(&labels), None);
                let merged: Vec<u32> = labels.iter().map(|&r| if r == b { a } else { r }).collect();
                let q = Partition::new(regions(&merged), None);
                prop_assert!(cut_value(&f, &q) <= cut_value(&f, &p) + 1e-9);
            }
        }
    }
}
