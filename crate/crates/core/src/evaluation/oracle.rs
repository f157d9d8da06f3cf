use serde::{Deserialize, Serialize};

use crate::mobility::FlowMatrix;
use crate::topology::RegionId;

use super::{Partition, PartitionError};

pub const EXHAUSTIVE_LIMIT: usize = 16;
pub const BNB_LIMIT: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    /// Every label vector in lexicographic order.
    Exhaustive,
    /// Depth-first search over canonical labelings with cut bounds.
    #[default]
    BranchAndBound,
}

/// Minimum-cut partition into at most `n_regions` blocks of at most
/// `capacity` cells. Among optimal partitions the lexicographically
/// smallest `region_of` vector is returned.
pub fn oracle_partition(
    flow: &FlowMatrix,
    n_regions: usize,
    capacity: usize,
    mode: OracleMode,
) -> Result<(Partition, f64), PartitionError> {
    let n = flow.n_cells();
    let limit = match mode {
        OracleMode::Exhaustive => EXHAUSTIVE_LIMIT,
        OracleMode::BranchAndBound => BNB_LIMIT,
    };
    if n > limit {
        return Err(PartitionError::TooLarge { n_cells: n, limit });
    }
    if n_regions == 0 || n_regions.saturating_mul(capacity) < n {
        return Err(PartitionError::Infeasible {
            n_cells: n,
            n_regions,
            capacity,
        });
    }
    let k = n_regions.min(n.max(1));
    let w = symmetric_weights(flow);
    let labels = match mode {
        OracleMode::Exhaustive => exhaustive(&w, k, capacity).0,
        OracleMode::BranchAndBound => BranchAndBound::new(&w, k, capacity).solve().0,
    };
    // recomputed so both modes report an identically summed value
    let cut = cut_of(&w, &labels);
    let region_of = labels.into_iter().map(|l| RegionId(l as u32)).collect();
    Ok((Partition::new(region_of, Some(capacity)), cut))
}

/// `w[i][j] = flow(i, j) + flow(j, i)`, dense.
fn symmetric_weights(flow: &FlowMatrix) -> Vec<Vec<f64>> {
    let n = flow.n_cells();
    let mut w = vec![vec![0.0; n]; n];
    for (a, b, c) in flow.iter() {
        w[a.index()][b.index()] += c;
        w[b.index()][a.index()] += c;
    }
    w
}

fn cut_of(w: &[Vec<f64>], labels: &[usize]) -> f64 {
    let mut cut = 0.0;
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            if labels[i] != labels[j] {
                cut += w[i][j];
            }
        }
    }
    cut
}

fn exhaustive(w: &[Vec<f64>], k: usize, capacity: usize) -> (Vec<usize>, f64) {
    let n = w.len();
    let mut labels = vec![0usize; n];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        if counts.iter().all(|&c| c <= capacity) {
            let cut = cut_of(w, &labels);
            if best.as_ref().is_none_or(|(_, b)| cut < *b) {
                best = Some((labels.clone(), cut));
            }
        }
        // odometer with the last cell as the fastest digit
        let mut pos = n;
        loop {
            if pos == 0 {
                return best.expect("capacity check guarantees a feasible labeling");
            }
            pos -= 1;
            labels[pos] += 1;
            if labels[pos] < k {
                break;
            }
            labels[pos] = 0;
        }
    }
}

struct BranchAndBound<'a> {
    w: &'a [Vec<f64>],
    k: usize,
    capacity: usize,
    labels: Vec<usize>,
    counts: Vec<usize>,
    /// `toward[u][l]`: weight from cell `u` to already labeled cells with label `l`.
    toward: Vec<Vec<f64>>,
    /// Weight from each cell to every labeled cell.
    labeled_weight: Vec<f64>,
    best: Option<(Vec<usize>, f64)>,
}

impl<'a> BranchAndBound<'a> {
    fn new(w: &'a [Vec<f64>], k: usize, capacity: usize) -> Self {
        let n = w.len();
        BranchAndBound {
            w,
            k,
            capacity,
            labels: Vec::with_capacity(n),
            counts: vec![0; k],
            toward: vec![vec![0.0; k]; n],
            labeled_weight: vec![0.0; n],
            best: None,
        }
    }

    fn solve(mut self) -> (Vec<usize>, f64) {
        self.search(0.0, 0);
        self.best.expect("capacity check guarantees a feasible labeling")
    }

    /// Cheapest completion of every unlabeled cell against the labeled ones,
    /// each considered on its own.
    fn completion_bound(&self, used: usize) -> f64 {
        let i = self.labels.len();
        let open = used < self.k;
        (i..self.w.len())
            .map(|u| {
                let best_existing = (0..used).map(|l| self.labeled_weight[u] - self.toward[u][l]).fold(f64::INFINITY, f64::min);
                if open {
                    best_existing.min(self.labeled_weight[u])
                } else {
                    best_existing
                }
            })
            .sum()
    }

    fn search(&mut self, cut: f64, used: usize) {
        let n = self.w.len();
        let i = self.labels.len();
        if i == n {
            if self.best.as_ref().is_none_or(|(_, b)| cut < *b) {
                self.best = Some((self.labels.clone(), cut));
            }
            return;
        }
        let free: usize = self.counts.iter().map(|&c| self.capacity - c).sum();
        if free < n - i {
            return;
        }
        if let Some((_, b)) = &self.best {
            if cut + self.completion_bound(used) >= *b {
                return;
            }
        }
        let max_label = (used + 1).min(self.k);
        for l in 0..max_label {
            if self.counts[l] >= self.capacity {
                continue;
            }
            let added = self.labeled_weight[i] - self.toward[i][l];
            self.assign(i, l);
            self.search(cut + added, used.max(l + 1));
            self.unassign(i, l);
        }
    }

    fn assign(&mut self, i: usize, l: usize) {
        self.labels.push(l);
        self.counts[l] += 1;
        for u in 0..self.w.len() {
            let x = self.w[u][i];
            if x != 0.0 {
                self.toward[u][l] += x;
                self.labeled_weight[u] += x;
            }
        }
    }

    fn unassign(&mut self, i: usize, l: usize) {
        self.labels.pop();
        self.counts[l] -= 1;
        for u in 0..self.w.len() {
            let x = self.w[u][i];
            if x != 0.0 {
                self.toward[u][l] -= x;
                self.labeled_weight[u] -= x;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::cut_value;
    use crate::topology::CellId;

    fn flow(n: usize, entries: &[(u32, u32, f64)]) -> FlowMatrix {
        let mut f = FlowMatrix::zeros(n);
        for &(a, b, c) in entries {
            f.add(CellId(a), CellId(b), c);
        }
        f
    }

    fn labels(p: &Partition) -> Vec<u32> {
        p.region_of.iter().map(|r| r.0).collect()
    }

    fn path_fixture() -> FlowMatrix {
        flow(4, &[(0, 1, 5.0), (1, 0, 5.0), (1, 2, 1.0), (2, 1, 1.0), (2, 3, 5.0), (3, 2, 5.0)])
    }

    #[test]
    fn path_fixture_both_modes() {
        for mode in [OracleMode::Exhaustive, OracleMode::BranchAndBound] {
            let (p, cut) = oracle_partition(&path_fixture(), 2, 2, mode).unwrap();
            assert_eq!(labels(&p), vec![0, 0, 1, 1]);
            assert_eq!(cut, 2.0);
            assert!(p.capacity_respected);
        }
    }

    #[test]
    fn zero_flow_picks_canonical_partition() {
        let f = FlowMatrix::zeros(5);
        for mode in [OracleMode::Exhaustive, OracleMode::BranchAndBound] {
            let (p, cut) = oracle_partition(&f, 2, 3, mode).unwrap();
            assert_eq!(labels(&p), vec![0, 0, 0, 1, 1]);
            assert_eq!(cut, 0.0);
        }
    }

    #[test]
    fn single_region_has_zero_cut() {
        let (p, cut) = oracle_partition(&path_fixture(), 1, 4, OracleMode::BranchAndBound).unwrap();
        assert_eq!(labels(&p), vec![0; 4]);
        assert_eq!(cut, 0.0);
    }

    #[test]
    fn guards() {
        assert_eq!(
            oracle_partition(&FlowMatrix::zeros(17), 2, 9, OracleMode::Exhaustive),
            Err(PartitionError::TooLarge { n_cells: 17, limit: 16 })
        );
        assert!(matches!(
            oracle_partition(&FlowMatrix::zeros(41), 2, 30, OracleMode::BranchAndBound),
            Err(PartitionError::TooLarge { .. })
        ));
        assert!(matches!(
            oracle_partition(&path_fixture(), 2, 1, OracleMode::Exhaustive),
            Err(PartitionError::Infeasible { .. })
        ));
    }

    #[test]
    fn two_communities_of_twelve() {
        // dense inside each half, a single light bridge
        let mut entries = Vec::new();
        for base in [0u32, 12] {
            for a in 0..12 {
                for b in 0..12 {
                    if a != b {
                        entries.push((base + a, base + b, 3.0));
                    }
                }
            }
        }
        entries.push((5, 17, 1.0));
        let f = flow(24, &entries);
        let (p, cut) = oracle_partition(&f, 2, 12, OracleMode::BranchAndBound).unwrap();
        assert_eq!(cut, 1.0);
        assert_eq!(labels(&p), [vec![0; 12], vec![1; 12]].concat());
        assert_eq!(cut_value(&f, &p), cut);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn instance() -> impl Strategy<Value = (FlowMatrix, usize, usize)> {
            (2usize..=8, 2usize..=3).prop_flat_map(|(n, k)| {
                let min_cap = n.div_ceil(k);
                (
                    proptest::collection::vec((0..n as u32, 0..n as u32, 0u32..6), 0..24),
                    Just(n),
                    Just(k),
                    min_cap..=n,
                )
                    .prop_map(|(entries, n, k, cap)| {
                        let mut f = FlowMatrix::zeros(n);
                        for (a, b, c) in entries {
                            if a != b {
                                f.add(CellId(a), CellId(b), c as f64);
                            }
                        }
                        (f, k, cap)
                    })
            })
        }

        proptest! {
            #[test]
            fn bnb_matches_exhaustive((f, k, cap) in instance()) {
                let (pe, ce) = oracle_partition(&f, k, cap, OracleMode::Exhaustive).unwrap();
                let (pb, cb) = oracle_partition(&f, k, cap, OracleMode::BranchAndBound).unwrap();
                prop_assert_eq!(ce, cb);
                prop_assert_eq!(&pe, &pb);
                prop_assert_eq!(cut_value(&f, &pe), ce);
            }
        }
    }
}
