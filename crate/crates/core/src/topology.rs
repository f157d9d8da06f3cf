//! Static cell graph: mobility adjacency plus the subset of neighbor pairs
//! that have a direct inter-node (X2/Xn) link.

use std::collections::{BTreeSet, VecDeque};
use std::f64::consts::TAU;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense cell identifier in `[0, n_cells)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellId(pub u32);

impl CellId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Identifier of an MME/AMF instance. Never reused within one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegionId(pub u32);

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("topology graph is disconnected")]
    DisconnectedGraph,
    #[error("malformed topology: {0}")]
    MalformedSpec(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown cell {0}")]
    UnknownCell(CellId),
}

/// Whether an edge of an explicit topology has a direct link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Direct,
    S1only,
}

/// One undirected edge of an explicit topology. `link: None` leaves the
/// direct-link decision to the coverage draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeSpec {
    pub a: u32,
    pub b: u32,
    pub link: Option<LinkKind>,
}

impl EdgeSpec {
    pub fn new(a: u32, b: u32) -> Self {
        EdgeSpec { a, b, link: None }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum EdgeRepr {
    Pair(u32, u32),
    Triple(u32, u32, LinkKind),
}

impl Serialize for EdgeSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.link {
            None => EdgeRepr::Pair(self.a, self.b),
            Some(l) => EdgeRepr::Triple(self.a, self.b, l),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for EdgeSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(match EdgeRepr::deserialize(d)? {
            EdgeRepr::Pair(a, b) => EdgeSpec { a, b, link: None },
            EdgeRepr::Triple(a, b, l) => EdgeSpec { a, b, link: Some(l) },
        })
    }
}

/// Recipe for a topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySpec {
    /// `width x height` lattice with 4-neighborhood.
    Grid { width: u32, height: u32 },
    /// Dense communities joined by bridge edges. Inside a community every
    /// pair of cells is adjacent except diametrically opposite ones (for even
    /// sizes of at least 4). `inter_edges` bridges join each consecutive pair
    /// of communities (a ring when there are three or more).
    Community {
        n_communities: u32,
        cells_per_community: u32,
        inter_edges: u32,
    },
    Explicit { n_cells: u32, edges: Vec<EdgeSpec> },
}

impl TopologySpec {
    /// Parses the text format: a `cells N` header followed by one
    /// `a b [direct|s1only]` edge per line. Blank lines and `#` comments are
    /// ignored.
    pub fn from_text(text: &str) -> Result<TopologySpec, TopologyError> {
        let mut n_cells = None;
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let parse_err = |message: String| TopologyError::Parse { line: line_no, message };
            if n_cells.is_none() {
                if toks.len() != 2 || toks[0] != "cells" {
                    return Err(parse_err("expected header `cells N`".into()));
                }
                let n = toks[1]
                    .parse::<u32>()
                    .map_err(|e| parse_err(format!("bad cell count: {e}")))?;
                n_cells = Some(n);
                continue;
            }
            if toks.len() < 2 || toks.len() > 3 {
                return Err(parse_err("expected `a b [direct|s1only]`".into()));
            }
            let a = toks[0]
                .parse::<u32>()
                .map_err(|e| parse_err(format!("bad cell id `{}`: {e}", toks[0])))?;
            let b = toks[1]
                .parse::<u32>()
                .map_err(|e| parse_err(format!("bad cell id `{}`: {e}", toks[1])))?;
            let link = match toks.get(2) {
                None => None,
                Some(&"direct") => Some(LinkKind::Direct),
                Some(&"s1only") => Some(LinkKind::S1only),
                Some(other) => return Err(parse_err(format!("unknown link kind `{other}`"))),
            };
            edges.push(EdgeSpec { a, b, link });
        }
        let n_cells = n_cells.ok_or(TopologyError::Parse {
            line: 1,
            message: "missing `cells N` header".into(),
        })?;
        Ok(TopologySpec::Explicit { n_cells, edges })
    }
}

/// Immutable, validated cell graph.
#[derive(Debug, Clone)]
pub struct Topology {
    adjacency: Vec<Vec<CellId>>,
    direct: Vec<Vec<bool>>,
    coordinates: Option<Vec<(f64, f64)>>,
    communities: Option<Vec<u32>>,
}

impl Topology {
    pub fn n_cells(&self) -> usize {
        self.adjacency.len()
    }

    pub fn cells(&self) -> impl Iterator<Item = CellId> {
        (0..self.adjacency.len() as u32).map(CellId)
    }

    fn check(&self, cell: CellId) -> Result<(), TopologyError> {
        if cell.index() < self.adjacency.len() {
            Ok(())
        } else {
            Err(TopologyError::UnknownCell(cell))
        }
    }

    /// Adjacency partners of `cell` in ascending id order.
    pub fn neighbors(&self, cell: CellId) -> Result<&[CellId], TopologyError> {
        self.check(cell)?;
        Ok(&self.adjacency[cell.index()])
    }

    pub fn is_adjacent(&self, a: CellId, b: CellId) -> bool {
        a.index() < self.adjacency.len() && self.adjacency[a.index()].binary_search(&b).is_ok()
    }

    pub fn has_direct_link(&self, a: CellId, b: CellId) -> Result<bool, TopologyError> {
        self.check(a)?;
        self.check(b)?;
        Ok(match self.adjacency[a.index()].binary_search(&b) {
            Ok(pos) => self.direct[a.index()][pos],
            Err(_) => false,
        })
    }

    /// Number of undirected adjacency pairs.
    pub fn n_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Undirected edges `(a, b)` with `a < b`, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (CellId, CellId)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(a, ns)| {
            let a = CellId(a as u32);
            ns.iter().copied().filter(move |&b| a < b).map(move |b| (a, b))
        })
    }

    pub fn coordinates(&self) -> Option<&[(f64, f64)]> {
        self.coordinates.as_deref()
    }

    pub fn communities(&self) -> Option<&[u32]> {
        self.communities.as_deref()
    }

    pub fn community_of(&self, cell: CellId) -> Option<u32> {
        self.communities.as_ref().map(|c| c[cell.index()])
    }

    /// Hop distances from `source` to every cell.
    pub fn hop_distances(&self, source: CellId) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.n_cells()];
        let mut queue = VecDeque::new();
        dist[source.index()] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u.index()] {
                if dist[v.index()] == u32::MAX {
                    dist[v.index()] = dist[u.index()] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    fn from_edges(
        n_cells: usize,
        edges: &[(u32, u32, Option<LinkKind>)],
        p_x2: f64,
        rng: &mut impl Rng,
        coordinates: Option<Vec<(f64, f64)>>,
        communities: Option<Vec<u32>>,
    ) -> Result<Topology, TopologyError> {
        if !(0.0..=1.0).contains(&p_x2) {
            return Err(TopologyError::MalformedSpec(format!(
                "direct-link coverage {p_x2} outside [0, 1]"
            )));
        }
        if n_cells < 2 {
            return Err(TopologyError::MalformedSpec(
                "a topology needs at least two cells".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        let mut canonical = Vec::with_capacity(edges.len());
        for &(a, b, link) in edges {
            if a as usize >= n_cells || b as usize >= n_cells {
                return Err(TopologyError::MalformedSpec(format!(
                    "edge ({a}, {b}) references a cell outside [0, {n_cells})"
                )));
            }
            if a == b {
                return Err(TopologyError::MalformedSpec(format!("self-loop on cell {a}")));
            }
            let key = (a.min(b), a.max(b));
            if !seen.insert(key) {
                return Err(TopologyError::MalformedSpec(format!(
                    "edge ({}, {}) listed twice",
                    key.0, key.1
                )));
            }
            canonical.push((key.0, key.1, link));
        }
        canonical.sort_by_key(|&(a, b, _)| (a, b));

        let mut adjacency: Vec<Vec<(CellId, bool)>> = vec![Vec::new(); n_cells];
        for (a, b, link) in canonical {
            // One draw per edge regardless of overrides keeps the stream aligned.
            let drawn = rng.gen_bool(p_x2);
            let direct = match link {
                Some(LinkKind::Direct) => true,
                Some(LinkKind::S1only) => false,
                None => drawn,
            };
            adjacency[a as usize].push((CellId(b), direct));
            adjacency[b as usize].push((CellId(a), direct));
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(c, _)| c);
        }
        let topo = Topology {
            direct: adjacency.iter().map(|l| l.iter().map(|&(_, d)| d).collect()).collect(),
            adjacency: adjacency.into_iter().map(|l| l.into_iter().map(|(c, _)| c).collect()).collect(),
            coordinates,
            communities,
        };
        if topo.hop_distances(CellId(0)).contains(&u32::MAX) {
            return Err(TopologyError::DisconnectedGraph);
        }
        Ok(topo)
    }
}

/// Builds and validates a topology. Each adjacency pair without an explicit
/// link kind gets a direct link with probability `p_x2`.
pub fn build_topology(
    spec: &TopologySpec,
    p_x2: f64,
    rng: &mut impl Rng,
) -> Result<Topology, TopologyError> {
    match *spec {
        TopologySpec::Grid { width, height } => {
            let (w, h) = (width as usize, height as usize);
            let mut edges = Vec::new();
            let mut coords = Vec::with_capacity(w * h);
            for y in 0..h {
                for x in 0..w {
                    let id = (y * w + x) as u32;
                    coords.push((x as f64, y as f64));
                    if x + 1 < w {
                        edges.push((id, id + 1, None));
                    }
                    if y + 1 < h {
                        edges.push((id, id + w as u32, None));
                    }
                }
            }
            Topology::from_edges(w * h, &edges, p_x2, rng, Some(coords), None)
        }
        TopologySpec::Community {
            n_communities,
            cells_per_community,
            inter_edges,
        } => {
            let (nc, size) = (n_communities, cells_per_community);
            if nc == 0 || size == 0 {
                return Err(TopologyError::MalformedSpec(
                    "community topology needs at least one community of one cell".into(),
                ));
            }
            if inter_edges > size {
                return Err(TopologyError::MalformedSpec(format!(
                    "{inter_edges} bridges per community pair exceed community size {size}"
                )));
            }
            let id = |c: u32, j: u32| c * size + j;
            let mut edges = Vec::new();
            for c in 0..nc {
                for j1 in 0..size {
                    for j2 in j1 + 1..size {
                        let opposite = size >= 4 && size % 2 == 0 && j2 - j1 == size / 2;
                        if !opposite {
                            edges.push((id(c, j1), id(c, j2), None));
                        }
                    }
                }
            }
            let pairs: Vec<(u32, u32)> = match nc {
                1 => Vec::new(),
                2 => vec![(0, 1)],
                _ => (0..nc).map(|c| (c, (c + 1) % nc)).collect(),
            };
            for (c1, c2) in pairs {
                for j in 0..inter_edges {
                    edges.push((id(c1, j), id(c2, j), None));
                }
            }
            let (big, small) = if nc == 1 { (0.0, 1.0) } else { (3.0, 1.0) };
            let mut coords = Vec::new();
            let mut labels = Vec::new();
            let center = |c: u32| {
                let a = TAU * c as f64 / nc as f64;
                (big * a.cos(), big * a.sin())
            };
            for c in 0..nc {
                let (cx, cy) = center(c);
                // local cell 0, a bridge endpoint, faces the next community
                let (nx, ny) = center((c + 1) % nc);
                let phi = if nc == 1 { 0.0 } else { (ny - cy).atan2(nx - cx) };
                for j in 0..size {
                    let theta = phi + TAU * j as f64 / size as f64;
                    coords.push((cx + small * theta.cos(), cy + small * theta.sin()));
                    labels.push(c);
                }
            }
            Topology::from_edges(
                (nc * size) as usize,
                &edges,
                p_x2,
                rng,
                Some(coords),
                Some(labels),
            )
        }
        TopologySpec::Explicit { n_cells, ref edges } => {
            let edges: Vec<_> = edges.iter().map(|e| (e.a, e.b, e.link)).collect();
            Topology::from_edges(n_cells as usize, &edges, p_x2, rng, None, None)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    fn path(n: u32) -> Topology {
        let edges = (0..n - 1).map(|i| EdgeSpec { a: i, b: i + 1, link: None }).collect();
        build_topology(&TopologySpec::Explicit { n_cells: n, edges }, 1.0, &mut rng()).unwrap()
    }

    #[test]
    fn grid_2x2() {
        let t = build_topology(&TopologySpec::Grid { width: 2, height: 2 }, 1.0, &mut rng()).unwrap();
        assert_eq!(t.n_cells(), 4);
        assert_eq!(t.n_edges(), 4);
        assert!(t.edges().all(|(a, b)| t.has_direct_link(a, b).unwrap()));
        assert_eq!(t.neighbors(CellId(0)).unwrap(), &[CellId(1), CellId(2)]);
    }

    #[test]
    fn two_triangles_and_a_bridge() {
        let spec = TopologySpec::Community {
            n_communities: 2,
            cells_per_community: 3,
            inter_edges: 1,
        };
        let t = build_topology(&spec, 1.0, &mut rng()).unwrap();
        assert_eq!(t.n_cells(), 6);
        assert_eq!(t.n_edges(), 7);
        for c in 0..2u32 {
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        assert!(t.is_adjacent(CellId(c * 3 + i), CellId(c * 3 + j)));
                    }
                }
            }
        }
        assert!(t.is_adjacent(CellId(0), CellId(3)));
        assert_eq!(t.communities().unwrap(), &[0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn even_communities_drop_opposite_pairs() {
        let spec = TopologySpec::Community {
            n_communities: 2,
            cells_per_community: 12,
            inter_edges: 2,
        };
        let t = build_topology(&spec, 1.0, &mut rng()).unwrap();
        assert!(!t.is_adjacent(CellId(0), CellId(6)));
        assert!(t.is_adjacent(CellId(0), CellId(5)));
        assert_eq!(t.n_edges(), 2 * (66 - 6) + 2);
    }

    #[test]
    fn self_loop_is_malformed() {
        let spec = TopologySpec::Explicit {
            n_cells: 2,
            edges: vec![EdgeSpec { a: 0, b: 0, link: None }],
        };
        assert!(matches!(
            build_topology(&spec, 1.0, &mut rng()),
            Err(TopologyError::MalformedSpec(_))
        ));
    }

    #[test]
    fn out_of_range_and_duplicate_edges_are_malformed() {
        let bad = TopologySpec::Explicit {
            n_cells: 2,
            edges: vec![EdgeSpec { a: 0, b: 5, link: None }],
        };
        assert!(matches!(build_topology(&bad, 1.0, &mut rng()), Err(TopologyError::MalformedSpec(_))));
        let dup = TopologySpec::Explicit {
            n_cells: 2,
            edges: vec![EdgeSpec { a: 0, b: 1, link: None }, EdgeSpec { a: 1, b: 0, link: None }],
        };
        assert!(matches!(build_topology(&dup, 1.0, &mut rng()), Err(TopologyError::MalformedSpec(_))));
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let spec = TopologySpec::Explicit {
            n_cells: 4,
            edges: vec![EdgeSpec { a: 0, b: 1, link: None }, EdgeSpec { a: 2, b: 3, link: None }],
        };
        assert_eq!(build_topology(&spec, 1.0, &mut rng()).unwrap_err(), TopologyError::DisconnectedGraph);
    }

    #[test]
    fn path_neighbors() {
        let t = path(3);
        assert_eq!(t.neighbors(CellId(1)).unwrap(), &[CellId(0), CellId(2)]);
        assert_eq!(t.neighbors(CellId(5)).unwrap_err(), TopologyError::UnknownCell(CellId(5)));
    }

    #[test]
    fn coverage_extremes() {
        let spec = TopologySpec::Grid { width: 5, height: 4 };
        let none = build_topology(&spec, 0.0, &mut rng()).unwrap();
        assert!(none.edges().all(|(a, b)| !none.has_direct_link(a, b).unwrap()));
        let all = build_topology(&spec, 1.0, &mut rng()).unwrap();
        assert!(all.edges().all(|(a, b)| all.has_direct_link(a, b).unwrap()));
    }

    #[test]
    fn partial_coverage_excludes_some_pairs() {
        let t = build_topology(&TopologySpec::Grid { width: 10, height: 10 }, 0.5, &mut rng()).unwrap();
        let direct = t.edges().filter(|&(a, b)| t.has_direct_link(a, b).unwrap()).count();
        assert!(direct > 0 && direct < t.n_edges());
        for (a, b) in t.edges() {
            assert_eq!(t.has_direct_link(a, b).unwrap(), t.has_direct_link(b, a).unwrap());
        }
        // non-adjacent pairs never have a direct link
        assert!(!t.has_direct_link(CellId(0), CellId(99)).unwrap());
    }

    #[test]
    fn text_format() {
        let text = "cells 3\n0 1 direct\n1 2 s1only\n# comment\n\n";
        let spec = TopologySpec::from_text(text).unwrap();
        let t = build_topology(&spec, 1.0, &mut rng()).unwrap();
        assert!(t.has_direct_link(CellId(0), CellId(1)).unwrap());
        assert!(!t.has_direct_link(CellId(2), CellId(1)).unwrap());

        let err = TopologySpec::from_text("cells 3\n0 x\n").unwrap_err();
        assert!(matches!(err, TopologyError::Parse { line: 2, .. }));
        assert!(TopologySpec::from_text("0 1\n").is_err());
    }
}
