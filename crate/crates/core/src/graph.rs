//! Signed and temporal signed graph data model plus structural statistics.
//!
//! A snapshot stores disjoint positive/negative edge sets over a dense 0-based
//! node index space. Undirected snapshots store each edge once under the
//! canonical `(min, max)` key and answer lookups symmetrically. All types are
//! immutable after construction and safe to share across threads read-only.

use std::collections::BTreeSet;

use crate::linalg::Mat;
use crate::{Error, Result};

pub type NodeId = usize;

/// One signed interaction. `sign` is strictly ±1; absence of an edge is
/// represented by absence, never by sign 0. Self-loops are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SignedEdge {
    pub src: NodeId,
    pub dst: NodeId,
    pub sign: i8,
    pub timestamp: Option<i64>,
}

impl SignedEdge {
    pub fn new(src: NodeId, dst: NodeId, sign: i8, timestamp: Option<i64>) -> Result<Self> {
        if sign != 1 && sign != -1 {
            return Err(Error::Data(format!("edge sign must be +1 or -1, got {sign}")));
        }
        if src == dst {
            return Err(Error::Data(format!("self-loop at node {src} rejected")));
        }
        Ok(SignedEdge { src, dst, sign, timestamp })
    }
}

/// One time-slice of a temporal signed network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotGraph {
    node_count: usize,
    directed: bool,
    pos_edges: BTreeSet<(NodeId, NodeId)>,
    neg_edges: BTreeSet<(NodeId, NodeId)>,
}

impl SnapshotGraph {
    /// Validating constructor. Duplicate same-sign pairs are deduplicated
    /// silently; the same pair with conflicting signs is an error, as are
    /// self-loops and endpoints outside `0..n`.
    pub fn build(n: usize, edges: &[SignedEdge], directed: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::Data("snapshot needs at least one node".into()));
        }
        let mut g = SnapshotGraph {
            node_count: n,
            directed,
            pos_edges: BTreeSet::new(),
            neg_edges: BTreeSet::new(),
        };
        for e in edges {
            g.insert_edge(e.src, e.dst, e.sign)?;
        }
        Ok(g)
    }

    /// Empty snapshot; used by generators that insert edges incrementally.
    pub fn empty(n: usize, directed: bool) -> Result<Self> {
        Self::build(n, &[], directed)
    }

    fn canonical(&self, u: NodeId, v: NodeId) -> (NodeId, NodeId) {
        if self.directed || u <= v {
            (u, v)
        } else {
            (v, u)
        }
    }

    pub(crate) fn insert_edge(&mut self, src: NodeId, dst: NodeId, sign: i8) -> Result<()> {
        if sign != 1 && sign != -1 {
            return Err(Error::Data(format!("edge sign must be +1 or -1, got {sign}")));
        }
        if src == dst {
            return Err(Error::Data(format!("self-loop at node {src} rejected")));
        }
        if src >= self.node_count || dst >= self.node_count {
            return Err(Error::Data(format!(
                "edge ({src},{dst}) outside node range 0..{}",
                self.node_count
            )));
        }
        let key = self.canonical(src, dst);
        let (own, other) = if sign > 0 {
            (&mut self.pos_edges, &self.neg_edges)
        } else {
            (&mut self.neg_edges, &self.pos_edges)
        };
        if other.contains(&key) {
            return Err(Error::Data(format!(
                "conflicting signs for edge ({src},{dst}): positive and negative sets must stay disjoint"
            )));
        }
        own.insert(key);
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn pos_edge_count(&self) -> usize {
        self.pos_edges.len()
    }

    pub fn neg_edge_count(&self) -> usize {
        self.neg_edges.len()
    }

    pub fn edge_count(&self) -> usize {
        self.pos_edges.len() + self.neg_edges.len()
    }

    /// Fraction of edges that are positive; 0 for an empty edge set.
    pub fn pos_fraction(&self) -> f64 {
        if self.edge_count() == 0 {
            0.0
        } else {
            self.pos_edges.len() as f64 / self.edge_count() as f64
        }
    }

    /// Signed adjacency lookup: +1 / −1 / 0, symmetric for undirected graphs.
    pub fn signed_adjacency_entry(&self, u: NodeId, v: NodeId) -> Result<i8> {
        if u >= self.node_count || v >= self.node_count {
            return Err(Error::Data(format!(
                "adjacency index ({u},{v}) outside node range 0..{}",
                self.node_count
            )));
        }
        Ok(self.entry_unchecked(u, v))
    }

    #[inline]
    pub(crate) fn entry_unchecked(&self, u: NodeId, v: NodeId) -> i8 {
        let key = self.canonical(u, v);
        if self.pos_edges.contains(&key) {
            1
        } else if self.neg_edges.contains(&key) {
            -1
        } else {
            0
        }
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.entry_unchecked(u, v) != 0
    }

    /// All edges in deterministic `(src, dst)` order with their signs.
    /// Timestamps are not part of snapshot state and come back as `None`.
    pub fn edges(&self) -> Vec<SignedEdge> {
        let mut out: Vec<SignedEdge> = self
            .pos_edges
            .iter()
            .map(|&(s, d)| SignedEdge { src: s, dst: d, sign: 1, timestamp: None })
            .chain(
                self.neg_edges
                    .iter()
                    .map(|&(s, d)| SignedEdge { src: s, dst: d, sign: -1, timestamp: None }),
            )
            .collect();
        out.sort_by_key(|e| (e.src, e.dst));
        out
    }

    /// Dense signed adjacency matrix (directed graphs: as stored; undirected:
    /// symmetric by construction).
    pub fn signed_adjacency(&self) -> Mat {
        let n = self.node_count;
        let mut a = Mat::zeros(n, n);
        for (&(u, v), s) in self
            .pos_edges
            .iter()
            .map(|e| (e, 1.0))
            .chain(self.neg_edges.iter().map(|e| (e, -1.0)))
        {
            *a.at_mut(u, v) = s;
            if !self.directed {
                *a.at_mut(v, u) = s;
            }
        }
        a
    }

    /// `sign(A + Aᵀ)` with opposite-sign ties resolved to 0. The single
    /// consistent symmetric matrix used for spectral features and attention
    /// relation classes.
    pub fn symmetrized_adjacency(&self) -> Mat {
        let a = self.signed_adjacency();
        let n = self.node_count;
        let mut out = Mat::zeros(n, n);
        for u in 0..n {
            for v in 0..n {
                let s = a.at(u, v) + a.at(v, u);
                *out.at_mut(u, v) = if s > 0.0 {
                    1.0
                } else if s < 0.0 {
                    -1.0
                } else {
                    0.0
                };
            }
        }
        out
    }

    /// Undirected neighbor sets over both polarities (structure only);
    /// used for triangle detection and clustering statistics.
    pub fn neighbor_sets(&self) -> Vec<BTreeSet<NodeId>> {
        let mut nb = vec![BTreeSet::new(); self.node_count];
        for &(u, v) in self.pos_edges.iter().chain(self.neg_edges.iter()) {
            nb[u].insert(v);
            nb[v].insert(u);
        }
        nb
    }

    /// Total degree per node: undirected edges count once per endpoint,
    /// directed edges contribute out-degree at `src` and in-degree at `dst`.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.node_count];
        for &(u, v) in self.pos_edges.iter().chain(self.neg_edges.iter()) {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    /// Average local clustering coefficient over the unsigned structure.
    pub fn clustering_coefficient(&self) -> f64 {
        let nb = self.neighbor_sets();
        let n = self.node_count;
        let mut total = 0.0;
        for u in 0..n {
            let k = nb[u].len();
            if k < 2 {
                continue;
            }
            let mut links = 0usize;
            let neigh: Vec<NodeId> = nb[u].iter().copied().collect();
            for i in 0..neigh.len() {
                for j in (i + 1)..neigh.len() {
                    if nb[neigh[i]].contains(&neigh[j]) {
                        links += 1;
                    }
                }
            }
            total += 2.0 * links as f64 / (k * (k - 1)) as f64;
        }
        total / n as f64
    }
}

/// Degree-distribution summary of one snapshot.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DegreeStats {
    pub median_degree: f64,
    pub mean_degree: f64,
    pub max_degree: f64,
    /// `max / median`; 0 when the graph has no edges (and, degenerately,
    /// whenever the median degree is 0).
    pub max_to_median_ratio: f64,
    /// Fraction of edges incident to the top-⌈p·n⌉ highest-degree nodes.
    pub top_fraction_edge_share: f64,
}

/// Total-degree statistics; `top_percent` selects the top-⌈top_percent·n⌉
/// nodes (ties broken toward lower node index) for the edge-share figure.
pub fn degree_statistics(g: &SnapshotGraph, top_percent: f64) -> DegreeStats {
    let deg = g.degrees();
    let n = g.node_count();
    let edge_count = g.edge_count();
    if edge_count == 0 {
        return DegreeStats {
            median_degree: 0.0,
            mean_degree: 0.0,
            max_degree: 0.0,
            max_to_median_ratio: 0.0,
            top_fraction_edge_share: 0.0,
        };
    }
    let mut sorted = deg.clone();
    sorted.sort_unstable();
    let median = if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    };
    let mean = deg.iter().sum::<usize>() as f64 / n as f64;
    let max = *sorted.last().unwrap() as f64;

    let take = ((top_percent * n as f64).ceil() as usize).clamp(1, n);
    let mut order: Vec<NodeId> = (0..n).collect();
    order.sort_by(|&a, &b| deg[b].cmp(&deg[a]).then(a.cmp(&b)));
    let top: BTreeSet<NodeId> = order[..take].iter().copied().collect();
    let mut incident = 0usize;
    for e in g.edges() {
        if top.contains(&e.src) || top.contains(&e.dst) {
            incident += 1;
        }
    }

    DegreeStats {
        median_degree: median,
        mean_degree: mean,
        max_degree: max,
        max_to_median_ratio: if median > 0.0 { max / median } else { 0.0 },
        top_fraction_edge_share: incident as f64 / edge_count as f64,
    }
}

/// Ordered snapshot sequence over a fixed node set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalSignedGraph {
    snapshots: Vec<SnapshotGraph>,
}

impl TemporalSignedGraph {
    pub fn new(snapshots: Vec<SnapshotGraph>) -> Result<Self> {
        let first = snapshots
            .first()
            .ok_or_else(|| Error::Data("temporal graph needs at least one snapshot".into()))?;
        let (n, directed) = (first.node_count(), first.directed());
        for (t, s) in snapshots.iter().enumerate() {
            if s.node_count() != n {
                return Err(Error::Data(format!(
                    "snapshot {t} has {} nodes, expected the shared node count {n}",
                    s.node_count()
                )));
            }
            if s.directed() != directed {
                return Err(Error::Data(format!(
                    "snapshot {t} directedness differs from snapshot 0"
                )));
            }
        }
        Ok(TemporalSignedGraph { snapshots })
    }

    pub fn node_count(&self) -> usize {
        self.snapshots[0].node_count()
    }

    pub fn directed(&self) -> bool {
        self.snapshots[0].directed()
    }

    /// Number of snapshots (the sequence length T).
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires ≥1 snapshot
    }

    pub fn snapshot(&self, t: usize) -> &SnapshotGraph {
        &self.snapshots[t]
    }

    pub fn snapshots(&self) -> &[SnapshotGraph] {
        &self.snapshots
    }
}
