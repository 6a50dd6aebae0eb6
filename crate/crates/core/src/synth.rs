//! Reproducible temporal signed network generators.
//!
//! Two families: a small-world generator (ring lattice + rewiring, WS-style)
//! and a preferential-attachment generator (BA-style). Both evolve an initial
//! snapshot through per-step edge persistence, rare sign flips, and biased
//! new-edge formation — triangle closure with balance-consistent signs for
//! the small-world family, degree-proportional attachment with hub
//! reputation effects for the preferential-attachment family. Given the same
//! config (including seed), output is bit-identical across runs.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{NodeId, SignedEdge, SnapshotGraph, TemporalSignedGraph};
use crate::{Error, Result};

/// Note recorded in generation manifests: how the "k nearest neighbors"
/// wording maps onto `half_k`.
pub const WS_DEGREE_READING: &str =
    "half_k counts lattice neighbors per side; half_k=3 yields total initial degree 6";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WsConfig {
    pub n: usize,
    /// Lattice neighbors per side; total initial degree is 2·half_k.
    pub half_k: usize,
    pub rewire_p: f64,
    pub num_snapshots: usize,
    pub sign_flip_p: f64,
    pub persist_triangle: f64,
    pub persist_other: f64,
    /// Expected new edges per node per step; ⌊rate·n⌋ edges are added.
    pub new_edge_rate: f64,
    pub pos_fraction: f64,
    pub seed: u64,
}

impl Default for WsConfig {
    fn default() -> Self {
        WsConfig {
            n: 500,
            half_k: 3,
            rewire_p: 0.1,
            num_snapshots: 6,
            sign_flip_p: 0.02,
            persist_triangle: 0.95,
            persist_other: 0.80,
            new_edge_rate: 0.05,
            pos_fraction: 0.90,
            seed: 0,
        }
    }
}

impl WsConfig {
    fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("rewire_p", self.rewire_p),
            ("sign_flip_p", self.sign_flip_p),
            ("persist_triangle", self.persist_triangle),
            ("persist_other", self.persist_other),
            ("pos_fraction", self.pos_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0,1], got {p}")));
            }
        }
        if self.half_k == 0 || self.n <= 2 * self.half_k {
            return Err(Error::Config(format!(
                "need n > 2·half_k (got n={}, half_k={})",
                self.n, self.half_k
            )));
        }
        if self.num_snapshots < 2 {
            return Err(Error::Config("num_snapshots must be ≥ 2".into()));
        }
        if !(self.new_edge_rate >= 0.0 && self.new_edge_rate.is_finite()) {
            return Err(Error::Config("new_edge_rate must be finite and ≥ 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaConfig {
    pub n: usize,
    /// Edges each newly attached node brings during initial growth.
    pub m_attach: usize,
    pub num_snapshots: usize,
    pub sign_flip_p: f64,
    pub persist_hub: f64,
    pub persist_other: f64,
    /// Degree quantile above which a node counts as a hub.
    pub hub_degree_quantile: f64,
    pub pos_fraction: f64,
    /// Extra removal probability for edges with no hub endpoint.
    pub prune_low_degree_p: f64,
    /// Expected new preferential edges per node per step; ⌊rate·n⌋ added.
    pub new_edge_rate: f64,
    pub seed: u64,
}

impl Default for BaConfig {
    fn default() -> Self {
        BaConfig {
            n: 500,
            m_attach: 3,
            num_snapshots: 6,
            sign_flip_p: 0.02,
            persist_hub: 0.98,
            persist_other: 0.90,
            hub_degree_quantile: 0.90,
            pos_fraction: 0.90,
            prune_low_degree_p: 0.02,
            new_edge_rate: 0.05,
            seed: 0,
        }
    }
}

impl BaConfig {
    fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("sign_flip_p", self.sign_flip_p),
            ("persist_hub", self.persist_hub),
            ("persist_other", self.persist_other),
            ("hub_degree_quantile", self.hub_degree_quantile),
            ("pos_fraction", self.pos_fraction),
            ("prune_low_degree_p", self.prune_low_degree_p),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must be in [0,1], got {p}")));
            }
        }
        if self.m_attach == 0 {
            return Err(Error::Config("m_attach must be ≥ 1".into()));
        }
        if self.n <= self.m_attach + 1 {
            return Err(Error::Config(format!(
                "need n > m_attach + 1 (got n={}, m_attach={})",
                self.n, self.m_attach
            )));
        }
        if self.num_snapshots < 2 {
            return Err(Error::Config("num_snapshots must be ≥ 2".into()));
        }
        if !(self.new_edge_rate >= 0.0 && self.new_edge_rate.is_finite()) {
            return Err(Error::Config("new_edge_rate must be finite and ≥ 0".into()));
        }
        Ok(())
    }
}

/// Mutable undirected signed edge map used while evolving one snapshot.
struct Working {
    n: usize,
    map: BTreeMap<(NodeId, NodeId), i8>,
    nb: Vec<BTreeSet<NodeId>>,
}

impl Working {
    fn new(n: usize) -> Self {
        Working { n, map: BTreeMap::new(), nb: vec![BTreeSet::new(); n] }
    }

    fn key(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
        if u <= v {
            (u, v)
        } else {
            (v, u)
        }
    }

    fn insert(&mut self, u: NodeId, v: NodeId, sign: i8) {
        debug_assert_ne!(u, v);
        self.map.insert(Self::key(u, v), sign);
        self.nb[u].insert(v);
        self.nb[v].insert(u);
    }

    fn contains(&self, u: NodeId, v: NodeId) -> bool {
        self.map.contains_key(&Self::key(u, v))
    }

    fn sign(&self, u: NodeId, v: NodeId) -> Option<i8> {
        self.map.get(&Self::key(u, v)).copied()
    }

    fn into_snapshot(self) -> Result<SnapshotGraph> {
        let edges: Vec<SignedEdge> = self
            .map
            .iter()
            .map(|(&(u, v), &s)| SignedEdge { src: u, dst: v, sign: s, timestamp: None })
            .collect();
        SnapshotGraph::build(self.n, &edges, false)
    }
}

fn draw_sign(rng: &mut ChaCha8Rng, pos_fraction: f64) -> i8 {
    if rng.random_bool(pos_fraction) {
        1
    } else {
        -1
    }
}

/// Adds `count` new edges, `triangle_frac` of them closing open triads with
/// balance-consistent signs (the product of the two existing triad signs),
/// the rest uniform random pairs signed +1 w.p. `pos_fraction`.
fn add_new_edges_ws(
    w: &mut Working,
    rng: &mut ChaCha8Rng,
    count: usize,
    triangle_frac: f64,
    pos_fraction: f64,
) {
    const ATTEMPTS: usize = 50;
    for _ in 0..count {
        let mut placed = false;
        if rng.random_bool(triangle_frac) {
            // Triangle closure: find w with two non-adjacent neighbors u, v.
            for _ in 0..ATTEMPTS {
                let c = rng.random_range(0..w.n);
                if w.nb[c].len() < 2 {
                    continue;
                }
                let neigh: Vec<NodeId> = w.nb[c].iter().copied().collect();
                let i = rng.random_range(0..neigh.len());
                let mut j = rng.random_range(0..neigh.len() - 1);
                if j >= i {
                    j += 1;
                }
                let (u, v) = (neigh[i], neigh[j]);
                if w.contains(u, v) {
                    continue;
                }
                let sign = w.sign(c, u).unwrap() * w.sign(c, v).unwrap();
                w.insert(u, v, sign);
                placed = true;
                break;
            }
        }
        if !placed {
            // Uniform random pair (also the fallback when no open triad found).
            for _ in 0..ATTEMPTS {
                let u = rng.random_range(0..w.n);
                let v = rng.random_range(0..w.n);
                if u == v || w.contains(u, v) {
                    continue;
                }
                let sign = draw_sign(rng, pos_fraction);
                w.insert(u, v, sign);
                break;
            }
        }
    }
}

/// Small-world temporal signed network generator.
pub fn generate_ws(cfg: &WsConfig) -> Result<TemporalSignedGraph> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n;

    // Snapshot 0: ring lattice, each edge rewired with probability rewire_p
    // (the far endpoint moves; degree of the near endpoint is preserved).
    let mut w = Working::new(n);
    for k in 1..=cfg.half_k {
        for u in 0..n {
            let v = (u + k) % n;
            let (mut a, mut b) = (u, v);
            if cfg.rewire_p > 0.0 && rng.random_bool(cfg.rewire_p) {
                for _ in 0..50 {
                    let cand = rng.random_range(0..n);
                    if cand != a && !w.contains(a, cand) {
                        b = cand;
                        break;
                    }
                }
            }
            if a == b || w.contains(a, b) {
                (a, b) = (u, v); // rewire failed; keep the lattice edge if free
                if w.contains(a, b) {
                    continue;
                }
            }
            let sign = draw_sign(&mut rng, cfg.pos_fraction);
            w.insert(a, b, sign);
        }
    }
    let mut snapshots = vec![w.into_snapshot()?];

    for _t in 1..cfg.num_snapshots {
        let prev = snapshots.last().unwrap();
        let prev_nb = prev.neighbor_sets();
        let mut cur = Working::new(n);
        // (a) persistence: triangle edges are stickier; (b) rare sign flips.
        for e in prev.edges() {
            let in_triangle = prev_nb[e.src].intersection(&prev_nb[e.dst]).next().is_some();
            let keep_p = if in_triangle { cfg.persist_triangle } else { cfg.persist_other };
            if rng.random_bool(keep_p) {
                let sign =
                    if rng.random_bool(cfg.sign_flip_p) { -e.sign } else { e.sign };
                cur.insert(e.src, e.dst, sign);
            }
        }
        // (c) new edges, 70% triangle-closing.
        let count = (cfg.new_edge_rate * n as f64).floor() as usize;
        add_new_edges_ws(&mut cur, &mut rng, count, 0.7, cfg.pos_fraction);
        snapshots.push(cur.into_snapshot()?);
    }
    TemporalSignedGraph::new(snapshots)
}

/// Degree value at the given quantile (0-indexed order statistic at
/// ⌊q·n⌋, clamped). Nodes with degree ≥ this value count as hubs.
fn hub_threshold(degrees: &[usize], q: f64) -> usize {
    let mut sorted = degrees.to_vec();
    sorted.sort_unstable();
    let idx = ((q * sorted.len() as f64).floor() as usize).min(sorted.len() - 1);
    sorted[idx].max(1) // an isolated-node threshold would make everyone a hub
}

/// Samples one endpoint proportionally to degree via the repeated-endpoints
/// list; falls back to uniform when the graph has no edges.
fn preferential_pick(targets: &[NodeId], n: usize, rng: &mut ChaCha8Rng) -> NodeId {
    if targets.is_empty() {
        rng.random_range(0..n)
    } else {
        targets[rng.random_range(0..targets.len())]
    }
}

/// Preferential-attachment temporal signed network generator.
pub fn generate_ba(cfg: &BaConfig) -> Result<TemporalSignedGraph> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n;
    let m = cfg.m_attach;

    // Snapshot 0: clique on m+1 seed nodes, then each node attaches m edges
    // to existing nodes sampled proportionally to current degree.
    let mut w = Working::new(n);
    let mut targets: Vec<NodeId> = Vec::new();
    for u in 0..=m {
        for v in (u + 1)..=m {
            w.insert(u, v, draw_sign(&mut rng, cfg.pos_fraction));
            targets.push(u);
            targets.push(v);
        }
    }
    for u in (m + 1)..n {
        let mut chosen: BTreeSet<NodeId> = BTreeSet::new();
        let mut attempts = 0;
        while chosen.len() < m && attempts < 50 * m {
            let v = preferential_pick(&targets, u, &mut rng);
            attempts += 1;
            if v != u && !chosen.contains(&v) {
                chosen.insert(v);
            }
        }
        // Guaranteed fallback: fill from the lowest unchosen indices.
        let mut v = 0;
        while chosen.len() < m {
            if v != u && !chosen.contains(&v) {
                chosen.insert(v);
            }
            v += 1;
        }
        for &v in &chosen {
            w.insert(u, v, draw_sign(&mut rng, cfg.pos_fraction));
            targets.push(u);
            targets.push(v);
        }
    }
    let mut snapshots = vec![w.into_snapshot()?];

    for _t in 1..cfg.num_snapshots {
        let prev = snapshots.last().unwrap();
        let prev_deg = prev.degrees();
        let thr = hub_threshold(&prev_deg, cfg.hub_degree_quantile);
        let is_hub = |u: NodeId| prev_deg[u] >= thr;

        let mut cur = Working::new(n);
        for e in prev.edges() {
            let hubby = is_hub(e.src) || is_hub(e.dst);
            let keep_p = if hubby { cfg.persist_hub } else { cfg.persist_other };
            if !rng.random_bool(keep_p) {
                continue;
            }
            // Only non-hub edges face the extra low-degree pruning pass.
            if !hubby && cfg.prune_low_degree_p > 0.0 && rng.random_bool(cfg.prune_low_degree_p)
            {
                continue;
            }
            let sign = if rng.random_bool(cfg.sign_flip_p) { -e.sign } else { e.sign };
            cur.insert(e.src, e.dst, sign);
        }

        // New edges: one uniform endpoint, one degree-proportional endpoint.
        let count = (cfg.new_edge_rate * n as f64).floor() as usize;
        let mut cur_targets: Vec<NodeId> = Vec::with_capacity(2 * cur.map.len());
        for (&(a, b), _) in cur.map.iter() {
            cur_targets.push(a);
            cur_targets.push(b);
        }
        for _ in 0..count {
            for _attempt in 0..50 {
                let u = rng.random_range(0..n);
                let v = preferential_pick(&cur_targets, n, &mut rng);
                if u == v || cur.contains(u, v) {
                    continue;
                }
                // Reputation effects: hub-incident edges skew more positive.
                let p = if is_hub(u) || is_hub(v) {
                    cfg.pos_fraction.max(0.95)
                } else {
                    cfg.pos_fraction
                };
                let sign = draw_sign(&mut rng, p);
                cur.insert(u, v, sign);
                cur_targets.push(u);
                cur_targets.push(v);
                break;
            }
        }
        snapshots.push(cur.into_snapshot()?);
    }
    TemporalSignedGraph::new(snapshots)
}

/// Empirical sign-flip rate between adjacent snapshots: among pairs present
/// in both, the fraction whose sign differs.
pub fn observed_flip_rate(tg: &TemporalSignedGraph) -> f64 {
    let mut persisting = 0usize;
    let mut flipped = 0usize;
    for t in 1..tg.len() {
        let prev = tg.snapshot(t - 1);
        let cur = tg.snapshot(t);
        for e in prev.edges() {
            let now = cur.entry_unchecked(e.src, e.dst);
            if now != 0 {
                persisting += 1;
                if now != e.sign {
                    flipped += 1;
                }
            }
        }
    }
    if persisting == 0 {
        0.0
    } else {
        flipped as f64 / persisting as f64
    }
}

/// Mean fraction of edges shared between adjacent snapshots (Jaccard on the
/// earlier snapshot's edge set).
pub fn adjacent_overlap(tg: &TemporalSignedGraph) -> f64 {
    let mut total = 0.0;
    for t in 1..tg.len() {
        let prev = tg.snapshot(t - 1);
        let cur = tg.snapshot(t);
        let kept = prev
            .edges()
            .iter()
            .filter(|e| cur.entry_unchecked(e.src, e.dst) != 0)
            .count();
        total += kept as f64 / prev.edge_count().max(1) as f64;
    }
    total / (tg.len() - 1) as f64
}
