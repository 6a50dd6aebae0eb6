//! Ingestion of timestamped signed edge lists (Bitcoin-OTC-style CSV) and
//! discretization into temporal snapshot sequences.
//!
//! The CSV format is `SOURCE,TARGET,RATING,TIME` per line: integer external
//! node IDs, an integer rating in [−10, +10] \ {0}, and an epoch-seconds
//! timestamp (fractional seconds are accepted and truncated). Files ending in
//! `.gz` are transparently gunzipped.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::graph::{NodeId, SignedEdge, SnapshotGraph, TemporalSignedGraph};
use crate::{Error, Result};

/// One raw trust rating as it appears in the source CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawRating {
    pub source_id: i64,
    pub target_id: i64,
    /// Nonzero, |rating| ≤ 10.
    pub rating: i32,
    /// Epoch seconds.
    pub timestamp: i64,
}

/// How timestamps are cut into snapshot bins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Binning {
    /// Time-sorted edge list split into T contiguous blocks whose sizes
    /// differ by at most one.
    EqualFrequency,
    /// The time range split into T equal-width intervals.
    EqualWidth,
}

/// What a snapshot contains relative to its bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Accumulation {
    /// Snapshot t holds every edge with timestamp ≤ the end of interval t
    /// (network state; the default — trust edges persist).
    Cumulative,
    /// Snapshot t holds only interval t's edges.
    Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SnapshotConfig {
    pub num_snapshots: usize,
    pub binning: Binning,
    pub accumulation: Accumulation,
    pub min_edges_per_snapshot: usize,
}

impl Default for SnapshotConfig {
    fn default() -> Self {
        SnapshotConfig {
            num_snapshots: 6,
            binning: Binning::EqualFrequency,
            accumulation: Accumulation::Cumulative,
            min_edges_per_snapshot: 1,
        }
    }
}

/// Parses a `SOURCE,TARGET,RATING,TIME` CSV file (gzip if the path ends in
/// `.gz`). Returns the accepted ratings plus the count of rejected
/// zero-rating rows (a zero rating has no polarity and cannot be an edge).
pub fn parse_edge_csv(path: &Path) -> Result<(Vec<RawRating>, usize)> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    if path.extension().is_some_and(|x| x == "gz") {
        parse_edge_csv_reader(BufReader::new(flate2::read::GzDecoder::new(file)))
    } else {
        parse_edge_csv_reader(BufReader::new(file))
    }
}

/// Reader-based variant of [`parse_edge_csv`].
pub fn parse_edge_csv_reader<R: Read + BufRead>(reader: R) -> Result<(Vec<RawRating>, usize)> {
    let mut ratings = Vec::new();
    let mut rejected = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Data(format!("line {lineno}: read failed: {e}")))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Data(format!(
                "line {lineno}: expected 4 comma-separated fields, got {}",
                fields.len()
            )));
        }
        let source_id: i64 = fields[0]
            .parse()
            .map_err(|_| Error::Data(format!("line {lineno}: bad SOURCE '{}'", fields[0])))?;
        let target_id: i64 = fields[1]
            .parse()
            .map_err(|_| Error::Data(format!("line {lineno}: bad TARGET '{}'", fields[1])))?;
        let rating: i32 = fields[2]
            .parse()
            .map_err(|_| Error::Data(format!("line {lineno}: bad RATING '{}'", fields[2])))?;
        // Public dumps carry fractional epoch seconds; truncate toward zero.
        let timestamp = fields[3]
            .parse::<f64>()
            .ok()
            .filter(|t| t.is_finite())
            .map(|t| t as i64)
            .ok_or_else(|| Error::Data(format!("line {lineno}: bad TIME '{}'", fields[3])))?;
        if rating == 0 {
            rejected += 1;
            continue;
        }
        if rating.abs() > 10 {
            return Err(Error::Data(format!(
                "line {lineno}: rating {rating} outside [-10, 10]"
            )));
        }
        ratings.push(RawRating { source_id, target_id, rating, timestamp });
    }
    Ok((ratings, rejected))
}

/// Maps one rating to a signed edge over already-remapped dense indices:
/// sign = +1 iff the rating is positive, timestamp preserved.
pub fn binarize(r: &RawRating, src: NodeId, dst: NodeId) -> Result<SignedEdge> {
    debug_assert_ne!(r.rating, 0, "zero ratings are rejected at parse time");
    SignedEdge::new(src, dst, if r.rating > 0 { 1 } else { -1 }, Some(r.timestamp))
}

/// A discretized dataset plus the bookkeeping needed to reproduce it.
#[derive(Debug, Clone)]
pub struct Discretized {
    pub graph: TemporalSignedGraph,
    /// Dense index → external ID (ascending external IDs).
    pub id_map: Vec<i64>,
    /// Inclusive end timestamp of each snapshot's interval.
    pub snapshot_ends: Vec<i64>,
    /// Rows whose sign was overridden by a more recent rating for the same
    /// pair within one snapshot.
    pub overridden_pairs: usize,
}

/// Splits time-sorted indices `0..len` into `t` contiguous blocks whose sizes
/// differ by at most one (earlier blocks take the remainder).
fn equal_frequency_blocks(len: usize, t: usize) -> Vec<std::ops::Range<usize>> {
    let base = len / t;
    let rem = len % t;
    let mut out = Vec::with_capacity(t);
    let mut start = 0;
    for i in 0..t {
        let size = base + usize::from(i < rem);
        out.push(start..start + size);
        start += size;
    }
    out
}

/// Discretizes ratings into `cfg.num_snapshots` snapshots of a directed or
/// undirected temporal signed graph. Within one snapshot, conflicting signs
/// for the same pair are resolved by the most recent rating (input order
/// breaks exact-timestamp ties).
pub fn discretize(
    ratings: &[RawRating],
    cfg: &SnapshotConfig,
    directed: bool,
) -> Result<Discretized> {
    let t_count = cfg.num_snapshots;
    if t_count < 2 {
        return Err(Error::Config(format!(
            "num_snapshots must be ≥ 2 (need history plus a target), got {t_count}"
        )));
    }
    if ratings.is_empty() {
        return Err(Error::Data("no ratings to discretize".into()));
    }
    let t_min = ratings.iter().map(|r| r.timestamp).min().unwrap();
    let t_max = ratings.iter().map(|r| r.timestamp).max().unwrap();
    if t_min == t_max {
        return Err(Error::Data(
            "all timestamps are equal; cannot form distinct snapshots".into(),
        ));
    }

    // Dense remap by ascending external ID.
    let mut ids: BTreeSet<i64> = BTreeSet::new();
    for r in ratings {
        ids.insert(r.source_id);
        ids.insert(r.target_id);
    }
    let id_map: Vec<i64> = ids.into_iter().collect();
    let index_of: BTreeMap<i64, NodeId> =
        id_map.iter().enumerate().map(|(i, &x)| (x, i)).collect();

    let mut sorted: Vec<&RawRating> = ratings.iter().collect();
    sorted.sort_by_key(|r| r.timestamp); // stable: ties keep input order

    let blocks: Vec<std::ops::Range<usize>> = match cfg.binning {
        Binning::EqualFrequency => equal_frequency_blocks(sorted.len(), t_count),
        Binning::EqualWidth => {
            let span = (t_max - t_min) as f64;
            let mut starts = vec![0usize; t_count + 1];
            for (i, r) in sorted.iter().enumerate() {
                let mut bin =
                    (((r.timestamp - t_min) as f64 / span) * t_count as f64).floor() as usize;
                bin = bin.min(t_count - 1);
                starts[bin + 1] = i + 1;
            }
            // Empty bins inherit the running edge position.
            for i in 1..=t_count {
                starts[i] = starts[i].max(starts[i - 1]);
            }
            (0..t_count).map(|i| starts[i]..starts[i + 1]).collect()
        }
    };
    let snapshot_ends: Vec<i64> = blocks
        .iter()
        .map(|b| if b.end == 0 { t_min } else { sorted[b.end - 1].timestamp })
        .collect();

    let mut overridden = 0usize;
    let mut snapshots = Vec::with_capacity(t_count);
    let mut carry: BTreeMap<(NodeId, NodeId), i8> = BTreeMap::new();
    for (snap_idx, block) in blocks.iter().enumerate() {
        let mut pairs: BTreeMap<(NodeId, NodeId), i8> = match cfg.accumulation {
            Accumulation::Cumulative => carry.clone(),
            Accumulation::Interval => BTreeMap::new(),
        };
        for &r in &sorted[block.clone()] {
            let (mut u, mut v) = (index_of[&r.source_id], index_of[&r.target_id]);
            if u == v {
                return Err(Error::Data(format!(
                    "self-rating for external id {} rejected",
                    r.source_id
                )));
            }
            if !directed && u > v {
                std::mem::swap(&mut u, &mut v);
            }
            let sign = if r.rating > 0 { 1i8 } else { -1i8 };
            if let Some(prev) = pairs.insert((u, v), sign) {
                if prev != sign {
                    overridden += 1;
                }
            }
        }
        if cfg.accumulation == Accumulation::Cumulative {
            carry = pairs.clone();
        }
        if pairs.len() < cfg.min_edges_per_snapshot {
            return Err(Error::Data(format!(
                "snapshot {snap_idx} has {} edges, below the minimum {}",
                pairs.len(),
                cfg.min_edges_per_snapshot
            )));
        }
        let edges: Vec<SignedEdge> = pairs
            .iter()
            .map(|(&(u, v), &s)| SignedEdge { src: u, dst: v, sign: s, timestamp: None })
            .collect();
        snapshots.push(SnapshotGraph::build(id_map.len(), &edges, directed)?);
    }

    Ok(Discretized {
        graph: TemporalSignedGraph::new(snapshots)?,
        id_map,
        snapshot_ends,
        overridden_pairs: overridden,
    })
}

/// Keeps only nodes incident to ≥1 edge in at least `min_snapshots` distinct
/// snapshots (activity counted on the input graph), reindexes the survivors
/// densely, and drops edges with removed endpoints.
///
/// A second application can differ when a surviving node loses all its edges
/// to removed neighbors; activity is deliberately measured on the input, as
/// the operation is a one-shot dataset filter.
pub fn persistence_subset(
    g: &TemporalSignedGraph,
    min_snapshots: usize,
) -> Result<TemporalSignedGraph> {
    if min_snapshots > g.len() {
        return Err(Error::Config(format!(
            "min_snapshots {min_snapshots} exceeds the snapshot count {}",
            g.len()
        )));
    }
    let n = g.node_count();
    let mut active = vec![0usize; n];
    for snap in g.snapshots() {
        let deg = snap.degrees();
        for (node, &d) in deg.iter().enumerate() {
            if d > 0 {
                active[node] += 1;
            }
        }
    }
    let kept: Vec<NodeId> = (0..n).filter(|&u| active[u] >= min_snapshots).collect();
    if kept.is_empty() {
        return Err(Error::Data(format!(
            "persistence subset is empty at min_snapshots={min_snapshots}"
        )));
    }
    let mut new_index = vec![usize::MAX; n];
    for (i, &u) in kept.iter().enumerate() {
        new_index[u] = i;
    }
    let mut snapshots = Vec::with_capacity(g.len());
    for snap in g.snapshots() {
        let edges: Vec<SignedEdge> = snap
            .edges()
            .into_iter()
            .filter(|e| new_index[e.src] != usize::MAX && new_index[e.dst] != usize::MAX)
            .map(|e| SignedEdge {
                src: new_index[e.src],
                dst: new_index[e.dst],
                sign: e.sign,
                timestamp: None,
            })
            .collect();
        snapshots.push(SnapshotGraph::build(kept.len(), &edges, snap.directed())?);
    }
    TemporalSignedGraph::new(snapshots)
}

/// Ingestion summary recorded alongside the snapshot file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestManifest {
    pub node_count: usize,
    pub accepted_ratings: usize,
    pub rejected_rows: usize,
    pub overridden_pairs: usize,
    pub positive_fraction: f64,
    pub snapshot_ends: Vec<i64>,
    pub id_map: Vec<i64>,
    pub config: SnapshotConfig,
    pub directed: bool,
}

/// Full ingestion pipeline: parse → binarize → discretize, with a manifest.
pub fn ingest_csv(
    path: &Path,
    cfg: &SnapshotConfig,
    directed: bool,
) -> Result<(Discretized, IngestManifest)> {
    let (ratings, rejected) = parse_edge_csv(path)?;
    if ratings.is_empty() {
        return Err(Error::Data(format!("{}: no usable ratings", path.display())));
    }
    let pos = ratings.iter().filter(|r| r.rating > 0).count();
    let disc = discretize(&ratings, cfg, directed)?;
    let manifest = IngestManifest {
        node_count: disc.id_map.len(),
        accepted_ratings: ratings.len(),
        rejected_rows: rejected,
        overridden_pairs: disc.overridden_pairs,
        positive_fraction: pos as f64 / ratings.len() as f64,
        snapshot_ends: disc.snapshot_ends.clone(),
        id_map: disc.id_map.clone(),
        config: *cfg,
        directed,
    };
    Ok((disc, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn rating(s: i64, t: i64, r: i32, ts: i64) -> RawRating {
        RawRating { source_id: s, target_id: t, rating: r, timestamp: ts }
    }

    #[test]
    fn parse_field_mapping_and_rejections() {
        let csv = "6,2,4,1289241911\n35,13,-10,1289250111\n1,2,0,123\n";
        let (rows, rejected) = parse_edge_csv_reader(Cursor::new(csv)).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rejected, 1);
        assert_eq!(rows[0], rating(6, 2, 4, 1289241911));
        assert_eq!(rows[1], rating(35, 13, -10, 1289250111));
    }

    #[test]
    fn parse_accepts_fractional_seconds() {
        let (rows, _) = parse_edge_csv_reader(Cursor::new("1,2,3,1289241911.72836\n")).unwrap();
        assert_eq!(rows[0].timestamp, 1289241911);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_edge_csv_reader(Cursor::new("1,2,3,10\n1,2\n")).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = parse_edge_csv_reader(Cursor::new("1,2,x,10\n")).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        let err = parse_edge_csv_reader(Cursor::new("1,2,11,10\n")).unwrap_err();
        assert!(err.to_string().contains("outside"), "{err}");
    }

    #[test]
    fn gzip_round_trip() {
        use std::io::Write;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("edges.csv.gz");
        let mut enc = flate2::write::GzEncoder::new(
            std::fs::File::create(&path).unwrap(),
            flate2::Compression::default(),
        );
        enc.write_all(b"1,2,5,100\n2,3,-4,200\n").unwrap();
        enc.finish().unwrap();
        let (rows, rejected) = parse_edge_csv(&path).unwrap();
        assert_eq!((rows.len(), rejected), (2, 0));
        assert_eq!(rows[1].rating, -4);
    }

    #[test]
    fn binarize_sign_mapping() {
        // Sign follows the rating's sign, boundaries included.
        for (r, want) in [(5, 1i8), (-3, -1), (1, 1), (-10, -1), (10, 1)] {
            let e = binarize(&rating(9, 7, r, 42), 0, 1).unwrap();
            assert_eq!(e.sign, want);
            assert_eq!(e.timestamp, Some(42));
        }
    }

    #[test]
    fn equal_frequency_blocks_differ_by_at_most_one() {
        // DERIVED: 12 edges, T=3 → ⌊12/3⌋ = 4 per block.
        let b = equal_frequency_blocks(12, 3);
        assert_eq!(b.iter().map(|r| r.len()).collect::<Vec<_>>(), vec![4, 4, 4]);
        let b = equal_frequency_blocks(13, 4);
        assert_eq!(b.iter().map(|r| r.len()).collect::<Vec<_>>(), vec![4, 3, 3, 3]);
        assert_eq!(b.last().unwrap().end, 13);
    }

    #[test]
    fn discretize_interval_splits_evenly() {
        // 12 distinct pairs at distinct times, T=3, interval mode → 4/4/4 edges.
        let ratings: Vec<RawRating> =
            (0..12).map(|i| rating(i, i + 100, 1 + (i % 3) as i32, 1000 + i)).collect();
        let cfg = SnapshotConfig {
            num_snapshots: 3,
            binning: Binning::EqualFrequency,
            accumulation: Accumulation::Interval,
            min_edges_per_snapshot: 1,
        };
        let disc = discretize(&ratings, &cfg, true).unwrap();
        let counts: Vec<usize> =
            disc.graph.snapshots().iter().map(|s| s.edge_count()).collect();
        assert_eq!(counts, vec![4, 4, 4]);
        // Interval-mode union reproduces the input pair multiset.
        let total: usize = counts.iter().sum();
        assert_eq!(total, 12);
    }

    #[test]
    fn discretize_rejects_bad_configs() {
        let ratings = vec![rating(1, 2, 1, 10), rating(2, 3, 1, 20)];
        let cfg = SnapshotConfig { num_snapshots: 1, ..SnapshotConfig::default() };
        assert!(matches!(discretize(&ratings, &cfg, true), Err(Error::Config(_))));
        let same_ts = vec![rating(1, 2, 1, 10), rating(2, 3, 1, 10)];
        assert!(discretize(&same_ts, &SnapshotConfig::default(), true).is_err());
        assert!(discretize(&[], &SnapshotConfig::default(), true).is_err());
    }

    #[test]
    fn discretize_most_recent_sign_wins() {
        // Same pair +1 at t=10 then −1 at t=20, both inside snapshot 0
        // (cumulative) → snapshot 0 carries −1.
        let ratings = vec![
            rating(1, 2, 1, 10),
            rating(1, 2, -1, 20),
            rating(3, 4, 1, 30),
            rating(4, 5, 1, 40),
        ];
        let cfg = SnapshotConfig { num_snapshots: 2, ..SnapshotConfig::default() };
        let disc = discretize(&ratings, &cfg, true).unwrap();
        // External IDs 1..5 map to dense 0..4; pair (1,2) → (0,1).
        assert_eq!(disc.graph.snapshot(0).signed_adjacency_entry(0, 1).unwrap(), -1);
        assert_eq!(disc.overridden_pairs, 1);
    }

    #[test]
    fn cumulative_snapshots_are_monotone() {
        let ratings: Vec<RawRating> =
            (0..9).map(|i| rating(i % 4, 10 + (i % 5), 1, 100 + i)).collect();
        let cfg = SnapshotConfig { num_snapshots: 3, ..SnapshotConfig::default() };
        let disc = discretize(&ratings, &cfg, true).unwrap();
        for t in 1..disc.graph.len() {
            let prev = disc.graph.snapshot(t - 1);
            let cur = disc.graph.snapshot(t);
            for e in prev.edges() {
                // The pair persists (its sign may have been overridden).
                assert!(
                    cur.has_edge(e.src, e.dst),
                    "cumulative pair ({},{}) vanished at t={t}",
                    e.src,
                    e.dst
                );
            }
        }
    }

    #[test]
    fn equal_width_binning_by_time_range() {
        // Times 0,1,2,98,99 with T=2 over span 99: bin boundary at 49.5 →
        // first three land in snapshot 0, last two in snapshot 1.
        let ratings = vec![
            rating(0, 1, 1, 0),
            rating(0, 2, 1, 1),
            rating(0, 3, 1, 2),
            rating(1, 2, 1, 98),
            rating(1, 3, 1, 99),
        ];
        let cfg = SnapshotConfig {
            num_snapshots: 2,
            binning: Binning::EqualWidth,
            accumulation: Accumulation::Interval,
            min_edges_per_snapshot: 1,
        };
        let disc = discretize(&ratings, &cfg, true).unwrap();
        assert_eq!(disc.graph.snapshot(0).edge_count(), 3);
        assert_eq!(disc.graph.snapshot(1).edge_count(), 2);
    }

    #[test]
    fn min_edge_density_enforced() {
        let ratings = vec![rating(1, 2, 1, 0), rating(2, 3, 1, 100)];
        let cfg = SnapshotConfig {
            num_snapshots: 2,
            min_edges_per_snapshot: 2,
            accumulation: Accumulation::Interval,
            ..SnapshotConfig::default()
        };
        let err = discretize(&ratings, &cfg, true).unwrap_err();
        assert!(err.to_string().contains("snapshot 0"), "{err}");
    }

    #[test]
    fn persistence_subset_keeps_active_nodes() {
        // Node 0 active in all 3 snapshots; each neighbor active in exactly one.
        // min_snapshots=2 keeps only node 0 → no induced edges survive.
        let e = |a: usize, b: usize| SignedEdge::new(a, b, 1, None).unwrap();
        let snaps = vec![
            SnapshotGraph::build(4, &[e(0, 1)], false).unwrap(),
            SnapshotGraph::build(4, &[e(0, 2)], false).unwrap(),
            SnapshotGraph::build(4, &[e(0, 3)], false).unwrap(),
        ];
        let tg = TemporalSignedGraph::new(snaps).unwrap();
        let sub = persistence_subset(&tg, 2).unwrap();
        assert_eq!(sub.node_count(), 1);
        assert!(sub.snapshots().iter().all(|s| s.edge_count() == 0));
        // min_snapshots=1 is the identity here (every node is active somewhere).
        let same = persistence_subset(&tg, 1).unwrap();
        assert_eq!(same.node_count(), 4);
        assert_eq!(same, tg);
        assert!(persistence_subset(&tg, 4).is_err()); // exceeds T
    }

    #[test]
    fn persistence_subset_idempotent_on_persistent_core() {
        // Nodes 0,1 share an edge in every snapshot; node 2 appears once.
        let e = |a: usize, b: usize, s: i8| SignedEdge::new(a, b, s, None).unwrap();
        let snaps = vec![
            SnapshotGraph::build(3, &[e(0, 1, 1), e(1, 2, -1)], false).unwrap(),
            SnapshotGraph::build(3, &[e(0, 1, 1)], false).unwrap(),
        ];
        let tg = TemporalSignedGraph::new(snaps).unwrap();
        let once = persistence_subset(&tg, 2).unwrap();
        let twice = persistence_subset(&once, 2).unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.node_count(), 2);
        assert_eq!(once.snapshot(0).edge_count(), 1);
    }

    #[test]
    fn ingest_manifest_summarizes() {
        use std::io::Write;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("toy.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        // 6 rows: 5 usable (4 positive), 1 zero-rating reject.
        write!(
            f,
            "10,20,5,100\n20,30,-2,200\n30,10,3,300\n10,30,1,400\n20,10,7,500\n30,20,0,600\n"
        )
        .unwrap();
        let cfg = SnapshotConfig { num_snapshots: 2, ..SnapshotConfig::default() };
        let (disc, manifest) = ingest_csv(&path, &cfg, true).unwrap();
        assert_eq!(manifest.node_count, 3);
        assert_eq!(manifest.accepted_ratings, 5);
        assert_eq!(manifest.rejected_rows, 1);
        assert!((manifest.positive_fraction - 0.8).abs() < 1e-12);
        assert_eq!(disc.graph.len(), 2);
        assert_eq!(manifest.id_map, vec![10, 20, 30]);
    }
}
