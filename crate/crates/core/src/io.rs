//! File formats: the snapshot JSON dataset format (optionally gzipped),
//! parameter checkpoints, and small CSV artifacts.
//!
//! Dataset format: a single JSON object `{n, T, directed, snapshots}` where
//! `snapshots` is a length-T list of edge arrays `[src, dst, sign]`. The
//! fixed node count and snapshot count are explicit in the header rather
//! than implied by the edge list.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use serde::{Deserialize, Serialize};

use crate::graph::{SignedEdge, SnapshotGraph, TemporalSignedGraph};
use crate::params::ParamTensors;
use crate::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotFile {
    n: usize,
    #[serde(rename = "T")]
    t: usize,
    directed: bool,
    snapshots: Vec<Vec<[i64; 3]>>,
}

/// Serializes a temporal signed graph to the snapshot JSON format (pretty,
/// deterministic byte output). A `.gz` suffix enables gzip.
pub fn write_snapshots(tg: &TemporalSignedGraph, path: &Path) -> Result<()> {
    let file = SnapshotFile {
        n: tg.node_count(),
        t: tg.len(),
        directed: tg.directed(),
        snapshots: tg
            .snapshots()
            .iter()
            .map(|g| {
                g.edges()
                    .iter()
                    .map(|e| [e.src as i64, e.dst as i64, i64::from(e.sign)])
                    .collect()
            })
            .collect(),
    };
    let bytes = serde_json::to_vec_pretty(&file)?;
    write_maybe_gz(path, &bytes)
}

/// Reads a dataset written by [`write_snapshots`].
pub fn read_snapshots(path: &Path) -> Result<TemporalSignedGraph> {
    let bytes = read_maybe_gz(path)?;
    let file: SnapshotFile = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    if file.snapshots.len() != file.t {
        return Err(Error::Data(format!(
            "{}: header says T={} but file holds {} snapshots",
            path.display(),
            file.t,
            file.snapshots.len()
        )));
    }
    let mut graphs = Vec::with_capacity(file.t);
    for (t, raw) in file.snapshots.iter().enumerate() {
        let mut edges = Vec::with_capacity(raw.len());
        for &[src, dst, sign] in raw {
            let (src, dst) = (usize::try_from(src), usize::try_from(dst));
            let (src, dst) = match (src, dst) {
                (Ok(s), Ok(d)) => (s, d),
                _ => {
                    return Err(Error::Data(format!(
                        "{}: negative node id in snapshot {t}",
                        path.display()
                    )))
                }
            };
            let sign = i8::try_from(sign)
                .map_err(|_| Error::Data(format!("{}: bad sign in snapshot {t}", path.display())))?;
            edges.push(SignedEdge::new(src, dst, sign, None)?);
        }
        graphs.push(SnapshotGraph::build(file.n, &edges, file.directed)?);
    }
    TemporalSignedGraph::new(graphs)
}

/// Writes bytes, gzipping when the path ends in `.gz`.
pub fn write_maybe_gz(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let file = BufWriter::new(File::create(path)?);
    if path.extension().is_some_and(|e| e == "gz") {
        let mut enc = GzEncoder::new(file, flate2::Compression::default());
        enc.write_all(bytes)?;
        enc.finish()?;
    } else {
        let mut f = file;
        f.write_all(bytes)?;
    }
    Ok(())
}

/// Reads bytes, gunzipping when the path ends in `.gz`.
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let file = BufReader::new(
        File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?,
    );
    let mut bytes = Vec::new();
    if path.extension().is_some_and(|e| e == "gz") {
        GzDecoder::new(file).read_to_end(&mut bytes)?;
    } else {
        let mut f = file;
        f.read_to_end(&mut bytes)?;
    }
    Ok(bytes)
}

/// Decimal f64 serialization with 17 significant digits — enough for exact
/// round-trips through text.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Inverse of [`format_f64`] (accepts any standard float syntax).
pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Data(format!("bad float {s:?}: {e}")))
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointTensor {
    name: String,
    values: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    tensors: Vec<CheckpointTensor>,
}

/// Saves every named parameter tensor as JSON.
pub fn save_checkpoint<P: ParamTensors>(params: &P, path: &Path) -> Result<()> {
    let file = CheckpointFile {
        tensors: params
            .tensors()
            .into_iter()
            .map(|(name, values)| CheckpointTensor { name, values: values.to_vec() })
            .collect(),
    };
    write_maybe_gz(path, &serde_json::to_vec_pretty(&file)?)
}

/// Loads a checkpoint into an identically shaped parameter struct; tensor
/// names and lengths must match exactly.
pub fn load_checkpoint_into<P: ParamTensors>(params: &mut P, path: &Path) -> Result<()> {
    let bytes = read_maybe_gz(path)?;
    let file: CheckpointFile = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut mine = params.tensors_mut();
    if mine.len() != file.tensors.len() {
        return Err(Error::Data(format!(
            "checkpoint holds {} tensors, model has {}",
            file.tensors.len(),
            mine.len()
        )));
    }
    for ((name, slot), saved) in mine.iter_mut().zip(&file.tensors) {
        if *name != saved.name || slot.len() != saved.values.len() {
            return Err(Error::Data(format!(
                "checkpoint tensor {}×{} does not match model tensor {}×{}",
                saved.name,
                saved.values.len(),
                name,
                slot.len()
            )));
        }
        slot.copy_from_slice(&saved.values);
    }
    Ok(())
}

/// Loss trace as a two-column CSV (epoch, loss) at full precision.
pub fn write_loss_trace_csv(trace: &[f64], path: &Path) -> Result<()> {
    let mut out = String::from("epoch,loss\n");
    for (i, l) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{}\n", format_f64(*l)));
    }
    write_maybe_gz(path, out.as_bytes())
}
