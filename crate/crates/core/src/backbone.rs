//! Per-snapshot signed-graph encoder.
//!
//! Stage 1 factorizes the symmetrized signed adjacency into spectral node
//! features (top-d eigenpairs, columns scaled by √|λ|). Stage 2 runs L layers
//! of multi-head all-pairs self-attention whose logits carry one of three
//! learnable relation-class biases (positive edge / negative edge / no edge),
//! each layer followed by residual + two-layer feed-forward (tanh) with
//! residual. A bilinear head scores node pairs for sign prediction.
//!
//! Forward passes record every intermediate needed by the hand-written
//! backward pass; gradients are validated against central finite differences
//! in the test suite.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::RwLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{SnapshotGraph, TemporalSignedGraph};
use crate::linalg::{eig_symmetric, softmax_inplace, Mat};
use crate::params::ParamTensors;
use crate::{Error, Result};

/// Relation classes indexing the attention logit biases.
const REL_POS: usize = 0;
const REL_NEG: usize = 1;
const REL_NONE: usize = 2;

/// Embedding dimension rule: 2·⌈√n⌉ clamped to [32, 256], then rounded up to
/// a multiple of `num_heads` so the head split is always exact.
pub fn auto_embed_dim(n: usize, num_heads: usize) -> usize {
    let base = 2 * (n as f64).sqrt().ceil() as usize;
    let clamped = base.clamp(32, 256);
    clamped.div_ceil(num_heads) * num_heads
}

/// Top-d scaled spectral features of a symmetric matrix: column i is
/// qᵢ·√|λᵢ| for the i-th largest-|λ| eigenpair (zero eigenvalues contribute
/// zero columns, covering rank < d).
pub fn spectral_features_matrix(a: &Mat, d: usize) -> Result<Mat> {
    let n = a.rows;
    if d > n {
        return Err(Error::Config(format!(
            "embed dim {d} exceeds node count {n}; spectral features need d ≤ n"
        )));
    }
    let (vals, q) = eig_symmetric(a)?;
    let mut x = Mat::zeros(n, d);
    for j in 0..d {
        let scale = vals[j].abs().sqrt();
        for i in 0..n {
            *x.at_mut(i, j) = q.at(i, j) * scale;
        }
    }
    Ok(x)
}

/// Spectral features of a snapshot over its symmetrized signed adjacency.
pub fn spectral_features(g: &SnapshotGraph, d: usize) -> Result<Mat> {
    spectral_features_matrix(&g.symmetrized_adjacency(), d)
}

/// One encoder layer's weights.
#[derive(Debug, Clone, PartialEq)]
pub struct AttnLayer {
    pub wq: Mat,
    pub wk: Mat,
    pub wv: Mat,
    pub wo: Mat,
    pub ff1: Mat,
    pub ff1_b: Vec<f64>,
    pub ff2: Mat,
    pub ff2_b: Vec<f64>,
}

/// All learnable backbone weights, including the bilinear score head.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneParams {
    pub d: usize,
    pub num_heads: usize,
    pub layers: Vec<AttnLayer>,
    /// Attention logit biases by relation class: [b₊, b₋, b₀].
    pub rel_bias: [f64; 3],
    pub score_w: Mat,
    pub score_b: [f64; 1],
}

fn xavier(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect();
    Mat::from_vec(rows, cols, data)
}

impl BackboneParams {
    /// Seeded initialization. Attention/FF maps are Xavier-uniform; relation
    /// biases start at (+1, −1, 0) so positive and negative neighbors are
    /// distinguished from step one.
    pub fn init(d: usize, num_layers: usize, num_heads: usize, seed: u64) -> Result<Self> {
        if num_heads == 0 || d % num_heads != 0 {
            return Err(Error::Config(format!(
                "embed dim {d} must be divisible by num_heads {num_heads}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = (0..num_layers)
            .map(|_| AttnLayer {
                wq: xavier(d, d, &mut rng),
                wk: xavier(d, d, &mut rng),
                wv: xavier(d, d, &mut rng),
                wo: xavier(d, d, &mut rng),
                ff1: xavier(d, d, &mut rng),
                ff1_b: vec![0.0; d],
                ff2: xavier(d, d, &mut rng),
                ff2_b: vec![0.0; d],
            })
            .collect();
        Ok(BackboneParams {
            d,
            num_heads,
            layers,
            rel_bias: [1.0, -1.0, 0.0],
            score_w: xavier(d, d, &mut rng),
            score_b: [0.0],
        })
    }

    /// Same shapes, all zeros — the gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let zl = |m: &Mat| Mat::zeros(m.rows, m.cols);
        BackboneParams {
            d: self.d,
            num_heads: self.num_heads,
            layers: self
                .layers
                .iter()
                .map(|l| AttnLayer {
                    wq: zl(&l.wq),
                    wk: zl(&l.wk),
                    wv: zl(&l.wv),
                    wo: zl(&l.wo),
                    ff1: zl(&l.ff1),
                    ff1_b: vec![0.0; l.ff1_b.len()],
                    ff2: zl(&l.ff2),
                    ff2_b: vec![0.0; l.ff2_b.len()],
                })
                .collect(),
            rel_bias: [0.0; 3],
            score_w: zl(&self.score_w),
            score_b: [0.0],
        }
    }
}

impl ParamTensors for BackboneParams {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("layer{i}.wq"), &l.wq.data));
            out.push((format!("layer{i}.wk"), &l.wk.data));
            out.push((format!("layer{i}.wv"), &l.wv.data));
            out.push((format!("layer{i}.wo"), &l.wo.data));
            out.push((format!("layer{i}.ff1"), &l.ff1.data));
            out.push((format!("layer{i}.ff1_b"), &l.ff1_b));
            out.push((format!("layer{i}.ff2"), &l.ff2.data));
            out.push((format!("layer{i}.ff2_b"), &l.ff2_b));
        }
        out.push(("rel_bias".into(), &self.rel_bias));
        out.push(("score_w".into(), &self.score_w.data));
        out.push(("score_b".into(), &self.score_b));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = Vec::new();
        for (i, l) in self.layers.iter_mut().enumerate() {
            out.push((format!("layer{i}.wq"), &mut l.wq.data));
            out.push((format!("layer{i}.wk"), &mut l.wk.data));
            out.push((format!("layer{i}.wv"), &mut l.wv.data));
            out.push((format!("layer{i}.wo"), &mut l.wo.data));
            out.push((format!("layer{i}.ff1"), &mut l.ff1.data));
            out.push((format!("layer{i}.ff1_b"), &mut l.ff1_b));
            out.push((format!("layer{i}.ff2"), &mut l.ff2.data));
            out.push((format!("layer{i}.ff2_b"), &mut l.ff2_b));
        }
        out.push(("rel_bias".into(), &mut self.rel_bias));
        out.push(("score_w".into(), &mut self.score_w.data));
        out.push(("score_b".into(), &mut self.score_b));
        out
    }
}

/// Relation class per ordered node pair from the symmetrized adjacency.
fn relation_classes(g: &SnapshotGraph) -> Vec<u8> {
    let a = g.symmetrized_adjacency();
    a.data
        .iter()
        .map(|&x| {
            if x > 0.0 {
                REL_POS as u8
            } else if x < 0.0 {
                REL_NEG as u8
            } else {
                REL_NONE as u8
            }
        })
        .collect()
}

/// Everything the encoder backward pass needs from one layer's forward.
pub struct LayerTrace {
    pub x_in: Mat,
    pub q: Mat,
    pub k: Mat,
    pub v: Mat,
    /// Post-softmax attention per head (n×n each).
    pub probs: Vec<Mat>,
    pub o_concat: Mat,
    pub r1: Mat,
    pub h1: Mat,
}

/// Recorded forward pass of [`encode_forward`].
pub struct EncodeTrace {
    pub rel: Vec<u8>,
    pub layers: Vec<LayerTrace>,
    pub z: Mat,
}

fn head_slice(m: &Mat, head: usize, dh: usize) -> Mat {
    let mut out = Mat::zeros(m.rows, dh);
    for r in 0..m.rows {
        out.row_mut(r).copy_from_slice(&m.row(r)[head * dh..(head + 1) * dh]);
    }
    out
}

fn head_scatter(dst: &mut Mat, src: &Mat, head: usize, dh: usize) {
    for r in 0..dst.rows {
        dst.row_mut(r)[head * dh..(head + 1) * dh].copy_from_slice(src.row(r));
    }
}

fn colsum(m: &Mat) -> Vec<f64> {
    let mut out = vec![0.0; m.cols];
    for r in 0..m.rows {
        for (acc, x) in out.iter_mut().zip(m.row(r)) {
            *acc += x;
        }
    }
    out
}

/// Encoder forward pass with full intermediate capture.
pub fn encode_forward(g: &SnapshotGraph, x: &Mat, p: &BackboneParams) -> Result<EncodeTrace> {
    let n = g.node_count();
    if x.rows != n || x.cols != p.d {
        return Err(Error::Config(format!(
            "feature shape {}×{} does not match n={n}, d={}",
            x.rows, x.cols, p.d
        )));
    }
    let rel = relation_classes(g);
    let heads = p.num_heads;
    let dh = p.d / heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let mut layers = Vec::with_capacity(p.layers.len());
    let mut cur = x.clone();
    for (li, l) in p.layers.iter().enumerate() {
        let q = cur.matmul(&l.wq);
        let k = cur.matmul(&l.wk);
        let v = cur.matmul(&l.wv);
        let mut probs = Vec::with_capacity(heads);
        let mut o_concat = Mat::zeros(n, p.d);
        for h in 0..heads {
            let qh = head_slice(&q, h, dh);
            let kh = head_slice(&k, h, dh);
            let vh = head_slice(&v, h, dh);
            let mut logits = qh.matmul_tb(&kh);
            for u in 0..n {
                let row = logits.row_mut(u);
                for vtx in 0..n {
                    row[vtx] = row[vtx] * scale + p.rel_bias[rel[u * n + vtx] as usize];
                }
                softmax_inplace(row);
            }
            let oh = logits.matmul(&vh);
            head_scatter(&mut o_concat, &oh, h, dh);
            probs.push(logits);
        }
        let attn_out = o_concat.matmul(&l.wo);
        let mut r1 = cur.clone();
        r1.scaled_add(&attn_out, 1.0);

        let mut h1 = r1.matmul(&l.ff1);
        for r in 0..n {
            for (a, b) in h1.row_mut(r).iter_mut().zip(&l.ff1_b) {
                *a = (*a + b).tanh();
            }
        }
        let mut f = h1.matmul(&l.ff2);
        for r in 0..n {
            for (a, b) in f.row_mut(r).iter_mut().zip(&l.ff2_b) {
                *a += b;
            }
        }
        let mut next = r1.clone();
        next.scaled_add(&f, 1.0);
        if !next.data.iter().all(|x| x.is_finite()) {
            return Err(Error::Numeric(format!("non-finite values in encoder layer {li}")));
        }
        layers.push(LayerTrace { x_in: cur, q, k, v, probs, o_concat, r1, h1 });
        cur = next;
    }
    Ok(EncodeTrace { rel, layers, z: cur })
}

/// Forward-only convenience: the final embeddings Z (identity when L = 0).
pub fn encode_snapshot(g: &SnapshotGraph, x: &Mat, p: &BackboneParams) -> Result<Mat> {
    Ok(encode_forward(g, x, p)?.z)
}

/// Reverse-mode pass: given ∂loss/∂Z, accumulates parameter gradients into
/// `grads` and returns ∂loss/∂X (the gradient at the input features).
pub fn encode_backward(
    p: &BackboneParams,
    trace: &EncodeTrace,
    dz: &Mat,
    grads: &mut BackboneParams,
) -> Mat {
    let heads = p.num_heads;
    let dh = p.d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let n = dz.rows;

    let mut dx_next = dz.clone();
    for (li, l) in p.layers.iter().enumerate().rev() {
        let t = &trace.layers[li];
        let gl = &mut grads.layers[li];

        // Feed-forward block: x_next = r1 + (tanh(r1·ff1 + b1)·ff2 + b2).
        let d_f = &dx_next;
        let mut d_r1 = dx_next.clone();
        let d_h1 = d_f.matmul_tb(&l.ff2);
        gl.ff2.scaled_add(&t.h1.matmul_ta(d_f), 1.0);
        for (a, b) in gl.ff2_b.iter_mut().zip(colsum(d_f)) {
            *a += b;
        }
        let mut d_pre = d_h1;
        for (dp, h) in d_pre.data.iter_mut().zip(&t.h1.data) {
            *dp *= 1.0 - h * h;
        }
        gl.ff1.scaled_add(&t.r1.matmul_ta(&d_pre), 1.0);
        for (a, b) in gl.ff1_b.iter_mut().zip(colsum(&d_pre)) {
            *a += b;
        }
        d_r1.scaled_add(&d_pre.matmul_tb(&l.ff1), 1.0);

        // Attention block: r1 = x_in + (O‖…)·wo.
        let mut dx_in = d_r1.clone();
        gl.wo.scaled_add(&t.o_concat.matmul_ta(&d_r1), 1.0);
        let d_o = d_r1.matmul_tb(&l.wo);

        let mut d_q = Mat::zeros(n, p.d);
        let mut d_k = Mat::zeros(n, p.d);
        let mut d_v = Mat::zeros(n, p.d);
        for h in 0..heads {
            let qh = head_slice(&t.q, h, dh);
            let kh = head_slice(&t.k, h, dh);
            let vh = head_slice(&t.v, h, dh);
            let doh = head_slice(&d_o, h, dh);
            let probs = &t.probs[h];

            let d_p = doh.matmul_tb(&vh);
            let dvh = probs.matmul_ta(&doh);
            // Softmax backward, then the relation-bias gradient (the bias
            // enters each logit additively).
            let mut d_logits = Mat::zeros(n, n);
            for u in 0..n {
                let prow = probs.row(u);
                let dprow = d_p.row(u);
                let s: f64 = prow.iter().zip(dprow).map(|(a, b)| a * b).sum();
                let drow = d_logits.row_mut(u);
                for vtx in 0..n {
                    let dl = prow[vtx] * (dprow[vtx] - s);
                    drow[vtx] = dl;
                    grads.rel_bias[trace.rel[u * n + vtx] as usize] += dl;
                }
            }
            let mut dqh = d_logits.matmul(&kh);
            dqh.scale(scale);
            let mut dkh = d_logits.matmul_ta(&qh);
            dkh.scale(scale);
            head_scatter(&mut d_q, &dqh, h, dh);
            head_scatter(&mut d_k, &dkh, h, dh);
            head_scatter(&mut d_v, &dvh, h, dh);
        }
        gl.wq.scaled_add(&t.x_in.matmul_ta(&d_q), 1.0);
        gl.wk.scaled_add(&t.x_in.matmul_ta(&d_k), 1.0);
        gl.wv.scaled_add(&t.x_in.matmul_ta(&d_v), 1.0);
        dx_in.scaled_add(&d_q.matmul_tb(&l.wq), 1.0);
        dx_in.scaled_add(&d_k.matmul_tb(&l.wk), 1.0);
        dx_in.scaled_add(&d_v.matmul_tb(&l.wv), 1.0);

        dx_next = dx_in;
    }
    dx_next
}

/// Bilinear edge score: zᵤᵀ·W·z_v + b. Positive sign predicted iff > 0.
pub fn score_edge(z_u: &[f64], z_v: &[f64], p: &BackboneParams) -> f64 {
    let d = p.d;
    debug_assert_eq!(z_u.len(), d);
    debug_assert_eq!(z_v.len(), d);
    let mut s = p.score_b[0];
    for i in 0..d {
        let wi = &p.score_w.data[i * d..(i + 1) * d];
        let zu = z_u[i];
        if zu == 0.0 {
            continue;
        }
        s += zu * crate::linalg::dot(wi, z_v);
    }
    s
}

/// Backward of [`score_edge`] for upstream gradient `dscore`: accumulates
/// into the head's parameter gradients and both node-embedding gradients.
pub fn score_edge_backward(
    z_u: &[f64],
    z_v: &[f64],
    p: &BackboneParams,
    dscore: f64,
    grads: &mut BackboneParams,
    dz_u: &mut [f64],
    dz_v: &mut [f64],
) {
    let d = p.d;
    grads.score_b[0] += dscore;
    for i in 0..d {
        let wrow = &p.score_w.data[i * d..(i + 1) * d];
        let grow = &mut grads.score_w.data[i * d..(i + 1) * d];
        for j in 0..d {
            grow[j] += dscore * z_u[i] * z_v[j];
            dz_v[j] += dscore * z_u[i] * wrow[j];
        }
        dz_u[i] += dscore * crate::linalg::dot(wrow, z_v);
    }
}

/// Concurrent-read embedding cache keyed by snapshot content and a caller
/// supplied parameter version (bump it whenever backbone weights change).
#[derive(Default)]
pub struct EmbedCache {
    map: RwLock<HashMap<u64, Mat>>,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

impl EmbedCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }
}

fn fnv1a(bytes: impl IntoIterator<Item = u8>, mut state: u64) -> u64 {
    for b in bytes {
        state ^= b as u64;
        state = state.wrapping_mul(0x100000001b3);
    }
    state
}

fn snapshot_key(g: &SnapshotGraph, p: &BackboneParams, version: u64) -> u64 {
    let mut h = fnv1a(
        (g.node_count() as u64)
            .to_le_bytes()
            .into_iter()
            .chain([g.directed() as u8])
            .chain((p.d as u64).to_le_bytes())
            .chain((p.layers.len() as u64).to_le_bytes())
            .chain((p.num_heads as u64).to_le_bytes()),
        0xcbf29ce484222325,
    );
    for e in g.edges() {
        h = fnv1a(
            (e.src as u64)
                .to_le_bytes()
                .into_iter()
                .chain((e.dst as u64).to_le_bytes())
                .chain([(e.sign == 1) as u8]),
            h,
        );
    }
    h ^ version.wrapping_mul(0x9e3779b97f4a7c15)
}

/// Embeds every snapshot: Z⁽ᵗ⁾ = encode(spectral_features(G⁽ᵗ⁾, d)).
/// With a cache, a repeated (snapshot, version) pair skips recomputation.
pub fn embed_sequence(
    tg: &TemporalSignedGraph,
    p: &BackboneParams,
    cache: Option<&EmbedCache>,
    version: u64,
) -> Result<Vec<Mat>> {
    let mut out = Vec::with_capacity(tg.len());
    for g in tg.snapshots() {
        out.push(embed_one(g, p, cache, version)?);
    }
    Ok(out)
}

/// Single-snapshot variant of [`embed_sequence`] with the same cache key.
pub fn embed_one(
    g: &SnapshotGraph,
    p: &BackboneParams,
    cache: Option<&EmbedCache>,
    version: u64,
) -> Result<Mat> {
    if let Some(c) = cache {
        let key = snapshot_key(g, p, version);
        if let Some(z) = c.map.read().expect("cache lock poisoned").get(&key) {
            c.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(z.clone());
        }
        let x = spectral_features(g, p.d)?;
        let z = encode_snapshot(g, &x, p)?;
        c.misses.fetch_add(1, Ordering::Relaxed);
        c.map.write().expect("cache lock poisoned").insert(key, z.clone());
        Ok(z)
    } else {
        let x = spectral_features(g, p.d)?;
        encode_snapshot(g, &x, p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SignedEdge;
    use crate::params::{finite_difference, gradient_rel_error};
    use approx::assert_abs_diff_eq;

    fn edge(src: usize, dst: usize, sign: i8) -> SignedEdge {
        SignedEdge::new(src, dst, sign, None).unwrap()
    }

    fn random_graph(n: usize, seed: u64) -> SnapshotGraph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.random_bool(0.5) {
                    edges.push(edge(u, v, if rng.random_bool(0.7) { 1 } else { -1 }));
                }
            }
        }
        SnapshotGraph::build(n, &edges, false).unwrap()
    }

    fn random_mat(rows: usize, cols: usize, seed: u64) -> Mat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Mat::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    #[test]
    fn auto_embed_dim_rule() {
        // DERIVED: n=5900 → 2·⌈76.8⌉ = 154 → clamp keeps 154 → next multiple
        // of 8 is 160. Small n hits the floor 32; huge n hits the cap 256.
        assert_eq!(auto_embed_dim(5900, 8), 160);
        assert_eq!(auto_embed_dim(9, 8), 32);
        assert_eq!(auto_embed_dim(70_000, 8), 256);
        assert_eq!(auto_embed_dim(300, 8), 40); // 2·⌈17.33⌉ = 36 → 40
        for heads in [1, 2, 4, 8] {
            assert_eq!(auto_embed_dim(1234, heads) % heads, 0);
        }
    }

    #[test]
    fn spectral_features_zero_matrix() {
        let g = SnapshotGraph::build(4, &[], false).unwrap();
        let x = spectral_features(&g, 3).unwrap();
        assert!(x.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn spectral_features_two_node_exchange() {
        // DERIVED: A=[[0,1],[1,0]] has |λ| = {1,1}; each feature row is a
        // unit vector (rows of Q scaled by √1).
        let g = SnapshotGraph::build(2, &[edge(0, 1, 1)], false).unwrap();
        let x = spectral_features(&g, 2).unwrap();
        for r in 0..2 {
            let norm: f64 = x.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn spectral_features_rank_one_block() {
        // DERIVED: all-ones 2×2 has eigenpairs λ=2 (q=(1,1)/√2) and λ=0, so
        // column 0 = (1,1)·(√2/√2) = (1,1) and column 1 is all zeros.
        let a = Mat::from_vec(2, 2, vec![1.0, 1.0, 1.0, 1.0]);
        let x = spectral_features_matrix(&a, 2).unwrap();
        assert_abs_diff_eq!(x.at(0, 0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x.at(1, 0), 1.0, epsilon = 1e-12);
        assert_eq!(x.at(0, 1), 0.0);
        assert_eq!(x.at(1, 1), 0.0);
    }

    #[test]
    fn spectral_features_dimension_error() {
        let g = SnapshotGraph::build(3, &[edge(0, 1, 1)], false).unwrap();
        assert!(matches!(spectral_features(&g, 4), Err(Error::Config(_))));
    }

    #[test]
    fn spectral_factorization_is_lossless_at_full_rank() {
        // With d = n the features plus eigenvalue signs reconstruct the
        // symmetrized adjacency: Σᵢ sign(λᵢ)·xᵢxᵢᵀ = Σᵢ λᵢ qᵢqᵢᵀ = A.
        for seed in 0..3 {
            let g = random_graph(12, seed);
            let a = g.symmetrized_adjacency();
            let x = spectral_features_matrix(&a, 12).unwrap();
            let (vals, _) = eig_symmetric(&a).unwrap();
            let mut recon = Mat::zeros(12, 12);
            for kcol in 0..12 {
                let s = vals[kcol].signum();
                for i in 0..12 {
                    for j in 0..12 {
                        *recon.at_mut(i, j) += s * x.at(i, kcol) * x.at(j, kcol);
                    }
                }
            }
            for (got, want) in recon.data.iter().zip(&a.data) {
                assert_abs_diff_eq!(got, want, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn encode_zero_layers_is_identity() {
        let g = random_graph(5, 1);
        let p = BackboneParams::init(4, 0, 2, 0).unwrap();
        let x = random_mat(5, 4, 2);
        let z = encode_snapshot(&g, &x, &p).unwrap();
        assert_eq!(z.data, x.data);
    }

    #[test]
    fn encode_single_node_attention_is_value_map() {
        // n=1: softmax over one logit = 1, so the attention output is the
        // node's own value vector pushed through wo.
        let g = SnapshotGraph::build(1, &[], false).unwrap();
        let p = BackboneParams::init(4, 1, 1, 3).unwrap();
        let x = random_mat(1, 4, 4);
        let trace = encode_forward(&g, &x, &p).unwrap();
        let expect = x.matmul(&p.layers[0].wv).matmul(&p.layers[0].wo);
        let attn_out: Vec<f64> = trace.layers[0]
            .r1
            .data
            .iter()
            .zip(&x.data)
            .map(|(r, xv)| r - xv)
            .collect();
        for (a, b) in attn_out.iter().zip(&expect.data) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let g = random_graph(7, 5);
        let p = BackboneParams::init(8, 2, 2, 6).unwrap();
        let xf = random_mat(7, 8, 7);
        let trace = encode_forward(&g, &xf, &p).unwrap();
        for layer in &trace.layers {
            for probs in &layer.probs {
                for u in 0..7 {
                    let s: f64 = probs.row(u).iter().sum();
                    assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
                }
            }
        }
    }

    /// Independent straight-line re-implementation of one encoder layer,
    /// written with explicit scalar loops (no shared code with the library).
    fn naive_layer(x: &Mat, g: &SnapshotGraph, p: &BackboneParams, li: usize) -> Mat {
        let n = x.rows;
        let d = p.d;
        let heads = p.num_heads;
        let dh = d / heads;
        let l = &p.layers[li];
        let a = g.symmetrized_adjacency();
        let mm = |a: &Mat, b: &Mat| {
            let mut out = Mat::zeros(a.rows, b.cols);
            for i in 0..a.rows {
                for j in 0..b.cols {
                    let mut s = 0.0;
                    for t in 0..a.cols {
                        s += a.at(i, t) * b.at(t, j);
                    }
                    *out.at_mut(i, j) = s;
                }
            }
            out
        };
        let q = mm(x, &l.wq);
        let k = mm(x, &l.wk);
        let v = mm(x, &l.wv);
        let mut o = Mat::zeros(n, d);
        for h in 0..heads {
            for u in 0..n {
                let mut logits = vec![0.0; n];
                for w in 0..n {
                    let mut dotv = 0.0;
                    for c in 0..dh {
                        dotv += q.at(u, h * dh + c) * k.at(w, h * dh + c);
                    }
                    let bias = if a.at(u, w) > 0.0 {
                        p.rel_bias[0]
                    } else if a.at(u, w) < 0.0 {
                        p.rel_bias[1]
                    } else {
                        p.rel_bias[2]
                    };
                    logits[w] = dotv / (dh as f64).sqrt() + bias;
                }
                let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|&x| (x - m).exp()).collect();
                let sum: f64 = exps.iter().sum();
                for c in 0..dh {
                    let mut acc = 0.0;
                    for w in 0..n {
                        acc += exps[w] / sum * v.at(w, h * dh + c);
                    }
                    *o.at_mut(u, h * dh + c) = acc;
                }
            }
        }
        let attn = mm(&o, &l.wo);
        let mut r1 = Mat::zeros(n, d);
        for i in 0..n * d {
            r1.data[i] = x.data[i] + attn.data[i];
        }
        let mut h1 = mm(&r1, &l.ff1);
        for r in 0..n {
            for c in 0..d {
                *h1.at_mut(r, c) = (h1.at(r, c) + l.ff1_b[c]).tanh();
            }
        }
        let f = mm(&h1, &l.ff2);
        let mut out = Mat::zeros(n, d);
        for r in 0..n {
            for c in 0..d {
                *out.at_mut(r, c) = r1.at(r, c) + f.at(r, c) + l.ff2_b[c];
            }
        }
        out
    }

    #[test]
    fn encoder_matches_straight_line_oracle() {
        for seed in 0..5 {
            let g = random_graph(4, 40 + seed);
            let p = BackboneParams::init(4, 2, 2, 50 + seed).unwrap();
            let x = random_mat(4, 4, 60 + seed);
            let fast = encode_snapshot(&g, &x, &p).unwrap();
            let slow = naive_layer(&naive_layer(&x, &g, &p, 0), &g, &p, 1);
            for (a, b) in fast.data.iter().zip(&slow.data) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn encoder_is_permutation_equivariant() {
        let n = 6;
        let g = random_graph(n, 8);
        let p = BackboneParams::init(4, 1, 2, 9).unwrap();
        let x = random_mat(n, 4, 10);
        let z = encode_snapshot(&g, &x, &p).unwrap();

        let perm = [3usize, 0, 5, 1, 4, 2]; // new index of each old node
        let mut pedges = Vec::new();
        for e in g.edges() {
            pedges.push(edge(perm[e.src], perm[e.dst], e.sign));
        }
        let pg = SnapshotGraph::build(n, &pedges, false).unwrap();
        let mut px = Mat::zeros(n, 4);
        for u in 0..n {
            px.row_mut(perm[u]).copy_from_slice(x.row(u));
        }
        let pz = encode_snapshot(&pg, &px, &p).unwrap();
        for u in 0..n {
            for c in 0..4 {
                assert_abs_diff_eq!(pz.at(perm[u], c), z.at(u, c), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn score_edge_oracles() {
        let mut p = BackboneParams::init(3, 0, 1, 0).unwrap();
        p.score_w = Mat::identity(3);
        p.score_b = [0.0];
        let e1 = [1.0, 0.0, 0.0];
        let e2 = [0.0, 1.0, 0.0];
        assert_eq!(score_edge(&e1, &e1, &p), 1.0);
        assert_eq!(score_edge(&e1, &e2, &p), 0.0);
        p.score_w = Mat::zeros(3, 3);
        assert_eq!(score_edge(&e1, &e2, &p), 0.0);
        p.score_b = [0.25];
        assert_eq!(score_edge(&e2, &e2, &p), 0.25);
    }

    #[test]
    fn backbone_gradients_match_finite_differences() {
        // Loss: Σ over three labeled pairs of logistic loss on the bilinear
        // score, driven through the full encoder. n=6, d=4, L=1, heads=2.
        let g = random_graph(6, 21);
        let x = random_mat(6, 4, 22);
        let pairs = [(0usize, 1usize, 1.0), (2, 3, 0.0), (4, 5, 1.0)];
        let loss_of = |p: &BackboneParams| -> f64 {
            let z = encode_snapshot(&g, &x, p).unwrap();
            pairs
                .iter()
                .map(|&(u, v, y)| {
                    let s = score_edge(z.row(u), z.row(v), p);
                    crate::linalg::softplus(s) - y * s
                })
                .sum()
        };

        let mut p = BackboneParams::init(4, 1, 2, 23).unwrap();
        let trace = encode_forward(&g, &x, &p).unwrap();
        let mut grads = p.zeros_like();
        let mut dz = Mat::zeros(6, 4);
        for &(u, v, y) in &pairs {
            let s = score_edge(trace.z.row(u), trace.z.row(v), &p);
            let ds = crate::linalg::sigmoid(s) - y;
            let (mut du, mut dv) = (vec![0.0; 4], vec![0.0; 4]);
            score_edge_backward(trace.z.row(u), trace.z.row(v), &p, ds, &mut grads, &mut du, &mut dv);
            for c in 0..4 {
                *dz.at_mut(u, c) += du[c];
                *dz.at_mut(v, c) += dv[c];
            }
        }
        encode_backward(&p, &trace, &dz, &mut grads);

        let total = p.param_count();
        for idx in 0..total {
            let num = finite_difference(&mut p, idx, 1e-5, |q| loss_of(q));
            let ana = grads.flat_get(idx);
            let rel = gradient_rel_error(ana, num);
            assert!(
                rel <= 1e-4,
                "param {} analytic {ana} vs numeric {num} (rel {rel})",
                p.flat_name(idx)
            );
        }
    }

    #[test]
    fn embed_cache_hit_semantics() {
        let g = random_graph(5, 30);
        let tg = TemporalSignedGraph::new(vec![g.clone(), g]).unwrap();
        let p = BackboneParams::init(4, 1, 2, 31).unwrap();
        let cache = EmbedCache::new();
        let zs = embed_sequence(&tg, &p, Some(&cache), 0).unwrap();
        assert_eq!(cache.misses(), 1);
        assert_eq!(cache.hits(), 1);
        assert_eq!(zs[0].data, zs[1].data);
        // Same inputs, cache disabled → identical outputs.
        let plain = embed_sequence(&tg, &p, None, 0).unwrap();
        assert_eq!(plain[0].data, zs[0].data);
        // A params-version bump misses again.
        embed_sequence(&tg, &p, Some(&cache), 1).unwrap();
        assert_eq!(cache.misses(), 2);
    }
}
