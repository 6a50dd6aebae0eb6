//! End-to-end training of the baseline (backbone-only) and history-enhanced
//! (backbone + temporal context) models on one target snapshot.
//!
//! Protocol: the target snapshot's signed edges are split train/test,
//! stratified by sign; the target graph is rebuilt from train edges only, so
//! held-out edges are invisible to the encoder; history snapshots (strictly
//! before the target) are passed whole. Optimization is full-batch logistic
//! loss on observed edges with global-norm gradient clipping and Adam or
//! AdamW, fully deterministic given the seed.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backbone::{
    auto_embed_dim, encode_backward, encode_forward, score_edge, score_edge_backward,
    spectral_features, BackboneParams, EmbedCache,
};
use crate::graph::{SignedEdge, SnapshotGraph, TemporalSignedGraph};
use crate::hcim::{
    hcim_backward, hcim_forward, interpretability_json, FusionMode, HcimParams, HcimTrace,
};
use crate::linalg::{sigmoid, softplus, Mat};
use crate::params::ParamTensors;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Baseline,
    Enhanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Adam,
    AdamW,
}

/// Full training configuration. Serde defaults make every field optional in
/// JSON config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub fusion: FusionMode,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub optimizer: OptimizerKind,
    pub clip_norm: f64,
    /// Prediction target; `None` resolves to T−2 (second-to-last snapshot).
    pub target_snapshot_index: Option<usize>,
    pub train_fraction: f64,
    pub seed: u64,
    /// Backbone embedding dim; `None` picks [`auto_embed_dim`].
    pub embedding_dim: Option<usize>,
    pub num_layers: usize,
    pub num_heads: usize,
    /// Temporal-module hidden size; `None` matches the embedding dim.
    pub hcim_hidden: Option<usize>,
    /// Temporal attention heads; `None` matches `num_heads`.
    pub hcim_heads: Option<usize>,
    /// Freeze the backbone used for history embeddings at its initial
    /// weights so they can be cached across epochs. Turning this off
    /// backpropagates into every history encoding each epoch (no cache).
    pub freeze_history_backbone: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelKind::Enhanced,
            fusion: FusionMode::Global,
            epochs: 300,
            learning_rate: 1e-3,
            weight_decay: 0.0,
            optimizer: OptimizerKind::Adam,
            clip_norm: 1.0,
            target_snapshot_index: None,
            train_fraction: 0.85,
            seed: 0,
            embedding_dim: None,
            num_layers: 1,
            num_heads: 4,
            hcim_hidden: None,
            hcim_heads: None,
            freeze_history_backbone: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::Config(format!("clip_norm must be positive, got {}", self.clip_norm)));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config(format!(
                "weight_decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if self.num_heads == 0 {
            return Err(Error::Config("num_heads must be at least 1".into()));
        }
        Ok(())
    }

    /// Resolves the target snapshot index against a sequence of length
    /// `t_len`, enforcing that history exists (index ≥ 1).
    pub fn resolve_target(&self, t_len: usize) -> Result<usize> {
        if t_len < 2 {
            return Err(Error::Config(format!(
                "training needs at least 2 snapshots, got {t_len}"
            )));
        }
        let idx = self.target_snapshot_index.unwrap_or(t_len - 2);
        if idx == 0 {
            return Err(Error::Config(
                "target snapshot index 0 leaves no history before the target".into(),
            ));
        }
        if idx >= t_len {
            return Err(Error::Config(format!(
                "target snapshot index {idx} out of range for {t_len} snapshots"
            )));
        }
        Ok(idx)
    }
}

/// Sign-stratified train/test split of the target snapshot's edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSplit {
    pub target_index: usize,
    pub train: Vec<SignedEdge>,
    pub test: Vec<SignedEdge>,
}

/// Splits the target snapshot's edges train/test, stratified by sign so both
/// sides approximate the snapshot's positive fraction (up to integer
/// granularity on small sets). Shuffling is seeded by `cfg.seed`.
pub fn split_target_edges(tg: &TemporalSignedGraph, cfg: &TrainConfig) -> Result<EdgeSplit> {
    cfg.validate()?;
    let target_index = cfg.resolve_target(tg.len())?;
    let edges = tg.snapshot(target_index).edges();
    let mut pos: Vec<SignedEdge> = edges.iter().filter(|e| e.sign == 1).cloned().collect();
    let mut neg: Vec<SignedEdge> = edges.iter().filter(|e| e.sign == -1).cloned().collect();
    if neg.is_empty() || pos.is_empty() {
        return Err(Error::Data(format!(
            "stratification impossible: target snapshot {target_index} has {} positive and {} \
             negative edges (needs both)",
            pos.len(),
            neg.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);

    let total = pos.len() + neg.len();
    let train_total = (cfg.train_fraction * total as f64 + 0.5).floor() as usize;
    let train_pos = (cfg.train_fraction * pos.len() as f64 + 0.5).floor() as usize;
    let train_neg = train_total - train_pos;
    if train_pos == 0
        || train_neg == 0
        || train_neg > neg.len()
        || train_pos >= pos.len()
        || train_neg >= neg.len()
    {
        return Err(Error::Data(format!(
            "stratified split degenerates: {} positive / {} negative edges at fraction {} leave \
             an empty class on one side",
            pos.len(),
            neg.len(),
            cfg.train_fraction
        )));
    }
    let test = pos.split_off(train_pos).into_iter().chain(neg.split_off(train_neg)).collect();
    let train = pos.into_iter().chain(neg).collect();
    Ok(EdgeSplit { target_index, train, test })
}

/// Mean logistic loss with labels (sign+1)/2: mean(softplus(z) − y·z).
pub fn loss(logits: &[f64], signs: &[i8]) -> Result<f64> {
    if logits.is_empty() {
        return Err(Error::Config("loss over an empty edge batch".into()));
    }
    if logits.len() != signs.len() {
        return Err(Error::Config(format!(
            "{} logits vs {} signs",
            logits.len(),
            signs.len()
        )));
    }
    let mut acc = 0.0;
    for (&z, &s) in logits.iter().zip(signs) {
        debug_assert!(s == 1 || s == -1);
        let y = f64::from(s + 1) / 2.0;
        acc += softplus(z) - y * z;
    }
    Ok(acc / logits.len() as f64)
}

/// Loss plus per-edge dL/dlogit = (σ(z) − y)/m.
fn loss_and_dlogits(logits: &[f64], signs: &[i8]) -> Result<(f64, Vec<f64>)> {
    let l = loss(logits, signs)?;
    let m = logits.len() as f64;
    let d = logits
        .iter()
        .zip(signs)
        .map(|(&z, &s)| (sigmoid(z) - f64::from(s + 1) / 2.0) / m)
        .collect();
    Ok((l, d))
}

/// Scales all gradients by max_norm/‖g‖ when the global L2 norm ‖g‖ exceeds
/// max_norm; otherwise leaves them untouched. Returns the pre-clip norm.
pub fn clip_gradients<P: ParamTensors>(grads: &mut P, max_norm: f64) -> Result<f64> {
    if !(max_norm > 0.0) {
        return Err(Error::Config(format!("clip norm must be positive, got {max_norm}")));
    }
    let norm = grads.global_norm();
    if norm > max_norm {
        let s = max_norm / norm;
        for (_, t) in grads.tensors_mut() {
            for v in t {
                *v *= s;
            }
        }
    }
    Ok(norm)
}

/// Adam first/second-moment state (flat, in [`ParamTensors`] order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(param_count: usize) -> Self {
        AdamState { t: 0, m: vec![0.0; param_count], v: vec![0.0; param_count] }
    }
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// One optimization step. Adam uses bias-corrected moments (weight decay, if
/// any, is coupled L2 added to the gradient); AdamW applies the same Adam
/// step plus decoupled decay θ ← θ − lr·wd·θ.
pub fn optimizer_step<P: ParamTensors>(
    params: &mut P,
    grads: &P,
    state: &mut AdamState,
    kind: OptimizerKind,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    let count = params.param_count();
    if grads.param_count() != count || state.m.len() != count {
        return Err(Error::Config(format!(
            "optimizer shape mismatch: {count} params, {} grads, {} state slots",
            grads.param_count(),
            state.m.len()
        )));
    }
    state.t += 1;
    let bc1 = 1.0 - BETA1.powi(state.t as i32);
    let bc2 = 1.0 - BETA2.powi(state.t as i32);
    let gtensors = grads.tensors();
    let mut offset = 0;
    for ((pname, pt), (gname, gt)) in params.tensors_mut().into_iter().zip(gtensors) {
        debug_assert_eq!(pname, gname, "param/grad tensor order diverged");
        for (p, &graw) in pt.iter_mut().zip(gt.iter()) {
            let g = match kind {
                OptimizerKind::Adam => graw + weight_decay * *p,
                OptimizerKind::AdamW => graw,
            };
            let m = &mut state.m[offset];
            let v = &mut state.v[offset];
            *m = BETA1 * *m + (1.0 - BETA1) * g;
            *v = BETA2 * *v + (1.0 - BETA2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            let mut step = lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            if kind == OptimizerKind::AdamW {
                step += lr * weight_decay * *p;
            }
            *p -= step;
            offset += 1;
        }
    }
    Ok(())
}

/// Backbone weights plus (for the enhanced model) temporal-module weights,
/// exposed as one flat parameter family for clipping and optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub backbone: BackboneParams,
    pub hcim: Option<HcimParams>,
}

impl ModelParams {
    pub fn zeros_like(&self) -> Self {
        ModelParams {
            backbone: self.backbone.zeros_like(),
            hcim: self.hcim.as_ref().map(|h| h.zeros_like()),
        }
    }
}

impl ParamTensors for ModelParams {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = self
            .backbone
            .tensors()
            .into_iter()
            .map(|(n, t)| (format!("backbone.{n}"), t))
            .collect();
        if let Some(h) = &self.hcim {
            out.extend(h.tensors().into_iter().map(|(n, t)| (format!("hcim.{n}"), t)));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = self
            .backbone
            .tensors_mut()
            .into_iter()
            .map(|(n, t)| (format!("backbone.{n}"), t))
            .collect();
        if let Some(h) = &mut self.hcim {
            out.extend(h.tensors_mut().into_iter().map(|(n, t)| (format!("hcim.{n}"), t)));
        }
        out
    }
}

/// One completed training run.
#[derive(Debug)]
pub struct TrainRun {
    pub params: ModelParams,
    pub loss_trace: Vec<f64>,
    pub wall_clock_secs: f64,
    pub config: TrainConfig,
    pub seed: u64,
    pub split: EdgeSplit,
    /// Final node embeddings under the trained weights (fused for the
    /// enhanced model); score edges against these.
    pub z_final: Mat,
    /// Cache statistics over the epoch loop (excluding the final inference
    /// pass), for the frozen-history invariant.
    pub cache_hits: usize,
    pub cache_misses: usize,
    /// Learned temporal parameter report (enhanced model only).
    pub interpretability: Option<serde_json::Value>,
}

impl TrainRun {
    /// Bilinear logit for one node pair under the final embeddings.
    pub fn score(&self, u: usize, v: usize) -> f64 {
        score_edge(self.z_final.row(u), self.z_final.row(v), &self.params.backbone)
    }
}

fn two_rows_mut(m: &mut Mat, a: usize, b: usize) -> (&mut [f64], &mut [f64]) {
    assert_ne!(a, b, "edge endpoints must differ");
    let cols = m.cols;
    if a < b {
        let (lo, hi) = m.data.split_at_mut(b * cols);
        (&mut lo[a * cols..(a + 1) * cols], &mut hi[..cols])
    } else {
        let (lo, hi) = m.data.split_at_mut(a * cols);
        let b_row = &mut lo[b * cols..(b + 1) * cols];
        (&mut hi[..cols], b_row)
    }
}

fn rms(m: &Mat) -> f64 {
    if m.data.is_empty() {
        return 0.0;
    }
    (m.data.iter().map(|v| v * v).sum::<f64>() / m.data.len() as f64).sqrt()
}

/// Tags numeric failures inside an epoch with the epoch index; config errors
/// pass through untouched.
fn at_epoch<T>(r: Result<T>, epoch: usize) -> Result<T> {
    r.map_err(|e| match e {
        Error::Numeric(msg) => {
            Error::Numeric(format!("training diverged at epoch {epoch}: {msg}"))
        }
        other => other,
    })
}

struct ForwardPass {
    trace_cur: crate::backbone::EncodeTrace,
    hcim_trace: Option<HcimTrace>,
    hist_traces: Vec<crate::backbone::EncodeTrace>,
}

impl ForwardPass {
    fn z_used(&self) -> &Mat {
        self.hcim_trace.as_ref().map_or(&self.trace_cur.z, |t| &t.z_enh)
    }
}

/// Trains one model on one temporal graph. Deterministic given the config
/// (which includes the seed).
pub fn train_run(tg: &TemporalSignedGraph, cfg: &TrainConfig) -> Result<TrainRun> {
    let started = Instant::now();
    cfg.validate()?;
    let split = split_target_edges(tg, cfg)?;
    let n = tg.node_count();
    let directed = tg.directed();
    let train_graph = SnapshotGraph::build(n, &split.train, directed)?;

    let d = cfg.embedding_dim.unwrap_or_else(|| auto_embed_dim(n, cfg.num_heads));
    let mut model = ModelParams {
        backbone: BackboneParams::init(d, cfg.num_layers, cfg.num_heads, cfg.seed)?,
        hcim: match cfg.model {
            ModelKind::Baseline => None,
            ModelKind::Enhanced => Some(HcimParams::init(
                d,
                cfg.hcim_hidden.unwrap_or(d),
                cfg.hcim_heads.unwrap_or(cfg.num_heads),
                cfg.fusion,
                // Distinct deterministic stream from the backbone init.
                cfg.seed ^ 0x7465_6d70_6f72_616c,
            )?),
        },
    };

    let x_cur = spectral_features(&train_graph, d)?;
    let hist_graphs: Vec<&SnapshotGraph> = match cfg.model {
        ModelKind::Baseline => Vec::new(),
        ModelKind::Enhanced => (0..split.target_index).map(|t| tg.snapshot(t)).collect(),
    };
    // Frozen-history mode embeds history under the initial backbone weights,
    // which is what makes the cache sound across epochs.
    let frozen_backbone = model.backbone.clone();
    let cache = EmbedCache::new();
    // Joint mode needs per-snapshot spectral features for re-encoding.
    let hist_features: Vec<Mat> = if cfg.freeze_history_backbone {
        Vec::new()
    } else {
        hist_graphs.iter().map(|g| spectral_features(g, d)).collect::<Result<_>>()?
    };

    let signs: Vec<i8> = split.train.iter().map(|e| e.sign).collect();
    let mut state = AdamState::new(model.param_count());
    let mut loss_trace = Vec::with_capacity(cfg.epochs);

    let forward = |model: &ModelParams, cache_on: bool| -> Result<ForwardPass> {
        let trace_cur = encode_forward(&train_graph, &x_cur, &model.backbone)?;
        let mut hist_traces = Vec::new();
        let hcim_trace = match (&model.hcim, cfg.model) {
            (Some(hcim), ModelKind::Enhanced) => {
                let z_hist: Vec<Mat> = if cfg.freeze_history_backbone {
                    let c = if cache_on { Some(&cache) } else { None };
                    hist_graphs
                        .iter()
                        .map(|g| crate::backbone::embed_one(g, &frozen_backbone, c, 0))
                        .collect::<Result<_>>()?
                } else {
                    hist_traces = hist_graphs
                        .iter()
                        .zip(&hist_features)
                        .map(|(g, x)| encode_forward(g, x, &model.backbone))
                        .collect::<Result<_>>()?;
                    hist_traces.iter().map(|t| t.z.clone()).collect()
                };
                Some(hcim_forward(&z_hist, &trace_cur.z, hcim)?)
            }
            _ => None,
        };
        Ok(ForwardPass { trace_cur, hcim_trace, hist_traces })
    };

    // Temporal weighting and gate squashing shrink the historical context by
    // orders of magnitude relative to the current embeddings at init, which
    // starves the history pathway of score gradient until long after the
    // train edges are memorized. Calibrate the projection init (identity up
    // to scale) so both fusion inputs start at the same RMS; training takes
    // over from there. The probe bypasses the cache so the cache-hit
    // accounting over the epoch loop is unaffected.
    if model.hcim.is_some() {
        let probe = forward(&model, false)?;
        let trace = probe
            .hcim_trace
            .as_ref()
            .expect("enhanced forward records a temporal trace");
        let (rz, rh) = (rms(&probe.trace_cur.z), rms(trace.h_ctx()));
        if rz > 0.0 && rh > 0.0 {
            let kappa = (rz / rh).clamp(1.0, 1e4);
            let hcim = model.hcim.as_mut().expect("enhanced model carries temporal parameters");
            for v in hcim.proj_w.data.iter_mut() {
                *v *= kappa;
            }
        }
    }

    for epoch in 0..cfg.epochs {
        let pass = at_epoch(forward(&model, true), epoch)?;
        let z_used = pass.z_used();
        let logits: Vec<f64> = split
            .train
            .iter()
            .map(|e| score_edge(z_used.row(e.src), z_used.row(e.dst), &model.backbone))
            .collect();
        let (l, dlogits) = loss_and_dlogits(&logits, &signs)?;
        if !l.is_finite() {
            return Err(Error::Numeric(format!(
                "training diverged at epoch {epoch}: non-finite loss"
            )));
        }
        loss_trace.push(l);

        let mut grads = model.zeros_like();
        let mut d_z_used = Mat::zeros(n, d);
        for (e, dl) in split.train.iter().zip(&dlogits) {
            let (dz_u, dz_v) = two_rows_mut(&mut d_z_used, e.src, e.dst);
            score_edge_backward(
                z_used.row(e.src),
                z_used.row(e.dst),
                &model.backbone,
                *dl,
                &mut grads.backbone,
                dz_u,
                dz_v,
            );
        }

        let d_z_cur = match (&model.hcim, &pass.hcim_trace) {
            (Some(hcim), Some(trace)) => {
                let hg = hcim_backward(hcim, trace, &d_z_used);
                grads.hcim = Some(hg.params);
                if !cfg.freeze_history_backbone {
                    for (t, d_hist) in pass.hist_traces.iter().zip(&hg.hist) {
                        encode_backward(&model.backbone, t, d_hist, &mut grads.backbone);
                    }
                }
                hg.z_cur
            }
            _ => d_z_used,
        };
        encode_backward(&model.backbone, &pass.trace_cur, &d_z_cur, &mut grads.backbone);

        clip_gradients(&mut grads, cfg.clip_norm)?;
        optimizer_step(
            &mut model,
            &grads,
            &mut state,
            cfg.optimizer,
            cfg.learning_rate,
            cfg.weight_decay,
        )?;
    }

    // Snapshot cache statistics before the final inference pass so the
    // frozen-history invariant (hits = (epochs−1)·|history|) stays visible.
    let cache_hits = cache.hits();
    let cache_misses = cache.misses();

    let final_pass = forward(&model, true)?;
    let z_final = final_pass.z_used().clone();
    let interpretability = model.hcim.as_ref().map(|h| {
        interpretability_json(h, final_pass.hcim_trace.as_ref().and_then(|t| t.alpha_node()))
    });

    Ok(TrainRun {
        params: model,
        loss_trace,
        wall_clock_secs: started.elapsed().as_secs_f64(),
        config: cfg.clone(),
        seed: cfg.seed,
        split,
        z_final,
        cache_hits,
        cache_misses,
        interpretability,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn edge(src: usize, dst: usize, sign: i8) -> SignedEdge {
        SignedEdge::new(src, dst, sign, None).unwrap()
    }

    /// Star-shaped target with 90 positive and 10 negative edges.
    fn ninety_ten_graph() -> TemporalSignedGraph {
        let n = 101;
        let edges: Vec<SignedEdge> =
            (1..=100).map(|i| edge(0, i, if i <= 90 { 1 } else { -1 })).collect();
        let target = SnapshotGraph::build(n, &edges, false).unwrap();
        let history = SnapshotGraph::build(n, &edges[..50], false).unwrap();
        TemporalSignedGraph::new(vec![history, target]).unwrap()
    }

    fn target_one(seed: u64) -> TrainConfig {
        TrainConfig { target_snapshot_index: Some(1), seed, ..TrainConfig::default() }
    }

    #[test]
    fn split_counts_match_stratified_arithmetic() {
        // DERIVED: 100 edges (90+/10−) at 0.85 → train 85 = 77+ / 8−,
        // test 15 = 13+ / 2−.
        let tg = ninety_ten_graph();
        let split = split_target_edges(&tg, &target_one(7)).unwrap();
        assert_eq!(split.train.len(), 85);
        assert_eq!(split.test.len(), 15);
        assert_eq!(split.train.iter().filter(|e| e.sign == 1).count(), 77);
        assert_eq!(split.train.iter().filter(|e| e.sign == -1).count(), 8);
        assert_eq!(split.test.iter().filter(|e| e.sign == 1).count(), 13);
        assert_eq!(split.test.iter().filter(|e| e.sign == -1).count(), 2);
        // Train-side positive fraction within 2pp of the snapshot's 0.90.
        assert!((77.0 / 85.0f64 - 0.9).abs() <= 0.02);
    }

    #[test]
    fn split_is_seed_deterministic_and_seed_sensitive() {
        let tg = ninety_ten_graph();
        let a = split_target_edges(&tg, &target_one(3)).unwrap();
        let b = split_target_edges(&tg, &target_one(3)).unwrap();
        assert_eq!(a, b);
        let c = split_target_edges(&tg, &target_one(4)).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn split_rejects_single_class_and_bad_target() {
        let n = 5;
        let all_pos = SnapshotGraph::build(
            n,
            &[edge(0, 1, 1), edge(1, 2, 1), edge(2, 3, 1)],
            false,
        )
        .unwrap();
        let tg =
            TemporalSignedGraph::new(vec![all_pos.clone(), all_pos.clone()]).unwrap();
        let err = split_target_edges(&tg, &target_one(0)).unwrap_err();
        assert!(matches!(err, Error::Data(_)), "{err}");
        assert!(err.to_string().contains("stratification"));

        let cfg = TrainConfig { target_snapshot_index: Some(0), ..TrainConfig::default() };
        let err = split_target_edges(&tg, &cfg).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
    }

    #[test]
    fn default_target_is_second_to_last() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.resolve_target(6).unwrap(), 4);
        assert_eq!(cfg.resolve_target(3).unwrap(), 1);
        assert!(cfg.resolve_target(2).is_err()); // T−2 = 0 has no history
        assert!(cfg.resolve_target(1).is_err());
    }

    #[test]
    fn loss_oracles() {
        // DERIVED: logits {0,0} labels {1,0} → mean ln 2.
        let l = loss(&[0.0, 0.0], &[1, -1]).unwrap();
        assert_abs_diff_eq!(l, std::f64::consts::LN_2, epsilon = 1e-15);
        // Saturation: huge logit with positive label → ≈ 0.
        let l = loss(&[40.0], &[1]).unwrap();
        assert!(l < 1e-15, "{l}");
        // Mismatched label: huge logit with negative label → ≈ logit.
        let l = loss(&[40.0], &[-1]).unwrap();
        assert_abs_diff_eq!(l, 40.0, epsilon = 1e-12);
        assert!(loss(&[], &[]).is_err());
    }

    struct Flat(Vec<f64>);
    impl ParamTensors for Flat {
        fn tensors(&self) -> Vec<(String, &[f64])> {
            vec![("w".into(), &self.0[..])]
        }
        fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
            vec![("w".into(), &mut self.0[..])]
        }
    }

    #[test]
    fn clip_rescales_only_above_threshold() {
        // DERIVED: ‖(3,4)‖ = 5 → scaled to (0.6, 0.8).
        let mut g = Flat(vec![3.0, 4.0]);
        let norm = clip_gradients(&mut g, 1.0).unwrap();
        assert_abs_diff_eq!(norm, 5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.0[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(g.0[1], 0.8, epsilon = 1e-15);
        // Direction preserved exactly: ratio 3:4.
        assert_abs_diff_eq!(g.0[0] / g.0[1], 0.75, epsilon = 1e-15);

        let mut small = Flat(vec![0.3, 0.4]);
        clip_gradients(&mut small, 1.0).unwrap();
        assert_eq!(small.0, vec![0.3, 0.4]);

        let mut zero = Flat(vec![0.0, 0.0]);
        clip_gradients(&mut zero, 1.0).unwrap();
        assert_eq!(zero.0, vec![0.0, 0.0]);
    }

    #[test]
    fn adam_first_step_oracle() {
        // DERIVED: param 1.0, grad 1.0, lr 0.1, t=1 → bias-corrected step
        // ≈ lr → param ≈ 0.9.
        let mut p = Flat(vec![1.0]);
        let g = Flat(vec![1.0]);
        let mut st = AdamState::new(1);
        optimizer_step(&mut p, &g, &mut st, OptimizerKind::Adam, 0.1, 0.0).unwrap();
        assert_abs_diff_eq!(p.0[0], 0.9, epsilon = 1e-6);
    }

    #[test]
    fn adamw_decoupled_decay_oracle() {
        // DERIVED: decay 0.1, lr 0.1, grad 0 → 1.0 → 0.99.
        let mut p = Flat(vec![1.0]);
        let g = Flat(vec![0.0]);
        let mut st = AdamState::new(1);
        optimizer_step(&mut p, &g, &mut st, OptimizerKind::AdamW, 0.1, 0.1).unwrap();
        assert_abs_diff_eq!(p.0[0], 0.99, epsilon = 1e-12);
    }

    #[test]
    fn zero_gradient_zero_decay_leaves_params_unchanged() {
        let mut p = Flat(vec![1.5, -2.0]);
        let g = Flat(vec![0.0, 0.0]);
        let mut st = AdamState::new(2);
        for kind in [OptimizerKind::Adam, OptimizerKind::AdamW] {
            optimizer_step(&mut p, &g, &mut st, kind, 0.1, 0.0).unwrap();
        }
        assert_eq!(p.0, vec![1.5, -2.0]);
    }

    /// Small synthetic temporal graph with persistent structure.
    fn toy_graph(n: usize, t_len: usize) -> TemporalSignedGraph {
        let cfg = crate::synth::WsConfig {
            n,
            num_snapshots: t_len,
            seed: 11,
            ..crate::synth::WsConfig::default()
        };
        crate::synth::generate_ws(&cfg).unwrap()
    }

    fn toy_config(model: ModelKind, epochs: usize) -> TrainConfig {
        TrainConfig {
            model,
            epochs,
            embedding_dim: Some(16),
            num_heads: 4,
            learning_rate: 5e-3,
            seed: 1,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_epochs_returns_init_with_empty_trace() {
        let tg = toy_graph(40, 3);
        let run = train_run(&tg, &toy_config(ModelKind::Enhanced, 0)).unwrap();
        assert!(run.loss_trace.is_empty());
        assert!(run.params.all_finite());
        assert!(run.z_final.data.iter().all(|v| v.is_finite()));
        assert_eq!(run.cache_hits, 0);
    }

    #[test]
    fn training_is_bit_deterministic() {
        let tg = toy_graph(40, 3);
        let cfg = toy_config(ModelKind::Enhanced, 5);
        let a = train_run(&tg, &cfg).unwrap();
        let b = train_run(&tg, &cfg).unwrap();
        assert_eq!(a.loss_trace, b.loss_trace);
        for ((_, ta), (_, tb)) in a.params.tensors().into_iter().zip(b.params.tensors()) {
            assert_eq!(ta, tb);
        }
        assert_eq!(a.z_final.data, b.z_final.data);
    }

    #[test]
    fn toy_training_descends() {
        // Final train loss beats initial on a small-world toy (both models).
        let tg = toy_graph(100, 4);
        for model in [ModelKind::Baseline, ModelKind::Enhanced] {
            let run = train_run(&tg, &toy_config(model, 200)).unwrap();
            let first = run.loss_trace[0];
            let last = *run.loss_trace.last().unwrap();
            assert!(
                last < first,
                "{model:?}: loss did not descend ({first} → {last})"
            );
        }
    }

    #[test]
    fn frozen_history_cache_hit_invariant() {
        // T=5, target 3 → history length 3; epochs 4 → hits 3·3=9, misses 3.
        let tg = toy_graph(30, 5);
        let cfg = TrainConfig {
            epochs: 4,
            embedding_dim: Some(8),
            num_heads: 2,
            target_snapshot_index: Some(3),
            seed: 2,
            ..TrainConfig::default()
        };
        let run = train_run(&tg, &cfg).unwrap();
        assert_eq!(run.cache_misses, 3);
        assert_eq!(run.cache_hits, (cfg.epochs - 1) * 3);
    }

    #[test]
    fn joint_history_mode_trains_and_uses_no_cache() {
        let tg = toy_graph(30, 3);
        let cfg = TrainConfig {
            epochs: 3,
            embedding_dim: Some(8),
            num_heads: 2,
            freeze_history_backbone: false,
            seed: 3,
            ..TrainConfig::default()
        };
        let run = train_run(&tg, &cfg).unwrap();
        assert_eq!(run.cache_hits + run.cache_misses, 0);
        assert_eq!(run.loss_trace.len(), 3);
        assert!(run.params.all_finite());
    }

    #[test]
    fn baseline_ignores_history_entirely() {
        // Same target snapshot, unrelated history → identical baseline runs.
        let tg = toy_graph(30, 3);
        let mut snaps: Vec<SnapshotGraph> = tg.snapshots().to_vec();
        snaps[0] = crate::synth::generate_ws(&crate::synth::WsConfig {
            n: 30,
            num_snapshots: 2,
            seed: 77,
            ..crate::synth::WsConfig::default()
        })
        .unwrap()
        .snapshot(1)
        .clone();
        let tg2 = TemporalSignedGraph::new(snaps).unwrap();
        let cfg = TrainConfig {
            model: ModelKind::Baseline,
            epochs: 3,
            embedding_dim: Some(8),
            num_heads: 2,
            seed: 4,
            ..TrainConfig::default()
        };
        let a = train_run(&tg, &cfg).unwrap();
        let b = train_run(&tg2, &cfg).unwrap();
        assert_eq!(a.loss_trace, b.loss_trace);
    }

    #[test]
    fn divergence_reports_epoch() {
        // An absurd learning rate overflows the attention logits on the
        // epoch after the first step.
        let tg = toy_graph(30, 3);
        let cfg = TrainConfig {
            epochs: 5,
            embedding_dim: Some(8),
            num_heads: 2,
            learning_rate: 1e305,
            seed: 5,
            ..TrainConfig::default()
        };
        let err = train_run(&tg, &cfg).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)), "{err}");
        assert!(err.to_string().contains("epoch"), "{err}");
    }

    #[test]
    fn reparameterized_constraints_hold_after_training() {
        let tg = toy_graph(40, 3);
        for fusion in [FusionMode::Global, FusionMode::NodeAdaptive] {
            let cfg = TrainConfig { fusion, ..toy_config(ModelKind::Enhanced, 10) };
            let run = train_run(&tg, &cfg).unwrap();
            let h = run.params.hcim.as_ref().unwrap();
            assert!(h.lambda() > 0.0 && h.lambda() < 1.0);
            assert!(h.gamma() > 0.0);
            if let Some(a) = h.alpha() {
                assert!(a > 0.0 && a < 1.0);
            }
            assert!(run.interpretability.is_some());
        }
    }

    #[test]
    fn enhanced_model_scores_edges_via_final_embeddings() {
        let tg = toy_graph(40, 3);
        let run = train_run(&tg, &toy_config(ModelKind::Enhanced, 5)).unwrap();
        let e = &run.split.test[0];
        let direct =
            score_edge(run.z_final.row(e.src), run.z_final.row(e.dst), &run.params.backbone);
        assert_eq!(run.score(e.src, e.dst), direct);
        assert!(direct.is_finite());
    }
}
