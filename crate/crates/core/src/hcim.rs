//! Historical context integration: recency-adaptive temporal weighting, an
//! LSTM over the snapshot axis, multi-head temporal self-attention, a
//! projection of the final attended step, and a learned fusion of historical
//! context into the current snapshot's embeddings.
//!
//! The pipeline is
//! `weights → scale history → LSTM → temporal attention → project → fuse`,
//! applied per node with no cross-node mixing. Every stage caches its
//! intermediates on the forward pass; [`hcim_backward`] replays them in
//! reverse with hand-derived gradients (validated against central finite
//! differences in the tests), including the analytic derivatives of the
//! weighting coefficients w.r.t. the reparameterized decay and recency
//! parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{sigmoid, softmax_inplace, softplus, Mat};
use crate::params::ParamTensors;
use crate::{Error, Result};

/// Fixed numerical-stability constant in the weight denominator.
pub const EPSILON: f64 = 1e-8;

/// Which fusion strategy a parameter set carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FusionMode {
    Global,
    NodeAdaptive,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fusion {
    /// One scalar gate α = sigmoid(raw_alpha) shared by every entry.
    Global { raw_alpha: [f64; 1] },
    /// Per-node, per-feature gates from a two-layer MLP (tanh hidden,
    /// sigmoid output) over the concatenated current and context rows.
    NodeAdaptive { w1: Mat, b1: Vec<f64>, w2: Mat, b2: Vec<f64> },
}

/// All learnable temporal parameters.
///
/// Constraint handling is by reparameterization: λ = sigmoid(raw_lambda) ∈
/// (0,1), γ = softplus(raw_gamma) + 1e-3 > 0, α = sigmoid(raw_alpha) ∈ (0,1),
/// so every optimizer step lands inside the valid domain by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HcimParams {
    pub d: usize,
    pub h: usize,
    pub num_heads: usize,
    pub raw_lambda: [f64; 1],
    pub raw_gamma: [f64; 1],
    /// LSTM input map, gate blocks stacked as (i, f, g, o): 4h×d.
    pub wx: Mat,
    /// LSTM recurrent map, same block order: 4h×h.
    pub wh: Mat,
    /// LSTM bias, same block order: 4h.
    pub b: Vec<f64>,
    /// Temporal attention maps over the hidden size (bias-free).
    pub aq: Mat,
    pub ak: Mat,
    pub av: Mat,
    pub ao: Mat,
    /// Projection h→d with bias.
    pub proj_w: Mat,
    pub proj_b: Vec<f64>,
    pub fusion: Fusion,
}

fn xavier(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect();
    Mat::from_vec(rows, cols, data)
}

impl HcimParams {
    /// Seeded initialization. The attention value/output maps and the
    /// projection start at identity (when square) so historical content can
    /// reach the fusion gate before any training; the LSTM forget-gate bias
    /// starts at 1 to keep early cell states persistent.
    pub fn init(d: usize, h: usize, num_heads: usize, mode: FusionMode, seed: u64) -> Result<Self> {
        if num_heads == 0 || h % num_heads != 0 {
            return Err(Error::Config(format!(
                "hidden size {h} must be divisible by num_heads {num_heads}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ident_or_xavier = |rows: usize, cols: usize, rng: &mut ChaCha8Rng| {
            if rows == cols {
                Mat::identity(rows)
            } else {
                xavier(rows, cols, rng)
            }
        };
        let mut b = vec![0.0; 4 * h];
        b[h..2 * h].iter_mut().for_each(|x| *x = 1.0);
        let fusion = match mode {
            FusionMode::Global => Fusion::Global { raw_alpha: [0.0] },
            FusionMode::NodeAdaptive => Fusion::NodeAdaptive {
                w1: xavier(2 * d, d, &mut rng),
                b1: vec![0.0; d],
                w2: xavier(d, d, &mut rng),
                b2: vec![0.0; d],
            },
        };
        Ok(HcimParams {
            d,
            h,
            num_heads,
            raw_lambda: [0.0],                       // λ = 0.5
            raw_gamma: [(2.0f64 - 1e-3).exp_m1().ln()], // γ = 2.0
            wx: xavier(4 * h, d, &mut rng),
            wh: xavier(4 * h, h, &mut rng),
            b,
            aq: xavier(h, h, &mut rng),
            ak: xavier(h, h, &mut rng),
            av: ident_or_xavier(h, h, &mut rng),
            ao: ident_or_xavier(h, h, &mut rng),
            proj_w: ident_or_xavier(h, d, &mut rng),
            proj_b: vec![0.0; d],
            fusion,
        })
    }

    pub fn mode(&self) -> FusionMode {
        match self.fusion {
            Fusion::Global { .. } => FusionMode::Global,
            Fusion::NodeAdaptive { .. } => FusionMode::NodeAdaptive,
        }
    }

    pub fn lambda(&self) -> f64 {
        sigmoid(self.raw_lambda[0])
    }

    pub fn gamma(&self) -> f64 {
        softplus(self.raw_gamma[0]) + 1e-3
    }

    /// Global fusion gate; `None` in node-adaptive mode.
    pub fn alpha(&self) -> Option<f64> {
        match &self.fusion {
            Fusion::Global { raw_alpha } => Some(sigmoid(raw_alpha[0])),
            Fusion::NodeAdaptive { .. } => None,
        }
    }

    pub fn zeros_like(&self) -> Self {
        let zl = |m: &Mat| Mat::zeros(m.rows, m.cols);
        HcimParams {
            d: self.d,
            h: self.h,
            num_heads: self.num_heads,
            raw_lambda: [0.0],
            raw_gamma: [0.0],
            wx: zl(&self.wx),
            wh: zl(&self.wh),
            b: vec![0.0; self.b.len()],
            aq: zl(&self.aq),
            ak: zl(&self.ak),
            av: zl(&self.av),
            ao: zl(&self.ao),
            proj_w: zl(&self.proj_w),
            proj_b: vec![0.0; self.proj_b.len()],
            fusion: match &self.fusion {
                Fusion::Global { .. } => Fusion::Global { raw_alpha: [0.0] },
                Fusion::NodeAdaptive { w1, b1, w2, b2 } => Fusion::NodeAdaptive {
                    w1: zl(w1),
                    b1: vec![0.0; b1.len()],
                    w2: zl(w2),
                    b2: vec![0.0; b2.len()],
                },
            },
        }
    }
}

impl ParamTensors for HcimParams {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = vec![
            ("raw_lambda".into(), &self.raw_lambda),
            ("raw_gamma".into(), &self.raw_gamma),
            ("lstm.wx".into(), &self.wx.data),
            ("lstm.wh".into(), &self.wh.data),
            ("lstm.b".into(), &self.b),
            ("attn.aq".into(), &self.aq.data),
            ("attn.ak".into(), &self.ak.data),
            ("attn.av".into(), &self.av.data),
            ("attn.ao".into(), &self.ao.data),
            ("proj.w".into(), &self.proj_w.data),
            ("proj.b".into(), &self.proj_b),
        ];
        match &self.fusion {
            Fusion::Global { raw_alpha } => out.push(("fusion.raw_alpha".into(), raw_alpha)),
            Fusion::NodeAdaptive { w1, b1, w2, b2 } => {
                out.push(("fusion.w1".into(), &w1.data));
                out.push(("fusion.b1".into(), b1));
                out.push(("fusion.w2".into(), &w2.data));
                out.push(("fusion.b2".into(), b2));
            }
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = vec![
            ("raw_lambda".into(), &mut self.raw_lambda[..]),
            ("raw_gamma".into(), &mut self.raw_gamma[..]),
            ("lstm.wx".into(), &mut self.wx.data),
            ("lstm.wh".into(), &mut self.wh.data),
            ("lstm.b".into(), &mut self.b),
            ("attn.aq".into(), &mut self.aq.data),
            ("attn.ak".into(), &mut self.ak.data),
            ("attn.av".into(), &mut self.av.data),
            ("attn.ao".into(), &mut self.ao.data),
            ("proj.w".into(), &mut self.proj_w.data),
            ("proj.b".into(), &mut self.proj_b),
        ];
        match &mut self.fusion {
            Fusion::Global { raw_alpha } => {
                out.push(("fusion.raw_alpha".into(), &mut raw_alpha[..]))
            }
            Fusion::NodeAdaptive { w1, b1, w2, b2 } => {
                out.push(("fusion.w1".into(), &mut w1.data));
                out.push(("fusion.b1".into(), b1));
                out.push(("fusion.w2".into(), &mut w2.data));
                out.push(("fusion.b2".into(), b2));
            }
        }
        out
    }
}

/// Recency-adaptive weighting coefficients.
///
/// `w_τ = λ^{T−1−τ}·e^{τ/γ} / (Σᵢ λ^{T−1−i}·e^{i/γ} + ε)`, evaluated in
/// log-space (max-shifted) so extreme λ, γ, or T neither overflow nor
/// underflow prematurely.
pub fn temporal_weights(t_len: usize, lambda: f64, gamma: f64, epsilon: f64) -> Result<Vec<f64>> {
    if t_len == 0 {
        return Err(Error::Config("temporal_weights needs T ≥ 1".into()));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Config(format!("lambda must lie in (0,1), got {lambda}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    let ln_lambda = lambda.ln();
    let logs: Vec<f64> =
        (0..t_len).map(|tau| (t_len - 1 - tau) as f64 * ln_lambda + tau as f64 / gamma).collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let nums: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let denom = nums.iter().sum::<f64>() + epsilon * (-m).exp();
    Ok(nums.iter().map(|n| n / denom).collect())
}

/// Scales each historical embedding by its weight: Z̃⁽τ⁾ = w_τ·Z⁽τ⁾.
pub fn apply_weights(hist: &[Mat], w: &[f64]) -> Result<Vec<Mat>> {
    if hist.len() != w.len() {
        return Err(Error::Config(format!(
            "history length {} does not match weight count {}",
            hist.len(),
            w.len()
        )));
    }
    Ok(hist
        .iter()
        .zip(w)
        .map(|(z, &wt)| {
            let mut out = z.clone();
            out.scale(wt);
            out
        })
        .collect())
}

/// Per-timestep LSTM activations kept for backpropagation through time.
struct LstmStep {
    i: Mat,
    f: Mat,
    g: Mat,
    o: Mat,
    c: Mat,
    tanh_c: Mat,
    h: Mat,
}

/// Final LSTM state (hidden and cell at the last timestep).
pub struct LstmState {
    pub hidden: Mat,
    pub cell: Mat,
}

/// Forward LSTM over the T axis, independently per node (rows). Input is the
/// weighted history; output is every hidden state plus the final state.
pub fn lstm_forward(inputs: &[Mat], p: &HcimParams) -> Result<(Vec<Mat>, LstmState)> {
    let trace = lstm_forward_traced(inputs, p)?;
    let hs: Vec<Mat> = trace.iter().map(|s| s.h.clone()).collect();
    let last = trace.last().expect("T ≥ 1 checked");
    Ok((hs, LstmState { hidden: last.h.clone(), cell: last.c.clone() }))
}

fn lstm_forward_traced(inputs: &[Mat], p: &HcimParams) -> Result<Vec<LstmStep>> {
    let t_len = inputs.len();
    if t_len == 0 {
        return Err(Error::Config("LSTM needs T ≥ 1".into()));
    }
    let n = inputs[0].rows;
    let h = p.h;
    let mut steps: Vec<LstmStep> = Vec::with_capacity(t_len);
    for (t, x) in inputs.iter().enumerate() {
        if x.rows != n || x.cols != p.d {
            return Err(Error::Config(format!(
                "history matrix {t} is {}×{}, expected {n}×{}",
                x.rows, x.cols, p.d
            )));
        }
        // z = x·wxᵀ + h_prev·whᵀ + b, gate blocks (i, f, g, o).
        let mut z = x.matmul_tb(&p.wx);
        if let Some(prev) = steps.last() {
            z.scaled_add(&prev.h.matmul_tb(&p.wh), 1.0);
        }
        for r in 0..n {
            for (zv, bv) in z.row_mut(r).iter_mut().zip(&p.b) {
                *zv += bv;
            }
        }
        let (mut i, mut f, mut g, mut o) =
            (Mat::zeros(n, h), Mat::zeros(n, h), Mat::zeros(n, h), Mat::zeros(n, h));
        for r in 0..n {
            let zr = z.row(r);
            for c in 0..h {
                *i.at_mut(r, c) = sigmoid(zr[c]);
                *f.at_mut(r, c) = sigmoid(zr[h + c]);
                *g.at_mut(r, c) = zr[2 * h + c].tanh();
                *o.at_mut(r, c) = sigmoid(zr[3 * h + c]);
            }
        }
        let mut c_t = Mat::zeros(n, h);
        for idx in 0..n * h {
            let prev_c = steps.last().map_or(0.0, |s| s.c.data[idx]);
            c_t.data[idx] = f.data[idx] * prev_c + i.data[idx] * g.data[idx];
        }
        let mut tanh_c = c_t.clone();
        for v in &mut tanh_c.data {
            *v = v.tanh();
        }
        let mut h_t = Mat::zeros(n, h);
        for idx in 0..n * h {
            h_t.data[idx] = o.data[idx] * tanh_c.data[idx];
        }
        if !h_t.data.iter().all(|v| v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite LSTM state at step {t}")));
        }
        steps.push(LstmStep { i, f, g, o, c: c_t, tanh_c, h: h_t });
    }
    Ok(steps)
}

/// Attention intermediates for one forward pass.
struct AttnTrace {
    qs: Vec<Mat>,
    ks: Vec<Mat>,
    vs: Vec<Mat>,
    /// probs[t1] has shape (n·heads)×T: row u·heads+hd softmaxes over t2.
    probs: Vec<Mat>,
    /// Per-t1 mixed values (head concat) before the output map.
    mixed: Vec<Mat>,
}

/// Multi-head scaled dot-product self-attention along the T axis, per node,
/// with Q=K=V=H (after the learned maps) and no causal mask.
fn temporal_attention_traced(hs: &[Mat], p: &HcimParams) -> (Vec<Mat>, AttnTrace) {
    let t_len = hs.len();
    let n = hs[0].rows;
    let h = p.h;
    let heads = p.num_heads;
    let hh = h / heads;
    let scale = 1.0 / (hh as f64).sqrt();

    let qs: Vec<Mat> = hs.iter().map(|m| m.matmul(&p.aq)).collect();
    let ks: Vec<Mat> = hs.iter().map(|m| m.matmul(&p.ak)).collect();
    let vs: Vec<Mat> = hs.iter().map(|m| m.matmul(&p.av)).collect();

    let mut probs = Vec::with_capacity(t_len);
    let mut mixed = Vec::with_capacity(t_len);
    for t1 in 0..t_len {
        let mut logits = Mat::zeros(n * heads, t_len);
        for u in 0..n {
            for hd in 0..heads {
                let qrow = &qs[t1].row(u)[hd * hh..(hd + 1) * hh];
                let lrow = logits.row_mut(u * heads + hd);
                for (t2, k) in ks.iter().enumerate() {
                    let krow = &k.row(u)[hd * hh..(hd + 1) * hh];
                    lrow[t2] = crate::linalg::dot(qrow, krow) * scale;
                }
                softmax_inplace(lrow);
            }
        }
        let mut mix = Mat::zeros(n, h);
        for u in 0..n {
            for hd in 0..heads {
                let prow = logits.row(u * heads + hd);
                let out = &mut mix.row_mut(u)[hd * hh..(hd + 1) * hh];
                for (t2, v) in vs.iter().enumerate() {
                    let vrow = &v.row(u)[hd * hh..(hd + 1) * hh];
                    let pw = prow[t2];
                    for (oc, vc) in out.iter_mut().zip(vrow) {
                        *oc += pw * vc;
                    }
                }
            }
        }
        probs.push(logits);
        mixed.push(mix);
    }
    let out: Vec<Mat> = mixed.iter().map(|m| m.matmul(&p.ao)).collect();
    (out, AttnTrace { qs, ks, vs, probs, mixed })
}

/// Forward-only temporal attention (the n×T×h output as T matrices).
pub fn temporal_attention(hs: &[Mat], p: &HcimParams) -> Result<Vec<Mat>> {
    if hs.is_empty() {
        return Err(Error::Config("temporal attention needs T ≥ 1".into()));
    }
    for (t, m) in hs.iter().enumerate() {
        if m.rows != hs[0].rows || m.cols != p.h {
            return Err(Error::Config(format!(
                "attention input {t} is {}×{}, expected {}×{}",
                m.rows,
                m.cols,
                hs[0].rows,
                p.h
            )));
        }
    }
    Ok(temporal_attention_traced(hs, p).0)
}

/// Final-timestep slice through the h→d projection.
pub fn project_context(h_attn_last: &Mat, p: &HcimParams) -> Mat {
    let mut out = h_attn_last.matmul(&p.proj_w);
    for r in 0..out.rows {
        for (v, b) in out.row_mut(r).iter_mut().zip(&p.proj_b) {
            *v += b;
        }
    }
    out
}

/// Global fusion: Z_enh = (1−α)·Z_cur + α·H_ctx.
pub fn fuse_global(z_cur: &Mat, h_ctx: &Mat, alpha: f64) -> Result<Mat> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha must lie in [0,1], got {alpha}")));
    }
    if z_cur.rows != h_ctx.rows || z_cur.cols != h_ctx.cols {
        return Err(Error::Config("fusion operands must share shape".into()));
    }
    if alpha == 0.0 {
        return Ok(z_cur.clone()); // bit-exact identity endpoint
    }
    if alpha == 1.0 {
        return Ok(h_ctx.clone());
    }
    let mut out = z_cur.clone();
    for (o, (zc, hc)) in out.data.iter_mut().zip(z_cur.data.iter().zip(&h_ctx.data)) {
        *o = (1.0 - alpha) * zc + alpha * hc;
    }
    Ok(out)
}

/// Node-adaptive fusion: α_node = sigmoid(MLP([Z_cur ‖ H_ctx])), elementwise
/// mix. Returns (Z_enh, α_node) so the gates can be reported.
pub fn fuse_adaptive(z_cur: &Mat, h_ctx: &Mat, p: &HcimParams) -> Result<(Mat, Mat)> {
    let (fused, _, alpha) = fuse_adaptive_traced(z_cur, h_ctx, p)?;
    Ok((fused, alpha))
}

fn fuse_adaptive_traced(z_cur: &Mat, h_ctx: &Mat, p: &HcimParams) -> Result<(Mat, Mat, Mat)> {
    let Fusion::NodeAdaptive { w1, b1, w2, b2 } = &p.fusion else {
        return Err(Error::Config("params carry global fusion, not node-adaptive".into()));
    };
    if z_cur.rows != h_ctx.rows || z_cur.cols != h_ctx.cols {
        return Err(Error::Config("fusion operands must share shape".into()));
    }
    let (n, d) = (z_cur.rows, z_cur.cols);
    let mut u = Mat::zeros(n, 2 * d);
    for r in 0..n {
        u.row_mut(r)[..d].copy_from_slice(z_cur.row(r));
        u.row_mut(r)[d..].copy_from_slice(h_ctx.row(r));
    }
    let mut m1 = u.matmul(w1);
    for r in 0..n {
        for (v, b) in m1.row_mut(r).iter_mut().zip(b1) {
            *v = (*v + b).tanh();
        }
    }
    let mut alpha = m1.matmul(w2);
    for r in 0..n {
        for (v, b) in alpha.row_mut(r).iter_mut().zip(b2) {
            *v = sigmoid(*v + b);
        }
    }
    let mut fused = Mat::zeros(n, d);
    for idx in 0..n * d {
        let a = alpha.data[idx];
        fused.data[idx] = (1.0 - a) * z_cur.data[idx] + a * h_ctx.data[idx];
    }
    Ok((fused, m1, alpha))
}

/// Test instrumentation: swap individual stages for identity to isolate the
/// others against hand-computed oracles. Production paths leave both off;
/// the backward pass only supports the production configuration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageHooks {
    pub identity_lstm: bool,
    pub identity_attention: bool,
}

/// Everything recorded by one [`hcim_forward`] call.
pub struct HcimTrace {
    hooks: StageHooks,
    weights: Vec<f64>,
    hist: Vec<Mat>,
    weighted: Vec<Mat>,
    lstm: Vec<LstmStep>,
    attn: Option<AttnTrace>,
    h_last: Mat,
    z_cur: Mat,
    h_ctx: Mat,
    fusion_m1: Option<Mat>,
    fusion_alpha: Option<Mat>,
    pub z_enh: Mat,
}

impl HcimTrace {
    /// Node-adaptive gates from the recorded forward (None in global mode).
    pub fn alpha_node(&self) -> Option<&Mat> {
        self.fusion_alpha.as_ref()
    }

    /// The applied temporal weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The projected historical context (pre-fusion).
    pub fn h_ctx(&self) -> &Mat {
        &self.h_ctx
    }
}

/// Full pipeline forward with the production configuration.
pub fn hcim_forward(hist: &[Mat], z_cur: &Mat, p: &HcimParams) -> Result<HcimTrace> {
    hcim_forward_hooked(hist, z_cur, p, StageHooks::default())
}

/// Forward with stage substitution hooks (tests only; see [`StageHooks`]).
pub fn hcim_forward_hooked(
    hist: &[Mat],
    z_cur: &Mat,
    p: &HcimParams,
    hooks: StageHooks,
) -> Result<HcimTrace> {
    if hist.is_empty() {
        return Err(Error::Config("history window must contain T ≥ 1 snapshots".into()));
    }
    let n = z_cur.rows;
    if z_cur.cols != p.d {
        return Err(Error::Config(format!(
            "current embeddings are {}×{}, expected d={}",
            n, z_cur.cols, p.d
        )));
    }
    if (hooks.identity_lstm || hooks.identity_attention) && p.h != p.d {
        return Err(Error::Config("identity stage hooks require h = d".into()));
    }
    for (t, m) in hist.iter().enumerate() {
        if m.rows != n || m.cols != p.d {
            return Err(Error::Config(format!(
                "history matrix {t} is {}×{}, expected {n}×{}",
                m.rows, m.cols, p.d
            )));
        }
    }
    let t_len = hist.len();
    let weights = temporal_weights(t_len, p.lambda(), p.gamma(), EPSILON)?;
    let weighted = apply_weights(hist, &weights)?;

    let (hs, lstm): (Vec<Mat>, Vec<LstmStep>) = if hooks.identity_lstm {
        (weighted.clone(), Vec::new())
    } else {
        let steps = lstm_forward_traced(&weighted, p)?;
        (steps.iter().map(|s| s.h.clone()).collect(), steps)
    };

    let (attn_out, attn) = if hooks.identity_attention {
        (hs.clone(), None)
    } else {
        let (out, trace) = temporal_attention_traced(&hs, p);
        (out, Some(trace))
    };
    let h_last = attn_out.last().expect("T ≥ 1").clone();
    let h_ctx = project_context(&h_last, p);

    let (z_enh, fusion_m1, fusion_alpha) = match &p.fusion {
        Fusion::Global { .. } => {
            let alpha = p.alpha().expect("global fusion");
            (fuse_global(z_cur, &h_ctx, alpha)?, None, None)
        }
        Fusion::NodeAdaptive { .. } => {
            let (fused, m1, alpha) = fuse_adaptive_traced(z_cur, &h_ctx, p)?;
            (fused, Some(m1), Some(alpha))
        }
    };
    if !z_enh.data.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("non-finite fused embeddings".into()));
    }
    Ok(HcimTrace {
        hooks,
        weights,
        hist: hist.to_vec(),
        weighted,
        lstm,
        attn,
        h_last,
        z_cur: z_cur.clone(),
        h_ctx,
        fusion_m1,
        fusion_alpha,
        z_enh,
    })
}

/// Gradients returned by [`hcim_backward`]: parameter gradients in a
/// [`HcimParams`]-shaped struct, plus input gradients.
pub struct HcimGradients {
    pub params: HcimParams,
    pub z_cur: Mat,
    pub hist: Vec<Mat>,
}

/// Reverse-mode pass through the recorded forward.
pub fn hcim_backward(p: &HcimParams, trace: &HcimTrace, dz_enh: &Mat) -> HcimGradients {
    assert_eq!(
        trace.hooks,
        StageHooks::default(),
        "backward supports only the production stage configuration"
    );
    let n = trace.z_cur.rows;
    let d = p.d;
    let h = p.h;
    let t_len = trace.hist.len();
    let mut g = p.zeros_like();
    let mut d_z_cur = Mat::zeros(n, d);
    let mut d_h_ctx = Mat::zeros(n, d);

    // Fusion.
    match &p.fusion {
        Fusion::Global { .. } => {
            let alpha = p.alpha().expect("global fusion");
            let mut d_alpha = 0.0;
            for idx in 0..n * d {
                let up = dz_enh.data[idx];
                d_z_cur.data[idx] += (1.0 - alpha) * up;
                d_h_ctx.data[idx] += alpha * up;
                d_alpha += up * (trace.h_ctx.data[idx] - trace.z_cur.data[idx]);
            }
            let Fusion::Global { raw_alpha } = &mut g.fusion else { unreachable!() };
            raw_alpha[0] += d_alpha * alpha * (1.0 - alpha);
        }
        Fusion::NodeAdaptive { w1, w2, .. } => {
            let m1 = trace.fusion_m1.as_ref().expect("adaptive trace");
            let alpha = trace.fusion_alpha.as_ref().expect("adaptive trace");
            let mut d_alpha = Mat::zeros(n, d);
            for idx in 0..n * d {
                let up = dz_enh.data[idx];
                let a = alpha.data[idx];
                d_z_cur.data[idx] += (1.0 - a) * up;
                d_h_ctx.data[idx] += a * up;
                d_alpha.data[idx] =
                    up * (trace.h_ctx.data[idx] - trace.z_cur.data[idx]) * a * (1.0 - a);
            }
            let Fusion::NodeAdaptive { w1: gw1, b1: gb1, w2: gw2, b2: gb2 } = &mut g.fusion
            else {
                unreachable!()
            };
            gw2.scaled_add(&m1.matmul_ta(&d_alpha), 1.0);
            for (acc, v) in gb2.iter_mut().zip(colsum(&d_alpha)) {
                *acc += v;
            }
            let mut d_m1pre = d_alpha.matmul_tb(w2);
            for (dv, m) in d_m1pre.data.iter_mut().zip(&m1.data) {
                *dv *= 1.0 - m * m;
            }
            let mut u = Mat::zeros(n, 2 * d);
            for r in 0..n {
                u.row_mut(r)[..d].copy_from_slice(trace.z_cur.row(r));
                u.row_mut(r)[d..].copy_from_slice(trace.h_ctx.row(r));
            }
            gw1.scaled_add(&u.matmul_ta(&d_m1pre), 1.0);
            for (acc, v) in gb1.iter_mut().zip(colsum(&d_m1pre)) {
                *acc += v;
            }
            let d_u = d_m1pre.matmul_tb(w1);
            for r in 0..n {
                for c in 0..d {
                    *d_z_cur.at_mut(r, c) += d_u.at(r, c);
                    *d_h_ctx.at_mut(r, c) += d_u.at(r, c + d);
                }
            }
        }
    }

    // Projection: h_ctx = h_last·proj_w + proj_b.
    g.proj_w.scaled_add(&trace.h_last.matmul_ta(&d_h_ctx), 1.0);
    for (acc, v) in g.proj_b.iter_mut().zip(colsum(&d_h_ctx)) {
        *acc += v;
    }
    let d_h_last = d_h_ctx.matmul_tb(&p.proj_w);

    // Temporal attention; upstream hits only the final timestep's output.
    let attn = trace.attn.as_ref().expect("production trace");
    let heads = p.num_heads;
    let hh = h / heads;
    let scale = 1.0 / (hh as f64).sqrt();
    let mut d_hs: Vec<Mat> = (0..t_len).map(|_| Mat::zeros(n, h)).collect();
    {
        let mut d_qs: Vec<Mat> = (0..t_len).map(|_| Mat::zeros(n, h)).collect();
        let mut d_ks: Vec<Mat> = (0..t_len).map(|_| Mat::zeros(n, h)).collect();
        let mut d_vs: Vec<Mat> = (0..t_len).map(|_| Mat::zeros(n, h)).collect();
        // Only t1 = T−1 receives upstream gradient.
        let t1 = t_len - 1;
        let d_out = &d_h_last;
        g.ao.scaled_add(&attn.mixed[t1].matmul_ta(d_out), 1.0);
        let d_mix = d_out.matmul_tb(&p.ao);
        for u in 0..n {
            for hd in 0..heads {
                let dmrow = &d_mix.row(u)[hd * hh..(hd + 1) * hh];
                let prow = attn.probs[t1].row(u * heads + hd);
                // dP and dV.
                let mut d_p = vec![0.0; t_len];
                for t2 in 0..t_len {
                    let vrow = &attn.vs[t2].row(u)[hd * hh..(hd + 1) * hh];
                    d_p[t2] = crate::linalg::dot(dmrow, vrow);
                    let dvrow = &mut d_vs[t2].row_mut(u)[hd * hh..(hd + 1) * hh];
                    for (dv, dm) in dvrow.iter_mut().zip(dmrow) {
                        *dv += prow[t2] * dm;
                    }
                }
                // Softmax backward over t2.
                let s: f64 = prow.iter().zip(&d_p).map(|(a, b)| a * b).sum();
                for t2 in 0..t_len {
                    let dl = prow[t2] * (d_p[t2] - s) * scale;
                    let krow = &attn.ks[t2].row(u)[hd * hh..(hd + 1) * hh];
                    let qrow = &attn.qs[t1].row(u)[hd * hh..(hd + 1) * hh];
                    let dqrow = &mut d_qs[t1].row_mut(u)[hd * hh..(hd + 1) * hh];
                    for (dq, k) in dqrow.iter_mut().zip(krow) {
                        *dq += dl * k;
                    }
                    let dkrow = &mut d_ks[t2].row_mut(u)[hd * hh..(hd + 1) * hh];
                    for (dk, q) in dkrow.iter_mut().zip(qrow) {
                        *dk += dl * q;
                    }
                }
            }
        }
        let hs: Vec<&Mat> = if trace.lstm.is_empty() {
            trace.weighted.iter().collect()
        } else {
            trace.lstm.iter().map(|s| &s.h).collect()
        };
        for t in 0..t_len {
            g.aq.scaled_add(&hs[t].matmul_ta(&d_qs[t]), 1.0);
            g.ak.scaled_add(&hs[t].matmul_ta(&d_ks[t]), 1.0);
            g.av.scaled_add(&hs[t].matmul_ta(&d_vs[t]), 1.0);
            d_hs[t].scaled_add(&d_qs[t].matmul_tb(&p.aq), 1.0);
            d_hs[t].scaled_add(&d_ks[t].matmul_tb(&p.ak), 1.0);
            d_hs[t].scaled_add(&d_vs[t].matmul_tb(&p.av), 1.0);
        }
    }

    // LSTM backward through time.
    let mut d_weighted: Vec<Mat> = (0..t_len).map(|_| Mat::zeros(n, d)).collect();
    {
        let steps = &trace.lstm;
        let mut d_h_next = Mat::zeros(n, h);
        let mut d_c_next = Mat::zeros(n, h);
        for t in (0..t_len).rev() {
            let st = &steps[t];
            let mut d_h = d_hs[t].clone();
            d_h.scaled_add(&d_h_next, 1.0);
            let mut d_z = Mat::zeros(n, 4 * h);
            let mut d_c_prev = Mat::zeros(n, h);
            for r in 0..n {
                for c in 0..h {
                    let idx = r * h + c;
                    let dh = d_h.data[idx];
                    let o = st.o.data[idx];
                    let tc = st.tanh_c.data[idx];
                    let d_o = dh * tc;
                    let d_c = d_c_next.data[idx] + dh * o * (1.0 - tc * tc);
                    let i = st.i.data[idx];
                    let f = st.f.data[idx];
                    let gg = st.g.data[idx];
                    let c_prev = if t == 0 { 0.0 } else { steps[t - 1].c.data[idx] };
                    let d_i = d_c * gg;
                    let d_g = d_c * i;
                    let d_f = d_c * c_prev;
                    d_c_prev.data[idx] = d_c * f;
                    let zr = d_z.row_mut(r);
                    zr[c] = d_i * i * (1.0 - i);
                    zr[h + c] = d_f * f * (1.0 - f);
                    zr[2 * h + c] = d_g * (1.0 - gg * gg);
                    zr[3 * h + c] = d_o * o * (1.0 - o);
                }
            }
            g.wx.scaled_add(&d_z.matmul_ta(&trace.weighted[t]), 1.0);
            if t > 0 {
                g.wh.scaled_add(&d_z.matmul_ta(&steps[t - 1].h), 1.0);
            }
            for (acc, v) in g.b.iter_mut().zip(colsum(&d_z)) {
                *acc += v;
            }
            d_weighted[t] = d_z.matmul(&p.wx);
            d_h_next = d_z.matmul(&p.wh);
            d_c_next = d_c_prev;
        }
    }

    // Weighting: Z̃_τ = w_τ·Z_τ, then Eq.-style analytic weight gradients
    // chained through λ = σ(raw_lambda), γ = softplus(raw_gamma) + 1e-3.
    let w = &trace.weights;
    let mut d_w = vec![0.0; t_len];
    let mut d_hist: Vec<Mat> = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let mut dz = d_weighted[t].clone();
        d_w[t] = dz.data.iter().zip(&trace.hist[t].data).map(|(a, b)| a * b).sum();
        dz.scale(w[t]);
        d_hist.push(dz);
    }
    let lambda = p.lambda();
    let gamma = p.gamma();
    // ∂w_τ/∂θ = w_τ·(∂l_τ/∂θ − Σᵢ wᵢ·∂l_i/∂θ) with l_τ the log-numerator;
    // the ε term is baked into the weights themselves.
    let c_lambda: f64 =
        w.iter().enumerate().map(|(i, wi)| wi * (t_len - 1 - i) as f64).sum();
    let c_gamma: f64 = w.iter().enumerate().map(|(i, wi)| wi * i as f64).sum();
    let mut d_lambda = 0.0;
    let mut d_gamma = 0.0;
    for tau in 0..t_len {
        let dl_dlam = ((t_len - 1 - tau) as f64 - c_lambda) / lambda;
        let dl_dgam = (c_gamma - tau as f64) / (gamma * gamma);
        d_lambda += d_w[tau] * w[tau] * dl_dlam;
        d_gamma += d_w[tau] * w[tau] * dl_dgam;
    }
    g.raw_lambda[0] += d_lambda * lambda * (1.0 - lambda);
    g.raw_gamma[0] += d_gamma * sigmoid(p.raw_gamma[0]);

    HcimGradients { params: g, z_cur: d_z_cur, hist: d_hist }
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

/// Learned-temporal-parameter dump for one trained model: λ, γ, and either
/// the global α or summary statistics of the node-adaptive gates.
pub fn interpretability_json(p: &HcimParams, last_alpha: Option<&Mat>) -> serde_json::Value {
    let mut obj = serde_json::json!({
        "lambda": p.lambda(),
        "gamma": p.gamma(),
        "fusion_mode": match p.mode() {
            FusionMode::Global => "global",
            FusionMode::NodeAdaptive => "node-adaptive",
        },
    });
    match p.mode() {
        FusionMode::Global => {
            obj["alpha"] = serde_json::json!(p.alpha().expect("global fusion"));
        }
        FusionMode::NodeAdaptive => {
            if let Some(a) = last_alpha {
                let mean = a.data.iter().sum::<f64>() / a.data.len() as f64;
                let min = a.data.iter().cloned().fold(f64::INFINITY, f64::min);
                let max = a.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                obj["alpha_node"] = serde_json::json!({
                    "mean": mean,
                    "min": min,
                    "max": max,
                });
            }
        }
    }
    obj
}
