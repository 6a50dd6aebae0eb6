//! Browser playground for the temporal signed link prediction library.
//!
//! Three operations are exported to JavaScript, each returning a JSON string
//! so the page needs no binding glue beyond `JSON.parse`:
//!
//! * [`weight_curve`] — the recency-weight profile for a (λ, γ, T) choice;
//! * [`degree_stats`] — degree statistics and histogram for one generated
//!   temporal network;
//! * [`mini_compare`] — a small paired baseline-vs-enhanced training run
//!   with per-seed test AUC.
//!
//! Off-wasm the `#[wasm_bindgen]` attribute expands to plain functions, so
//! the same crate builds natively and the unit tests below exercise the
//! exact entry points the page calls.

use serde::Serialize;
use tslp_core::eval::{auc, mean_and_se, paired_t_test, ScoredEdges};
use tslp_core::graph::{degree_statistics, TemporalSignedGraph};
use tslp_core::hcim::temporal_weights;
use tslp_core::synth::{generate_ba, generate_ws, BaConfig, WsConfig};
use tslp_core::training::{train_run, ModelKind, TrainConfig};
use wasm_bindgen::prelude::wasm_bindgen;

/// Serializes a payload, or an `{"error": …}` object when a step failed.
fn to_json<T: Serialize>(value: Result<T, tslp_core::error::Error>) -> String {
    match value {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e.to_string()),
    }
}

fn error_json(msg: &str) -> String {
    serde_json::to_string(&serde_json::json!({ "error": msg })).unwrap()
}

#[derive(Serialize)]
struct WeightCurve {
    t_len: usize,
    lambda: f64,
    gamma: f64,
    weights: Vec<f64>,
    sum: f64,
}

/// Recency weights over `t_len` historical snapshots for decay `lambda`
/// and recency scale `gamma`.
#[wasm_bindgen]
pub fn weight_curve(t_len: usize, lambda: f64, gamma: f64) -> String {
    let run = || {
        let weights = temporal_weights(t_len, lambda, gamma, 1e-8)?;
        let sum = weights.iter().sum();
        Ok(WeightCurve { t_len, lambda, gamma, weights, sum })
    };
    to_json(run())
}

#[derive(Serialize)]
struct DegreeReport {
    generator: String,
    n: usize,
    num_snapshots: usize,
    edges_per_snapshot: Vec<usize>,
    positive_fraction: f64,
    median_degree: f64,
    mean_degree: f64,
    max_degree: f64,
    max_to_median_ratio: f64,
    top5pct_edge_share: f64,
    /// Final-snapshot degree histogram: `histogram[k]` = node count at
    /// degree `k` (truncated at the max degree).
    histogram: Vec<usize>,
}

fn generate(kind: &str, n: usize, seed: u64) -> Result<TemporalSignedGraph, tslp_core::error::Error> {
    match kind {
        "ws" => generate_ws(&WsConfig { n, seed, ..WsConfig::default() }),
        "ba" => generate_ba(&BaConfig { n, seed, ..BaConfig::default() }),
        other => Err(tslp_core::error::Error::Config(format!(
            "unknown generator {other:?}; expected \"ws\" or \"ba\""
        ))),
    }
}

/// Generates one temporal network and reports degree statistics of its final
/// snapshot. `kind` is `"ws"` (small-world) or `"ba"` (preferential
/// attachment); `n` is clamped to 20..=2000 to keep the page responsive.
#[wasm_bindgen]
pub fn degree_stats(kind: &str, n: usize, seed: u64) -> String {
    let run = || {
        let tg = generate(kind, n.clamp(20, 2000), seed)?;
        let last = tg.snapshot(tg.len() - 1);
        let stats = degree_statistics(last, 0.05);
        let degrees = last.degrees();
        let mut histogram = vec![0usize; degrees.iter().max().copied().unwrap_or(0) + 1];
        for &d in &degrees {
            histogram[d] += 1;
        }
        Ok(DegreeReport {
            generator: kind.to_string(),
            n: tg.node_count(),
            num_snapshots: tg.len(),
            edges_per_snapshot: tg.snapshots().iter().map(|s| s.edge_count()).collect(),
            positive_fraction: last.pos_fraction(),
            median_degree: stats.median_degree,
            mean_degree: stats.mean_degree,
            max_degree: stats.max_degree,
            max_to_median_ratio: stats.max_to_median_ratio,
            top5pct_edge_share: stats.top_fraction_edge_share,
            histogram,
        })
    };
    to_json(run())
}

#[derive(Serialize)]
struct MiniCompare {
    generator: String,
    n: usize,
    epochs: usize,
    seeds: Vec<u64>,
    baseline_auc: Vec<f64>,
    enhanced_auc: Vec<f64>,
    baseline_mean: f64,
    enhanced_mean: f64,
    p_value: Option<f64>,
    baseline_loss: Vec<f64>,
    enhanced_loss: Vec<f64>,
    /// Learned temporal parameters of the last enhanced run.
    interpretability: Option<serde_json::Value>,
}

/// Trains the baseline and the history-aware model on one generated network
/// over `num_seeds` paired seeds and reports per-seed test AUC. Sized for a
/// browser tab: n ≤ 200, epochs ≤ 200, seeds ≤ 5.
#[wasm_bindgen]
pub fn mini_compare(kind: &str, n: usize, epochs: usize, num_seeds: usize) -> String {
    let run = || {
        let tg = generate(kind, n.clamp(40, 200), 42)?;
        let seeds: Vec<u64> = (0..num_seeds.clamp(1, 5) as u64).collect();
        let epochs = epochs.clamp(5, 200);
        let mut report = MiniCompare {
            generator: kind.to_string(),
            n: tg.node_count(),
            epochs,
            seeds: seeds.clone(),
            baseline_auc: Vec::new(),
            enhanced_auc: Vec::new(),
            baseline_mean: 0.0,
            enhanced_mean: 0.0,
            p_value: None,
            baseline_loss: Vec::new(),
            enhanced_loss: Vec::new(),
            interpretability: None,
        };
        for &seed in &seeds {
            for model in [ModelKind::Baseline, ModelKind::Enhanced] {
                let cfg = TrainConfig {
                    model,
                    epochs,
                    embedding_dim: Some(16),
                    num_layers: 1,
                    num_heads: 2,
                    seed,
                    ..TrainConfig::default()
                };
                let run = train_run(&tg, &cfg)?;
                let scored = ScoredEdges::new(
                    run.split.test.iter().map(|e| run.score(e.src, e.dst)).collect(),
                    run.split.test.iter().map(|e| e.sign).collect(),
                )?;
                let value = auc(&scored)?;
                match model {
                    ModelKind::Baseline => {
                        report.baseline_auc.push(value);
                        report.baseline_loss = run.loss_trace;
                    }
                    ModelKind::Enhanced => {
                        report.enhanced_auc.push(value);
                        report.enhanced_loss = run.loss_trace;
                        report.interpretability = run.interpretability;
                    }
                }
            }
        }
        if seeds.len() >= 2 {
            report.baseline_mean = mean_and_se(&report.baseline_auc)?.0;
            report.enhanced_mean = mean_and_se(&report.enhanced_auc)?.0;
            report.p_value =
                Some(paired_t_test(&report.enhanced_auc, &report.baseline_auc)?.p);
        } else {
            report.baseline_mean = report.baseline_auc[0];
            report.enhanced_mean = report.enhanced_auc[0];
        }
        Ok(report)
    };
    to_json(run())
}
