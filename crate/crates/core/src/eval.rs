//! Evaluation: threshold-free AUC (exact rank-based Mann–Whitney with tie
//! handling), F1 at a fixed logit threshold, precision-at-k, paired t-tests
//! (t-distribution tail via a from-scratch regularized incomplete beta), and
//! multi-seed summaries with relative-improvement / error-reduction derived
//! statistics.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Parallel score/sign lists for a scored edge set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredEdges {
    scores: Vec<f64>,
    signs: Vec<i8>,
}

impl ScoredEdges {
    pub fn new(scores: Vec<f64>, signs: Vec<i8>) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::Config("scored edge set must be nonempty".into()));
        }
        if scores.len() != signs.len() {
            return Err(Error::Config(format!(
                "{} scores vs {} signs",
                scores.len(),
                signs.len()
            )));
        }
        if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
            return Err(Error::Numeric(format!("non-finite score {bad} in evaluation")));
        }
        if let Some(bad) = signs.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::Data(format!("sign must be +1 or -1, got {bad}")));
        }
        Ok(ScoredEdges { scores, signs })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }
}

/// Area under the ROC curve by the Mann–Whitney rank formulation: the
/// fraction of (positive, negative) pairs ranked correctly, ties counting
/// one half, computed exactly via average ranks over tie groups.
pub fn auc(s: &ScoredEdges) -> Result<f64> {
    let n_pos = s.signs.iter().filter(|&&x| x == 1).count();
    let n_neg = s.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Numeric(format!(
            "AUC undefined on single-class input ({n_pos} positive, {n_neg} negative)"
        )));
    }
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s.scores[a].partial_cmp(&s.scores[b]).expect("finite scores"));
    // Average ranks (1-based) within exact-tie groups.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && s.scores[order[j + 1]] == s.scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if s.signs[idx] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// F1 over the positive class, predicting positive iff score > threshold
/// (strictly). Precision is 0 when nothing is predicted positive; an input
/// with no actually-positive edges has undefined recall and errors.
pub fn f1(s: &ScoredEdges, threshold: f64) -> Result<f64> {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&score, &sign) in s.scores.iter().zip(&s.signs) {
        let predicted = score > threshold;
        match (predicted, sign == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp + fn_ == 0 {
        return Err(Error::Numeric(
            "F1 undefined: no actually-positive edges in the evaluation set".into(),
        ));
    }
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = tp as f64 / (tp + fn_) as f64;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Fraction of true positives among the `min(k, |s|)` highest-scored edges;
/// ties and equal scores keep their input order (stable sort). The boolean
/// reports whether the denominator was clamped below `k`.
pub fn precision_at_k(s: &ScoredEdges, k: usize) -> Result<(f64, bool)> {
    if k == 0 {
        return Err(Error::Config("precision_at_k needs k ≥ 1".into()));
    }
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| {
        s.scores[b].partial_cmp(&s.scores[a]).expect("finite scores").then(a.cmp(&b))
    });
    let take = k.min(s.len());
    let hits = order[..take].iter().filter(|&&i| s.signs[i] == 1).count();
    Ok((hits as f64 / take as f64, take < k))
}

/// Natural log of the gamma function (Lanczos approximation, g=7, n=9),
/// accurate to ~1e-13 for positive arguments.
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    debug_assert!(x > 0.0);
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1−x) = π/sin(πx).
        return std::f64::consts::PI.ln()
            - (std::f64::consts::PI * x).sin().ln()
            - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.99999999999980993;
    for (i, c) in COEFFS.iter().enumerate() {
        acc += c / (x + i as f64 + 1.0);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the regularized incomplete beta (modified Lentz).
fn betacf(a: f64, b: f64, x: f64) -> Result<f64> {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(Error::Numeric(format!(
        "incomplete beta continued fraction failed to converge (a={a}, b={b}, x={x})"
    )))
}

/// Regularized incomplete beta I_x(a, b).
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Config(format!("incomplete beta needs a,b > 0, got {a}, {b}")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Config(format!("incomplete beta needs x in [0,1], got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let front =
        (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    // Continued fraction converges fastest below the distribution mean.
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * betacf(a, b, x)? / a)
    } else {
        Ok(1.0 - front * betacf(b, a, 1.0 - x)? / b)
    }
}

/// Paired t-test result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    /// Zero-variance differences with nonzero mean (p reported as 0).
    pub degenerate_variance: bool,
}

/// Two-sided paired t-test on per-seed values. Conventions: identical
/// samples → (t=0, p=1); zero-variance nonzero differences → p=0 with the
/// degenerate flag and a signed-infinite t.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    let n = a.len();
    if n != b.len() {
        return Err(Error::Config(format!("paired samples differ in length: {n} vs {}", b.len())));
    }
    if n < 2 {
        return Err(Error::Config(format!("paired t-test needs n ≥ 2, got {n}")));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    if d.iter().all(|&x| x == 0.0) {
        return Ok(TTest { t: 0.0, p: 1.0, degenerate_variance: false });
    }
    if var == 0.0 {
        return Ok(TTest {
            t: if mean > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY },
            p: 0.0,
            degenerate_variance: true,
        });
    }
    let se = (var / n as f64).sqrt();
    let t = mean / se;
    let nu = (n - 1) as f64;
    let p = incomplete_beta(nu / 2.0, 0.5, nu / (nu + t * t))?;
    Ok(TTest { t, p, degenerate_variance: false })
}

/// Sample mean and standard error (Bessel-corrected sd / √n).
pub fn mean_and_se(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Config(format!("standard error needs n ≥ 2, got {n}")));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    Ok((mean, (var / n as f64).sqrt()))
}

/// Significance stars: p < 0.001 → `***`, p < 0.05 → `*`, else `n.s.`.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.05 {
        "*"
    } else {
        "n.s."
    }
}

/// Per-seed values of one metric for one model.
pub type MetricSamples = Vec<f64>;

/// Summary of one metric across paired baseline/enhanced runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub baseline_mean: f64,
    pub baseline_se: f64,
    pub enhanced_mean: f64,
    pub enhanced_se: f64,
    pub t: f64,
    pub p: f64,
    pub significance: String,
    pub degenerate_variance: bool,
    /// (enhanced − baseline) / baseline, as a fraction.
    pub relative_improvement: f64,
    /// ((1−baseline) − (1−enhanced)) / (1−baseline); `None` when the
    /// baseline mean is exactly 1 (undefined).
    pub error_reduction: Option<f64>,
}

/// Full multi-seed evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seeds: usize,
    pub metrics: Vec<MetricSummary>,
    /// Raw per-seed values, keyed like `metrics` (baseline, enhanced).
    pub per_seed: Vec<(String, MetricSamples, MetricSamples)>,
}

/// Aggregates paired per-seed metric samples into the report: mean ± SE,
/// paired t and two-sided p, significance stars, relative improvement, and
/// error reduction.
pub fn summarize(named: &[(&str, &[f64], &[f64])]) -> Result<EvalReport> {
    if named.is_empty() {
        return Err(Error::Config("summarize needs at least one metric".into()));
    }
    let seeds = named[0].1.len();
    let mut metrics = Vec::with_capacity(named.len());
    let mut per_seed = Vec::with_capacity(named.len());
    for &(name, base, enh) in named {
        if base.len() != seeds || enh.len() != seeds {
            return Err(Error::Config(format!(
                "metric {name}: sample counts differ from {seeds} seeds"
            )));
        }
        for v in base.iter().chain(enh) {
            if !(0.0..=1.0).contains(v) {
                return Err(Error::Config(format!(
                    "metric {name}: value {v} outside [0,1]"
                )));
            }
        }
        let (baseline_mean, baseline_se) = mean_and_se(base)?;
        let (enhanced_mean, enhanced_se) = mean_and_se(enh)?;
        let tt = paired_t_test(enh, base)?;
        let relative_improvement = if baseline_mean == 0.0 {
            0.0
        } else {
            (enhanced_mean - baseline_mean) / baseline_mean
        };
        let error_reduction = if baseline_mean == 1.0 {
            None
        } else {
            Some((enhanced_mean - baseline_mean) / (1.0 - baseline_mean))
        };
        metrics.push(MetricSummary {
            metric: name.to_string(),
            baseline_mean,
            baseline_se,
            enhanced_mean,
            enhanced_se,
            t: tt.t,
            p: tt.p,
            significance: significance_stars(tt.p).to_string(),
            degenerate_variance: tt.degenerate_variance,
            relative_improvement,
            error_reduction,
        });
        per_seed.push((name.to_string(), base.to_vec(), enh.to_vec()));
    }
    Ok(EvalReport { seeds, metrics, per_seed })
}

/// The three headline metrics for one scored edge set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValues {
    pub auc: f64,
    pub f1: f64,
    pub p_at_k: f64,
    /// True when fewer than k edges were available for precision-at-k.
    pub p_at_k_clamped: bool,
}

/// Evaluates AUC, F1 (threshold 0), and precision-at-k on one edge set.
pub fn evaluate_scored(s: &ScoredEdges, k: usize) -> Result<MetricValues> {
    let (p_at_k, clamped) = precision_at_k(s, k)?;
    Ok(MetricValues { auc: auc(s)?, f1: f1(s, 0.0)?, p_at_k, p_at_k_clamped: clamped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scored(scores: &[f64], signs: &[i8]) -> ScoredEdges {
        ScoredEdges::new(scores.to_vec(), signs.to_vec()).unwrap()
    }

    #[test]
    fn auc_perfect_separation() {
        let s = scored(&[0.9, 0.8, 0.7, 0.4], &[1, 1, -1, -1]);
        assert_eq!(auc(&s).unwrap(), 1.0);
    }

    #[test]
    fn auc_tabulated_oracle() {
        // DERIVED: pos {0.8, 0.4}, neg {0.6, 0.2}: wins (0.8>0.6, 0.8>0.2,
        // 0.4>0.2) = 3 of 4 pairs → 0.75.
        let s = scored(&[0.8, 0.4, 0.6, 0.2], &[1, 1, -1, -1]);
        assert_abs_diff_eq!(auc(&s).unwrap(), 0.75, epsilon = 1e-15);
    }

    #[test]
    fn auc_all_ties_is_half() {
        let s = scored(&[0.5, 0.5, 0.5, 0.5], &[1, 1, -1, -1]);
        assert_abs_diff_eq!(auc(&s).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn auc_single_class_is_undefined() {
        let s = scored(&[0.5, 0.2], &[1, 1]);
        let err = auc(&s).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)), "{err}");
    }

    /// Brute-force all-pairs oracle with half-credit ties.
    fn auc_oracle(s: &ScoredEdges) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, (&si, &gi)) in s.scores().iter().zip(s.signs()).enumerate() {
            if gi != 1 {
                continue;
            }
            for (j, (&sj, &gj)) in s.scores().iter().zip(s.signs()).enumerate() {
                if gj != -1 || i == j {
                    continue;
                }
                pairs += 1.0;
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn auc_matches_brute_force_with_ties() {
        // 200 random instances, n ≤ 50, discretized scores to force ties.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.random_range(2..=50);
            let mut scores = Vec::with_capacity(n);
            let mut signs = Vec::with_capacity(n);
            for _ in 0..n {
                scores.push((rng.random_range(-3..=3) as f64) / 2.0);
                signs.push(if rng.random_bool(0.5) { 1 } else { -1 });
            }
            // Guarantee both classes.
            signs[0] = 1;
            if n > 1 {
                signs[1] = -1;
            }
            let s = ScoredEdges::new(scores, signs).unwrap();
            assert_abs_diff_eq!(auc(&s).unwrap(), auc_oracle(&s), epsilon = 1e-12);
        }
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let n = rng.random_range(4..=40);
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut signs: Vec<i8> =
                (0..n).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect();
            signs[0] = 1;
            signs[1] = -1;
            let plain = ScoredEdges::new(scores.clone(), signs.clone()).unwrap();
            let warped =
                ScoredEdges::new(scores.iter().map(|s| s.exp()).collect(), signs).unwrap();
            assert_abs_diff_eq!(
                auc(&plain).unwrap(),
                auc(&warped).unwrap(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn f1_oracles() {
        // Perfect predictions.
        let s = scored(&[2.0, 1.0, -1.0, -2.0], &[1, 1, -1, -1]);
        assert_eq!(f1(&s, 0.0).unwrap(), 1.0);
        // DERIVED: TP=2, FP=1, FN=1 → P = R = 2/3 → F1 = 2/3.
        let s = scored(&[1.0, 1.0, 1.0, -1.0], &[1, 1, -1, 1]);
        assert_abs_diff_eq!(f1(&s, 0.0).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        // Nothing predicted positive → precision defined as 0 → F1 = 0.
        let s = scored(&[-1.0, -2.0], &[1, -1]);
        assert_eq!(f1(&s, 0.0).unwrap(), 0.0);
        // No actual positives → undefined.
        let s = scored(&[1.0, -1.0], &[-1, -1]);
        assert!(f1(&s, 0.0).is_err());
        // Threshold is strict: score exactly at threshold predicts negative.
        let s = scored(&[0.0, 1.0], &[1, -1]);
        let v = f1(&s, 0.0).unwrap();
        assert_eq!(v, 0.0); // TP=0 FP=1 FN=1 → P=0
    }

    #[test]
    fn precision_at_k_oracles() {
        // DERIVED: descending scores, signs (+,+,−,+), k=3 → 2/3.
        let s = scored(&[4.0, 3.0, 2.0, 1.0], &[1, 1, -1, 1]);
        let (p, clamped) = precision_at_k(&s, 3).unwrap();
        assert_abs_diff_eq!(p, 2.0 / 3.0, epsilon = 1e-15);
        assert!(!clamped);
        // k larger than the set: denominator clamps to the set size.
        let (p, clamped) = precision_at_k(&s, 100).unwrap();
        assert_abs_diff_eq!(p, 3.0 / 4.0, epsilon = 1e-15);
        assert!(clamped);
        // All-positive top slice.
        let (p, _) = precision_at_k(&s, 2).unwrap();
        assert_eq!(p, 1.0);
        assert!(precision_at_k(&s, 0).is_err());
    }

    #[test]
    fn precision_at_k_tie_break_is_input_order() {
        // Equal scores: stable order keeps index 0 before 1 before 2.
        let s = scored(&[1.0, 1.0, 1.0], &[1, -1, 1]);
        let (p, _) = precision_at_k(&s, 2).unwrap();
        assert_abs_diff_eq!(p, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn precision_at_k_invariant_under_positive_rescale() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let n = rng.random_range(3..=30);
            let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let signs: Vec<i8> =
                (0..n).map(|_| if rng.random_bool(0.6) { 1 } else { -1 }).collect();
            let a = ScoredEdges::new(scores.clone(), signs.clone()).unwrap();
            let b =
                ScoredEdges::new(scores.iter().map(|s| 3.5 * s).collect(), signs).unwrap();
            let k = rng.random_range(1..=n);
            assert_eq!(precision_at_k(&a, k).unwrap(), precision_at_k(&b, k).unwrap());
        }
    }

    #[test]
    fn ln_gamma_oracle() {
        // Γ(1)=Γ(2)=1, Γ(5)=24, Γ(1/2)=√π.
        assert_abs_diff_eq!(ln_gamma(1.0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ln_gamma(2.0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ln_gamma(5.0), 24.0_f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(
            ln_gamma(0.5),
            std::f64::consts::PI.sqrt().ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, b) = 1 − (1−x)^b; I_x(a, 1) = x^a.
        for &(a, b, x) in
            &[(1.0, 0.5, 1.0 / 7.0), (1.0, 2.0, 0.3), (2.0, 1.0, 0.6), (1.0, 1.0, 0.42)]
        {
            let got = incomplete_beta(a, b, x).unwrap();
            let want = if a == 1.0 {
                1.0 - (1.0 - x).powf(b)
            } else {
                x.powf(a) // b == 1 case
            };
            assert_abs_diff_eq!(got, want, epsilon = 1e-13);
        }
        assert_eq!(incomplete_beta(2.0, 3.0, 0.0).unwrap(), 0.0);
        assert_eq!(incomplete_beta(2.0, 3.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn t_test_tabulated_oracle() {
        // DERIVED: d = (1,2,3) → t = 2/(1/√3) ≈ 3.4641, df 2, p ≈ 0.0742.
        let tt = paired_t_test(&[2.0, 4.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_abs_diff_eq!(tt.t, 2.0 * 3.0_f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(tt.p, 0.0742, epsilon = 1e-3);
        // Exact closed form at df=2: p = 1 − √(t²/(2+t²)).
        let exact = 1.0 - (tt.t * tt.t / (2.0 + tt.t * tt.t)).sqrt();
        assert_abs_diff_eq!(tt.p, exact, epsilon = 1e-12);
        assert!(!tt.degenerate_variance);
    }

    #[test]
    fn t_test_identical_samples() {
        let tt = paired_t_test(&[0.5, 0.6, 0.7], &[0.5, 0.6, 0.7]).unwrap();
        assert_eq!(tt.t, 0.0);
        assert_eq!(tt.p, 1.0);
    }

    #[test]
    fn t_test_degenerate_variance() {
        // d = (1,1,1): zero variance, nonzero mean.
        let tt = paired_t_test(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!(tt.degenerate_variance);
        assert_eq!(tt.p, 0.0);
        assert_eq!(tt.t, f64::INFINITY);
    }

    #[test]
    fn t_test_antisymmetry() {
        let a = [0.91, 0.87, 0.95, 0.88];
        let b = [0.85, 0.86, 0.90, 0.83];
        let ab = paired_t_test(&a, &b).unwrap();
        let ba = paired_t_test(&b, &a).unwrap();
        assert_eq!(ab.t, -ba.t);
        assert_eq!(ab.p, ba.p);
    }

    #[test]
    fn t_test_input_validation() {
        assert!(paired_t_test(&[1.0], &[2.0]).is_err());
        assert!(paired_t_test(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn mean_and_se_oracle() {
        // DERIVED: values (1,2,3) → mean 2, SE = 1/√3 ≈ 0.5774.
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0]).unwrap();
        assert_abs_diff_eq!(m, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(se, 0.5774, epsilon = 1e-4);
    }

    #[test]
    fn summarize_improvement_oracle() {
        // Published-mean check: baseline 0.8890 → enhanced 0.9226 gives
        // ≈3.78% relative improvement and ≈30.27% error reduction.
        let base = [0.8890, 0.8890];
        let enh = [0.9226, 0.9226];
        let report = summarize(&[("auc", &base[..], &enh[..])]).unwrap();
        let m = &report.metrics[0];
        assert_abs_diff_eq!(m.relative_improvement * 100.0, 3.78, epsilon = 0.005);
        assert_abs_diff_eq!(m.error_reduction.unwrap() * 100.0, 30.27, epsilon = 0.005);
        assert!(m.degenerate_variance); // constant nonzero differences
        assert_eq!(m.significance, "***");
    }

    #[test]
    fn summarize_identity_and_error_reduction_relation() {
        let base = [0.80, 0.84, 0.82];
        let enh = [0.88, 0.90, 0.86];
        let report = summarize(&[("auc", &base[..], &enh[..])]).unwrap();
        let m = &report.metrics[0];
        // err_red = rel_imp · m_base/(1−m_base), exactly.
        let expect = m.relative_improvement * m.baseline_mean / (1.0 - m.baseline_mean);
        assert_abs_diff_eq!(m.error_reduction.unwrap(), expect, epsilon = 1e-15);
        assert_eq!(report.seeds, 3);
    }

    #[test]
    fn summarize_equal_models_and_perfect_baseline() {
        let same = [0.9, 0.8];
        let report = summarize(&[("f1", &same[..], &same[..])]).unwrap();
        let m = &report.metrics[0];
        assert_eq!(m.relative_improvement, 0.0);
        assert_eq!(m.error_reduction, Some(0.0));
        assert_eq!(m.p, 1.0);
        assert_eq!(m.significance, "n.s.");

        let ones = [1.0, 1.0];
        let report = summarize(&[("auc", &ones[..], &ones[..])]).unwrap();
        assert_eq!(report.metrics[0].error_reduction, None);
    }

    #[test]
    fn significance_star_convention() {
        assert_eq!(significance_stars(0.0005), "***");
        assert_eq!(significance_stars(0.01), "*");
        assert_eq!(significance_stars(0.2), "n.s.");
    }

    #[test]
    fn evaluate_scored_bundles_metrics() {
        let s = scored(&[2.0, 1.0, -1.0, -2.0], &[1, 1, -1, -1]);
        let m = evaluate_scored(&s, 100).unwrap();
        assert_eq!(m.auc, 1.0);
        assert_eq!(m.f1, 1.0);
        assert_eq!(m.p_at_k, 0.5); // top 4 of 4: two positives
        assert!(m.p_at_k_clamped);
    }
}
