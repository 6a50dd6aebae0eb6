//! Report emission: evaluation results as CSV (per-seed paired rows plus one
//! summary row per metric), JSON, and a human-readable comparison table.
//!
//! The CSV uses 17-significant-digit decimal floats so that parsing the file
//! back reproduces the original [`EvalReport`] bit for bit.

use crate::eval::{EvalReport, MetricSummary};
use crate::io::{format_f64, parse_f64};
use crate::{Error, Result};

const CSV_HEADER: &str = "row,dataset,metric,seed,baseline,enhanced,baseline_se,enhanced_se,\
                          t,p,significance,degenerate_variance,relative_improvement,error_reduction";

/// Renders a report as CSV: one `seed` row per seed×metric holding the
/// paired (baseline, enhanced) values, then one `summary` row per metric.
pub fn report_to_csv(dataset: &str, r: &EvalReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (metric, base, enh) in &r.per_seed {
        for (seed, (b, e)) in base.iter().zip(enh).enumerate() {
            out.push_str(&format!(
                "seed,{dataset},{metric},{seed},{},{},,,,,,,,\n",
                format_f64(*b),
                format_f64(*e)
            ));
        }
    }
    for m in &r.metrics {
        out.push_str(&format!(
            "summary,{dataset},{},,{},{},{},{},{},{},{},{},{},{}\n",
            m.metric,
            format_f64(m.baseline_mean),
            format_f64(m.enhanced_mean),
            format_f64(m.baseline_se),
            format_f64(m.enhanced_se),
            format_f64(m.t),
            format_f64(m.p),
            m.significance,
            m.degenerate_variance,
            format_f64(m.relative_improvement),
            m.error_reduction.map(format_f64).unwrap_or_default(),
        ));
    }
    out
}

/// Parses a CSV produced by [`report_to_csv`] back into the dataset name and
/// the exact report values.
pub fn report_from_csv(text: &str) -> Result<(String, EvalReport)> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::Data(format!("unexpected report CSV header: {other:?}")));
        }
    }
    let mut dataset: Option<String> = None;
    let mut per_seed: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    let mut metrics: Vec<MetricSummary> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 14 {
            return Err(Error::Data(format!(
                "report CSV line {}: expected 14 columns, got {}",
                lineno + 2,
                cols.len()
            )));
        }
        match dataset.as_deref() {
            None => dataset = Some(cols[1].to_string()),
            Some(d) if d == cols[1] => {}
            Some(d) => {
                return Err(Error::Data(format!(
                    "report CSV mixes datasets {d:?} and {:?}",
                    cols[1]
                )));
            }
        }
        let metric = cols[2].to_string();
        match cols[0] {
            "seed" => {
                let (b, e) = (parse_f64(cols[4])?, parse_f64(cols[5])?);
                match per_seed.iter_mut().find(|(m, _, _)| *m == metric) {
                    Some((_, bs, es)) => {
                        bs.push(b);
                        es.push(e);
                    }
                    None => per_seed.push((metric, vec![b], vec![e])),
                }
            }
            "summary" => metrics.push(MetricSummary {
                metric,
                baseline_mean: parse_f64(cols[4])?,
                enhanced_mean: parse_f64(cols[5])?,
                baseline_se: parse_f64(cols[6])?,
                enhanced_se: parse_f64(cols[7])?,
                t: parse_f64(cols[8])?,
                p: parse_f64(cols[9])?,
                significance: cols[10].to_string(),
                degenerate_variance: match cols[11] {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(Error::Data(format!("bad boolean {other:?} in report CSV")))
                    }
                },
                relative_improvement: parse_f64(cols[12])?,
                error_reduction: if cols[13].is_empty() {
                    None
                } else {
                    Some(parse_f64(cols[13])?)
                },
            }),
            other => {
                return Err(Error::Data(format!("unknown report CSV row type {other:?}")));
            }
        }
    }
    if metrics.is_empty() {
        return Err(Error::Data("report CSV holds no summary rows".into()));
    }
    let seeds = per_seed.first().map(|(_, b, _)| b.len()).unwrap_or(0);
    if per_seed.len() != metrics.len()
        || per_seed
            .iter()
            .zip(&metrics)
            .any(|((m, b, e), s)| *m != s.metric || b.len() != seeds || e.len() != seeds)
    {
        return Err(Error::Data("report CSV seed rows do not match summary rows".into()));
    }
    let dataset = dataset.ok_or_else(|| Error::Data("empty report CSV".into()))?;
    Ok((dataset, EvalReport { seeds, metrics, per_seed }))
}

/// Full report as pretty JSON.
pub fn report_to_json(dataset: &str, r: &EvalReport) -> Result<String> {
    #[derive(serde::Serialize)]
    struct Wrapper<'a> {
        dataset: &'a str,
        #[serde(flatten)]
        report: &'a EvalReport,
    }
    Ok(serde_json::to_string_pretty(&Wrapper { dataset, report: r })?)
}

/// Human-readable comparison table: one line per metric with mean ± SE for
/// both models, the improvement percentages, and significance stars.
pub fn render_table(dataset: &str, r: &EvalReport) -> String {
    let mut out = format!(
        "{dataset} ({} seeds)\n{:<8} {:>19} {:>19} {:>9} {:>9} {:>12} {:>6}\n",
        r.seeds, "metric", "baseline", "enhanced", "rel imp", "err red", "p", "sig"
    );
    for m in &r.metrics {
        let err = m
            .error_reduction
            .map(|e| format!("{:+.2}%", 100.0 * e))
            .unwrap_or_else(|| "n/a".into());
        out.push_str(&format!(
            "{:<8} {:>9.4} ± {:<7.4} {:>9.4} ± {:<7.4} {:>8.2}% {:>9} {:>12.3e} {:>6}\n",
            m.metric,
            m.baseline_mean,
            m.baseline_se,
            m.enhanced_mean,
            m.enhanced_se,
            100.0 * m.relative_improvement,
            err,
            m.p,
            m.significance,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::summarize;

    fn sample_report() -> EvalReport {
        let b_auc = [0.871_234_567_890_123_4, 0.899_999_999_999_991, 0.9, 1.0 / 3.0];
        let e_auc = [0.912_345_678_901_234_5, 0.934_567_890_123_456_7, 0.95, 0.5];
        let b_f1 = [0.5, 0.6, 0.55, 0.61];
        let e_f1 = [0.7, 0.71, 0.69, 0.72];
        summarize(&[("auc", &b_auc[..], &e_auc[..]), ("f1", &b_f1[..], &e_f1[..])]).unwrap()
    }

    #[test]
    fn csv_round_trips_bit_exactly() {
        let r = sample_report();
        let csv = report_to_csv("ws", &r);
        let (dataset, back) = report_from_csv(&csv).unwrap();
        assert_eq!(dataset, "ws");
        assert_eq!(back, r);
    }

    #[test]
    fn csv_round_trips_degenerate_and_undefined_fields() {
        // Zero-variance differences give t = ±inf; perfect baseline gives
        // error_reduction = None. Both must survive the text round trip.
        let b = [0.5, 0.5, 0.5];
        let e = [0.7, 0.7, 0.7];
        let ones = [1.0, 1.0, 1.0];
        let r = summarize(&[("auc", &b[..], &e[..]), ("f1", &ones[..], &ones[..])]).unwrap();
        assert!(r.metrics[0].t.is_infinite());
        assert!(r.metrics[1].error_reduction.is_none());
        let (_, back) = report_from_csv(&report_to_csv("ba", &r)).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn csv_row_accounting() {
        let r = sample_report();
        let csv = report_to_csv("ws", &r);
        let lines: Vec<&str> = csv.lines().collect();
        let seed_rows = lines.iter().filter(|l| l.starts_with("seed,")).count();
        let summary_rows = lines.iter().filter(|l| l.starts_with("summary,")).count();
        assert_eq!(seed_rows, 4 * 2, "one paired row per seed per metric");
        assert_eq!(summary_rows, 2, "one summary row per metric");
        assert_eq!(lines.len(), 1 + seed_rows + summary_rows);
    }

    #[test]
    fn csv_rendering_is_deterministic() {
        let r = sample_report();
        assert_eq!(report_to_csv("ws", &r), report_to_csv("ws", &r));
    }

    #[test]
    fn malformed_csv_is_rejected() {
        assert!(report_from_csv("nonsense\n").is_err());
        let missing_summary = format!("{CSV_HEADER}\nseed,ws,auc,0,{},{},,,,,,,,\n", 0.5, 0.6);
        assert!(report_from_csv(&missing_summary).is_err());
        let bad_row = format!("{CSV_HEADER}\nweird,ws,auc,0,0.5,0.6,,,,,,,,\n");
        assert!(report_from_csv(&bad_row).is_err());
    }

    #[test]
    fn json_contains_full_report() {
        let r = sample_report();
        let json = report_to_json("ws", &r).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["dataset"], "ws");
        assert_eq!(v["seeds"], 4);
        assert_eq!(v["metrics"].as_array().unwrap().len(), 2);
        assert_eq!(v["metrics"][0]["metric"], "auc");
        assert!(v["metrics"][0]["significance"].is_string());
    }

    #[test]
    fn table_mirrors_summary_layout() {
        let r = sample_report();
        let table = render_table("ws", &r);
        assert!(table.contains("ws (4 seeds)"));
        assert!(table.contains('±'));
        for m in &r.metrics {
            assert!(table.contains(&m.metric));
            assert!(table.contains(&m.significance));
        }
    }
}
