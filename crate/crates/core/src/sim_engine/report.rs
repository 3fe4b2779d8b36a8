//! CSV and JSON output for experiment results.
//!
//! Metrics CSV columns: `label, pair_count, strategy, fraction,
//! messages_sent, delivered, delivery_rate, mean_delay_days, dup_mean,
//! copies_mean, uploads`. Numbers are written with fixed precision so reruns
//! produce identical bytes.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{EntropyReport, SimMetrics};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub label: String,
    pub pair_count: usize,
    pub strategy: String,
    pub fraction: f64,
    pub messages_sent: usize,
    pub delivered: usize,
    pub delivery_rate: f64,
    pub mean_delay_days: Option<f64>,
    pub dup_mean: Option<f64>,
    pub copies_mean: Option<f64>,
    pub uploads: u64,
}

impl MetricsRow {
    pub fn new(label: impl Into<String>, pair_count: usize, m: &SimMetrics) -> Self {
        Self {
            label: label.into(),
            pair_count,
            strategy: "none".into(),
            fraction: 0.0,
            messages_sent: m.messages_sent,
            delivered: m.delivered,
            delivery_rate: m.delivery_rate,
            mean_delay_days: m.mean_delay_days,
            dup_mean: m.duplicates_per_delivered,
            copies_mean: m.copies_per_delivered,
            uploads: m.uploads,
        }
    }

    pub fn with_removal(mut self, strategy: &str, fraction: f64) -> Self {
        self.strategy = strategy.into();
        self.fraction = fraction;
        self
    }
}

fn num(x: f64) -> String {
    format!("{x:.6}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "label",
        "pair_count",
        "strategy",
        "fraction",
        "messages_sent",
        "delivered",
        "delivery_rate",
        "mean_delay_days",
        "dup_mean",
        "copies_mean",
        "uploads",
    ])?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            r.pair_count.to_string(),
            r.strategy.clone(),
            format!("{:.2}", r.fraction),
            r.messages_sent.to_string(),
            r.delivered.to_string(),
            num(r.delivery_rate),
            opt(r.mean_delay_days),
            opt(r.dup_mean),
            opt(r.copies_mean),
            r.uploads.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: `pair, sender, receiver, delivered, entropy`.
pub fn write_entropy_csv<W: Write>(report: &EntropyReport, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["pair", "sender", "receiver", "delivered", "entropy"])?;
    for p in &report.pairs {
        w.write_record([
            p.pair.to_string(),
            p.sender.to_string(),
            p.receiver.to_string(),
            p.delivered.to_string(),
            num(p.entropy),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One JSON object per message record.
pub fn write_traces_jsonl<W: Write>(metrics: &SimMetrics, mut sink: W) -> Result<()> {
    for m in &metrics.messages {
        serde_json::to_writer(&mut sink, m).map_err(std::io::Error::from)?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads records written by [`write_traces_jsonl`].
pub fn read_traces_jsonl<R: std::io::BufRead>(source: R) -> Result<Vec<super::MessageRecord>> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| crate::Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
