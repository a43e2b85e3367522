//! JSON rendering of detection results and the reader used by evaluation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::scoring::{OutlierReport, SampleRecord};

fn sample_json(r: &SampleRecord) -> Value {
    let weights: Map<String, Value> = r
        .explanation
        .weights
        .iter()
        .map(|(node, w)| (node.to_string(), json!(w)))
        .collect();
    let failures: Vec<Value> = r
        .failures()
        .map(|c| json!({"k": c.k, "lambda1": c.lambda1, "message": c.failure}))
        .collect();
    json!({
        "score": r.score,
        "config": {"k": r.winning.k, "lambda1": r.winning.lambda1},
        "nodes": r.explanation.selected_nodes,
        "subnetworks": r.explanation.subnetworks,
        "weights": weights,
        "full_space_fallback": r.full_space_fallback,
        "failures": failures,
    })
}

fn traces_json(r: &SampleRecord) -> Value {
    Value::Array(
        r.per_config
            .iter()
            .map(|c| {
                json!({
                    "k": c.k,
                    "lambda1": c.lambda1,
                    "score": c.score,
                    "trace": c.trace,
                })
            })
            .collect(),
    )
}

/// The resolved run configuration: grid, `lambda2`, seed, and solver settings.
pub fn config_json(report: &OutlierReport) -> Value {
    json!({
        "k_list": report.grid.k_list,
        "lambda1_list": report.grid.lambda1_list,
        "lambda2": report.lambda2,
        "seed": report.seed,
        "solver": report.solver,
    })
}

/// Full report document. `provenance` entries are merged into `"config"`.
pub fn report_json(report: &OutlierReport, provenance: Map<String, Value>, with_traces: bool) -> Value {
    let mut config = config_json(report);
    if let Value::Object(c) = &mut config {
        c.extend(provenance);
    }
    let samples: Map<String, Value> = report
        .records
        .iter()
        .map(|(id, r)| (id.clone(), sample_json(r)))
        .collect();
    let mut doc = json!({
        "config": config,
        "ranking": report.ranking,
        "samples": samples,
    });
    if with_traces {
        let traces: Map<String, Value> = report
            .records
            .iter()
            .map(|(id, r)| (id.clone(), traces_json(r)))
            .collect();
        doc["traces"] = Value::Object(traces);
    }
    doc
}

/// Serializes with sorted keys and a trailing newline.
pub fn to_stable_string(value: &Value) -> String {
    serde_json::to_string_pretty(value).expect("JSON values always serialize") + "\n"
}

/// Single-sample explanation document for `explain`.
pub fn explanation_json(record: &SampleRecord, node_ids: &[String], with_traces: bool) -> Value {
    let mut doc = sample_json(record);
    doc["sample_id"] = json!(record.sample_id);
    doc["node_ids"] = json!(record
        .explanation
        .selected_nodes
        .iter()
        .map(|&i| node_ids[i].as_str())
        .collect::<Vec<_>>());
    if with_traces {
        doc["traces"] = traces_json(record);
    }
    doc
}

pub fn explanation_text(record: &SampleRecord, node_ids: &[String]) -> String {
    let name = |i: usize| format!("{} ({i})", node_ids[i]);
    let mut out = String::new();
    let _ = writeln!(out, "sample {}", record.sample_id);
    let _ = writeln!(out, "  score: {}", record.score);
    let _ = writeln!(
        out,
        "  winning config: K = {}, lambda1 = {}",
        record.winning.k, record.winning.lambda1
    );
    if record.full_space_fallback {
        let _ = writeln!(out, "  no nodes selected; score uses all coordinates");
    }
    for (i, sub) in record.explanation.subnetworks.iter().enumerate() {
        let nodes: Vec<String> = sub.iter().map(|&n| name(n)).collect();
        let _ = writeln!(out, "  subnetwork {}: {}", i + 1, nodes.join(", "));
    }
    if !record.explanation.weights.is_empty() {
        let _ = writeln!(out, "  weights:");
        for (&node, w) in &record.explanation.weights {
            let _ = writeln!(out, "    {}: {w}", name(node));
        }
    }
    let failures = record.failures().count();
    if failures > 0 {
        let _ = writeln!(out, "  solver failures: {failures} configuration(s) used the full-space fallback");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SampleView {
    pub score: f64,
    #[serde(default)]
    pub nodes: Vec<usize>,
    #[serde(default)]
    pub subnetworks: Vec<Vec<usize>>,
    /// Node index (as a string key) to coefficient.
    #[serde(default)]
    pub weights: BTreeMap<String, f64>,
}

impl SampleView {
    /// Subnetwork carrying the largest total absolute weight; the earliest
    /// one wins ties.
    pub fn dominant_subnetwork(&self) -> Option<&[usize]> {
        let mass = |s: &Vec<usize>| -> f64 {
            s.iter()
                .map(|n| self.weights.get(&n.to_string()).copied().unwrap_or(0.0).abs())
                .sum()
        };
        let mut best: Option<(&Vec<usize>, f64)> = None;
        for s in &self.subnetworks {
            let m = mass(s);
            if best.map_or(true, |(_, b)| m > b) {
                best = Some((s, m));
            }
        }
        best.map(|(s, _)| s.as_slice())
    }
}

/// The parts of a report document that evaluation needs.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ReportView {
    pub ranking: Vec<String>,
    pub samples: BTreeMap<String, SampleView>,
}

impl ReportView {
    pub fn from_report(report: &OutlierReport) -> Self {
        Self {
            ranking: report.ranking.clone(),
            samples: report
                .records
                .iter()
                .map(|(id, r)| {
                    (
                        id.clone(),
                        SampleView {
                            score: r.score,
                            nodes: r.explanation.selected_nodes.clone(),
                            subnetworks: r.explanation.subnetworks.clone(),
                            weights: r
                                .explanation
                                .weights
                                .iter()
                                .map(|(n, w)| (n.to_string(), *w))
                                .collect(),
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }
}
