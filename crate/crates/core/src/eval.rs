//! Detection (ROC/AUC) and explanation (subnetwork recovery) metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::ReportView;
use crate::synth::GroundTruth;

pub const ROC_FILE: &str = "roc.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const DEFAULT_TOP_K: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Roc {
    /// `(fpr, tpr)` points from `(0, 0)` to `(1, 1)`, one per distinct score.
    pub curve: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Threshold sweep over descending scores. Tied scores move the curve
/// diagonally, which makes the trapezoid area equal to the Mann-Whitney
/// statistic with half credit for ties.
pub fn roc_auc(scores: &BTreeMap<String, f64>, labels: &BTreeMap<String, u8>) -> Result<Roc> {
    let mut pairs = Vec::with_capacity(scores.len());
    for (id, &s) in scores {
        let &l = labels
            .get(id)
            .ok_or_else(|| Error::Evaluation(format!("no label for sample '{id}'")))?;
        if !s.is_finite() {
            return Err(Error::Evaluation(format!("score of '{id}' is not finite")));
        }
        pairs.push((s, l == 1));
    }
    let pos = pairs.iter().filter(|p| p.1).count();
    let neg = pairs.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Evaluation(
            "ROC needs both outlier and inlier labels among the scored samples".into(),
        ));
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut curve = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let (prev_tp, prev_fp) = (tp, fp);
        let mut j = i;
        while j < pairs.len() && pairs[j].0 == pairs[i].0 {
            if pairs[j].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        auc += (fp - prev_fp) as f64 * (tp + prev_tp) as f64 / 2.0;
        curve.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
        i = j;
    }
    Ok(Roc {
        curve,
        auc: auc / (pos as f64 * neg as f64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn subnetwork_recovery(found: &BTreeSet<usize>, truth: &BTreeSet<usize>) -> Result<Recovery> {
    if truth.is_empty() {
        return Err(Error::Evaluation("ground-truth node set is empty".into()));
    }
    let hit = found.intersection(truth).count() as f64;
    let precision = if found.is_empty() { 0.0 } else { hit / found.len() as f64 };
    let recall = hit / truth.len() as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Recovery {
        precision,
        recall,
        f1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierRecovery {
    /// 1-based position in the ranking.
    pub rank: usize,
    /// All selected nodes against the planted set.
    pub selected: Recovery,
    /// The dominant explanatory subnetwork (largest total absolute weight)
    /// against the planted set.
    pub dominant: Recovery,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auc: f64,
    pub n_samples: usize,
    pub n_outliers: usize,
    pub top_k: usize,
    /// True outliers among the `top_k` highest ranked samples.
    pub outliers_in_top_k: usize,
    /// Mean dominant-subnetwork F1 over the true outliers in the top `top_k`;
    /// 0 when none.
    pub top_k_subnetwork_f1: f64,
    /// Same mean for the F1 of all selected nodes.
    pub top_k_selected_f1: f64,
    pub recovery: BTreeMap<String, OutlierRecovery>,
}

pub fn evaluate_report(report: &ReportView, truth: &GroundTruth, top_k: usize) -> Result<(Roc, Metrics)> {
    let scores: BTreeMap<String, f64> = report
        .samples
        .iter()
        .map(|(id, s)| (id.clone(), s.score))
        .collect();
    let roc = roc_auc(&scores, &truth.labels)?;
    let rank: BTreeMap<&str, usize> = report
        .ranking
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i + 1))
        .collect();

    let mut recovery = BTreeMap::new();
    for (id, planted) in &truth.planted {
        let sample = report
            .samples
            .get(id)
            .ok_or_else(|| Error::Evaluation(format!("report has no sample '{id}'")))?;
        let truth_set: BTreeSet<usize> = planted.iter().copied().collect();
        let selected = subnetwork_recovery(&sample.nodes.iter().copied().collect(), &truth_set)?;
        let dominant = subnetwork_recovery(
            &sample.dominant_subnetwork().unwrap_or(&[]).iter().copied().collect(),
            &truth_set,
        )?;
        let &rank = rank
            .get(id.as_str())
            .ok_or_else(|| Error::Evaluation(format!("sample '{id}' missing from the ranking")))?;
        recovery.insert(id.clone(), OutlierRecovery { rank, selected, dominant });
    }
    let top: Vec<&OutlierRecovery> = recovery.values().filter(|r| r.rank <= top_k).collect();
    let mean = |f: fn(&OutlierRecovery) -> f64| {
        if top.is_empty() {
            0.0
        } else {
            top.iter().map(|r| f(r)).sum::<f64>() / top.len() as f64
        }
    };
    let metrics = Metrics {
        auc: roc.auc,
        n_samples: scores.len(),
        n_outliers: truth.outliers().count(),
        top_k,
        outliers_in_top_k: top.len(),
        top_k_subnetwork_f1: mean(|r| r.dominant.f1),
        top_k_selected_f1: mean(|r| r.selected.f1),
        recovery,
    };
    Ok((roc, metrics))
}

pub fn write_roc_csv(roc: &Roc, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("fpr,tpr\n");
    for (fpr, tpr) in &roc.curve {
        out.push_str(&format!("{fpr},{tpr}\n"));
    }
    fs::File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

pub fn write_metrics(metrics: &Metrics, path: impl AsRef<Path>) -> Result<()> {
    // through Value so that keys come out sorted
    let value = serde_json::to_value(metrics).map_err(|e| Error::Internal(e.to_string()))?;
    let text = serde_json::to_string_pretty(&value).map_err(|e| Error::Internal(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}
