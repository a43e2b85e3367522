//! Network database data model.
//!
//! All samples share one node universe, so a sample is a value vector indexed
//! by node position plus an optional per-sample edge set that replaces the
//! shared topology for that sample.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected edge stored as `(min, max)`.
pub type Edge = (usize, usize);

/// Normalizes an undirected node pair.
pub fn edge(i: usize, j: usize) -> Edge {
    if i <= j {
        (i, j)
    } else {
        (j, i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Inlier,
    Outlier,
}

impl Label {
    pub fn from_flag(flag: u8) -> Option<Self> {
        match flag {
            0 => Some(Label::Inlier),
            1 => Some(Label::Outlier),
            _ => None,
        }
    }

    pub fn flag(self) -> u8 {
        match self {
            Label::Inlier => 0,
            Label::Outlier => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSample {
    pub sample_id: String,
    /// Node values; masked cells hold NaN until [`NetworkDatabase::impute_missing`].
    pub values: Vec<f64>,
    pub edge_override: Option<BTreeSet<Edge>>,
    pub missing_mask: Vec<bool>,
}

impl NetworkSample {
    /// A fully observed sample using the shared topology.
    pub fn new(sample_id: impl Into<String>, values: Vec<f64>) -> Self {
        let n = values.len();
        Self {
            sample_id: sample_id.into(),
            values,
            edge_override: None,
            missing_mask: vec![false; n],
        }
    }

    pub fn with_edges(mut self, edges: impl IntoIterator<Item = Edge>) -> Self {
        self.edge_override = Some(edges.into_iter().map(|(i, j)| edge(i, j)).collect());
        self
    }

    pub fn has_missing(&self) -> bool {
        self.missing_mask.iter().any(|&m| m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkDatabase {
    node_ids: Vec<String>,
    shared_edges: BTreeSet<Edge>,
    samples: Vec<NetworkSample>,
    labels: Option<BTreeMap<String, Label>>,
}

impl NetworkDatabase {
    /// Builds a database and checks every structural invariant.
    pub fn new(
        node_ids: Vec<String>,
        shared_edges: impl IntoIterator<Item = Edge>,
        samples: Vec<NetworkSample>,
        labels: Option<BTreeMap<String, Label>>,
    ) -> Result<Self> {
        let n = node_ids.len();
        let mut seen = HashSet::with_capacity(n);
        for id in &node_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Validation(format!("duplicate node id `{id}`")));
            }
        }
        let shared_edges = normalize_edges(shared_edges, n, "shared topology")?;

        if samples.len() < 2 {
            return Err(Error::Validation(format!(
                "a database needs at least 2 samples, found {}",
                samples.len()
            )));
        }
        let mut sample_ids = HashSet::with_capacity(samples.len());
        let mut checked = Vec::with_capacity(samples.len());
        for mut sample in samples {
            if !sample_ids.insert(sample.sample_id.clone()) {
                return Err(Error::Validation(format!(
                    "duplicate sample id `{}`",
                    sample.sample_id
                )));
            }
            if sample.values.len() != n {
                return Err(Error::Validation(format!(
                    "sample `{}` has {} values, expected {n}",
                    sample.sample_id,
                    sample.values.len()
                )));
            }
            if sample.missing_mask.len() != n {
                return Err(Error::Validation(format!(
                    "sample `{}` has a missing mask of length {}, expected {n}",
                    sample.sample_id,
                    sample.missing_mask.len()
                )));
            }
            for (i, (&v, &masked)) in sample.values.iter().zip(&sample.missing_mask).enumerate() {
                if !masked && !v.is_finite() {
                    return Err(Error::Validation(format!(
                        "sample `{}` has non-finite value at node {i}",
                        sample.sample_id
                    )));
                }
            }
            if let Some(over) = sample.edge_override.take() {
                let context = format!("edges of sample `{}`", sample.sample_id);
                sample.edge_override = Some(normalize_edges(over, n, &context)?);
            }
            checked.push(sample);
        }

        if let Some(labels) = &labels {
            if let Some(unknown) = labels.keys().find(|id| !sample_ids.contains(*id)) {
                return Err(Error::Validation(format!(
                    "label for unknown sample `{unknown}`"
                )));
            }
        }

        Ok(Self {
            node_ids,
            shared_edges,
            samples: checked,
            labels,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn shared_edges(&self) -> &BTreeSet<Edge> {
        &self.shared_edges
    }

    pub fn samples(&self) -> &[NetworkSample] {
        &self.samples
    }

    pub fn labels(&self) -> Option<&BTreeMap<String, Label>> {
        self.labels.as_ref()
    }

    pub fn sample_ids(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().map(|s| s.sample_id.as_str())
    }

    pub fn index_of(&self, sample_id: &str) -> Result<usize> {
        self.samples
            .iter()
            .position(|s| s.sample_id == sample_id)
            .ok_or_else(|| Error::UnknownSample(sample_id.to_owned()))
    }

    pub fn sample(&self, sample_id: &str) -> Result<&NetworkSample> {
        self.index_of(sample_id).map(|i| &self.samples[i])
    }

    /// The edge set in force for one sample: its override, else the shared edges.
    pub fn effective_edges(&self, sample_id: &str) -> Result<&BTreeSet<Edge>> {
        let sample = self.sample(sample_id)?;
        Ok(sample.edge_override.as_ref().unwrap_or(&self.shared_edges))
    }

    /// Replaces every masked cell with the mean of that node's observed values,
    /// or 0 when the node is never observed. Masks are kept for reporting.
    pub fn impute_missing(mut self) -> Self {
        if !self.samples.iter().any(NetworkSample::has_missing) {
            return self;
        }
        let n = self.n_nodes();
        let mut sums = vec![0.0; n];
        let mut counts = vec![0usize; n];
        for sample in &self.samples {
            for i in 0..n {
                if !sample.missing_mask[i] {
                    sums[i] += sample.values[i];
                    counts[i] += 1;
                }
            }
        }
        let means: Vec<f64> = sums
            .iter()
            .zip(&counts)
            .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
            .collect();
        for sample in &mut self.samples {
            for i in 0..n {
                if sample.missing_mask[i] {
                    sample.values[i] = means[i];
                }
            }
        }
        self
    }

    /// True once no value is undefined.
    pub fn is_complete(&self) -> bool {
        self.samples
            .iter()
            .all(|s| s.values.iter().all(|v| v.is_finite()))
    }
}

fn normalize_edges(
    edges: impl IntoIterator<Item = Edge>,
    n: usize,
    context: &str,
) -> Result<BTreeSet<Edge>> {
    let mut out = BTreeSet::new();
    for (i, j) in edges {
        if i >= n || j >= n {
            return Err(Error::Validation(format!(
                "{context}: edge ({i}, {j}) references a node outside 0..{n}"
            )));
        }
        if i == j {
            return Err(Error::Validation(format!(
                "{context}: self-loop on node {i}"
            )));
        }
        out.insert(edge(i, j));
    }
    Ok(out)
}
