//! On-disk database directory.
//!
//! ```text
//! topology.json          {"nodes": [...], "edges": [[i, j], ...]}
//! values.csv             sample_id,<node ids...>; empty cell = missing
//! labels.csv             sample_id,label (0 inlier, 1 outlier), optional
//! edges_<sample_id>.csv  i,j rows overriding the shared edges, optional
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Edge, Label, NetworkDatabase, NetworkSample};

pub const TOPOLOGY_FILE: &str = "topology.json";
pub const VALUES_FILE: &str = "values.csv";
pub const LABELS_FILE: &str = "labels.csv";

#[derive(Debug, Serialize, Deserialize)]
struct Topology {
    nodes: Vec<String>,
    edges: Vec<[usize; 2]>,
}

fn override_file(sample_id: &str) -> String {
    format!("edges_{sample_id}.csv")
}

/// Reads and validates a database directory. Missing cells come back as NaN
/// with their mask set; call [`NetworkDatabase::impute_missing`] before use.
pub fn load_database(dir: impl AsRef<Path>) -> Result<NetworkDatabase> {
    let dir = dir.as_ref();

    let topo_path = dir.join(TOPOLOGY_FILE);
    let text = fs::read_to_string(&topo_path)
        .map_err(|e| Error::format(&topo_path, format!("cannot read: {e}")))?;
    let topo: Topology =
        serde_json::from_str(&text).map_err(|e| Error::format(&topo_path, e.to_string()))?;
    let n = topo.nodes.len();

    let values_path = dir.join(VALUES_FILE);
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(&values_path)
        .map_err(|e| Error::format(&values_path, format!("cannot read: {e}")))?;
    let header = reader
        .headers()
        .map_err(|e| Error::format(&values_path, e.to_string()))?
        .clone();
    if header.get(0) != Some("sample_id") {
        return Err(Error::format(&values_path, "first column must be `sample_id`"));
    }
    let position: HashMap<&str, usize> = topo
        .nodes
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    if position.len() != n {
        return Err(Error::Validation("duplicate node id in topology".into()));
    }
    let mut columns = Vec::with_capacity(header.len().saturating_sub(1));
    for name in header.iter().skip(1) {
        let &idx = position.get(name).ok_or_else(|| {
            Error::Validation(format!("values column `{name}` is not a topology node"))
        })?;
        columns.push(idx);
    }
    if columns.len() != n || columns.iter().collect::<BTreeSet<_>>().len() != n {
        return Err(Error::Validation(format!(
            "values header must name each of the {n} topology nodes exactly once"
        )));
    }

    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(&values_path, e.to_string()))?;
        let sample_id = record.get(0).unwrap_or_default().to_owned();
        if record.len() != n + 1 {
            return Err(Error::Validation(format!(
                "values row {} (sample `{sample_id}`) has {} entries, expected {n}",
                row + 1,
                record.len().saturating_sub(1)
            )));
        }
        let mut values = vec![f64::NAN; n];
        let mut mask = vec![false; n];
        for (cell, &idx) in record.iter().skip(1).zip(&columns) {
            if cell.is_empty() {
                mask[idx] = true;
            } else {
                values[idx] = cell.parse::<f64>().map_err(|_| {
                    Error::format(
                        &values_path,
                        format!("row {} (sample `{sample_id}`): bad number `{cell}`", row + 1),
                    )
                })?;
            }
        }
        let override_path = dir.join(override_file(&sample_id));
        let edge_override = if override_path.is_file() {
            Some(read_edges(&override_path)?)
        } else {
            None
        };
        samples.push(NetworkSample {
            sample_id,
            values,
            edge_override,
            missing_mask: mask,
        });
    }

    let labels_path = dir.join(LABELS_FILE);
    let labels = if labels_path.is_file() {
        Some(read_labels(&labels_path)?)
    } else {
        None
    };

    NetworkDatabase::new(
        topo.nodes,
        topo.edges.into_iter().map(|[i, j]| (i, j)),
        samples,
        labels,
    )
}

fn read_edges(path: &Path) -> Result<BTreeSet<Edge>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let mut edges = BTreeSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        if record.len() != 2 {
            return Err(Error::format(path, "edge rows must have exactly two columns"));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::format(path, format!("bad node index `{s}`")))
        };
        edges.insert((parse(&record[0])?, parse(&record[1])?));
    }
    Ok(edges)
}

fn read_labels(path: &Path) -> Result<BTreeMap<String, Label>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let mut labels = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        if record.len() != 2 {
            return Err(Error::format(path, "label rows must be `sample_id,label`"));
        }
        let label = record[1]
            .parse::<u8>()
            .ok()
            .and_then(Label::from_flag)
            .ok_or_else(|| Error::format(path, format!("label must be 0 or 1, got `{}`", &record[1])))?;
        labels.insert(record[0].to_owned(), label);
    }
    Ok(labels)
}

/// Writes `db` in the directory layout read by [`load_database`].
pub fn write_database(db: &NetworkDatabase, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;

    let topo = Topology {
        nodes: db.node_ids().to_vec(),
        edges: db.shared_edges().iter().map(|&(i, j)| [i, j]).collect(),
    };
    let json = serde_json::to_string(&topo).map_err(|e| Error::Internal(e.to_string()))?;
    fs::write(dir.join(TOPOLOGY_FILE), json + "\n")?;

    let mut out = String::new();
    out.push_str("sample_id");
    for id in db.node_ids() {
        out.push(',');
        out.push_str(id);
    }
    out.push('\n');
    for sample in db.samples() {
        out.push_str(&sample.sample_id);
        for (v, &masked) in sample.values.iter().zip(&sample.missing_mask) {
            out.push(',');
            if !masked {
                out.push_str(&v.to_string());
            }
        }
        out.push('\n');
    }
    fs::write(dir.join(VALUES_FILE), out)?;

    for sample in db.samples() {
        if let Some(edges) = &sample.edge_override {
            let body: String = edges.iter().map(|(i, j)| format!("{i},{j}\n")).collect();
            fs::write(dir.join(override_file(&sample.sample_id)), body)?;
        }
    }

    if let Some(labels) = db.labels() {
        let mut body = String::from("sample_id,label\n");
        for (id, label) in labels {
            body.push_str(&format!("{id},{}\n", label.flag()));
        }
        fs::write(dir.join(LABELS_FILE), body)?;
    }
    Ok(())
}
