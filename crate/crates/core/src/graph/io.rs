//! Dataset directory format.
//!
//! ```text
//! meta.json     {"num_nodes", "num_features", "num_classes", "feature_kind": "binary" | "continuous"}
//! edges.csv     header `src,dst`, one undirected 0-based edge per line
//! features.csv  num_nodes rows of num_features comma-separated reals, no header
//! labels.csv    num_nodes integers, one per line, no header
//! splits.json   optional {"train": [...], "val": [...], "test": [...]}
//! ```

use std::fs::File;
use std::io::BufWriter;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

use super::{FeatureKind, Graph, SplitMasks};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub num_nodes: usize,
    pub num_features: usize,
    pub num_classes: usize,
    pub feature_kind: FeatureKind,
}

fn open(dir: &Path, name: &str) -> Result<File> {
    let path = dir.join(name);
    File::open(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path),
        _ => Error::Io(e),
    })
}

fn parse_err(file: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        file: file.into(),
        message: message.into(),
    }
}

fn csv_reader(file: File, headers: bool) -> csv::Reader<File> {
    csv::ReaderBuilder::new()
        .has_headers(headers)
        .trim(csv::Trim::All)
        .from_reader(file)
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<(Graph, Option<SplitMasks>)> {
    let dir = dir.as_ref();
    let meta: DatasetMeta = serde_json::from_reader(open(dir, "meta.json")?)
        .map_err(|e| parse_err("meta.json", e.to_string()))?;

    let mut features = Vec::with_capacity(meta.num_nodes * meta.num_features);
    let mut rows = 0usize;
    for (i, rec) in csv_reader(open(dir, "features.csv")?, false).records().enumerate() {
        let rec = rec?;
        if rec.len() != meta.num_features {
            return Err(parse_err(
                "features.csv",
                format!("row {i} has {} values, expected {}", rec.len(), meta.num_features),
            ));
        }
        for field in rec.iter() {
            features.push(
                field
                    .parse::<f64>()
                    .map_err(|_| parse_err("features.csv", format!("row {i}: bad number {field:?}")))?,
            );
        }
        rows += 1;
    }
    if rows != meta.num_nodes {
        return Err(Error::RowCountMismatch {
            file: "features.csv".into(),
            expected: meta.num_nodes,
            found: rows,
        });
    }

    let mut labels = Vec::with_capacity(meta.num_nodes);
    for (i, rec) in csv_reader(open(dir, "labels.csv")?, false).records().enumerate() {
        let rec = rec?;
        let field = rec.get(0).unwrap_or("");
        labels.push(
            field
                .parse::<usize>()
                .map_err(|_| parse_err("labels.csv", format!("line {i}: bad label {field:?}")))?,
        );
    }
    if labels.len() != meta.num_nodes {
        return Err(Error::RowCountMismatch {
            file: "labels.csv".into(),
            expected: meta.num_nodes,
            found: labels.len(),
        });
    }
    if let Some((node, &label)) = labels.iter().enumerate().find(|(_, &y)| y >= meta.num_classes) {
        return Err(Error::LabelOutOfRange {
            node,
            label,
            num_classes: meta.num_classes,
        });
    }

    let mut edges = Vec::new();
    let mut reader = csv_reader(open(dir, "edges.csv")?, true);
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["src", "dst"] {
        return Err(parse_err("edges.csv", format!("expected header src,dst, found {headers:?}")));
    }
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parse = |k: usize| -> Result<usize> {
            let f = rec.get(k).unwrap_or("");
            f.parse()
                .map_err(|_| parse_err("edges.csv", format!("line {}: bad node id {f:?}", i + 2)))
        };
        edges.push((parse(0)?, parse(1)?));
    }

    let features = Matrix::from_vec(meta.num_nodes, meta.num_features, features)?;
    let graph = Graph::new(meta.num_classes, edges, features, labels, meta.feature_kind)?;

    let splits = match open(dir, "splits.json") {
        Ok(f) => {
            let m: SplitMasks =
                serde_json::from_reader(f).map_err(|e| parse_err("splits.json", e.to_string()))?;
            Some(SplitMasks::new(m.train, m.val, m.test, graph.num_nodes())?)
        }
        Err(Error::MissingFile(_)) => None,
        Err(e) => return Err(e),
    };
    Ok((graph, splits))
}

/// Writes `g` (and optionally its split) in the dataset directory format.
pub fn save_dataset(dir: impl AsRef<Path>, g: &Graph, splits: Option<&SplitMasks>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let meta = DatasetMeta {
        num_nodes: g.num_nodes(),
        num_features: g.num_features(),
        num_classes: g.num_classes(),
        feature_kind: g.feature_kind(),
    };
    serde_json::to_writer_pretty(File::create(dir.join("meta.json"))?, &meta)?;

    let mut w = BufWriter::new(File::create(dir.join("edges.csv"))?);
    writeln!(w, "src,dst")?;
    for &(u, v) in g.edges() {
        writeln!(w, "{u},{v}")?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(dir.join("features.csv"))?);
    for r in g.features().row_iter() {
        let line: Vec<String> = r.iter().map(f64::to_string).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;

    let mut w = BufWriter::new(File::create(dir.join("labels.csv"))?);
    for y in g.labels() {
        writeln!(w, "{y}")?;
    }
    w.flush()?;

    if let Some(s) = splits {
        serde_json::to_writer(File::create(dir.join("splits.json"))?, s)?;
    }
    Ok(())
}
