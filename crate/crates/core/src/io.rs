//! Dataset bundle directories.
//!
//! A bundle holds `edges.tsv` (one undirected `u<TAB>v` pair per line, `#`
//! comments), `features.csv` and `labels.csv` (one node per line, in index
//! order) and `meta.json` (`n`, `d`, `num_classes`, `name`).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_graph, SelfLoops, SparseGraph};
use crate::linalg::Mat;

pub const EDGES_FILE: &str = "edges.tsv";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub n: usize,
    pub d: usize,
    pub num_classes: usize,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub name: String,
    pub graph: SparseGraph,
    pub x: Mat,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl DatasetBundle {
    pub fn meta(&self) -> Meta {
        Meta {
            n: self.graph.n(),
            d: self.x.cols(),
            num_classes: self.num_classes,
            name: self.name.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.graph.n();
        if self.x.rows() != n || self.labels.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "graph has {n} nodes, features {} rows, labels {}",
                self.x.rows(),
                self.labels.len()
            )));
        }
        if let Some(&y) = self.labels.iter().find(|&&y| y >= self.num_classes) {
            return Err(Error::InvalidData(format!(
                "label {y} out of range for {} classes",
                self.num_classes
            )));
        }
        Ok(())
    }
}

fn parse_err(file: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        file: file.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Content lines with their 1-based numbers; `#` starts a comment.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("").trim();
        (!l.is_empty()).then_some((i + 1, l))
    })
}

pub fn parse_meta(text: &str) -> Result<Meta> {
    let m: Meta =
        serde_json::from_str(text).map_err(|e| parse_err(META_FILE, e.line(), e.to_string()))?;
    if m.n == 0 || m.d == 0 || m.num_classes == 0 {
        return Err(parse_err(
            META_FILE,
            1,
            "n, d and num_classes must be positive",
        ));
    }
    Ok(m)
}

pub fn parse_edges(text: &str, n: usize) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::new();
    for (ln, line) in content_lines(text) {
        let mut it = line.split_whitespace();
        let node = |it: &mut std::str::SplitWhitespace| -> Result<usize> {
            let tok = it
                .next()
                .ok_or_else(|| parse_err(EDGES_FILE, ln, "expected two node indices"))?;
            let v: usize = tok
                .parse()
                .map_err(|_| parse_err(EDGES_FILE, ln, format!("bad node index {tok:?}")))?;
            if v >= n {
                return Err(parse_err(
                    EDGES_FILE,
                    ln,
                    format!("node {v} out of range for n={n}"),
                ));
            }
            Ok(v)
        };
        let u = node(&mut it)?;
        let v = node(&mut it)?;
        if it.next().is_some() {
            return Err(parse_err(
                EDGES_FILE,
                ln,
                "expected exactly two node indices",
            ));
        }
        if u == v {
            return Err(parse_err(EDGES_FILE, ln, format!("self-loop at node {u}")));
        }
        edges.push((u, v));
    }
    Ok(edges)
}

pub fn parse_features(text: &str, n: usize, d: usize) -> Result<Mat> {
    let mut data = Vec::with_capacity(n * d);
    let mut rows = 0;
    for (ln, line) in content_lines(text) {
        let before = data.len();
        for tok in line.split(',') {
            let tok = tok.trim();
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(FEATURES_FILE, ln, format!("bad number {tok:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(FEATURES_FILE, ln, "non-finite feature"));
            }
            data.push(v);
        }
        if data.len() - before != d {
            return Err(parse_err(
                FEATURES_FILE,
                ln,
                format!("expected {d} values, found {}", data.len() - before),
            ));
        }
        rows += 1;
        if rows > n {
            return Err(parse_err(
                FEATURES_FILE,
                ln,
                format!("more than n={n} rows"),
            ));
        }
    }
    if rows != n {
        return Err(Error::DimensionMismatch(format!(
            "{FEATURES_FILE} has {rows} rows, meta says {n}"
        )));
    }
    Mat::from_rows(n, d, data)
}

pub fn parse_labels(text: &str, n: usize, num_classes: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(n);
    for (ln, line) in content_lines(text) {
        let y: usize = line
            .parse()
            .map_err(|_| parse_err(LABELS_FILE, ln, format!("bad label {line:?}")))?;
        if y >= num_classes {
            return Err(parse_err(
                LABELS_FILE,
                ln,
                format!("label {y} out of range for {num_classes} classes"),
            ));
        }
        out.push(y);
        if out.len() > n {
            return Err(parse_err(
                LABELS_FILE,
                ln,
                format!("more than n={n} labels"),
            ));
        }
    }
    if out.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{LABELS_FILE} has {} rows, meta says {n}",
            out.len()
        )));
    }
    Ok(out)
}

/// Parse all four files of a bundle from memory.
pub fn parse_bundle(
    meta: &str,
    edges: &str,
    features: &str,
    labels: &str,
) -> Result<DatasetBundle> {
    let m = parse_meta(meta)?;
    let e = parse_edges(edges, m.n)?;
    let graph = build_graph(&e, m.n, SelfLoops::Reject)?;
    let x = parse_features(features, m.n, m.d)?;
    let labels = parse_labels(labels, m.n, m.num_classes)?;
    let b = DatasetBundle {
        name: m.name,
        graph,
        x,
        labels,
        num_classes: m.num_classes,
    };
    b.validate()?;
    Ok(b)
}

fn read(dir: &Path, file: &str) -> Result<String> {
    let p = dir.join(file);
    if !p.exists() {
        return Err(Error::MissingFile(p));
    }
    fs::read_to_string(&p).map_err(|e| Error::io(p, e))
}

pub fn load_bundle(dir: &Path) -> Result<DatasetBundle> {
    let meta = read(dir, META_FILE)?;
    let edges = read(dir, EDGES_FILE)?;
    let features = read(dir, FEATURES_FILE)?;
    let labels = read(dir, LABELS_FILE)?;
    parse_bundle(&meta, &edges, &features, &labels)
}

/// The four files as strings. Floats use the shortest representation that
/// parses back to the same value, so load/save round-trips byte for byte.
pub fn render_bundle(b: &DatasetBundle) -> [(&'static str, String); 4] {
    let mut edges = String::new();
    for (u, v) in b.graph.edges() {
        edges.push_str(&format!("{u}\t{v}\n"));
    }
    let mut features = String::new();
    for i in 0..b.x.rows() {
        let row: Vec<String> = b.x.row(i).iter().map(|v| v.to_string()).collect();
        features.push_str(&row.join(","));
        features.push('\n');
    }
    let labels: String = b.labels.iter().map(|y| format!("{y}\n")).collect();
    let mut meta = serde_json::to_string_pretty(&b.meta()).expect("meta serializes");
    meta.push('\n');
    [
        (META_FILE, meta),
        (EDGES_FILE, edges),
        (FEATURES_FILE, features),
        (LABELS_FILE, labels),
    ]
}

pub fn save_bundle(b: &DatasetBundle, dir: &Path) -> Result<()> {
    b.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, body) in render_bundle(b) {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}
