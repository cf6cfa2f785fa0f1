//! Ensemble file formats.
//!
//! * `json-bundle`: one JSON document holding `n`, `directed`, optional
//!   `nodes` (labels), `node_attrs`, `edge_attrs`, and `graphs`, an array of
//!   edge lists whose endpoints are either indices or labels.
//! * `edge-list-dir`: a directory with `meta.json` (the bundle without
//!   `graphs`) and one whitespace-separated `src dst` file per graph, taken
//!   in natural file-name order.
//! * `adjacency-csv`: a JSON manifest listing one 0/1 CSV matrix per graph.
//!
//! Labels are mapped to 0-based indices in sorted label order (numeric when
//! every label is an integer). Attribute vectors in files are aligned with
//! the `nodes` array as written.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CovariateSet, Covariates, EdgeAttr, Ensemble, Graph, NodeAttr};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleFormat {
    EdgeListDir,
    AdjacencyCsv,
    JsonBundle,
}

impl FromStr for EnsembleFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge-list-dir" => Ok(EnsembleFormat::EdgeListDir),
            "adjacency-csv" => Ok(EnsembleFormat::AdjacencyCsv),
            "json-bundle" => Ok(EnsembleFormat::JsonBundle),
            other => Err(Error::Config(format!("unknown ensemble format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum AttrValues {
    Numbers(Vec<f64>),
    Strings(Vec<String>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum NodeRef {
    Index(i64),
    Label(String),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttrBlock {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    node_attrs: BTreeMap<String, AttrValues>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    edge_attrs: BTreeMap<String, Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Bundle {
    n: usize,
    directed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nodes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "is_zero")]
    index_base: i64,
    #[serde(flatten)]
    attrs: AttrBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    graph_attrs: Option<Vec<AttrBlock>>,
    graphs: Vec<Vec<[NodeRef; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truth: Option<Vec<usize>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DirMeta {
    n: usize,
    directed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nodes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "is_zero")]
    index_base: i64,
    #[serde(flatten)]
    attrs: AttrBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truth: Option<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CsvManifest {
    directed: bool,
    files: Vec<PathBuf>,
    #[serde(default)]
    nodes: Option<Vec<String>>,
    #[serde(flatten)]
    attrs: AttrBlock,
}

fn is_zero(x: &i64) -> bool {
    *x == 0
}

/// Sorts labels numerically when all are integers; otherwise runs of
/// digits compare by value and everything else lexicographically, so
/// `g2` sorts before `g10`.
fn natural_order(labels: &[String]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    let numeric: Option<Vec<i64>> = labels.iter().map(|l| l.parse::<i64>().ok()).collect();
    match numeric {
        Some(nums) => order.sort_by_key(|&k| nums[k]),
        None => order.sort_by(|&a, &b| natural_cmp(&labels[a], &labels[b])),
    }
    order
}

fn chunks(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let bytes = s.as_bytes();
    for i in 1..=bytes.len() {
        if i == bytes.len() || bytes[i].is_ascii_digit() != bytes[start].is_ascii_digit() {
            out.push(&s[start..i]);
            start = i;
        }
    }
    out
}

fn natural_cmp(a: &str, b: &str) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    for (x, y) in chunks(a).into_iter().zip(chunks(b)) {
        let both_digits = x.as_bytes()[0].is_ascii_digit() && y.as_bytes()[0].is_ascii_digit();
        let ord = if both_digits {
            let (tx, ty) = (x.trim_start_matches('0'), y.trim_start_matches('0'));
            tx.len().cmp(&ty.len()).then(tx.cmp(ty)).then(x.len().cmp(&y.len()))
        } else {
            x.cmp(y)
        };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    chunks(a).len().cmp(&chunks(b).len()).then(a.cmp(b))
}

/// Label table for one ensemble: sorted labels plus the file-position map.
struct Labels {
    sorted: Vec<String>,
    /// `index_of_pos[p]` is the internal index of the label at file position `p`.
    index_of_pos: Vec<usize>,
    /// `pos_of_index[i]` is the file position of internal index `i`.
    pos_of_index: Vec<usize>,
    lookup: BTreeMap<String, usize>,
}

impl Labels {
    fn new(file: &Path, listed: Vec<String>, n: usize) -> Result<Self> {
        if listed.len() != n {
            return Err(Error::parse(
                file,
                0,
                format!("{} node labels for n = {n}", listed.len()),
            ));
        }
        let pos_of_index = natural_order(&listed);
        let mut index_of_pos = vec![0; n];
        for (i, &p) in pos_of_index.iter().enumerate() {
            index_of_pos[p] = i;
        }
        let sorted: Vec<String> = pos_of_index.iter().map(|&p| listed[p].clone()).collect();
        let mut lookup = BTreeMap::new();
        for (i, l) in sorted.iter().enumerate() {
            if lookup.insert(l.clone(), i).is_some() {
                return Err(Error::parse(file, 0, format!("duplicate node label `{l}`")));
            }
        }
        Ok(Labels {
            sorted,
            index_of_pos,
            pos_of_index,
            lookup,
        })
    }

    fn identity(n: usize) -> Self {
        Labels {
            sorted: (0..n).map(|i| i.to_string()).collect(),
            index_of_pos: (0..n).collect(),
            pos_of_index: (0..n).collect(),
            lookup: BTreeMap::new(),
        }
    }
}

fn build_covariates(file: &Path, block: &AttrBlock, labels: &Labels, n: usize) -> Result<Covariates> {
    let mut cov = Covariates::new();
    for (name, values) in &block.node_attrs {
        let attr = match values {
            AttrValues::Numbers(v) => NodeAttr::Real(v.clone()),
            AttrValues::Strings(v) => NodeAttr::categorical(v),
        };
        if attr.len() != n {
            return Err(Error::parse(
                file,
                0,
                format!("node attribute `{name}` has length {}, expected {n}", attr.len()),
            ));
        }
        cov.node_attrs.insert(name.clone(), attr.permuted(&labels.pos_of_index));
    }
    for (name, rows) in &block.edge_attrs {
        let m =
            EdgeAttr::from_rows(rows).map_err(|e| Error::parse(file, 0, format!("edge attribute `{name}`: {e}")))?;
        if m.n() != n {
            return Err(Error::parse(
                file,
                0,
                format!("edge attribute `{name}` is {0}x{0}, expected {n}x{n}", m.n()),
            ));
        }
        cov.edge_attrs.insert(name.clone(), m.permuted(&labels.pos_of_index));
    }
    Ok(cov)
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn json_error(path: &Path, e: serde_json::Error) -> Error {
    Error::parse(path, e.line(), e.to_string())
}

pub fn load_ensemble(path: &Path, format: EnsembleFormat) -> Result<Ensemble> {
    match format {
        EnsembleFormat::JsonBundle => load_json_bundle(path),
        EnsembleFormat::EdgeListDir => load_edge_list_dir(path),
        EnsembleFormat::AdjacencyCsv => load_adjacency_csv(path),
    }
}

fn resolve_ref(file: &Path, r: &NodeRef, labels: &Labels, index_base: i64, n: usize) -> Result<usize> {
    match r {
        NodeRef::Index(k) => {
            let p = k - index_base;
            if p < 0 || p as usize >= n {
                return Err(Error::parse(file, 0, format!("node index {k} out of range")));
            }
            Ok(labels.index_of_pos[p as usize])
        }
        NodeRef::Label(l) => labels
            .lookup
            .get(l)
            .copied()
            .ok_or_else(|| Error::parse(file, 0, format!("unknown node label `{l}`"))),
    }
}

fn finish_graph(file: &Path, n: usize, directed: bool, edges: &[(usize, usize)], which: usize) -> Result<Graph> {
    if let Some(&(i, _)) = edges.iter().find(|(i, j)| i == j) {
        return Err(Error::Structural(format!(
            "{}: graph {which} has a self-loop at node {i}",
            file.display()
        )));
    }
    Graph::from_edges(n, directed, edges)
}

fn load_json_bundle(path: &Path) -> Result<Ensemble> {
    let text = read_to_string(path)?;
    let bundle: Bundle = serde_json::from_str(&text).map_err(|e| json_error(path, e))?;
    let n = bundle.n;
    if n == 0 {
        return Err(Error::parse(path, 0, "n must be positive"));
    }
    let labels = match &bundle.nodes {
        Some(nodes) => Labels::new(path, nodes.clone(), n)?,
        None => {
            let mut seen: Vec<String> = bundle
                .graphs
                .iter()
                .flatten()
                .flatten()
                .filter_map(|r| match r {
                    NodeRef::Label(l) => Some(l.clone()),
                    NodeRef::Index(_) => None,
                })
                .collect();
            if seen.is_empty() {
                Labels::identity(n)
            } else {
                seen.sort();
                seen.dedup();
                Labels::new(path, seen, n)?
            }
        }
    };
    let mut graphs = Vec::with_capacity(bundle.graphs.len());
    for (k, edges) in bundle.graphs.iter().enumerate() {
        let pairs = edges
            .iter()
            .map(|[a, b]| {
                Ok((
                    resolve_ref(path, a, &labels, bundle.index_base, n)?,
                    resolve_ref(path, b, &labels, bundle.index_base, n)?,
                ))
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| match e {
                Error::Parse { file, line, message } => Error::Parse {
                    file,
                    line,
                    message: format!("graph {k}: {message}"),
                },
                other => other,
            })?;
        graphs.push(finish_graph(path, n, bundle.directed, &pairs, k)?);
    }
    let covariates = match &bundle.graph_attrs {
        None => CovariateSet::Shared(build_covariates(path, &bundle.attrs, &labels, n)?),
        Some(blocks) => CovariateSet::PerGraph(
            blocks
                .iter()
                .map(|b| build_covariates(path, b, &labels, n))
                .collect::<Result<_>>()?,
        ),
    };
    let mut ens = Ensemble::new(graphs, covariates)?.with_node_labels(labels.sorted)?;
    if let Some(t) = bundle.truth {
        ens = ens.with_truth(t)?;
    }
    Ok(ens)
}

fn natural_file_order(mut files: Vec<PathBuf>) -> Vec<PathBuf> {
    let names: Vec<String> = files
        .iter()
        .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
        .collect();
    let stems: Vec<String> = files
        .iter()
        .map(|p| p.file_stem().unwrap_or_default().to_string_lossy().into_owned())
        .collect();
    let key: Vec<String> = if stems.iter().all(|s| s.parse::<i64>().is_ok()) {
        stems
    } else {
        names
    };
    let order = natural_order(&key);
    let mut out: Vec<Option<PathBuf>> = files.drain(..).map(Some).collect();
    order.iter().map(|&k| out[k].take().unwrap()).collect()
}

fn load_edge_list_dir(dir: &Path) -> Result<Ensemble> {
    let meta_path = dir.join("meta.json");
    let meta: DirMeta = serde_json::from_str(&read_to_string(&meta_path)?).map_err(|e| json_error(&meta_path, e))?;
    let n = meta.n;
    let labels = match &meta.nodes {
        Some(nodes) => Some(Labels::new(&meta_path, nodes.clone(), n)?),
        None => None,
    };
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let p = entry.path();
        let name = entry.file_name().to_string_lossy().into_owned();
        if p.is_file() && name != "meta.json" && !name.starts_with('.') {
            files.push(p);
        }
    }
    let files = natural_file_order(files);
    let mut graphs = Vec::with_capacity(files.len());
    for (k, file) in files.iter().enumerate() {
        let text = read_to_string(file)?;
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(Error::parse(
                    file,
                    lineno + 1,
                    format!("expected `src dst`, found {} fields", toks.len()),
                ));
            }
            let mut ends = [0usize; 2];
            for (slot, tok) in ends.iter_mut().zip(&toks) {
                *slot = match &labels {
                    Some(l) => *l
                        .lookup
                        .get(*tok)
                        .ok_or_else(|| Error::parse(file, lineno + 1, format!("unknown node label `{tok}`")))?,
                    None => {
                        let v: i64 = tok
                            .parse()
                            .map_err(|_| Error::parse(file, lineno + 1, format!("`{tok}` is not a node index")))?;
                        let p = v - meta.index_base;
                        if p < 0 || p as usize >= n {
                            return Err(Error::parse(file, lineno + 1, format!("node index {v} out of range")));
                        }
                        p as usize
                    }
                };
            }
            pairs.push((ends[0], ends[1]));
        }
        graphs.push(finish_graph(file, n, meta.directed, &pairs, k)?);
    }
    let labels = labels.unwrap_or_else(|| Labels::identity(n));
    let cov = build_covariates(&meta_path, &meta.attrs, &labels, n)?;
    let mut ens = Ensemble::new(graphs, CovariateSet::Shared(cov))?.with_node_labels(labels.sorted)?;
    if let Some(t) = meta.truth {
        ens = ens.with_truth(t)?;
    }
    Ok(ens)
}

fn read_adjacency_csv(file: &Path) -> Result<Vec<Vec<bool>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(file)
        .map_err(|e| Error::parse(file, 0, e.to_string()))?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(file, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let row = rec
            .iter()
            .map(|cell| match cell {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::parse(file, line, format!("expected 0 or 1, found `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if let Some((k, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(Error::parse(
            file,
            k + 1,
            format!("row has {} entries in a {n}-row matrix", r.len()),
        ));
    }
    Ok(rows)
}

fn load_adjacency_csv(manifest_path: &Path) -> Result<Ensemble> {
    let manifest: CsvManifest =
        serde_json::from_str(&read_to_string(manifest_path)?).map_err(|e| json_error(manifest_path, e))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut graphs = Vec::with_capacity(manifest.files.len());
    let mut n_seen = None;
    for (k, rel) in manifest.files.iter().enumerate() {
        let file = base.join(rel);
        let rows = read_adjacency_csv(&file)?;
        let n = rows.len();
        match n_seen {
            None => n_seen = Some(n),
            Some(m) if m != n => {
                return Err(Error::Structural(format!(
                    "{}: {n} nodes, but earlier graphs have {m}",
                    file.display()
                )))
            }
            _ => {}
        }
        let mut pairs = Vec::new();
        for i in 0..n {
            if rows[i][i] {
                return Err(Error::Structural(format!("{}: self-loop at node {i}", file.display())));
            }
            for j in 0..n {
                if !manifest.directed && rows[i][j] != rows[j][i] {
                    return Err(Error::Structural(format!(
                        "{}: undirected matrix is asymmetric at ({i}, {j})",
                        file.display()
                    )));
                }
                if rows[i][j] && (manifest.directed || i < j) {
                    pairs.push((i, j));
                }
            }
        }
        graphs.push(finish_graph(&file, n, manifest.directed, &pairs, k)?);
    }
    let n = n_seen.ok_or_else(|| Error::Structural("manifest lists no graphs".into()))?;
    if n == 0 {
        return Err(Error::Structural("adjacency matrices are empty".into()));
    }
    let labels = match manifest.nodes {
        Some(nodes) => Labels::new(manifest_path, nodes, n)?,
        None => Labels::identity(n),
    };
    if labels.index_of_pos.iter().enumerate().any(|(p, &i)| p != i) {
        // rows are in file order; move them to sorted-label order
        graphs = graphs
            .iter()
            .map(|g| g.permuted(&labels.index_of_pos))
            .collect::<Result<_>>()?;
    }
    let cov = build_covariates(manifest_path, &manifest.attrs, &labels, n)?;
    Ensemble::new(graphs, CovariateSet::Shared(cov))?.with_node_labels(labels.sorted)
}

fn attr_block(cov: &Covariates) -> AttrBlock {
    AttrBlock {
        node_attrs: cov
            .node_attrs
            .iter()
            .map(|(k, a)| {
                let v = match a {
                    NodeAttr::Categorical { codes, levels } => {
                        AttrValues::Strings(codes.iter().map(|&c| levels[c as usize].clone()).collect())
                    }
                    NodeAttr::Real(v) => AttrValues::Numbers(v.clone()),
                };
                (k.clone(), v)
            })
            .collect(),
        edge_attrs: cov.edge_attrs.iter().map(|(k, m)| (k.clone(), m.rows())).collect(),
    }
}

fn edge_refs(g: &Graph) -> Vec<[NodeRef; 2]> {
    g.edges()
        .map(|(i, j)| [NodeRef::Index(i as i64), NodeRef::Index(j as i64)])
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Writes the ensemble as a json-bundle. Endpoints are written as indices
/// into the (already sorted) `nodes` array.
pub fn save_json_bundle(path: &Path, ens: &Ensemble) -> Result<()> {
    let (attrs, graph_attrs) = match ens.covariate_set() {
        CovariateSet::Shared(c) => (attr_block(c), None),
        CovariateSet::PerGraph(cs) => (AttrBlock::default(), Some(cs.iter().map(attr_block).collect())),
    };
    let bundle = Bundle {
        n: ens.n(),
        directed: ens.is_directed(),
        nodes: Some(ens.node_labels().to_vec()),
        index_base: 0,
        attrs,
        graph_attrs,
        graphs: ens.graphs().iter().map(edge_refs).collect(),
        truth: ens.truth().map(|t| t.to_vec()),
    };
    write_json(path, &bundle)
}

/// Writes the ensemble as an edge-list directory (`meta.json` plus one
/// `graph_NNNN.edges` file per graph, endpoints written as labels).
pub fn save_edge_list_dir(dir: &Path, ens: &Ensemble) -> Result<()> {
    let cov = match ens.covariate_set() {
        CovariateSet::Shared(c) => c,
        CovariateSet::PerGraph(_) => {
            return Err(Error::Structural("edge-list-dir holds shared covariates only".into()))
        }
    };
    if let Some(l) = ens.node_labels().iter().find(|l| l.split_whitespace().count() != 1) {
        return Err(Error::Structural(format!(
            "label `{l}` cannot be written to a whitespace-separated file"
        )));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = DirMeta {
        n: ens.n(),
        directed: ens.is_directed(),
        nodes: Some(ens.node_labels().to_vec()),
        index_base: 0,
        attrs: attr_block(cov),
        truth: ens.truth().map(|t| t.to_vec()),
    };
    write_json(&dir.join("meta.json"), &meta)?;
    let labels = ens.node_labels();
    for (k, g) in ens.graphs().iter().enumerate() {
        let mut text = String::new();
        for (i, j) in g.edges() {
            text.push_str(&labels[i]);
            text.push(' ');
            text.push_str(&labels[j]);
            text.push('\n');
        }
        let path = dir.join(format!("graph_{k:04}.edges"));
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
