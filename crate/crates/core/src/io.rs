//! Edge-list ingestion and report documents.
//!
//! Edge lists are whitespace-separated text, one record per line:
//!
//! ```text
//! # comment
//! u v        edge of weight 1
//! u v 3      edge of weight 3
//! u          declares an isolated node
//! ```
//!
//! Node labels are arbitrary tokens assigned dense indices in order of first
//! appearance. Repeated pairs are merged by summing weights.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::chi2::Chi2Report;
use crate::detect::DetectionReport;
use crate::graph::Graph;
use crate::sim::SimSummary;
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// A graph together with the external label of every node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledGraph {
    pub graph: Graph,
    pub labels: Vec<String>,
}

impl LabeledGraph {
    /// Labels `0..n` rendered as decimal strings.
    pub fn with_index_labels(graph: Graph) -> Self {
        let labels = (0..graph.n()).map(|i| i.to_string()).collect();
        LabeledGraph { graph, labels }
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Resolves labels to node indices, failing on the first unknown label.
    pub fn indices_of<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        let lookup: HashMap<&str, usize> = self.labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
        labels
            .iter()
            .map(|l| {
                lookup
                    .get(l.as_ref())
                    .copied()
                    .ok_or_else(|| Error::invalid(format!("unknown node label `{}`", l.as_ref())))
            })
            .collect()
    }

    pub fn labels_of(&self, nodes: &[usize]) -> Vec<String> {
        nodes.iter().map(|&i| self.labels[i].clone()).collect()
    }
}

pub fn read_edge_list<R: BufRead>(source: R) -> Result<LabeledGraph> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut edges = Vec::new();
    let mut intern = |tok: &str, labels: &mut Vec<String>| -> usize {
        *index.entry(tok.to_string()).or_insert_with(|| {
            labels.push(tok.to_string());
            labels.len() - 1
        })
    };
    for (lineno, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let content = line.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let parse_err = |message: String| Error::Parse { line: lineno, message };
        match tokens.as_slice() {
            [] => {}
            [u] => {
                intern(u, &mut labels);
            }
            [u, v, rest @ ..] => {
                if u == v {
                    return Err(parse_err(format!("self-loop on `{u}`")));
                }
                let w = match rest {
                    [] => 1,
                    [w] => match w.parse::<u64>() {
                        Ok(w) if w > 0 => w,
                        _ => return Err(parse_err(format!("weight `{w}` is not a positive integer"))),
                    },
                    _ => return Err(parse_err(format!("expected `u v [w]`, found {} fields", tokens.len()))),
                };
                let a = intern(u, &mut labels);
                let b = intern(v, &mut labels);
                edges.push((a, b, w));
            }
        }
    }
    let graph = Graph::from_edges(labels.len(), edges)?;
    Ok(LabeledGraph { graph, labels })
}

/// Writes node declarations (in index order) followed by edges. Reading the
/// output back yields an identical [`LabeledGraph`].
pub fn write_edge_list<W: Write>(lg: &LabeledGraph, mut sink: W) -> Result<()> {
    if lg.labels.len() != lg.graph.n() {
        return Err(Error::SizeMismatch {
            graph: lg.graph.n(),
            model: lg.labels.len(),
        });
    }
    if let Some(bad) = lg
        .labels
        .iter()
        .find(|l| l.is_empty() || l.contains(char::is_whitespace) || l.contains('#'))
    {
        return Err(Error::invalid(format!(
            "label `{bad}` cannot be written to an edge list"
        )));
    }
    writeln!(sink, "# nodes: {}  edges: {}", lg.graph.n(), lg.graph.edge_count())?;
    for l in &lg.labels {
        writeln!(sink, "{l}")?;
    }
    for (i, j, w) in lg.graph.edges() {
        if w == 1 {
            writeln!(sink, "{} {}", lg.labels[i], lg.labels[j])?;
        } else {
            writeln!(sink, "{} {} {}", lg.labels[i], lg.labels[j], w)?;
        }
    }
    sink.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRecord {
    pub label: String,
    pub degree: u64,
    pub pair_count: u64,
    pub egonet_degree: u64,
    pub p_value: f64,
}

/// Egonet detection result keyed by external node labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDetection {
    pub model: String,
    pub alpha: f64,
    pub threshold: f64,
    pub t_n: f64,
    pub reject: bool,
    pub flagged: Vec<String>,
    pub records: Vec<LabeledRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi2: Option<Chi2Report>,
}

impl LabeledDetection {
    pub fn new(report: &DetectionReport, labels: &[String], model: &str) -> Self {
        LabeledDetection {
            model: model.to_string(),
            alpha: report.alpha,
            threshold: report.threshold,
            t_n: report.t_n,
            reject: report.reject,
            flagged: report.flagged.iter().map(|&i| labels[i].clone()).collect(),
            records: report
                .records
                .iter()
                .map(|r| LabeledRecord {
                    label: labels[r.node].clone(),
                    degree: r.degree,
                    pair_count: r.pair_count,
                    egonet_degree: r.egonet_degree,
                    p_value: r.p_value,
                })
                .collect(),
            chi2: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliqueReport {
    pub flagged: Vec<String>,
    pub clique: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "report", rename_all = "lowercase")]
pub enum ReportBody {
    Detection(LabeledDetection),
    Clique(CliqueReport),
    Simulation(SimSummary),
}

/// Versioned, self-describing report with the seed and configuration that
/// produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub tool: String,
    pub seed: Option<u64>,
    pub config: BTreeMap<String, String>,
    pub body: ReportBody,
}

impl ReportDocument {
    pub fn new(body: ReportBody) -> Self {
        ReportDocument {
            schema_version: SCHEMA_VERSION,
            tool: format!("egoscan {}", env!("CARGO_PKG_VERSION")),
            seed: None,
            config: BTreeMap::new(),
            body,
        }
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_config(mut self, key: &str, value: impl ToString) -> Self {
        self.config.insert(key.to_string(), value.to_string());
        self
    }
}

pub fn write_report<W: Write>(doc: &ReportDocument, mut sink: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut sink, doc)?;
    writeln!(sink)?;
    sink.flush()?;
    Ok(())
}

pub fn read_report<R: std::io::Read>(source: R) -> Result<ReportDocument> {
    let doc: ReportDocument = serde_json::from_reader(source)?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(Error::invalid(format!(
            "unsupported report schema version {}",
            doc.schema_version
        )));
    }
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<LabeledGraph> {
        read_edge_list(text.as_bytes())
    }

    #[test]
    fn path_with_labels() {
        let lg = parse("a b\nb c\n").unwrap();
        assert_eq!(lg.labels, vec!["a", "b", "c"]);
        assert_eq!(lg.graph.edge_count(), 2);
        assert_eq!(lg.graph.neighborhood(1).unwrap(), &[0, 2]);
    }

    #[test]
    fn duplicate_pairs_merge() {
        let lg = parse("a b 2\nb a 1\n").unwrap();
        assert_eq!(lg.graph.weight(0, 1).unwrap(), 3);
        assert_eq!(lg.graph.edge_count(), 1);
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(parse("a a"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("# hi\na b x"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse("a b 0"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("a b 1.5"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("a b 1 2"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn comments_and_isolated_nodes() {
        let lg = parse("# header\n\nz\na b # trailing\n").unwrap();
        assert_eq!(lg.labels, vec!["z", "a", "b"]);
        assert_eq!(lg.graph.degree(0).unwrap(), 0);
    }

    #[test]
    fn write_then_read_is_identity() {
        let g = Graph::from_edges(6, [(0, 5, 1), (1, 2, 4), (2, 5, 1)]).unwrap();
        let lg = LabeledGraph::with_index_labels(g);
        let mut buf = Vec::new();
        write_edge_list(&lg, &mut buf).unwrap();
        assert_eq!(read_edge_list(buf.as_slice()).unwrap(), lg);
    }

    #[test]
    fn unknown_labels() {
        let lg = parse("a b").unwrap();
        assert_eq!(lg.indices_of(&["b", "a"]).unwrap(), vec![1, 0]);
        assert!(lg.indices_of(&["q"]).is_err());
    }

    #[test]
    fn bad_schema_version() {
        let mut doc = ReportDocument::new(ReportBody::Simulation(SimSummary::default()));
        doc.schema_version = 99;
        let text = serde_json::to_string(&doc).unwrap();
        assert!(read_report(text.as_bytes()).is_err());
    }
}
