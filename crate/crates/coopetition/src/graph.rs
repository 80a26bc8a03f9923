//! Undirected weighted simple graph over entities, plus serialized exports.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::similarity::SimilarityMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeWeighting {
    /// every retained pair gets weight 1
    Binary,
    /// edge weight = similarity value
    Similarity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    entity_ids: Vec<String>,
    /// (i, j, w) with i < j, lexicographic order, w > 0
    edges: Vec<(usize, usize, f64)>,
    degree: Vec<usize>,
    weighted_degree: Vec<f64>,
}

impl Graph {
    pub fn new(entity_ids: Vec<String>, mut edges: Vec<(usize, usize, f64)>) -> Self {
        let n = entity_ids.len();
        for e in &mut edges {
            assert!(e.0 != e.1, "self-loop");
            assert!(e.2 > 0.0, "non-positive edge weight");
            if e.0 > e.1 {
                std::mem::swap(&mut e.0, &mut e.1);
            }
            assert!(e.1 < n, "edge endpoint out of range");
        }
        edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        edges.dedup_by_key(|e| (e.0, e.1));
        let mut degree = vec![0usize; n];
        let mut weighted_degree = vec![0.0f64; n];
        for &(i, j, w) in &edges {
            degree[i] += 1;
            degree[j] += 1;
            weighted_degree[i] += w;
            weighted_degree[j] += w;
        }
        Self {
            entity_ids,
            edges,
            degree,
            weighted_degree,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.entity_ids.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn entity_ids(&self) -> &[String] {
        &self.entity_ids
    }

    pub fn degree(&self, node: usize) -> usize {
        self.degree[node]
    }

    pub fn weighted_degree(&self, node: usize) -> f64 {
        self.weighted_degree[node]
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2).sum()
    }

    pub fn is_isolated(&self, node: usize) -> bool {
        self.degree[node] == 0
    }

    /// Neighbor lists, built on demand.
    pub fn adjacency(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.n_nodes()];
        for &(i, j, w) in &self.edges {
            adj[i].push((j, w));
            adj[j].push((i, w));
        }
        adj
    }
}

/// One edge per retained similarity pair; isolated entities stay as
/// degree-0 nodes.
pub fn build_graph(s: &SimilarityMatrix, entity_ids: &[String], weighting: EdgeWeighting) -> Graph {
    let edges = s
        .pairs()
        .iter()
        .map(|&(i, j, v)| match weighting {
            EdgeWeighting::Binary => (i, j, 1.0),
            EdgeWeighting::Similarity => (i, j, v),
        })
        .collect();
    Graph::new(entity_ids.to_vec(), edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Gexf,
    Graphml,
    Dot,
    Jsonl,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gexf" => Ok(ExportFormat::Gexf),
            "graphml" => Ok(ExportFormat::Graphml),
            "dot" => Ok(ExportFormat::Dot),
            "jsonl" => Ok(ExportFormat::Jsonl),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

impl ExportFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            ExportFormat::Gexf => "gexf",
            ExportFormat::Graphml => "graphml",
            ExportFormat::Dot => "dot",
            ExportFormat::Jsonl => "jsonl",
        }
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Serialize the graph with optional node positions and community labels.
pub fn export_graph(
    g: &Graph,
    format: ExportFormat,
    positions: Option<&[(f64, f64)]>,
    communities: Option<&[String]>,
) -> Result<Vec<u8>> {
    if let Some(p) = positions {
        if p.len() != g.n_nodes() {
            return Err(Error::Dimension(format!(
                "{} positions for {} nodes",
                p.len(),
                g.n_nodes()
            )));
        }
    }
    if let Some(c) = communities {
        if c.len() != g.n_nodes() {
            return Err(Error::Dimension(format!(
                "{} community labels for {} nodes",
                c.len(),
                g.n_nodes()
            )));
        }
    }
    let mut out = String::new();
    match format {
        ExportFormat::Gexf => {
            out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
            out.push_str("<gexf xmlns=\"http://www.gexf.net/1.2draft\" version=\"1.2\">\n");
            out.push_str("  <graph defaultedgetype=\"undirected\">\n");
            out.push_str("    <attributes class=\"node\">\n");
            if communities.is_some() {
                out.push_str(
                    "      <attribute id=\"community\" title=\"community\" type=\"string\"/>\n",
                );
            }
            if positions.is_some() {
                out.push_str("      <attribute id=\"x\" title=\"x\" type=\"double\"/>\n");
                out.push_str("      <attribute id=\"y\" title=\"y\" type=\"double\"/>\n");
            }
            out.push_str("    </attributes>\n");
            out.push_str("    <nodes>\n");
            for (idx, id) in g.entity_ids().iter().enumerate() {
                let _ = write!(
                    out,
                    "      <node id=\"{}\" label=\"{}\"",
                    idx,
                    xml_escape(id)
                );
                if positions.is_some() || communities.is_some() {
                    out.push_str(">\n        <attvalues>\n");
                    if let Some(c) = communities {
                        let _ = write!(
                            out,
                            "          <attvalue for=\"community\" value=\"{}\"/>\n",
                            xml_escape(&c[idx])
                        );
                    }
                    if let Some(p) = positions {
                        let _ = write!(
                            out,
                            "          <attvalue for=\"x\" value=\"{}\"/>\n",
                            p[idx].0
                        );
                        let _ = write!(
                            out,
                            "          <attvalue for=\"y\" value=\"{}\"/>\n",
                            p[idx].1
                        );
                    }
                    out.push_str("        </attvalues>\n      </node>\n");
                } else {
                    out.push_str("/>\n");
                }
            }
            out.push_str("    </nodes>\n    <edges>\n");
            for (eid, &(i, j, w)) in g.edges().iter().enumerate() {
                let _ = write!(
                    out,
                    "      <edge id=\"{eid}\" source=\"{i}\" target=\"{j}\" weight=\"{w}\"/>\n"
                );
            }
            out.push_str("    </edges>\n  </graph>\n</gexf>\n");
        }
        ExportFormat::Graphml => {
            out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
            out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
            out.push_str(
                "  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"double\"/>\n",
            );
            if communities.is_some() {
                out.push_str("  <key id=\"community\" for=\"node\" attr.name=\"community\" attr.type=\"string\"/>\n");
            }
            if positions.is_some() {
                out.push_str(
                    "  <key id=\"x\" for=\"node\" attr.name=\"x\" attr.type=\"double\"/>\n",
                );
                out.push_str(
                    "  <key id=\"y\" for=\"node\" attr.name=\"y\" attr.type=\"double\"/>\n",
                );
            }
            out.push_str("  <graph edgedefault=\"undirected\">\n");
            for (idx, id) in g.entity_ids().iter().enumerate() {
                let _ = write!(out, "    <node id=\"{}\">", idx);
                let _ = write!(out, "<data key=\"label\">{}</data>", xml_escape(id));
                if let Some(c) = communities {
                    let _ = write!(
                        out,
                        "<data key=\"community\">{}</data>",
                        xml_escape(&c[idx])
                    );
                }
                if let Some(p) = positions {
                    let _ = write!(out, "<data key=\"x\">{}</data>", p[idx].0);
                    let _ = write!(out, "<data key=\"y\">{}</data>", p[idx].1);
                }
                out.push_str("</node>\n");
            }
            for &(i, j, w) in g.edges() {
                let _ = write!(
                    out,
                    "    <edge source=\"{i}\" target=\"{j}\"><data key=\"weight\">{w}</data></edge>\n"
                );
            }
            out.push_str("  </graph>\n</graphml>\n");
        }
        ExportFormat::Dot => {
            out.push_str("graph coopetition {\n");
            for (idx, id) in g.entity_ids().iter().enumerate() {
                let mut attrs = format!("label=\"{}\"", id.replace('"', "\\\""));
                if let Some(c) = communities {
                    let _ = write!(attrs, ", community=\"{}\"", c[idx].replace('"', "\\\""));
                }
                if let Some(p) = positions {
                    let _ = write!(attrs, ", x=\"{}\", y=\"{}\"", p[idx].0, p[idx].1);
                }
                let _ = write!(out, "  n{idx} [{attrs}];\n");
            }
            for &(i, j, w) in g.edges() {
                let _ = write!(out, "  n{i} -- n{j} [weight=\"{w}\"];\n");
            }
            out.push_str("}\n");
        }
        ExportFormat::Jsonl => {
            // one record per line: {"node": ...} then {"edge": ...}
            for (idx, id) in g.entity_ids().iter().enumerate() {
                let mut rec = serde_json::Map::new();
                rec.insert("node".into(), serde_json::json!(idx));
                rec.insert("id".into(), serde_json::json!(id));
                if let Some(c) = communities {
                    rec.insert("community".into(), serde_json::json!(c[idx]));
                }
                if let Some(p) = positions {
                    rec.insert("x".into(), serde_json::json!(p[idx].0));
                    rec.insert("y".into(), serde_json::json!(p[idx].1));
                }
                let _ = write!(out, "{}\n", serde_json::Value::Object(rec));
            }
            for &(i, j, w) in g.edges() {
                let _ = write!(
                    out,
                    "{}\n",
                    serde_json::json!({"edge": [i, j], "weight": w})
                );
            }
        }
    }
    Ok(out.into_bytes())
}
