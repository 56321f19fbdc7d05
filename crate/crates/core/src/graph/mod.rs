//! Citation graph ingestion, embeddings, and the per-level (hyper-)graph.
//!
//! Papers are addressed by string id in files and by their position in the
//! graph's node order everywhere else. Whenever a rule says "smaller id" it
//! means the smaller position.

mod embed;
mod io;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub use embed::{fallback_embed, tokenize, TextSource};
pub use io::{
    load_citation_graph, load_embeddings, read_edges, read_nodes, write_edges, write_embeddings,
    write_embeddings_binary, write_nodes, EMBEDDING_MAGIC,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperNode {
    pub id: String,
    #[serde(default)]
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
}

impl PaperNode {
    pub fn new(id: impl Into<String>, title: impl Into<String>, abstract_text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            title: title.into(),
            abstract_text: abstract_text.into(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::InvalidNode("empty id".into()));
        }
        if self.title.is_empty() && self.abstract_text.is_empty() {
            return Err(Error::InvalidNode(format!(
                "`{}` has neither title nor abstract",
                self.id
            )));
        }
        Ok(())
    }
}

/// Counts reported by ingestion.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub nodes: usize,
    pub edges: usize,
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CitationGraph {
    nodes: Vec<PaperNode>,
    /// Directed (citing, cited) pairs by node position, first-seen order.
    edges: Vec<(usize, usize)>,
    index: HashMap<String, usize>,
}

impl CitationGraph {
    /// Validates nodes, resolves edge endpoints, drops self-citations and
    /// duplicate edges.
    pub fn new<S: AsRef<str>>(
        nodes: Vec<PaperNode>,
        edges: impl IntoIterator<Item = (S, S)>,
    ) -> Result<(Self, IngestReport)> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            node.validate()?;
            if index.insert(node.id.clone(), i).is_some() {
                return Err(Error::DuplicateNode(node.id.clone()));
            }
        }
        let mut report = IngestReport {
            nodes: nodes.len(),
            ..IngestReport::default()
        };
        let mut seen = HashSet::new();
        let mut resolved = Vec::new();
        for (src, dst) in edges {
            let (src, dst) = (src.as_ref(), dst.as_ref());
            let s = *index
                .get(src)
                .ok_or_else(|| Error::DanglingEndpoint(src.to_string()))?;
            let d = *index
                .get(dst)
                .ok_or_else(|| Error::DanglingEndpoint(dst.to_string()))?;
            if s == d {
                report.self_loops_dropped += 1;
                continue;
            }
            if !seen.insert((s, d)) {
                report.duplicates_dropped += 1;
                continue;
            }
            resolved.push((s, d));
        }
        if report.self_loops_dropped > 0 {
            log::warn!("dropped {} self-citation edge(s)", report.self_loops_dropped);
        }
        report.edges = resolved.len();
        Ok((
            Self {
                nodes,
                edges: resolved,
                index,
            },
            report,
        ))
    }

    pub fn nodes(&self) -> &[PaperNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &PaperNode {
        &self.nodes[i]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Undirected, deduplicated edge list with `u < v`, sorted.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<_> = self
            .edges
            .iter()
            .map(|&(a, b)| (a.min(b), a.max(b)))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Node features, row-aligned with a graph's node order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    matrix: Matrix,
}

impl EmbeddingMatrix {
    pub fn new(matrix: Matrix) -> Result<Self> {
        if matrix.cols() < 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: matrix.cols(),
            });
        }
        if let Some(i) = (0..matrix.rows()).find(|&i| matrix.row(i).iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite(format!("embedding row {i}")));
        }
        Ok(Self { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> Matrix {
        self.matrix
    }
}

/// The level-`l` graph: hyper-nodes, undirected edges, features, and the base
/// papers each hyper-node coarsens to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LevelGraphRepr", into = "LevelGraphRepr")]
pub struct LevelGraph {
    level: usize,
    node_ids: Vec<String>,
    edges: Vec<(usize, usize)>,
    features: Matrix,
    members: Vec<Vec<usize>>,
    adjacency: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct LevelGraphRepr {
    level: usize,
    node_ids: Vec<String>,
    edges: Vec<(usize, usize)>,
    features: Matrix,
    members: Vec<Vec<usize>>,
}

impl TryFrom<LevelGraphRepr> for LevelGraph {
    type Error = Error;

    fn try_from(r: LevelGraphRepr) -> Result<Self> {
        LevelGraph::new(r.level, r.node_ids, r.edges, r.features, r.members)
    }
}

impl From<LevelGraph> for LevelGraphRepr {
    fn from(g: LevelGraph) -> Self {
        Self {
            level: g.level,
            node_ids: g.node_ids,
            edges: g.edges,
            features: g.features,
            members: g.members,
        }
    }
}

impl LevelGraph {
    /// Edges are normalized to `u < v`, sorted and deduplicated; self-loops are dropped.
    pub fn new(
        level: usize,
        node_ids: Vec<String>,
        edges: Vec<(usize, usize)>,
        features: Matrix,
        mut members: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if level == 0 {
            return Err(Error::WrongLevel("levels start at 1".into()));
        }
        let n = node_ids.len();
        if features.rows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: features.rows(),
            });
        }
        if members.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: members.len(),
            });
        }
        for m in &mut members {
            m.sort_unstable();
            m.dedup();
            if m.is_empty() {
                return Err(Error::EmptyCluster);
            }
        }
        if level == 1 && members.iter().any(|m| m.len() != 1) {
            return Err(Error::WrongLevel(
                "level-1 nodes must each coarsen to exactly one paper".into(),
            ));
        }
        let mut norm: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::NodeOutOfRange {
                    index: a.max(b),
                    len: n,
                });
            }
            if a != b {
                norm.push((a.min(b), a.max(b)));
            }
        }
        norm.sort_unstable();
        norm.dedup();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &norm {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(Self {
            level,
            node_ids,
            edges: norm,
            features,
            members,
            adjacency,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn members(&self, u: usize) -> &[usize] {
        &self.members[u]
    }

    pub fn all_members(&self) -> &[Vec<usize>] {
        &self.members
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.node_ids.iter().position(|x| x == id)
    }

    /// Undirected neighborhood of `u`, excluding `u`, ascending.
    pub fn neighbors(&self, u: usize) -> Result<&[usize]> {
        self.adjacency
            .get(u)
            .map(Vec::as_slice)
            .ok_or(Error::NodeOutOfRange {
                index: u,
                len: self.len(),
            })
    }

    pub fn neighbors_of(&self, id: &str) -> Result<&[usize]> {
        let u = self
            .index_of(id)
            .ok_or_else(|| Error::UnknownNode(id.to_string()))?;
        self.neighbors(u)
    }

    pub(crate) fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }
}

/// The level-1 graph: the undirected view of the citation graph with singleton members.
pub fn init_level_graph(graph: &CitationGraph, features: &EmbeddingMatrix) -> Result<LevelGraph> {
    if features.rows() != graph.len() {
        return Err(Error::DimensionMismatch {
            expected: graph.len(),
            found: features.rows(),
        });
    }
    LevelGraph::new(
        1,
        graph.nodes().iter().map(|n| n.id.clone()).collect(),
        graph.undirected_edges(),
        features.matrix().clone(),
        (0..graph.len()).map(|i| vec![i]).collect(),
    )
}
