//! Cluster and aggregate operators plus the level-by-level hierarchy driver.

mod aggregate;
mod hard;
mod oracle;
mod soft;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::{EncoderParams, LevelScorer, Scope};
use crate::error::{Error, Result};
use crate::graph::{init_level_graph, CitationGraph, EmbeddingMatrix, LevelGraph};
use crate::matrix::Matrix;

pub use aggregate::{aggregate, lift_edges, representative};
pub use hard::hard_cluster;
pub use oracle::OracleScorer;
pub use soft::{candidate_clusters, soft_cluster_level1};

/// Clusters over the nodes of one level. Members are ascending and clusters
/// are ordered by smallest member, then lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSet {
    level: usize,
    clusters: Vec<Vec<usize>>,
    overlap_allowed: bool,
}

impl ClusterSet {
    pub fn new(level: usize, mut clusters: Vec<Vec<usize>>, overlap_allowed: bool) -> Self {
        for c in &mut clusters {
            c.sort_unstable();
            c.dedup();
        }
        clusters.sort();
        Self {
            level,
            clusters,
            overlap_allowed,
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn overlap_allowed(&self) -> bool {
        self.overlap_allowed
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Checks the structural invariants against a level of `n` nodes.
    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidTaxonomy(m));
        let mut seen = vec![0usize; n];
        for c in &self.clusters {
            if c.is_empty() {
                return Err(Error::EmptyCluster);
            }
            for &v in c {
                if v >= n {
                    return Err(Error::NodeOutOfRange { index: v, len: n });
                }
                seen[v] += 1;
            }
        }
        if let Some(v) = seen.iter().position(|&k| k == 0) {
            return bad(format!("level {} node {v} is in no cluster", self.level));
        }
        if self.overlap_allowed {
            for (i, a) in self.clusters.iter().enumerate() {
                for (j, b) in self.clusters.iter().enumerate() {
                    if i != j && a.len() <= b.len() && a.iter().all(|x| b.binary_search(x).is_ok()) {
                        return bad(format!("level {} cluster {i} lies inside cluster {j}", self.level));
                    }
                }
            }
        } else if seen.iter().any(|&k| k > 1) {
            return bad(format!("level {} clusters overlap", self.level));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HierarchyConfig {
    /// Probability a partner must exceed to join a level-1 candidate.
    pub p_tau: f64,
    pub scope: Scope,
    /// Stop once a level has at most this many nodes.
    pub root_size: usize,
    /// Highest level number built.
    pub max_levels: usize,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            p_tau: 0.5,
            scope: Scope::Neighbors,
            root_size: 3,
            max_levels: 4,
        }
    }
}

impl HierarchyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.p_tau) {
            return Err(Error::Config(format!("p_tau must lie in [0, 1), got {}", self.p_tau)));
        }
        if self.max_levels < 2 {
            return Err(Error::Config("max_levels must be at least 2".into()));
        }
        if self.root_size == 0 {
            return Err(Error::Config("root_size must be positive".into()));
        }
        Ok(())
    }
}

/// Level graphs 1..=L and, for each level but the last, the clustering that
/// produced the next one together with that level's scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hierarchy {
    pub levels: Vec<LevelGraph>,
    pub assignments: Vec<ClusterSet>,
    pub densities: Vec<Vec<f64>>,
    pub embeddings: Vec<Matrix>,
    pub config: HierarchyConfig,
}

const DUMP_FORMAT: &str = "citetax-hierarchy";
const DUMP_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct HierarchyFile {
    format: String,
    version: u32,
    paper_ids: Vec<String>,
    hierarchy: Hierarchy,
}

impl Hierarchy {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn base(&self) -> &LevelGraph {
        &self.levels[0]
    }

    pub fn top(&self) -> &LevelGraph {
        self.levels.last().expect("hierarchy has a level")
    }

    /// Base papers each cluster of `level` covers.
    pub fn cluster_papers(&self, level: usize) -> Vec<Vec<usize>> {
        self.levels[level].all_members().to_vec()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidTaxonomy(m));
        if self.levels.is_empty() {
            return bad("no levels".into());
        }
        let l = self.levels.len();
        if self.assignments.len() != l - 1 || self.densities.len() != l - 1 || self.embeddings.len() != l - 1 {
            return bad("one clustering per level below the top is required".into());
        }
        let papers = self.levels[0].len();
        for (i, g) in self.levels.iter().enumerate() {
            if g.level() != i + 1 {
                return bad(format!("level {} is numbered {}", i + 1, g.level()));
            }
            let mut seen = vec![0usize; papers];
            for m in g.all_members() {
                for &p in m {
                    if p >= papers {
                        return Err(Error::NodeOutOfRange { index: p, len: papers });
                    }
                    seen[p] += 1;
                }
            }
            // Papers shared by level-1 clusters may stay shared further up.
            if seen.contains(&0) {
                return bad(format!("level {} loses a paper", i + 1));
            }
        }
        for (i, cs) in self.assignments.iter().enumerate() {
            let (g, next) = (&self.levels[i], &self.levels[i + 1]);
            cs.validate(g.len())?;
            if cs.overlap_allowed() && i > 0 {
                return bad(format!("level {} clusters overlap", i + 1));
            }
            if next.len() != cs.len() {
                return bad(format!("level {} size differs from its clustering", i + 2));
            }
            for (c, members) in cs.clusters().iter().enumerate() {
                let mut union: Vec<usize> = members.iter().flat_map(|&v| g.members(v).iter().copied()).collect();
                union.sort_unstable();
                union.dedup();
                if union != next.members(c) {
                    return bad(format!("level {} node {c} members differ from its cluster", i + 2));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self, paper_ids: &[String]) -> Result<String> {
        let file = HierarchyFile {
            format: DUMP_FORMAT.into(),
            version: DUMP_VERSION,
            paper_ids: paper_ids.to_vec(),
            hierarchy: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Returns the hierarchy and the paper ids it was written with.
    pub fn from_json(text: &str) -> Result<(Self, Vec<String>)> {
        let file: HierarchyFile = serde_json::from_str(text)?;
        if file.format != DUMP_FORMAT || file.version != DUMP_VERSION {
            return Err(Error::InvalidTaxonomy(format!(
                "unsupported hierarchy file {} v{}",
                file.format, file.version
            )));
        }
        file.hierarchy.validate()?;
        Ok((file.hierarchy, file.paper_ids))
    }

    pub fn save(&self, path: &Path, paper_ids: &[String]) -> Result<()> {
        fs::write(path, self.to_json(paper_ids)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<String>)> {
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Builds the level above `graph` from its clustering.
pub fn next_level(
    graph: &LevelGraph,
    clusters: &ClusterSet,
    h: &Matrix,
    densities: &[f64],
) -> Result<LevelGraph> {
    let level = graph.level() + 1;
    let members = clusters
        .clusters()
        .iter()
        .map(|c| c.iter().flat_map(|&v| graph.members(v).iter().copied()).collect())
        .collect();
    LevelGraph::new(
        level,
        (0..clusters.len()).map(|i| format!("L{level}-{i}")).collect(),
        lift_edges(graph, clusters),
        aggregate(clusters, h, densities)?,
        members,
    )
}

pub fn build_hierarchy(
    graph: &CitationGraph,
    x: &EmbeddingMatrix,
    params: &EncoderParams,
    config: &HierarchyConfig,
) -> Result<Hierarchy> {
    build_hierarchy_with(init_level_graph(graph, x)?, params, config)
}

/// The driver over any scorer. Level 1 is always clustered; above it a
/// clustering that merges nothing is discarded and the recursion ends.
pub fn build_hierarchy_with(
    base: LevelGraph,
    scorer: &dyn LevelScorer,
    config: &HierarchyConfig,
) -> Result<Hierarchy> {
    config.validate()?;
    if base.level() != 1 {
        return Err(Error::WrongLevel("the hierarchy starts at level 1".into()));
    }
    if base.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let mut h = Hierarchy {
        levels: vec![base],
        assignments: Vec::new(),
        densities: Vec::new(),
        embeddings: Vec::new(),
        config: config.clone(),
    };
    loop {
        let g = h.levels.last().expect("non-empty");
        let scores = scorer.score_level(g, config.scope)?;
        let clusters = if g.level() == 1 {
            soft_cluster_level1(g, &scores.probs, &scores.densities, config.p_tau)?
        } else {
            hard_cluster(g, &scores.probs)?
        };
        if g.level() > 1 && clusters.len() == g.len() {
            log::debug!("level {} made no progress; stopping", g.level());
            break;
        }
        let next = next_level(g, &clusters, &scores.embeddings, &scores.densities)?;
        log::debug!("level {} -> {} nodes", next.level(), next.len());
        h.assignments.push(clusters);
        h.densities.push(scores.densities);
        h.embeddings.push(scores.embeddings);
        let stop = next.len() <= config.root_size || next.level() >= config.max_levels;
        h.levels.push(next);
        if stop {
            break;
        }
    }
    Ok(h)
}
