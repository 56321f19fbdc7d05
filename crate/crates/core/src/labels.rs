//! Gold hierarchy labels: per level, the cluster(s) of every base paper.
//!
//! File format, one record per line:
//!
//! ```text
//! level<TAB>paper-id<TAB>cluster-id[,cluster-id...]
//! ```
//!
//! Levels are numbered from 1 (finest). Only level 1 may list several clusters
//! for a paper.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::CitationGraph;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelLabels {
    names: Vec<String>,
    /// Per paper, sorted cluster indices into `names`.
    assignment: Vec<Vec<usize>>,
}

impl LevelLabels {
    pub fn new(names: Vec<String>, mut assignment: Vec<Vec<usize>>) -> Result<Self> {
        for (p, a) in assignment.iter_mut().enumerate() {
            a.sort_unstable();
            a.dedup();
            if a.is_empty() {
                return Err(Error::Labels(format!("paper {p} has no cluster")));
            }
            if a.iter().any(|&c| c >= names.len()) {
                return Err(Error::Labels(format!("paper {p} names an unknown cluster")));
            }
        }
        Ok(Self { names, assignment })
    }

    /// Single cluster per paper; cluster names are the decimal indices.
    pub fn from_partition(assignment: &[usize]) -> Result<Self> {
        let k = assignment.iter().max().map_or(0, |m| m + 1);
        Self::new(
            (0..k).map(|c| c.to_string()).collect(),
            assignment.iter().map(|&c| vec![c]).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn cluster_count(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn clusters_of(&self, paper: usize) -> &[usize] {
        &self.assignment[paper]
    }

    pub fn assignment(&self) -> &[Vec<usize>] {
        &self.assignment
    }

    /// True when the two papers share at least one cluster.
    pub fn same(&self, u: usize, v: usize) -> bool {
        shares(&self.assignment[u], &self.assignment[v])
    }

    /// Papers of every cluster, ascending; clusters without papers are omitted.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.names.len()];
        for (p, cs) in self.assignment.iter().enumerate() {
            for &c in cs {
                out[c].push(p);
            }
        }
        out.retain(|c| !c.is_empty());
        out
    }
}

pub(crate) fn shares(a: &[usize], b: &[usize]) -> bool {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Equal => return true,
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
        }
    }
    false
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoldHierarchyLabels {
    levels: Vec<LevelLabels>,
}

impl GoldHierarchyLabels {
    pub fn new(levels: Vec<LevelLabels>) -> Result<Self> {
        let Some(first) = levels.first() else {
            return Err(Error::Labels("no levels".into()));
        };
        let n = first.len();
        for (i, l) in levels.iter().enumerate() {
            if l.len() != n {
                return Err(Error::Labels(format!(
                    "level {} labels {} papers, expected {n}",
                    i + 1,
                    l.len()
                )));
            }
            if i > 0 && l.assignment.iter().any(|a| a.len() != 1) {
                return Err(Error::Labels(format!(
                    "level {} assigns a paper to several clusters",
                    i + 1
                )));
            }
        }
        Ok(Self { levels })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn num_papers(&self) -> usize {
        self.levels[0].len()
    }

    /// Labels of 1-based `level`.
    pub fn level(&self, level: usize) -> &LevelLabels {
        &self.levels[level - 1]
    }

    pub fn levels(&self) -> &[LevelLabels] {
        &self.levels
    }

    pub fn load(path: &Path, graph: &CitationGraph) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut per_level: Vec<(Vec<String>, HashMap<String, usize>, Vec<Vec<usize>>)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::parse(path, line_no, "expected `level<TAB>paper<TAB>clusters`"));
            }
            let level: usize = fields[0]
                .parse()
                .ok()
                .filter(|&l| l >= 1)
                .ok_or_else(|| Error::parse(path, line_no, "bad level"))?;
            let paper = graph
                .index_of(fields[1])
                .ok_or_else(|| Error::UnknownNode(fields[1].to_string()))?;
            while per_level.len() < level {
                per_level.push((Vec::new(), HashMap::new(), vec![Vec::new(); graph.len()]));
            }
            let (names, index, assignment) = &mut per_level[level - 1];
            if !assignment[paper].is_empty() {
                return Err(Error::parse(path, line_no, "paper labeled twice at this level"));
            }
            for name in fields[2].split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let c = *index.entry(name.to_string()).or_insert_with(|| {
                    names.push(name.to_string());
                    names.len() - 1
                });
                assignment[paper].push(c);
            }
            if assignment[paper].is_empty() {
                return Err(Error::parse(path, line_no, "no cluster id"));
            }
        }
        let levels = per_level
            .into_iter()
            .enumerate()
            .map(|(l, (names, _, assignment))| {
                if let Some(p) = assignment.iter().position(Vec::is_empty) {
                    return Err(Error::Labels(format!(
                        "paper `{}` unlabeled at level {}",
                        graph.node(p).id,
                        l + 1
                    )));
                }
                LevelLabels::new(names, assignment)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(levels)
    }

    pub fn write(&self, path: &Path, graph: &CitationGraph) -> Result<()> {
        let mut out = String::new();
        for (l, labels) in self.levels.iter().enumerate() {
            for (p, cs) in labels.assignment.iter().enumerate() {
                let names: Vec<&str> = cs.iter().map(|&c| labels.names[c].as_str()).collect();
                out.push_str(&format!("{}\t{}\t{}\n", l + 1, graph.node(p).id, names.join(",")));
            }
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}
