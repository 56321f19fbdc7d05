//! The final topic tree: assembly from a labeled hierarchy, validation, and
//! JSON / DOT export.
//!
//! Topic `t{level}-{index}` is cluster `index` of the level-`level`
//! clustering. Papers are node metadata, not tree nodes, so a paper shared by
//! two level-1 clusters is listed under both leaves.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hiclust::Hierarchy;
use crate::verbalize::{LabelSource, TopicLabels};

pub const ROOT_ID: &str = "root";
const FORMAT: &str = "citetax-taxonomy";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicNode {
    pub id: String,
    pub level: usize,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<LabelSource>,
    /// Paper ids under this topic.
    pub members: Vec<String>,
    /// Child topic ids, in tree order.
    pub children: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxonomyTree {
    pub root: String,
    /// Leaves first, then level by level up to the root.
    pub nodes: Vec<TopicNode>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaxonomyFile {
    format: String,
    version: u32,
    root: String,
    nodes: Vec<TopicNode>,
}

pub fn topic_id(level: usize, index: usize) -> String {
    format!("t{level}-{index}")
}

/// Builds the tree. Every cluster of every level needs a label; a synthetic
/// root labeled with `instruction` is added when the top level has more than
/// one node.
pub fn assemble(
    h: &Hierarchy,
    labels: &TopicLabels,
    instruction: &str,
    paper_ids: &[String],
) -> Result<TaxonomyTree> {
    h.validate()?;
    if paper_ids.len() != h.base().len() {
        return Err(Error::DimensionMismatch {
            expected: h.base().len(),
            found: paper_ids.len(),
        });
    }
    let mut nodes = Vec::new();
    for level in 1..h.num_levels() {
        let g = &h.levels[level];
        for index in 0..g.len() {
            let label = labels.get(&(level, index)).ok_or(Error::MissingLabel { level, cluster: index })?;
            let children = if level == 1 {
                Vec::new()
            } else {
                h.assignments[level - 1].clusters()[index]
                    .iter()
                    .map(|&c| topic_id(level - 1, c))
                    .collect()
            };
            nodes.push(TopicNode {
                id: topic_id(level, index),
                level,
                label: label.text.clone(),
                source: Some(label.source),
                members: g.members(index).iter().map(|&p| paper_ids[p].clone()).collect(),
                children,
            });
        }
    }
    let top = h.num_levels() - 1;
    let top_count = h.top().len();
    let root = if top_count == 1 {
        topic_id(top, 0)
    } else {
        nodes.push(TopicNode {
            id: ROOT_ID.into(),
            level: top + 1,
            label: instruction.trim().to_string(),
            source: None,
            members: paper_ids.to_vec(),
            children: (0..top_count).map(|i| topic_id(top, i)).collect(),
        });
        ROOT_ID.into()
    };
    Ok(TaxonomyTree { root, nodes })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DuplicateId,
    UnknownChild,
    Root,
    Parent,
    Level,
    Members,
    EmptyLabel,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub node: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.node, self.detail)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn of_kind(&self, kind: ViolationKind) -> Vec<&Violation> {
        self.violations.iter().filter(|v| v.kind == kind).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

impl TaxonomyTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: &str) -> Option<&TopicNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Parent→child pairs in node order.
    pub fn edges(&self) -> Vec<(&str, &str)> {
        self.nodes
            .iter()
            .flat_map(|n| n.children.iter().map(move |c| (n.id.as_str(), c.as_str())))
            .collect()
    }

    /// Every violated invariant, each naming the node at fault.
    pub fn validate(&self) -> ValidationReport {
        let mut out = Vec::new();
        let mut push = |kind, node: &str, detail: String| {
            out.push(Violation {
                kind,
                node: node.to_string(),
                detail,
            })
        };
        let mut by_id: BTreeMap<&str, &TopicNode> = BTreeMap::new();
        for n in &self.nodes {
            if by_id.insert(n.id.as_str(), n).is_some() {
                push(ViolationKind::DuplicateId, &n.id, "id is used twice".into());
            }
        }
        let mut parents: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for n in &self.nodes {
            for c in &n.children {
                match by_id.get(c.as_str()) {
                    None => push(ViolationKind::UnknownChild, &n.id, format!("child `{c}` does not exist")),
                    Some(child) => {
                        parents.entry(c.as_str()).or_default().push(n.id.as_str());
                        if n.level != child.level + 1 {
                            push(
                                ViolationKind::Level,
                                c,
                                format!("level {} under parent `{}` at level {}", child.level, n.id, n.level),
                            );
                        }
                    }
                }
            }
        }
        if !by_id.contains_key(self.root.as_str()) {
            push(ViolationKind::Root, &self.root, "root id names no node".into());
        }
        for n in &self.nodes {
            let p = parents.get(n.id.as_str()).map_or(&[][..], Vec::as_slice);
            if n.id == self.root {
                if !p.is_empty() {
                    push(ViolationKind::Root, &n.id, format!("root has parent `{}`", p[0]));
                }
            } else if p.is_empty() {
                push(ViolationKind::Root, &n.id, "second root: node has no parent".into());
            } else if p.len() > 1 {
                push(ViolationKind::Parent, &n.id, format!("{} parents: {}", p.len(), p.join(", ")));
            }
            if n.label.trim().is_empty() {
                push(ViolationKind::EmptyLabel, &n.id, "label is empty".into());
            }
            if n.children.is_empty() {
                if n.level != 1 {
                    push(ViolationKind::Level, &n.id, format!("leaf at level {}", n.level));
                }
                if n.members.is_empty() {
                    push(ViolationKind::Members, &n.id, "leaf has no papers".into());
                }
            } else {
                let own: BTreeSet<&str> = n.members.iter().map(String::as_str).collect();
                let union: BTreeSet<&str> = n
                    .children
                    .iter()
                    .filter_map(|c| by_id.get(c.as_str()))
                    .flat_map(|c| c.members.iter().map(String::as_str))
                    .collect();
                if own != union || own.len() != n.members.len() {
                    push(
                        ViolationKind::Members,
                        &n.id,
                        "members differ from the union of its children".into(),
                    );
                }
            }
        }
        ValidationReport { violations: out }
    }

    fn check(&self) -> Result<()> {
        let report = self.validate();
        if report.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidTaxonomy(report.to_string()))
        }
    }

    /// Versioned JSON; fields in declaration order, nodes and children in
    /// tree order.
    pub fn to_json(&self) -> Result<String> {
        self.check()?;
        let file = TaxonomyFile {
            format: FORMAT.into(),
            version: VERSION,
            root: self.root.clone(),
            nodes: self.nodes.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TaxonomyFile = serde_json::from_str(text)?;
        if file.format != FORMAT || file.version != VERSION {
            return Err(Error::InvalidTaxonomy(format!(
                "unsupported taxonomy file {} v{}",
                file.format, file.version
            )));
        }
        Ok(Self {
            root: file.root,
            nodes: file.nodes,
        })
    }

    pub fn to_dot(&self) -> Result<String> {
        self.check()?;
        let q = |s: &str| {
            let mut o = String::with_capacity(s.len() + 2);
            o.push('"');
            for ch in s.chars() {
                match ch {
                    '"' => o.push_str("\\\""),
                    '\\' => o.push_str("\\\\"),
                    '\n' => o.push_str("\\n"),
                    c => o.push(c),
                }
            }
            o.push('"');
            o
        };
        let mut s = String::from("digraph taxonomy {\n");
        for n in &self.nodes {
            let text = format!("{}\n({} papers)", n.label, n.members.len());
            s.push_str(&format!("  {} [label={}];\n", q(&n.id), q(&text)));
        }
        for (p, c) in self.edges() {
            s.push_str(&format!("  {} -> {};\n", q(p), q(c)));
        }
        s.push_str("}\n");
        Ok(s)
    }

    pub fn export_json(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn export_dot(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_dot()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}
