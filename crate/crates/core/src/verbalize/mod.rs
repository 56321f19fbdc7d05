//! Bottom-up topic labels for every cluster of a hierarchy.
//!
//! A cluster is addressed by `(level, index)`: cluster `index` of the
//! clustering of level `level`, which is node `index` of level graph
//! `level + 1`.

mod client;
mod http;
mod projector;
mod stub;

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::PaperNode;
use crate::hiclust::Hierarchy;

pub use client::{ClientError, GenerationResponse, TextGenerator};
pub use http::{HttpConfig, HttpGenerator};
pub use projector::{project_cluster, ProjectorParams};
pub use stub::{stub_client, stub_terms, StubGenerator};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberRecord {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
}

impl MemberRecord {
    fn line(&self, rank: usize) -> String {
        let clean = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
        let (t, a) = (clean(&self.title), clean(&self.abstract_text));
        let body = match (t.is_empty(), a.is_empty()) {
            (false, false) => format!("{t}. {a}"),
            (false, true) => t,
            _ => a,
        };
        format!("[{rank}] {body}\n")
    }
}

/// Everything sent to the generator for one cluster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub instruction: String,
    pub level: usize,
    pub index: usize,
    /// Number of base papers in the cluster.
    pub size: usize,
    pub representative: String,
    pub child_labels: Vec<String>,
    /// Included records, densest first.
    pub members: Vec<MemberRecord>,
    pub truncated: bool,
    /// Character budget of the rendered prompt.
    pub budget: usize,
    /// Whitespace-token counts of the instruction and the included records.
    pub instruction_tokens: usize,
    pub member_tokens: usize,
    /// Projected cluster embedding; metadata only, never rendered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projected: Option<Vec<f64>>,
}

const CLOSING: &str = "Respond with one concise topic label.\n";

impl PromptBundle {
    fn head(instruction: &str, level: usize, size: usize, representative: &str, children: &[String]) -> String {
        let mut s = format!(
            "Instruction: {}\nCluster: level {level}, {size} papers, representative {representative}\n",
            instruction.trim()
        );
        if !children.is_empty() {
            s.push_str("Subtopics:\n");
            for c in children {
                s.push_str(&format!("- {c}\n"));
            }
        }
        s.push_str("Papers:\n");
        s
    }

    /// The prompt text; byte-stable for fixed inputs.
    pub fn render(&self) -> String {
        let mut s = Self::head(&self.instruction, self.level, self.size, &self.representative, &self.child_labels);
        for (i, m) in self.members.iter().enumerate() {
            s.push_str(&m.line(i + 1));
        }
        s.push_str(CLOSING);
        s
    }
}

/// Base papers under cluster `(level, index)`.
pub fn coarsen_members(h: &Hierarchy, level: usize, index: usize) -> Result<Vec<usize>> {
    if level == 0 || level >= h.num_levels() {
        return Err(Error::OutOfRange(format!("no clustering at level {level}")));
    }
    let g = &h.levels[level];
    if index >= g.len() {
        return Err(Error::OutOfRange(format!("level {level} has no cluster {index}")));
    }
    Ok(g.members(index).to_vec())
}

/// Clusters of level `level - 1` that make up cluster `(level, index)`.
pub fn children(h: &Hierarchy, level: usize, index: usize) -> Result<Vec<usize>> {
    coarsen_members(h, level, index)?;
    if level == 1 {
        return Ok(Vec::new());
    }
    Ok(h.assignments[level - 1].clusters()[index].clone())
}

pub fn build_prompt(
    h: &Hierarchy,
    papers: &[PaperNode],
    level: usize,
    index: usize,
    instruction: &str,
    child_labels: &[String],
    budget: usize,
) -> Result<PromptBundle> {
    if instruction.trim().is_empty() {
        return Err(Error::Config("instruction must not be empty".into()));
    }
    let members = coarsen_members(h, level, index)?;
    if papers.len() != h.base().len() {
        return Err(Error::DimensionMismatch {
            expected: h.base().len(),
            found: papers.len(),
        });
    }
    let expected_children = children(h, level, index)?.len();
    if child_labels.len() != expected_children {
        return Err(Error::MissingLabel { level: level - 1, cluster: index });
    }
    let density = &h.densities[0];
    let mut ordered = members.clone();
    ordered.sort_by(|&a, &b| density[b].total_cmp(&density[a]).then(a.cmp(&b)));
    let representative = papers[ordered[0]].id.clone();

    let head = PromptBundle::head(instruction, level, members.len(), &representative, child_labels);
    let fixed = head.chars().count() + CLOSING.chars().count();
    if fixed > budget {
        return Err(Error::BudgetTooSmall { budget, needed: fixed });
    }
    let mut used = fixed;
    let mut included = Vec::new();
    let mut truncated = false;
    for &p in &ordered {
        let node = &papers[p];
        let record = MemberRecord {
            id: node.id.clone(),
            title: node.title.clone(),
            abstract_text: node.abstract_text.clone(),
        };
        let len = record.line(included.len() + 1).chars().count();
        if used + len > budget {
            truncated = true;
            break;
        }
        used += len;
        included.push(record);
    }
    let words = |s: &str| s.split_whitespace().count();
    let member_tokens = included.iter().map(|m| words(&m.title) + words(&m.abstract_text)).sum();
    Ok(PromptBundle {
        instruction: instruction.trim().to_string(),
        level,
        index,
        size: members.len(),
        representative,
        child_labels: child_labels.to_vec(),
        members: included,
        truncated,
        budget,
        instruction_tokens: words(instruction),
        member_tokens,
        projected: None,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Client,
    Stub,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConceptLabel {
    pub text: String,
    pub source: LabelSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_logprobs: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerbalizeConfig {
    /// Character budget per prompt.
    pub budget: usize,
    /// Longest label, in whitespace tokens.
    pub max_tokens: usize,
    /// Attempts per node, including the first.
    pub attempts: usize,
    /// First retry delay; doubles on every further retry.
    pub backoff_ms: u64,
    /// Requests in flight within one level.
    pub concurrency: usize,
}

impl Default for VerbalizeConfig {
    fn default() -> Self {
        Self {
            budget: 6000,
            max_tokens: 16,
            attempts: 3,
            backoff_ms: 500,
            concurrency: 4,
        }
    }
}

/// First non-empty line, trimmed, cut to `max_tokens` whitespace tokens.
pub fn clean_label(text: &str, max_tokens: usize) -> Option<String> {
    let line = text.lines().map(str::trim).find(|l| !l.is_empty())?;
    Some(line.split_whitespace().take(max_tokens.max(1)).collect::<Vec<_>>().join(" "))
}

/// One generated label and the number of attempts it took.
pub fn verbalize_node(
    bundle: &PromptBundle,
    client: &dyn TextGenerator,
    config: &VerbalizeConfig,
) -> Result<(ConceptLabel, usize)> {
    let attempts = config.attempts.max(1);
    let mut delay = config.backoff_ms;
    for attempt in 1..=attempts {
        match client.generate(bundle, config.max_tokens) {
            Ok(resp) => {
                let text = clean_label(&resp.text, config.max_tokens)
                    .ok_or_else(|| Error::EmptyResponse(format!("cluster ({}, {})", bundle.level, bundle.index)))?;
                return Ok((
                    ConceptLabel {
                        text,
                        source: client.source(),
                        token_logprobs: resp.token_logprobs,
                    },
                    attempt,
                ));
            }
            Err(ClientError::Transient(m)) if attempt < attempts => {
                log::warn!("attempt {attempt} for cluster ({}, {}) failed: {m}", bundle.level, bundle.index);
                if delay > 0 {
                    std::thread::sleep(Duration::from_millis(delay));
                }
                delay = delay.saturating_mul(2);
            }
            Err(ClientError::Transient(m)) | Err(ClientError::Permanent(m)) => return Err(Error::Client(m)),
        }
    }
    unreachable!("the final attempt always returns")
}

/// Labels keyed by `(level, index)`.
pub type TopicLabels = BTreeMap<(usize, usize), ConceptLabel>;

const LABELS_FORMAT: &str = "citetax-labels";
const LABELS_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelRecord {
    level: usize,
    index: usize,
    #[serde(flatten)]
    label: ConceptLabel,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelFile {
    format: String,
    version: u32,
    instruction: String,
    labels: Vec<LabelRecord>,
}

/// Labels and the instruction they were generated under, as pretty JSON in
/// `(level, index)` order.
pub fn labels_to_json(labels: &TopicLabels, instruction: &str) -> Result<String> {
    let file = LabelFile {
        format: LABELS_FORMAT.into(),
        version: LABELS_VERSION,
        instruction: instruction.into(),
        labels: labels
            .iter()
            .map(|(&(level, index), label)| LabelRecord {
                level,
                index,
                label: label.clone(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file)?;
    s.push('\n');
    Ok(s)
}

pub fn labels_from_json(text: &str) -> Result<(TopicLabels, String)> {
    let file: LabelFile = serde_json::from_str(text)?;
    if file.format != LABELS_FORMAT || file.version != LABELS_VERSION {
        return Err(Error::Config(format!("unsupported labels file {} v{}", file.format, file.version)));
    }
    let mut labels = TopicLabels::new();
    for r in file.labels {
        if labels.insert((r.level, r.index), r.label).is_some() {
            return Err(Error::Config(format!("cluster ({}, {}) labeled twice", r.level, r.index)));
        }
    }
    Ok((labels, file.instruction))
}

pub fn save_labels(labels: &TopicLabels, instruction: &str, path: &Path) -> Result<()> {
    std::fs::write(path, labels_to_json(labels, instruction)?).map_err(|e| Error::io(path, e))
}

pub fn load_labels(path: &Path) -> Result<(TopicLabels, String)> {
    labels_from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

#[derive(Debug, thiserror::Error)]
#[error("labeling cluster ({level}, {index}) failed: {source}")]
pub struct VerbalizeFailure {
    pub level: usize,
    pub index: usize,
    pub source: Error,
    /// Labels finished before the failure.
    pub partial: TopicLabels,
}

#[derive(Serialize)]
struct TranscriptEntry<'a> {
    level: usize,
    index: usize,
    prompt: String,
    bundle: &'a PromptBundle,
    attempts: usize,
    label: &'a ConceptLabel,
}

/// Append-only JSON-lines log of prompts and labels.
pub struct Transcript {
    file: Mutex<File>,
}

impl Transcript {
    pub fn open(path: &Path) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(Self { file: Mutex::new(file) })
    }

    fn record(&self, bundle: &PromptBundle, label: &ConceptLabel, attempts: usize) -> Result<()> {
        let entry = TranscriptEntry {
            level: bundle.level,
            index: bundle.index,
            prompt: bundle.render(),
            bundle,
            attempts,
            label,
        };
        let mut line = serde_json::to_string(&entry)?;
        line.push('\n');
        let mut f = self.file.lock().expect("transcript lock");
        f.write_all(line.as_bytes()).map_err(|e| Error::io(Path::new("<transcript>"), e))
    }
}

/// Optional extras for [`verbalize_hierarchy`].
#[derive(Default)]
pub struct VerbalizeExtras<'a> {
    pub projector: Option<&'a ProjectorParams>,
    pub transcript: Option<&'a Transcript>,
}

/// Labels every cluster, finest level first, feeding child labels into the
/// parent prompts. Within a level, requests run on up to
/// `config.concurrency` threads and results merge in index order.
pub fn verbalize_hierarchy(
    h: &Hierarchy,
    papers: &[PaperNode],
    instruction: &str,
    client: &dyn TextGenerator,
    config: &VerbalizeConfig,
    extras: VerbalizeExtras<'_>,
) -> std::result::Result<TopicLabels, VerbalizeFailure> {
    let mut labels = TopicLabels::new();
    for level in 1..h.num_levels() {
        let count = h.levels[level].len();
        let fail = |index, source, partial| VerbalizeFailure {
            level,
            index,
            source,
            partial,
        };
        let mut bundles = Vec::with_capacity(count);
        for index in 0..count {
            let child_labels: Vec<String> = match children(h, level, index) {
                Ok(c) => c.iter().map(|&k| labels[&(level - 1, k)].text.clone()).collect(),
                Err(e) => return Err(fail(index, e, labels)),
            };
            match build_prompt(h, papers, level, index, instruction, &child_labels, config.budget) {
                Ok(mut b) => {
                    if let Some(p) = extras.projector {
                        match project_cluster(h.levels[level].features().row(index), p) {
                            Ok(v) => b.projected = Some(v),
                            Err(e) => return Err(fail(index, e, labels)),
                        }
                    }
                    bundles.push(b);
                }
                Err(e) => return Err(fail(index, e, labels)),
            }
        }
        let results: Vec<Mutex<Option<Result<(ConceptLabel, usize)>>>> = (0..count).map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = config.concurrency.clamp(1, count.max(1));
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= count {
                        break;
                    }
                    let r = verbalize_node(&bundles[i], client, config);
                    *results[i].lock().expect("result slot") = Some(r);
                });
            }
        });
        let mut first_error = None;
        for (index, slot) in results.into_iter().enumerate() {
            match slot.into_inner().expect("result slot").expect("every node ran") {
                Ok((label, attempts)) => {
                    if let Some(t) = extras.transcript {
                        if let Err(e) = t.record(&bundles[index], &label, attempts) {
                            first_error.get_or_insert((index, e));
                        }
                    }
                    labels.insert((level, index), label);
                }
                Err(e) => {
                    first_error.get_or_insert((index, e));
                }
            }
        }
        if let Some((index, e)) = first_error {
            return Err(fail(index, e, labels));
        }
    }
    Ok(labels)
}
