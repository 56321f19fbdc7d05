//! Deterministic offline labels from term frequency and inverse document
//! frequency over a bundle's member records.
//!
//! A term's score is its total count across the records times
//! `ln((1 + N) / (1 + df)) + 1`, with `N` records and `df` records containing
//! it. Terms are ranked by score descending, then alphabetically; the label is
//! the top three joined by spaces.

use std::collections::{BTreeMap, BTreeSet};

use super::client::{ClientError, GenerationResponse, TextGenerator};
use super::{ConceptLabel, LabelSource, PromptBundle};
use crate::error::{Error, Result};
use crate::graph::tokenize;

const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any", "are", "as", "at",
    "based", "be", "been", "before", "being", "below", "between", "both", "but", "by", "can", "could", "did", "do",
    "does", "doing", "down", "during", "each", "et", "few", "for", "from", "further", "had", "has", "have",
    "having", "he", "her", "here", "hers", "him", "his", "how", "however", "i", "if", "in", "into", "is", "it",
    "its", "itself", "may", "more", "most", "new", "no", "nor", "not", "of", "off", "on", "once", "only", "or",
    "other", "our", "ours", "out", "over", "own", "paper", "propose", "proposed", "same", "she", "should", "show",
    "so", "some", "such", "than", "that", "the", "their", "theirs", "them", "then", "there", "these", "they",
    "this", "those", "through", "to", "too", "under", "until", "up", "use", "used", "using", "very", "via", "was",
    "we", "were", "what", "when", "where", "which", "while", "who", "whom", "why", "will", "with", "within",
    "without", "would", "you", "your",
];

fn scorable(term: &str) -> bool {
    term.chars().any(|c| c.is_alphabetic()) && STOPWORDS.binary_search(&term).is_err()
}

/// Ranked `(term, score)` pairs over the member records.
pub fn stub_terms(bundle: &PromptBundle) -> Vec<(String, f64)> {
    let docs: Vec<Vec<String>> = bundle
        .members
        .iter()
        .map(|m| {
            tokenize(&format!("{} {}", m.title, m.abstract_text))
                .filter(|t| scorable(t))
                .collect()
        })
        .collect();
    let n = docs.len() as f64;
    let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in &docs {
        for t in doc {
            *tf.entry(t).or_default() += 1;
        }
        for t in doc.iter().map(String::as_str).collect::<BTreeSet<_>>() {
            *df.entry(t).or_default() += 1;
        }
    }
    let mut scored: Vec<(String, f64)> = tf
        .into_iter()
        .map(|(t, c)| {
            let idf = ((1.0 + n) / (1.0 + df[t] as f64)).ln() + 1.0;
            (t.to_string(), c as f64 * idf)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored
}

pub fn stub_client(bundle: &PromptBundle) -> Result<ConceptLabel> {
    let terms = stub_terms(bundle);
    if terms.is_empty() {
        return Err(Error::NoScorableTerms);
    }
    let text = terms.iter().take(3).map(|(t, _)| t.as_str()).collect::<Vec<_>>().join(" ");
    Ok(ConceptLabel {
        text,
        source: LabelSource::Stub,
        token_logprobs: None,
    })
}

#[derive(Clone, Copy, Debug, Default)]
pub struct StubGenerator;

impl TextGenerator for StubGenerator {
    fn generate(&self, bundle: &PromptBundle, _max_tokens: usize) -> std::result::Result<GenerationResponse, ClientError> {
        stub_client(bundle)
            .map(|l| GenerationResponse {
                text: l.text,
                token_logprobs: None,
            })
            .map_err(|e| ClientError::Permanent(e.to_string()))
    }

    fn source(&self) -> LabelSource {
        LabelSource::Stub
    }
}
