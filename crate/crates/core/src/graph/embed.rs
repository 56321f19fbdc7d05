//! Deterministic hashed bag-of-tokens embedding for offline runs.

use serde::{Deserialize, Serialize};

use super::{CitationGraph, EmbeddingMatrix, PaperNode};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Which paper text feeds the encoder input.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextSource {
    #[default]
    TitleAbstract,
    AbstractOnly,
}

impl TextSource {
    pub fn text(self, node: &PaperNode) -> String {
        match self {
            TextSource::TitleAbstract => format!("{} {}", node.title, node.abstract_text),
            TextSource::AbstractOnly => node.abstract_text.clone(),
        }
    }
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over the token bytes, starting from a seed-derived basis.
fn bucket(token: &str, seed: u64, dim: usize) -> usize {
    let mut h = 0xcbf2_9ce4_8422_2325 ^ splitmix64(seed);
    for b in token.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    (splitmix64(h) % dim as u64) as usize
}

pub fn fallback_embed(
    graph: &CitationGraph,
    dim: usize,
    seed: u64,
    source: TextSource,
) -> Result<EmbeddingMatrix> {
    if dim < 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: dim,
        });
    }
    let mut m = Matrix::zeros(graph.len(), dim);
    for (i, node) in graph.nodes().iter().enumerate() {
        let text = source.text(node);
        let row = m.row_mut(i);
        let mut count = 0usize;
        for tok in tokenize(&text) {
            row[bucket(&tok, seed, dim)] += 1.0;
            count += 1;
        }
        if count == 0 {
            return Err(Error::ZeroText(node.id.clone()));
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        row.iter_mut().for_each(|v| *v /= norm);
    }
    EmbeddingMatrix::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(texts: &[(&str, &str)]) -> CitationGraph {
        let nodes = texts
            .iter()
            .enumerate()
            .map(|(i, (t, a))| PaperNode::new(format!("p{i}"), *t, *a))
            .collect();
        CitationGraph::new(nodes, Vec::<(&str, &str)>::new()).unwrap().0
    }

    const CORPUS: &[(&str, &str)] = &[
        ("Graph attention networks", "Attention over neighbors."),
        ("Graph attention networks", "Attention over neighbors."),
        ("Hierarchical clustering", "Density based clustering of citation graphs."),
        ("Taxonomy generation", "Large language models label topics."),
    ];

    #[test]
    fn identical_text_gives_identical_rows() {
        let x = fallback_embed(&graph(CORPUS), 16, 3, TextSource::TitleAbstract).unwrap();
        assert_eq!(x.row(0), x.row(1));
    }

    #[test]
    fn rows_are_unit_norm() {
        let x = fallback_embed(&graph(CORPUS), 8, 1, TextSource::TitleAbstract).unwrap();
        for i in 0..x.rows() {
            let n: f64 = x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-9);
        }
    }

    /// Independent re-statement of the hashed bag: token → bucket counts, normalized.
    fn oracle(texts: &[(&str, &str)], dim: usize, seed: u64) -> Vec<Vec<f64>> {
        texts
            .iter()
            .map(|(t, a)| {
                let mut row = vec![0.0; dim];
                let text = format!("{t} {a}").to_lowercase();
                for tok in text.split(|c: char| !c.is_alphanumeric()).filter(|s| !s.is_empty()) {
                    row[bucket(tok, seed, dim)] += 1.0;
                }
                let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                row.iter().map(|v| v / n).collect()
            })
            .collect()
    }

    #[test]
    fn seeds_change_the_matrix() {
        let g = graph(CORPUS);
        let x1 = fallback_embed(&g, 32, 1, TextSource::TitleAbstract).unwrap();
        let x2 = fallback_embed(&g, 32, 2, TextSource::TitleAbstract).unwrap();
        let o1 = oracle(CORPUS, 32, 1);
        let o2 = oracle(CORPUS, 32, 2);
        assert_ne!(o1, o2);
        for i in 0..CORPUS.len() {
            assert_eq!(x1.row(i), o1[i].as_slice());
            assert_eq!(x2.row(i), o2[i].as_slice());
        }
        assert_ne!(x1, x2);
    }

    #[test]
    fn zero_text_rejected() {
        let g = graph(&[("!!!", "...")]);
        assert!(matches!(
            fallback_embed(&g, 4, 0, TextSource::TitleAbstract),
            Err(Error::ZeroText(_))
        ));
        assert!(fallback_embed(&g, 1, 0, TextSource::TitleAbstract).is_err());
    }

    #[test]
    fn abstract_only_ignores_title() {
        let g = graph(&[("alpha", "shared words"), ("beta", "shared words")]);
        let x = fallback_embed(&g, 16, 5, TextSource::AbstractOnly).unwrap();
        assert_eq!(x.row(0), x.row(1));
    }
}
