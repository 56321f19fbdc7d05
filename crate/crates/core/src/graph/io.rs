//! Line-oriented file formats for papers, citations and embeddings.
//!
//! * nodes: one JSON object per line, `{"id": .., "title": .., "abstract": ..}`.
//! * edges: one `citing<TAB>cited` pair per line.
//! * embeddings (text): `id<TAB>x1 x2 ... xd` per line.
//! * embeddings (binary): `CTXEMB01`, u32 rows, u32 dim, then per row a u32 id
//!   length, the UTF-8 id bytes and `dim` f32 values; all integers and floats
//!   little-endian.
//!
//! Blank lines and lines starting with `#` are skipped in text formats.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{CitationGraph, EmbeddingMatrix, IngestReport, PaperNode};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const EMBEDDING_MAGIC: &[u8; 8] = b"CTXEMB01";

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

pub fn read_nodes(path: &Path) -> Result<Vec<PaperNode>> {
    let text = read_to_string(path)?;
    content_lines(&text)
        .map(|(line, l)| {
            serde_json::from_str::<PaperNode>(l).map_err(|e| Error::parse(path, line, e.to_string()))
        })
        .collect()
}

pub fn read_edges(path: &Path) -> Result<Vec<(String, String)>> {
    let text = read_to_string(path)?;
    content_lines(&text)
        .map(|(line, l)| {
            let mut fields = l.split('\t');
            match (fields.next(), fields.next(), fields.next()) {
                (Some(s), Some(d), None) if !s.is_empty() && !d.is_empty() => {
                    Ok((s.to_string(), d.to_string()))
                }
                _ => Err(Error::parse(path, line, "expected `src<TAB>dst`")),
            }
        })
        .collect()
}

pub fn load_citation_graph(nodes_path: &Path, edges_path: &Path) -> Result<(CitationGraph, IngestReport)> {
    let nodes = read_nodes(nodes_path)?;
    let edges = read_edges(edges_path)?;
    CitationGraph::new(nodes, edges)
}

pub fn write_nodes(graph: &CitationGraph, path: &Path) -> Result<()> {
    let mut out = String::new();
    for node in graph.nodes() {
        out.push_str(&serde_json::to_string(node)?);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_edges(graph: &CitationGraph, path: &Path) -> Result<()> {
    let mut out = String::new();
    for &(s, d) in graph.edges() {
        out.push_str(&graph.node(s).id);
        out.push('\t');
        out.push_str(&graph.node(d).id);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads embeddings in either format (sniffed by magic) and reorders rows to graph order.
pub fn load_embeddings(path: &Path, graph: &CitationGraph) -> Result<EmbeddingMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let rows = if bytes.starts_with(EMBEDDING_MAGIC) {
        parse_binary(path, &bytes)?
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::parse(path, 0, "not UTF-8"))?;
        parse_text(path, &text)?
    };
    let dim = rows.first().map_or(0, |(_, v)| v.len());
    let mut by_id: HashMap<&str, &[f64]> = HashMap::with_capacity(rows.len());
    for (id, v) in &rows {
        if graph.index_of(id).is_none() {
            return Err(Error::UnknownNode(id.clone()));
        }
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("{bad} in row `{id}`")));
        }
        if by_id.insert(id.as_str(), v.as_slice()).is_some() {
            return Err(Error::parse(path, 0, format!("duplicate embedding id `{id}`")));
        }
    }
    let mut matrix = Matrix::zeros(graph.len(), dim);
    for (i, node) in graph.nodes().iter().enumerate() {
        let v = by_id
            .get(node.id.as_str())
            .ok_or_else(|| Error::MissingEmbedding(node.id.clone()))?;
        matrix.row_mut(i).copy_from_slice(v);
    }
    EmbeddingMatrix::new(matrix)
}

fn parse_text(path: &Path, text: &str) -> Result<Vec<(String, Vec<f64>)>> {
    content_lines(text)
        .map(|(line, l)| {
            let (id, rest) = l
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, line, "expected `id<TAB>values`"))?;
            let values = rest
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| Error::parse(path, line, format!("bad number `{t}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((id.to_string(), values))
        })
        .collect()
}

fn parse_binary(path: &Path, bytes: &[u8]) -> Result<Vec<(String, Vec<f64>)>> {
    let truncated = || Error::parse(path, 0, "truncated binary embedding file");
    let mut pos = EMBEDDING_MAGIC.len();
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + n).ok_or_else(truncated)?;
        pos += n;
        Ok(s)
    };
    let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().expect("4 bytes")) as usize;
    let rows = u32_at(take(4)?);
    let dim = u32_at(take(4)?);
    let mut out = Vec::with_capacity(rows);
    for _ in 0..rows {
        let len = u32_at(take(4)?);
        let id = std::str::from_utf8(take(len)?)
            .map_err(|_| Error::parse(path, 0, "id is not UTF-8"))?
            .to_string();
        let raw = take(4 * dim)?;
        let v = raw
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
            .collect();
        out.push((id, v));
    }
    if take(1).is_ok() {
        return Err(Error::parse(path, 0, "trailing bytes after embedding rows"));
    }
    Ok(out)
}

pub fn write_embeddings(graph: &CitationGraph, x: &EmbeddingMatrix, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| Error::io(path, e);
    for (i, node) in graph.nodes().iter().enumerate() {
        write!(w, "{}\t", node.id).map_err(io_err)?;
        let row: Vec<String> = x.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", row.join(" ")).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// Binary export; values are narrowed to f32.
pub fn write_embeddings_binary(graph: &CitationGraph, x: &EmbeddingMatrix, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(EMBEDDING_MAGIC);
    buf.extend_from_slice(&(graph.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(x.dim() as u32).to_le_bytes());
    for (i, node) in graph.nodes().iter().enumerate() {
        buf.extend_from_slice(&(node.id.len() as u32).to_le_bytes());
        buf.extend_from_slice(node.id.as_bytes());
        for &v in x.row(i) {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}
