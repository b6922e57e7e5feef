//! Embedding tables: lookup, Glorot initialization and the whitespace text format
//! (`token v_1 ... v_d` per line).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

use super::vocab::{Vocab, PAD};

/// Rows of `table` for `ids`, one row per token.
pub fn embed(ids: &[usize], table: &Tensor) -> Result<Tensor> {
    if ids.is_empty() {
        return Err(Error::Empty("embedding an empty sentence"));
    }
    table.gather_rows(ids)
}

/// A `vocab.len() × d_e` table with Glorot rows and a zero padding row.
pub fn random_table<R: Rng + ?Sized>(vocab: &Vocab, d_e: usize, rng: &mut R) -> Tensor {
    let bound = (6.0 / (vocab.len() + d_e) as f64).sqrt();
    let mut t = Tensor::zeros(vocab.len(), d_e);
    for r in 0..vocab.len() {
        if r == PAD {
            continue;
        }
        for c in 0..d_e {
            t.set(r, c, rng.gen_range(-bound..bound));
        }
    }
    t
}

/// Overwrite rows of `table` for tokens present in `entries`; returns how many matched.
pub fn apply_pretrained(table: &mut Tensor, vocab: &Vocab, entries: &[(String, Vec<f64>)]) -> Result<usize> {
    let d_e = table.cols();
    let mut hits = 0;
    for (token, values) in entries {
        if values.len() != d_e {
            return Err(Error::dim("apply_pretrained", &[d_e], &[values.len()]));
        }
        let id = vocab.id(token);
        if id <= 1 && vocab.tokens()[id] != *token {
            continue;
        }
        for (c, &v) in values.iter().enumerate() {
            table.set(id, c, v);
        }
        hits += 1;
    }
    Ok(hits)
}

pub fn parse_embedding_text(text: &str, source: &str) -> Result<Vec<(String, Vec<f64>)>> {
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else { continue };
        let values = parts
            .map(|p| p.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                path: source.to_string(),
                sentence: out.len(),
                line: idx + 1,
                msg: format!("bad embedding value: {e}"),
            })?;
        if let Some((_, first)) = out.first() {
            if first.len() != values.len() {
                return Err(Error::Parse {
                    path: source.to_string(),
                    sentence: out.len(),
                    line: idx + 1,
                    msg: format!("expected {} values, found {}", first.len(), values.len()),
                });
            }
        }
        out.push((token.to_string(), values));
    }
    if out.is_empty() {
        return Err(Error::Empty("embedding file"));
    }
    Ok(out)
}

pub fn load_embedding_text(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    parse_embedding_text(&fs::read_to_string(path)?, &path.display().to_string())
}

/// Shortest round-trip decimal for every value, so reloading is bit-exact.
pub fn to_embedding_text(entries: &[(String, Vec<f64>)]) -> String {
    let mut out = String::new();
    for (token, values) in entries {
        out.push_str(token);
        for v in values {
            let _ = write!(out, " {v:?}");
        }
        out.push('\n');
    }
    out
}

pub fn write_embedding_text(path: &Path, entries: &[(String, Vec<f64>)]) -> Result<()> {
    fs::write(path, to_embedding_text(entries))?;
    Ok(())
}
