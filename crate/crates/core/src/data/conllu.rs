//! Reader and writer for the CoNLL-U columns this crate needs: ID, FORM and HEAD.
//!
//! Comment lines `# key = value` attach metadata to the following sentence; the
//! key `label` carries the class id. Multiword ranges (`3-4`) and empty nodes
//! (`3.1`) are skipped.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::masks::validate_tree;

/// Class names accepted in place of integer ids in `# label = ...` comments.
pub const NLI_LABELS: [&str; 3] = ["entailment", "neutral", "contradiction"];

/// A tokenized sentence with its dependency tree.
///
/// `heads[i]` is the 1-based index of token `i + 1`'s head, 0 for the root.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DepSentence {
    pub tokens: Vec<String>,
    pub heads: Vec<usize>,
    pub label: Option<usize>,
    pub meta: BTreeMap<String, String>,
}

impl DepSentence {
    pub fn new(tokens: Vec<String>, heads: Vec<usize>, label: Option<usize>) -> Result<Self> {
        if tokens.len() != heads.len() {
            return Err(Error::dim("DepSentence", &[tokens.len()], &[heads.len()]));
        }
        validate_tree(&heads)?;
        Ok(DepSentence {
            tokens,
            heads,
            label,
            meta: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// 0-based position of the first token with this form.
    pub fn position(&self, form: &str) -> Option<usize> {
        self.tokens.iter().position(|t| t == form)
    }
}

/// Parse CoNLL-U text. `source` names the input in error messages.
pub fn parse_conllu(text: &str, source: &str) -> Result<Vec<DepSentence>> {
    let mut sentences = Vec::new();
    let mut current = DepSentence::default();
    let mut token_lines = Vec::new();
    let mut start_line = 1;

    let err = |sentence: usize, line: usize, msg: String| Error::Parse {
        path: source.to_string(),
        sentence,
        line,
        msg,
    };

    let finish =
        |cur: &mut DepSentence, token_lines: &mut Vec<usize>, start: usize, out: &mut Vec<DepSentence>| -> Result<()> {
            if cur.tokens.is_empty() {
                if cur.meta.is_empty() && cur.label.is_none() {
                    return Ok(());
                }
                return Err(err(out.len(), start, "sentence has metadata but no tokens".into()));
            }
            if let Err(e) = validate_tree(&cur.heads) {
                let (line, msg) = match e {
                    Error::MalformedTree { token, reason } => (
                        token_lines.get(token - 1).copied().unwrap_or(start),
                        format!("malformed tree at token {token}: {reason}"),
                    ),
                    other => (start, other.to_string()),
                };
                return Err(err(out.len(), line, msg));
            }
            out.push(std::mem::take(cur));
            token_lines.clear();
            Ok(())
        };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            finish(&mut current, &mut token_lines, start_line, &mut sentences)?;
            start_line = line_no + 1;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                let (key, value) = (key.trim(), value.trim());
                if key == "label" {
                    let id = value
                        .parse()
                        .ok()
                        .or_else(|| NLI_LABELS.iter().position(|l| *l == value))
                        .ok_or_else(|| err(sentences.len(), line_no, format!("label `{value}` is not a class id")))?;
                    current.label = Some(id);
                } else {
                    current.meta.insert(key.to_string(), value.to_string());
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 7 {
            return Err(err(
                sentences.len(),
                line_no,
                format!("expected at least 7 tab-separated columns, found {}", cols.len()),
            ));
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let id: usize = id
            .parse()
            .map_err(|_| err(sentences.len(), line_no, format!("ID `{id}` is not an integer")))?;
        if id != current.tokens.len() + 1 {
            return Err(err(
                sentences.len(),
                line_no,
                format!("token ID {id} out of sequence, expected {}", current.tokens.len() + 1),
            ));
        }
        let head: usize = cols[6].parse().map_err(|_| {
            err(
                sentences.len(),
                line_no,
                format!("HEAD `{}` is not an integer", cols[6]),
            )
        })?;
        current.tokens.push(cols[1].to_string());
        current.heads.push(head);
        token_lines.push(line_no);
    }
    finish(&mut current, &mut token_lines, start_line, &mut sentences)?;
    Ok(sentences)
}

pub fn load_conllu(path: &Path) -> Result<Vec<DepSentence>> {
    let text = fs::read_to_string(path)?;
    parse_conllu(&text, &path.display().to_string())
}

/// Serialize to ten-column CoNLL-U; metadata and the label become comments.
pub fn to_conllu(sentences: &[DepSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        for (k, v) in &s.meta {
            let _ = writeln!(out, "# {k} = {v}");
        }
        if let Some(label) = s.label {
            let _ = writeln!(out, "# label = {label}");
        }
        for (i, (form, head)) in s.tokens.iter().zip(&s.heads).enumerate() {
            let rel = if *head == 0 { "root" } else { "dep" };
            let _ = writeln!(out, "{}\t{form}\t_\t_\t_\t_\t{head}\t{rel}\t_\t_", i + 1);
        }
        out.push('\n');
    }
    out
}

pub fn write_conllu(path: &Path, sentences: &[DepSentence]) -> Result<()> {
    fs::write(path, to_conllu(sentences))?;
    Ok(())
}
