use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::DepSentence;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";

/// Token to id mapping. Ids 0 and 1 are reserved for padding and unknown tokens.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocab {
    tokens: Vec<String>,
    lowercase: bool,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    tokens: Vec<String>,
    lowercase: bool,
}

impl From<VocabRepr> for Vocab {
    fn from(r: VocabRepr) -> Self {
        Vocab::from_tokens(r.tokens, r.lowercase)
    }
}

impl From<Vocab> for VocabRepr {
    fn from(v: Vocab) -> Self {
        VocabRepr {
            tokens: v.tokens,
            lowercase: v.lowercase,
        }
    }
}

impl Vocab {
    /// `tokens` must start with the two reserved entries.
    pub fn from_tokens(tokens: Vec<String>, lowercase: bool) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocab {
            tokens,
            lowercase,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    pub fn lowercase(&self) -> bool {
        self.lowercase
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    fn normalize<'a>(&self, token: &'a str) -> std::borrow::Cow<'a, str> {
        if self.lowercase {
            token.to_lowercase().into()
        } else {
            token.into()
        }
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(self.normalize(token).as_ref()).copied().unwrap_or(UNK)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Result<Vec<&str>> {
        ids.iter()
            .map(|&id| {
                self.tokens.get(id).map(String::as_str).ok_or(Error::IdOutOfRange {
                    id,
                    rows: self.tokens.len(),
                })
            })
            .collect()
    }
}

/// Build a vocabulary from every token in `sentences`.
///
/// Tokens seen fewer than `min_count` times map to `<unk>`. Ids are assigned by
/// descending frequency, ties broken lexicographically.
pub fn build_vocab<'a, I>(sentences: I, min_count: usize, lowercase: bool) -> Result<Vocab>
where
    I: IntoIterator<Item = &'a DepSentence>,
{
    let mut counts: HashMap<String, usize> = HashMap::new();
    let mut seen_any = false;
    for s in sentences {
        for t in &s.tokens {
            seen_any = true;
            let t = if lowercase { t.to_lowercase() } else { t.clone() };
            *counts.entry(t).or_default() += 1;
        }
    }
    if !seen_any {
        return Err(Error::Empty("corpus"));
    }
    let mut entries: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(t, c)| *c >= min_count.max(1) && t != PAD_TOKEN && t != UNK_TOKEN)
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let tokens = [PAD_TOKEN.to_string(), UNK_TOKEN.to_string()]
        .into_iter()
        .chain(entries.into_iter().map(|(t, _)| t))
        .collect();
    Ok(Vocab::from_tokens(tokens, lowercase))
}
