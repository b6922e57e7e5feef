//! Corpora, vocabularies, embedding tables and synthetic tasks.

mod conllu;
mod embed;
mod synth;
mod vocab;

pub use conllu::{load_conllu, parse_conllu, to_conllu, write_conllu, DepSentence, NLI_LABELS};
pub use embed::{
    apply_pretrained, embed, load_embedding_text, parse_embedding_text, random_table, to_embedding_text,
    write_embedding_text,
};
pub use synth::{
    chain_heads, gen_order_task, gen_tree_task, order_label, tree_label, FILLERS, MARKER_A, MARKER_B, MARKER_ROOT,
    TREE_TASK_RADIUS,
};
pub use vocab::{build_vocab, Vocab, PAD, PAD_TOKEN, UNK, UNK_TOKEN};

use crate::error::{Error, Result};

/// A premise/hypothesis pair with its class id (see [`NLI_LABELS`]).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairExample {
    pub premise: DepSentence,
    pub hypothesis: DepSentence,
    pub label: usize,
}

/// Group consecutive sentences into pairs. Each pair is a sentence with
/// `# role = premise` followed by one with `# role = hypothesis`; the label is taken
/// from the hypothesis, falling back to the premise.
pub fn pair_examples(sentences: Vec<DepSentence>) -> Result<Vec<PairExample>> {
    if !sentences.len().is_multiple_of(2) {
        return Err(Error::Config(format!(
            "pair corpus has an odd number of sentences ({})",
            sentences.len()
        )));
    }
    let role = |s: &DepSentence| s.meta.get("role").map(String::as_str).unwrap_or("").to_string();
    let mut out = Vec::with_capacity(sentences.len() / 2);
    let mut it = sentences.into_iter();
    while let (Some(premise), Some(hypothesis)) = (it.next(), it.next()) {
        let index = out.len();
        if role(&premise) != "premise" || role(&hypothesis) != "hypothesis" {
            return Err(Error::Config(format!(
                "pair {index}: expected roles premise then hypothesis, found `{}` then `{}`",
                role(&premise),
                role(&hypothesis)
            )));
        }
        let label = hypothesis
            .label
            .or(premise.label)
            .ok_or_else(|| Error::Config(format!("pair {index} has no label")))?;
        out.push(PairExample {
            premise,
            hypothesis,
            label,
        });
    }
    Ok(out)
}

/// Inverse of [`pair_examples`]: tag roles and put the label on the hypothesis.
pub fn flatten_pairs(pairs: &[PairExample]) -> Vec<DepSentence> {
    pairs
        .iter()
        .flat_map(|p| {
            let mut prem = p.premise.clone();
            let mut hyp = p.hypothesis.clone();
            prem.meta.insert("role".into(), "premise".into());
            prem.label = None;
            hyp.meta.insert("role".into(), "hypothesis".into());
            hyp.label = Some(p.label);
            [prem, hyp]
        })
        .collect()
}
