//! Masked scaled dot-product attention and multi-mask multi-head attention.

use rand::Rng;

use crate::autodiff::{ParamStore, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::masks::MaskMatrix;

/// Names of one attention block's weights inside a [`ParamStore`].
///
/// Head `h` owns `W^Q_h, W^K_h, W^V_h` of shape `d_e × d_e/n`; `W^O` is `d_e × d_e` and shared.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionParams {
    prefix: String,
    d_e: usize,
    n_heads: usize,
}

impl AttentionParams {
    pub fn new(prefix: impl Into<String>, d_e: usize, n_heads: usize) -> Result<Self> {
        if n_heads == 0 || !d_e.is_multiple_of(n_heads) {
            return Err(Error::Config(format!(
                "model dim {d_e} is not divisible by head count {n_heads}"
            )));
        }
        Ok(AttentionParams {
            prefix: prefix.into(),
            d_e,
            n_heads,
        })
    }

    /// Register Glorot-initialized weights in `store`.
    pub fn init<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: impl Into<String>,
        d_e: usize,
        n_heads: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let p = Self::new(prefix, d_e, n_heads)?;
        for h in 0..n_heads {
            for name in [p.w_q(h), p.w_k(h), p.w_v(h)] {
                store.glorot(name, d_e, p.d_k(), rng)?;
            }
        }
        store.glorot(p.w_o(), d_e, d_e, rng)?;
        Ok(p)
    }

    pub fn d_e(&self) -> usize {
        self.d_e
    }

    pub fn n_heads(&self) -> usize {
        self.n_heads
    }

    pub fn d_k(&self) -> usize {
        self.d_e / self.n_heads
    }

    pub fn w_q(&self, h: usize) -> String {
        format!("{}.head{h}.w_q", self.prefix)
    }

    pub fn w_k(&self, h: usize) -> String {
        format!("{}.head{h}.w_k", self.prefix)
    }

    pub fn w_v(&self, h: usize) -> String {
        format!("{}.head{h}.w_v", self.prefix)
    }

    pub fn w_o(&self) -> String {
        format!("{}.w_o", self.prefix)
    }

    pub fn param_count(d_e: usize) -> usize {
        // 3 projections per head (d_e × d_e/n each, n heads) plus W^O
        4 * d_e * d_e
    }
}

/// `softmax(q kᵀ / sqrt(d_k) + mask)`, the attention weights.
pub fn masked_weights(tape: &mut Tape, q: Var, k: Var, mask: Var) -> Result<Var> {
    let d_k = tape.shape(q)[1];
    if tape.shape(k)[1] != d_k {
        return Err(Error::dim("masked_attention", tape.shape(q), tape.shape(k)));
    }
    let kt = tape.transpose(k);
    let scores = tape.matmul(q, kt)?;
    let scores = tape.scale(scores, 1.0 / (d_k as f64).sqrt());
    let logits = tape.add(scores, mask)?;
    tape.softmax_rows(logits)
}

/// `softmax(q kᵀ / sqrt(d_k) + mask) v`.
pub fn masked_attention(tape: &mut Tape, q: Var, k: Var, v: Var, mask: Var) -> Result<Var> {
    let w = masked_weights(tape, q, k, mask)?;
    tape.matmul(w, v)
}

/// Per-head output and weights of a multi-mask attention pass.
pub struct AttentionOutput {
    pub output: Var,
    /// `weights[b][h]` is the `block × block` weight matrix of sentence `b`, head `h`.
    pub weights: Vec<Vec<Var>>,
}

/// Multi-mask multi-head self-attention over a stack of sentences.
///
/// `x` holds `masks.len()` sentences of `block` rows each; `masks[b][h]` is the
/// `block × block` mask (as a tape constant) for sentence `b`, head `h`.
/// Projections run on the whole stack; attention runs per sentence and head.
pub fn mm_mh_attention_stacked(
    tape: &mut Tape,
    store: &ParamStore,
    x: Var,
    params: &AttentionParams,
    masks: &[Vec<Var>],
    block: usize,
) -> Result<AttentionOutput> {
    let n = params.n_heads;
    let rows = tape.shape(x)[0];
    if tape.shape(x)[1] != params.d_e {
        return Err(Error::dim("mm_mh_attention", tape.shape(x), &[rows, params.d_e]));
    }
    if masks.is_empty() || rows != masks.len() * block {
        return Err(Error::dim("mm_mh_attention", tape.shape(x), &[masks.len(), block]));
    }
    for sentence in masks {
        if sentence.len() != n {
            return Err(Error::Config(format!(
                "{} masks supplied for {n} attention heads",
                sentence.len()
            )));
        }
        for &m in sentence {
            if tape.shape(m) != [block, block] {
                return Err(Error::dim("mm_mh_attention mask", tape.shape(m), &[block, block]));
            }
        }
    }

    let mut heads = Vec::with_capacity(n);
    let mut weights = vec![Vec::with_capacity(n); masks.len()];
    for h in 0..n {
        let wq = tape.param(store, &params.w_q(h))?;
        let wk = tape.param(store, &params.w_k(h))?;
        let wv = tape.param(store, &params.w_v(h))?;
        let q = tape.matmul(x, wq)?;
        let k = tape.matmul(x, wk)?;
        let v = tape.matmul(x, wv)?;
        let mut outs = Vec::with_capacity(masks.len());
        for (b, sentence) in masks.iter().enumerate() {
            let (qb, kb, vb) = if masks.len() == 1 {
                (q, k, v)
            } else {
                (
                    tape.slice_rows(q, b * block, block)?,
                    tape.slice_rows(k, b * block, block)?,
                    tape.slice_rows(v, b * block, block)?,
                )
            };
            let w = masked_weights(tape, qb, kb, sentence[h])?;
            weights[b].push(w);
            outs.push(tape.matmul(w, vb)?);
        }
        heads.push(if outs.len() == 1 {
            outs[0]
        } else {
            tape.concat_rows(&outs)?
        });
    }
    let cat = if heads.len() == 1 {
        heads[0]
    } else {
        tape.concat_cols(&heads)?
    };
    let wo = tape.param(store, &params.w_o())?;
    let output = tape.matmul(cat, wo)?;
    Ok(AttentionOutput { output, weights })
}

fn mask_constants(tape: &mut Tape, masks: &[MaskMatrix], l: usize) -> Result<Vec<Var>> {
    masks
        .iter()
        .map(|m| {
            if m.len() != l {
                return Err(Error::dim("mm_mh_attention mask", &[m.len(), m.len()], &[l, l]));
            }
            Ok(tape.constant(m.to_tensor()))
        })
        .collect()
}

/// `Cat(H_1..H_n) W^O` with `H_h = Att(x W^Q_h, x W^K_h, x W^V_h, M_h)` for one sentence.
pub fn mm_mh_attention(
    tape: &mut Tape,
    store: &ParamStore,
    x: Var,
    params: &AttentionParams,
    masks: &[MaskMatrix],
) -> Result<Var> {
    let l = tape.shape(x)[0];
    let consts = mask_constants(tape, masks, l)?;
    Ok(mm_mh_attention_stacked(tape, store, x, params, &[consts], l)?.output)
}

/// Post-softmax attention weights of every head for one sentence.
pub fn attention_weights(
    x: &Tensor,
    store: &ParamStore,
    params: &AttentionParams,
    masks: &[MaskMatrix],
) -> Result<Vec<Tensor>> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let consts = mask_constants(&mut tape, masks, x.rows())?;
    let out = mm_mh_attention_stacked(&mut tape, store, xv, params, &[consts], x.rows())?;
    Ok(out.weights[0].iter().map(|&w| tape.value(w).clone()).collect())
}
