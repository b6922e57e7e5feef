//! The encoder block: multi-mask attention, fusion gate, position-wise FFN with
//! residual and layer norm, and the pooling layer that yields sentence vectors.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::attention::{mm_mh_attention_stacked, AttentionParams};
use crate::autodiff::{ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::masks::{DistanceKind, MaskBuilder, MaskOptions, MaskSchedule};

/// Which axis the attentive-pooling softmax normalizes over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolAxis {
    /// Each feature column gets its own distribution over tokens.
    #[default]
    Tokens,
    /// Each token row is normalized across its features.
    Features,
}

fn default_distance_cycle() -> Vec<DistanceKind> {
    vec![DistanceKind::Word, DistanceKind::Dependency, DistanceKind::None]
}

/// Missing fields take their [`Default`] values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub d_e: usize,
    pub n_heads: usize,
    /// FFN inner width; `None` means `4 * d_e`.
    pub d_h: Option<usize>,
    pub n_layers: usize,
    pub alpha: f64,
    pub distance_cycle: Vec<DistanceKind>,
    pub swap_direction: bool,
    pub eps: f64,
    pub pool_softmax_axis: PoolAxis,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            d_e: 300,
            n_heads: 6,
            d_h: None,
            n_layers: 1,
            alpha: 1.0,
            distance_cycle: default_distance_cycle(),
            swap_direction: false,
            eps: 1e-5,
            pool_softmax_axis: PoolAxis::Tokens,
        }
    }
}

impl EncoderConfig {
    pub fn ffn_dim(&self) -> usize {
        self.d_h.unwrap_or(4 * self.d_e)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_heads == 0 || !self.n_heads.is_multiple_of(2) {
            return Err(Error::Config(format!("n_heads must be even, got {}", self.n_heads)));
        }
        if self.d_e == 0 || !self.d_e.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "d_e = {} is not divisible by n_heads = {}",
                self.d_e, self.n_heads
            )));
        }
        if self.n_layers == 0 {
            return Err(Error::Config("n_layers must be at least 1".into()));
        }
        if self.ffn_dim() == 0 {
            return Err(Error::Config("d_h must be positive".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::Config(format!("eps must be > 0, got {}", self.eps)));
        }
        if self.distance_cycle.len() != self.n_heads / 2 {
            return Err(Error::Config(format!(
                "distance_cycle has {} entries, expected n_heads / 2 = {}",
                self.distance_cycle.len(),
                self.n_heads / 2
            )));
        }
        Ok(())
    }

    pub fn mask_options(&self) -> MaskOptions {
        MaskOptions {
            alpha: self.alpha,
            swap_direction: self.swap_direction,
            use_direction: true,
        }
    }
}

/// Exact number of trainable scalars in one encoder (attention, gate, FFN, layer norm
/// per layer, plus the pooling FFN).
pub fn param_count(config: &EncoderConfig) -> usize {
    let d = config.d_e;
    let h = config.ffn_dim();
    let attention = AttentionParams::param_count(d);
    let gate = 4 * d * d + d;
    let ffn = 2 * d * h + h + d;
    let norm = 2 * d;
    let pool = 2 * d * h + h + d;
    config.n_layers * (attention + gate + ffn + norm) + pool
}

/// Parameter names of a two-layer position-wise FFN `relu(x W_1 + b_1) W_2 + b_2`.
#[derive(Clone, Debug, PartialEq)]
pub struct FfnParams {
    pub w_1: String,
    pub b_1: String,
    pub w_2: String,
    pub b_2: String,
}

impl FfnParams {
    pub fn new(prefix: &str) -> Self {
        FfnParams {
            w_1: format!("{prefix}.w_1"),
            b_1: format!("{prefix}.b_1"),
            w_2: format!("{prefix}.w_2"),
            b_2: format!("{prefix}.b_2"),
        }
    }

    pub fn init<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        d_in: usize,
        d_hidden: usize,
        d_out: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let p = Self::new(prefix);
        store.glorot(&p.w_1, d_in, d_hidden, rng)?;
        store.zeros(&p.b_1, 1, d_hidden)?;
        store.glorot(&p.w_2, d_hidden, d_out, rng)?;
        store.zeros(&p.b_2, 1, d_out)?;
        Ok(p)
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w1 = tape.param(store, &self.w_1)?;
        let b1 = tape.param(store, &self.b_1)?;
        let w2 = tape.param(store, &self.w_2)?;
        let b2 = tape.param(store, &self.b_2)?;
        let h = tape.matmul(x, w1)?;
        let h = tape.add_row(h, b1)?;
        let h = tape.relu(h);
        let o = tape.matmul(h, w2)?;
        tape.add_row(o, b2)
    }
}

/// Parameter names of the fusion gate.
#[derive(Clone, Debug, PartialEq)]
pub struct GateParams {
    pub w_i: String,
    pub w_o: String,
    pub w_1: String,
    pub w_2: String,
    pub b: String,
}

impl GateParams {
    pub fn new(prefix: &str) -> Self {
        GateParams {
            w_i: format!("{prefix}.w_i"),
            w_o: format!("{prefix}.w_o"),
            w_1: format!("{prefix}.w_1"),
            w_2: format!("{prefix}.w_2"),
            b: format!("{prefix}.b"),
        }
    }

    pub fn init<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, d_e: usize, rng: &mut R) -> Result<Self> {
        let p = Self::new(prefix);
        for name in [&p.w_i, &p.w_o, &p.w_1, &p.w_2] {
            store.glorot(name, d_e, d_e, rng)?;
        }
        store.zeros(&p.b, 1, d_e)?;
        Ok(p)
    }
}

/// Gated blend of the block input and the attention output:
/// `f = sigmoid(Î W_1 + Ô W_2 + b)`, `out = f ⊙ Î + (1 - f) ⊙ Ô` with `Î = I W_I`, `Ô = O W_O`.
pub fn fusion_gate(tape: &mut Tape, store: &ParamStore, params: &GateParams, input: Var, attended: Var) -> Result<Var> {
    if tape.shape(input) != tape.shape(attended) {
        return Err(Error::dim("fusion_gate", tape.shape(input), tape.shape(attended)));
    }
    let w_i = tape.param(store, &params.w_i)?;
    let w_o = tape.param(store, &params.w_o)?;
    let w_1 = tape.param(store, &params.w_1)?;
    let w_2 = tape.param(store, &params.w_2)?;
    let b = tape.param(store, &params.b)?;
    let i_hat = tape.matmul(input, w_i)?;
    let o_hat = tape.matmul(attended, w_o)?;
    let gi = tape.matmul(i_hat, w_1)?;
    let go = tape.matmul(o_hat, w_2)?;
    let pre = tape.add(gi, go)?;
    let pre = tape.add_row(pre, b)?;
    let f = tape.sigmoid(pre);
    // f ⊙ Î + (1 - f) ⊙ Ô == Ô + f ⊙ (Î - Ô)
    let diff = tape.sub(i_hat, o_hat)?;
    let mixed = tape.mul(f, diff)?;
    tape.add(o_hat, mixed)
}

/// Parameter names of the FFN sub-block with its layer norm.
#[derive(Clone, Debug, PartialEq)]
pub struct FfnBlockParams {
    pub ffn: FfnParams,
    pub gain: String,
    pub bias: String,
}

impl FfnBlockParams {
    pub fn new(prefix: &str) -> Self {
        FfnBlockParams {
            ffn: FfnParams::new(&format!("{prefix}.ffn")),
            gain: format!("{prefix}.norm.gain"),
            bias: format!("{prefix}.norm.bias"),
        }
    }

    pub fn init<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        d_e: usize,
        d_h: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let ffn = FfnParams::init(store, &format!("{prefix}.ffn"), d_e, d_h, d_e, rng)?;
        let p = FfnBlockParams {
            ffn,
            ..Self::new(prefix)
        };
        store.ones(&p.gain, 1, d_e)?;
        store.zeros(&p.bias, 1, d_e)?;
        Ok(p)
    }
}

/// `layer_norm(x + relu(x W_1 + b_1) W_2 + b_2)`, row by row.
pub fn position_wise_ffn(
    tape: &mut Tape,
    store: &ParamStore,
    params: &FfnBlockParams,
    x: Var,
    eps: f64,
) -> Result<Var> {
    let f = params.ffn.forward(tape, store, x)?;
    let res = tape.add(x, f)?;
    let gain = tape.param(store, &params.gain)?;
    let bias = tape.param(store, &params.bias)?;
    tape.layer_norm(res, gain, bias, eps)
}

/// `sum over tokens of softmax(FFN(u)) ⊙ u`, a `[1, d_e]` row.
///
/// `scores` is `FFN(u)` for the same rows as `u`.
pub fn attentive_pool_scores(tape: &mut Tape, u: Var, scores: Var, axis: PoolAxis) -> Result<Var> {
    let weights = match axis {
        PoolAxis::Tokens => {
            let t = tape.transpose(scores);
            let s = tape.softmax_rows(t)?;
            tape.transpose(s)
        }
        PoolAxis::Features => tape.softmax_rows(scores)?,
    };
    let weighted = tape.mul(weights, u)?;
    Ok(tape.sum_rows(weighted))
}

/// Attentive pooling of one sentence matrix `u` (`l × d_e`) to `[1, d_e]`.
pub fn attentive_pool(tape: &mut Tape, store: &ParamStore, params: &FfnParams, u: Var, axis: PoolAxis) -> Result<Var> {
    let scores = params.forward(tape, store, u)?;
    attentive_pool_scores(tape, u, scores, axis)
}

/// One sentence in a stacked batch: its real length and optional dependency heads.
#[derive(Clone, Copy, Debug)]
pub struct SentenceShape<'a> {
    pub len: usize,
    pub heads: Option<&'a [usize]>,
}

/// Names and structure of one encoder stack; the weights live in a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Encoder {
    config: EncoderConfig,
    schedule: MaskSchedule,
    mask_options: MaskOptions,
    layers: Vec<Layer>,
    pool: FfnParams,
}

#[derive(Clone, Debug)]
struct Layer {
    attention: AttentionParams,
    gate: GateParams,
    ffn: FfnBlockParams,
}

impl Encoder {
    /// Parameter names for an encoder under `prefix`, without touching any store.
    pub fn new(prefix: &str, config: EncoderConfig, schedule: MaskSchedule, mask_options: MaskOptions) -> Result<Self> {
        config.validate()?;
        if schedule.len() != config.n_heads {
            return Err(Error::Config(format!(
                "schedule has {} heads, config has {}",
                schedule.len(),
                config.n_heads
            )));
        }
        let layers = (0..config.n_layers)
            .map(|k| {
                let lp = format!("{prefix}.layer{k}");
                Ok(Layer {
                    attention: AttentionParams::new(format!("{lp}.attn"), config.d_e, config.n_heads)?,
                    gate: GateParams::new(&format!("{lp}.gate")),
                    ffn: FfnBlockParams::new(&lp),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Encoder {
            config,
            schedule,
            mask_options,
            layers,
            pool: FfnParams::new(&format!("{prefix}.pool")),
        })
    }

    /// Create the encoder and register freshly initialized weights in `store`.
    pub fn init<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        config: EncoderConfig,
        schedule: MaskSchedule,
        mask_options: MaskOptions,
        rng: &mut R,
    ) -> Result<Self> {
        let enc = Self::new(prefix, config, schedule, mask_options)?;
        let (d, h) = (enc.config.d_e, enc.config.ffn_dim());
        for k in 0..enc.layers.len() {
            let lp = format!("{prefix}.layer{k}");
            AttentionParams::init(store, format!("{lp}.attn"), d, enc.config.n_heads, rng)?;
            GateParams::init(store, &format!("{lp}.gate"), d, rng)?;
            FfnBlockParams::init(store, &lp, d, h, rng)?;
        }
        FfnParams::init(store, &format!("{prefix}.pool"), d, h, d, rng)?;
        Ok(enc)
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn schedule(&self) -> &MaskSchedule {
        &self.schedule
    }

    pub fn mask_options(&self) -> MaskOptions {
        self.mask_options
    }

    /// Sentence vector width: attentive pool and max pool concatenated.
    pub fn output_dim(&self) -> usize {
        2 * self.config.d_e
    }

    pub fn attention_params(&self, layer: usize) -> &AttentionParams {
        &self.layers[layer].attention
    }

    /// Per-sentence, per-head masks padded to `block`, as tape constants.
    pub fn masks(
        &self,
        tape: &mut Tape,
        builder: &mut MaskBuilder,
        sentences: &[SentenceShape<'_>],
        block: usize,
    ) -> Result<Vec<Vec<Var>>> {
        sentences
            .iter()
            .map(|s| {
                let masks = builder.masks_for_sentence(&self.schedule, s.len, s.heads)?;
                masks
                    .into_iter()
                    .map(|m| {
                        let m = if block == s.len { m } else { m.pad_to(block)? };
                        Ok(tape.constant(m.to_tensor()))
                    })
                    .collect()
            })
            .collect()
    }

    pub fn mask_builder(&self) -> MaskBuilder {
        MaskBuilder::new(self.mask_options)
    }

    /// Run every layer over stacked sentences (`block` rows each); returns `U` and,
    /// per layer, the attention weights `[sentence][head]`.
    pub fn encode_stacked(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Var,
        masks: &[Vec<Var>],
        block: usize,
    ) -> Result<(Var, Vec<Vec<Vec<Var>>>)> {
        let mut h = x;
        let mut all_weights = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let att = mm_mh_attention_stacked(tape, store, h, &layer.attention, masks, block)?;
            let gated = fusion_gate(tape, store, &layer.gate, h, att.output)?;
            h = position_wise_ffn(tape, store, &layer.ffn, gated, self.config.eps)?;
            all_weights.push(att.weights);
        }
        Ok((h, all_weights))
    }

    /// Encode one sentence `x` (`l × d_e`).
    pub fn encode(&self, tape: &mut Tape, store: &ParamStore, x: Var, heads: Option<&[usize]>) -> Result<Var> {
        let l = tape.shape(x)[0];
        let mut builder = self.mask_builder();
        let masks = self.masks(tape, &mut builder, &[SentenceShape { len: l, heads }], l)?;
        Ok(self.encode_stacked(tape, store, x, &masks, l)?.0)
    }

    /// Pool stacked encoder output to one `[1, 2 d_e]` row per sentence (stacked to
    /// `[batch, 2 d_e]`). Padded rows beyond each sentence's length are ignored.
    pub fn pool_stacked(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        u: Var,
        lens: &[usize],
        block: usize,
    ) -> Result<Var> {
        if lens.is_empty() {
            return Err(Error::Empty("pooling an empty batch"));
        }
        let scores = self.pool.forward(tape, store, u)?;
        let mut rows = Vec::with_capacity(lens.len());
        for (b, &len) in lens.iter().enumerate() {
            if len == 0 || len > block {
                return Err(Error::Empty("pooling a sentence with no tokens"));
            }
            let (ub, sb) = if lens.len() == 1 && len == block {
                (u, scores)
            } else {
                (
                    tape.slice_rows(u, b * block, len)?,
                    tape.slice_rows(scores, b * block, len)?,
                )
            };
            let att = attentive_pool_scores(tape, ub, sb, self.config.pool_softmax_axis)?;
            let max = tape.max_rows(ub);
            rows.push(tape.concat_cols(&[att, max])?);
        }
        if rows.len() == 1 {
            Ok(rows[0])
        } else {
            tape.concat_rows(&rows)
        }
    }

    /// Sentence vector of one encoded sentence `u`: `[1, 2 d_e]`.
    pub fn pool(&self, tape: &mut Tape, store: &ParamStore, u: Var) -> Result<Var> {
        let l = tape.shape(u)[0];
        self.pool_stacked(tape, store, u, &[l], l)
    }

    pub fn pool_params(&self) -> &FfnParams {
        &self.pool
    }
}
