use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{checkpoint, ParamStore, Tape, Tensor, Var};
use crate::data::{apply_pretrained, load_embedding_text, random_table, DepSentence, PairExample, Vocab, PAD};
use crate::encoder::{Encoder, FfnParams, SentenceShape};
use crate::error::{Error, Result};
use crate::masks::{HeadSpec, MaskMatrix};

use super::config::{RunConfig, Task};

pub const EMBED_TABLE: &str = "embed.table";
pub const CLASSIFIER_PREFIX: &str = "classifier";

/// One labeled training or evaluation item.
#[derive(Clone, Debug, PartialEq)]
pub enum Example {
    Single(DepSentence),
    Pair(PairExample),
}

impl Example {
    pub fn label(&self) -> Option<usize> {
        match self {
            Example::Single(s) => s.label,
            Example::Pair(p) => Some(p.label),
        }
    }

    pub fn sentences(&self) -> Vec<&DepSentence> {
        match self {
            Example::Single(s) => vec![s],
            Example::Pair(p) => vec![&p.premise, &p.hypothesis],
        }
    }
}

/// `concat(r_p, r_h, r_p ⊙ r_h, |r_p − r_h|)`, row by row.
pub fn nli_feature(tape: &mut Tape, rp: Var, rh: Var) -> Result<Var> {
    if tape.shape(rp) != tape.shape(rh) {
        return Err(Error::dim("nli_feature", tape.shape(rp), tape.shape(rh)));
    }
    let prod = tape.mul(rp, rh)?;
    let diff = tape.sub(rp, rh)?;
    let adiff = tape.abs(diff);
    tape.concat_cols(&[rp, rh, prod, adiff])
}

/// Two-layer classifier: `relu(f W_1 + b_1) W_2 + b_2`.
pub fn classify(tape: &mut Tape, store: &ParamStore, params: &FfnParams, features: Var) -> Result<Var> {
    params.forward(tape, store, features)
}

/// Attention weights of one head on one sentence, with the mask that produced them.
#[derive(Clone, Debug)]
pub struct HeadMap {
    /// File-friendly name such as `head0_forward_word` or `enc1_layer0_head2_backward_none`.
    pub name: String,
    pub encoder: usize,
    pub layer: usize,
    pub head: usize,
    pub spec: HeadSpec,
    pub weights: Tensor,
    pub mask: MaskMatrix,
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    config: RunConfig,
    vocab: Vocab,
    num_classes: usize,
}

/// Embeddings, one or two encoders and a classifier, with all weights in one store.
#[derive(Clone, Debug)]
pub struct Model {
    config: RunConfig,
    vocab: Vocab,
    num_classes: usize,
    store: ParamStore,
    encoders: Vec<Encoder>,
    classifier: FfnParams,
}

impl Model {
    /// Build the configured variant with freshly initialized weights.
    pub fn new(config: RunConfig, vocab: Vocab, num_classes: usize) -> Result<Self> {
        config.validate()?;
        if num_classes < 2 {
            return Err(Error::Config(format!("need at least 2 classes, got {num_classes}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let enc_cfg = config.effective_encoder();
        let mut table = random_table(&vocab, enc_cfg.d_e, &mut rng);
        if let Some(path) = &config.embeddings {
            apply_pretrained(&mut table, &vocab, &load_embedding_text(path)?)?;
        }
        store.insert(EMBED_TABLE, table)?;
        let encoders = config
            .encoder_schedules()?
            .into_iter()
            .map(|(prefix, schedule)| {
                Encoder::init(
                    &mut store,
                    &prefix,
                    enc_cfg.clone(),
                    schedule,
                    config.mask_options(),
                    &mut rng,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let sentence_dim: usize = encoders.iter().map(Encoder::output_dim).sum();
        let feature_dim = feature_dim(config.task, sentence_dim);
        let classifier = FfnParams::init(
            &mut store,
            CLASSIFIER_PREFIX,
            feature_dim,
            config.classifier_hidden(),
            num_classes,
            &mut rng,
        )?;
        // output layer starts at a tenth of the Glorot scale
        let w_2 = store.get_mut(&classifier.w_2).expect("just inserted");
        *w_2 = w_2.scale(0.1);
        Ok(Model {
            config,
            vocab,
            num_classes,
            store,
            encoders,
            classifier,
        })
    }

    /// Rebuild a model around an existing store, which must hold exactly the expected
    /// parameter names and shapes.
    pub fn from_store(config: RunConfig, vocab: Vocab, num_classes: usize, store: ParamStore) -> Result<Self> {
        let mut model = Model::new(
            RunConfig {
                embeddings: None,
                ..config.clone()
            },
            vocab,
            num_classes,
        )?;
        model.config = config;
        let expected: Vec<(&str, &[usize])> = model.store.iter().map(|(n, t)| (n, t.shape())).collect();
        let found: Vec<(&str, &[usize])> = store.iter().map(|(n, t)| (n, t.shape())).collect();
        if expected != found {
            let missing = expected
                .iter()
                .find(|e| !found.contains(e))
                .or_else(|| found.iter().find(|f| !expected.contains(f)))
                .map(|(n, s)| format!("`{n}` {s:?}"))
                .unwrap_or_default();
            return Err(Error::Config(format!(
                "parameter store does not match the config: {missing}"
            )));
        }
        model.store = store;
        Ok(model)
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn encoders(&self) -> &[Encoder] {
        &self.encoders
    }

    pub fn classifier(&self) -> &FfnParams {
        &self.classifier
    }

    /// Width of one sentence vector (all encoders concatenated).
    pub fn sentence_dim(&self) -> usize {
        self.encoders.iter().map(Encoder::output_dim).sum()
    }

    pub fn feature_dim(&self) -> usize {
        feature_dim(self.config.task, self.sentence_dim())
    }

    /// Trainable scalars in the encoders alone.
    pub fn encoder_param_count(&self) -> usize {
        (0..self.encoders.len())
            .map(|i| self.store.count_prefix(&format!("enc{i}.")))
            .sum()
    }

    pub fn classifier_param_count(&self) -> usize {
        self.store.count_prefix(&format!("{CLASSIFIER_PREFIX}."))
    }

    pub fn embedding_param_count(&self) -> usize {
        self.store.get(EMBED_TABLE).map_or(0, Tensor::numel)
    }

    pub fn total_param_count(&self) -> usize {
        self.store.count()
    }

    /// Stacked sentence vectors, one row per sentence. With `dropout`, embedded tokens
    /// are dropped at that rate using the given RNG.
    pub fn sentence_vectors(
        &self,
        tape: &mut Tape,
        sentences: &[&DepSentence],
        dropout: Option<(f64, &mut ChaCha8Rng)>,
    ) -> Result<Var> {
        if sentences.is_empty() {
            return Err(Error::Empty("batch with no sentences"));
        }
        let lens: Vec<usize> = sentences.iter().map(|s| s.len()).collect();
        if lens.contains(&0) {
            return Err(Error::Empty("sentence with no tokens"));
        }
        let block = *lens.iter().max().expect("nonempty batch");
        let mut ids = Vec::with_capacity(block * sentences.len());
        for s in sentences {
            ids.extend(self.vocab.encode(&s.tokens));
            ids.extend(std::iter::repeat_n(PAD, block - s.len()));
        }
        let table = tape.param(&self.store, EMBED_TABLE)?;
        let mut x = tape.gather_rows(table, &ids)?;
        if let Some((rate, rng)) = dropout {
            if rate > 0.0 {
                let keep = 1.0 / (1.0 - rate);
                let shape = tape.shape(x).to_vec();
                let mask = (0..shape[0] * shape[1])
                    .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
                    .collect();
                let mask = tape.constant(Tensor::new(&shape, mask)?);
                x = tape.mul(x, mask)?;
            }
        }
        let shapes: Vec<SentenceShape<'_>> = sentences
            .iter()
            .map(|s| SentenceShape {
                len: s.len(),
                heads: Some(&s.heads),
            })
            .collect();
        let mut parts = Vec::with_capacity(self.encoders.len());
        for enc in &self.encoders {
            let mut builder = enc.mask_builder();
            let masks = enc.masks(tape, &mut builder, &shapes, block)?;
            let (u, _) = enc.encode_stacked(tape, &self.store, x, &masks, block)?;
            parts.push(enc.pool_stacked(tape, &self.store, u, &lens, block)?);
        }
        if parts.len() == 1 {
            Ok(parts[0])
        } else {
            tape.concat_cols(&parts)
        }
    }

    /// Classifier input features for a batch of examples.
    pub fn features(
        &self,
        tape: &mut Tape,
        examples: &[&Example],
        dropout: Option<(f64, &mut ChaCha8Rng)>,
    ) -> Result<Var> {
        match self.config.task {
            Task::Single => {
                let sents = examples
                    .iter()
                    .map(|e| match e {
                        Example::Single(s) => Ok(s),
                        Example::Pair(_) => Err(Error::Config("pair example given to a single-sentence model".into())),
                    })
                    .collect::<Result<Vec<_>>>()?;
                self.sentence_vectors(tape, &sents, dropout)
            }
            Task::Pair => {
                let mut sents = Vec::with_capacity(2 * examples.len());
                for e in examples {
                    match e {
                        Example::Pair(p) => sents.push(&p.premise),
                        Example::Single(_) => {
                            return Err(Error::Config("single sentence given to a pair model".into()))
                        }
                    }
                }
                for e in examples {
                    if let Example::Pair(p) = e {
                        sents.push(&p.hypothesis);
                    }
                }
                // premises and hypotheses share one encoder pass
                let r = self.sentence_vectors(tape, &sents, dropout)?;
                let n = examples.len();
                let rp = tape.slice_rows(r, 0, n)?;
                let rh = tape.slice_rows(r, n, n)?;
                nli_feature(tape, rp, rh)
            }
        }
    }

    pub fn logits(
        &self,
        tape: &mut Tape,
        examples: &[&Example],
        dropout: Option<(f64, &mut ChaCha8Rng)>,
    ) -> Result<Var> {
        let f = self.features(tape, examples, dropout)?;
        classify(tape, &self.store, &self.classifier, f)
    }

    /// Logits for `examples` without dropout, as a `batch × classes` tensor.
    pub fn predict_logits(&self, examples: &[&Example]) -> Result<Tensor> {
        let mut tape = Tape::new();
        let l = self.logits(&mut tape, examples, None)?;
        Ok(tape.value(l).clone())
    }

    /// Attention weights of every encoder, layer and head for one sentence.
    pub fn attention_maps(&self, sentence: &DepSentence) -> Result<Vec<HeadMap>> {
        let l = sentence.len();
        if l == 0 {
            return Err(Error::Empty("sentence with no tokens"));
        }
        let mut tape = Tape::new();
        let table = tape.param(&self.store, EMBED_TABLE)?;
        let x = tape.gather_rows(table, &self.vocab.encode(&sentence.tokens))?;
        let shape = [SentenceShape {
            len: l,
            heads: Some(&sentence.heads),
        }];
        let n_enc = self.encoders.len();
        let mut maps = Vec::new();
        for (e, enc) in self.encoders.iter().enumerate() {
            let mut builder = enc.mask_builder();
            let masks = builder.masks_for_sentence(enc.schedule(), l, Some(&sentence.heads))?;
            let consts = enc.masks(&mut tape, &mut builder, &shape, l)?;
            let (_, weights) = enc.encode_stacked(&mut tape, &self.store, x, &consts, l)?;
            let n_layers = weights.len();
            for (layer, per_sentence) in weights.iter().enumerate() {
                for (head, (&w, spec)) in per_sentence[0].iter().zip(enc.schedule().heads()).enumerate() {
                    let mut name = String::new();
                    if n_enc > 1 {
                        name.push_str(&format!("enc{e}_"));
                    }
                    if n_layers > 1 {
                        name.push_str(&format!("layer{layer}_"));
                    }
                    name.push_str(&format!("head{head}_{}_{}", spec.direction, spec.distance));
                    maps.push(HeadMap {
                        name,
                        encoder: e,
                        layer,
                        head,
                        spec: *spec,
                        weights: tape.value(w).clone(),
                        mask: masks[head].clone(),
                    });
                }
            }
        }
        Ok(maps)
    }

    fn metadata(&self) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(CheckpointMeta {
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            num_classes: self.num_classes,
        })?)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        checkpoint::to_bytes(&self.store, self.metadata()?)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let (store, meta) = checkpoint::from_bytes(bytes, path)?;
        Self::from_parts(store, meta, path)
    }

    /// Write weights, config and vocabulary to one checkpoint file.
    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(path, &self.store, self.metadata()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (store, meta) = checkpoint::load(path)?;
        Self::from_parts(store, meta, path)
    }

    fn from_parts(store: ParamStore, meta: serde_json::Value, path: &Path) -> Result<Self> {
        let meta: CheckpointMeta = serde_json::from_value(meta).map_err(|e| Error::Checkpoint {
            path: path.to_path_buf(),
            msg: format!("bad metadata: {e}"),
        })?;
        Self::from_store(meta.config, meta.vocab, meta.num_classes, store)
    }
}

fn feature_dim(task: Task, sentence_dim: usize) -> usize {
    match task {
        Task::Single => sentence_dim,
        Task::Pair => 4 * sentence_dim,
    }
}
