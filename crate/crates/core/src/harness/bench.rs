use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::{build_vocab, DepSentence};
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};

use super::config::{RunConfig, Variant};
use super::model::{Example, Model};
use super::train::Trainer;

/// `n` sentences of exactly `len` tokens drawn from `vocab_size` word forms, with
/// uniformly random trees and labels in `0..classes`.
pub fn random_sentences(
    n: usize,
    len: usize,
    vocab_size: usize,
    classes: usize,
    seed: u64,
) -> Result<Vec<DepSentence>> {
    if len == 0 || vocab_size == 0 || classes == 0 {
        return Err(Error::Config(
            "random_sentences needs positive len, vocab_size and classes".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let tokens = (0..len).map(|_| format!("w{}", rng.gen_range(0..vocab_size))).collect();
            let root = rng.gen_range(0..len);
            let mut order: Vec<usize> = (0..len).filter(|&i| i != root).collect();
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
            let mut heads = vec![0; len];
            let mut placed = vec![root];
            for v in order {
                heads[v] = placed[rng.gen_range(0..placed.len())] + 1;
                placed.push(v);
            }
            DepSentence::new(tokens, heads, Some(rng.gen_range(0..classes)))
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchReport {
    pub variant: Variant,
    pub d_e: usize,
    pub len: usize,
    pub batch: usize,
    pub warmup: usize,
    /// Per-batch training-step times in milliseconds, warm-up excluded.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub samples_ms: Vec<f64>,
    pub median_ms: f64,
    pub encoder_params: usize,
    pub sentence_dim: usize,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Time training steps (forward, backward, Adam) of one variant at the default
/// six-head schedule on random batches of fixed shape.
pub fn bench(
    variant: Variant,
    d_e: usize,
    len: usize,
    batch: usize,
    warmup: usize,
    measured: usize,
    seed: u64,
) -> Result<BenchReport> {
    if measured == 0 {
        return Err(Error::Config("bench needs at least one measured batch".into()));
    }
    let config = RunConfig {
        encoder: EncoderConfig {
            d_e,
            ..EncoderConfig::default()
        },
        variant,
        batch_size: batch,
        seed,
        ..RunConfig::default()
    };
    let sentences = random_sentences(batch * 4, len, 200, 2, seed)?;
    let vocab = build_vocab(&sentences, 1, false)?;
    let model = Model::new(config, vocab, 2)?;
    let (encoder_params, sentence_dim) = (model.encoder_param_count(), model.sentence_dim());
    let examples: Vec<Example> = sentences.into_iter().map(Example::Single).collect();
    let batches: Vec<Vec<&Example>> = examples.chunks(batch).map(|c| c.iter().collect()).collect();
    let mut trainer = Trainer::new(model);
    let mut samples_ms = Vec::with_capacity(measured);
    for i in 0..warmup + measured {
        let b = &batches[i % batches.len()];
        let start = Instant::now();
        trainer.step(b)?;
        if i >= warmup {
            samples_ms.push(start.elapsed().as_secs_f64() * 1e3);
        }
    }
    Ok(BenchReport {
        variant,
        d_e,
        len,
        batch,
        warmup,
        median_ms: median(&samples_ms),
        samples_ms,
        encoder_params,
        sentence_dim,
    })
}
