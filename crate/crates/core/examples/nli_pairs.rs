//! Sentence-pair classification with the matching feature `[p, h, p ⊙ h, |p − h|]`.
//!
//! Hypotheses are copies of the premise (entailment), copies with one word replaced by
//! `not` (contradiction), or unrelated sentences (neutral).
//!
//! `cargo run --release --example nli_pairs`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mssan::data::{PairExample, NLI_LABELS};
use mssan::encoder::EncoderConfig;
use mssan::harness::{random_sentences, train, Example, RunConfig, Task};

fn main() -> mssan::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let premises = random_sentences(1200, 6, 12, 1, 1)?;
    let unrelated = random_sentences(1200, 6, 12, 1, 2)?;
    let examples: Vec<Example> = premises
        .into_iter()
        .zip(unrelated)
        .map(|(premise, other)| {
            let label = rng.gen_range(0..3);
            let hypothesis = match label {
                0 => premise.clone(),
                2 => {
                    let mut h = premise.clone();
                    let k = rng.gen_range(0..h.len());
                    h.tokens[k] = "not".into();
                    h
                }
                _ => other,
            };
            Example::Pair(PairExample {
                premise,
                hypothesis,
                label,
            })
        })
        .collect();
    let (train_set, test_set) = examples.split_at(1000);

    let config = RunConfig {
        task: Task::Pair,
        encoder: EncoderConfig {
            d_e: 24,
            n_heads: 6,
            d_h: Some(48),
            ..EncoderConfig::default()
        },
        epochs: 20,
        ..RunConfig::default()
    };
    let (model, metrics) = train(&config, train_set, test_set)?;
    for m in &metrics.epochs {
        println!(
            "epoch {:2}  loss {:.4}  test {:.3}",
            m.epoch,
            m.loss,
            m.test_accuracy.unwrap_or(f64::NAN)
        );
    }
    println!("labels {NLI_LABELS:?}, feature dim {}", model.feature_dim());
    Ok(())
}
