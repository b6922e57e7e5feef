//! Train on the synthetic tree task with and without dependency-distance heads.
//!
//! `cargo run --release --example tree_task -- [seed] [max_epochs] [alpha]`

use mssan::data::gen_tree_task;
use mssan::encoder::EncoderConfig;
use mssan::harness::{examples_from_sentences, train_with, RunConfig, Task};

fn main() -> mssan::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed: u64 = args.first().and_then(|a| a.parse().ok()).unwrap_or(0);
    let epochs: usize = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(60);
    let alpha: f64 = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(1.0);

    let corpus = gen_tree_task(2000, 8, seed)?;
    let mut examples = examples_from_sentences(corpus, Task::Single)?;
    let test = examples.split_off(1600);

    for use_dependency in [true, false] {
        let config = RunConfig {
            encoder: EncoderConfig {
                d_e: 24,
                n_heads: 6,
                d_h: Some(48),
                alpha,
                ..EncoderConfig::default()
            },
            use_dependency,
            epochs,
            seed,
            target_accuracy: Some(0.95),
            ..RunConfig::default()
        };
        let cycle = config.effective_encoder().distance_cycle;
        println!("distance cycle {cycle:?}");
        let (_, metrics) = train_with(&config, &examples, &test, |m| {
            println!(
                "  epoch {:3}  loss {:.4}  train {:.3}  test {:.3}  {:.1} ms/batch",
                m.epoch,
                m.loss,
                m.train_accuracy,
                m.test_accuracy.unwrap_or(f64::NAN),
                m.ms_per_batch
            );
        })?;
        println!(
            "  final test accuracy {:.3}",
            metrics.final_test_accuracy().unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
