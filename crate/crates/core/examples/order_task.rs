//! Train on the synthetic order task with and without direction masks.
//!
//! `cargo run --release --example order_task -- [seed] [max_epochs]`

use mssan::data::gen_order_task;
use mssan::encoder::EncoderConfig;
use mssan::harness::{examples_from_sentences, train_with, RunConfig, Task};
use mssan::masks::DistanceKind;

fn main() -> mssan::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let seed = args.first().copied().unwrap_or(0);
    let epochs = args.get(1).copied().unwrap_or(200) as usize;

    let corpus = gen_order_task(2000, 8, seed)?;
    let mut examples = examples_from_sentences(corpus, Task::Single)?;
    let test = examples.split_off(1600);

    for use_direction in [true, false] {
        let config = RunConfig {
            encoder: EncoderConfig {
                d_e: 32,
                n_heads: 4,
                d_h: Some(64),
                distance_cycle: vec![DistanceKind::None, DistanceKind::None],
                ..EncoderConfig::default()
            },
            use_direction,
            lr: 3e-3,
            epochs,
            seed,
            target_accuracy: Some(0.95),
            ..RunConfig::default()
        };
        println!("direction masks: {}", if use_direction { "on" } else { "off" });
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
