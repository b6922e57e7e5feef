//! Structural-prior ablation grid on the synthetic tree task.
//!
//! `cargo run --release --example ablation -- [epochs]`

use mssan::data::gen_tree_task;
use mssan::encoder::EncoderConfig;
use mssan::harness::{ablation_csv, ablation_grid, examples_from_sentences, RunConfig, Task};

fn main() -> mssan::Result<()> {
    let epochs = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(15);
    let mut examples = examples_from_sentences(gen_tree_task(1500, 8, 0)?, Task::Single)?;
    let test = examples.split_off(1200);
    let base = RunConfig {
        encoder: EncoderConfig {
            d_e: 24,
            n_heads: 6,
            d_h: Some(48),
            ..EncoderConfig::default()
        },
        epochs,
        ..RunConfig::default()
    };
    print!("{}", ablation_csv(&ablation_grid(&base, &examples, &test)?));
    Ok(())
}
