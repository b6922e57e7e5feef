//! Train briefly on the tree task, then dump per-head attention heatmaps (CSV and PGM)
//! for one test sentence.
//!
//! `cargo run --release --example heatmap -- [out_dir]`

use std::path::PathBuf;

use mssan::data::gen_tree_task;
use mssan::encoder::EncoderConfig;
use mssan::harness::{emit_heatmap, examples_from_sentences, train, Example, RunConfig, Task};

fn main() -> mssan::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "heatmaps".into()));
    let mut examples = examples_from_sentences(gen_tree_task(1000, 8, 0)?, Task::Single)?;
    let test = examples.split_off(800);
    let config = RunConfig {
        encoder: EncoderConfig {
            d_e: 24,
            n_heads: 6,
            d_h: Some(48),
            ..EncoderConfig::default()
        },
        epochs: 5,
        ..RunConfig::default()
    };
    let (model, metrics) = train(&config, &examples, &test)?;
    println!("test accuracy {:.3}", metrics.final_test_accuracy().unwrap_or(f64::NAN));

    let Example::Single(sentence) = &test[0] else {
        unreachable!()
    };
    println!("{}", sentence.tokens.join(" "));
    for (map, path) in emit_heatmap(&model, sentence, &out)? {
        let peak: Vec<String> = (0..sentence.len())
            .map(|i| {
                let row = map.weights.row(i);
                let j = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
                sentence.tokens[j].clone()
            })
            .collect();
        println!("{:28} argmax per row: {}", map.name, peak.join(" "));
        println!("  {}", path.display());
    }
    Ok(())
}
