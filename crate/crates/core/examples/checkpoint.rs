//! Save a trained model, reload it, and confirm identical predictions.
//!
//! `cargo run --release --example checkpoint -- [path]`

use std::path::PathBuf;

use mssan::data::gen_order_task;
use mssan::encoder::EncoderConfig;
use mssan::harness::{examples_from_sentences, train, Example, Model, RunConfig, Task, Variant};
use mssan::masks::DistanceKind;

fn main() -> mssan::Result<()> {
    let path = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "order.ckpt".into()));
    let mut examples = examples_from_sentences(gen_order_task(400, 8, 0)?, Task::Single)?;
    let test = examples.split_off(320);
    let config = RunConfig {
        encoder: EncoderConfig {
            d_e: 16,
            n_heads: 4,
            distance_cycle: vec![DistanceKind::Word, DistanceKind::None],
            ..EncoderConfig::default()
        },
        variant: Variant::MssanSep,
        epochs: 3,
        ..RunConfig::default()
    };
    let (model, _) = train(&config, &examples, &test)?;
    model.save(&path)?;
    let restored = Model::load(&path)?;

    let refs: Vec<&Example> = test.iter().collect();
    let a = model.predict_logits(&refs)?;
    let b = restored.predict_logits(&refs)?;
    let identical = a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits());
    println!(
        "wrote {} ({} bytes, {} parameters); reloaded logits bit-identical: {identical}",
        path.display(),
        std::fs::metadata(&path)?.len(),
        restored.total_param_count()
    );
    Ok(())
}
