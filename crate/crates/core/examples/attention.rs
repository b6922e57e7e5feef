//! Multi-mask attention on one sentence: per-head weights under the default schedule.
//!
//! `cargo run --example attention`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mssan::attention::{attention_weights, AttentionParams};
use mssan::autodiff::{ParamStore, Tensor};
use mssan::data::{build_vocab, random_table, DepSentence};
use mssan::masks::{build_schedule, masks_for_sentence, DistanceKind, MaskOptions};

fn main() -> mssan::Result<()> {
    let tokens = ["the", "cat", "sat", "on", "the", "mat"];
    let heads = [2, 3, 0, 6, 6, 3];
    let sentence = DepSentence::new(tokens.iter().map(|t| t.to_string()).collect(), heads.to_vec(), None)?;
    let vocab = build_vocab([&sentence], 1, false)?;
    let (d_e, n_heads) = (12, 6);

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let table = random_table(&vocab, d_e, &mut rng);
    let ids = vocab.encode(&tokens);
    let x = Tensor::from_rows(&ids.iter().map(|&i| table.row(i).to_vec()).collect::<Vec<_>>());

    let mut store = ParamStore::new();
    let params = AttentionParams::init(&mut store, "attn", d_e, n_heads, &mut rng)?;
    let schedule = build_schedule(
        n_heads,
        &[DistanceKind::Word, DistanceKind::Dependency, DistanceKind::None],
    )?;
    let masks = masks_for_sentence(&schedule, tokens.len(), Some(&heads), MaskOptions::default())?;
    let weights = attention_weights(&x, &store, &params, &masks)?;

    for (spec, w) in schedule.heads().iter().zip(&weights) {
        println!("head {} / {}", spec.direction, spec.distance);
        for (i, t) in tokens.iter().enumerate() {
            let row: Vec<String> = w.row(i).iter().map(|v| format!("{v:.3}")).collect();
            println!("  {t:>4}  {}", row.join(" "));
        }
    }
    Ok(())
}
