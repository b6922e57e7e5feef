//! Compare the one-encoder and two-encoder variants: parameters, sentence width and
//! training-step time.
//!
//! `cargo run --release --example variants_bench -- [d_e] [len] [batch] [measured]`

use mssan::harness::{bench, Variant};

fn main() -> mssan::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let d_e = args.first().copied().unwrap_or(300);
    let len = args.get(1).copied().unwrap_or(25);
    let batch = args.get(2).copied().unwrap_or(32);
    let measured = args.get(3).copied().unwrap_or(50);

    let one = bench(Variant::Mssan, d_e, len, batch, 3, measured, 0)?;
    let two = bench(Variant::MssanSep, d_e, len, batch, 3, measured, 0)?;
    println!("variant    encoder params  sentence dim  median ms/batch");
    for r in [&one, &two] {
        println!(
            "{:10} {:>14}  {:>12}  {:>15.2}",
            r.variant.to_string(),
            r.encoder_params,
            r.sentence_dim,
            r.median_ms
        );
    }
    println!(
        "ratios: params {:.3}, dim {:.3}, time {:.3}",
        two.encoder_params as f64 / one.encoder_params as f64,
        two.sentence_dim as f64 / one.sentence_dim as f64,
        two.median_ms / one.median_ms
    );
    Ok(())
}
