//! Print the six default head masks for the bundled dependency-parsed sentence.
//!
//! `cargo run --example masks`

use std::path::Path;

use mssan::autodiff::is_masked;
use mssan::data::load_conllu;
use mssan::masks::{build_schedule, masks_for_sentence, tree_distances, DistanceKind, MaskOptions};

fn main() -> mssan::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/two_kids.conllu");
    let sentence = load_conllu(&path)?.remove(0);
    let l = sentence.len();

    let d = tree_distances(&sentence.heads)?;
    let (wash, kids) = (sentence.position("wash").unwrap(), sentence.position("kids").unwrap());
    println!("{}", sentence.tokens.join(" "));
    println!(
        "wash-kids: tree distance {}, word distance {}\n",
        d.get(wash, kids),
        wash.abs_diff(kids)
    );

    use DistanceKind::*;
    let schedule = build_schedule(6, &[Word, Dependency, None])?;
    let masks = masks_for_sentence(&schedule, l, Some(&sentence.heads), MaskOptions::default())?;
    for (spec, mask) in schedule.heads().iter().zip(&masks) {
        println!("{} / {}", spec.direction, spec.distance);
        print!("{:>10}", "");
        for t in &sentence.tokens {
            print!("{t:>9}");
        }
        println!();
        for (i, t) in sentence.tokens.iter().enumerate() {
            print!("{t:>10}");
            for j in 0..l {
                let v = mask.get(i, j);
                if is_masked(v) {
                    print!("{:>9}", "-inf");
                } else {
                    print!("{v:>9}");
                }
            }
            println!();
        }
        println!();
    }
    Ok(())
}
